//! Exact rational linear programming: dense-tableau two-phase primal simplex
//! with Bland's anti-cycling rule. All variables have lower bound 0.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn flipped(self) -> Relation {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Clone, Debug)]
pub struct LpModel {
    names: Vec<String>,
    rows: Vec<Row>,
    objective: Vec<(usize, Rational)>,
    sense: Sense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Primal values by variable index (all zero unless optimal).
    pub values: Vec<Rational>,
    pub objective: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: String,
    pub lhs: Rational,
    pub relation: Relation,
    pub rhs: Rational,
    /// Signed slack of the violated relation; always negative.
    pub slack: Rational,
}

impl LpModel {
    pub fn new(sense: Sense) -> Self {
        LpModel {
            names: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Adds a constraint; panics if it references an undeclared variable.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) {
        for (j, _) in &coeffs {
            assert!(*j < self.names.len(), "constraint references undeclared variable {j}");
        }
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, Rational)>) {
        for (j, _) in &coeffs {
            assert!(*j < self.names.len(), "objective references undeclared variable {j}");
        }
        self.objective = coeffs;
    }

    pub fn objective_value(&self, values: &[Rational]) -> Rational {
        self.objective.iter().map(|(j, c)| c * &values[*j]).sum()
    }

    /// Exact violations of `values` (indexed by variable), including lower bounds.
    pub fn violations(&self, values: &[Rational]) -> Vec<Violation> {
        let mut out = Vec::new();
        for (j, v) in values.iter().enumerate() {
            if v.is_negative() {
                out.push(Violation {
                    constraint: format!("{} >= 0", self.names[j]),
                    lhs: v.clone(),
                    relation: Relation::Ge,
                    rhs: Rational::zero(),
                    slack: v.clone(),
                });
            }
        }
        for row in &self.rows {
            let lhs: Rational = row.coeffs.iter().map(|(j, c)| c * &values[*j]).sum();
            let slack = match row.relation {
                Relation::Le => &row.rhs - &lhs,
                Relation::Ge => &lhs - &row.rhs,
                Relation::Eq => -(&lhs - &row.rhs).abs(),
            };
            if slack.is_negative() {
                out.push(Violation {
                    constraint: row.name.clone(),
                    lhs,
                    relation: row.relation,
                    rhs: row.rhs.clone(),
                    slack,
                });
            }
        }
        out
    }
}

/// Checks a named point against every constraint; an empty list means feasible.
pub fn check_feasible_point(model: &LpModel, point: &BTreeMap<String, Rational>) -> Result<Vec<Violation>> {
    let mut values = vec![None; model.num_vars()];
    for (name, v) in point {
        let j = model.var_index(name).ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        values[j] = Some(v.clone());
    }
    let values: Vec<Rational> = values
        .into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| Error::UnknownVariable(format!("{} (unassigned)", model.var_name(j)))))
        .collect::<Result<_>>()?;
    Ok(model.violations(&values))
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    obj: Vec<Rational>,
    basic: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let piv = self.rows[p][q].clone();
        let nz: Vec<usize> = (0..=self.width).filter(|&j| !self.rows[p][j].is_zero()).collect();
        for &j in &nz {
            self.rows[p][j] = &self.rows[p][j] / &piv;
        }
        let prow: Vec<(usize, Rational)> = nz.iter().map(|&j| (j, self.rows[p][j].clone())).collect();
        for i in 0..self.rows.len() {
            if i == p || self.rows[i][q].is_zero() {
                continue;
            }
            let f = self.rows[i][q].clone();
            let row = &mut self.rows[i];
            for (j, a) in &prow {
                row[*j] -= &f * a;
            }
        }
        if !self.obj[q].is_zero() {
            let f = self.obj[q].clone();
            for (j, a) in &prow {
                self.obj[*j] -= &f * a;
            }
        }
        self.basic[p] = q;
    }

    /// Bland's rule iterations over `allowed` columns; false means unbounded.
    fn run(&mut self, allowed: &[bool]) -> bool {
        let rhs = self.rhs();
        loop {
            let Some(q) = (0..self.width).find(|&j| allowed[j] && self.obj[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][q];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rows[i][rhs] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basic[i] < self.basic[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((p, _)) => self.pivot(p, q),
                None => return false,
            }
        }
    }
}

/// Solves the model exactly; re-solving the same model gives an identical outcome.
pub fn solve_lp(model: &LpModel) -> LpOutcome {
    let n = model.num_vars();
    let m = model.rows.len();

    // Normalize rows to nonnegative right-hand sides.
    let mut norm: Vec<(Vec<(usize, Rational)>, Relation, Rational)> = Vec::with_capacity(m);
    for row in &model.rows {
        if row.rhs.is_negative() {
            norm.push((
                row.coeffs.iter().map(|(j, c)| (*j, -c)).collect(),
                row.relation.flipped(),
                -&row.rhs,
            ));
        } else {
            norm.push((row.coeffs.clone(), row.relation, row.rhs.clone()));
        }
    }

    let n_slack = norm.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = norm.iter().filter(|r| r.1 != Relation::Le).count();
    let width = n + n_slack + n_art;
    let mut rows = vec![vec![Rational::zero(); width + 1]; m];
    let mut basic = vec![0; m];
    let mut is_art = vec![false; width];
    let (mut next_slack, mut next_art) = (n, n + n_slack);
    for (i, (coeffs, rel, rhs)) in norm.iter().enumerate() {
        for (j, c) in coeffs {
            rows[i][*j] += c;
        }
        rows[i][width] = rhs.clone();
        match rel {
            Relation::Le => {
                rows[i][next_slack] = Rational::one();
                basic[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                rows[i][next_slack] = -Rational::one();
                next_slack += 1;
                rows[i][next_art] = Rational::one();
                is_art[next_art] = true;
                basic[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                rows[i][next_art] = Rational::one();
                is_art[next_art] = true;
                basic[i] = next_art;
                next_art += 1;
            }
        }
    }

    // Phase 1: minimize the sum of artificials.
    let mut obj = vec![Rational::zero(); width + 1];
    for (i, row) in rows.iter().enumerate() {
        if is_art[basic[i]] {
            for j in 0..=width {
                if (j == width || !is_art[j]) && !row[j].is_zero() {
                    obj[j] -= &row[j];
                }
            }
        }
    }
    let mut tab = Tableau { rows, obj, basic, width };
    let all: Vec<bool> = vec![true; width];
    tab.run(&all);
    let infeasible = || LpOutcome {
        status: LpStatus::Infeasible,
        values: vec![Rational::zero(); n],
        objective: Rational::zero(),
    };
    if !tab.obj[width].is_zero() {
        return infeasible();
    }

    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.rows.len() {
        if is_art[tab.basic[i]] {
            match (0..width).find(|&j| !is_art[j] && !tab.rows[i][j].is_zero()) {
                Some(q) => {
                    tab.pivot(i, q);
                    i += 1;
                }
                None => {
                    tab.rows.remove(i);
                    tab.basic.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }

    // Phase 2 on the original objective, as a minimization.
    let mut cost = vec![Rational::zero(); width];
    for (j, c) in &model.objective {
        match model.sense {
            Sense::Min => cost[*j] += c,
            Sense::Max => cost[*j] -= c,
        }
    }
    let mut obj = vec![Rational::zero(); width + 1];
    obj[..width].clone_from_slice(&cost);
    for (i, row) in tab.rows.iter().enumerate() {
        let cb = &cost[tab.basic[i]];
        if cb.is_zero() {
            continue;
        }
        for j in 0..=width {
            if !row[j].is_zero() {
                obj[j] -= cb * &row[j];
            }
        }
    }
    tab.obj = obj;
    let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
    if !tab.run(&allowed) {
        return LpOutcome {
            status: LpStatus::Unbounded,
            values: vec![Rational::zero(); n],
            objective: Rational::zero(),
        };
    }
    let mut values = vec![Rational::zero(); n];
    for (i, &b) in tab.basic.iter().enumerate() {
        if b < n {
            values[b] = tab.rows[i][width].clone();
        }
    }
    let objective = model.objective_value(&values);
    LpOutcome {
        status: LpStatus::Optimal,
        values,
        objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    #[test]
    fn single_lower_bound() {
        let mut m = LpModel::new(Sense::Min);
        let x = m.add_var("x");
        m.add_constraint("lb", vec![(x, rat(1, 1))], Relation::Ge, rat(3, 1));
        m.set_objective(vec![(x, rat(1, 1))]);
        let out = solve_lp(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.values, vec![rat(3, 1)]);
        let bad = BTreeMap::from([("x".to_string(), rat(2, 1))]);
        let viol = check_feasible_point(&m, &bad).unwrap();
        assert_eq!(viol.len(), 1);
        assert_eq!(viol[0].slack, rat(-1, 1));
        let good = BTreeMap::from([("x".to_string(), rat(3, 1))]);
        assert!(check_feasible_point(&m, &good).unwrap().is_empty());
        let unknown = BTreeMap::from([("y".to_string(), rat(3, 1))]);
        assert!(matches!(check_feasible_point(&m, &unknown), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut m = LpModel::new(Sense::Min);
        let x = m.add_var("x");
        m.add_constraint("neg", vec![(x, rat(1, 1))], Relation::Le, rat(-1, 1));
        assert_eq!(solve_lp(&m).status, LpStatus::Infeasible);

        let mut m = LpModel::new(Sense::Max);
        let x = m.add_var("x");
        m.add_constraint("lb", vec![(x, rat(1, 1))], Relation::Ge, rat(1, 1));
        m.set_objective(vec![(x, rat(1, 1))]);
        assert_eq!(solve_lp(&m).status, LpStatus::Unbounded);
    }

    #[test]
    fn two_variable_polygon() {
        let mut m = LpModel::new(Sense::Max);
        let x = m.add_var("x");
        let y = m.add_var("y");
        m.add_constraint("a", vec![(x, rat(1, 1)), (y, rat(2, 1))], Relation::Le, rat(4, 1));
        m.add_constraint("b", vec![(x, rat(3, 1)), (y, rat(1, 1))], Relation::Le, rat(6, 1));
        m.set_objective(vec![(x, rat(1, 1)), (y, rat(1, 1))]);
        let out = solve_lp(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.values, vec![rat(8, 5), rat(6, 5)]);
        assert_eq!(out.objective, rat(14, 5));
        assert_eq!(solve_lp(&m), out);
    }

    #[test]
    fn redundant_equalities() {
        let mut m = LpModel::new(Sense::Min);
        let x = m.add_var("x");
        let y = m.add_var("y");
        m.add_constraint("e1", vec![(x, rat(1, 1)), (y, rat(1, 1))], Relation::Eq, rat(2, 1));
        m.add_constraint("e2", vec![(x, rat(2, 1)), (y, rat(2, 1))], Relation::Eq, rat(4, 1));
        m.set_objective(vec![(x, rat(1, 1)), (y, rat(3, 1))]);
        let out = solve_lp(&m);
        assert_eq!(out.values, vec![rat(2, 1), rat(0, 1)]);
    }

    /// Solves a square linear system exactly; None if singular.
    fn gauss(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, p);
            b.swap(col, p);
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = &a[r][col] / &a[col][col];
                    for c in col..n {
                        let d = &f * &a[col][c];
                        a[r][c] -= d;
                    }
                    let d = &f * &b[col];
                    b[r] -= d;
                }
            }
        }
        Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
    }

    /// Best vertex by enumerating every choice of `nv` tight constraints.
    fn vertex_oracle(m: &LpModel) -> Option<Rational> {
        let nv = m.num_vars();
        let mut planes: Vec<(Vec<Rational>, Rational)> = Vec::new();
        for j in 0..nv {
            let mut a = vec![Rational::zero(); nv];
            a[j] = Rational::one();
            planes.push((a, Rational::zero()));
        }
        for row in m.rows() {
            let mut a = vec![Rational::zero(); nv];
            for (j, c) in &row.coeffs {
                a[*j] += c;
            }
            planes.push((a, row.rhs.clone()));
        }
        let np = planes.len();
        let mut best: Option<Rational> = None;
        for mask in 0u32..(1 << np) {
            if mask.count_ones() as usize != nv {
                continue;
            }
            let chosen: Vec<usize> = (0..np).filter(|i| mask >> i & 1 == 1).collect();
            let a = chosen.iter().map(|&i| planes[i].0.clone()).collect();
            let b = chosen.iter().map(|&i| planes[i].1.clone()).collect();
            if let Some(x) = gauss(a, b) {
                if m.violations(&x).is_empty() {
                    let v = m.objective_value(&x);
                    let better = match (&best, m.sense()) {
                        (None, _) => true,
                        (Some(b), Sense::Min) => v < *b,
                        (Some(b), Sense::Max) => v > *b,
                    };
                    if better {
                        best = Some(v);
                    }
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_vertex_enumeration(
            nv in 1usize..=4,
            rows in proptest::collection::vec((proptest::collection::vec(-4i64..=4, 4), 0usize..3, -6i64..=12), 1..=4),
            obj in proptest::collection::vec(-5i64..=5, 4),
            maximize in any::<bool>(),
        ) {
            let mut m = LpModel::new(if maximize { Sense::Max } else { Sense::Min });
            let vars: Vec<usize> = (0..nv).map(|j| m.add_var(format!("x{j}"))).collect();
            for (k, (coeffs, rel, rhs)) in rows.iter().enumerate() {
                let rel = [Relation::Le, Relation::Eq, Relation::Ge][*rel];
                let c = vars.iter().map(|&j| (j, rat(coeffs[j], 1))).collect();
                m.add_constraint(format!("r{k}"), c, rel, rat(*rhs, 2));
            }
            // box keeps every instance bounded
            let total = vars.iter().map(|&j| (j, rat(1, 1))).collect();
            m.add_constraint("box", total, Relation::Le, rat(10, 1));
            m.set_objective(vars.iter().map(|&j| (j, rat(obj[j], 1))).collect());
            let out = solve_lp(&m);
            match vertex_oracle(&m) {
                None => prop_assert_eq!(out.status, LpStatus::Infeasible),
                Some(best) => {
                    prop_assert_eq!(out.status, LpStatus::Optimal);
                    prop_assert!(m.violations(&out.values).is_empty());
                    prop_assert_eq!(out.objective, best);
                }
            }
        }
    }
}
