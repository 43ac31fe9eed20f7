//! Subtour elimination LP for the s-t path problem, solved by cutting planes.

use num::BigInt;
use serde_json::{json, Value};

use crate::flow::{capacity_from_edges, cut_value, gomory_hu, max_flow, Capacity};
use crate::graph::members;
use crate::instance::Instance;
use crate::rational::{common_denominator, Rational};
use crate::ratlp::{solve_lp, LpModel, LpStatus, Relation, Sense};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub n: usize,
    pub s: usize,
    pub t: usize,
    /// Value per complete-graph edge.
    pub x: Vec<Rational>,
    /// Edges with positive value, ascending.
    pub support: Vec<usize>,
    pub value: Rational,
    /// Least common denominator of all entries of `x`.
    pub denom: BigInt,
    /// Cut constraints generated while solving (vertex sides).
    pub cuts: Vec<Vec<bool>>,
}

impl LpSolution {
    /// Wraps an arbitrary edge vector; no feasibility check is made here.
    pub fn from_vector(inst: &Instance, x: Vec<Rational>) -> Self {
        assert_eq!(x.len(), inst.m());
        let support = (0..x.len()).filter(|&e| x[e].is_positive()).collect();
        let value = inst.cost_of_vector(&x);
        let denom = common_denominator(x.iter());
        LpSolution {
            n: inst.n(),
            s: inst.s(),
            t: inst.t(),
            x,
            support,
            value,
            denom,
            cuts: Vec::new(),
        }
    }

    pub fn capacity(&self, inst: &Instance) -> Capacity {
        capacity_from_edges(self.n, inst.all_ends(), &self.x)
    }

    /// x(delta(U)).
    pub fn cut_size(&self, inst: &Instance, side: &[bool]) -> Rational {
        self.support
            .iter()
            .filter(|&&e| {
                let (u, v) = inst.ends(e);
                side[u] != side[v]
            })
            .map(|&e| &self.x[e])
            .sum()
    }

    /// Support edges as `[["u","v","p/q"], ...]`.
    pub fn to_json(&self, inst: &Instance) -> Value {
        Value::Array(
            self.support
                .iter()
                .map(|&e| {
                    let (u, v) = inst.ends(e);
                    json!([u.to_string(), v.to_string(), self.x[e].to_pq()])
                })
                .collect(),
        )
    }
}

/// Right-hand side f(U): 1 if U separates s and t, 2 otherwise.
pub fn cut_demand(side: &[bool], s: usize, t: usize) -> Rational {
    if side[s] != side[t] {
        Rational::from_integer(1)
    } else {
        Rational::from_integer(2)
    }
}

fn var_name(u: usize, v: usize) -> String {
    format!("x_{u}_{v}")
}

fn cut_name(side: &[bool]) -> String {
    let m: Vec<String> = members(side).iter().map(|v| v.to_string()).collect();
    format!("cut[{}]", m.join(","))
}

/// Degree equalities plus `x(delta(U)) >= f(U)` for every listed cut; objective c.
pub fn subtour_model(inst: &Instance, cuts: &[Vec<bool>]) -> LpModel {
    let n = inst.n();
    let mut model = LpModel::new(Sense::Min);
    for e in 0..inst.m() {
        let (u, v) = inst.ends(e);
        model.add_var(var_name(u, v));
    }
    for w in 0..n {
        let coeffs = (0..inst.m())
            .filter(|&e| {
                let (u, v) = inst.ends(e);
                u == w || v == w
            })
            .map(|e| (e, Rational::one()))
            .collect();
        let deg = if w == inst.s() || w == inst.t() { 1 } else { 2 };
        model.add_constraint(format!("deg[{w}]"), coeffs, Relation::Eq, Rational::from_integer(deg));
    }
    for side in cuts {
        let coeffs = (0..inst.m())
            .filter(|&e| {
                let (u, v) = inst.ends(e);
                side[u] != side[v]
            })
            .map(|e| (e, Rational::one()))
            .collect();
        model.add_constraint(cut_name(side), coeffs, Relation::Ge, cut_demand(side, inst.s(), inst.t()));
    }
    model.set_objective((0..inst.m()).map(|e| (e, inst.edge_cost(e).clone())).collect());
    model
}

/// A most violated cut constraint for `x`, or `None` if `x` satisfies all of them.
/// s-t cuts are reported with `s` inside U; other cuts with s and t outside.
pub fn separate(inst: &Instance, x: &[Rational]) -> Option<(Vec<bool>, Rational)> {
    let n = inst.n();
    let (s, t) = (inst.s(), inst.t());
    let cap = capacity_from_edges(n, inst.all_ends(), x);
    let mut best: Option<(Vec<usize>, Vec<bool>, Rational)> = None;
    let mut offer = |side: Vec<bool>, viol: Rational| {
        if !viol.is_positive() {
            return;
        }
        let key = members(&side);
        let better = match &best {
            None => true,
            Some((k, _, v)) => viol > *v || (viol == *v && key < *k),
        };
        if better {
            best = Some((key, side, viol));
        }
    };

    let (st_value, st_side) = max_flow(&cap, s, t);
    offer(st_side, Rational::one() - st_value);

    // Cuts not separating s and t: contract {s, t} into one node.
    if n >= 3 {
        let others: Vec<usize> = (0..n).filter(|&v| v != s && v != t).collect();
        let k = others.len() + 1;
        let mut small = vec![vec![Rational::zero(); k]; k];
        for (i, &u) in others.iter().enumerate() {
            for (j, &v) in others.iter().enumerate() {
                small[i + 1][j + 1] = cap[u][v].clone();
            }
            let w = &cap[u][s] + &cap[u][t];
            small[0][i + 1] = w.clone();
            small[i + 1][0] = w;
        }
        let tree = gomory_hu(&small);
        for (v, _, w) in tree.edges() {
            let viol = Rational::from_integer(2) - w;
            if !viol.is_positive() {
                continue;
            }
            let fc = tree.fundamental_cut(v);
            let outside = fc[0];
            let mut side = vec![false; n];
            for (i, &u) in others.iter().enumerate() {
                side[u] = fc[i + 1] != outside;
            }
            debug_assert_eq!(cut_value(&cap, &side), *w);
            offer(side, viol);
        }
    }
    best.map(|(_, side, viol)| (side, viol))
}

/// Cutting-plane loop: starts from degree equalities and the cuts {s}, {t}.
pub fn solve_subtour_lp(inst: &Instance) -> Result<LpSolution> {
    let n = inst.n();
    let (s, t) = (inst.s(), inst.t());
    let mut single_s = vec![false; n];
    single_s[s] = true;
    let mut single_t = vec![false; n];
    single_t[t] = true;
    let mut cuts = vec![single_s, single_t];
    loop {
        let model = subtour_model(inst, &cuts);
        let out = solve_lp(&model);
        if out.status != LpStatus::Optimal {
            return Err(Error::Assertion(format!("subtour relaxation is {:?}", out.status)));
        }
        match separate(inst, &out.values) {
            Some((side, _)) => {
                if cuts.contains(&side) {
                    return Err(Error::Assertion(format!("separation repeated {}", cut_name(&side))));
                }
                cuts.push(side);
            }
            None => {
                let mut sol = LpSolution::from_vector(inst, out.values);
                sol.cuts = cuts;
                return Ok(sol);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_id;
    use crate::instance::{gen_random_metric, GenKind};
    use crate::rational::rat;
    use crate::ratlp::check_feasible_point;
    use std::collections::BTreeMap;

    #[test]
    fn three_vertices() {
        let inst = Instance::from_fn(3, 0, 2, |u, v| rat((u + v) as i64, 1)).unwrap();
        let sol = solve_subtour_lp(&inst).unwrap();
        assert_eq!(sol.x[edge_id(3, 0, 1)], rat(1, 1));
        assert_eq!(sol.x[edge_id(3, 1, 2)], rat(1, 1));
        assert_eq!(sol.x[edge_id(3, 0, 2)], rat(0, 1));
        assert_eq!(sol.value, rat(4, 1));
    }

    #[test]
    fn hamiltonian_path_is_feasible() {
        let n = 6;
        let inst = Instance::from_fn(n, 0, 5, |_, _| rat(1, 1)).unwrap();
        let mut x = vec![rat(0, 1); inst.m()];
        for v in 0..5 {
            x[edge_id(n, v, v + 1)] = rat(1, 1);
        }
        assert!(separate(&inst, &x).is_none());
    }

    #[test]
    fn two_disjoint_cycles_are_separated() {
        let n = 6;
        let inst = Instance::from_fn(n, 0, 1, |_, _| rat(1, 1)).unwrap();
        let mut x = vec![rat(0, 1); inst.m()];
        x[edge_id(n, 0, 1)] = rat(1, 1);
        for (u, v) in [(2, 3), (3, 4), (4, 5), (5, 2)] {
            x[edge_id(n, u, v)] = rat(1, 1);
        }
        let (side, viol) = separate(&inst, &x).unwrap();
        assert_eq!(viol, rat(2, 1));
        assert_eq!(members(&side), vec![2, 3, 4, 5]);
    }

    #[test]
    fn optimum_passes_explicit_check() {
        for seed in [1, 2, 3] {
            let inst = gen_random_metric(8, seed, GenKind::Euclidean);
            let sol = solve_subtour_lp(&inst).unwrap();
            let model = subtour_model(&inst, &sol.cuts);
            let point: BTreeMap<String, Rational> = (0..inst.m())
                .map(|e| {
                    let (u, v) = inst.ends(e);
                    (var_name(u, v), sol.x[e].clone())
                })
                .collect();
            assert!(check_feasible_point(&model, &point).unwrap().is_empty());
            assert!(separate(&inst, &sol.x).is_none());
            let total: Rational = sol.x.iter().sum();
            assert_eq!(total, Rational::from_integer(7));
        }
    }
}
