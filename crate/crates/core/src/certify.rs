//! Exact inequality ledger for a solver run, special-case certificates, the
//! 8/5 best-of-many certificate and brute-force oracles.

use serde::{Deserialize, Serialize};

use crate::bomd::{
    forest_tour_with_join, parity_set, run_bomd, run_trees, BomdOptions, BomdRun, StTour, TourKind, TreeRun,
};
use crate::cuts::{intersection_bound, NarrowCutChain};
use crate::graph::{edge_id, is_connected};
use crate::instance::Instance;
use crate::joins::{check_tjoin_polyhedron, min_tjoin, min_tjoin_full, DEFAULT_MATCHING_CAP};
use crate::rational::Rational;
use crate::reconnect::{BadEdgeIndex, DropRule, PlanStatus, ReconnectionPlan};
use crate::subtour::{separate, solve_subtour_lp, LpSolution};
use crate::treedecomp::{audit_combination, CombinationStats, TreeCombination, TreeEntry};
use crate::{Error, Result};

pub const BRUTE_FORCE_CAP: usize = 16;

/// Minimum Hamiltonian s-t path cost by subset dynamic programming.
pub fn brute_force_opt(inst: &Instance) -> Result<Rational> {
    let n = inst.n();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::BruteForceCap {
            n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let (s, t) = (inst.s(), inst.t());
    let inner: Vec<usize> = (0..n).filter(|&v| v != s && v != t).collect();
    let k = inner.len();
    if k == 0 {
        return Ok(inst.cost(s, t).clone());
    }
    let full = (1usize << k) - 1;
    let mut dp: Vec<Option<Rational>> = vec![None; (full + 1) * k];
    for (j, &v) in inner.iter().enumerate() {
        dp[(1 << j) * k + j] = Some(inst.cost(s, v).clone());
    }
    for mask in 1..=full {
        for j in 0..k {
            let Some(base) = dp[mask * k + j].clone() else { continue };
            for l in 0..k {
                if mask >> l & 1 == 1 {
                    continue;
                }
                let next = mask | 1 << l;
                let cand = &base + inst.cost(inner[j], inner[l]);
                let slot = &mut dp[next * k + l];
                if slot.as_ref().map_or(true, |cur| cand < *cur) {
                    *slot = Some(cand);
                }
            }
        }
    }
    Ok((0..k)
        .map(|j| dp[full * k + j].clone().expect("reachable") + inst.cost(inner[j], t))
        .min()
        .expect("nonempty"))
}

/// Per-cut coefficient of c(x^Q) in the forest-side total for a completed cut.
pub fn multiplier(x: &Rational, gamma: &Rational) -> Rational {
    let two = Rational::from_integer(2);
    let num = &(&two - x) - &(&two * gamma);
    let den = &two * &(&two - x);
    &(&num / &den) + &(x - &two)
}

/// Coefficient for any narrow cut: x - 2 above the completion threshold 2 - 2 gamma.
pub fn cut_multiplier(x: &Rational, gamma: &Rational) -> Rational {
    let two = Rational::from_integer(2);
    if *x > &two - &(&two * gamma) {
        x - &two
    } else {
        multiplier(x, gamma)
    }
}

/// Balance value of min(3/2 + gamma z, 2 - z): 2 - 1/(2 + 2 gamma).
pub fn final_ratio(gamma: &Rational) -> Rational {
    let two = Rational::from_integer(2);
    &two - &(Rational::one() / (&two + &(&two * gamma)))
}

/// (1 - gamma - x/2)(x - 1)/(2 - x).
pub fn bomc_coefficient(x: &Rational, gamma: &Rational) -> Rational {
    let one = Rational::one();
    let two = Rational::from_integer(2);
    let a = &(&one - gamma) - &(x / &two);
    &(&a * &(x - &one)) / &(&two - x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cmp {
    Le,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<usize>,
    pub lhs: Rational,
    pub cmp: Cmp,
    pub rhs: Rational,
    pub passed: bool,
}

impl CheckRow {
    fn new(name: &str, lhs: Rational, cmp: Cmp, rhs: Rational) -> Self {
        let mut row = CheckRow {
            name: name.to_string(),
            tree: None,
            cut: None,
            lhs,
            cmp,
            rhs,
            passed: false,
        };
        row.passed = row.evaluate();
        row
    }

    pub fn le(name: &str, lhs: Rational, rhs: Rational) -> Self {
        Self::new(name, lhs, Cmp::Le, rhs)
    }

    pub fn eq(name: &str, lhs: Rational, rhs: Rational) -> Self {
        Self::new(name, lhs, Cmp::Eq, rhs)
    }

    /// A yes/no fact encoded as 1 = 1 or 0 = 1.
    pub fn truth(name: &str, ok: bool) -> Self {
        let lhs = if ok { Rational::one() } else { Rational::zero() };
        Self::new(name, lhs, Cmp::Eq, Rational::one())
    }

    pub fn tree(mut self, i: usize) -> Self {
        self.tree = Some(i);
        self
    }

    pub fn cut(mut self, j: usize) -> Self {
        self.cut = Some(j);
        self
    }

    pub fn evaluate(&self) -> bool {
        match self.cmp {
            Cmp::Le => self.lhs <= self.rhs,
            Cmp::Eq => self.lhs == self.rhs,
        }
    }

    pub fn describe(&self) -> String {
        let op = match self.cmp {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
        };
        let mut out = format!("{}: {} {op} {}", self.name, self.lhs, self.rhs);
        if let Some(i) = self.tree {
            out.push_str(&format!(" (tree {i})"));
        }
        if let Some(j) = self.cut {
            out.push_str(&format!(" (cut {})", j + 1));
        }
        out
    }
}

fn first_failure(rows: &[CheckRow]) -> Option<&CheckRow> {
    rows.iter().find(|r| !r.passed)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialCases {
    /// (a) no support edge lies in two narrow cuts.
    pub disjoint: bool,
    /// (b) every support edge lies in at most two narrow cuts.
    pub two_per_edge: bool,
    /// (c) every narrow cut has size at most 3/2.
    pub all_small: bool,
    /// (d) sizes above 3/2 all equal this single value.
    pub one_not_small: Option<Rational>,
}

pub fn detect_special_cases(xstar: &LpSolution, chain: &NarrowCutChain) -> SpecialCases {
    let most = xstar
        .support
        .iter()
        .map(|&e| chain.cuts_of_edge(e).len())
        .max()
        .unwrap_or(0);
    let three_halves = Rational::new(3, 2);
    let mut large: Vec<Rational> = chain.sizes().into_iter().filter(|x| *x > three_halves).collect();
    large.sort();
    large.dedup();
    SpecialCases {
        disjoint: most <= 1,
        two_per_edge: most <= 2,
        all_small: large.is_empty(),
        one_not_small: (large.len() == 1).then(|| large[0].clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialCertificate {
    pub case: String,
    /// Weighted average of c(P_1) over the trees (and branches).
    pub average: Rational,
    pub bound: Rational,
    /// True when no tree needed a doubled reconnection tree.
    pub reconnection_empty: bool,
    pub checks: Vec<CheckRow>,
}

impl SpecialCertificate {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|r| r.passed)
    }
}

/// Support-restricted tour after deleting the lonely edges of `deleted` cuts, with
/// y = x*/2 + x^Q/2 over narrow cuts meeting the forest evenly.
struct DeletionOutcome {
    tour_cost: Rational,
    y_cost: Rational,
    join_cost: Rational,
    forest_cost: Rational,
    in_polyhedron: bool,
    reconnection_empty: bool,
}

fn deletion_tour(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    stats: &CombinationStats,
    tree: &TreeEntry,
    deleted: &[usize],
    cap: usize,
) -> Result<DeletionOutcome> {
    let removed: Vec<usize> = deleted
        .iter()
        .map(|&j| tree.lonely_edge(chain, j).expect("lonely edge"))
        .collect();
    let forest: Vec<usize> = tree.edges.iter().copied().filter(|e| !removed.contains(e)).collect();
    let half = Rational::new(1, 2);
    let mut y: Vec<Rational> = xstar.x.iter().map(|v| v * &half).collect();
    for (j, q) in chain.cuts.iter().enumerate() {
        if forest.iter().filter(|&&e| q.contains(e)).count() % 2 == 0 {
            for e in 0..inst.m() {
                if !stats.xq[j][e].is_zero() {
                    y[e] += &stats.xq[j][e] * &half;
                }
            }
        }
    }
    let t_set = parity_set(inst, &forest);
    let in_polyhedron = check_tjoin_polyhedron(inst, &y, &t_set).is_none();
    let costs: Vec<Option<Rational>> = (0..inst.m())
        .map(|e| xstar.x[e].is_positive().then(|| inst.edge_cost(e).clone()))
        .collect();
    let join = min_tjoin(inst.n(), &t_set, &costs, cap)?;
    let out = forest_tour_with_join(inst, &forest, &join.edges)?;
    Ok(DeletionOutcome {
        tour_cost: out.tour.multigraph_cost,
        y_cost: inst.cost_of_vector(&y),
        join_cost: join.cost,
        forest_cost: inst.cost_of(&forest),
        in_polyhedron,
        reconnection_empty: out.reconnection.is_empty(),
    })
}

fn deletion_certificate(
    case: &str,
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
    branches: &dyn Fn(&TreeEntry) -> Vec<Vec<usize>>,
    cap: usize,
) -> Result<SpecialCertificate> {
    let mut checks = Vec::new();
    let mut average = Rational::zero();
    let mut fractional = Rational::zero();
    let mut reconnection_empty = true;
    for (i, tree) in combo.trees.iter().enumerate() {
        let sets = branches(tree);
        let weight = &tree.lambda / &Rational::from_integer(sets.len() as i64);
        for deleted in &sets {
            let out = deletion_tour(inst, xstar, chain, stats, tree, deleted, cap)?;
            checks.push(CheckRow::truth("y in T-join polyhedron", out.in_polyhedron).tree(i));
            checks.push(CheckRow::le("c(J) <= c(y)", out.join_cost.clone(), out.y_cost.clone()).tree(i));
            checks.push(CheckRow::truth("reconnection empty", out.reconnection_empty).tree(i));
            reconnection_empty &= out.reconnection_empty;
            average += &weight * &out.tour_cost;
            fractional += &weight * &(&out.forest_cost + &out.y_cost);
        }
    }
    let bound = Rational::new(3, 2) * xstar.value.clone();
    checks.push(CheckRow::le("average c(P_1) <= c(F) + c(y)", average.clone(), fractional.clone()));
    checks.push(CheckRow::le("average c(F) + c(y) <= 3/2 c(x*)", fractional, bound.clone()));
    Ok(SpecialCertificate {
        case: case.into(),
        average,
        bound,
        reconnection_empty,
        checks,
    })
}

/// Pairwise-disjoint narrow cuts: delete every lonely edge, join on the support.
pub fn certify_disjoint(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
    cap: usize,
) -> Result<SpecialCertificate> {
    deletion_certificate(
        "disjoint",
        inst,
        xstar,
        chain,
        combo,
        stats,
        &|tree| vec![tree.lonely_cuts.clone()],
        cap,
    )
}

/// At most two narrow cuts per edge: two equally likely branches deleting the lonely
/// edges of odd-numbered or of even-numbered cuts only.
pub fn certify_alternating(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
    cap: usize,
) -> Result<SpecialCertificate> {
    deletion_certificate(
        "two-per-edge",
        inst,
        xstar,
        chain,
        combo,
        stats,
        &|tree| {
            (0..2)
                .map(|p| tree.lonely_cuts.iter().copied().filter(|j| j % 2 == p).collect())
                .collect()
        },
        cap,
    )
}

/// All cuts small: forest pipeline at gamma = 0 with the leftmost drop rule.
pub fn certify_all_small(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
    opts: &BomdOptions,
) -> Result<SpecialCertificate> {
    let opts = BomdOptions {
        gamma: Rational::zero(),
        rule: DropRule::Leftmost,
        ..opts.clone()
    };
    let trees = run_trees(inst, xstar, chain, combo, stats, &opts)?;
    let half = Rational::new(1, 2);
    let mut checks = Vec::new();
    let mut average = Rational::zero();
    let mut fractional = Rational::zero();
    let mut reconnection_empty = true;
    for (run, tree) in trees.iter().zip(&combo.trees) {
        let i = run.index;
        checks.push(CheckRow::truth("y_F in T-join polyhedron", run.polyhedron_violation.is_none()).tree(i));
        checks.extend(p1_rows(run));
        for w in tree.lonely_cuts.windows(2) {
            let (lhs, rhs) = intersection_bound(xstar, &chain.cuts[w[0]], &chain.cuts[w[1]]);
            checks.push(CheckRow::le("x*(Q' & Q) <= (x*(Q') + x*(Q))/2 - 1", lhs.clone(), rhs).tree(i).cut(w[1]));
            checks.push(CheckRow::le("x*(Q' & Q) <= 1/2", lhs, half.clone()).tree(i).cut(w[1]));
        }
        let lonely_total: Rational = tree
            .lonely_cuts
            .iter()
            .map(|&j| inst.edge_cost(tree.lonely_edge(chain, j).expect("lonely edge")).clone())
            .sum();
        let surcharge = &run.y_modified_cost - &run.y_cost;
        checks.push(CheckRow::le("leftmost surcharge <= sum c(e_S^Q)/2", surcharge, &lonely_total * &half).tree(i));
        reconnection_empty &= run.p1.reconnection.is_empty();
        average += &tree.lambda * &run.p1.tour.multigraph_cost;
        fractional += &tree.lambda * &(&run.forest_cost + &run.y_modified_cost);
    }
    let bound = Rational::new(3, 2) * xstar.value.clone();
    checks.push(CheckRow::le("average c(F) + c'(y_F) <= 3/2 c(x*)", fractional, bound.clone()));
    checks.push(CheckRow::le("average c(P_1) <= 3/2 c(x*)", average.clone(), bound.clone()));
    Ok(SpecialCertificate {
        case: "all-small".into(),
        average,
        bound,
        reconnection_empty,
        checks,
    })
}

/// One large size z: the standard ledger at gamma = 1/16.
pub fn certify_one_not_small(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
    opts: &BomdOptions,
) -> Result<SpecialCertificate> {
    let opts = BomdOptions {
        gamma: Rational::new(1, 16),
        ..opts.clone()
    };
    let trees = run_trees(inst, xstar, chain, combo, stats, &opts)?;
    let (rows, agg) = aggregate_rows(inst, xstar, chain, combo, stats, &trees, &opts.gamma);
    let mut checks: Vec<CheckRow> = trees.iter().flat_map(|r| tree_rows(r, xstar)).collect();
    checks.extend(rows);
    Ok(SpecialCertificate {
        case: "one-not-small".into(),
        average: agg.p1_average,
        bound: agg.b1,
        reconnection_empty: trees.iter().all(|r| r.p1.reconnection.is_empty()),
        checks,
    })
}

/// Runs the certificate of every special case that applies.
pub fn certify_special_cases(inst: &Instance, run: &BomdRun) -> Result<(SpecialCases, Vec<SpecialCertificate>)> {
    let flags = detect_special_cases(&run.xstar, &run.chain);
    let cap = run.options.matching_cap;
    let (x, ch, co, st) = (&run.xstar, &run.chain, &run.combo, &run.stats);
    let mut out = Vec::new();
    if flags.disjoint {
        out.push(certify_disjoint(inst, x, ch, co, st, cap)?);
    }
    if flags.two_per_edge {
        out.push(certify_alternating(inst, x, ch, co, st, cap)?);
    }
    if flags.all_small {
        out.push(certify_all_small(inst, x, ch, co, st, &run.options)?);
    }
    if flags.one_not_small.is_some() {
        out.push(certify_one_not_small(inst, x, ch, co, st, &run.options)?);
    }
    Ok((flags, out))
}

fn p1_rows(run: &TreeRun) -> Vec<CheckRow> {
    let i = run.index;
    vec![
        CheckRow::le(
            "c(P_1) <= c(F) + c'(J*_F)",
            run.p1.tour.multigraph_cost.clone(),
            &run.forest_cost + &run.join_f_modified_cost,
        )
        .tree(i),
        CheckRow::le("c'(J*_F) <= c'(y_F)", run.join_f_modified_cost.clone(), run.y_modified_cost.clone()).tree(i),
    ]
}

fn plan_rows(index: &BadEdgeIndex, plan: &ReconnectionPlan, xstar: &LpSolution, i: usize) -> Vec<CheckRow> {
    let mut rows = vec![CheckRow::truth("reconnection plan feasible", plan.status == PlanStatus::Feasible).tree(i)];
    if plan.status != PlanStatus::Feasible {
        return rows;
    }
    let least = plan.values.iter().map(|(_, _, v)| v.clone()).min().unwrap_or_else(Rational::zero);
    rows.push(CheckRow::le("(D0)", Rational::zero(), least).tree(i));
    for (k, &b) in index.bad.iter().enumerate() {
        let total: Rational = index.cuts_of_bad[k].iter().map(|&j| plan.value(b, j)).sum();
        rows.push(CheckRow::le("(D1)", total, Rational::one()).tree(i));
    }
    for (j, r) in &index.r {
        let total: Rational = index
            .bad
            .iter()
            .enumerate()
            .filter(|(k, _)| index.cuts_of_bad[*k].contains(j))
            .map(|(_, &b)| &xstar.x[b] * &plan.value(b, *j))
            .sum();
        rows.push(CheckRow::le("(D2)", r.clone(), total).tree(i).cut(*j));
    }
    rows
}

/// Per-tree rows: polyhedron, P1 and P2 bounds, surcharges, plan, Hall conditions, bad-edge shares.
fn tree_rows(run: &TreeRun, xstar: &LpSolution) -> Vec<CheckRow> {
    let i = run.index;
    let mut rows = vec![CheckRow::truth("y_F in T-join polyhedron", run.polyhedron_violation.is_none()).tree(i)];
    rows.extend(p1_rows(run));
    rows.push(
        CheckRow::le(
            "c(P_2) <= c(S) + c(S - S(s,t))",
            run.p2.multigraph_cost.clone(),
            &run.tree_cost + &run.off_path_cost,
        )
        .tree(i),
    );
    let s = &run.surcharge;
    rows.push(CheckRow::le("surcharge max-drop <= plan", s.deterministic.clone(), s.randomized.clone()).tree(i));
    rows.push(CheckRow::le("surcharge plan <= sum (x*(Q)-1) c(e_S^Q)", s.randomized.clone(), s.bound.clone()).tree(i));
    rows.push(CheckRow::truth("completion parts vanish on B(S)", s.completion_on_bad.is_empty()).tree(i));
    rows.extend(plan_rows(&run.bad, &run.plan, xstar, i));
    rows.push(CheckRow::truth("r(Q') <= x*(B(S) in Q') for all Q'", run.kh.demand_failures.is_empty()).tree(i));
    rows.push(CheckRow::truth("x*(union Q') >= |Q'| for all Q'", run.kh.cut_mass_failures.is_empty()).tree(i));
    rows.push(CheckRow::truth("x^Q(B(S)) = 0 off Q(S)", run.bad_mass_off_lonely.is_empty()).tree(i));
    for (j, lhs, rhs) in &run.bad_share {
        rows.push(CheckRow::le("bad-edge share <= (x*(Q)-1)/2", lhs.clone(), rhs.clone()).tree(i).cut(*j));
    }
    rows
}

struct Aggregates {
    forest_average: Rational,
    p1_average: Rational,
    p2_average: Rational,
    refined_bound: Rational,
    b1: Rational,
    b2: Rational,
    final_bound: Rational,
    xq_costs: Vec<Rational>,
    p_cost: Rational,
    q_cost: Rational,
}

fn aggregate_rows(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
    trees: &[TreeRun],
    gamma: &Rational,
) -> (Vec<CheckRow>, Aggregates) {
    let c = xstar.value.clone();
    let p_cost = inst.cost_of_vector(&stats.pstar);
    let q_cost = inst.cost_of_vector(&stats.qstar);
    let xq_costs: Vec<Rational> = stats.xq.iter().map(|v| inst.cost_of_vector(v)).collect();
    let mut forest_average = Rational::zero();
    let mut p1_average = Rational::zero();
    let mut p2_average = Rational::zero();
    for (run, tree) in trees.iter().zip(&combo.trees) {
        forest_average += &tree.lambda * &(&run.forest_cost + &run.y_modified_cost);
        p1_average += &tree.lambda * &run.p1.tour.multigraph_cost;
        p2_average += &tree.lambda * &run.p2.multigraph_cost;
    }
    let three_halves = Rational::new(3, 2);
    let b1 = &(&three_halves * &c) + &(gamma * &p_cost);
    let refined_bound = chain
        .cuts
        .iter()
        .zip(&xq_costs)
        .fold(b1.clone(), |acc, (q, w)| &acc + &(&cut_multiplier(&q.size, gamma) * w));
    let b2 = &(&Rational::from_integer(2) * &c) - &p_cost;
    let final_bound = &final_ratio(gamma) * &c;
    let mut rows = vec![
        CheckRow::eq("c(p*) + c(q*) = c(x*)", &p_cost + &q_cost, c.clone()),
        CheckRow::truth(
            "p* + q* = x*",
            (0..inst.m()).all(|e| &stats.pstar[e] + &stats.qstar[e] == xstar.x[e]),
        ),
        CheckRow::le("(i) average c(F) + c'(y_F) <= refined bound", forest_average.clone(), refined_bound.clone()),
        CheckRow::le("average c(P_1) <= average c(F) + c'(y_F)", p1_average.clone(), forest_average.clone()),
        CheckRow::le("(iii) average c(P_2) <= B2", p2_average.clone(), b2.clone()),
        CheckRow::le("(iv) min(B1, B2) <= final bound", b1.clone().min(b2.clone()), final_bound.clone()),
    ];
    if *gamma >= Rational::new(1, 16) {
        rows.push(CheckRow::le("(i) average c(F) + c'(y_F) <= B1", forest_average.clone(), b1.clone()));
    }
    let audit = audit_combination(inst, xstar, chain, None, combo, stats);
    rows.push(CheckRow::truth("combination audit", audit.is_empty()));
    (
        rows,
        Aggregates {
            forest_average,
            p1_average,
            p2_average,
            refined_bound,
            b1,
            b2,
            final_bound,
            xq_costs,
            p_cost,
            q_cost,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutEntry {
    pub members: Vec<usize>,
    pub size: Rational,
    pub xq_cost: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLedger {
    pub lambda: Rational,
    pub group: usize,
    pub edges: Vec<(usize, usize)>,
    pub lonely_cuts: Vec<usize>,
    pub tree_cost: Rational,
    pub forest_cost: Rational,
    pub y_cost: Rational,
    /// c'(y_F) - c(y_F).
    pub surcharge_cost: Rational,
    pub join_modified_cost: Rational,
    pub p1_cost: Rational,
    pub p1_path_cost: Rational,
    pub reconnection_cost: Rational,
    pub p2_cost: Rational,
    pub p2_path_cost: Rational,
    pub off_path_cost: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TourCertificate {
    pub name: Option<String>,
    pub n: usize,
    pub s: usize,
    pub t: usize,
    pub gamma: Rational,
    pub xstar: Vec<(usize, usize, Rational)>,
    pub lp_value: Rational,
    pub p_cost: Rational,
    pub q_cost: Rational,
    pub cuts: Vec<CutEntry>,
    pub trees: Vec<TreeLedger>,
    pub forest_average: Rational,
    pub p1_average: Rational,
    pub p2_average: Rational,
    pub refined_bound: Rational,
    pub b1: Rational,
    pub b2: Rational,
    pub final_ratio: Rational,
    pub final_bound: Rational,
    pub tour: Vec<usize>,
    pub tour_cost: Rational,
    pub tour_source: String,
    pub opt: Option<Rational>,
    pub special: SpecialCases,
    pub special_certificates: Vec<SpecialCertificate>,
    pub checks: Vec<CheckRow>,
}

impl TourCertificate {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|r| r.passed) && self.special_certificates.iter().all(|c| c.passes())
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|r| !r.passed).map(|r| r.describe()).collect();
        for sc in &self.special_certificates {
            out.extend(sc.checks.iter().filter(|r| !r.passed).map(|r| format!("{}: {}", sc.case, r.describe())));
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Full ledger of a run; failing rows are recorded, not raised.
pub fn build_certificate(inst: &Instance, run: &BomdRun, opt: Option<Rational>) -> Result<TourCertificate> {
    let gamma = &run.options.gamma;
    let (mut checks, agg) = aggregate_rows(inst, &run.xstar, &run.chain, &run.combo, &run.stats, &run.trees, gamma);
    for tr in &run.trees {
        checks.extend(tree_rows(tr, &run.xstar));
    }
    let tour_cost = run.best.path_cost.clone();
    let best_bound = if *gamma >= Rational::new(1, 16) {
        agg.b1.clone()
    } else {
        agg.refined_bound.clone()
    };
    checks.push(CheckRow::le("(v) tour <= min(B1, B2)", tour_cost.clone(), best_bound.min(agg.b2.clone())));
    if *gamma >= Rational::new(1, 16) {
        checks.push(CheckRow::le("tour <= final bound", tour_cost.clone(), agg.final_bound.clone()));
    }
    if let Some(opt) = &opt {
        checks.push(CheckRow::le("OPT_LP <= OPT", run.xstar.value.clone(), opt.clone()));
        checks.push(CheckRow::le("OPT <= tour", opt.clone(), tour_cost.clone()));
    }
    let (special, special_certificates) = certify_special_cases(inst, run)?;
    let trees = run
        .trees
        .iter()
        .zip(&run.combo.trees)
        .map(|(tr, tree)| TreeLedger {
            lambda: tree.lambda.clone(),
            group: tree.group,
            edges: tree.edges.iter().map(|&e| inst.ends(e)).collect(),
            lonely_cuts: tree.lonely_cuts.clone(),
            tree_cost: tr.tree_cost.clone(),
            forest_cost: tr.forest_cost.clone(),
            y_cost: tr.y_cost.clone(),
            surcharge_cost: &tr.y_modified_cost - &tr.y_cost,
            join_modified_cost: tr.join_f_modified_cost.clone(),
            p1_cost: tr.p1.tour.multigraph_cost.clone(),
            p1_path_cost: tr.p1.tour.path_cost.clone(),
            reconnection_cost: inst.cost_of(&tr.p1.reconnection),
            p2_cost: tr.p2.multigraph_cost.clone(),
            p2_path_cost: tr.p2.path_cost.clone(),
            off_path_cost: tr.off_path_cost.clone(),
        })
        .collect();
    let (i, kind) = run.best_from;
    let tour_source = match kind {
        TourKind::Forest => format!("P1 of tree {i}"),
        TourKind::Christofides => format!("P2 of tree {i}"),
    };
    Ok(TourCertificate {
        name: inst.name.clone(),
        n: inst.n(),
        s: inst.s(),
        t: inst.t(),
        gamma: gamma.clone(),
        xstar: run
            .xstar
            .support
            .iter()
            .map(|&e| {
                let (u, v) = inst.ends(e);
                (u, v, run.xstar.x[e].clone())
            })
            .collect(),
        lp_value: run.xstar.value.clone(),
        p_cost: agg.p_cost,
        q_cost: agg.q_cost,
        cuts: run
            .chain
            .cuts
            .iter()
            .zip(agg.xq_costs)
            .map(|(q, w)| CutEntry {
                members: q.members(),
                size: q.size.clone(),
                xq_cost: w,
            })
            .collect(),
        trees,
        forest_average: agg.forest_average,
        p1_average: agg.p1_average,
        p2_average: agg.p2_average,
        refined_bound: agg.refined_bound,
        b1: agg.b1,
        b2: agg.b2,
        final_ratio: final_ratio(gamma),
        final_bound: agg.final_bound,
        tour: run.best.path.clone(),
        tour_cost,
        tour_source,
        opt,
        special,
        special_certificates,
        checks,
    })
}

/// Ledger of a run; the first failing inequality becomes an error.
pub fn certify_ratio(inst: &Instance, run: &BomdRun) -> Result<TourCertificate> {
    let cert = build_certificate(inst, run, None)?;
    if let Some(row) = first_failure(&cert.checks) {
        return Err(Error::Assertion(row.describe()));
    }
    for sc in &cert.special_certificates {
        if let Some(row) = first_failure(&sc.checks) {
            return Err(Error::Assertion(format!("{}: {}", sc.case, row.describe())));
        }
    }
    Ok(cert)
}

/// Solver run plus its certificate.
pub fn solve(inst: &Instance, opts: &BomdOptions) -> Result<(StTour, TourCertificate)> {
    let run = run_bomd(inst, opts)?;
    let cert = certify_ratio(inst, &run)?;
    Ok((run.best, cert))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BomcReport {
    pub average: Rational,
    pub fractional: Rational,
    pub b1: Rational,
    pub b2: Rational,
    pub bound: Rational,
    pub checks: Vec<CheckRow>,
}

impl BomcReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|r| r.passed)
    }
}

/// Best-of-many Christofides with the gamma = 1/8 parity vector over a trimmed
/// generic combination.
pub fn certify_bomc_85(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
) -> Result<BomcReport> {
    let gamma = Rational::new(1, 8);
    let two = Rational::from_integer(2);
    let half = Rational::new(1, 2);
    let limit = &two * &(Rational::one() - &gamma);
    let mut checks = Vec::new();
    let mut average = Rational::zero();
    let mut fractional = Rational::zero();
    for (i, tree) in combo.trees.iter().enumerate() {
        let mut y: Vec<Rational> = xstar.x.iter().map(|v| v * &half).collect();
        for e in tree.st_path(inst) {
            y[e] += &gamma;
        }
        for (j, q) in chain.cuts.iter().enumerate() {
            let even = tree.edges.iter().filter(|&&e| q.contains(e)).count() % 2 == 0;
            if even && q.size < limit {
                let scale = &(&(&two - &(&two * &gamma)) - &q.size) / &(&two * &(&two - &q.size));
                for e in 0..inst.m() {
                    if !stats.xq[j][e].is_zero() {
                        y[e] += &scale * &stats.xq[j][e];
                    }
                }
            }
        }
        let t_set = parity_set(inst, &tree.edges);
        checks.push(CheckRow::truth("y in T-join polyhedron", check_tjoin_polyhedron(inst, &y, &t_set).is_none()).tree(i));
        let join = min_tjoin_full(inst, &t_set, inst.costs(), DEFAULT_MATCHING_CAP)?;
        let tour_cost = inst.cost_of(&tree.edges) + &join.cost;
        let y_cost = inst.cost_of_vector(&y);
        checks.push(CheckRow::le("c(J_S) <= c(y)", join.cost.clone(), y_cost.clone()).tree(i));
        average += &tree.lambda * &tour_cost;
        fractional += &tree.lambda * &(inst.cost_of(&tree.edges) + &y_cost);
    }
    let c = xstar.value.clone();
    let p = inst.cost_of_vector(&stats.pstar);
    let b1 = &(Rational::new(3, 2) * c.clone()) + &(Rational::new(1, 4) * p.clone());
    let b2 = &(&two * &c) - &p;
    let bound = Rational::new(8, 5) * c.clone();
    let xq_total: Rational = stats.xq.iter().map(|v| inst.cost_of_vector(v)).sum();
    checks.push(CheckRow::le("sum c(x^Q) <= c(p*)", xq_total, p.clone()));
    checks.push(CheckRow::le("average c(S + J_S) <= average c(S) + c(y)", average.clone(), fractional.clone()));
    checks.push(CheckRow::le("average c(S) + c(y) <= 3/2 c(x*) + 1/4 c(p*)", fractional.clone(), b1.clone()));
    checks.push(CheckRow::le("average c(S + J_S) <= 2 c(x*) - c(p*)", average.clone(), b2.clone()));
    checks.push(CheckRow::le("min(B1, B2) <= 8/5 c(x*)", b1.clone().min(b2.clone()), bound.clone()));
    let audit = audit_combination(inst, xstar, chain, None, combo, stats);
    checks.push(CheckRow::truth("combination audit", audit.is_empty()));
    Ok(BomcReport {
        average,
        fractional,
        b1,
        b2,
        bound,
        checks,
    })
}

/// Re-validates a stored certificate against its instance; returns the problems found.
pub fn verify(inst: &Instance, cert: &TourCertificate) -> Vec<String> {
    let mut problems = Vec::new();
    let n = inst.n();
    if (cert.n, cert.s, cert.t) != (n, inst.s(), inst.t()) {
        problems.push("instance shape differs from certificate".to_string());
        return problems;
    }
    let mut seen = vec![false; n];
    let valid_path = cert.tour.len() == n
        && cert.tour.first() == Some(&inst.s())
        && cert.tour.last() == Some(&inst.t())
        && cert.tour.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true));
    if !valid_path {
        problems.push("tour is not a Hamiltonian s-t path".into());
    } else if inst.path_cost(&cert.tour) != cert.tour_cost {
        problems.push("tour cost does not match the instance".into());
    }
    let mut x = vec![Rational::zero(); inst.m()];
    for (u, v, val) in &cert.xstar {
        if *u >= n || *v >= n || u == v {
            problems.push(format!("bad x* edge ({u}, {v})"));
            return problems;
        }
        x[edge_id(n, *u, *v)] = val.clone();
    }
    for v in 0..n {
        let deg: Rational = (0..n).filter(|&w| w != v).map(|w| &x[inst.edge(v, w)]).sum();
        let want = if v == inst.s() || v == inst.t() { 1 } else { 2 };
        if deg != Rational::from_integer(want) {
            problems.push(format!("x* degree at {v} is {deg}"));
        }
    }
    if let Some((_, viol)) = separate(inst, &x) {
        problems.push(format!("x* violates a cut constraint by {viol}"));
    }
    if inst.cost_of_vector(&x) != cert.lp_value {
        problems.push("c(x*) does not match".into());
    }
    match solve_subtour_lp(inst) {
        Ok(lp) if lp.value == cert.lp_value => {}
        Ok(lp) => problems.push(format!("LP optimum {} differs from stored {}", lp.value, cert.lp_value)),
        Err(e) => problems.push(format!("LP failed: {e}")),
    }
    let mut recon = vec![Rational::zero(); inst.m()];
    let mut pstar = vec![Rational::zero(); inst.m()];
    let mut lambda_sum = Rational::zero();
    let mut forest_average = Rational::zero();
    let mut p1_average = Rational::zero();
    let mut p2_average = Rational::zero();
    let mut xq = vec![Rational::zero(); cert.cuts.len()];
    let sides: Vec<Vec<bool>> = cert
        .cuts
        .iter()
        .map(|c| {
            let mut side = vec![false; n];
            for &v in &c.members {
                if v < n {
                    side[v] = true;
                }
            }
            side
        })
        .collect();
    for (i, tree) in cert.trees.iter().enumerate() {
        let ids: Vec<usize> = tree.edges.iter().map(|&(u, v)| edge_id(n, u, v)).collect();
        if ids.len() != n - 1 || !is_connected(n, tree.edges.iter().copied()) {
            problems.push(format!("tree {i} is not a spanning tree"));
            continue;
        }
        if inst.cost_of(&ids) != tree.tree_cost {
            problems.push(format!("tree {i} cost does not match"));
        }
        lambda_sum += &tree.lambda;
        for &e in &ids {
            recon[e] += &tree.lambda;
        }
        let path = crate::graph::forest_path(n, inst.all_ends(), &ids, inst.s(), inst.t()).expect("spanning tree");
        for e in path {
            pstar[e] += &tree.lambda;
        }
        for &j in &tree.lonely_cuts {
            let Some(side) = sides.get(j) else {
                problems.push(format!("tree {i} names unknown cut {j}"));
                continue;
            };
            let crossing: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&e| {
                    let (u, v) = inst.ends(e);
                    side[u] != side[v]
                })
                .collect();
            if crossing.len() != 1 {
                problems.push(format!("cut {} is not lonely in tree {i}", j + 1));
                continue;
            }
            xq[j] += &tree.lambda * inst.edge_cost(crossing[0]);
        }
        forest_average += &tree.lambda * &(&tree.forest_cost + &(&tree.y_cost + &tree.surcharge_cost));
        p1_average += &tree.lambda * &tree.p1_cost;
        p2_average += &tree.lambda * &tree.p2_cost;
        if tree.p1_path_cost > tree.p1_cost || tree.p2_path_cost > tree.p2_cost {
            problems.push(format!("tree {i} shortcut exceeds its multigraph"));
        }
        if !cert.trees.is_empty() && cert.tour_cost > tree.p1_path_cost.clone().min(tree.p2_path_cost.clone()) {
            problems.push(format!("tour is not the cheapest candidate (tree {i})"));
        }
    }
    if lambda_sum != Rational::one() {
        problems.push(format!("tree weights sum to {lambda_sum}"));
    }
    if recon != x {
        problems.push("trees do not reconstruct x*".into());
    }
    let p_cost = inst.cost_of_vector(&pstar);
    if p_cost != cert.p_cost || &p_cost + &cert.q_cost != cert.lp_value {
        problems.push("c(p*) or c(q*) does not match".into());
    }
    for (j, c) in cert.cuts.iter().enumerate() {
        if xq[j] != c.xq_cost {
            problems.push(format!("c(x^Q) of cut {} does not match", j + 1));
        }
    }
    let g = &cert.gamma;
    let c = &cert.lp_value;
    let b1 = &(Rational::new(3, 2) * c.clone()) + &(g * &p_cost);
    let refined = cert
        .cuts
        .iter()
        .zip(&xq)
        .fold(b1.clone(), |acc, (q, w)| &acc + &(&cut_multiplier(&q.size, g) * w));
    let b2 = &(Rational::from_integer(2) * c.clone()) - &p_cost;
    let fin = &final_ratio(g) * c;
    let recomputed = [
        ("forest average", &forest_average, &cert.forest_average),
        ("P1 average", &p1_average, &cert.p1_average),
        ("P2 average", &p2_average, &cert.p2_average),
        ("refined bound", &refined, &cert.refined_bound),
        ("B1", &b1, &cert.b1),
        ("B2", &b2, &cert.b2),
        ("final bound", &fin, &cert.final_bound),
    ];
    for (name, got, stored) in recomputed {
        if got != stored {
            problems.push(format!("{name} recomputes to {got}, stored {stored}"));
        }
    }
    if forest_average > refined {
        problems.push("forest average exceeds the refined bound".into());
    }
    if p2_average > b2 {
        problems.push("P2 average exceeds B2".into());
    }
    let best = if *g >= Rational::new(1, 16) { b1 } else { refined };
    if cert.tour_cost > best.min(b2) {
        problems.push("tour exceeds min(B1, B2)".into());
    }
    for row in cert.checks.iter().chain(cert.special_certificates.iter().flat_map(|s| s.checks.iter())) {
        if row.evaluate() != row.passed {
            problems.push(format!("stored verdict is wrong: {}", row.describe()));
        } else if !row.passed {
            problems.push(format!("failing row: {}", row.describe()));
        }
    }
    problems
}
