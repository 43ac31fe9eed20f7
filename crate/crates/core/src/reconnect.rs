//! Bad edges, modified join costs, doubled-MST reconnection and the reconnection
//! system (D0)-(D2) with its Hall-type feasibility condition.

use serde_json::{json, Value};

use crate::cuts::NarrowCutChain;
use crate::graph::UnionFind;
use crate::instance::Instance;
use crate::joins::ParityVector;
use crate::rational::Rational;
use crate::ratlp::{solve_lp, LpModel, LpStatus, Relation, Sense};
use crate::subtour::LpSolution;
use crate::treedecomp::{CombinationStats, TreeEntry};

pub const DEFAULT_SUBSET_CAP: usize = 20;

/// Lonely cuts of `tree` crossed by the complete-graph edge `e` (chain indices).
pub fn lonely_cuts_of_edge(inst: &Instance, chain: &NarrowCutChain, tree: &TreeEntry, e: usize) -> Vec<usize> {
    let (u, v) = inst.ends(e);
    tree.lonely_cuts
        .iter()
        .copied()
        .filter(|&j| chain.cuts[j].side[u] != chain.cuts[j].side[v])
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadEdgeIndex {
    /// B(S): support edges in at least two lonely cuts, ascending.
    pub bad: Vec<usize>,
    /// Q(S, b) for each bad edge, aligned with `bad`.
    pub cuts_of_bad: Vec<Vec<usize>>,
    /// (lonely cut, r_Q) with r_Q = 1 - x*(Q \ B(S)).
    pub r: Vec<(usize, Rational)>,
    /// e_S^Q per lonely cut, aligned with `r`.
    pub lonely_edge: Vec<usize>,
    /// Support edges of each lonely cut, aligned with `r`.
    pub cut_edges: Vec<Vec<usize>>,
}

impl BadEdgeIndex {
    pub fn is_bad(&self, e: usize) -> bool {
        self.bad.binary_search(&e).is_ok()
    }
}

pub fn bad_edges(inst: &Instance, xstar: &LpSolution, chain: &NarrowCutChain, tree: &TreeEntry) -> BadEdgeIndex {
    let mut bad = Vec::new();
    let mut cuts_of_bad = Vec::new();
    for &e in &xstar.support {
        let qs = lonely_cuts_of_edge(inst, chain, tree, e);
        if qs.len() >= 2 {
            bad.push(e);
            cuts_of_bad.push(qs);
        }
    }
    let mut r = Vec::new();
    let mut lonely_edge = Vec::new();
    let mut cut_edges = Vec::new();
    for &j in &tree.lonely_cuts {
        let outside: Rational = chain.cuts[j]
            .edges
            .iter()
            .filter(|e| bad.binary_search(e).is_err())
            .map(|&e| &xstar.x[e])
            .sum();
        r.push((j, Rational::one() - outside));
        lonely_edge.push(tree.lonely_edge(chain, j).expect("lonely cut has its edge"));
        cut_edges.push(chain.cuts[j].edges.clone());
    }
    BadEdgeIndex {
        bad,
        cuts_of_bad,
        r,
        lonely_edge,
        cut_edges,
    }
}

/// Which lonely cut of a bad edge is spared from doubling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropRule {
    /// The cut with the most expensive lonely edge.
    MaxCost,
    /// The leftmost cut along the chain.
    Leftmost,
}

/// Reconnection surcharge of an edge crossing the given lonely cuts:
/// the sum of 2c(e_S^Q) over them minus the spared one; zero below two cuts.
pub fn surcharge(inst: &Instance, chain: &NarrowCutChain, tree: &TreeEntry, cuts: &[usize], rule: DropRule) -> Rational {
    if cuts.len() < 2 {
        return Rational::zero();
    }
    let two = Rational::from_integer(2);
    let costs: Vec<Rational> = cuts
        .iter()
        .map(|&j| &two * inst.edge_cost(tree.lonely_edge(chain, j).expect("lonely edge")))
        .collect();
    let total: Rational = costs.iter().sum();
    let spared = match rule {
        DropRule::MaxCost => costs.iter().max().expect("nonempty").clone(),
        DropRule::Leftmost => {
            let left = (0..cuts.len()).min_by_key(|&i| cuts[i]).expect("nonempty");
            costs[left].clone()
        }
    };
    total - spared
}

/// c' over the complete graph: c plus the surcharge on every edge crossing two or
/// more lonely cuts (on the support these are exactly the bad edges).
pub fn modified_costs(inst: &Instance, chain: &NarrowCutChain, tree: &TreeEntry, rule: DropRule) -> Vec<Rational> {
    (0..inst.m())
        .map(|e| {
            let qs = lonely_cuts_of_edge(inst, chain, tree, e);
            inst.edge_cost(e) + &surcharge(inst, chain, tree, &qs, rule)
        })
        .collect()
}

/// Minimum spanning tree between the classes of `labels`, every edge doubled.
pub fn doubled_mst(inst: &Instance, labels: &[usize]) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |&l| l + 1);
    let mut order: Vec<usize> = (0..inst.m())
        .filter(|&e| {
            let (u, v) = inst.ends(e);
            labels[u] != labels[v]
        })
        .collect();
    order.sort_by(|&a, &b| inst.edge_cost(a).cmp(inst.edge_cost(b)).then(a.cmp(&b)));
    let mut uf = UnionFind::new(classes);
    let mut out = Vec::new();
    for e in order {
        let (u, v) = inst.ends(e);
        if uf.union(labels[u], labels[v]) {
            out.push(e);
            out.push(e);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanStatus {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconnectionPlan {
    pub status: PlanStatus,
    /// (bad edge, lonely cut, x(b, Q)).
    pub values: Vec<(usize, usize, Rational)>,
    /// A subset of lonely cuts violating the Hall-type condition when infeasible.
    pub violating_subset: Option<Vec<usize>>,
}

impl ReconnectionPlan {
    pub fn value(&self, b: usize, j: usize) -> Rational {
        self.values
            .iter()
            .find(|(e, q, _)| *e == b && *q == j)
            .map_or(Rational::zero(), |(_, _, v)| v.clone())
    }
}

/// Phase-1 point of (D0)-(D2).
pub fn solve_reconnection_lp(index: &BadEdgeIndex, xstar: &LpSolution) -> ReconnectionPlan {
    let mut model = LpModel::new(Sense::Min);
    let mut vars = Vec::new();
    for (i, &b) in index.bad.iter().enumerate() {
        for &j in &index.cuts_of_bad[i] {
            let v = model.add_var(format!("x_{b}_{j}"));
            vars.push((b, j, v));
        }
    }
    for &b in &index.bad {
        let coeffs = vars
            .iter()
            .filter(|(e, _, _)| *e == b)
            .map(|&(_, _, v)| (v, Rational::one()))
            .collect();
        model.add_constraint(format!("D1[{b}]"), coeffs, Relation::Le, Rational::one());
    }
    for (j, r) in &index.r {
        let coeffs = vars
            .iter()
            .filter(|(_, q, _)| q == j)
            .map(|&(b, _, v)| (v, xstar.x[b].clone()))
            .collect();
        model.add_constraint(format!("D2[{j}]"), coeffs, Relation::Ge, r.clone());
    }
    let out = solve_lp(&model);
    if out.status == LpStatus::Optimal {
        ReconnectionPlan {
            status: PlanStatus::Feasible,
            values: vars.iter().map(|&(b, j, v)| (b, j, out.values[v].clone())).collect(),
            violating_subset: None,
        }
    } else {
        let report = check_kh_condition(index, xstar, DEFAULT_SUBSET_CAP);
        ReconnectionPlan {
            status: PlanStatus::Infeasible,
            values: Vec::new(),
            violating_subset: report.demand_failures.first().cloned(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KhReport {
    /// False when only singletons and pairs were checked.
    pub complete: bool,
    pub subsets_checked: usize,
    /// Subsets Q' with sum of r_Q above x*(union of Q & B(S)).
    pub demand_failures: Vec<Vec<usize>>,
    /// Subsets Q' with x*(union of Q) below |Q'|.
    pub cut_mass_failures: Vec<Vec<usize>>,
}

impl KhReport {
    pub fn passes(&self) -> bool {
        self.demand_failures.is_empty() && self.cut_mass_failures.is_empty()
    }
}

/// Both Hall-type conditions over every subset of lonely cuts (singletons and pairs only
/// above `cap` cuts).
pub fn check_kh_condition(index: &BadEdgeIndex, xstar: &LpSolution, cap: usize) -> KhReport {
    let k = index.r.len();
    let complete = k <= cap;
    let subsets: Vec<Vec<usize>> = if complete {
        (1u64..(1 << k))
            .map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).collect())
            .collect()
    } else {
        let mut out: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
        for a in 0..k {
            for b in a + 1..k {
                out.push(vec![a, b]);
            }
        }
        out
    };
    let mut demand_failures = Vec::new();
    let mut cut_mass_failures = Vec::new();
    for sub in &subsets {
        let mut union: Vec<usize> = sub.iter().flat_map(|&i| index.cut_edges[i].iter().copied()).collect();
        union.sort_unstable();
        union.dedup();
        let total: Rational = union.iter().map(|&e| &xstar.x[e]).sum();
        let bad_part: Rational = union.iter().filter(|&&e| index.is_bad(e)).map(|&e| &xstar.x[e]).sum();
        let demand: Rational = sub.iter().map(|&i| &index.r[i].1).sum();
        let named: Vec<usize> = sub.iter().map(|&i| index.r[i].0).collect();
        if demand > bad_part {
            demand_failures.push(named.clone());
        }
        if total < Rational::from_integer(sub.len() as i64) {
            cut_mass_failures.push(named);
        }
    }
    KhReport {
        complete,
        subsets_checked: subsets.len(),
        demand_failures,
        cut_mass_failures,
    }
}

/// Narrow cuts Q outside Q(S) with x^Q(B(S)) != 0.
pub fn bad_mass_off_lonely(index: &BadEdgeIndex, tree: &TreeEntry, stats: &CombinationStats) -> Vec<usize> {
    (0..stats.xq.len())
        .filter(|&j| !tree.is_lonely_cut(j))
        .filter(|&j| index.bad.iter().any(|&b| !stats.xq[j][b].is_zero()))
        .collect()
}

/// Per lonely cut: (Q, lhs, rhs) of sum_b (x*(b)/2)(1 - x(b,Q)) <= (x*(Q) - 1)/2.
pub fn bad_share_rows(
    index: &BadEdgeIndex,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    plan: &ReconnectionPlan,
) -> Vec<(usize, Rational, Rational)> {
    let half = Rational::new(1, 2);
    index
        .r
        .iter()
        .map(|(j, _)| {
            let lhs: Rational = index
                .bad
                .iter()
                .filter(|&&b| chain.cuts[*j].contains(b))
                .map(|&b| &(&xstar.x[b] * &half) * &(Rational::one() - plan.value(b, *j)))
                .sum();
            let rhs = (&chain.cuts[*j].size - &Rational::one()) * half.clone();
            (*j, lhs, rhs)
        })
        .collect()
}

/// Surcharge inequality chain for one tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurchargeLedger {
    /// sum over bad b of y_F(b) times the max-drop surcharge.
    pub deterministic: Rational,
    /// Same sum with the plan's randomized drop.
    pub randomized: Rational,
    /// sum over lonely Q of (x*(Q) - 1) c(e_S^Q).
    pub bound: Rational,
    /// Edges of B(S) where the completion parts of y_F are nonzero.
    pub completion_on_bad: Vec<usize>,
}

impl SurchargeLedger {
    pub fn holds(&self) -> bool {
        self.deterministic <= self.randomized && self.randomized <= self.bound && self.completion_on_bad.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "deterministic": self.deterministic.to_pq(),
            "randomized": self.randomized.to_pq(),
            "bound": self.bound.to_pq(),
            "completion_on_bad": self.completion_on_bad,
        })
    }
}

pub fn surcharge_ledger(
    inst: &Instance,
    chain: &NarrowCutChain,
    tree: &TreeEntry,
    index: &BadEdgeIndex,
    plan: &ReconnectionPlan,
    yf: &ParityVector,
) -> SurchargeLedger {
    let y = yf.total();
    let two = Rational::from_integer(2);
    let mut deterministic = Rational::zero();
    let mut randomized = Rational::zero();
    let mut completion_on_bad = Vec::new();
    for (i, &b) in index.bad.iter().enumerate() {
        let qs = &index.cuts_of_bad[i];
        deterministic += &y[b] * &surcharge(inst, chain, tree, qs, DropRule::MaxCost);
        let expected: Rational = qs
            .iter()
            .map(|&j| {
                let e = tree.lonely_edge(chain, j).expect("lonely edge");
                &(&two * inst.edge_cost(e)) * &(Rational::one() - plan.value(b, j))
            })
            .sum();
        randomized += &y[b] * &expected;
        if !yf.pce[b].is_zero() || !yf.pcl[b].is_zero() {
            completion_on_bad.push(b);
        }
    }
    let bound = tree
        .lonely_cuts
        .iter()
        .map(|&j| {
            let e = tree.lonely_edge(chain, j).expect("lonely edge");
            &(&chain.cuts[j].size - &Rational::one()) * inst.edge_cost(e)
        })
        .sum();
    SurchargeLedger {
        deterministic,
        randomized,
        bound,
        completion_on_bad,
    }
}

pub fn reconnect_json(inst: &Instance, index: &BadEdgeIndex, plan: &ReconnectionPlan, ledger: &SurchargeLedger) -> Value {
    let edge = |e: usize| {
        let (u, v) = inst.ends(e);
        json!([u.to_string(), v.to_string()])
    };
    json!({
        "bad_edges": index.bad.iter().map(|&e| edge(e)).collect::<Vec<_>>(),
        "r": index.r.iter().map(|(j, r)| json!({"cut": j + 1, "r": r.to_pq()})).collect::<Vec<_>>(),
        "plan_status": format!("{:?}", plan.status),
        "plan": plan.values.iter().map(|(b, j, v)| json!({"edge": edge(*b), "cut": j + 1, "x": v.to_pq()})).collect::<Vec<_>>(),
        "surcharge": ledger.to_json(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::find_narrow_cuts;
    use crate::fixtures;
    use crate::rational::rat;
    use crate::treedecomp::TreeCombination;

    fn gao_tree() -> (Instance, LpSolution, NarrowCutChain, TreeEntry) {
        let (inst, xstar) = fixtures::figure1();
        let chain = find_narrow_cuts(&inst, &xstar).unwrap();
        let trees = vec![(fixtures::figure2_trees()[0].clone(), rat(1, 1))];
        let combo = TreeCombination::with_equality_lonely(&chain, trees);
        let tree = combo.trees[0].clone();
        (inst, xstar, chain, tree)
    }

    #[test]
    fn gao_tree_bad_edges() {
        let (inst, xstar, chain, tree) = gao_tree();
        assert_eq!(tree.lonely_cuts, vec![0, 1, 2, 3, 4, 5]);
        let index = bad_edges(&inst, &xstar, &chain, &tree);
        let mut want: Vec<usize> = ["s3", "13", "52", "t2", "36"].iter().map(|e| fixtures::edge(e)).collect();
        want.sort_unstable();
        assert_eq!(index.bad, want);
        let plan = solve_reconnection_lp(&index, &xstar);
        assert_eq!(plan.status, PlanStatus::Feasible);
        let report = check_kh_condition(&index, &xstar, DEFAULT_SUBSET_CAP);
        assert!(report.complete && report.passes());
        assert_eq!(report.subsets_checked, 63);
        for (_, lhs, rhs) in bad_share_rows(&index, &xstar, &chain, &plan) {
            assert!(lhs <= rhs);
        }
    }

    #[test]
    fn surcharge_on_unit_metric() {
        let (inst, xstar, chain, tree) = gao_tree();
        let index = bad_edges(&inst, &xstar, &chain, &tree);
        let c1 = modified_costs(&inst, &chain, &tree, DropRule::MaxCost);
        let c2 = modified_costs(&inst, &chain, &tree, DropRule::Leftmost);
        for e in 0..inst.m() {
            let k = lonely_cuts_of_edge(&inst, &chain, &tree, e).len() as i64;
            let extra = Rational::from_integer(2 * (k - 1).max(0));
            assert_eq!(c1[e], inst.edge_cost(e) + &extra);
            assert_eq!(c1[e], c2[e]);
        }
        for (i, &b) in index.bad.iter().enumerate() {
            assert!(index.cuts_of_bad[i].len() >= 2);
            assert!(c1[b] > *inst.edge_cost(b));
        }
        // s-t edge crosses all six lonely cuts
        assert_eq!(c1[inst.edge(0, 7)], inst.cost(0, 7) + &rat(10, 1));
    }

    #[test]
    fn drop_rules_on_a_path() {
        // s=0, t=3, tree = path 0-1-2-3; b = {0,2} crosses the cuts {0} and {0,1}
        let costs = [[0, 2, 3, 6], [2, 0, 5, 6], [3, 5, 0, 3], [6, 6, 3, 0]];
        let inst = Instance::from_fn(4, 0, 3, |u, v| rat(costs[u][v], 1)).unwrap();
        let path: Vec<usize> = vec![inst.edge(0, 1), inst.edge(1, 2), inst.edge(2, 3)];
        let mut x = vec![rat(0, 1); inst.m()];
        for &e in &path {
            x[e] = rat(1, 1);
        }
        let xstar = LpSolution::from_vector(&inst, x);
        let chain = find_narrow_cuts(&inst, &xstar).unwrap();
        let combo = TreeCombination::with_equality_lonely(&chain, vec![(path, rat(1, 1))]);
        let tree = &combo.trees[0];
        let b = inst.edge(0, 2);
        assert_eq!(lonely_cuts_of_edge(&inst, &chain, tree, b), vec![0, 1]);
        // 3 + (4 + 10) - 10 and 3 + (4 + 10) - 4
        assert_eq!(modified_costs(&inst, &chain, tree, DropRule::MaxCost)[b], rat(7, 1));
        assert_eq!(modified_costs(&inst, &chain, tree, DropRule::Leftmost)[b], rat(13, 1));
        let e01 = inst.edge(0, 1);
        assert_eq!(modified_costs(&inst, &chain, tree, DropRule::MaxCost)[e01], rat(2, 1));
        // support has no bad edges
        assert!(bad_edges(&inst, &xstar, &chain, tree).bad.is_empty());
    }

    #[test]
    fn two_cut_plan() {
        let (inst, xstar, _, _) = gao_tree();
        let index = BadEdgeIndex {
            bad: vec![0],
            cuts_of_bad: vec![vec![0, 1]],
            r: vec![(0, rat(1, 4)), (1, rat(1, 4))],
            lonely_edge: vec![1, 2],
            cut_edges: vec![vec![0, 1], vec![0, 2]],
        };
        let mut x = vec![rat(0, 1); inst.m()];
        x[0] = rat(1, 2);
        let point = LpSolution::from_vector(&inst, x);
        let plan = solve_reconnection_lp(&index, &point);
        assert_eq!(plan.status, PlanStatus::Feasible);
        let total = plan.value(0, 0) + plan.value(0, 1);
        assert!(total <= rat(1, 1));
        assert!(&point.x[0] * &plan.value(0, 0) >= rat(1, 4));
        assert!(&point.x[0] * &plan.value(0, 1) >= rat(1, 4));
        let _ = xstar;
    }

    #[test]
    fn doubled_mst_costs() {
        let (inst, _, _, _) = gao_tree();
        assert!(doubled_mst(&inst, &[0; 8]).is_empty());
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let d = doubled_mst(&inst, &labels);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0], d[1]);
        let cheapest = (0..inst.m())
            .filter(|&e| {
                let (u, v) = inst.ends(e);
                labels[u] != labels[v]
            })
            .map(|e| inst.edge_cost(e).clone())
            .min()
            .unwrap();
        assert_eq!(inst.edge_cost(d[0]), &cheapest);
    }
}
