//! T-joins: exact minimum joins, the fractional parity-correction vector y_F, and
//! membership in the T-join polyhedron.

use serde_json::{json, Value};

use crate::cuts::NarrowCutChain;
use crate::flow::{capacity_from_edges, gomory_hu};
use crate::graph::{edge_id, members};
use crate::instance::Instance;
use crate::rational::Rational;
use crate::subtour::LpSolution;
use crate::treedecomp::{CombinationStats, TreeEntry};
use crate::{Error, Result};

pub const DEFAULT_MATCHING_CAP: usize = 20;

/// Vertices of odd degree in an edge multiset (edge ids may repeat).
pub fn odd_vertices(n: usize, ends: &[(usize, usize)], edges: &[usize]) -> Vec<usize> {
    let mut odd = vec![false; n];
    for &e in edges {
        let (u, v) = ends[e];
        odd[u] = !odd[u];
        odd[v] = !odd[v];
    }
    members(&odd)
}

/// Symmetric difference of a vertex set with {s, t}.
pub fn toggle_st(set: &[usize], s: usize, t: usize) -> Vec<usize> {
    let mut out: Vec<usize> = set.iter().copied().filter(|&v| v != s && v != t).collect();
    if !set.contains(&s) {
        out.push(s);
    }
    if !set.contains(&t) {
        out.push(t);
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Join {
    /// Edge ids, ascending, each at most once.
    pub edges: Vec<usize>,
    pub cost: Rational,
}

/// Minimum-cost T-join on the complete graph; `None` marks an unusable edge.
/// Shortest paths, then a bitmask matching on T, then paths added mod 2.
pub fn min_tjoin(n: usize, t_set: &[usize], costs: &[Option<Rational>], cap: usize) -> Result<Join> {
    if t_set.len() % 2 == 1 {
        return Err(Error::OddParitySet(t_set.len()));
    }
    if t_set.len() > cap {
        return Err(Error::MatchingCap {
            size: t_set.len(),
            cap,
        });
    }
    if t_set.is_empty() {
        return Ok(Join {
            edges: Vec::new(),
            cost: Rational::zero(),
        });
    }
    // dist and next hop
    let mut dist: Vec<Vec<Option<Rational>>> = vec![vec![None; n]; n];
    let mut next = vec![vec![usize::MAX; n]; n];
    for u in 0..n {
        dist[u][u] = Some(Rational::zero());
        next[u][u] = u;
        for v in 0..n {
            if u != v {
                if let Some(c) = &costs[edge_id(n, u, v)] {
                    dist[u][v] = Some(c.clone());
                    next[u][v] = v;
                }
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = dist[i][k].clone() else { continue };
            for j in 0..n {
                let Some(kj) = &dist[k][j] else { continue };
                let via = &ik + kj;
                if dist[i][j].as_ref().map_or(true, |d| via < *d) {
                    dist[i][j] = Some(via);
                    next[i][j] = next[i][k];
                }
            }
        }
    }
    let size = t_set.len();
    let full = (1usize << size) - 1;
    let mut dp: Vec<Option<Rational>> = vec![None; 1 << size];
    let mut choice = vec![(0usize, 0usize); 1 << size];
    dp[0] = Some(Rational::zero());
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        for j in i + 1..size {
            if mask >> j & 1 == 0 {
                continue;
            }
            let rest = mask & !(1 << i) & !(1 << j);
            let (Some(base), Some(d)) = (&dp[rest], &dist[t_set[i]][t_set[j]]) else {
                continue;
            };
            let total = base + d;
            if dp[mask].as_ref().map_or(true, |b| total < *b) {
                dp[mask] = Some(total);
                choice[mask] = (i, j);
            }
        }
    }
    if dp[full].is_none() {
        return Err(Error::NoJoin);
    }
    let mut parity = vec![false; costs.len()];
    let mut mask = full;
    while mask != 0 {
        let (i, j) = choice[mask];
        let (mut u, v) = (t_set[i], t_set[j]);
        while u != v {
            let w = next[u][v];
            let e = edge_id(n, u, w);
            parity[e] = !parity[e];
            u = w;
        }
        mask &= !(1 << i) & !(1 << j);
    }
    let edges = members(&parity);
    let cost = edges
        .iter()
        .map(|&e| costs[e].as_ref().expect("path edges are usable"))
        .sum();
    Ok(Join { edges, cost })
}

/// Minimum T-join under a full cost vector.
pub fn min_tjoin_full(inst: &Instance, t_set: &[usize], costs: &[Rational], cap: usize) -> Result<Join> {
    let opt: Vec<Option<Rational>> = costs.iter().cloned().map(Some).collect();
    min_tjoin(inst.n(), t_set, &opt, cap)
}

/// y_F split into its basic, empty-cut completion and even-cut completion parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityVector {
    pub bp: Vec<Rational>,
    pub pce: Vec<Rational>,
    pub pcl: Vec<Rational>,
}

impl ParityVector {
    pub fn total(&self) -> Vec<Rational> {
        (0..self.bp.len())
            .map(|e| &(&self.bp[e] + &self.pce[e]) + &self.pcl[e])
            .collect()
    }

    pub fn to_json(&self, inst: &Instance) -> Value {
        let total = self.total();
        let entries: Vec<Value> = (0..total.len())
            .filter(|&e| !total[e].is_zero())
            .map(|e| {
                let (u, v) = inst.ends(e);
                json!({
                    "edge": [u.to_string(), v.to_string()],
                    "y": total[e].to_pq(),
                    "bp": self.bp[e].to_pq(),
                    "pce": self.pce[e].to_pq(),
                    "pcl": self.pcl[e].to_pq(),
                })
            })
            .collect();
        Value::Array(entries)
    }
}

/// 1 - x/2 - gamma: completion coefficient of a cut of size x.
pub fn completion_coefficient(size: &Rational, gamma: &Rational) -> Rational {
    Rational::one() - size / &Rational::from_integer(2) - gamma
}

/// y_F = x*/2 + gamma S(s,t) + PCE + PCL for the tree `tree` with F = S \ L(S).
pub fn build_yf(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    tree: &TreeEntry,
    stats: &CombinationStats,
    gamma: &Rational,
) -> ParityVector {
    let m = inst.m();
    let half = Rational::new(1, 2);
    let mut bp: Vec<Rational> = xstar.x.iter().map(|v| v * &half).collect();
    for e in tree.st_path(inst) {
        bp[e] += gamma;
    }
    let mut pce = vec![Rational::zero(); m];
    let mut pcl = vec![Rational::zero(); m];
    let threshold = Rational::from_integer(2) - Rational::from_integer(2) * gamma;
    let forest = tree.forest();
    for (j, q) in chain.cuts.iter().enumerate() {
        if q.size > threshold {
            continue;
        }
        let coeff = completion_coefficient(&q.size, gamma);
        if let Some(e) = tree.lonely_edge(chain, j) {
            pce[e] += &coeff;
            continue;
        }
        let in_forest = forest.iter().filter(|&&e| q.contains(e)).count();
        if in_forest >= 2 && in_forest % 2 == 0 {
            let scale = &coeff / &(Rational::from_integer(2) - &q.size);
            for e in 0..m {
                if !stats.xq[j][e].is_zero() {
                    pcl[e] += &scale * &stats.xq[j][e];
                }
            }
        }
    }
    ParityVector { bp, pce, pcl }
}

/// A minimum odd cut of weight below 1, if `y` is outside the T-join polyhedron.
pub fn check_tjoin_polyhedron(inst: &Instance, y: &[Rational], t_set: &[usize]) -> Option<(Vec<bool>, Rational)> {
    if t_set.is_empty() {
        return None;
    }
    let n = inst.n();
    let cap = capacity_from_edges(n, inst.all_ends(), y);
    let tree = gomory_hu(&cap);
    let mut best: Option<(Vec<usize>, Vec<bool>, Rational)> = None;
    for (v, _, w) in tree.edges() {
        if *w >= Rational::one() {
            continue;
        }
        let side = tree.fundamental_cut(v);
        if t_set.iter().filter(|&&u| side[u]).count() % 2 == 0 {
            continue;
        }
        let key = members(&side);
        let better = match &best {
            None => true,
            Some((k, _, bw)) => w < bw || (w == bw && key < *k),
        };
        if better {
            best = Some((key, side, w.clone()));
        }
    }
    best.map(|(_, side, w)| (side, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::{build_layers, find_narrow_cuts};
    use crate::fixtures;
    use crate::instance::{gen_random_metric, GenKind};
    use crate::rational::rat;
    use crate::treedecomp::{decompose_layered, DEFAULT_DENOMINATOR_CAP};

    #[test]
    fn odd_vertices_basics() {
        let n = 4;
        let ends = crate::graph::edge_ends(n);
        assert_eq!(odd_vertices(n, &ends, &[edge_id(n, 1, 2)]), vec![1, 2]);
        let cycle = [edge_id(n, 0, 1), edge_id(n, 1, 2), edge_id(n, 2, 0)];
        assert!(odd_vertices(n, &ends, &cycle).is_empty());
    }

    #[test]
    fn path_metric_join() {
        let inst = Instance::from_fn(3, 0, 2, |u, v| match (u.min(v), u.max(v)) {
            (0, 1) => rat(1, 1),
            (1, 2) => rat(2, 1),
            _ => rat(3, 1),
        })
        .unwrap();
        let j = min_tjoin_full(&inst, &[0, 1], inst.costs(), DEFAULT_MATCHING_CAP).unwrap();
        assert_eq!(j.edges, vec![inst.edge(0, 1)]);
        assert_eq!(j.cost, rat(1, 1));
        let empty = min_tjoin_full(&inst, &[], inst.costs(), DEFAULT_MATCHING_CAP).unwrap();
        assert!(empty.edges.is_empty());
        assert!(matches!(
            min_tjoin_full(&inst, &[0], inst.costs(), DEFAULT_MATCHING_CAP),
            Err(Error::OddParitySet(1))
        ));
    }

    #[test]
    fn gamma_half_has_no_completion() {
        let (inst, xstar) = fixtures::figure1();
        let chain = find_narrow_cuts(&inst, &xstar).unwrap();
        let layers = build_layers(&inst, &xstar, &chain);
        let (combo, stats) = decompose_layered(&inst, &xstar, &layers, DEFAULT_DENOMINATOR_CAP).unwrap();
        for tree in &combo.trees {
            let y = build_yf(&inst, &xstar, &chain, tree, &stats, &rat(1, 2));
            assert!(y.pce.iter().all(|v| v.is_zero()));
            assert!(y.pcl.iter().all(|v| v.is_zero()));
            let t = toggle_st(&odd_vertices(inst.n(), inst.all_ends(), &tree.forest()), inst.s(), inst.t());
            assert!(check_tjoin_polyhedron(&inst, &y.total(), &t).is_none());
        }
    }

    #[test]
    fn gao_tree_completion_coefficient() {
        let (inst, xstar) = fixtures::figure1();
        let chain = find_narrow_cuts(&inst, &xstar).unwrap();
        let layers = build_layers(&inst, &xstar, &chain);
        let (combo, stats) = decompose_layered(&inst, &xstar, &layers, DEFAULT_DENOMINATOR_CAP).unwrap();
        let gao = &combo.trees[0];
        assert_eq!(completion_coefficient(&rat(5, 3), &rat(1, 16)), rat(5, 48));
        let y = build_yf(&inst, &xstar, &chain, gao, &stats, &rat(1, 16));
        // Q2 is lonely in the Gao tree; its lonely edge gets 5/48 from this cut alone
        let e = gao.lonely_edge(&chain, 1).unwrap();
        let others: Rational = (0..chain.len())
            .filter(|&j| j != 1 && gao.lonely_edge(&chain, j) == Some(e))
            .map(|j| completion_coefficient(&chain.cuts[j].size, &rat(1, 16)))
            .sum();
        assert_eq!(y.pce[e], rat(5, 48) + others);
    }

    #[test]
    fn zero_vector_violates() {
        let inst = gen_random_metric(5, 1, GenKind::Euclidean);
        let y = vec![rat(0, 1); inst.m()];
        let (side, w) = check_tjoin_polyhedron(&inst, &y, &[0, 3]).unwrap();
        assert_eq!(w, rat(0, 1));
        assert!(side[0] != side[3]);
    }
}
