//! Layered convex combinations of spanning trees via capacitated matroid partition.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num::{BigInt, ToPrimitive};
use serde_json::{json, Value};

use crate::cuts::{LayerStructure, NarrowCutChain};
use crate::graph::{forest_path, is_connected, UnionFind};
use crate::instance::Instance;
use crate::rational::{common_denominator, Rational};
use crate::subtour::LpSolution;
use crate::{Error, Result};

pub const DEFAULT_DENOMINATOR_CAP: u64 = 1 << 16;

/// Role of an edge in the matroid of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    /// Inside a level set: part of the graphic component.
    Graphic,
    /// In exactly one cut of the layer family (chain index).
    Partition(usize),
    /// In two or more cuts of the family, or off the support.
    Loop,
}

/// Per-edge classes of layer `i`.
pub fn layer_classes(layers: &LayerStructure, xstar: &LpSolution, i: usize) -> Vec<EdgeClass> {
    let mut out = vec![EdgeClass::Loop; xstar.x.len()];
    for &e in &xstar.support {
        let inside: Vec<usize> = layers.families[i]
            .iter()
            .copied()
            .filter(|&j| layers.chain.cuts[j].contains(e))
            .collect();
        out[e] = match inside.len() {
            0 => EdgeClass::Graphic,
            1 => EdgeClass::Partition(inside[0]),
            _ => EdgeClass::Loop,
        };
    }
    out
}

/// Rank of `x` in the matroid of layer `i`.
pub fn rank_oracle(inst: &Instance, xstar: &LpSolution, layers: &LayerStructure, i: usize, x: &[usize]) -> usize {
    let classes = layer_classes(layers, xstar, i);
    rank_with_classes(inst, &classes, x)
}

fn rank_with_classes(inst: &Instance, classes: &[EdgeClass], x: &[usize]) -> usize {
    let mut uf = UnionFind::new(inst.n());
    let mut hit = BTreeSet::new();
    let mut forest_rank = 0;
    for &e in x {
        match classes[e] {
            EdgeClass::Graphic => {
                let (u, v) = inst.ends(e);
                if uf.union(u, v) {
                    forest_rank += 1;
                }
            }
            EdgeClass::Partition(j) => {
                hit.insert(j);
            }
            EdgeClass::Loop => {}
        }
    }
    forest_rank + hit.len()
}

struct Slot {
    group: usize,
    has: Vec<bool>,
}

impl Slot {
    fn edges(&self) -> Vec<usize> {
        (0..self.has.len()).filter(|&e| self.has[e]).collect()
    }
}

/// Elements of the unique circuit of `slot + e` other than `e`; `None` if independent.
fn circuit(inst: &Instance, classes: &[EdgeClass], slot: &Slot, e: usize) -> Option<Vec<usize>> {
    match classes[e] {
        EdgeClass::Loop => Some(Vec::new()),
        EdgeClass::Partition(j) => (0..slot.has.len())
            .find(|&f| slot.has[f] && classes[f] == EdgeClass::Partition(j))
            .map(|f| vec![f]),
        EdgeClass::Graphic => {
            let forest: Vec<usize> = (0..slot.has.len())
                .filter(|&f| slot.has[f] && classes[f] == EdgeClass::Graphic)
                .collect();
            let (u, v) = inst.ends(e);
            forest_path(inst.n(), inst.all_ends(), &forest, u, v)
        }
    }
}

/// Integral capacitated matroid partition: edge `e` is offered `capacity[e]` times and
/// `slots_per_group[g]` bases of the matroid described by `classes[g]` are filled.
/// Returns every slot as `(group, edges)`; on failure, the edges reached by the last search.
pub fn partition_bases(
    inst: &Instance,
    classes: &[Vec<EdgeClass>],
    slots_per_group: &[usize],
    capacity: &[usize],
) -> Result<Vec<(usize, Vec<usize>)>> {
    let m = capacity.len();
    let mut slots: Vec<Slot> = Vec::new();
    for (g, &count) in slots_per_group.iter().enumerate() {
        for _ in 0..count {
            slots.push(Slot {
                group: g,
                has: vec![false; m],
            });
        }
    }
    type Node = Option<(usize, usize)>;
    for e in 0..m {
        for _ in 0..capacity[e] {
            let mut parent: HashMap<(usize, usize), Node> = HashMap::new();
            let mut queue: VecDeque<Node> = VecDeque::from([None]);
            let mut found: Option<(Node, usize)> = None;
            'search: while let Some(node) = queue.pop_front() {
                let y = node.map_or(e, |(f, _)| f);
                let mut arcs = Vec::new();
                for (j, slot) in slots.iter().enumerate() {
                    if slot.has[y] {
                        continue;
                    }
                    match circuit(inst, &classes[slot.group], slot, y) {
                        None => {
                            found = Some((node, j));
                            break 'search;
                        }
                        Some(c) => arcs.extend(c.into_iter().map(|w| (w, j))),
                    }
                }
                arcs.sort_unstable();
                for arc in arcs {
                    if let std::collections::hash_map::Entry::Vacant(v) = parent.entry(arc) {
                        v.insert(node);
                        queue.push_back(Some(arc));
                    }
                }
            }
            let Some((mut cur, mut target)) = found else {
                let mut reached: Vec<usize> = parent.keys().map(|&(f, _)| f).collect();
                reached.push(e);
                reached.sort_unstable();
                reached.dedup();
                return Err(Error::PartitionFailed(reached));
            };
            loop {
                let y = cur.map_or(e, |(f, _)| f);
                slots[target].has[y] = true;
                match cur {
                    None => break,
                    Some((w, jw)) => {
                        slots[jw].has[w] = false;
                        target = jw;
                        cur = parent[&(w, jw)];
                    }
                }
            }
        }
    }
    let n = inst.n();
    let mut out = Vec::with_capacity(slots.len());
    for slot in &slots {
        let edges = slot.edges();
        let rank = rank_with_classes(inst, &classes[slot.group], &edges);
        if edges.len() != n - 1 || rank != n - 1 {
            return Err(Error::Assertion(format!(
                "slot of group {} holds {} edges of rank {rank}, not a basis",
                slot.group + 1,
                edges.len()
            )));
        }
        out.push((slot.group, edges));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeEntry {
    /// Tree edges, ascending.
    pub edges: Vec<usize>,
    pub lambda: Rational,
    /// Group (0-based layer); 0 for combinations without layering.
    pub group: usize,
    /// L(S), ascending.
    pub lonely: Vec<usize>,
    /// Q(S) as chain indices, ascending.
    pub lonely_cuts: Vec<usize>,
}

impl TreeEntry {
    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn is_lonely_cut(&self, j: usize) -> bool {
        self.lonely_cuts.binary_search(&j).is_ok()
    }

    /// e_S^Q for a lonely cut.
    pub fn lonely_edge(&self, chain: &NarrowCutChain, j: usize) -> Option<usize> {
        if !self.is_lonely_cut(j) {
            return None;
        }
        self.edges.iter().copied().find(|&e| chain.cuts[j].contains(e))
    }

    /// F = S \ L(S).
    pub fn forest(&self) -> Vec<usize> {
        self.edges
            .iter()
            .copied()
            .filter(|e| self.lonely.binary_search(e).is_err())
            .collect()
    }

    /// Edges of the s-t path in the tree, ascending.
    pub fn st_path(&self, inst: &Instance) -> Vec<usize> {
        forest_path(inst.n(), inst.all_ends(), &self.edges, inst.s(), inst.t()).expect("spanning tree")
    }
}

#[derive(Clone, Debug)]
pub struct TreeCombination {
    pub trees: Vec<TreeEntry>,
    pub layered: bool,
    /// Common denominator used by the partition.
    pub scale: BigInt,
}

impl TreeCombination {
    /// m_i: number of trees in groups 0..=i.
    pub fn group_bounds(&self, k: usize) -> Vec<usize> {
        (0..k)
            .map(|i| self.trees.iter().filter(|t| t.group <= i).count())
            .collect()
    }

    /// Lonely edges per tree by equality: every edge that is the only tree edge of a narrow cut.
    pub fn with_equality_lonely(chain: &NarrowCutChain, trees: Vec<(Vec<usize>, Rational)>) -> Self {
        let trees = trees
            .into_iter()
            .map(|(mut edges, lambda)| {
                edges.sort_unstable();
                let mut lonely = Vec::new();
                let mut lonely_cuts = Vec::new();
                for (j, q) in chain.cuts.iter().enumerate() {
                    let inside: Vec<usize> = edges.iter().copied().filter(|&e| q.contains(e)).collect();
                    if inside.len() == 1 {
                        lonely_cuts.push(j);
                        lonely.push(inside[0]);
                    }
                }
                lonely.sort_unstable();
                lonely.dedup();
                TreeEntry {
                    edges,
                    lambda,
                    group: 0,
                    lonely,
                    lonely_cuts,
                }
            })
            .collect();
        let scale = BigInt::from(1);
        TreeCombination {
            trees,
            layered: false,
            scale,
        }
    }

    pub fn to_json(&self, inst: &Instance, stats: &CombinationStats) -> Value {
        let name = |e: usize| {
            let (u, v) = inst.ends(e);
            json!([u.to_string(), v.to_string()])
        };
        let trees: Vec<Value> = self
            .trees
            .iter()
            .map(|t| {
                json!({
                    "edges": t.edges.iter().map(|&e| name(e)).collect::<Vec<_>>(),
                    "lambda": t.lambda.to_pq(),
                    "group": t.group + 1,
                    "lonely": t.lonely.iter().map(|&e| name(e)).collect::<Vec<_>>(),
                    "lonely_cuts": t.lonely_cuts.iter().map(|j| j + 1).collect::<Vec<_>>(),
                })
            })
            .collect();
        let xq: Vec<Value> = stats
            .xq
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let entries: Vec<Value> = (0..v.len())
                    .filter(|&e| !v[e].is_zero())
                    .map(|e| {
                        let (a, b) = inst.ends(e);
                        json!([a.to_string(), b.to_string(), v[e].to_pq()])
                    })
                    .collect();
                json!({"cut": j + 1, "entries": entries})
            })
            .collect();
        json!({"trees": trees, "xQ": xq})
    }
}

#[derive(Clone, Debug)]
pub struct CombinationStats {
    /// x^Q per chain cut, over all complete-graph edges.
    pub xq: Vec<Vec<Rational>>,
    pub pstar: Vec<Rational>,
    pub qstar: Vec<Rational>,
}

pub fn combination_stats(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
) -> CombinationStats {
    let m = inst.m();
    let mut xq = vec![vec![Rational::zero(); m]; chain.len()];
    let mut pstar = vec![Rational::zero(); m];
    for tree in &combo.trees {
        for &j in &tree.lonely_cuts {
            let e = tree.lonely_edge(chain, j).expect("lonely cut has an edge");
            xq[j][e] += &tree.lambda;
        }
        for e in tree.st_path(inst) {
            pstar[e] += &tree.lambda;
        }
    }
    let qstar = (0..m).map(|e| &xstar.x[e] - &pstar[e]).collect();
    CombinationStats { xq, pstar, qstar }
}

fn denominator_scale(values: &[Rational], cap: u64) -> Result<u64> {
    let k = common_denominator(values.iter());
    match k.to_u64() {
        Some(k) if k <= cap => Ok(k),
        _ => Err(Error::DenominatorCap { k: k.to_string(), cap }),
    }
}

fn integral(v: &Rational, k: u64) -> usize {
    let scaled = v * &Rational::from_integer(k as i64);
    assert!(scaled.is_integer(), "{v} times {k} is not integral");
    scaled.numer().to_usize().expect("capacity fits")
}

fn merge_slots(slots: Vec<(usize, Vec<usize>)>, k: u64) -> Vec<(usize, Vec<usize>, Rational)> {
    let unit = Rational::new(1, k as i64);
    let mut out: Vec<(usize, Vec<usize>, Rational)> = Vec::new();
    for (g, edges) in slots {
        match out.iter_mut().find(|(h, f, _)| *h == g && *f == edges) {
            Some(entry) => entry.2 += &unit,
            None => out.push((g, edges, unit.clone())),
        }
    }
    out
}

/// Layered combination: one capacitated partition into K*zeta_i bases of each layer matroid.
pub fn decompose_layered(
    inst: &Instance,
    xstar: &LpSolution,
    layers: &LayerStructure,
    cap: u64,
) -> Result<(TreeCombination, CombinationStats)> {
    let mut scaled_values = xstar.x.clone();
    scaled_values.extend(layers.zeta.iter().cloned());
    let k = denominator_scale(&scaled_values, cap)?;
    let classes: Vec<Vec<EdgeClass>> = (0..layers.k()).map(|i| layer_classes(layers, xstar, i)).collect();
    let slots_per_group: Vec<usize> = layers.zeta.iter().map(|z| integral(z, k)).collect();
    let capacity: Vec<usize> = xstar.x.iter().map(|v| integral(v, k)).collect();
    let slots = partition_bases(inst, &classes, &slots_per_group, &capacity)?;
    let mut trees = Vec::new();
    for (g, edges, lambda) in merge_slots(slots, k) {
        if !is_connected(inst.n(), edges.iter().map(|&e| inst.ends(e))) {
            return Err(Error::Assertion(format!("basis of group {} is not a spanning tree", g + 1)));
        }
        let lonely: Vec<usize> = edges.iter().copied().filter(|&e| layers.is_layer_edge(g, e)).collect();
        trees.push(TreeEntry {
            edges,
            lambda,
            group: g,
            lonely,
            lonely_cuts: layers.families[g].clone(),
        });
    }
    let combo = TreeCombination {
        trees,
        layered: true,
        scale: BigInt::from(k),
    };
    let stats = combination_stats(inst, xstar, &layers.chain, &combo);
    Ok((combo, stats))
}

/// Plain combination of K spanning trees, lonely edges by equality, then trimmed per
/// cut so that x^Q(Q) = 2 - x*(Q).
pub fn decompose_generic(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    cap: u64,
) -> Result<(TreeCombination, CombinationStats)> {
    let k = denominator_scale(&xstar.x, cap)?;
    let mut classes = vec![EdgeClass::Loop; inst.m()];
    for &e in &xstar.support {
        classes[e] = EdgeClass::Graphic;
    }
    let capacity: Vec<usize> = xstar.x.iter().map(|v| integral(v, k)).collect();
    let slots = partition_bases(inst, &[classes], &[k as usize], &capacity)?;
    let trees = merge_slots(slots, k).into_iter().map(|(_, e, l)| (e, l)).collect();
    let mut combo = TreeCombination::with_equality_lonely(chain, trees);
    combo.scale = BigInt::from(k);
    trim_lonely(chain, &mut combo)?;
    let stats = combination_stats(inst, xstar, chain, &combo);
    Ok((combo, stats))
}

/// Drops cuts from Q(S), splitting trees where needed, until each cut is lonely with
/// total weight exactly 2 - x*(Q). An edge is the lonely edge of at most one cut.
pub fn trim_lonely(chain: &NarrowCutChain, combo: &mut TreeCombination) -> Result<()> {
    for (j, q) in chain.cuts.iter().enumerate() {
        let target = Rational::from_integer(2) - &q.size;
        let current: Rational = combo
            .trees
            .iter()
            .filter(|t| t.is_lonely_cut(j))
            .map(|t| &t.lambda)
            .sum();
        let mut excess = &current - &target;
        if excess.is_negative() {
            return Err(Error::Assertion(format!(
                "cut {} is lonely with weight {current} below {target}",
                j + 1
            )));
        }
        let mut idx = 0;
        while excess.is_positive() && idx < combo.trees.len() {
            if combo.trees[idx].is_lonely_cut(j) {
                let lambda = combo.trees[idx].lambda.clone();
                let e = combo.trees[idx].lonely_edge(chain, j).expect("lonely edge");
                let drop = |t: &mut TreeEntry| {
                    t.lonely_cuts.retain(|&c| c != j);
                    t.lonely.retain(|&f| f != e);
                };
                if excess >= lambda {
                    drop(&mut combo.trees[idx]);
                    excess -= &lambda;
                } else {
                    let mut copy = combo.trees[idx].clone();
                    copy.lambda = excess.clone();
                    drop(&mut copy);
                    combo.trees[idx].lambda = &lambda - &excess;
                    combo.trees.insert(idx + 1, copy);
                    excess = Rational::zero();
                    idx += 1;
                }
            }
            idx += 1;
        }
    }
    Ok(())
}

/// Every invariant of a combination that can be checked directly; empty when all hold.
pub fn audit_combination(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    layers: Option<&LayerStructure>,
    combo: &TreeCombination,
    stats: &CombinationStats,
) -> Vec<String> {
    let mut out = Vec::new();
    let m = inst.m();
    let total: Rational = combo.trees.iter().map(|t| &t.lambda).sum();
    if total != Rational::one() {
        out.push(format!("coefficients sum to {total}"));
    }
    let mut sum = vec![Rational::zero(); m];
    for (idx, tree) in combo.trees.iter().enumerate() {
        if tree.edges.len() + 1 != inst.n() || !is_connected(inst.n(), tree.edges.iter().map(|&e| inst.ends(e))) {
            out.push(format!("tree {idx} is not spanning"));
        }
        for &e in &tree.edges {
            sum[e] += &tree.lambda;
        }
        for &j in &tree.lonely_cuts {
            let inside = tree.edges.iter().filter(|&&e| chain.cuts[j].contains(e)).count();
            if inside != 1 {
                out.push(format!("tree {idx}: lonely cut {} meets the tree {inside} times", j + 1));
            } else if !tree.lonely.contains(&tree.lonely_edge(chain, j).expect("edge")) {
                out.push(format!("tree {idx}: lonely cut {} edge not in L(S)", j + 1));
            }
        }
        for &e in &tree.lonely {
            if !tree.lonely_cuts.iter().any(|&j| chain.cuts[j].contains(e)) {
                out.push(format!("tree {idx}: lonely edge {e} is in no lonely cut"));
            }
        }
        if combo.layered {
            for &j in &tree.lonely_cuts {
                for (jj, q) in chain.cuts.iter().enumerate() {
                    if q.size <= chain.cuts[j].size && !tree.is_lonely_cut(jj) {
                        out.push(format!("tree {idx} not layered: cut {} lonely but {} not", j + 1, jj + 1));
                    }
                }
            }
        }
    }
    if sum != xstar.x {
        out.push("combination does not reproduce x*".into());
    }
    let two = Rational::from_integer(2);
    let mut xq_total = vec![Rational::zero(); m];
    for (j, q) in chain.cuts.iter().enumerate() {
        let mass: Rational = stats.xq[j].iter().sum();
        if mass != &two - &q.size {
            out.push(format!("x^Q(Q) = {mass} for cut {} of size {}", j + 1, q.size));
        }
        for e in 0..m {
            xq_total[e] += &stats.xq[j][e];
        }
    }
    for e in 0..m {
        if xq_total[e] > stats.pstar[e] {
            out.push(format!("sum of x^Q exceeds p* on edge {e}"));
        }
        if &stats.pstar[e] + &stats.qstar[e] != xstar.x[e] {
            out.push(format!("p* + q* differs from x* on edge {e}"));
        }
    }
    if let Some(layers) = layers {
        let bounds = combo.group_bounds(layers.k());
        let mut acc = Rational::zero();
        for i in 0..layers.k() {
            acc += &layers.zeta[i];
            let mass: Rational = combo.trees.iter().filter(|t| t.group <= i).map(|t| &t.lambda).sum();
            if mass != acc {
                out.push(format!("groups up to {} carry {mass}, expected {acc}", i + 1));
            }
            let classes = layer_classes(layers, xstar, i);
            for tree in &combo.trees[..bounds[i]] {
                if rank_with_classes(inst, &classes, &tree.edges) != inst.n() - 1 {
                    out.push(format!("tree of group {} is not a basis of layer {}", tree.group + 1, i + 1));
                }
            }
        }
        if combo.trees.len() > xstar.support.len() {
            out.push(format!("{} trees exceed |E| = {}", combo.trees.len(), xstar.support.len()));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExchangeReport {
    /// Number of bases meeting every cut at most once.
    pub restricted: usize,
    /// Counterexamples (B1, B2, x) to the exchange axiom.
    pub failures: Vec<(Vec<usize>, Vec<usize>, usize)>,
}

impl ExchangeReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }
}

/// All bases of a matroid on `ground` (at most 20 elements) given by its rank function.
pub fn enumerate_bases(ground: &[usize], rank: impl Fn(&[usize]) -> usize) -> Vec<Vec<usize>> {
    assert!(ground.len() <= 20, "ground set too large to enumerate");
    let r = rank(ground);
    let mut out = Vec::new();
    for mask in 0u32..(1 << ground.len()) {
        if mask.count_ones() as usize != r {
            continue;
        }
        let set: Vec<usize> = (0..ground.len()).filter(|i| mask >> i & 1 == 1).map(|i| ground[i]).collect();
        if rank(&set) == r {
            out.push(set);
        }
    }
    out
}

/// Basis-exchange axiom for the bases meeting every cut of `cuts` at most once.
pub fn verify_cut_restricted_matroid(bases: &[Vec<usize>], cuts: &[Vec<usize>]) -> Result<ExchangeReport> {
    let restricted: Vec<BTreeSet<usize>> = bases
        .iter()
        .filter(|b| cuts.iter().all(|c| b.iter().filter(|e| c.contains(e)).count() <= 1))
        .map(|b| b.iter().copied().collect())
        .collect();
    if restricted.is_empty() {
        return Err(Error::EmptyRestriction);
    }
    let members: BTreeSet<&BTreeSet<usize>> = restricted.iter().collect();
    let mut failures = Vec::new();
    for b1 in &restricted {
        for b2 in &restricted {
            for &x in b1.difference(b2) {
                let ok = b2.difference(b1).any(|&y| {
                    let mut c = b1.clone();
                    c.remove(&x);
                    c.insert(y);
                    members.contains(&c)
                });
                if !ok {
                    failures.push((b1.iter().copied().collect(), b2.iter().copied().collect(), x));
                }
            }
        }
    }
    Ok(ExchangeReport {
        restricted: restricted.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::{build_layers, find_narrow_cuts};
    use crate::fixtures;
    use crate::rational::rat;

    fn figure1_layers() -> (Instance, LpSolution, LayerStructure) {
        let (inst, xstar) = fixtures::figure1();
        let chain = find_narrow_cuts(&inst, &xstar).unwrap();
        let layers = build_layers(&inst, &xstar, &chain);
        (inst, xstar, layers)
    }

    #[test]
    fn rank_on_fixture() {
        let (inst, xstar, layers) = figure1_layers();
        assert_eq!(rank_oracle(&inst, &xstar, &layers, 0, &[]), 0);
        assert_eq!(rank_oracle(&inst, &xstar, &layers, 0, &xstar.support), 7);
        assert_eq!(rank_oracle(&inst, &xstar, &layers, 1, &xstar.support), 7);
        let gao = &fixtures::figure2_trees()[0];
        assert_eq!(rank_oracle(&inst, &xstar, &layers, 0, gao), 7);
    }

    /// Largest independent subset by brute force: F_i forest plus one layer edge per cut.
    fn brute_rank(inst: &Instance, classes: &[EdgeClass], x: &[usize]) -> usize {
        let mut best = 0;
        for mask in 0u32..(1 << x.len()) {
            let set: Vec<usize> = (0..x.len()).filter(|i| mask >> i & 1 == 1).map(|i| x[i]).collect();
            let mut uf = UnionFind::new(inst.n());
            let mut used = BTreeSet::new();
            let ok = set.iter().all(|&e| match classes[e] {
                EdgeClass::Loop => false,
                EdgeClass::Partition(j) => used.insert(j),
                EdgeClass::Graphic => {
                    let (u, v) = inst.ends(e);
                    uf.union(u, v)
                }
            });
            if ok {
                best = best.max(set.len());
            }
        }
        best
    }

    #[test]
    fn rank_matches_brute_force_on_subsets() {
        let (inst, xstar, layers) = figure1_layers();
        for i in 0..layers.k() {
            let classes = layer_classes(&layers, &xstar, i);
            for mask in (0u32..(1 << 12)).step_by(37) {
                let x: Vec<usize> = (0..12).filter(|b| mask >> b & 1 == 1).map(|b| xstar.support[b]).collect();
                assert_eq!(rank_with_classes(&inst, &classes, &x), brute_rank(&inst, &classes, &x));
            }
        }
    }

    #[test]
    fn layered_decomposition_of_fixture() {
        let (inst, xstar, layers) = figure1_layers();
        let (combo, stats) = decompose_layered(&inst, &xstar, &layers, DEFAULT_DENOMINATOR_CAP).unwrap();
        assert!(audit_combination(&inst, &xstar, &layers.chain, Some(&layers), &combo, &stats).is_empty());
        let group1: Rational = combo.trees.iter().filter(|t| t.group == 0).map(|t| &t.lambda).sum();
        assert_eq!(group1, rat(1, 3));
        assert_eq!(combo.group_bounds(2), vec![1, 3]);
        for tree in combo.trees.iter().filter(|t| t.group == 1) {
            assert_eq!(tree.lonely_cuts, vec![0, 5]);
        }
    }

    #[test]
    fn integral_path_is_its_own_decomposition() {
        let n = 5;
        let inst = Instance::from_fn(n, 0, 4, |u, v| rat((u as i64 - v as i64).abs(), 1)).unwrap();
        let mut x = vec![rat(0, 1); inst.m()];
        for v in 0..n - 1 {
            x[inst.edge(v, v + 1)] = rat(1, 1);
        }
        let xstar = LpSolution::from_vector(&inst, x);
        let chain = find_narrow_cuts(&inst, &xstar).unwrap();
        let layers = build_layers(&inst, &xstar, &chain);
        let (combo, _) = decompose_layered(&inst, &xstar, &layers, DEFAULT_DENOMINATOR_CAP).unwrap();
        assert_eq!(combo.trees.len(), 1);
        assert_eq!(combo.trees[0].edges, xstar.support);
        assert_eq!(combo.trees[0].lonely, xstar.support);
        let (generic, _) = decompose_generic(&inst, &xstar, &chain, DEFAULT_DENOMINATOR_CAP).unwrap();
        assert_eq!(generic.trees[0].edges, xstar.support);
    }

    #[test]
    fn figure_five_combination_is_not_layered() {
        let (inst, xstar, layers) = figure1_layers();
        let trees = fixtures::figure5_trees().into_iter().map(|t| (t, rat(1, 3))).collect();
        let mut combo = TreeCombination::with_equality_lonely(&layers.chain, trees);
        // the fifth cut meets two of the trees once, so x^Q(Q) starts at 2/3
        let raw = combination_stats(&inst, &xstar, &layers.chain, &combo);
        let mass: Rational = raw.xq[4].iter().sum();
        assert_eq!(mass, rat(2, 3));
        trim_lonely(&layers.chain, &mut combo).unwrap();
        let stats = combination_stats(&inst, &xstar, &layers.chain, &combo);
        let report = audit_combination(&inst, &xstar, &layers.chain, None, &combo, &stats);
        assert!(report.is_empty(), "{report:?}");
        combo.layered = true;
        assert!(!audit_combination(&inst, &xstar, &layers.chain, None, &combo, &stats).is_empty());
    }

    #[test]
    fn four_cycle_restricted_bases() {
        // 4-cycle 0-1-2-3-0 with edges a=01, b=12, c=23, d=30; cut {a, c}
        let ground = [0, 1, 2, 3];
        let ends = [(0, 1), (1, 2), (2, 3), (3, 0)];
        let rank = |x: &[usize]| {
            let mut uf = UnionFind::new(4);
            x.iter().filter(|&&e| uf.union(ends[e].0, ends[e].1)).count()
        };
        let bases = enumerate_bases(&ground, rank);
        assert_eq!(bases.len(), 4);
        let report = verify_cut_restricted_matroid(&bases, &[vec![0, 2]]).unwrap();
        assert!(report.holds());
        assert_eq!(report.restricted, 2);
        let all = verify_cut_restricted_matroid(&bases, &[]).unwrap();
        assert_eq!(all.restricted, 4);
        assert!(matches!(
            verify_cut_restricted_matroid(&bases, &[vec![0, 1, 2, 3]]),
            Err(Error::EmptyRestriction)
        ));
    }
}
