//! Restated best-of-many with deletion: per tree a forest-based and a
//! Christofides-based s-t tour, shortcutting, and selection of the cheapest.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cuts::{build_layers, find_narrow_cuts, LayerStructure, NarrowCutChain};
use crate::graph::{component_labels, is_connected, UnionFind};
use crate::instance::Instance;
use crate::joins::{
    build_yf, check_tjoin_polyhedron, min_tjoin_full, odd_vertices, toggle_st, Join, ParityVector,
    DEFAULT_MATCHING_CAP,
};
use crate::rational::Rational;
use crate::reconnect::{
    bad_edges, check_kh_condition, doubled_mst, bad_mass_off_lonely, bad_share_rows, modified_costs, solve_reconnection_lp,
    surcharge_ledger, BadEdgeIndex, DropRule, KhReport, ReconnectionPlan, SurchargeLedger, DEFAULT_SUBSET_CAP,
};
use crate::subtour::{solve_subtour_lp, LpSolution};
use crate::treedecomp::{decompose_layered, CombinationStats, TreeCombination, TreeEntry, DEFAULT_DENOMINATOR_CAP};
use crate::{Error, Result};

pub fn default_gamma() -> Rational {
    Rational::new(1, 16)
}

pub fn check_gamma(gamma: &Rational) -> Result<()> {
    if gamma.is_negative() || *gamma > Rational::new(1, 2) {
        return Err(Error::GammaOutOfRange(gamma.clone()));
    }
    Ok(())
}

/// A connected spanning multigraph with odd degrees exactly at s and t, and its
/// shortcut Hamiltonian path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StTour {
    /// Edge multiset, ascending with repeats.
    pub multigraph: Vec<usize>,
    pub multigraph_cost: Rational,
    /// Vertex sequence from s to t.
    pub path: Vec<usize>,
    pub path_cost: Rational,
}

impl StTour {
    pub fn from_multigraph(inst: &Instance, mut edges: Vec<usize>) -> Result<Self> {
        edges.sort_unstable();
        audit_multigraph(inst, &edges)?;
        let path = shortcut(inst, &edges)?;
        let multigraph_cost = inst.cost_of(&edges);
        let path_cost = inst.path_cost(&path);
        if path_cost > multigraph_cost {
            return Err(Error::Assertion(format!(
                "shortcut cost {path_cost} exceeds walk cost {multigraph_cost}"
            )));
        }
        Ok(StTour {
            multigraph: edges,
            multigraph_cost,
            path,
            path_cost,
        })
    }

    pub fn to_json(&self, inst: &Instance) -> Value {
        let edges: Vec<Value> = self
            .multigraph
            .iter()
            .map(|&e| {
                let (u, v) = inst.ends(e);
                json!([u.to_string(), v.to_string()])
            })
            .collect();
        json!({
            "path": self.path,
            "path_cost": self.path_cost.to_pq(),
            "multigraph": edges,
            "multigraph_cost": self.multigraph_cost.to_pq(),
        })
    }
}

/// Parity and connectivity check of an s-t tour multigraph.
pub fn audit_multigraph(inst: &Instance, edges: &[usize]) -> Result<()> {
    let odd = odd_vertices(inst.n(), inst.all_ends(), edges);
    let mut want = vec![inst.s(), inst.t()];
    want.sort_unstable();
    if odd != want {
        return Err(Error::NotAnStTour(format!("odd-degree vertices {odd:?}")));
    }
    if !is_connected(inst.n(), edges.iter().map(|&e| inst.ends(e))) {
        return Err(Error::NotAnStTour("not connected".into()));
    }
    Ok(())
}

/// Eulerian s-t walk (Hierholzer, lowest neighbour first) with repeated vertices
/// skipped; t is kept only at the end.
pub fn shortcut(inst: &Instance, edges: &[usize]) -> Result<Vec<usize>> {
    audit_multigraph(inst, edges)?;
    let n = inst.n();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (slot, &e) in edges.iter().enumerate() {
        let (u, v) = inst.ends(e);
        adj[u].push((v, slot));
        adj[v].push((u, slot));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let mut used = vec![false; edges.len()];
    let mut next = vec![0usize; n];
    let mut stack = vec![inst.s()];
    let mut walk = Vec::with_capacity(edges.len() + 1);
    while let Some(&v) = stack.last() {
        while next[v] < adj[v].len() && used[adj[v][next[v]].1] {
            next[v] += 1;
        }
        if next[v] == adj[v].len() {
            walk.push(v);
            stack.pop();
        } else {
            let (w, slot) = adj[v][next[v]];
            used[slot] = true;
            stack.push(w);
        }
    }
    walk.reverse();
    let mut seen = vec![false; n];
    let mut path = Vec::with_capacity(n);
    seen[inst.t()] = true;
    for v in walk {
        if !seen[v] {
            seen[v] = true;
            path.push(v);
        }
    }
    path.push(inst.t());
    if path.len() != n || path.first() != Some(&inst.s()) || path.last() != Some(&inst.t()) {
        return Err(Error::Assertion(format!("shortcut produced {path:?}")));
    }
    Ok(path)
}

/// Components of (V, F + J), the reconnection 2D and the resulting tour.
#[derive(Clone, Debug)]
pub struct ForestTour {
    pub labels: Vec<usize>,
    pub reconnection: Vec<usize>,
    pub tour: StTour,
}

/// P_1 for a given forest and join.
pub fn forest_tour_with_join(inst: &Instance, forest: &[usize], join: &[usize]) -> Result<ForestTour> {
    let labels = component_labels(inst.n(), forest.iter().chain(join).map(|&e| inst.ends(e)));
    let reconnection = doubled_mst(inst, &labels);
    let multigraph: Vec<usize> = forest.iter().chain(join).chain(&reconnection).copied().collect();
    let tour = StTour::from_multigraph(inst, multigraph)?;
    Ok(ForestTour {
        labels,
        reconnection,
        tour,
    })
}

/// T_F xor {s, t} for an edge set.
pub fn parity_set(inst: &Instance, edges: &[usize]) -> Vec<usize> {
    toggle_st(&odd_vertices(inst.n(), inst.all_ends(), edges), inst.s(), inst.t())
}

/// P_2(S) = S + J_S.
pub fn christofides_tour(inst: &Instance, tree: &[usize], matching_cap: usize) -> Result<(Join, StTour)> {
    let join = min_tjoin_full(inst, &parity_set(inst, tree), inst.costs(), matching_cap)?;
    let tour = StTour::from_multigraph(inst, tree.iter().chain(&join.edges).copied().collect())?;
    Ok((join, tour))
}

/// Minimum spanning tree plus a minimum parity-fixing join.
pub fn hoogeveen_baseline(inst: &Instance) -> Result<StTour> {
    let mut order: Vec<usize> = (0..inst.m()).collect();
    order.sort_by(|&a, &b| inst.edge_cost(a).cmp(inst.edge_cost(b)).then(a.cmp(&b)));
    let mut uf = UnionFind::new(inst.n());
    let tree: Vec<usize> = order
        .into_iter()
        .filter(|&e| {
            let (u, v) = inst.ends(e);
            uf.union(u, v)
        })
        .collect();
    Ok(christofides_tour(inst, &tree, DEFAULT_MATCHING_CAP)?.1)
}

#[derive(Clone, Debug)]
pub struct BomdOptions {
    pub gamma: Rational,
    pub rule: DropRule,
    pub denominator_cap: u64,
    pub matching_cap: usize,
    pub subset_cap: usize,
}

impl Default for BomdOptions {
    fn default() -> Self {
        BomdOptions {
            gamma: default_gamma(),
            rule: DropRule::MaxCost,
            denominator_cap: DEFAULT_DENOMINATOR_CAP,
            matching_cap: DEFAULT_MATCHING_CAP,
            subset_cap: DEFAULT_SUBSET_CAP,
        }
    }
}

/// Everything computed for one tree of the combination.
#[derive(Clone, Debug)]
pub struct TreeRun {
    pub index: usize,
    pub tree_cost: Rational,
    pub forest: Vec<usize>,
    pub forest_cost: Rational,
    pub yf: ParityVector,
    /// c(y_F).
    pub y_cost: Rational,
    /// c'(y_F).
    pub y_modified_cost: Rational,
    /// Odd cut of weight below 1 when y_F misses the T-join polyhedron.
    pub polyhedron_violation: Option<(Vec<usize>, Rational)>,
    /// J*_F, minimum under c'.
    pub join_f: Join,
    /// c'(J*_F).
    pub join_f_modified_cost: Rational,
    pub p1: ForestTour,
    pub bad: BadEdgeIndex,
    pub plan: ReconnectionPlan,
    pub kh: KhReport,
    pub bad_mass_off_lonely: Vec<usize>,
    /// (cut, lhs, rhs) per lonely cut.
    pub bad_share: Vec<(usize, Rational, Rational)>,
    pub surcharge: SurchargeLedger,
    pub join_s: Join,
    pub p2: StTour,
    /// c(S \ S(s,t)).
    pub off_path_cost: Rational,
}

fn weighted_cost(weights: &[Rational], costs: &[Rational]) -> Rational {
    weights
        .iter()
        .zip(costs)
        .filter(|(w, _)| !w.is_zero())
        .map(|(w, c)| w * c)
        .sum()
}

/// Forest-based and Christofides-based tours of one tree, with reconnection data.
pub fn run_tree(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    stats: &CombinationStats,
    tree: &TreeEntry,
    index: usize,
    opts: &BomdOptions,
) -> Result<TreeRun> {
    let forest = tree.forest();
    let t_f = parity_set(inst, &forest);
    let c_mod = modified_costs(inst, chain, tree, opts.rule);
    let yf = build_yf(inst, xstar, chain, tree, stats, &opts.gamma);
    let y = yf.total();
    let polyhedron_violation =
        check_tjoin_polyhedron(inst, &y, &t_f).map(|(side, w)| (crate::graph::members(&side), w));
    let join_f = min_tjoin_full(inst, &t_f, &c_mod, opts.matching_cap)?;
    let join_f_modified_cost = join_f.cost.clone();
    let p1 = forest_tour_with_join(inst, &forest, &join_f.edges)?;
    let bad = bad_edges(inst, xstar, chain, tree);
    let plan = solve_reconnection_lp(&bad, xstar);
    let kh = check_kh_condition(&bad, xstar, opts.subset_cap);
    let surcharge = surcharge_ledger(inst, chain, tree, &bad, &plan, &yf);
    let (join_s, p2) = christofides_tour(inst, &tree.edges, opts.matching_cap)?;
    let path = tree.st_path(inst);
    let off_path: Vec<usize> = tree.edges.iter().copied().filter(|e| path.binary_search(e).is_err()).collect();
    Ok(TreeRun {
        index,
        tree_cost: inst.cost_of(&tree.edges),
        forest_cost: inst.cost_of(&forest),
        forest,
        y_cost: weighted_cost(&y, inst.costs()),
        y_modified_cost: weighted_cost(&y, &c_mod),
        yf,
        polyhedron_violation,
        join_f: Join {
            cost: inst.cost_of(&join_f.edges),
            edges: join_f.edges,
        },
        join_f_modified_cost,
        p1,
        bad_mass_off_lonely: bad_mass_off_lonely(&bad, tree, stats),
        bad_share: bad_share_rows(&bad, xstar, chain, &plan),
        bad,
        plan,
        kh,
        surcharge,
        join_s,
        p2,
        off_path_cost: inst.cost_of(&off_path),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TourKind {
    Forest,
    Christofides,
}

#[derive(Clone, Debug)]
pub struct BomdRun {
    pub xstar: LpSolution,
    pub chain: NarrowCutChain,
    pub layers: LayerStructure,
    pub combo: TreeCombination,
    pub stats: CombinationStats,
    pub options: BomdOptions,
    pub trees: Vec<TreeRun>,
    pub best: StTour,
    /// Tree index and tour type of the selected tour.
    pub best_from: (usize, TourKind),
}

/// Runs the per-tree map over a fixed layered combination.
pub fn run_trees(
    inst: &Instance,
    xstar: &LpSolution,
    chain: &NarrowCutChain,
    combo: &TreeCombination,
    stats: &CombinationStats,
    opts: &BomdOptions,
) -> Result<Vec<TreeRun>> {
    combo
        .trees
        .par_iter()
        .enumerate()
        .map(|(i, tree)| run_tree(inst, xstar, chain, stats, tree, i, opts))
        .collect()
}

fn select_best(trees: &[TreeRun]) -> (StTour, (usize, TourKind)) {
    let mut best: Option<(&StTour, (usize, TourKind))> = None;
    for run in trees {
        for (tour, kind) in [(&run.p1.tour, TourKind::Forest), (&run.p2, TourKind::Christofides)] {
            if best.map_or(true, |(b, _)| tour.path_cost < b.path_cost) {
                best = Some((tour, (run.index, kind)));
            }
        }
    }
    let (tour, from) = best.expect("combination has a tree");
    (tour.clone(), from)
}

/// Subtour LP, narrow cuts, layered combination, then the per-tree tours.
pub fn run_bomd(inst: &Instance, opts: &BomdOptions) -> Result<BomdRun> {
    check_gamma(&opts.gamma)?;
    let xstar = solve_subtour_lp(inst)?;
    run_bomd_from(inst, xstar, opts)
}

/// The same pipeline over a given feasible point of the subtour polytope.
pub fn run_bomd_from(inst: &Instance, xstar: LpSolution, opts: &BomdOptions) -> Result<BomdRun> {
    check_gamma(&opts.gamma)?;
    let chain = find_narrow_cuts(inst, &xstar)?;
    let layers = build_layers(inst, &xstar, &chain);
    let (combo, stats) = decompose_layered(inst, &xstar, &layers, opts.denominator_cap)?;
    let trees = run_trees(inst, &xstar, &chain, &combo, &stats, opts)?;
    Ok(BomdRun::assemble(xstar, chain, layers, combo, stats, opts, trees))
}

impl BomdRun {
    /// Picks the cheapest tour from finished per-tree runs.
    pub fn assemble(
        xstar: LpSolution,
        chain: NarrowCutChain,
        layers: LayerStructure,
        combo: TreeCombination,
        stats: CombinationStats,
        opts: &BomdOptions,
        trees: Vec<TreeRun>,
    ) -> Self {
        let (best, best_from) = select_best(&trees);
        BomdRun {
            xstar,
            chain,
            layers,
            combo,
            stats,
            options: opts.clone(),
            trees,
            best,
            best_from,
        }
    }
}
