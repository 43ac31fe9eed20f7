//! Narrow cuts (s-t cuts of x*-weight below 2), their chain, and the layer structure.

use serde_json::{json, Value};

use crate::flow::{gomory_hu, min_cut_sets};
use crate::graph::members;
use crate::instance::Instance;
use crate::rational::Rational;
use crate::subtour::LpSolution;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NarrowCut {
    /// U-side, always containing s and not t.
    pub side: Vec<bool>,
    /// Support edges crossing U, ascending.
    pub edges: Vec<usize>,
    pub size: Rational,
}

impl NarrowCut {
    pub fn from_side(inst: &Instance, xstar: &LpSolution, side: Vec<bool>) -> Self {
        let edges: Vec<usize> = xstar
            .support
            .iter()
            .copied()
            .filter(|&e| {
                let (u, v) = inst.ends(e);
                side[u] != side[v]
            })
            .collect();
        let size = edges.iter().map(|&e| &xstar.x[e]).sum();
        NarrowCut { side, edges, size }
    }

    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn members(&self) -> Vec<usize> {
        members(&self.side)
    }

    pub fn len(&self) -> usize {
        self.side.iter().filter(|&&b| b).count()
    }
}

/// Narrow cuts ordered by strictly increasing U-side.
#[derive(Clone, Debug)]
pub struct NarrowCutChain {
    pub cuts: Vec<NarrowCut>,
}

impl NarrowCutChain {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn sizes(&self) -> Vec<Rational> {
        self.cuts.iter().map(|q| q.size.clone()).collect()
    }

    /// Indices of the cuts containing edge `e`.
    pub fn cuts_of_edge(&self, e: usize) -> Vec<usize> {
        (0..self.cuts.len()).filter(|&j| self.cuts[j].contains(e)).collect()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.cuts
                .iter()
                .map(|q| {
                    json!({
                        "U": q.members().iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                        "size": q.size.to_pq(),
                    })
                })
                .collect(),
        )
    }
}

fn is_proper_subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y) && a != b
}

/// All narrow cuts of `xstar`: Gomory-Hu seeds, then every gap between consecutive
/// chain members is closed by pairwise flows so that no narrow cut is missed.
pub fn find_narrow_cuts(inst: &Instance, xstar: &LpSolution) -> Result<NarrowCutChain> {
    let n = inst.n();
    let (s, t) = (inst.s(), inst.t());
    let two = Rational::from_integer(2);
    let cap = xstar.capacity(inst);
    let mut sides: Vec<Vec<bool>> = Vec::new();
    let tree = gomory_hu(&cap);
    for (v, _, w) in tree.edges() {
        if *w >= two {
            continue;
        }
        let mut side = tree.fundamental_cut(v);
        if side[s] == side[t] {
            continue;
        }
        if !side[s] {
            side.iter_mut().for_each(|b| *b = !*b);
        }
        sides.push(side);
    }
    let mut first = vec![false; n];
    first[s] = true;
    let mut last = vec![true; n];
    last[t] = false;
    sides.push(first);
    sides.push(last);
    sides.sort_by_key(|side| (side.iter().filter(|&&b| b).count(), members(side)));
    sides.dedup();
    for w in sides.windows(2) {
        if !is_proper_subset(&w[0], &w[1]) {
            return Err(Error::ChainViolation(format!(
                "{:?} and {:?}",
                members(&w[0]),
                members(&w[1])
            )));
        }
    }

    let mut chain: Vec<Vec<bool>> = vec![sides[0].clone()];
    for next in sides.into_iter().skip(1) {
        let mut stack = vec![next];
        while let Some(outer) = stack.pop() {
            let inner = chain.last().expect("chain starts nonempty").clone();
            match gap_cut(&cap, &inner, &outer) {
                Some(mid) => {
                    stack.push(outer);
                    stack.push(mid);
                }
                None => chain.push(outer),
            }
        }
    }

    let cuts: Vec<NarrowCut> = chain
        .into_iter()
        .map(|side| NarrowCut::from_side(inst, xstar, side))
        .collect();
    for q in &cuts {
        if q.size >= two || q.size < Rational::one() {
            return Err(Error::ChainViolation(format!("cut {:?} has size {}", q.members(), q.size)));
        }
    }
    Ok(NarrowCutChain { cuts })
}

/// A narrow cut strictly between `inner` and `outer`, if one exists.
fn gap_cut(cap: &crate::flow::Capacity, inner: &[bool], outer: &[bool]) -> Option<Vec<bool>> {
    let n = inner.len();
    let two = Rational::from_integer(2);
    let gap: Vec<usize> = (0..n).filter(|&v| outer[v] && !inner[v]).collect();
    for &v in &gap {
        for &w in &gap {
            if v == w {
                continue;
            }
            let mut sources = members(inner);
            sources.push(v);
            let mut sinks: Vec<usize> = (0..n).filter(|&u| !outer[u]).collect();
            sinks.push(w);
            let (value, side) = min_cut_sets(cap, &sources, &sinks);
            if value < two {
                return Some(side);
            }
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct LayerStructure {
    pub n: usize,
    pub chain: NarrowCutChain,
    /// Distinct cut sizes d_1 > ... > d_k = 1.
    pub sizes: Vec<Rational>,
    pub zeta: Vec<Rational>,
    /// Q_i as chain indices (cuts of size at most d_i), ascending.
    pub families: Vec<Vec<usize>>,
    /// L_i: support edges lying in exactly one cut of Q_i.
    pub layer_edges: Vec<Vec<usize>>,
    /// Minimal level sets of each layer, ordered from {s} to {t}.
    pub level_sets: Vec<Vec<Vec<usize>>>,
}

impl LayerStructure {
    pub fn k(&self) -> usize {
        self.zeta.len()
    }

    /// Number of cuts of Q_i containing `e`.
    pub fn crossings(&self, i: usize, e: usize) -> usize {
        self.families[i].iter().filter(|&&j| self.chain.cuts[j].contains(e)).count()
    }

    /// Layer (0-based) of a narrow cut: the last i with the cut in Q_i.
    pub fn layer_of_cut(&self, j: usize) -> usize {
        let size = &self.chain.cuts[j].size;
        self.sizes.iter().rposition(|d| size <= d).expect("size at most d_1")
    }

    pub fn is_layer_edge(&self, i: usize, e: usize) -> bool {
        self.layer_edges[i].binary_search(&e).is_ok()
    }
}

pub fn build_layers(inst: &Instance, xstar: &LpSolution, chain: &NarrowCutChain) -> LayerStructure {
    assert!(!chain.is_empty(), "empty narrow-cut chain");
    let n = inst.n();
    let mut sizes = chain.sizes();
    sizes.sort_by(|a, b| b.cmp(a));
    sizes.dedup();
    let mut zeta = Vec::with_capacity(sizes.len());
    let mut prev = Rational::from_integer(2);
    for d in &sizes {
        zeta.push(&prev - d);
        prev = d.clone();
    }
    let families: Vec<Vec<usize>> = sizes
        .iter()
        .map(|d| (0..chain.len()).filter(|&j| chain.cuts[j].size <= *d).collect())
        .collect();
    let layer_edges = families
        .iter()
        .map(|fam| {
            xstar
                .support
                .iter()
                .copied()
                .filter(|&e| fam.iter().filter(|&&j| chain.cuts[j].contains(e)).count() == 1)
                .collect()
        })
        .collect();
    let level_sets = families
        .iter()
        .map(|fam| {
            let mut out = Vec::new();
            let mut prev = vec![false; n];
            for &j in fam {
                let side = &chain.cuts[j].side;
                out.push((0..n).filter(|&v| side[v] && !prev[v]).collect());
                prev = side.clone();
            }
            out.push((0..n).filter(|&v| !prev[v]).collect());
            out
        })
        .collect();
    LayerStructure {
        n,
        chain: chain.clone(),
        sizes,
        zeta,
        families,
        layer_edges,
        level_sets,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubmodularReport {
    pub lhs: Rational,
    pub rhs: Rational,
}

impl SubmodularReport {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// x(d(A)) + x(d(B)) against x(d(A&B)) + x(d(A|B)) + 2 x(A\B, B\A).
pub fn check_submodular_identity(inst: &Instance, xstar: &LpSolution, a: &[bool], b: &[bool]) -> SubmodularReport {
    let meet: Vec<bool> = a.iter().zip(b).map(|(&p, &q)| p && q).collect();
    let join: Vec<bool> = a.iter().zip(b).map(|(&p, &q)| p || q).collect();
    let lhs = xstar.cut_size(inst, a) + xstar.cut_size(inst, b);
    let cross: Rational = xstar
        .support
        .iter()
        .filter(|&&e| {
            let (u, v) = inst.ends(e);
            let a_only = |w: usize| a[w] && !b[w];
            let b_only = |w: usize| b[w] && !a[w];
            (a_only(u) && b_only(v)) || (a_only(v) && b_only(u))
        })
        .map(|&e| &xstar.x[e])
        .sum();
    let rhs = xstar.cut_size(inst, &meet) + xstar.cut_size(inst, &join) + Rational::from_integer(2) * cross;
    SubmodularReport { lhs, rhs }
}

/// Both sides of x*(Q1 & Q2) <= (x*(Q1) + x*(Q2)) / 2 - 1 for distinct narrow cuts.
pub fn intersection_bound(xstar: &LpSolution, q1: &NarrowCut, q2: &NarrowCut) -> (Rational, Rational) {
    assert!(q1.side != q2.side, "intersection bound needs two distinct cuts");
    let lhs = q1
        .edges
        .iter()
        .filter(|&&e| q2.contains(e))
        .map(|&e| &xstar.x[e])
        .sum();
    let rhs = (&q1.size + &q2.size) / Rational::from_integer(2) - Rational::one();
    (lhs, rhs)
}
