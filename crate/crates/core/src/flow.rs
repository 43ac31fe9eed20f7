//! Exact max-flow / min-cut and Gomory-Hu trees on small dense undirected graphs.

use std::collections::VecDeque;



use crate::rational::Rational;

/// Symmetric capacity matrix.
pub type Capacity = Vec<Vec<Rational>>;

pub fn capacity_from_edges(n: usize, ends: &[(usize, usize)], weight: &[Rational]) -> Capacity {
    let mut cap = vec![vec![Rational::zero(); n]; n];
    for (e, w) in weight.iter().enumerate() {
        if !w.is_zero() {
            let (u, v) = ends[e];
            cap[u][v] += w;
            cap[v][u] += w;
        }
    }
    cap
}

pub fn cut_value(cap: &Capacity, side: &[bool]) -> Rational {
    let mut total = Rational::zero();
    for (u, row) in cap.iter().enumerate() {
        if !side[u] {
            continue;
        }
        for (v, c) in row.iter().enumerate() {
            if !side[v] && !c.is_zero() {
                total += c;
            }
        }
    }
    total
}

/// Edmonds-Karp max flow from `source` to `sink`; returns the value and the
/// vertices reachable from `source` in the final residual graph.
pub fn max_flow(cap: &Capacity, source: usize, sink: usize) -> (Rational, Vec<bool>) {
    let n = cap.len();
    let mut res = cap.clone();
    let mut value = Rational::zero();
    loop {
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for v in 0..n {
                if !seen[v] && res[u][v].is_positive() {
                    seen[v] = true;
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if !seen[sink] {
            return (value, seen);
        }
        let mut bottleneck: Option<Rational> = None;
        let mut v = sink;
        while v != source {
            let u = prev[v];
            if bottleneck.as_ref().map_or(true, |b| res[u][v] < *b) {
                bottleneck = Some(res[u][v].clone());
            }
            v = u;
        }
        let d = bottleneck.expect("path has an arc");
        let mut v = sink;
        while v != source {
            let u = prev[v];
            res[u][v] -= &d;
            res[v][u] += &d;
            v = u;
        }
        value += d;
    }
}

/// Minimum cut separating every vertex of `sources` from every vertex of `sinks`.
/// Returns the cut value and the source side (restricted to the original vertices).
pub fn min_cut_sets(cap: &Capacity, sources: &[usize], sinks: &[usize]) -> (Rational, Vec<bool>) {
    let n = cap.len();
    if sources.len() == 1 && sinks.len() == 1 {
        return max_flow(cap, sources[0], sinks[0]);
    }
    let total: Rational = cap.iter().flatten().sum();
    let big = total + Rational::one();
    let mut ext = vec![vec![Rational::zero(); n + 2]; n + 2];
    for u in 0..n {
        for v in 0..n {
            ext[u][v] = cap[u][v].clone();
        }
    }
    let (ss, tt) = (n, n + 1);
    for &a in sources {
        ext[ss][a] = big.clone();
        ext[a][ss] = big.clone();
    }
    for &b in sinks {
        ext[tt][b] = big.clone();
        ext[b][tt] = big.clone();
    }
    let (value, mut side) = max_flow(&ext, ss, tt);
    side.truncate(n);
    (value, side)
}

/// Gomory-Hu cut tree rooted at vertex 0: `pred[v]` is the tree parent of `v`
/// and `weight[v]` the minimum cut value between `v` and `pred[v]`.
#[derive(Clone, Debug)]
pub struct GomoryHuTree {
    pub pred: Vec<Option<usize>>,
    pub weight: Vec<Rational>,
}

pub fn gomory_hu(cap: &Capacity) -> GomoryHuTree {
    let n = cap.len();
    let mut pred: Vec<Option<usize>> = (0..n).map(|v| if v == 0 { None } else { Some(0) }).collect();
    let mut weight = vec![Rational::zero(); n];
    for v in 1..n {
        let pv = pred[v].expect("non-root");
        let (value, side) = max_flow(cap, v, pv);
        weight[v] = value.clone();
        for w in 0..n {
            if w != v && side[w] && pred[w] == Some(pv) {
                pred[w] = Some(v);
            }
        }
        if let Some(ppv) = pred[pv] {
            if side[ppv] {
                pred[v] = Some(ppv);
                pred[pv] = Some(v);
                weight[v] = weight[pv].clone();
                weight[pv] = value;
            }
        }
    }
    GomoryHuTree { pred, weight }
}

impl GomoryHuTree {
    /// Vertex side containing `v` after deleting the tree edge `v -- pred[v]`.
    pub fn fundamental_cut(&self, v: usize) -> Vec<bool> {
        let n = self.pred.len();
        let mut side = vec![false; n];
        for w in 0..n {
            let mut cur = w;
            loop {
                if cur == v {
                    side[w] = true;
                    break;
                }
                match self.pred[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
        }
        side
    }

    /// Tree edges as `(v, pred[v], weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.pred
            .iter()
            .enumerate()
            .filter_map(move |(v, p)| p.map(|p| (v, p, &self.weight[v])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn brute_min_cut(cap: &Capacity, a: usize, b: usize) -> Rational {
        let n = cap.len();
        let mut best: Option<Rational> = None;
        for mask in 0u32..(1 << n) {
            let side: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
            if side[a] && !side[b] {
                let c = cut_value(cap, &side);
                if best.as_ref().map_or(true, |x| c < *x) {
                    best = Some(c);
                }
            }
        }
        best.unwrap()
    }

    fn random_cap(n: usize, weights: &[i64]) -> Capacity {
        let mut cap = vec![vec![Rational::zero(); n]; n];
        let mut k = 0;
        for u in 0..n {
            for v in u + 1..n {
                let w = rat(weights[k % weights.len()], 3);
                k += 1;
                cap[u][v] = w.clone();
                cap[v][u] = w;
            }
        }
        cap
    }

    #[test]
    fn two_triangles_joined_by_light_edge() {
        let mut cap = vec![vec![Rational::zero(); 6]; 6];
        let mut set = |u: usize, v: usize, w: Rational| {
            cap[u][v] = w.clone();
            cap[v][u] = w;
        };
        for (u, v) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            set(u, v, rat(1, 1));
        }
        set(2, 3, rat(1, 2));
        let (value, side) = max_flow(&cap, 0, 5);
        assert_eq!(value, rat(1, 2));
        assert_eq!(side, vec![true, true, true, false, false, false]);
        let (v2, s2) = min_cut_sets(&cap, &[0, 1], &[4, 5]);
        assert_eq!(v2, rat(1, 2));
        assert_eq!(s2, side);
    }

    proptest! {
        #[test]
        fn gomory_hu_matches_pairwise_min_cuts(weights in proptest::collection::vec(0i64..5, 15)) {
            let n = 6;
            let cap = random_cap(n, &weights);
            let tree = gomory_hu(&cap);
            for (v, p, w) in tree.edges() {
                let side = tree.fundamental_cut(v);
                prop_assert!(side[v] && !side[p]);
                prop_assert_eq!(&cut_value(&cap, &side), w);
            }
            for a in 0..n {
                for b in a + 1..n {
                    // min over tree edges on the a-b tree path
                    let mut best: Option<Rational> = None;
                    for (v, _, w) in tree.edges() {
                        let side = tree.fundamental_cut(v);
                        if side[a] != side[b] && best.as_ref().map_or(true, |x| w < x) {
                            best = Some(w.clone());
                        }
                    }
                    prop_assert_eq!(best.unwrap(), brute_min_cut(&cap, a, b));
                }
            }
        }
    }
}
