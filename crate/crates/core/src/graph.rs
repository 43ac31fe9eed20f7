//! Complete-graph edge indexing and small graph utilities.

/// Number of edges of the complete graph on `n` vertices.
pub fn edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Index of the edge `{u, v}` in the lexicographic order of pairs `u < v`.
pub fn edge_id(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u != v && u < n && v < n);
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

/// Endpoints of every complete-graph edge, indexed by [`edge_id`].
pub fn edge_ends(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(edge_count(n));
    for u in 0..n {
        for v in u + 1..n {
            out.push((u, v));
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the classes of `a` and `b`; returns false if they were already merged.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

/// Component label per vertex (labels numbered by smallest member, in order).
pub fn component_labels(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut uf = UnionFind::new(n);
    for (u, v) in edges {
        uf.union(u, v);
    }
    let mut label = vec![usize::MAX; n];
    let mut root_label = vec![usize::MAX; n];
    let mut next = 0;
    for v in 0..n {
        let r = uf.find(v);
        if root_label[r] == usize::MAX {
            root_label[r] = next;
            next += 1;
        }
        label[v] = root_label[r];
    }
    label
}

pub fn is_connected(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> bool {
    let mut uf = UnionFind::new(n);
    for (u, v) in edges {
        uf.union(u, v);
    }
    uf.components() <= 1
}

/// Edge ids on the unique path between `a` and `b` in a forest given by edge ids.
pub fn forest_path(
    n: usize,
    ends: &[(usize, usize)],
    forest: &[usize],
    a: usize,
    b: usize,
) -> Option<Vec<usize>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &e in forest {
        let (u, v) = ends[e];
        adj[u].push((v, e));
        adj[v].push((u, e));
    }
    let mut via = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[a] = true;
    queue.push_back(a);
    while let Some(u) = queue.pop_front() {
        if u == b {
            break;
        }
        for &(w, e) in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                via[w] = e;
                queue.push_back(w);
            }
        }
    }
    if !seen[b] {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = b;
    while cur != a {
        let e = via[cur];
        path.push(e);
        let (u, v) = ends[e];
        cur = if u == cur { v } else { u };
    }
    path.sort_unstable();
    Some(path)
}

/// Sorted member list of a membership vector.
pub fn members(side: &[bool]) -> Vec<usize> {
    side.iter()
        .enumerate()
        .filter_map(|(v, &inside)| inside.then_some(v))
        .collect()
}
