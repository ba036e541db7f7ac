//! Bipartite factor graph of a binary parity-check code.
//!
//! Edge storage follows two stable orders. Variable-to-check edges are
//! numbered `0..|E|` in `(var, chk)` lexicographic order ("edges"), and
//! check-to-variable edges are numbered `0..|E|` in `(chk, var)` order
//! ("slots"). The dense directed-edge index space `[0, 2|E|)` puts edges
//! first and slots second.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    n_vars: usize,
    n_chks: usize,
    var_offsets: Vec<usize>,
    edge_var: Vec<usize>,
    edge_chk: Vec<usize>,
    edge_slot: Vec<usize>,
    chk_offsets: Vec<usize>,
    slot_var: Vec<usize>,
    slot_edge: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStats {
    pub is_tree: bool,
    /// Longest variable-to-variable path in edges; only defined for forests.
    pub diameter: Option<usize>,
    pub max_var_degree: usize,
    pub max_chk_degree: usize,
    pub n_directed_edges: usize,
    pub components: usize,
}

impl FactorGraph {
    /// Builds a graph from `(var, chk)` pairs in any order.
    ///
    /// Variables without checks are allowed here; checks without variables
    /// are not.
    pub fn from_edges(n_vars: usize, n_chks: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        for &(v, c) in &sorted {
            if v >= n_vars {
                return Err(Error::IndexOutOfRange { index: v, bound: n_vars });
            }
            if c >= n_chks {
                return Err(Error::IndexOutOfRange { index: c, bound: n_chks });
            }
        }
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateEdge { var: w[0].0, chk: w[0].1 });
            }
        }

        let n_edges = sorted.len();
        let mut var_offsets = vec![0usize; n_vars + 1];
        let mut chk_offsets = vec![0usize; n_chks + 1];
        for &(v, c) in &sorted {
            var_offsets[v + 1] += 1;
            chk_offsets[c + 1] += 1;
        }
        for i in 0..n_vars {
            var_offsets[i + 1] += var_offsets[i];
        }
        for a in 0..n_chks {
            if chk_offsets[a + 1] == 0 {
                return Err(Error::EmptyRow(a));
            }
            chk_offsets[a + 1] += chk_offsets[a];
        }

        let edge_var: Vec<usize> = sorted.iter().map(|e| e.0).collect();
        let edge_chk: Vec<usize> = sorted.iter().map(|e| e.1).collect();

        // Stable sort by check keeps the variable order inside each check.
        let mut by_chk: Vec<usize> = (0..n_edges).collect();
        by_chk.sort_by_key(|&e| edge_chk[e]);
        let slot_edge = by_chk;
        let slot_var: Vec<usize> = slot_edge.iter().map(|&e| edge_var[e]).collect();
        let mut edge_slot = vec![0usize; n_edges];
        for (s, &e) in slot_edge.iter().enumerate() {
            edge_slot[e] = s;
        }

        Ok(Self { n_vars, n_chks, var_offsets, edge_var, edge_chk, edge_slot, chk_offsets, slot_var, slot_edge })
    }

    /// Builds the graph of an `m × n` parity-check matrix given as rows.
    pub fn from_dense_matrix<R: AsRef<[u8]>>(h: &[R]) -> Result<Self> {
        let m = h.len();
        if m == 0 {
            return Err(Error::DimensionMismatch("matrix has no rows"));
        }
        let n = h[0].as_ref().len();
        if n == 0 {
            return Err(Error::DimensionMismatch("matrix has no columns"));
        }
        let mut edges = Vec::new();
        let mut col_used = vec![false; n];
        for (a, row) in h.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::DimensionMismatch("ragged rows"));
            }
            let mut any = false;
            for (i, &x) in row.iter().enumerate() {
                match x {
                    0 => {}
                    1 => {
                        edges.push((i, a));
                        col_used[i] = true;
                        any = true;
                    }
                    _ => return Err(Error::NonBinaryEntry { row: a, col: i }),
                }
            }
            if !any {
                return Err(Error::EmptyRow(a));
            }
        }
        if let Some(i) = col_used.iter().position(|&u| !u) {
            return Err(Error::EmptyColumn(i));
        }
        Self::from_edges(n, m, &edges)
    }

    pub fn to_dense_matrix(&self) -> Vec<Vec<u8>> {
        let mut h = vec![vec![0u8; self.n_vars]; self.n_chks];
        for e in 0..self.n_edges() {
            h[self.edge_chk[e]][self.edge_var[e]] = 1;
        }
        h
    }

    /// Regular `(dv, dc)` code with `n` variables.
    ///
    /// When `dc` divides `n` this is Gallager's band construction: `dv`
    /// stacked copies of a block whose rows cover `dc` consecutive columns,
    /// every copy after the first column-permuted at random. Otherwise the
    /// `n * dv` variable sockets are randomly matched to check sockets and
    /// matchings with repeated edges are resampled.
    pub fn gallager(n: usize, dv: usize, dc: usize, seed: u64) -> Result<Self> {
        const MAX_ATTEMPTS: usize = 1000;
        if dv < 2 || dc < 2 {
            return Err(Error::InvalidDegree);
        }
        if n == 0 || !(n * dv).is_multiple_of(dc) {
            return Err(Error::DivisibilityViolation(n * dv, dc));
        }
        let m = n * dv / dc;
        let mut rng = seed::stream(seed);
        for _ in 0..MAX_ATTEMPTS {
            let edges =
                if n.is_multiple_of(dc) { band_edges(n, dv, dc, &mut rng) } else { socket_edges(n, dv, dc, &mut rng) };
            match Self::from_edges(n, m, &edges) {
                Ok(g) => return Ok(g),
                Err(Error::DuplicateEdge { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::ConstructionFailure(MAX_ATTEMPTS))
    }

    /// Random tree whose leaves are all variables and whose checks have
    /// degree between 2 and `max_chk_degree`.
    pub fn random_tree<R: Rng + ?Sized>(n_vars: usize, max_chk_degree: usize, rng: &mut R) -> Self {
        assert!(n_vars >= 1 && max_chk_degree >= 2);
        let mut edges = Vec::new();
        let mut vars = 1usize;
        let mut chks = 0usize;
        while vars < n_vars {
            let anchor = rng.random_range(0..vars);
            let fresh = rng.random_range(1..=(max_chk_degree - 1).min(n_vars - vars));
            edges.push((anchor, chks));
            for k in 0..fresh {
                edges.push((vars + k, chks));
            }
            vars += fresh;
            chks += 1;
        }
        if chks == 0 {
            // A lone variable still needs one check to be a code.
            return Self::from_edges(1, 1, &[(0, 0)]).expect("valid single edge");
        }
        let mut labels: Vec<usize> = (0..n_vars).collect();
        labels.shuffle(rng);
        for e in &mut edges {
            e.0 = labels[e.0];
        }
        Self::from_edges(n_vars, chks, &edges).expect("tree edges are distinct")
    }

    /// Single cycle `v0 - c0 - v1 - c1 - ... - v(n-1) - c(n-1) - v0`.
    pub fn ring(n: usize) -> Self {
        assert!(n >= 2);
        let mut edges = Vec::with_capacity(2 * n);
        for j in 0..n {
            edges.push((j, j));
            edges.push(((j + 1) % n, j));
        }
        Self::from_edges(n, n, &edges).expect("ring edges are distinct")
    }

    /// Same graph with variable `i` renamed to `perm[i]`.
    pub fn permute_vars(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_vars {
            return Err(Error::LengthMismatch { expected: self.n_vars, actual: perm.len() });
        }
        let edges: Vec<(usize, usize)> = self.edges().map(|(v, c)| (perm[v], c)).collect();
        Self::from_edges(self.n_vars, self.n_chks, &edges)
    }

    /// Same graph with check `a` renamed to `perm[a]`.
    pub fn permute_chks(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_chks {
            return Err(Error::LengthMismatch { expected: self.n_chks, actual: perm.len() });
        }
        let edges: Vec<(usize, usize)> = self.edges().map(|(v, c)| (v, perm[c])).collect();
        Self::from_edges(self.n_vars, self.n_chks, &edges)
    }

    #[inline]
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    #[inline]
    pub fn n_chks(&self) -> usize {
        self.n_chks
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    #[inline]
    pub fn n_directed_edges(&self) -> usize {
        2 * self.n_edges()
    }

    /// `(var, chk)` pairs in `(var, chk)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edge_var.iter().copied().zip(self.edge_chk.iter().copied())
    }

    /// Sorted checks adjacent to variable `i`.
    #[inline]
    pub fn var_adj(&self, i: usize) -> &[usize] {
        &self.edge_chk[self.var_edges(i)]
    }

    /// Sorted variables adjacent to check `a`.
    #[inline]
    pub fn chk_adj(&self, a: usize) -> &[usize] {
        &self.slot_var[self.chk_slots(a)]
    }

    /// Variable-to-check edge ids leaving variable `i`.
    #[inline]
    pub fn var_edges(&self, i: usize) -> Range<usize> {
        self.var_offsets[i]..self.var_offsets[i + 1]
    }

    /// Check-to-variable slot ids leaving check `a`.
    #[inline]
    pub fn chk_slots(&self, a: usize) -> Range<usize> {
        self.chk_offsets[a]..self.chk_offsets[a + 1]
    }

    #[inline]
    pub fn var_degree(&self, i: usize) -> usize {
        self.var_offsets[i + 1] - self.var_offsets[i]
    }

    #[inline]
    pub fn chk_degree(&self, a: usize) -> usize {
        self.chk_offsets[a + 1] - self.chk_offsets[a]
    }

    #[inline]
    pub fn edge_var(&self, e: usize) -> usize {
        self.edge_var[e]
    }

    #[inline]
    pub fn edge_chk(&self, e: usize) -> usize {
        self.edge_chk[e]
    }

    /// Slot carrying the reverse direction of edge `e`.
    #[inline]
    pub fn edge_slot(&self, e: usize) -> usize {
        self.edge_slot[e]
    }

    /// Edge carrying the reverse direction of slot `s`.
    #[inline]
    pub fn slot_edge(&self, s: usize) -> usize {
        self.slot_edge[s]
    }

    #[inline]
    pub fn slot_var(&self, s: usize) -> usize {
        self.slot_var[s]
    }

    /// Dense index of the directed edge `var -> chk`.
    #[inline]
    pub fn var_to_chk_index(&self, e: usize) -> usize {
        e
    }

    /// Dense index of the directed edge `chk -> var`.
    #[inline]
    pub fn chk_to_var_index(&self, s: usize) -> usize {
        self.n_edges() + s
    }

    pub fn max_var_degree(&self) -> usize {
        (0..self.n_vars).map(|i| self.var_degree(i)).max().unwrap_or(0)
    }

    pub fn max_chk_degree(&self) -> usize {
        (0..self.n_chks).map(|a| self.chk_degree(a)).max().unwrap_or(0)
    }

    /// True iff every check sees even parity. `bits` must have one entry per
    /// variable (any nonzero byte counts as 1).
    pub fn syndrome_ok(&self, bits: &[u8]) -> Result<bool> {
        if bits.len() != self.n_vars {
            return Err(Error::LengthMismatch { expected: self.n_vars, actual: bits.len() });
        }
        Ok(self.satisfies(bits))
    }

    #[inline]
    pub(crate) fn satisfies(&self, bits: &[u8]) -> bool {
        (0..self.n_chks).all(|a| self.chk_adj(a).iter().fold(0u8, |acc, &i| acc ^ (bits[i] & 1)) == 0)
    }

    pub fn analyze(&self) -> GraphStats {
        let n_nodes = self.n_vars + self.n_chks;
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n_nodes;
        for (v, c) in self.edges() {
            let (ra, rb) = (find(&mut parent, v), find(&mut parent, self.n_vars + c));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        let is_tree = self.n_edges() + components == n_nodes;

        let diameter = is_tree.then(|| {
            let mut seen = vec![false; n_nodes];
            let mut best = 0;
            for start in 0..self.n_vars {
                if seen[start] {
                    continue;
                }
                let (far, _) = self.farthest_var(start, Some(&mut seen));
                let (_, d) = self.farthest_var(far, None);
                best = best.max(d);
            }
            best
        });

        GraphStats {
            is_tree,
            diameter,
            max_var_degree: self.max_var_degree(),
            max_chk_degree: self.max_chk_degree(),
            n_directed_edges: self.n_directed_edges(),
            components,
        }
    }

    /// Breadth-first distances (in edges) from variable `start` over the
    /// whole bipartite graph; `None` marks unreachable nodes. Checks occupy
    /// indices `n_vars..`.
    pub fn bfs_from_var(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_vars + self.n_chks];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            if u < self.n_vars {
                for &c in self.var_adj(u) {
                    let node = self.n_vars + c;
                    if dist[node].is_none() {
                        dist[node] = Some(du + 1);
                        queue.push_back(node);
                    }
                }
            } else {
                for &v in self.chk_adj(u - self.n_vars) {
                    if dist[v].is_none() {
                        dist[v] = Some(du + 1);
                        queue.push_back(v);
                    }
                }
            }
        }
        dist
    }

    fn farthest_var(&self, start: usize, seen: Option<&mut Vec<bool>>) -> (usize, usize) {
        let dist = self.bfs_from_var(start);
        if let Some(seen) = seen {
            for (k, d) in dist.iter().enumerate() {
                if d.is_some() {
                    seen[k] = true;
                }
            }
        }
        let mut best = (start, 0);
        for (v, d) in dist.iter().take(self.n_vars).enumerate() {
            if let Some(d) = *d {
                if d > best.1 {
                    best = (v, d);
                }
            }
        }
        best
    }
}

fn band_edges<R: Rng + ?Sized>(n: usize, dv: usize, dc: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let rows_per_block = n / dc;
    let mut edges = Vec::with_capacity(n * dv);
    let mut perm: Vec<usize> = (0..n).collect();
    for block in 0..dv {
        if block > 0 {
            perm.shuffle(rng);
        }
        for (pos, &v) in perm.iter().enumerate() {
            edges.push((v, block * rows_per_block + pos / dc));
        }
    }
    edges
}

fn socket_edges<R: Rng + ?Sized>(n: usize, dv: usize, dc: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let total = n * dv;
    let mut sockets: Vec<usize> = (0..total).map(|s| s / dv).collect();
    sockets.shuffle(rng);
    // Swap repeated variables out of their check while a swap partner that
    // keeps both checks simple exists; caller rejects what is left.
    let holds = |sockets: &[usize], chk: usize, v: usize, skip: usize| {
        (chk * dc..(chk + 1) * dc).any(|p| p != skip && sockets[p] == v)
    };
    for _ in 0..4 * total {
        let Some(bad) = (0..total).find(|&p| holds(&sockets, p / dc, sockets[p], p)) else {
            break;
        };
        let other = rng.random_range(0..total);
        let (a, b) = (bad / dc, other / dc);
        if a == b {
            continue;
        }
        let (va, vb) = (sockets[bad], sockets[other]);
        if !holds(&sockets, a, vb, bad) && !holds(&sockets, b, va, other) {
            sockets.swap(bad, other);
        }
    }
    sockets.iter().enumerate().map(|(pos, &v)| (v, pos / dc)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hamming() -> FactorGraph {
        FactorGraph::from_dense_matrix(&[[1u8, 1, 1, 0, 1, 0, 0], [1, 1, 0, 1, 0, 1, 0], [1, 0, 1, 1, 0, 0, 1]])
            .unwrap()
    }

    #[test]
    fn hamming_graph_has_twelve_edges() {
        let g = hamming();
        assert_eq!((g.n_vars(), g.n_chks(), g.n_edges()), (7, 3, 12));
        assert!((0..3).all(|a| g.chk_degree(a) == 4));
        assert!(!g.analyze().is_tree);
    }

    #[test]
    fn smallest_graph() {
        let g = FactorGraph::from_dense_matrix(&[[1u8]]).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 0)]);
        let s = g.analyze();
        assert!(s.is_tree);
        assert_eq!(s.diameter, Some(0));
    }

    #[test]
    fn adjacency_from_small_matrix() {
        let g = FactorGraph::from_dense_matrix(&[[1u8, 1, 0], [0, 1, 1]]).unwrap();
        let var_adj: Vec<&[usize]> = (0..3).map(|i| g.var_adj(i)).collect();
        let chk_adj: Vec<&[usize]> = (0..2).map(|a| g.chk_adj(a)).collect();
        assert_eq!(var_adj, vec![&[0][..], &[0, 1], &[1]]);
        assert_eq!(chk_adj, vec![&[0, 1][..], &[1, 2]]);
    }

    #[test]
    fn directed_indices_are_dense_and_reversible() {
        let g = hamming();
        let mut seen = vec![false; g.n_directed_edges()];
        for e in 0..g.n_edges() {
            let s = g.edge_slot(e);
            assert_eq!(g.slot_edge(s), e);
            assert_eq!(g.slot_var(s), g.edge_var(e));
            seen[g.var_to_chk_index(e)] = true;
            seen[g.chk_to_var_index(s)] = true;
        }
        assert!(seen.into_iter().all(|x| x));
        // Slots follow (chk, var) order.
        let pairs: Vec<(usize, usize)> =
            (0..g.n_edges()).map(|s| (g.edge_chk(g.slot_edge(s)), g.slot_var(s))).collect();
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(pairs, sorted);
    }

    #[test]
    fn dense_matrix_errors() {
        assert_eq!(FactorGraph::from_dense_matrix(&[[1u8, 0], [0, 0]]), Err(Error::EmptyRow(1)));
        assert_eq!(FactorGraph::from_dense_matrix(&[[1u8, 0], [1, 0]]), Err(Error::EmptyColumn(1)));
        assert!(matches!(FactorGraph::from_dense_matrix(&[vec![1u8, 1], vec![1]]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(FactorGraph::from_dense_matrix(&[[2u8]]), Err(Error::NonBinaryEntry { .. })));
    }

    #[test]
    fn gallager_n200() {
        let g = FactorGraph::gallager(200, 3, 6, 11).unwrap();
        assert_eq!((g.n_chks(), g.n_edges()), (100, 600));
        assert!((0..200).all(|i| g.var_degree(i) == 3));
        assert!((0..100).all(|a| g.chk_degree(a) == 6));
        assert!(!g.analyze().is_tree);
        assert_eq!(g, FactorGraph::gallager(200, 3, 6, 11).unwrap());
        assert_ne!(g, FactorGraph::gallager(200, 3, 6, 12).unwrap());
    }

    #[test]
    fn gallager_small_and_socket_paths() {
        let g = FactorGraph::gallager(6, 2, 2, 3).unwrap();
        assert_eq!((g.n_chks(), g.n_edges()), (6, 12));
        assert!((0..6).all(|i| g.var_degree(i) == 2) && (0..6).all(|a| g.chk_degree(a) == 2));

        // 6 does not divide 8, so this goes through socket matching.
        let g = FactorGraph::gallager(8, 3, 6, 5).unwrap();
        assert_eq!(g.n_chks(), 4);
        assert!((0..8).all(|i| g.var_degree(i) == 3) && (0..4).all(|a| g.chk_degree(a) == 6));
    }

    #[test]
    fn gallager_errors() {
        assert_eq!(FactorGraph::gallager(5, 3, 6, 0), Err(Error::DivisibilityViolation(15, 6)));
        assert_eq!(FactorGraph::gallager(6, 1, 2, 0), Err(Error::InvalidDegree));
        // dc = 4 distinct variables per check is impossible with n = 2.
        assert_eq!(FactorGraph::gallager(2, 4, 4, 0), Err(Error::ConstructionFailure(1000)));
    }

    #[test]
    fn path_graph_stats() {
        let g = FactorGraph::from_dense_matrix(&[[1u8, 1]]).unwrap();
        let s = g.analyze();
        assert!(s.is_tree);
        assert_eq!(s.diameter, Some(2));
        assert_eq!((s.max_var_degree, s.max_chk_degree), (1, 2));
        assert_eq!(s.n_directed_edges, 4);
    }

    #[test]
    fn forest_diameter_is_max_over_components() {
        let g = FactorGraph::from_dense_matrix(&[[1u8, 1, 0, 0, 0], [0, 1, 1, 0, 0], [0, 0, 0, 1, 1]]).unwrap();
        let s = g.analyze();
        assert!(s.is_tree);
        assert_eq!(s.components, 2);
        assert_eq!(s.diameter, Some(4));
    }

    #[test]
    fn ring_is_not_a_tree() {
        let s = FactorGraph::ring(5).analyze();
        assert!(!s.is_tree);
        assert_eq!(s.diameter, None);
    }

    #[test]
    fn syndrome_examples() {
        let g = FactorGraph::from_dense_matrix(&[[1u8, 1]]).unwrap();
        assert_eq!(g.syndrome_ok(&[0, 0]), Ok(true));
        assert_eq!(g.syndrome_ok(&[1, 0]), Ok(false));
        assert_eq!(g.syndrome_ok(&[1, 1]), Ok(true));
        assert_eq!(g.syndrome_ok(&[1]), Err(Error::LengthMismatch { expected: 2, actual: 1 }));
    }
}
