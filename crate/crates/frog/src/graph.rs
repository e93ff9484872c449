//! Graph containers, canonical edge handling, normalization, and the
//! neighborhood machinery used by losses and bound checks.
//!
//! Edges are undirected and stored once in canonical `(min, max)` order,
//! always sorted, so every traversal in the crate is deterministic.

use ndarray::Array2;
use std::collections::BTreeSet;

use crate::error::{FrogError, Result};

/// Undirected edge in canonical order: `e.0 < e.1`.
pub type Edge = (usize, usize);

/// Returns the canonical form of an undirected edge.
pub fn canonical(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Immutable attributed graph with binary sensitive groups.
#[derive(Debug, Clone)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    features: Array2<f64>,
    sensitive: Vec<u8>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Validates and canonicalizes the input. Rejects self-loops, duplicate
    /// edges, out-of-range ids, non-binary groups, and row-count mismatches.
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        sensitive: Vec<u8>,
    ) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(FrogError::Structure(format!(
                "feature rows {} != num_nodes {}",
                features.nrows(),
                num_nodes
            )));
        }
        if sensitive.len() != num_nodes {
            return Err(FrogError::Structure(format!(
                "sensitive len {} != num_nodes {}",
                sensitive.len(),
                num_nodes
            )));
        }
        if let Some(g) = sensitive.iter().find(|&&g| g > 1) {
            return Err(FrogError::Structure(format!(
                "sensitive groups must be 0 or 1, found {g}"
            )));
        }
        let mut canon = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(FrogError::Structure(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(FrogError::Structure(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            canon.push(canonical(u, v));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(FrogError::Structure(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut neighbors = vec![Vec::new(); num_nodes];
        for &(u, v) in &canon {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Graph {
            num_nodes,
            edges: canon,
            features,
            sensitive,
            neighbors,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted canonical edge list.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn group_of(&self, v: usize) -> u8 {
        self.sensitive[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&canonical(u, v)).is_ok()
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    /// The edge set as a unit-weight structure.
    pub fn structure(&self) -> WeightedStructure {
        WeightedStructure::from_edges(self.num_nodes, self.edges.clone())
            .expect("graph edges are already canonical")
    }

    /// Same graph with a different edge set; features and groups are shared.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Graph> {
        Graph::new(
            self.num_nodes,
            edges,
            self.features.clone(),
            self.sensitive.clone(),
        )
    }
}

/// Edge list with one weight per pair. Pairs are canonical, sorted, unique.
/// Weights may be fractional (relaxed masks) or binary (hard structures).
#[derive(Debug, Clone)]
pub struct WeightedStructure {
    num_nodes: usize,
    pairs: Vec<Edge>,
    weights: Vec<f64>,
}

impl WeightedStructure {
    pub fn new(num_nodes: usize, pairs: Vec<Edge>, weights: Vec<f64>) -> Result<Self> {
        if pairs.len() != weights.len() {
            return Err(FrogError::Structure(format!(
                "{} pairs but {} weights",
                pairs.len(),
                weights.len()
            )));
        }
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        for &(u, v) in &pairs {
            if u >= v || v >= num_nodes {
                return Err(FrogError::Structure(format!(
                    "pair ({u}, {v}) not canonical for {num_nodes} nodes"
                )));
            }
        }
        order.sort_unstable_by_key(|&i| pairs[i]);
        let sorted_pairs: Vec<Edge> = order.iter().map(|&i| pairs[i]).collect();
        let sorted_weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
        if let Some(w) = sorted_pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(FrogError::Structure(format!(
                "duplicate pair ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(WeightedStructure {
            num_nodes,
            pairs: sorted_pairs,
            weights: sorted_weights,
        })
    }

    /// Unit weights over the given edges.
    pub fn from_edges(num_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        let weights = vec![1.0; edges.len()];
        WeightedStructure::new(num_nodes, edges, weights)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[Edge] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_of(&self, u: usize, v: usize) -> Option<f64> {
        self.pairs
            .binary_search(&canonical(u, v))
            .ok()
            .map(|i| self.weights[i])
    }

    /// Pairs whose weight passes the threshold, as a hard edge list.
    pub fn hard_edges(&self, threshold: f64) -> Vec<Edge> {
        self.pairs
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w >= threshold)
            .map(|(&e, _)| e)
            .collect()
    }

    /// Row-normalized adjacency with self-loops over these weights.
    pub fn normalized(&self) -> NormalizedAdjacency {
        NormalizedAdjacency::from_structure(self)
    }
}

/// Row-normalized adjacency with self-loops: row i holds the nonzeros of
/// `D^-1 (A + I)` where `D_ii = 1 + sum of incident weights`.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    num_nodes: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl NormalizedAdjacency {
    fn from_structure(s: &WeightedStructure) -> Self {
        let n = s.num_nodes;
        let mut degree = vec![1.0; n];
        for (&(u, v), &w) in s.pairs.iter().zip(&s.weights) {
            degree[u] += w;
            degree[v] += w;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        for (&(u, v), &w) in s.pairs.iter().zip(&s.weights) {
            if w != 0.0 {
                rows[u].push((v, w));
                rows[v].push((u, w));
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            for entry in row.iter_mut() {
                entry.1 /= degree[i];
            }
        }
        NormalizedAdjacency { num_nodes: n, rows }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Sparse product `Ã · x`.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(
            x.nrows(),
            self.num_nodes,
            "normalized adjacency expects {} rows, got {}",
            self.num_nodes,
            x.nrows()
        );
        let mut out = Array2::zeros((self.num_nodes, x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                for c in 0..x.ncols() {
                    out[[i, c]] += w * x[[j, c]];
                }
            }
        }
        out
    }

    /// Dense copy, for small verification instances only.
    pub fn dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_nodes, self.num_nodes));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[[i, j]] = w;
            }
        }
        out
    }
}

/// `D^-1 (A + I)` over the graph edge set, with optional weights aligned to
/// `graph.edges()` multiplying each edge before normalization.
pub fn normalize(graph: &Graph, edge_weights: Option<&[f64]>) -> Result<NormalizedAdjacency> {
    let weights = match edge_weights {
        Some(w) => {
            if w.len() != graph.num_edges() {
                return Err(FrogError::Structure(format!(
                    "{} edge weights for {} edges",
                    w.len(),
                    graph.num_edges()
                )));
            }
            w.to_vec()
        }
        None => vec![1.0; graph.num_edges()],
    };
    let s = WeightedStructure::new(graph.num_nodes(), graph.edges().to_vec(), weights)?;
    Ok(s.normalized())
}

/// Fraction of edges whose endpoints share a sensitive group.
pub fn edge_homophily(edges: &[Edge], sensitive: &[u8]) -> Result<f64> {
    if edges.is_empty() {
        return Err(FrogError::Numeric(
            "homophily of an empty edge set".to_string(),
        ));
    }
    let same = edges
        .iter()
        .filter(|&&(u, v)| sensitive[u] == sensitive[v])
        .count();
    Ok(same as f64 / edges.len() as f64)
}

/// Mean over non-isolated nodes of the same-group fraction among neighbors,
/// self-loops excluded. This is the per-node homophily the closed-form
/// disparity bound is stated in.
pub fn node_homophily(graph: &Graph) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for v in 0..graph.num_nodes() {
        let nbrs = graph.neighbors(v);
        if nbrs.is_empty() {
            continue;
        }
        let same = nbrs
            .iter()
            .filter(|&&u| graph.group_of(u) == graph.group_of(v))
            .count();
        total += same as f64 / nbrs.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(FrogError::Numeric(
            "homophily of a graph with no edges".to_string(),
        ));
    }
    Ok(total / counted as f64)
}

/// Nodes within `hops` of either endpoint of `edge`, sorted. The endpoints
/// are always included, whether or not the edge is present.
#[derive(Debug, Clone)]
pub struct EnclosingSubgraph {
    pub center: Edge,
    pub nodes: Vec<usize>,
}

pub fn enclosing_subgraph(graph: &Graph, edge: Edge, hops: usize) -> Result<EnclosingSubgraph> {
    let (u, v) = edge;
    if u >= graph.num_nodes() || v >= graph.num_nodes() {
        return Err(FrogError::Structure(format!(
            "edge ({u}, {v}) out of range"
        )));
    }
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut frontier = vec![u, v];
    seen.insert(u);
    seen.insert(v);
    for _ in 0..hops {
        let mut next = Vec::new();
        for &w in &frontier {
            for &x in graph.neighbors(w) {
                if seen.insert(x) {
                    next.push(x);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(EnclosingSubgraph {
        center: canonical(u, v),
        nodes: seen.into_iter().collect(),
    })
}

/// Contrast sets for one anchor: connected nodes split by group agreement,
/// plus same-group non-neighbors as negatives. All lists are sorted.
#[derive(Debug, Clone)]
pub struct ContrastSets {
    pub anchor: usize,
    /// Connected, same group.
    pub intra_pos: Vec<usize>,
    /// Connected, different group.
    pub inter_pos: Vec<usize>,
    /// Not connected, same group.
    pub intra_neg: Vec<usize>,
}

impl ContrastSets {
    /// True when the anchor contributes to the fairness contrast: it needs at
    /// least one cross-group connection and at least one same-group term.
    pub fn usable(&self) -> bool {
        !self.inter_pos.is_empty() && (!self.intra_pos.is_empty() || !self.intra_neg.is_empty())
    }
}

/// Builds contrast sets for every node given sorted neighbor lists over the
/// (possibly augmented) support.
pub fn group_partition(
    sensitive: &[u8],
    neighbors: &[Vec<usize>],
) -> Result<Vec<ContrastSets>> {
    let n = sensitive.len();
    if neighbors.len() != n {
        return Err(FrogError::Structure(format!(
            "{} neighbor lists for {} nodes",
            neighbors.len(),
            n
        )));
    }
    let mut by_group: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (v, &g) in sensitive.iter().enumerate() {
        by_group[g as usize].push(v);
    }
    let mut out = Vec::with_capacity(n);
    for anchor in 0..n {
        let g = sensitive[anchor];
        let mut intra_pos = Vec::new();
        let mut inter_pos = Vec::new();
        for &j in &neighbors[anchor] {
            if j == anchor {
                continue;
            }
            if sensitive[j] == g {
                intra_pos.push(j);
            } else {
                inter_pos.push(j);
            }
        }
        // Same-group nodes minus neighbors minus self, via sorted merge.
        let mut intra_neg = Vec::new();
        let mut it = neighbors[anchor].iter().peekable();
        for &j in &by_group[g as usize] {
            if j == anchor {
                continue;
            }
            while let Some(&&k) = it.peek() {
                if k < j {
                    it.next();
                } else {
                    break;
                }
            }
            if it.peek() != Some(&&j) {
                intra_neg.push(j);
            }
        }
        out.push(ContrastSets {
            anchor,
            intra_pos,
            inter_pos,
            intra_neg,
        });
    }
    Ok(out)
}

/// Sorted neighbor lists induced by the pairs of a structure whose weight
/// passes `threshold`.
pub fn neighbor_lists(s: &WeightedStructure, threshold: f64) -> Vec<Vec<usize>> {
    let mut lists = vec![Vec::new(); s.num_nodes()];
    for (&(u, v), &w) in s.pairs().iter().zip(s.weights()) {
        if w >= threshold {
            lists[u].push(v);
            lists[v].push(u);
        }
    }
    for l in &mut lists {
        l.sort_unstable();
    }
    lists
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn path3() -> Graph {
        Graph::new(
            3,
            vec![(1, 0), (1, 2)],
            arr2(&[[1.0], [2.0], [3.0]]),
            vec![0, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn canonicalizes_and_sorts_edges() {
        let g = path3();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(2, 1));
        assert!(!g.has_edge(0, 2));
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn rejects_malformed_graphs() {
        let f = arr2(&[[0.0], [0.0], [0.0]]);
        assert!(Graph::new(3, vec![(0, 0)], f.clone(), vec![0, 0, 0]).is_err());
        assert!(Graph::new(3, vec![(0, 3)], f.clone(), vec![0, 0, 0]).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 0)], f.clone(), vec![0, 0, 0]).is_err());
        assert!(Graph::new(3, vec![(0, 1)], f.clone(), vec![0, 0, 2]).is_err());
        assert!(Graph::new(2, vec![(0, 1)], f, vec![0, 0]).is_err());
    }

    #[test]
    fn normalize_matches_hand_rows() {
        // Path 0-1-2: D = diag(2, 3, 2) after self-loops.
        let g = path3();
        let adj = normalize(&g, None).unwrap();
        let d = adj.dense();
        let expect = arr2(&[
            [0.5, 0.5, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.0, 0.5, 0.5],
        ]);
        for i in 0..3 {
            for j in 0..3 {
                assert!((d[[i, j]] - expect[[i, j]]).abs() < 1e-15);
            }
        }
        // Rows sum to one by construction.
        for i in 0..3 {
            let s: f64 = adj.row(i).iter().map(|&(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_with_mask_downweights_edges() {
        let g = path3();
        // Zero out edge (0,1): node 0 keeps only its self-loop.
        let adj = normalize(&g, Some(&[0.0, 1.0])).unwrap();
        let d = adj.dense();
        assert!((d[[0, 0]] - 1.0).abs() < 1e-15);
        assert!(d[[0, 1]].abs() < 1e-15);
        // Node 1 degree becomes 1 + 0 + 1 = 2.
        assert!((d[[1, 1]] - 0.5).abs() < 1e-15);
        assert!((d[[1, 2]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn masked_matvec_matches_dense() {
        let g = path3();
        let adj = normalize(&g, Some(&[0.3, 0.8])).unwrap();
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let sparse = adj.matmul(&x);
        let dense = adj.dense().dot(&x);
        for i in 0..3 {
            for c in 0..2 {
                assert!((sparse[[i, c]] - dense[[i, c]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn homophily_measures() {
        // Star 0-{1,2,3}, groups [0,0,0,1].
        let g = Graph::new(
            4,
            vec![(0, 1), (0, 2), (0, 3)],
            Array2::zeros((4, 1)),
            vec![0, 0, 0, 1],
        )
        .unwrap();
        let e = edge_homophily(g.edges(), g.sensitive()).unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-15);
        // Node fractions: 2/3, 1, 1, 0 -> mean 2/3.
        let nh = node_homophily(&g).unwrap();
        assert!((nh - 2.0 / 3.0).abs() < 1e-15);

        let p = path3();
        assert!((edge_homophily(p.edges(), p.sensitive()).unwrap() - 0.5).abs() < 1e-15);
        assert!(edge_homophily(&[], &[0, 1]).is_err());
    }

    #[test]
    fn enclosing_subgraph_hops() {
        // Path 0-1-2-3.
        let g = Graph::new(
            4,
            vec![(0, 1), (1, 2), (2, 3)],
            Array2::zeros((4, 1)),
            vec![0, 0, 0, 0],
        )
        .unwrap();
        let s0 = enclosing_subgraph(&g, (1, 2), 0).unwrap();
        assert_eq!(s0.nodes, vec![1, 2]);
        let s1 = enclosing_subgraph(&g, (1, 2), 1).unwrap();
        assert_eq!(s1.nodes, vec![0, 1, 2, 3]);
        let far = enclosing_subgraph(&g, (0, 1), 1).unwrap();
        assert_eq!(far.nodes, vec![0, 1, 2]);
    }

    #[test]
    fn weighted_structure_roundtrip() {
        let s = WeightedStructure::new(4, vec![(2, 3), (0, 1)], vec![0.2, 0.9]).unwrap();
        assert_eq!(s.pairs(), &[(0, 1), (2, 3)]);
        assert_eq!(s.weights(), &[0.9, 0.2]);
        assert_eq!(s.weight_of(3, 2), Some(0.2));
        assert_eq!(s.weight_of(0, 2), None);
        assert_eq!(s.hard_edges(0.5), vec![(0, 1)]);
        assert!(WeightedStructure::new(4, vec![(1, 0)], vec![1.0]).is_err());
        assert!(WeightedStructure::new(4, vec![(0, 1), (0, 1)], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn group_partition_splits_by_connection_and_group() {
        // Nodes 0..4, groups [0,0,1,1], neighbors of 0: {1, 2}.
        let sensitive = vec![0, 0, 1, 1];
        let neighbors = vec![vec![1, 2], vec![0], vec![0], vec![]];
        let sets = group_partition(&sensitive, &neighbors).unwrap();
        assert_eq!(sets[0].intra_pos, vec![1]);
        assert_eq!(sets[0].inter_pos, vec![2]);
        assert!(sets[0].intra_neg.is_empty());
        assert!(sets[0].usable());
        // Node 3 has no connections: inter_pos empty, intra_neg = {2}.
        assert!(sets[3].inter_pos.is_empty());
        assert_eq!(sets[3].intra_neg, vec![2]);
        assert!(!sets[3].usable());
    }

    #[test]
    fn neighbor_lists_respect_threshold() {
        let s = WeightedStructure::new(3, vec![(0, 1), (1, 2)], vec![0.7, 0.2]).unwrap();
        let lists = neighbor_lists(&s, 0.5);
        assert_eq!(lists[0], vec![1]);
        assert_eq!(lists[1], vec![0]);
        assert!(lists[2].is_empty());
    }
}
