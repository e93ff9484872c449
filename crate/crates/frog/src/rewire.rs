//! Graph rewiring for unlearning: inter-group candidate generation for the
//! fair augmenter, the augmentation algebra, soft mask assembly on the tape,
//! and deterministic finalization of the rewired structure under a
//! modification budget.

use std::collections::BTreeSet;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{FrogError, Result};
use crate::graph::{canonical, Edge, Graph};
use crate::nn::{Tape, Var};

/// Pair support of the rewiring problem: kept training edges plus the
/// augmenter's candidate pairs, merged in canonical order. The index lists
/// map each side back into the merged order.
#[derive(Debug, Clone)]
pub struct Support {
    pub pairs: Arc<Vec<Edge>>,
    pub retain_idx: Arc<Vec<usize>>,
    pub candidate_idx: Arc<Vec<usize>>,
}

impl Support {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn require_sorted_unique(pairs: &[Edge], what: &str) -> Result<()> {
    for w in pairs.windows(2) {
        if w[0] >= w[1] {
            return Err(FrogError::Structure(format!(
                "{what} pairs must be sorted and unique, found ({}, {}) then ({}, {})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    for &(u, v) in pairs {
        if u >= v {
            return Err(FrogError::Structure(format!(
                "{what} pair ({u}, {v}) is not canonical"
            )));
        }
    }
    Ok(())
}

/// Merges retain edges and candidate pairs into one sorted support.
/// The two lists must each be sorted, canonical, and disjoint.
pub fn build_support(retain: &[Edge], candidates: &[Edge]) -> Result<Support> {
    require_sorted_unique(retain, "retain")?;
    require_sorted_unique(candidates, "candidate")?;
    let mut pairs = Vec::with_capacity(retain.len() + candidates.len());
    let mut retain_idx = Vec::with_capacity(retain.len());
    let mut candidate_idx = Vec::with_capacity(candidates.len());
    let (mut i, mut j) = (0, 0);
    while i < retain.len() || j < candidates.len() {
        let take_retain = match (retain.get(i), candidates.get(j)) {
            (Some(r), Some(c)) => {
                if r == c {
                    return Err(FrogError::Structure(format!(
                        "pair ({}, {}) is both a retain edge and a candidate",
                        r.0, r.1
                    )));
                }
                r < c
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!(),
        };
        if take_retain {
            retain_idx.push(pairs.len());
            pairs.push(retain[i]);
            i += 1;
        } else {
            candidate_idx.push(pairs.len());
            pairs.push(candidates[j]);
            j += 1;
        }
    }
    Ok(Support {
        pairs: Arc::new(pairs),
        retain_idx: Arc::new(retain_idx),
        candidate_idx: Arc::new(candidate_idx),
    })
}

/// Inter-group non-edges near the deletion zone, offered to the augmenter.
/// The zone is every node within `radius` hops of a forgotten edge's
/// endpoint in `retain_graph` (the graph with the forget edges already
/// removed). Each node joins at most `cap_per_node` candidates; scanning in
/// ascending pair order makes the cap deterministic.
pub fn candidate_pairs(
    retain_graph: &Graph,
    forget: &[Edge],
    radius: usize,
    cap_per_node: usize,
) -> Result<Vec<Edge>> {
    if forget.is_empty() {
        return Err(FrogError::Structure(
            "candidate generation needs a non-empty forget set".to_string(),
        ));
    }
    let n = retain_graph.num_nodes();
    for &(u, v) in forget {
        if u >= n || v >= n {
            return Err(FrogError::Structure(format!(
                "forget edge ({u}, {v}) out of range for {n} nodes"
            )));
        }
    }
    let forget_set: BTreeSet<Edge> = forget.iter().map(|&(u, v)| canonical(u, v)).collect();

    let mut zone: BTreeSet<usize> = forget.iter().flat_map(|&(u, v)| [u, v]).collect();
    let mut frontier: Vec<usize> = zone.iter().copied().collect();
    for _ in 0..radius {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in retain_graph.neighbors(u) {
                if zone.insert(v) {
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }

    let zone: Vec<usize> = zone.into_iter().collect();
    let mut used = vec![0usize; n];
    let mut out = Vec::new();
    for (a, &u) in zone.iter().enumerate() {
        for &v in &zone[a + 1..] {
            if retain_graph.group_of(u) == retain_graph.group_of(v) {
                continue;
            }
            if retain_graph.has_edge(u, v) || forget_set.contains(&canonical(u, v)) {
                continue;
            }
            if used[u] >= cap_per_node || used[v] >= cap_per_node {
                continue;
            }
            used[u] += 1;
            used[v] += 1;
            out.push(canonical(u, v));
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Dense augmentation algebra: `A_aug = A + (J - I - A) .* M`, which adds
/// mask weight only at off-diagonal non-edge positions. Exact reference for
/// the sparse path.
pub fn apply_augmentation(adj: &Array2<f64>, mask: &Array2<f64>) -> Result<Array2<f64>> {
    let n = adj.nrows();
    if adj.ncols() != n || mask.dim() != (n, n) {
        return Err(FrogError::Structure(format!(
            "augmentation needs square matrices of equal size, got {:?} and {:?}",
            adj.dim(),
            mask.dim()
        )));
    }
    let mut out = adj.clone();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[[i, j]] += (1.0 - adj[[i, j]]) * mask[[i, j]];
            }
        }
    }
    Ok(out)
}

/// Sparse augmentation path used during optimization, materialized densely
/// for cross-checking: retain edges at weight 1, candidates at their mask
/// value, mirrored.
pub fn augmented_dense(
    num_nodes: usize,
    retain: &[Edge],
    candidates: &[Edge],
    aug_values: &[f64],
) -> Result<Array2<f64>> {
    if candidates.len() != aug_values.len() {
        return Err(FrogError::Structure(format!(
            "{} candidates but {} mask values",
            candidates.len(),
            aug_values.len()
        )));
    }
    let mut out = Array2::zeros((num_nodes, num_nodes));
    for &(u, v) in retain {
        out[[u, v]] = 1.0;
        out[[v, u]] = 1.0;
    }
    for (&(u, v), &m) in candidates.iter().zip(aug_values) {
        out[[u, v]] = m;
        out[[v, u]] = m;
    }
    Ok(out)
}

/// Combines the pruner mask over the whole support with the augmenter mask
/// over the candidates: retained edges keep their pruner weight, candidates
/// get the product of both masks. Gradients flow to both inputs.
pub fn soft_weights(tape: &mut Tape, support: &Support, prune_m: Var, aug_m: Var) -> Var {
    assert_eq!(
        tape.value(prune_m).dim(),
        (support.len(), 1),
        "pruner mask must align with the support"
    );
    assert_eq!(
        tape.value(aug_m).dim(),
        (support.candidate_idx.len(), 1),
        "augmenter mask must align with the candidates"
    );
    if support.candidate_idx.is_empty() {
        return prune_m;
    }
    let cand_prune = tape.rows_select(prune_m, support.candidate_idx.clone());
    let cand_w = tape.mul(cand_prune, aug_m);
    tape.rows_scatter(prune_m, support.candidate_idx.clone(), cand_w)
}

/// Structure-distance reference aligned with the support: weight 1 on kept
/// training edges, 0 on candidates.
pub fn reference_weights(support: &Support) -> Array2<f64> {
    let mut r = Array2::zeros((support.len(), 1));
    for &i in support.retain_idx.iter() {
        r[[i, 0]] = 1.0;
    }
    r
}

/// Outcome of thresholding the learned masks under the modification budget.
#[derive(Debug, Clone)]
pub struct FinalizedStructure {
    /// Edge list of the rewired graph, sorted canonical.
    pub edges: Vec<Edge>,
    pub adds: Vec<Edge>,
    pub removals: Vec<Edge>,
}

/// Thresholds the learned masks into a concrete edge list. A candidate is
/// added when both its augmenter and pruner probabilities reach 0.5; a
/// retained edge is removed when its pruner probability falls below 0.5.
/// At most `budget` modifications are kept, ranked by confidence (distance
/// of the deciding probability from 0.5), ties broken by pair id. The
/// result never contains a forgotten edge.
pub fn finalize_structure(
    retain: &[Edge],
    candidates: &[Edge],
    support: &Support,
    aug_probs: &[f64],
    prune_probs: &[f64],
    budget: usize,
    forget: &[Edge],
) -> Result<FinalizedStructure> {
    if aug_probs.len() != candidates.len() {
        return Err(FrogError::Structure(format!(
            "{} augmenter probabilities for {} candidates",
            aug_probs.len(),
            candidates.len()
        )));
    }
    if prune_probs.len() != support.len() {
        return Err(FrogError::Structure(format!(
            "{} pruner probabilities for a support of {}",
            prune_probs.len(),
            support.len()
        )));
    }
    let forget_set: BTreeSet<Edge> = forget.iter().map(|&(u, v)| canonical(u, v)).collect();
    for &e in retain.iter().chain(candidates.iter()) {
        if forget_set.contains(&e) {
            return Err(FrogError::Structure(format!(
                "forgotten edge ({}, {}) appears in the rewiring support",
                e.0, e.1
            )));
        }
    }
    for &p in aug_probs.iter().chain(prune_probs.iter()) {
        if !(0.0..=1.0).contains(&p) {
            return Err(FrogError::Numeric(format!(
                "mask probability {p} outside [0, 1]"
            )));
        }
    }

    // (confidence, pair, is_add)
    let mut mods: Vec<(f64, Edge, bool)> = Vec::new();
    for (k, (&e, &ap)) in candidates.iter().zip(aug_probs).enumerate() {
        let pp = prune_probs[support.candidate_idx[k]];
        if ap >= 0.5 && pp >= 0.5 {
            mods.push((ap.min(pp) - 0.5, e, true));
        }
    }
    for (k, &e) in retain.iter().enumerate() {
        let pp = prune_probs[support.retain_idx[k]];
        if pp < 0.5 {
            mods.push((0.5 - pp, e, false));
        }
    }
    mods.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    mods.truncate(budget);

    let removed: BTreeSet<Edge> = mods.iter().filter(|m| !m.2).map(|m| m.1).collect();
    let mut edges: Vec<Edge> = retain
        .iter()
        .copied()
        .filter(|e| !removed.contains(e))
        .collect();
    let mut adds: Vec<Edge> = mods.iter().filter(|m| m.2).map(|m| m.1).collect();
    adds.sort_unstable();
    edges.extend(adds.iter().copied());
    edges.sort_unstable();

    // Retain and candidates were checked against the forget set above, and
    // edges only draws from them.
    debug_assert!(edges.iter().all(|e| !forget_set.contains(e)));
    let mut removals: Vec<Edge> = removed.into_iter().collect();
    removals.sort_unstable();
    Ok(FinalizedStructure {
        edges,
        adds,
        removals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two triangles bridged by (2, 3); groups split 0-2 vs 3-5.
    fn bridged_graph() -> Graph {
        let edges = vec![(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)];
        let features = Array2::from_elem((6, 2), 1.0);
        Graph::new(6, edges, features, vec![0, 0, 0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn support_merge_keeps_both_index_maps() {
        let s = build_support(&[(0, 1), (2, 3)], &[(0, 2), (4, 5)]).unwrap();
        assert_eq!(*s.pairs, vec![(0, 1), (0, 2), (2, 3), (4, 5)]);
        assert_eq!(*s.retain_idx, vec![0, 2]);
        assert_eq!(*s.candidate_idx, vec![1, 3]);
        assert!(build_support(&[(0, 1)], &[(0, 1)]).is_err());
        assert!(build_support(&[(1, 0)], &[]).is_err());
        assert!(build_support(&[(0, 2), (0, 1)], &[]).is_err());
    }

    #[test]
    fn candidates_are_intergroup_nonedges_near_the_zone() {
        let g = bridged_graph();
        // Forget the bridge; zone at radius 1 is {2, 3} plus their
        // neighbors in the retain graph.
        let retain: Vec<Edge> = g.edges().iter().copied().filter(|&e| e != (2, 3)).collect();
        let rg = g.with_edges(retain).unwrap();
        let cands = candidate_pairs(&rg, &[(2, 3)], 1, 10).unwrap();
        // Zone = {0, 1, 2, 3, 4, 5}; inter-group non-edges excluding the
        // forgotten bridge.
        assert_eq!(
            cands,
            vec![(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 4), (2, 5)]
        );
        let capped = candidate_pairs(&rg, &[(2, 3)], 1, 1).unwrap();
        // Ascending scan: (0,3) uses 0 and 3; (1,4) uses 1 and 4; (2,5) is
        // the only pair left with both endpoints free.
        assert_eq!(capped, vec![(0, 3), (1, 4), (2, 5)]);
        assert!(candidate_pairs(&rg, &[], 1, 10).is_err());
    }

    #[test]
    fn augmentation_algebra_frozen_case() {
        // Path 0-1-2; mask proposes (0, 2) at 0.7 and repeats an existing
        // edge at (0, 1), which must be ignored.
        let mut a: Array2<f64> = Array2::zeros((3, 3));
        for &(u, v) in &[(0usize, 1usize), (1, 2)] {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        let mut m: Array2<f64> = Array2::zeros((3, 3));
        m[[0, 2]] = 0.7;
        m[[2, 0]] = 0.7;
        m[[0, 1]] = 0.9;
        m[[1, 0]] = 0.9;
        m[[1, 1]] = 0.4; // diagonal is excluded too
        let out = apply_augmentation(&a, &m).unwrap();
        let mut expect = a.clone();
        expect[[0, 2]] = 0.7;
        expect[[2, 0]] = 0.7;
        assert_eq!(out, expect);
        assert!(apply_augmentation(&a, &Array2::zeros((2, 2))).is_err());
    }

    #[test]
    fn sparse_path_matches_dense_algebra_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(4..12);
            let mut retain = Vec::new();
            let mut nonedges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.4) {
                        retain.push((u, v));
                    } else {
                        nonedges.push((u, v));
                    }
                }
            }
            let k = nonedges.len().min(rng.gen_range(0..6));
            let candidates: Vec<Edge> = nonedges[..k].to_vec();
            let values: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();

            let mut a = Array2::zeros((n, n));
            for &(u, v) in &retain {
                a[[u, v]] = 1.0;
                a[[v, u]] = 1.0;
            }
            let mut m = Array2::zeros((n, n));
            for (&(u, v), &x) in candidates.iter().zip(&values) {
                m[[u, v]] = x;
                m[[v, u]] = x;
            }
            let dense = apply_augmentation(&a, &m).unwrap();
            let sparse = augmented_dense(n, &retain, &candidates, &values).unwrap();
            assert_eq!(dense, sparse);
        }
    }

    #[test]
    fn soft_weights_hand_values_and_gradients() {
        let support = build_support(&[(0, 1)], &[(0, 2)]).unwrap();
        let mut tape = Tape::new();
        let prune = tape.input(ndarray::arr2(&[[0.8], [0.6]]));
        let aug = tape.input(ndarray::arr2(&[[0.5]]));
        let w = soft_weights(&mut tape, &support, prune, aug);
        assert_eq!(tape.value(w), &ndarray::arr2(&[[0.8], [0.3]]));
        let s = tape.sum_all(w);
        let grads = tape.backward(s);
        // d/d prune = [1, aug], d/d aug = prune_cand.
        assert_eq!(grads.wrt(prune).unwrap(), &ndarray::arr2(&[[1.0], [0.5]]));
        assert_eq!(grads.wrt(aug).unwrap(), &ndarray::arr2(&[[0.6]]));
    }

    #[test]
    fn reference_marks_retained_edges_only() {
        let support = build_support(&[(0, 1), (2, 3)], &[(1, 2)]).unwrap();
        let r = reference_weights(&support);
        assert_eq!(r, ndarray::arr2(&[[1.0], [0.0], [1.0]]));
    }

    #[test]
    fn finalize_applies_thresholds_and_budget() {
        let retain = vec![(0, 1), (1, 2), (2, 3)];
        let candidates = vec![(0, 2), (0, 3)];
        let support = build_support(&retain, &candidates).unwrap();
        // Support order: (0,1) (0,2) (0,3) (1,2) (2,3).
        let aug = [0.9, 0.4]; // (0,2) proposed, (0,3) below threshold
        let prune = [0.95, 0.8, 0.9, 0.1, 0.3]; // drops (1,2) then (2,3)
        let forget = [(4, 5)];

        let f = finalize_structure(&retain, &candidates, &support, &aug, &prune, 10, &forget)
            .unwrap();
        assert_eq!(f.adds, vec![(0, 2)]);
        assert_eq!(f.removals, vec![(1, 2), (2, 3)]);
        assert_eq!(f.edges, vec![(0, 1), (0, 2)]);

        // Budget 2 keeps the two most confident modifications: removal of
        // (1,2) at 0.4 and the add of (0,2) at min(0.9, 0.8)-0.5 = 0.3.
        let f = finalize_structure(&retain, &candidates, &support, &aug, &prune, 2, &forget)
            .unwrap();
        assert_eq!(f.adds, vec![(0, 2)]);
        assert_eq!(f.removals, vec![(1, 2)]);
        assert_eq!(f.edges, vec![(0, 1), (0, 2), (2, 3)]);

        // Budget 0 returns the retain graph unchanged.
        let f = finalize_structure(&retain, &candidates, &support, &aug, &prune, 0, &forget)
            .unwrap();
        assert_eq!(f.edges, retain);
        assert!(f.adds.is_empty() && f.removals.is_empty());
    }

    #[test]
    fn finalize_needs_both_masks_for_an_add() {
        let retain = vec![(0, 1)];
        let candidates = vec![(0, 2)];
        let support = build_support(&retain, &candidates).unwrap();
        // Augmenter wants it, pruner vetoes it.
        let f =
            finalize_structure(&retain, &candidates, &support, &[0.9], &[1.0, 0.2], 5, &[])
                .unwrap();
        assert!(f.adds.is_empty());
        assert_eq!(f.edges, retain);
    }

    #[test]
    fn finalize_breaks_confidence_ties_by_pair_id() {
        let retain = vec![(0, 1), (0, 2)];
        let support = build_support(&retain, &[]).unwrap();
        // Both removals tie at confidence 0.3; only (0,1) fits the budget.
        let f = finalize_structure(&retain, &[], &support, &[], &[0.2, 0.2], 1, &[]).unwrap();
        assert_eq!(f.removals, vec![(0, 1)]);
        assert_eq!(f.edges, vec![(0, 2)]);
    }

    #[test]
    fn finalize_rejects_forget_edges_in_support() {
        let retain = vec![(0, 1)];
        let support = build_support(&retain, &[]).unwrap();
        let err = finalize_structure(&retain, &[], &support, &[], &[1.0], 5, &[(0, 1)]);
        assert!(err.is_err());
    }
}
