//! Loss builders for unlearning, fairness, and link prediction. Every
//! function appends to a caller-owned tape and returns the scalar node, so
//! losses compose into one backward pass.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{FrogError, Result};
use crate::graph::{ContrastSets, Edge, EnclosingSubgraph, Graph};
use crate::nn::{Tape, Var};

/// Scalarization weights for the follower objective
/// `L_un + alpha * L_fair + beta * L_dist` with
/// `L_un = lambda * L_dec + (1 - lambda) * L_ni`.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 0.5,
            alpha: 0.2,
            beta: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(FrogError::Config(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(FrogError::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Deleted-edge consistency: link probabilities on forget pairs under the
/// unlearned embeddings should match probabilities on substitute non-edges
/// under the reference embeddings. One substitute per forget pair.
pub fn deleted_edge_consistency(
    tape: &mut Tape,
    z_unlearned: Var,
    z_reference: Var,
    forget: &[Edge],
    substitutes: &[Edge],
) -> Result<Var> {
    if forget.is_empty() {
        return Err(FrogError::Numeric(
            "deleted-edge consistency needs at least one forget pair".to_string(),
        ));
    }
    if forget.len() != substitutes.len() {
        return Err(FrogError::Structure(format!(
            "{} forget pairs but {} substitutes",
            forget.len(),
            substitutes.len()
        )));
    }
    let fd = tape.pairs_dot(z_unlearned, Arc::new(forget.to_vec()));
    let fp = tape.sigmoid(fd);
    let sd = tape.pairs_dot(z_reference, Arc::new(substitutes.to_vec()));
    let sp = tape.sigmoid(sd);
    Ok(tape.mse(fp, sp))
}

/// Neighborhood influence: embeddings of nodes inside the enclosing
/// subgraphs of deleted edges should stay close to the reference. Mean
/// squared error over all (edge, node) incidences; nodes shared between
/// subgraphs count once per subgraph.
pub fn neighborhood_influence(
    tape: &mut Tape,
    z_unlearned: Var,
    z_reference: Var,
    subgraphs: &[EnclosingSubgraph],
) -> Result<Var> {
    let mut stacked = Vec::new();
    for s in subgraphs {
        stacked.extend_from_slice(&s.nodes);
    }
    if stacked.is_empty() {
        return Err(FrogError::Numeric(
            "neighborhood influence needs at least one subgraph node".to_string(),
        ));
    }
    let idx = Arc::new(stacked);
    let a = tape.rows_select(z_unlearned, idx.clone());
    let b = tape.rows_select(z_reference, idx);
    Ok(tape.mse(a, b))
}

/// `lambda * l_dec + (1 - lambda) * l_ni`.
pub fn unlearning_loss(tape: &mut Tape, l_dec: Var, l_ni: Var, lambda: f64) -> Var {
    let a = tape.scale(l_dec, lambda);
    let b = tape.scale(l_ni, 1.0 - lambda);
    tape.add(a, b)
}

/// Optional subsampling for the fairness contrast on large graphs. `None`
/// fields keep the exact loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct FairnessCaps {
    pub max_anchors: Option<usize>,
    pub max_intra_neg: Option<usize>,
}

impl FairnessCaps {
    fn active(&self) -> bool {
        self.max_anchors.is_some() || self.max_intra_neg.is_some()
    }
}

/// Group contrast on cosine similarities: per usable anchor
/// `lse_intra(sim / temp) - lse_inter(sim / temp)`, averaged. Minimizing
/// pulls cross-group connected pairs together and pushes same-group pairs
/// apart. The intra side pools connected and unconnected same-group nodes.
pub fn fairness_contrastive(
    tape: &mut Tape,
    z: Var,
    sets: &[ContrastSets],
    temp: f64,
    caps: FairnessCaps,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    if !(temp > 0.0) {
        return Err(FrogError::Config(format!(
            "contrast temperature must be positive, got {temp}"
        )));
    }
    if caps.active() && rng.is_none() {
        return Err(FrogError::Config(
            "fairness caps require an rng for subsampling".to_string(),
        ));
    }
    let mut usable: Vec<&ContrastSets> = sets.iter().filter(|s| s.usable()).collect();
    if usable.is_empty() {
        return Err(FrogError::Numeric(
            "no usable fairness anchors: need cross-group connections".to_string(),
        ));
    }
    if let Some(cap) = caps.max_anchors {
        if usable.len() > cap {
            let r = rng.as_mut().unwrap();
            // Partial Fisher-Yates keeps the draw order-stable for a seed.
            for i in 0..cap {
                let j = r.gen_range(i..usable.len());
                usable.swap(i, j);
            }
            usable.truncate(cap);
            usable.sort_by_key(|s| s.anchor);
        }
    }

    let mut inter_pairs: Vec<Edge> = Vec::new();
    let mut intra_pairs: Vec<Edge> = Vec::new();
    let mut inter_offsets = vec![0usize];
    let mut intra_offsets = vec![0usize];
    for s in &usable {
        for &j in &s.inter_pos {
            inter_pairs.push((s.anchor, j));
        }
        for &j in &s.intra_pos {
            intra_pairs.push((s.anchor, j));
        }
        let negs: Vec<usize> = match (caps.max_intra_neg, s.intra_neg.len()) {
            (Some(cap), len) if len > cap => {
                let r = rng.as_mut().unwrap();
                let mut idx: Vec<usize> = (0..len).collect();
                for i in 0..cap {
                    let j = r.gen_range(i..len);
                    idx.swap(i, j);
                }
                let mut chosen: Vec<usize> = idx[..cap].iter().map(|&i| s.intra_neg[i]).collect();
                chosen.sort_unstable();
                chosen
            }
            _ => s.intra_neg.clone(),
        };
        for j in negs {
            intra_pairs.push((s.anchor, j));
        }
        inter_offsets.push(inter_pairs.len());
        intra_offsets.push(intra_pairs.len());
    }

    let zn = tape.row_normalize(z);
    let inter_sims = tape.pairs_dot(zn, Arc::new(inter_pairs));
    let intra_sims = tape.pairs_dot(zn, Arc::new(intra_pairs));
    let inter_scaled = tape.scale(inter_sims, 1.0 / temp);
    let intra_scaled = tape.scale(intra_sims, 1.0 / temp);
    let lse_inter = tape.segment_logsumexp(inter_scaled, Arc::new(inter_offsets));
    let lse_intra = tape.segment_logsumexp(intra_scaled, Arc::new(intra_offsets));
    let per_anchor = tape.sub(lse_intra, lse_inter);
    Ok(tape.mean_all(per_anchor))
}

/// L1 distance between the pruned structure weights and a reference edge
/// indicator, counted twice (once per direction of the symmetric adjacency).
pub fn structure_distance(tape: &mut Tape, weights: Var, reference: &Array2<f64>) -> Var {
    let neg_ref = reference.mapv(|x| -x);
    let diff = tape.add_const(weights, &neg_ref);
    let a = tape.abs(diff);
    let s = tape.sum_all(a);
    tape.scale(s, 2.0)
}

/// Entrywise L1 between two dense symmetric adjacency matrices.
pub fn structure_distance_dense(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "structure distance needs equal shapes");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}

/// Binary cross-entropy link prediction over positive and negative pairs,
/// logits from embedding inner products.
pub fn link_prediction_loss(
    tape: &mut Tape,
    z: Var,
    positives: &[Edge],
    negatives: &[Edge],
) -> Result<Var> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(FrogError::Numeric(
            "link prediction needs positive and negative pairs".to_string(),
        ));
    }
    let mut pairs = positives.to_vec();
    pairs.extend_from_slice(negatives);
    let mut labels = Array2::zeros((pairs.len(), 1));
    for i in 0..positives.len() {
        labels[[i, 0]] = 1.0;
    }
    let logits = tape.pairs_dot(z, Arc::new(pairs));
    Ok(tape.bce_with_logits(logits, Arc::new(labels)))
}

/// Uniform non-edges of the graph, distinct within the batch, excluding
/// self-pairs. Deterministic for a given rng state.
pub fn sample_nonedges(graph: &Graph, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Edge>> {
    let n = graph.num_nodes();
    let possible = n * (n - 1) / 2;
    if possible.saturating_sub(graph.num_edges()) < count {
        return Err(FrogError::Numeric(format!(
            "cannot sample {count} non-edges from a graph with {} free pairs",
            possible - graph.num_edges()
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut seen: BTreeSet<Edge> = BTreeSet::new();
    let mut attempts = 0usize;
    let max_attempts = 100 * count + 1000;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(FrogError::Numeric(format!(
                "non-edge sampling stalled after {attempts} attempts"
            )));
        }
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let e = crate::graph::canonical(u, v);
        if graph.has_edge(e.0, e.1) || !seen.insert(e) {
            continue;
        }
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enclosing_subgraph, group_partition, Graph};
    use crate::models::{encode, AdjSupport, GcnEncoder};
    use crate::nn::{finite_difference, max_relative_error};
    use ndarray::arr2;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn deleted_edge_consistency_frozen_value() {
        // Forget pair logit 0 -> 0.5; substitute logit ln 3 -> 0.75.
        // MSE = (0.25)^2 = 0.0625.
        let z_unl = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let s = (3.0f64).ln();
        let z_ref = arr2(&[[s, 0.0], [1.0, 0.0]]);
        let mut tape = Tape::new();
        let a = tape.input(z_unl);
        let b = tape.input(z_ref);
        let l = deleted_edge_consistency(&mut tape, a, b, &[(0, 1)], &[(0, 1)]).unwrap();
        assert!((tape.scalar_value(l) - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn deleted_edge_consistency_rejects_misaligned_inputs() {
        let mut tape = Tape::new();
        let z = tape.input(arr2(&[[1.0], [2.0]]));
        assert!(deleted_edge_consistency(&mut tape, z, z, &[], &[]).is_err());
        assert!(deleted_edge_consistency(&mut tape, z, z, &[(0, 1)], &[]).is_err());
    }

    #[test]
    fn neighborhood_influence_single_node_is_mean_squared_row() {
        let z1 = arr2(&[[1.0, 3.0], [0.0, 0.0]]);
        let z2 = arr2(&[[0.0, 1.0], [0.0, 0.0]]);
        let sub = EnclosingSubgraph {
            center: (0, 1),
            nodes: vec![0],
        };
        let mut tape = Tape::new();
        let a = tape.input(z1);
        let b = tape.input(z2);
        let l = neighborhood_influence(&mut tape, a, b, &[sub]).unwrap();
        // Row delta (1, 2): mean square = (1 + 4) / 2.
        assert!((tape.scalar_value(l) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn unlearning_loss_blends_components() {
        let mut tape = Tape::new();
        let dec = tape.scalar(2.0);
        let ni = tape.scalar(4.0);
        let l = unlearning_loss(&mut tape, dec, ni, 0.5);
        assert!((tape.scalar_value(l) - 3.0).abs() < 1e-15);
        let l2 = unlearning_loss(&mut tape, dec, ni, 1.0);
        assert!((tape.scalar_value(l2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fairness_contrastive_frozen_value() {
        // Anchor 0 with one inter neighbor (sim 1) and two same-group nodes
        // at sim 0: loss = lse([0, 0]) - lse([1]) = ln 2 - 1.
        let z = arr2(&[
            [1.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
        ]);
        let sets = vec![ContrastSets {
            anchor: 0,
            intra_pos: vec![2],
            inter_pos: vec![1],
            intra_neg: vec![3],
        }];
        let mut tape = Tape::new();
        let zv = tape.input(z);
        let l = fairness_contrastive(&mut tape, zv, &sets, 1.0, FairnessCaps::default(), None)
            .unwrap();
        let expect = (2.0f64).ln() - 1.0;
        assert!((tape.scalar_value(l) - expect).abs() < 1e-12);
    }

    #[test]
    fn fairness_contrastive_requires_usable_anchor() {
        let z = arr2(&[[1.0], [1.0]]);
        let sets = vec![ContrastSets {
            anchor: 0,
            intra_pos: vec![1],
            inter_pos: vec![],
            intra_neg: vec![],
        }];
        let mut tape = Tape::new();
        let zv = tape.input(z);
        assert!(
            fairness_contrastive(&mut tape, zv, &sets, 1.0, FairnessCaps::default(), None)
                .is_err()
        );
    }

    #[test]
    fn fairness_caps_subsample_deterministically() {
        let mut r = rng(9);
        let z = Array2::from_shape_fn((40, 4), |(i, j)| ((i * 5 + j) as f64 * 0.37).sin());
        let sensitive: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let mut neighbors = vec![Vec::new(); 40];
        for i in 0..39 {
            neighbors[i].push(i + 1);
            neighbors[i + 1].push(i);
        }
        for l in &mut neighbors {
            l.sort_unstable();
        }
        let sets = group_partition(&sensitive, &neighbors).unwrap();
        let caps = FairnessCaps {
            max_anchors: Some(8),
            max_intra_neg: Some(3),
        };
        let mut tape = Tape::new();
        let zv = tape.input(z.clone());
        let l1 = fairness_contrastive(&mut tape, zv, &sets, 0.5, caps, Some(&mut r)).unwrap();
        let v1 = tape.scalar_value(l1);
        let mut r2 = rng(9);
        let mut tape2 = Tape::new();
        let zv2 = tape2.input(z);
        let l2 = fairness_contrastive(&mut tape2, zv2, &sets, 0.5, caps, Some(&mut r2)).unwrap();
        assert_eq!(v1, tape2.scalar_value(l2));
        assert!(v1.is_finite());
        assert!(
            fairness_contrastive(&mut tape2, zv2, &sets, 0.5, caps, None).is_err(),
            "caps without rng must fail"
        );
    }

    #[test]
    fn structure_distance_frozen_values() {
        // Weights [0.3, 1.0] vs reference [1.0, 1.0]: 2 * 0.7 = 1.4.
        let mut tape = Tape::new();
        let w = tape.input(arr2(&[[0.3], [1.0]]));
        let l = structure_distance(&mut tape, w, &arr2(&[[1.0], [1.0]]));
        assert!((tape.scalar_value(l) - 1.4).abs() < 1e-12);

        // All-zero pruning of m retained edges costs 2m.
        let m = 7;
        let mut tape = Tape::new();
        let w = tape.input(Array2::zeros((m, 1)));
        let ones = Array2::from_elem((m, 1), 1.0);
        let l = structure_distance(&mut tape, w, &ones);
        assert!((tape.scalar_value(l) - 2.0 * m as f64).abs() < 1e-12);

        let a = arr2(&[[0.0, 0.5], [0.5, 0.0]]);
        let b = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        assert!((structure_distance_dense(&a, &b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn link_prediction_loss_frozen_value() {
        // Orthogonal rows: positive logit 0 -> ln 2 each side.
        let z = arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let mut tape = Tape::new();
        let zv = tape.input(z);
        let l = link_prediction_loss(&mut tape, zv, &[(0, 1)], &[(1, 2)]).unwrap();
        assert!((tape.scalar_value(l) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(link_prediction_loss(&mut tape, zv, &[], &[(0, 1)]).is_err());
    }

    #[test]
    fn sample_nonedges_avoids_edges_and_repeats() {
        let g = Graph::new(
            6,
            vec![(0, 1), (1, 2), (2, 3)],
            Array2::zeros((6, 1)),
            vec![0, 1, 0, 1, 0, 1],
        )
        .unwrap();
        let mut r = rng(3);
        let ne = sample_nonedges(&g, 8, &mut r).unwrap();
        assert_eq!(ne.len(), 8);
        let mut seen = BTreeSet::new();
        for &(u, v) in &ne {
            assert!(u < v);
            assert!(!g.has_edge(u, v));
            assert!(seen.insert((u, v)));
        }
        assert!(sample_nonedges(&g, 13, &mut r).is_err());
    }

    #[test]
    fn composite_objective_matches_finite_differences() {
        // Full follower objective through the encoder and learned weights:
        // unlearning + fairness + structure terms in one backward pass.
        let g = Graph::new(
            6,
            vec![(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 5), (1, 4)],
            Array2::from_shape_fn((6, 3), |(i, j)| ((i * 3 + j) as f64 * 0.29).cos()),
            vec![0, 0, 1, 1, 0, 1],
        )
        .unwrap();
        let forget = vec![(1, 4)];
        let retained: Vec<Edge> = g
            .edges()
            .iter()
            .copied()
            .filter(|e| !forget.contains(e))
            .collect();
        let pairs = Arc::new(retained.clone());
        let subs = vec![enclosing_subgraph(&g, (1, 4), 1).unwrap()];
        let mut r = rng(4);
        let enc = GcnEncoder::new(&[3, 4, 2], &mut r).unwrap();
        let z_ref = {
            let s = crate::graph::WeightedStructure::from_edges(6, retained.clone()).unwrap();
            enc.embed(g.features(), &s.normalized(), None).unwrap()
        };
        let neighbors = crate::graph::neighbor_lists(
            &crate::graph::WeightedStructure::from_edges(6, retained.clone()).unwrap(),
            0.5,
        );
        let sets = group_partition(g.sensitive(), &neighbors).unwrap();
        let feats = g.features().clone();
        let ones = Array2::from_elem((pairs.len(), 1), 1.0);

        let mut params: Vec<Array2<f64>> = enc.layers().to_vec();
        params.push(Array2::from_shape_fn((pairs.len(), 1), |_| {
            use rand::Rng;
            r.gen_range(0.3..0.9)
        }));
        let build = |t: &mut Tape, vars: &[Var]| {
            let bound = crate::models::BoundEncoder {
                layers: vars[..2].to_vec(),
            };
            let x = t.input(feats.clone());
            let support = AdjSupport::Learned {
                pairs: pairs.clone(),
                weights: vars[2],
            };
            let z = encode(t, &bound, x, &support, None).unwrap();
            let zr = t.input(z_ref.clone());
            let dec = deleted_edge_consistency(t, z, zr, &forget, &[(0, 5)]).unwrap();
            let ni = neighborhood_influence(t, z, zr, &subs).unwrap();
            let un = unlearning_loss(t, dec, ni, 0.5);
            let fair =
                fairness_contrastive(t, z, &sets, 1.0, FairnessCaps::default(), None).unwrap();
            let dist = structure_distance(t, vars[2], &ones);
            let af = t.scale(fair, 0.2);
            let bd = t.scale(dist, 0.5);
            let s1 = t.add(un, af);
            t.add(s1, bd)
        };
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.input(p.clone())).collect();
        let root = build(&mut tape, &vars);
        let grads = tape.backward(root);
        let analytic: Vec<Array2<f64>> = vars
            .iter()
            .zip(params.iter())
            .map(|(&v, p)| grads.wrt_or_zeros(v, p.dim()))
            .collect();
        let numeric = finite_difference(
            &mut params,
            |ps| {
                let mut t = Tape::new();
                let vs: Vec<Var> = ps.iter().map(|p| t.input(p.clone())).collect();
                let root = build(&mut t, &vs);
                t.scalar_value(root)
            },
            1e-5,
        );
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "rel err {err}");
    }

    #[test]
    fn loss_weights_validation() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights {
            lambda: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(LossWeights {
            alpha: -0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(LossWeights {
            beta: f64::NAN,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
