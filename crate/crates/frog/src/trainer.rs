//! Training loops: the original link predictor, the leader/follower
//! unlearning optimizer with joint rewiring and model updating, baseline
//! unlearners, and per-run evaluation.

use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::SplitSpec;
use crate::error::{FrogError, Result};
use crate::graph::{
    enclosing_subgraph, group_partition, node_homophily, normalize, ContrastSets, Edge,
    EnclosingSubgraph, Graph,
};
use crate::losses::{
    deleted_edge_consistency, fairness_contrastive, link_prediction_loss, neighborhood_influence,
    sample_nonedges, structure_distance, unlearning_loss, FairnessCaps, LossWeights,
};
use crate::metrics::{auroc, dyadic_dp, knowledge_gap, mi_ratio, node_pred_gaps, PairScore};
use crate::models::{
    bind_encoder, bind_scorer, encode, score_pairs, AdjSupport, DeletionOperator, EdgeScorerMlp,
    GcnEncoder,
};
use crate::nn::{binary_concrete, logistic_noise, Tape};
use crate::rewire::{
    build_support, candidate_pairs, finalize_structure, reference_weights, soft_weights,
};

/// Initial output bias for the structure gates: keep-gates start near
/// sigma(2.2) ~ 0.9 and add-gates near 0.1, so the relaxed adjacency the
/// deletion operator trains against starts close to the actual graph
/// instead of a half-noise blend.
const GATE_BIAS: f64 = 2.2;

/// Knobs for both the original training and the unlearning loops.
#[derive(Debug, Clone)]
pub struct HyperParams {
    /// Hidden widths of the encoder; output width is the last entry.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    /// Early-stop patience on validation AUROC, keeping the best snapshot.
    /// `None` trains for all epochs and keeps the final weights, which lets
    /// the original model memorize its training edges; unlearning
    /// experiments depend on that memorization.
    pub patience: Option<usize>,
    pub unlearn_rounds: usize,
    pub leader_epochs: usize,
    pub follower_epochs: usize,
    pub unlearn_lr: f64,
    /// Step size for the structure scorers. The mask has to move before the
    /// deletion operator absorbs the whole objective, so this defaults to a
    /// faster rate than `unlearn_lr` (`None` means 5x).
    pub scorer_lr: Option<f64>,
    /// Concrete-relaxation temperature, annealed geometrically per round.
    pub tau_start: f64,
    pub tau_end: f64,
    pub weights: LossWeights,
    /// Maximum structure modifications; `None` means one per forgotten edge.
    pub budget: Option<usize>,
    /// Hops around forgotten edges searched for augmentation candidates.
    pub candidate_radius: usize,
    pub candidate_cap: usize,
    pub scorer_hidden: usize,
    pub fairness_temp: f64,
    pub caps: FairnessCaps,
    /// Epochs for the gradient-ascent baseline; 0 leaves the model as is.
    pub ga_epochs: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            hidden: vec![16, 16],
            lr: 0.03,
            epochs: 300,
            patience: None,
            unlearn_rounds: 20,
            leader_epochs: 1,
            follower_epochs: 5,
            unlearn_lr: 0.02,
            scorer_lr: None,
            tau_start: 1.0,
            tau_end: 0.1,
            weights: LossWeights::default(),
            budget: None,
            candidate_radius: 2,
            candidate_cap: 20,
            scorer_hidden: 16,
            fairness_temp: 0.5,
            caps: FairnessCaps::default(),
            ga_epochs: 5,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(FrogError::Config(
                "encoder hidden widths must be non-empty and positive".to_string(),
            ));
        }
        for (name, v) in [("lr", self.lr), ("unlearn_lr", self.unlearn_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FrogError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(v) = self.scorer_lr {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FrogError::Config(format!(
                    "scorer_lr must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("unlearn_rounds", self.unlearn_rounds),
            ("leader_epochs", self.leader_epochs),
            ("follower_epochs", self.follower_epochs),
            ("candidate_radius", self.candidate_radius),
            ("candidate_cap", self.candidate_cap),
            ("scorer_hidden", self.scorer_hidden),
        ] {
            if v == 0 {
                return Err(FrogError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.tau_end > 0.0 && self.tau_start >= self.tau_end) {
            return Err(FrogError::Config(format!(
                "temperatures must satisfy tau_start >= tau_end > 0, got {} and {}",
                self.tau_start, self.tau_end
            )));
        }
        if !(self.fairness_temp > 0.0) {
            return Err(FrogError::Config(format!(
                "fairness_temp must be positive, got {}",
                self.fairness_temp
            )));
        }
        self.weights.validate()
    }

    /// Scorer step size with the faster default applied.
    pub fn effective_scorer_lr(&self) -> f64 {
        self.scorer_lr.unwrap_or(self.unlearn_lr * 5.0)
    }
}

/// Per-parameter adaptive SGD: second moments accumulate with decay 0.9 and
/// scale the step as in RMSProp.
pub struct AdaptiveSgd {
    lr: f64,
    decay: f64,
    eps: f64,
    state: Vec<Array2<f64>>,
}

impl AdaptiveSgd {
    pub fn new(lr: f64) -> Self {
        AdaptiveSgd {
            lr,
            decay: 0.9,
            eps: 1e-8,
            state: Vec::new(),
        }
    }

    /// Applies one update. The parameter list must keep the same order and
    /// shapes across calls.
    pub fn step(&mut self, params: Vec<&mut Array2<f64>>, grads: &[Array2<f64>]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient count mismatch");
        if self.state.is_empty() {
            self.state = params.iter().map(|p| Array2::zeros(p.dim())).collect();
        }
        assert_eq!(self.state.len(), params.len(), "optimizer state mismatch");
        for ((p, g), s) in params.into_iter().zip(grads).zip(&mut self.state) {
            assert_eq!(p.dim(), g.dim(), "gradient shape mismatch");
            for ((pv, &gv), sv) in p.iter_mut().zip(g.iter()).zip(s.iter_mut()) {
                *sv = self.decay * *sv + (1.0 - self.decay) * gv * gv;
                *pv -= self.lr * gv / (sv.sqrt() + self.eps);
            }
        }
    }
}

/// Original model and its training trace.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub encoder: GcnEncoder,
    pub val_auroc: f64,
    pub epochs_run: usize,
}

fn val_auroc_of(
    encoder: &GcnEncoder,
    graph: &Graph,
    adj: &crate::graph::NormalizedAdjacency,
    pos: &[Edge],
    neg: &[Edge],
) -> Result<f64> {
    let z = encoder.embed(graph.features(), adj, None)?;
    let ps: Vec<f64> = pos
        .iter()
        .map(|&(u, v)| crate::models::link_logit(&z, u, v))
        .collect();
    let ns: Vec<f64> = neg
        .iter()
        .map(|&(u, v)| crate::models::link_logit(&z, u, v))
        .collect();
    auroc(&ps, &ns)
}

/// Trains an encoder from scratch on the given edge list with inner-product
/// link prediction, early-stopped on validation AUROC.
pub fn train_on_edges(
    graph: &Graph,
    train_edges: &[Edge],
    val: &[Edge],
    neg_val: &[Edge],
    hp: &HyperParams,
    seed: u64,
) -> Result<TrainedModel> {
    hp.validate()?;
    if train_edges.is_empty() {
        return Err(FrogError::Structure("no training edges".to_string()));
    }
    let train_graph = graph.with_edges(train_edges.to_vec())?;
    let adj = Arc::new(normalize(&train_graph, None)?);
    let mut dims = vec![graph.feature_dim()];
    dims.extend_from_slice(&hp.hidden);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut encoder = GcnEncoder::new(&dims, &mut rng)?;
    let mut opt = AdaptiveSgd::new(hp.lr);

    let mut best_val = f64::NEG_INFINITY;
    let mut best_layers: Vec<Array2<f64>> = encoder.layers().to_vec();
    let mut stall = 0usize;
    let mut epochs_run = 0usize;
    for _ in 0..hp.epochs {
        epochs_run += 1;
        let negs = sample_nonedges(&train_graph, train_edges.len(), &mut rng)?;
        let mut tape = Tape::new();
        let bound = bind_encoder(&mut tape, &encoder);
        let x = tape.input(graph.features().clone());
        let z = encode(&mut tape, &bound, x, &AdjSupport::Fixed(adj.clone()), None)?;
        let loss = link_prediction_loss(&mut tape, z, train_edges, &negs)?;
        let grads = tape.backward(loss);
        let gs: Vec<Array2<f64>> = bound
            .layers
            .iter()
            .map(|&v| grads.wrt_or_zeros(v, tape.value(v).dim()))
            .collect();
        opt.step(encoder.params_mut(), &gs);

        if let Some(patience) = hp.patience {
            let va = val_auroc_of(&encoder, graph, &adj, val, neg_val)?;
            if va > best_val + 1e-9 {
                best_val = va;
                best_layers = encoder.layers().to_vec();
                stall = 0;
            } else {
                stall += 1;
                if stall >= patience {
                    break;
                }
            }
        }
    }
    if hp.patience.is_none() {
        best_layers = encoder.layers().to_vec();
        best_val = val_auroc_of(&encoder, graph, &adj, val, neg_val)?;
    }
    Ok(TrainedModel {
        encoder: GcnEncoder::from_layers(best_layers)?,
        val_auroc: best_val,
        epochs_run,
    })
}

/// Trains the original model on all training edges, deletion requests
/// included; unlearning starts from this model.
pub fn train_original(
    graph: &Graph,
    split: &SplitSpec,
    hp: &HyperParams,
    seed: u64,
) -> Result<TrainedModel> {
    train_on_edges(
        graph,
        &split.train_edges(),
        &split.val,
        &split.neg_val,
        hp,
        seed,
    )
}

/// One optimization step of an unlearning run, for the loss trace.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TracePoint {
    pub round: usize,
    pub phase: &'static str,
    pub loss: f64,
}

/// Result of an unlearning run: the rewired structure, the (possibly
/// updated) encoder, and the deletion operator applied to affected rows.
#[derive(Debug, Clone)]
pub struct UnlearnOutcome {
    /// Final edge list; never contains a forgotten edge.
    pub structure: Vec<Edge>,
    pub encoder: GcnEncoder,
    pub deletion: DeletionOperator,
    /// Nodes whose embeddings route through the deletion operator: the
    /// union of enclosing subgraphs of the forgotten edges.
    pub affected: Vec<usize>,
    pub adds: Vec<Edge>,
    pub removals: Vec<Edge>,
    pub augmenter: Option<EdgeScorerMlp>,
    pub pruner: Option<EdgeScorerMlp>,
    /// Objective value per optimization step, in execution order.
    pub trace: Vec<TracePoint>,
}

impl UnlearnOutcome {
    /// Embeddings of the unlearned model on its final structure.
    pub fn embeddings(&self, graph: &Graph) -> Result<Array2<f64>> {
        let g = graph.with_edges(self.structure.clone())?;
        let adj = normalize(&g, None)?;
        let del = if self.affected.is_empty() {
            None
        } else {
            Some((&self.deletion, self.affected.as_slice()))
        };
        self.encoder.embed(graph.features(), &adj, del)
    }
}

/// Nothing to forget: the original model and structure pass through.
fn noop_outcome(split: &SplitSpec, original: &GcnEncoder) -> UnlearnOutcome {
    UnlearnOutcome {
        structure: split.retain.clone(),
        encoder: original.clone(),
        deletion: DeletionOperator::identity(original.out_dim()),
        affected: Vec::new(),
        adds: Vec::new(),
        removals: Vec::new(),
        augmenter: None,
        pruner: None,
        trace: Vec::new(),
    }
}

fn forget_subgraphs(
    train_graph: &Graph,
    forget: &[Edge],
    hops: usize,
) -> Result<(Vec<EnclosingSubgraph>, Arc<Vec<usize>>)> {
    let mut subgraphs = Vec::with_capacity(forget.len());
    let mut affected: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
    for &e in forget {
        let s = enclosing_subgraph(train_graph, e, hops)?;
        affected.extend(s.nodes.iter().copied());
        subgraphs.push(s);
    }
    Ok((subgraphs, Arc::new(affected.into_iter().collect())))
}

fn geometric_tau(hp: &HyperParams, round: usize) -> f64 {
    if hp.unlearn_rounds <= 1 {
        return hp.tau_end;
    }
    let t = round as f64 / (hp.unlearn_rounds - 1) as f64;
    hp.tau_start * (hp.tau_end / hp.tau_start).powf(t)
}

/// Contrast sets over the union of retained edges and candidate pairs:
/// candidates count as cross-group connections so the fairness term sees
/// the augmenter's proposals from the start.
fn contrast_sets(graph: &Graph, retain: &[Edge], candidates: &[Edge]) -> Result<Vec<ContrastSets>> {
    let mut lists = vec![Vec::new(); graph.num_nodes()];
    for &(u, v) in retain.iter().chain(candidates.iter()) {
        lists[u].push(v);
        lists[v].push(u);
    }
    for l in &mut lists {
        l.sort_unstable();
    }
    group_partition(graph.sensitive(), &lists)
}

/// Joint rewiring and model updating. A leader scores inter-group candidate
/// pairs to minimize the group contrast; a follower prunes the augmented
/// structure and fits the deletion operator against the unlearning,
/// fairness, and structure-distance objectives. Masks are relaxed with the
/// concrete distribution and annealed, then thresholded under the
/// modification budget. `weights.alpha == 0` disables augmentation entirely
/// and drops the fairness term, leaving a pure pruning unlearner.
pub fn unlearn_frog(
    graph: &Graph,
    split: &SplitSpec,
    original: &GcnEncoder,
    hp: &HyperParams,
    seed: u64,
) -> Result<UnlearnOutcome> {
    hp.validate()?;
    if split.forget.is_empty() {
        return Ok(noop_outcome(split, original));
    }
    let fair_active = hp.weights.alpha > 0.0;
    let train_graph = graph.with_edges(split.train_edges())?;
    let retain_graph = graph.with_edges(split.retain.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let candidates = if fair_active {
        candidate_pairs(
            &retain_graph,
            &split.forget,
            hp.candidate_radius,
            hp.candidate_cap,
        )?
    } else {
        Vec::new()
    };
    let support = build_support(&split.retain, &candidates)?;
    let candidates_arc = Arc::new(candidates.clone());
    let reference = reference_weights(&support);

    let adj_full = normalize(&train_graph, None)?;
    let z0 = original.embed(graph.features(), &adj_full, None)?;
    let out_dim = original.out_dim();
    let (subgraphs, affected) = forget_subgraphs(&train_graph, &split.forget, original.num_layers())?;
    let substitutes = sample_nonedges(&train_graph, split.forget.len(), &mut rng)?;
    let sets = if fair_active {
        contrast_sets(graph, &split.retain, &candidates)?
    } else {
        Vec::new()
    };
    if fair_active && !sets.iter().any(|s| s.usable()) {
        return Err(FrogError::Structure(
            "fairness term is active but no node has a cross-group connection or candidate"
                .to_string(),
        ));
    }

    // Created only when the fairness term is live so that the alpha = 0
    // path consumes the same random stream as the single-level variant.
    let mut augmenter = if fair_active {
        Some(EdgeScorerMlp::new(out_dim, hp.scorer_hidden, &mut rng)?.with_output_bias(-GATE_BIAS))
    } else {
        None
    };
    let mut pruner =
        EdgeScorerMlp::new(out_dim, hp.scorer_hidden, &mut rng)?.with_output_bias(GATE_BIAS);
    let mut wd = DeletionOperator::near_identity(out_dim, &mut rng);
    let mut leader_opt = AdaptiveSgd::new(hp.unlearn_lr);
    let mut follower_opt = AdaptiveSgd::new(hp.unlearn_lr);
    let mut trace = Vec::new();

    for round in 0..hp.unlearn_rounds {
        let tau = geometric_tau(hp, round);

        if let (Some(augmenter), false) = (augmenter.as_mut(), candidates.is_empty()) {
            for _ in 0..hp.leader_epochs {
                let prune_now = pruner.probabilities(&z0, &support.pairs)?;
                let mut tape = Tape::new();
                let bound = bind_scorer(&mut tape, augmenter);
                let z0v = tape.input(z0.clone());
                let probs = score_pairs(&mut tape, &bound, z0v, candidates_arc.clone())?;
                let noise = logistic_noise(&mut rng, candidates.len());
                let m_aug = binary_concrete(&mut tape, probs, &noise, tau);
                let prune_const = tape.input(prune_now);
                let w = soft_weights(&mut tape, &support, prune_const, m_aug);
                let enc = bind_encoder(&mut tape, original);
                let x = tape.input(graph.features().clone());
                let wd_const = tape.input(wd.weight.clone());
                let z = encode(
                    &mut tape,
                    &enc,
                    x,
                    &AdjSupport::Learned {
                        pairs: support.pairs.clone(),
                        weights: w,
                    },
                    Some((wd_const, affected.clone())),
                )?;
                let l_fair = fairness_contrastive(
                    &mut tape,
                    z,
                    &sets,
                    hp.fairness_temp,
                    hp.caps,
                    Some(&mut rng),
                )?;
                trace.push(TracePoint {
                    round,
                    phase: "leader",
                    loss: tape.value(l_fair)[[0, 0]],
                });
                let grads = tape.backward(l_fair);
                let vars = [bound.w_a, bound.w_b, bound.b1, bound.w2, bound.b2];
                let gs: Vec<Array2<f64>> = vars
                    .iter()
                    .map(|&v| grads.wrt_or_zeros(v, tape.value(v).dim()))
                    .collect();
                leader_opt.step(augmenter.params_mut(), &gs);
            }
        }

        for _ in 0..hp.follower_epochs {
            let aug_now = match &augmenter {
                Some(a) if !candidates.is_empty() => a.probabilities(&z0, &candidates)?,
                _ => Array2::zeros((0, 1)),
            };
            let mut tape = Tape::new();
            let bound = bind_scorer(&mut tape, &pruner);
            let z0v = tape.input(z0.clone());
            let probs = score_pairs(&mut tape, &bound, z0v, support.pairs.clone())?;
            let noise = logistic_noise(&mut rng, support.len());
            let m_p = binary_concrete(&mut tape, probs, &noise, tau);
            let aug_const = tape.input(aug_now);
            let w = soft_weights(&mut tape, &support, m_p, aug_const);
            let enc = bind_encoder(&mut tape, original);
            let x = tape.input(graph.features().clone());
            let wd_var = tape.input(wd.weight.clone());
            let z = encode(
                &mut tape,
                &enc,
                x,
                &AdjSupport::Learned {
                    pairs: support.pairs.clone(),
                    weights: w,
                },
                Some((wd_var, affected.clone())),
            )?;
            let z_ref = tape.input(z0.clone());
            let l_dec = deleted_edge_consistency(&mut tape, z, z_ref, &split.forget, &substitutes)?;
            let l_ni = neighborhood_influence(&mut tape, z, z_ref, &subgraphs)?;
            let l_un = unlearning_loss(&mut tape, l_dec, l_ni, hp.weights.lambda);
            let l_dist = structure_distance(&mut tape, w, &reference);
            let dist_term = tape.scale(l_dist, hp.weights.beta);
            let mut total = tape.add(l_un, dist_term);
            if fair_active {
                let l_fair = fairness_contrastive(
                    &mut tape,
                    z,
                    &sets,
                    hp.fairness_temp,
                    hp.caps,
                    Some(&mut rng),
                )?;
                let fair_term = tape.scale(l_fair, hp.weights.alpha);
                total = tape.add(total, fair_term);
            }
            trace.push(TracePoint {
                round,
                phase: "follower",
                loss: tape.value(total)[[0, 0]],
            });
            let grads = tape.backward(total);
            let vars = [bound.w_a, bound.w_b, bound.b1, bound.w2, bound.b2];
            let mut gs: Vec<Array2<f64>> = vars
                .iter()
                .map(|&v| grads.wrt_or_zeros(v, tape.value(v).dim()))
                .collect();
            gs.push(grads.wrt_or_zeros(wd_var, wd.weight.dim()));
            let mut params = pruner.params_mut();
            params.push(&mut wd.weight);
            follower_opt.step(params, &gs);
        }
    }

    let aug_final: Vec<f64> = match &augmenter {
        Some(a) if !candidates.is_empty() => a.probabilities(&z0, &candidates)?.column(0).to_vec(),
        _ => Vec::new(),
    };
    let prune_final: Vec<f64> = pruner.probabilities(&z0, &support.pairs)?.column(0).to_vec();
    let budget = hp.budget.unwrap_or(split.forget.len());
    let fin = finalize_structure(
        &split.retain,
        &candidates,
        &support,
        &aug_final,
        &prune_final,
        budget,
        &split.forget,
    )?;
    Ok(UnlearnOutcome {
        structure: fin.edges,
        encoder: original.clone(),
        deletion: wd,
        affected: affected.to_vec(),
        adds: fin.adds,
        removals: fin.removals,
        augmenter,
        pruner: Some(pruner),
        trace,
    })
}

/// Single-level variant: one mask generator scores the whole support and the
/// combined objective (unlearning + fairness + structure distance) trains it
/// together with the deletion operator in one loop. Cheaper than the
/// leader/follower scheme, at the cost of coupling the augmentation and
/// pruning decisions in a single mask. With `alpha == 0` and no candidates
/// it runs the exact computation of `unlearn_frog`.
pub fn unlearn_joint(
    graph: &Graph,
    split: &SplitSpec,
    original: &GcnEncoder,
    hp: &HyperParams,
    seed: u64,
) -> Result<UnlearnOutcome> {
    hp.validate()?;
    if split.forget.is_empty() {
        return Ok(noop_outcome(split, original));
    }
    let fair_active = hp.weights.alpha > 0.0;
    let train_graph = graph.with_edges(split.train_edges())?;
    let retain_graph = graph.with_edges(split.retain.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let candidates = if fair_active {
        candidate_pairs(
            &retain_graph,
            &split.forget,
            hp.candidate_radius,
            hp.candidate_cap,
        )?
    } else {
        Vec::new()
    };
    let support = build_support(&split.retain, &candidates)?;
    let reference = reference_weights(&support);

    let adj_full = normalize(&train_graph, None)?;
    let z0 = original.embed(graph.features(), &adj_full, None)?;
    let out_dim = original.out_dim();
    let (subgraphs, affected) = forget_subgraphs(&train_graph, &split.forget, original.num_layers())?;
    let substitutes = sample_nonedges(&train_graph, split.forget.len(), &mut rng)?;
    let sets = if fair_active {
        contrast_sets(graph, &split.retain, &candidates)?
    } else {
        Vec::new()
    };
    if fair_active && !sets.iter().any(|s| s.usable()) {
        return Err(FrogError::Structure(
            "fairness term is active but no node has a cross-group connection or candidate"
                .to_string(),
        ));
    }

    let mut masker =
        EdgeScorerMlp::new(out_dim, hp.scorer_hidden, &mut rng)?.with_output_bias(GATE_BIAS);
    let mut wd = DeletionOperator::near_identity(out_dim, &mut rng);
    let mut opt = AdaptiveSgd::new(hp.unlearn_lr);
    let mut trace = Vec::new();

    for round in 0..hp.unlearn_rounds {
        let tau = geometric_tau(hp, round);
        for _ in 0..hp.follower_epochs {
            let mut tape = Tape::new();
            let bound = bind_scorer(&mut tape, &masker);
            let z0v = tape.input(z0.clone());
            let probs = score_pairs(&mut tape, &bound, z0v, support.pairs.clone())?;
            let noise = logistic_noise(&mut rng, support.len());
            let m = binary_concrete(&mut tape, probs, &noise, tau);
            // The one mask covers candidates too; the augmentation slot is
            // a constant 1 so candidate weights equal the mask itself.
            let aug = if candidates.is_empty() {
                tape.input(Array2::zeros((0, 1)))
            } else {
                tape.input(Array2::ones((candidates.len(), 1)))
            };
            let w = soft_weights(&mut tape, &support, m, aug);
            let enc = bind_encoder(&mut tape, original);
            let x = tape.input(graph.features().clone());
            let wd_var = tape.input(wd.weight.clone());
            let z = encode(
                &mut tape,
                &enc,
                x,
                &AdjSupport::Learned {
                    pairs: support.pairs.clone(),
                    weights: w,
                },
                Some((wd_var, affected.clone())),
            )?;
            let z_ref = tape.input(z0.clone());
            let l_dec = deleted_edge_consistency(&mut tape, z, z_ref, &split.forget, &substitutes)?;
            let l_ni = neighborhood_influence(&mut tape, z, z_ref, &subgraphs)?;
            let l_un = unlearning_loss(&mut tape, l_dec, l_ni, hp.weights.lambda);
            let l_dist = structure_distance(&mut tape, w, &reference);
            let dist_term = tape.scale(l_dist, hp.weights.beta);
            let mut total = tape.add(l_un, dist_term);
            if fair_active {
                let l_fair = fairness_contrastive(
                    &mut tape,
                    z,
                    &sets,
                    hp.fairness_temp,
                    hp.caps,
                    Some(&mut rng),
                )?;
                let fair_term = tape.scale(l_fair, hp.weights.alpha);
                total = tape.add(total, fair_term);
            }
            trace.push(TracePoint {
                round,
                phase: "joint",
                loss: tape.value(total)[[0, 0]],
            });
            let grads = tape.backward(total);
            let vars = [bound.w_a, bound.w_b, bound.b1, bound.w2, bound.b2];
            let mut gs: Vec<Array2<f64>> = vars
                .iter()
                .map(|&v| grads.wrt_or_zeros(v, tape.value(v).dim()))
                .collect();
            gs.push(grads.wrt_or_zeros(wd_var, wd.weight.dim()));
            let mut params = masker.params_mut();
            params.push(&mut wd.weight);
            opt.step(params, &gs);
        }
    }

    let probs_final = masker.probabilities(&z0, &support.pairs)?;
    let aug_final: Vec<f64> = support
        .candidate_idx
        .iter()
        .map(|&i| probs_final[[i, 0]])
        .collect();
    let prune_final: Vec<f64> = probs_final.column(0).to_vec();
    let budget = hp.budget.unwrap_or(split.forget.len());
    let fin = finalize_structure(
        &split.retain,
        &candidates,
        &support,
        &aug_final,
        &prune_final,
        budget,
        &split.forget,
    )?;
    Ok(UnlearnOutcome {
        structure: fin.edges,
        encoder: original.clone(),
        deletion: wd,
        affected: affected.to_vec(),
        adds: fin.adds,
        removals: fin.removals,
        augmenter: None,
        pruner: Some(masker),
        trace,
    })
}

/// Retraining from scratch on the retained edges; the gold standard.
pub fn retrain(
    graph: &Graph,
    split: &SplitSpec,
    hp: &HyperParams,
    seed: u64,
) -> Result<UnlearnOutcome> {
    let model = train_on_edges(graph, &split.retain, &split.val, &split.neg_val, hp, seed)?;
    let out_dim = model.encoder.out_dim();
    Ok(UnlearnOutcome {
        structure: split.retain.clone(),
        encoder: model.encoder,
        deletion: DeletionOperator::identity(out_dim),
        affected: Vec::new(),
        adds: Vec::new(),
        removals: Vec::new(),
        augmenter: None,
        pruner: None,
        trace: Vec::new(),
    })
}

/// Gradient ascent on the forgotten edges: raises the link-prediction loss
/// on the forget set for a few epochs with the structure already cut to the
/// retained edges. Weak but standard reference point.
pub fn gradient_ascent(
    graph: &Graph,
    split: &SplitSpec,
    original: &GcnEncoder,
    hp: &HyperParams,
    seed: u64,
) -> Result<UnlearnOutcome> {
    hp.validate()?;
    if split.forget.is_empty() {
        return Err(FrogError::Structure("empty forget set".to_string()));
    }
    let _ = seed;
    let retain_graph = graph.with_edges(split.retain.clone())?;
    let adj = Arc::new(normalize(&retain_graph, None)?);
    let mut encoder = original.clone();
    let mut opt = AdaptiveSgd::new(hp.unlearn_lr);
    let labels = Arc::new(Array2::from_elem((split.forget.len(), 1), 1.0));
    let mut trace = Vec::new();
    for round in 0..hp.ga_epochs {
        let mut tape = Tape::new();
        let bound = bind_encoder(&mut tape, &encoder);
        let x = tape.input(graph.features().clone());
        let z = encode(&mut tape, &bound, x, &AdjSupport::Fixed(adj.clone()), None)?;
        let logits = tape.pairs_dot(z, Arc::new(split.forget.clone()));
        let bce = tape.bce_with_logits(logits, labels.clone());
        // Ascent: minimize the negated forget-set loss.
        let loss = tape.scale(bce, -1.0);
        trace.push(TracePoint {
            round,
            phase: "ascent",
            loss: tape.value(bce)[[0, 0]],
        });
        let grads = tape.backward(loss);
        let gs: Vec<Array2<f64>> = bound
            .layers
            .iter()
            .map(|&v| grads.wrt_or_zeros(v, tape.value(v).dim()))
            .collect();
        opt.step(encoder.params_mut(), &gs);
    }
    Ok(UnlearnOutcome {
        structure: split.retain.clone(),
        encoder,
        deletion: DeletionOperator::identity(original.out_dim()),
        affected: Vec::new(),
        adds: Vec::new(),
        removals: Vec::new(),
        augmenter: None,
        pruner: None,
        trace,
    })
}

/// Deletion-operator unlearning: the encoder stays frozen and only the
/// operator on affected rows is fit against the unlearning objective, with
/// the structure cut to the retained edges. No rewiring, no fairness term.
pub fn deletion_operator_unlearn(
    graph: &Graph,
    split: &SplitSpec,
    original: &GcnEncoder,
    hp: &HyperParams,
    seed: u64,
) -> Result<UnlearnOutcome> {
    hp.validate()?;
    if split.forget.is_empty() {
        return Err(FrogError::Structure("empty forget set".to_string()));
    }
    let train_graph = graph.with_edges(split.train_edges())?;
    let retain_graph = graph.with_edges(split.retain.clone())?;
    let adj_retain = Arc::new(normalize(&retain_graph, None)?);
    let adj_full = normalize(&train_graph, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let z0 = original.embed(graph.features(), &adj_full, None)?;
    let (subgraphs, affected) = forget_subgraphs(&train_graph, &split.forget, original.num_layers())?;
    let substitutes = sample_nonedges(&train_graph, split.forget.len(), &mut rng)?;
    let mut wd = DeletionOperator::near_identity(original.out_dim(), &mut rng);
    let mut opt = AdaptiveSgd::new(hp.unlearn_lr);

    let epochs = hp.unlearn_rounds * hp.follower_epochs;
    let mut trace = Vec::new();
    for epoch in 0..epochs {
        let mut tape = Tape::new();
        let enc = bind_encoder(&mut tape, original);
        let x = tape.input(graph.features().clone());
        let wd_var = tape.input(wd.weight.clone());
        let z = encode(
            &mut tape,
            &enc,
            x,
            &AdjSupport::Fixed(adj_retain.clone()),
            Some((wd_var, affected.clone())),
        )?;
        let z_ref = tape.input(z0.clone());
        let l_dec = deleted_edge_consistency(&mut tape, z, z_ref, &split.forget, &substitutes)?;
        let l_ni = neighborhood_influence(&mut tape, z, z_ref, &subgraphs)?;
        let l_un = unlearning_loss(&mut tape, l_dec, l_ni, hp.weights.lambda);
        trace.push(TracePoint {
            round: epoch / hp.follower_epochs,
            phase: "operator",
            loss: tape.value(l_un)[[0, 0]],
        });
        let grads = tape.backward(l_un);
        let g = grads.wrt_or_zeros(wd_var, wd.weight.dim());
        opt.step(vec![&mut wd.weight], &[g]);
    }
    Ok(UnlearnOutcome {
        structure: split.retain.clone(),
        encoder: original.clone(),
        deletion: wd,
        affected: affected.to_vec(),
        adds: Vec::new(),
        removals: Vec::new(),
        augmenter: None,
        pruner: None,
        trace,
    })
}

/// Unlearning method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Frog,
    FrogJoint,
    Retrain,
    GradientAscent,
    GnnDelete,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Frog => "frog",
            Method::FrogJoint => "frog-joint",
            Method::Retrain => "retrain",
            Method::GradientAscent => "ga",
            Method::GnnDelete => "gnndelete",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "frog" => Ok(Method::Frog),
            "frog-joint" | "frog_joint" => Ok(Method::FrogJoint),
            "retrain" => Ok(Method::Retrain),
            "ga" | "gradient_ascent" => Ok(Method::GradientAscent),
            "gnndelete" | "gnn_delete" => Ok(Method::GnnDelete),
            other => Err(FrogError::Config(format!(
                "unknown method '{other}'; expected frog, frog-joint, retrain, ga or gnndelete"
            ))),
        }
    }

    pub fn all() -> [Method; 5] {
        [
            Method::Frog,
            Method::FrogJoint,
            Method::Retrain,
            Method::GradientAscent,
            Method::GnnDelete,
        ]
    }
}

pub fn run_method(
    graph: &Graph,
    split: &SplitSpec,
    original: &GcnEncoder,
    method: Method,
    hp: &HyperParams,
    seed: u64,
) -> Result<UnlearnOutcome> {
    match method {
        Method::Frog => unlearn_frog(graph, split, original, hp, seed),
        Method::FrogJoint => unlearn_joint(graph, split, original, hp, seed),
        Method::Retrain => retrain(graph, split, hp, seed),
        Method::GradientAscent => gradient_ascent(graph, split, original, hp, seed),
        Method::GnnDelete => deletion_operator_unlearn(graph, split, original, hp, seed),
    }
}

/// Metrics of one unlearning run. AUROC-style columns are percentages.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalMetrics {
    pub auroc_test: f64,
    pub knowledge_gap: f64,
    pub mi_ratio: f64,
    pub delta_dp: f64,
    pub delta_eo: f64,
    pub delta_sp: f64,
    pub rho_before: f64,
    pub rho_after: f64,
}

/// Evaluates an unlearning outcome: test AUROC on the rewired structure,
/// knowledge gap between retained and forgotten edges, membership-inference
/// ratio against the original model, and the three fairness gaps.
/// `labels` feeds the logistic probe behind the odds/parity gaps; without
/// labels those two gaps are reported as NaN.
pub fn evaluate_run(
    graph: &Graph,
    split: &SplitSpec,
    original: &GcnEncoder,
    outcome: &UnlearnOutcome,
    labels: Option<&[u8]>,
    seed: u64,
) -> Result<EvalMetrics> {
    let train_graph = graph.with_edges(split.train_edges())?;
    let adj_full = normalize(&train_graph, None)?;
    let z_orig = original.embed(graph.features(), &adj_full, None)?;
    let z_unl = outcome.embeddings(graph)?;

    let ts: Vec<f64> = split
        .test
        .iter()
        .map(|&(u, v)| crate::models::link_logit(&z_unl, u, v))
        .collect();
    let ns: Vec<f64> = split
        .neg_test
        .iter()
        .map(|&(u, v)| crate::models::link_logit(&z_unl, u, v))
        .collect();
    let auroc_test = 100.0 * auroc(&ts, &ns)?;
    let kg = 100.0 * knowledge_gap(&z_unl, &split.retain, &split.forget)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00e7_a11e);
    let nonmembers = sample_nonedges(&train_graph, split.forget.len(), &mut rng)?;
    let mi = mi_ratio(&z_orig, &z_unl, &split.forget, &nonmembers)?;

    let delta_dp = dyadic_dp(&z_unl, graph.sensitive(), PairScore::Sigmoid, seed)?;
    let (delta_eo, delta_sp) = match labels {
        Some(l) => node_pred_gaps(&z_unl, l, graph.sensitive())?,
        None => (f64::NAN, f64::NAN),
    };
    let rho_before = node_homophily(&train_graph)?;
    let rho_after = node_homophily(&graph.with_edges(outcome.structure.clone())?)?;
    Ok(EvalMetrics {
        auroc_test,
        knowledge_gap: kg,
        mi_ratio: mi.ratio,
        delta_dp,
        delta_eo,
        delta_sp,
        rho_before,
        rho_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, make_split, ForgetMode, SyntheticSpec};

    fn small_dataset(seed: u64) -> (Graph, Option<Vec<u8>>) {
        let spec = SyntheticSpec::basic("trainer-test", 30, 8, 1.5, 0.7, 180, seed);
        let b = generate_synthetic(&spec).unwrap();
        (b.graph, b.node_labels)
    }

    fn fast_hp() -> HyperParams {
        HyperParams {
            hidden: vec![8, 8],
            epochs: 60,
            unlearn_rounds: 4,
            leader_epochs: 1,
            follower_epochs: 3,
            ..HyperParams::default()
        }
    }

    #[test]
    fn adaptive_sgd_minimizes_quadratic() {
        let mut x = Array2::from_elem((1, 1), 5.0);
        let mut opt = AdaptiveSgd::new(0.1);
        for _ in 0..400 {
            let g = Array2::from_elem((1, 1), 2.0 * (x[[0, 0]] - 3.0));
            opt.step(vec![&mut x], &[g]);
        }
        assert!((x[[0, 0]] - 3.0).abs() < 1e-2, "x = {}", x[[0, 0]]);
    }

    #[test]
    fn training_learns_and_is_deterministic() {
        let spec = SyntheticSpec::basic("trainer-big", 60, 16, 1.0, 0.8, 480, 11);
        let graph = generate_synthetic(&spec).unwrap().graph;
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 11).unwrap();

        // Early-stopped model generalizes.
        let hp = HyperParams {
            hidden: vec![16, 16],
            epochs: 300,
            patience: Some(40),
            ..HyperParams::default()
        };
        let m1 = train_original(&graph, &split, &hp, 7).unwrap();
        assert!(
            m1.val_auroc > 0.68,
            "validation AUROC {} too low",
            m1.val_auroc
        );
        let m2 = train_original(&graph, &split, &hp, 7).unwrap();
        assert_eq!(m1.encoder.layers(), m2.encoder.layers());
        assert_eq!(m1.epochs_run, m2.epochs_run);

        // Fixed-epoch model memorizes its training edges, forget set
        // included; unlearning needs something to remove.
        let hp = HyperParams {
            hidden: vec![16, 16],
            epochs: 300,
            patience: None,
            ..HyperParams::default()
        };
        let m3 = train_original(&graph, &split, &hp, 7).unwrap();
        let train_edges = split.train_edges();
        let tg = graph.with_edges(train_edges.clone()).unwrap();
        let adj = normalize(&tg, None).unwrap();
        let z = m3.encoder.embed(graph.features(), &adj, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let negs = sample_nonedges(&tg, train_edges.len(), &mut rng).unwrap();
        let score = |pairs: &[Edge]| -> Vec<f64> {
            pairs
                .iter()
                .map(|&(u, v)| crate::models::link_logit(&z, u, v))
                .collect()
        };
        let train_auroc = auroc(&score(&train_edges), &score(&negs)).unwrap();
        assert!(train_auroc > 0.8, "memorization AUROC {train_auroc}");
        let forget_auroc = auroc(&score(&split.forget), &score(&negs)).unwrap();
        assert!(forget_auroc > 0.75, "forget edges not memorized: {forget_auroc}");
    }

    #[test]
    fn frog_respects_budget_and_never_keeps_forget_edges() {
        let (graph, _) = small_dataset(12);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 12).unwrap();
        let hp = fast_hp();
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        let out = unlearn_frog(&graph, &split, &model.encoder, &hp, 5).unwrap();

        let budget = split.forget.len();
        assert!(out.adds.len() + out.removals.len() <= budget);
        for e in &split.forget {
            assert!(!out.structure.contains(e), "forgot edge {e:?} survived");
        }
        for w in out.structure.windows(2) {
            assert!(w[0] < w[1], "structure not sorted unique");
        }
        let retain: std::collections::BTreeSet<Edge> = split.retain.iter().copied().collect();
        for e in &out.removals {
            assert!(retain.contains(e));
        }
        for e in &out.adds {
            assert!(!retain.contains(e));
            assert!(!graph.has_edge(e.0, e.1));
        }
        // Determinism across reruns.
        let out2 = unlearn_frog(&graph, &split, &model.encoder, &hp, 5).unwrap();
        assert_eq!(out.structure, out2.structure);
        assert_eq!(out.deletion.weight, out2.deletion.weight);
    }

    #[test]
    fn frog_with_zero_budget_returns_retain_structure() {
        let (graph, _) = small_dataset(13);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 13).unwrap();
        let hp = HyperParams {
            budget: Some(0),
            ..fast_hp()
        };
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        let out = unlearn_frog(&graph, &split, &model.encoder, &hp, 5).unwrap();
        assert_eq!(out.structure, split.retain);
        assert!(out.adds.is_empty() && out.removals.is_empty());
    }

    #[test]
    fn alpha_zero_disables_augmentation() {
        let (graph, _) = small_dataset(14);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 14).unwrap();
        let mut hp = fast_hp();
        hp.weights.alpha = 0.0;
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        let out = unlearn_frog(&graph, &split, &model.encoder, &hp, 5).unwrap();
        assert!(out.adds.is_empty(), "no candidates should exist at alpha 0");
        let retain: std::collections::BTreeSet<Edge> = split.retain.iter().copied().collect();
        assert!(out.structure.iter().all(|e| retain.contains(e)));
    }

    #[test]
    fn gradient_ascent_lowers_forget_scores() {
        let (graph, _) = small_dataset(15);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 15).unwrap();
        let hp = fast_hp();
        let model = train_original(&graph, &split, &hp, 5).unwrap();

        let retain_graph = graph.with_edges(split.retain.clone()).unwrap();
        let adj = normalize(&retain_graph, None).unwrap();
        let z_before = model.encoder.embed(graph.features(), &adj, None).unwrap();
        let out = gradient_ascent(&graph, &split, &model.encoder, &hp, 5).unwrap();
        let z_after = out.embeddings(&graph).unwrap();

        let mean_prob = |z: &Array2<f64>| {
            split
                .forget
                .iter()
                .map(|&(u, v)| crate::models::link_probability(z, u, v))
                .sum::<f64>()
                / split.forget.len() as f64
        };
        assert!(
            mean_prob(&z_after) < mean_prob(&z_before),
            "ascent did not lower forget-edge scores: {} vs {}",
            mean_prob(&z_after),
            mean_prob(&z_before)
        );
        assert_eq!(out.structure, split.retain);
    }

    #[test]
    fn deletion_operator_baseline_moves_off_identity() {
        let (graph, _) = small_dataset(16);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 16).unwrap();
        let hp = fast_hp();
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        let out = deletion_operator_unlearn(&graph, &split, &model.encoder, &hp, 5).unwrap();
        assert_eq!(out.structure, split.retain);
        assert_eq!(out.encoder.layers(), model.encoder.layers());
        let eye: Array2<f64> = Array2::eye(out.deletion.dim());
        let drift = (&out.deletion.weight - &eye)
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        assert!(drift > 1e-3, "operator never moved: {drift}");
        assert!(!out.affected.is_empty());
    }

    #[test]
    fn evaluate_run_produces_finite_metrics() {
        let (graph, labels) = small_dataset(17);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 17).unwrap();
        let hp = fast_hp();
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        let out = unlearn_frog(&graph, &split, &model.encoder, &hp, 5).unwrap();
        let m = evaluate_run(&graph, &split, &model.encoder, &out, labels.as_deref(), 5).unwrap();
        assert!((0.0..=100.0).contains(&m.auroc_test));
        assert!((0.0..=100.0).contains(&m.knowledge_gap));
        assert!(m.mi_ratio.is_finite() && m.mi_ratio > 0.0);
        assert!((0.0..=1.0).contains(&m.delta_dp));
        assert!((0.0..=1.0).contains(&m.delta_eo));
        assert!((0.0..=1.0).contains(&m.delta_sp));
        assert!((0.0..=1.0).contains(&m.rho_before));
        assert!((0.0..=1.0).contains(&m.rho_after));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::all() {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert_eq!(Method::parse("gradient_ascent").unwrap(), Method::GradientAscent);
        assert_eq!(Method::parse("gnn_delete").unwrap(), Method::GnnDelete);
        assert!(Method::parse("nope").is_err());
    }

    #[test]
    fn empty_forget_set_is_a_no_op() {
        let (graph, _) = small_dataset(20);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 20)
            .unwrap()
            .with_forget(Vec::new())
            .unwrap();
        let hp = fast_hp();
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        for f in [unlearn_frog, unlearn_joint] {
            let out = f(&graph, &split, &model.encoder, &hp, 5).unwrap();
            assert_eq!(out.structure, split.retain);
            assert_eq!(out.encoder.layers(), model.encoder.layers());
            assert!(out.affected.is_empty());
            let eye: Array2<f64> = Array2::eye(model.encoder.out_dim());
            assert_eq!(out.deletion.weight, eye);
        }
    }

    #[test]
    fn joint_matches_frog_in_the_degenerate_case() {
        // alpha = 0 disables candidates in both paths; beta = 0 removes the
        // structure-distance pull. The two optimizers then run the same
        // computation and must agree exactly.
        let (graph, _) = small_dataset(21);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 21).unwrap();
        let mut hp = fast_hp();
        hp.weights.alpha = 0.0;
        hp.weights.beta = 0.0;
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        let a = unlearn_frog(&graph, &split, &model.encoder, &hp, 9).unwrap();
        let b = unlearn_joint(&graph, &split, &model.encoder, &hp, 9).unwrap();
        assert_eq!(a.structure, b.structure);
        assert_eq!(a.adds, b.adds);
        assert_eq!(a.removals, b.removals);
        assert_eq!(a.deletion.weight, b.deletion.weight);
    }

    #[test]
    fn joint_is_faster_than_leader_follower() {
        let (graph, _) = small_dataset(22);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 22).unwrap();
        let hp = HyperParams {
            hidden: vec![8, 8],
            epochs: 30,
            unlearn_rounds: 10,
            leader_epochs: 2,
            follower_epochs: 5,
            ..HyperParams::default()
        };
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        // Warm up caches, then time both.
        let _ = unlearn_joint(&graph, &split, &model.encoder, &hp, 9).unwrap();
        let t0 = std::time::Instant::now();
        let _ = unlearn_frog(&graph, &split, &model.encoder, &hp, 9).unwrap();
        let frog_t = t0.elapsed();
        let t1 = std::time::Instant::now();
        let _ = unlearn_joint(&graph, &split, &model.encoder, &hp, 9).unwrap();
        let joint_t = t1.elapsed();
        assert!(
            joint_t < frog_t,
            "joint {joint_t:?} not faster than leader/follower {frog_t:?}"
        );
    }

    #[test]
    fn traces_cover_every_optimization_step() {
        let (graph, _) = small_dataset(24);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 24).unwrap();
        let hp = fast_hp();
        let model = train_original(&graph, &split, &hp, 5).unwrap();

        let out = unlearn_frog(&graph, &split, &model.encoder, &hp, 5).unwrap();
        let leaders = out.trace.iter().filter(|t| t.phase == "leader").count();
        let followers = out.trace.iter().filter(|t| t.phase == "follower").count();
        assert_eq!(followers, hp.unlearn_rounds * hp.follower_epochs);
        assert_eq!(leaders, hp.unlearn_rounds * hp.leader_epochs);
        assert!(out.trace.iter().all(|t| t.loss.is_finite()));
        // Rounds are stamped in execution order.
        let rounds: Vec<usize> = out.trace.iter().map(|t| t.round).collect();
        assert!(rounds.windows(2).all(|w| w[0] <= w[1]));

        let out = deletion_operator_unlearn(&graph, &split, &model.encoder, &hp, 5).unwrap();
        assert_eq!(out.trace.len(), hp.unlearn_rounds * hp.follower_epochs);
        let out = gradient_ascent(&graph, &split, &model.encoder, &hp, 5).unwrap();
        assert_eq!(out.trace.len(), hp.ga_epochs);
    }

    #[test]
    fn gradient_ascent_with_zero_epochs_returns_original() {
        let (graph, _) = small_dataset(23);
        let split = make_split(&graph, 0.1, &ForgetMode::NearTest { hops: 3 }, 23).unwrap();
        let hp = HyperParams {
            ga_epochs: 0,
            ..fast_hp()
        };
        let model = train_original(&graph, &split, &hp, 5).unwrap();
        let out = gradient_ascent(&graph, &split, &model.encoder, &hp, 5).unwrap();
        assert_eq!(out.encoder.layers(), model.encoder.layers());
    }
}
