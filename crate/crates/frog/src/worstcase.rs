//! Adversarial forget-set selection: find the k training edges whose
//! deletion request is hardest to honor, either because the unlearned model
//! keeps predicting them or because unlearning them degrades group fairness
//! the most. Selection relaxes set membership to edge weights on a capped
//! simplex and alternates truncated unlearning with projected gradient
//! steps on the weights.

use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FrogError, Result};
use crate::graph::{Edge, Graph};
use crate::models::{bind_encoder, encode, AdjSupport, DeletionOperator, GcnEncoder};
use crate::nn::{Tape, Var};
use crate::trainer::AdaptiveSgd;

/// What the selected forget set should be worst for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorstCaseObjective {
    /// Post-unlearning link-prediction loss on the set stays low: the
    /// unlearner cannot actually remove the knowledge.
    Unlearning,
    /// Post-unlearning dyadic parity gap grows: the deletion damages group
    /// fairness.
    Fairness,
}

impl WorstCaseObjective {
    pub fn name(&self) -> &'static str {
        match self {
            WorstCaseObjective::Unlearning => "unlearning",
            WorstCaseObjective::Fairness => "fairness",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unlearning" => Ok(WorstCaseObjective::Unlearning),
            "fairness" => Ok(WorstCaseObjective::Fairness),
            other => Err(FrogError::Config(format!(
                "unknown worst-case objective '{other}'; expected unlearning or fairness"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorstCaseParams {
    /// Outer alternations between refitting the proxy unlearner and
    /// updating the selection weights.
    pub rounds: usize,
    /// Projected gradient steps on the weights per round.
    pub steps_per_round: usize,
    pub eta: f64,
    /// Deletion-operator fitting epochs of the truncated inner unlearner.
    pub inner_epochs: usize,
    pub inner_lr: f64,
}

impl Default for WorstCaseParams {
    fn default() -> Self {
        WorstCaseParams {
            rounds: 8,
            steps_per_round: 20,
            eta: 0.05,
            inner_epochs: 10,
            inner_lr: 0.02,
        }
    }
}

impl WorstCaseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rounds", self.rounds),
            ("steps_per_round", self.steps_per_round),
            ("inner_epochs", self.inner_epochs),
        ] {
            if v == 0 {
                return Err(FrogError::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [("eta", self.eta), ("inner_lr", self.inner_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FrogError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WorstCaseSelection {
    /// The k selected edges, sorted canonical.
    pub edges: Vec<Edge>,
    /// Final relaxed weights aligned with the candidate pool.
    pub scores: Vec<f64>,
}

/// Euclidean projection onto `{ w in [0, 1]^n : sum w = k }` by bisecting
/// the shift in `clamp(w - mu, 0, 1)`.
pub fn project_capped_simplex(w: &mut [f64], k: usize) -> Result<()> {
    let n = w.len();
    if k > n {
        return Err(FrogError::Config(format!(
            "cannot select {k} items from a pool of {n}"
        )));
    }
    if k == n {
        w.iter_mut().for_each(|x| *x = 1.0);
        return Ok(());
    }
    if k == 0 {
        w.iter_mut().for_each(|x| *x = 0.0);
        return Ok(());
    }
    let target = k as f64;
    let (mut lo, mut hi) = w
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x - 1.0), hi.max(x))
        });
    for _ in 0..100 {
        let mu = 0.5 * (lo + hi);
        let s: f64 = w.iter().map(|&x| (x - mu).clamp(0.0, 1.0)).sum();
        if s > target {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    let mu = 0.5 * (lo + hi);
    w.iter_mut().for_each(|x| *x = (*x - mu).clamp(0.0, 1.0));
    Ok(())
}

/// All k-subsets of the pool in lexicographic order. Guarded against
/// combinatorial blowups; meant for ground-truth comparisons on small
/// graphs.
pub fn enumerate_forget_sets(pool: &[Edge], k: usize) -> Result<Vec<Vec<Edge>>> {
    let n = pool.len();
    if k == 0 || k > n {
        return Err(FrogError::Config(format!(
            "cannot enumerate {k}-subsets of {n} edges"
        )));
    }
    let mut count: u128 = 1;
    for i in 0..k {
        count = count * (n - i) as u128 / (i + 1) as u128;
        if count > 100_000 {
            return Err(FrogError::Config(format!(
                "{n} choose {k} exceeds the enumeration limit"
            )));
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        // Next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Stable softplus from primitive tape ops:
/// `softplus(x) = relu(x) + log(1 + exp(-|x|))`.
fn softplus(tape: &mut Tape, x: Var) -> Var {
    let r = tape.relu(x);
    let a = tape.abs(x);
    let na = tape.scale(a, -1.0);
    let e = tape.exp(na);
    let ones = Array2::from_elem(tape.value(e).dim(), 1.0);
    let e1 = tape.add_const(e, &ones);
    let l = tape.log(e1);
    tape.add(r, l)
}

struct PairGroups {
    intra: Arc<Vec<Edge>>,
    inter: Arc<Vec<Edge>>,
}

fn all_pair_groups(graph: &Graph) -> Result<PairGroups> {
    let n = graph.num_nodes();
    if n > 700 {
        return Err(FrogError::Config(format!(
            "worst-case selection enumerates node pairs and is meant for small graphs; got {n} nodes"
        )));
    }
    let mut intra = Vec::new();
    let mut inter = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if graph.group_of(u) == graph.group_of(v) {
                intra.push((u, v));
            } else {
                inter.push((u, v));
            }
        }
    }
    if intra.is_empty() || inter.is_empty() {
        return Err(FrogError::Structure(
            "fairness objective needs both intra- and inter-group pairs".to_string(),
        ));
    }
    Ok(PairGroups {
        intra: Arc::new(intra),
        inter: Arc::new(inter),
    })
}

/// Embeddings under the softly deleted structure `1 - w` with the current
/// deletion operator applied to every node, plus the pool logits.
fn proxy_forward(
    tape: &mut Tape,
    graph: &Graph,
    original: &GcnEncoder,
    pool: &Arc<Vec<Edge>>,
    w_var: Var,
    wd_var: Var,
    all_nodes: &Arc<Vec<usize>>,
) -> Result<(Var, Var)> {
    let neg = tape.scale(w_var, -1.0);
    let ones = Array2::from_elem((pool.len(), 1), 1.0);
    let keep = tape.add_const(neg, &ones);
    let enc = bind_encoder(tape, original);
    let x = tape.input(graph.features().clone());
    let z = encode(
        tape,
        &enc,
        x,
        &AdjSupport::Learned {
            pairs: pool.clone(),
            weights: keep,
        },
        Some((wd_var, all_nodes.clone())),
    )?;
    let logits = tape.pairs_dot(z, pool.clone());
    Ok((z, logits))
}

/// Selects k edges from the pool. The relaxation keeps a weight per pool
/// edge on the capped simplex; each round first fits the proxy unlearner (a
/// deletion operator pushing weighted-selected edges toward non-edges while
/// preserving the rest), then takes projected gradient steps on the weights
/// against the chosen objective with the operator frozen. The top-k weights
/// become the selection, ties broken by edge id.
pub fn select_worst_case(
    graph: &Graph,
    pool: &[Edge],
    original: &GcnEncoder,
    k: usize,
    objective: WorstCaseObjective,
    params: &WorstCaseParams,
    seed: u64,
) -> Result<WorstCaseSelection> {
    params.validate()?;
    if k == 0 {
        return Err(FrogError::Config("selection size k must be positive".to_string()));
    }
    if pool.len() < 2 || k >= pool.len() {
        return Err(FrogError::Config(format!(
            "need k < pool size and at least 2 pool edges, got k={k}, pool={}",
            pool.len()
        )));
    }
    for w in pool.windows(2) {
        if w[0] >= w[1] {
            return Err(FrogError::Structure(
                "candidate pool must be sorted and unique".to_string(),
            ));
        }
    }
    let m = pool.len();
    let pool_arc = Arc::new(pool.to_vec());
    let all_nodes: Arc<Vec<usize>> = Arc::new((0..graph.num_nodes()).collect());
    let pairs = match objective {
        WorstCaseObjective::Fairness => Some(all_pair_groups(graph)?),
        WorstCaseObjective::Unlearning => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wd = DeletionOperator::near_identity(original.out_dim(), &mut rng);
    let mut w = vec![k as f64 / m as f64; m];
    let kf = k as f64;
    let rf = (m - k) as f64;

    for _ in 0..params.rounds {
        // Truncated inner unlearner: fit the deletion operator to the
        // current soft selection.
        let mut inner_opt = AdaptiveSgd::new(params.inner_lr);
        for _ in 0..params.inner_epochs {
            let mut tape = Tape::new();
            let w_var = tape.input(Array2::from_shape_fn((m, 1), |(i, _)| w[i]));
            let wd_var = tape.input(wd.weight.clone());
            let (_, logits) = proxy_forward(
                &mut tape, graph, original, &pool_arc, w_var, wd_var, &all_nodes,
            )?;
            // Selected edges toward label 0, the rest toward label 1.
            let sp_pos = softplus(&mut tape, logits);
            let neg_logits = tape.scale(logits, -1.0);
            let sp_neg = softplus(&mut tape, neg_logits);
            let sel = tape.mul(sp_pos, w_var);
            let neg_w = tape.scale(w_var, -1.0);
            let ones = Array2::from_elem((m, 1), 1.0);
            let keep_w = tape.add_const(neg_w, &ones);
            let kept = tape.mul(sp_neg, keep_w);
            let s1 = tape.sum_all(sel);
            let s2 = tape.sum_all(kept);
            let t1 = tape.scale(s1, 1.0 / kf);
            let t2 = tape.scale(s2, 1.0 / rf);
            let loss = tape.add(t1, t2);
            let grads = tape.backward(loss);
            let g = grads.wrt_or_zeros(wd_var, wd.weight.dim());
            inner_opt.step(vec![&mut wd.weight], &[g]);
        }

        // Outer: move the selection against the objective, operator frozen.
        for _ in 0..params.steps_per_round {
            let mut tape = Tape::new();
            let w_var = tape.input(Array2::from_shape_fn((m, 1), |(i, _)| w[i]));
            let wd_var = tape.input(wd.weight.clone());
            let (z, logits) = proxy_forward(
                &mut tape, graph, original, &pool_arc, w_var, wd_var, &all_nodes,
            )?;
            let loss = match objective {
                WorstCaseObjective::Unlearning => {
                    // Keep the post-unlearning loss on selected edges low.
                    let neg_logits = tape.scale(logits, -1.0);
                    let sp_neg = softplus(&mut tape, neg_logits);
                    let sel = tape.mul(sp_neg, w_var);
                    let s = tape.sum_all(sel);
                    tape.scale(s, 1.0 / kf)
                }
                WorstCaseObjective::Fairness => {
                    // Grow the squared dyadic gap.
                    let pg = pairs.as_ref().unwrap();
                    let di = tape.pairs_dot(z, pg.intra.clone());
                    let si = tape.sigmoid(di);
                    let mi = tape.mean_all(si);
                    let dj = tape.pairs_dot(z, pg.inter.clone());
                    let sj = tape.sigmoid(dj);
                    let mj = tape.mean_all(sj);
                    let gap = tape.sub(mi, mj);
                    let sq = tape.mul(gap, gap);
                    tape.scale(sq, -1.0)
                }
            };
            let grads = tape.backward(loss);
            let g = grads.wrt_or_zeros(w_var, (m, 1));
            for i in 0..m {
                w[i] -= params.eta * g[[i, 0]];
            }
            project_capped_simplex(&mut w, k)?;
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap().then(pool[a].cmp(&pool[b])));
    let mut edges: Vec<Edge> = order[..k].iter().map(|&i| pool[i]).collect();
    edges.sort_unstable();
    Ok(WorstCaseSelection { edges, scores: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_split, ForgetMode};
    use crate::trainer::{train_original, HyperParams};

    #[test]
    fn projection_lands_on_the_capped_simplex() {
        let mut w = vec![2.0, 0.5, -1.0, 0.7];
        project_capped_simplex(&mut w, 2).unwrap();
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-9, "sum {sum}");
        assert!(w.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        // Largest inputs keep the largest mass.
        assert!(w[0] >= w[3] && w[3] >= w[1] && w[1] >= w[2]);

        let mut w = vec![0.1, 0.2];
        project_capped_simplex(&mut w, 2).unwrap();
        assert_eq!(w, vec![1.0, 1.0]);
        let mut w = vec![0.9, 0.8];
        project_capped_simplex(&mut w, 0).unwrap();
        assert_eq!(w, vec![0.0, 0.0]);
        assert!(project_capped_simplex(&mut [0.0], 2).is_err());

        // Already feasible points stay put.
        let mut w = vec![1.0, 0.0, 0.5, 0.5];
        project_capped_simplex(&mut w, 2).unwrap();
        for (got, want) in w.iter().zip([1.0, 0.0, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let pool = vec![(0, 1), (0, 2), (1, 2), (2, 3)];
        let sets = enumerate_forget_sets(&pool, 2).unwrap();
        assert_eq!(sets.len(), 6);
        assert_eq!(sets[0], vec![(0, 1), (0, 2)]);
        assert_eq!(sets[5], vec![(1, 2), (2, 3)]);
        let mut dedup = sets.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 6);
        assert!(enumerate_forget_sets(&pool, 0).is_err());
        assert!(enumerate_forget_sets(&pool, 5).is_err());
    }

    /// Five-clique with five pendant nodes; edges differ sharply in how
    /// well they survive unlearning, so a worst-case selector has real
    /// signal to find.
    fn clique_with_pendants(seed: u64) -> Graph {
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push((u, v));
            }
        }
        for p in 0..5 {
            edges.push((p, 5 + p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let features = Array2::from_shape_fn((10, 6), |_| rng.gen_range(-1.0..1.0));
        let sensitive = (0..10).map(|i| u8::from(i % 2 == 0)).collect();
        Graph::new(10, edges, features, sensitive).unwrap()
    }

    #[test]
    fn unlearning_objective_picks_edges_that_resist_unlearning() {
        use crate::models::link_logit;
        use crate::trainer::deletion_operator_unlearn;

        // BCE with label 1: low loss after unlearning = the edge survived.
        fn forget_loss(logit: f64) -> f64 {
            logit.max(0.0) - logit + (1.0 + (-logit.abs()).exp()).ln()
        }

        let graph = clique_with_pendants(5);
        let hp = HyperParams {
            hidden: vec![6, 6],
            epochs: 150,
            ..HyperParams::default()
        };
        let split = make_split(&graph, 0.1, &ForgetMode::Edges(vec![(0, 1)]), 5).unwrap();
        let model = train_original(&graph, &split, &hp, 3).unwrap();
        let pool = split.train_edges();

        let sel = select_worst_case(
            &graph,
            &pool,
            &model.encoder,
            1,
            WorstCaseObjective::Unlearning,
            &WorstCaseParams::default(),
            7,
        )
        .unwrap();
        assert_eq!(sel.edges.len(), 1);
        assert_eq!(sel.scores.len(), pool.len());
        assert!(pool.contains(&sel.edges[0]));

        // Exhaustive ground truth: actually unlearn each candidate edge and
        // measure how strongly the model still predicts it. The relaxed
        // selection must land in the hard half of that distribution.
        let mut losses = Vec::new();
        let mut selected_loss = f64::NAN;
        for &e in &pool {
            let sp = split.with_forget(vec![e]).unwrap();
            let out = deletion_operator_unlearn(&graph, &sp, &model.encoder, &hp, 3).unwrap();
            let zu = out.embeddings(&graph).unwrap();
            let loss = forget_loss(link_logit(&zu, e.0, e.1));
            if e == sel.edges[0] {
                selected_loss = loss;
            }
            losses.push(loss);
        }
        losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = losses[losses.len() / 2];
        assert!(
            selected_loss <= median,
            "selected {:?} has forget loss {selected_loss:.4}, above the median {median:.4}",
            sel.edges[0]
        );

        // Deterministic.
        let sel2 = select_worst_case(
            &graph,
            &pool,
            &model.encoder,
            1,
            WorstCaseObjective::Unlearning,
            &WorstCaseParams::default(),
            7,
        )
        .unwrap();
        assert_eq!(sel.edges, sel2.edges);
    }

    #[test]
    fn fairness_objective_runs_and_selects_from_pool() {
        let graph = clique_with_pendants(6);
        let hp = HyperParams {
            hidden: vec![6, 6],
            epochs: 100,
            ..HyperParams::default()
        };
        let split = make_split(&graph, 0.1, &ForgetMode::Edges(vec![(0, 1)]), 6).unwrap();
        let model = train_original(&graph, &split, &hp, 3).unwrap();
        let pool = graph.edges().to_vec();
        let sel = select_worst_case(
            &graph,
            &pool,
            &model.encoder,
            3,
            WorstCaseObjective::Fairness,
            &WorstCaseParams::default(),
            11,
        )
        .unwrap();
        assert_eq!(sel.edges.len(), 3);
        let uniq: std::collections::BTreeSet<Edge> = sel.edges.iter().copied().collect();
        assert_eq!(uniq.len(), 3);
        for e in &sel.edges {
            assert!(pool.contains(e));
        }
    }

    #[test]
    fn objective_names_round_trip() {
        for o in [WorstCaseObjective::Unlearning, WorstCaseObjective::Fairness] {
            assert_eq!(WorstCaseObjective::parse(o.name()).unwrap(), o);
        }
        assert!(WorstCaseObjective::parse("x").is_err());
    }
}
