//! Model definitions: GCN encoder, deletion operator applied to affected
//! rows, edge scorer MLPs for mask probabilities, and JSON checkpoints.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use crate::error::{FrogError, Result};
use crate::graph::{Edge, NormalizedAdjacency};
use crate::nn::{sigmoid_scalar, Tape, Var};

/// Graph structure an encoder runs over: either a fixed normalized adjacency
/// or a learned weighting of an explicit pair list (gradients reach the
/// weights through the aggregation op).
pub enum AdjSupport {
    Fixed(Arc<NormalizedAdjacency>),
    Learned {
        pairs: Arc<Vec<Edge>>,
        weights: Var,
    },
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Multi-layer GCN: each layer aggregates with the row-normalized adjacency
/// (self-loops included) and applies a linear map; ReLU between layers,
/// identity on the output layer.
#[derive(Debug, Clone)]
pub struct GcnEncoder {
    layers: Vec<Array2<f64>>,
}

impl GcnEncoder {
    /// `dims` lists layer widths, e.g. `[in, hidden, out]` for two layers.
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(FrogError::Config(
                "encoder needs at least input and output widths".to_string(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(FrogError::Config("zero-width encoder layer".to_string()));
        }
        let layers = dims
            .windows(2)
            .map(|w| glorot(rng, w[0], w[1]))
            .collect();
        Ok(GcnEncoder { layers })
    }

    pub fn from_layers(layers: Vec<Array2<f64>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(FrogError::Config("encoder with no layers".to_string()));
        }
        for w in layers.windows(2) {
            if w[0].ncols() != w[1].nrows() {
                return Err(FrogError::Structure(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].ncols(),
                    w[1].nrows()
                )));
            }
        }
        Ok(GcnEncoder { layers })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(|l| l.ncols()));
        d
    }

    pub fn layers(&self) -> &[Array2<f64>] {
        &self.layers
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        self.layers.iter().collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        self.layers.iter_mut().collect()
    }

    /// Value-level embeddings over a fixed adjacency, optionally routing the
    /// affected rows through a deletion operator.
    pub fn embed(
        &self,
        features: &Array2<f64>,
        adj: &NormalizedAdjacency,
        deletion: Option<(&DeletionOperator, &[usize])>,
    ) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let bound = bind_encoder(&mut tape, self);
        let x = tape.input(features.clone());
        let support = AdjSupport::Fixed(Arc::new(adj.clone()));
        let del = match deletion {
            Some((op, affected)) => {
                let w = tape.input(op.weight.clone());
                Some((w, Arc::new(affected.to_vec())))
            }
            None => None,
        };
        let z = encode(&mut tape, &bound, x, &support, del)?;
        Ok(tape.value(z).clone())
    }
}

/// Encoder weights bound onto a tape as leaves; read gradients from these.
pub struct BoundEncoder {
    pub layers: Vec<Var>,
}

pub fn bind_encoder(tape: &mut Tape, enc: &GcnEncoder) -> BoundEncoder {
    BoundEncoder {
        layers: enc.layers.iter().map(|w| tape.input(w.clone())).collect(),
    }
}

/// Runs the encoder on the tape. `deletion` replaces the rows listed in the
/// index set with their image under the deletion weight after the final
/// layer; with an identity weight the embeddings are unchanged.
pub fn encode(
    tape: &mut Tape,
    enc: &BoundEncoder,
    features: Var,
    adj: &AdjSupport,
    deletion: Option<(Var, Arc<Vec<usize>>)>,
) -> Result<Var> {
    if tape.value(features).ncols() != tape.value(enc.layers[0]).nrows() {
        return Err(FrogError::Structure(format!(
            "feature dim {} does not match encoder input {}",
            tape.value(features).ncols(),
            tape.value(enc.layers[0]).nrows()
        )));
    }
    let mut h = features;
    let last = enc.layers.len() - 1;
    for (l, &w) in enc.layers.iter().enumerate() {
        let agg = match adj {
            AdjSupport::Fixed(a) => tape.spmm(a.clone(), h),
            AdjSupport::Learned { pairs, weights } => tape.agg(*weights, h, pairs.clone()),
        };
        h = tape.matmul(agg, w);
        if l < last {
            h = tape.relu(h);
        }
    }
    if let Some((wd, affected)) = deletion {
        if !affected.is_empty() {
            let sel = tape.rows_select(h, affected.clone());
            let mapped = tape.matmul(sel, wd);
            h = tape.rows_scatter(h, affected, mapped);
        }
    }
    Ok(h)
}

/// Square map applied to embeddings of nodes touched by deleted edges.
/// Initialized near the identity so unlearning starts from the original
/// model's behavior.
#[derive(Debug, Clone)]
pub struct DeletionOperator {
    pub weight: Array2<f64>,
}

impl DeletionOperator {
    pub fn identity(dim: usize) -> Self {
        DeletionOperator {
            weight: Array2::eye(dim),
        }
    }

    /// Identity plus small Gaussian noise (variance 1e-4 per entry).
    pub fn near_identity(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, 1e-2).unwrap();
        let mut weight: Array2<f64> = Array2::eye(dim);
        for w in weight.iter_mut() {
            *w += normal.sample(rng);
        }
        DeletionOperator { weight }
    }

    pub fn dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Two-layer MLP scoring node pairs into edge probabilities. The first layer
/// is stored as two blocks so pair features never need materializing:
/// `s(i, j) = relu(z_i W_a + z_j W_b + b1) w2 + b2`. Scores are symmetrized
/// as `sigma((s(i,j) + s(j,i)) / 2)`.
#[derive(Debug, Clone)]
pub struct EdgeScorerMlp {
    pub w_a: Array2<f64>,
    pub w_b: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

impl EdgeScorerMlp {
    pub fn new(embed_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if embed_dim == 0 || hidden == 0 {
            return Err(FrogError::Config("zero-width edge scorer".to_string()));
        }
        Ok(EdgeScorerMlp {
            w_a: glorot(rng, embed_dim, hidden),
            w_b: glorot(rng, embed_dim, hidden),
            b1: Array2::zeros((1, hidden)),
            w2: glorot(rng, hidden, 1),
            b2: Array2::zeros((1, 1)),
        })
    }

    /// Shifts the output bias so initial probabilities sit near
    /// `sigma(bias)` instead of scattering around one half. Keep-gates are
    /// biased open and add-gates closed, which keeps the relaxed structure
    /// close to the real one before the scorer has learned anything.
    pub fn with_output_bias(mut self, bias: f64) -> Self {
        self.b2[[0, 0]] = bias;
        self
    }

    pub fn embed_dim(&self) -> usize {
        self.w_a.nrows()
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        vec![&self.w_a, &self.w_b, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.w_a,
            &mut self.w_b,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    /// Value-level probabilities for a pair list given fixed embeddings.
    pub fn probabilities(&self, z: &Array2<f64>, pairs: &[Edge]) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let bound = bind_scorer(&mut tape, self);
        let zv = tape.input(z.clone());
        let probs = score_pairs(&mut tape, &bound, zv, Arc::new(pairs.to_vec()))?;
        Ok(tape.value(probs).clone())
    }
}

/// Scorer weights bound onto a tape.
pub struct BoundScorer {
    pub w_a: Var,
    pub w_b: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

pub fn bind_scorer(tape: &mut Tape, s: &EdgeScorerMlp) -> BoundScorer {
    BoundScorer {
        w_a: tape.input(s.w_a.clone()),
        w_b: tape.input(s.w_b.clone()),
        b1: tape.input(s.b1.clone()),
        w2: tape.input(s.w2.clone()),
        b2: tape.input(s.b2.clone()),
    }
}

fn directed_logits(
    tape: &mut Tape,
    s: &BoundScorer,
    zi: Var,
    zj: Var,
) -> Var {
    let a = tape.matmul(zi, s.w_a);
    let b = tape.matmul(zj, s.w_b);
    let sum = tape.add(a, b);
    let pre = tape.add_row_bias(sum, s.b1);
    let h = tape.relu(pre);
    let out = tape.matmul(h, s.w2);
    tape.add_row_bias(out, s.b2)
}

/// Symmetric edge probabilities for `pairs` from embeddings `z` on the tape.
pub fn score_pairs(
    tape: &mut Tape,
    s: &BoundScorer,
    z: Var,
    pairs: Arc<Vec<Edge>>,
) -> Result<Var> {
    if tape.value(z).ncols() != tape.value(s.w_a).nrows() {
        return Err(FrogError::Structure(format!(
            "embeddings dim {} does not match scorer input {}",
            tape.value(z).ncols(),
            tape.value(s.w_a).nrows()
        )));
    }
    let heads: Arc<Vec<usize>> = Arc::new(pairs.iter().map(|&(i, _)| i).collect());
    let tails: Arc<Vec<usize>> = Arc::new(pairs.iter().map(|&(_, j)| j).collect());
    let zi = tape.rows_select(z, heads);
    let zj = tape.rows_select(z, tails);
    let fwd = directed_logits(tape, s, zi, zj);
    let bwd = directed_logits(tape, s, zj, zi);
    let sum = tape.add(fwd, bwd);
    let mean = tape.scale(sum, 0.5);
    Ok(tape.sigmoid(mean))
}

/// Inner-product link logit between two embedded nodes.
pub fn link_logit(z: &Array2<f64>, u: usize, v: usize) -> f64 {
    z.row(u).dot(&z.row(v))
}

/// Link probability through the sigmoid.
pub fn link_probability(z: &Array2<f64>, u: usize, v: usize) -> f64 {
    sigmoid_scalar(link_logit(z, u, v))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ArrayData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ArrayData {
    fn from_array(a: &Array2<f64>) -> Self {
        ArrayData {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone()).map_err(|e| {
            FrogError::Data(format!("checkpoint array shape mismatch: {e}"))
        })
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ScorerData {
    w_a: ArrayData,
    w_b: ArrayData,
    b1: ArrayData,
    w2: ArrayData,
    b2: ArrayData,
}

const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model state: encoder weights plus optional unlearning modules.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    version: u32,
    pub seed: u64,
    pub dims: Vec<usize>,
    encoder: Vec<ArrayData>,
    deletion: Option<ArrayData>,
    augmenter: Option<ScorerData>,
    pruner: Option<ScorerData>,
}

impl Checkpoint {
    pub fn new(seed: u64, encoder: &GcnEncoder) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            seed,
            dims: encoder.dims(),
            encoder: encoder.layers.iter().map(ArrayData::from_array).collect(),
            deletion: None,
            augmenter: None,
            pruner: None,
        }
    }

    pub fn with_deletion(mut self, op: &DeletionOperator) -> Self {
        self.deletion = Some(ArrayData::from_array(&op.weight));
        self
    }

    pub fn with_augmenter(mut self, s: &EdgeScorerMlp) -> Self {
        self.augmenter = Some(scorer_data(s));
        self
    }

    pub fn with_pruner(mut self, s: &EdgeScorerMlp) -> Self {
        self.pruner = Some(scorer_data(s));
        self
    }

    pub fn encoder(&self) -> Result<GcnEncoder> {
        let layers = self
            .encoder
            .iter()
            .map(|a| a.to_array())
            .collect::<Result<Vec<_>>>()?;
        GcnEncoder::from_layers(layers)
    }

    pub fn deletion(&self) -> Result<Option<DeletionOperator>> {
        match &self.deletion {
            Some(a) => Ok(Some(DeletionOperator {
                weight: a.to_array()?,
            })),
            None => Ok(None),
        }
    }

    pub fn augmenter(&self) -> Result<Option<EdgeScorerMlp>> {
        self.augmenter.as_ref().map(scorer_from_data).transpose()
    }

    pub fn pruner(&self) -> Result<Option<EdgeScorerMlp>> {
        self.pruner.as_ref().map(scorer_from_data).transpose()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| FrogError::Data(format!("checkpoint {}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(FrogError::Data(format!(
                "checkpoint version {} unsupported (expected {})",
                ck.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ck)
    }
}

fn scorer_data(s: &EdgeScorerMlp) -> ScorerData {
    ScorerData {
        w_a: ArrayData::from_array(&s.w_a),
        w_b: ArrayData::from_array(&s.w_b),
        b1: ArrayData::from_array(&s.b1),
        w2: ArrayData::from_array(&s.w2),
        b2: ArrayData::from_array(&s.b2),
    }
}

fn scorer_from_data(d: &ScorerData) -> Result<EdgeScorerMlp> {
    Ok(EdgeScorerMlp {
        w_a: d.w_a.to_array()?,
        w_b: d.w_b.to_array()?,
        b1: d.b1.to_array()?,
        w2: d.w2.to_array()?,
        b2: d.b2.to_array()?,
    })
}
