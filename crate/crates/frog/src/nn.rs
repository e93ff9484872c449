//! Minimal reverse-mode autodiff over `Array2<f64>`, sized for this crate.
//!
//! A `Tape` records eagerly evaluated ops; `backward` replays them in reverse
//! from a scalar root and returns accumulated gradients. Shapes are fixed per
//! architecture, so shape mismatches are programmer errors and assert.
//! Scalars are 1x1 matrices, edge weight vectors are m x 1, biases are 1 x k.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::error::{FrogError, Result};
use crate::graph::{Edge, NormalizedAdjacency};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddConst(usize),
    Matmul(usize, usize),
    AddRowBias(usize, usize),
    Relu(usize),
    Sigmoid(usize),
    Log(usize),
    Exp(usize),
    Abs(usize),
    Clamp(usize, f64, f64),
    RowNormalize(usize),
    RowsSelect(usize, Arc<Vec<usize>>),
    RowsScatter(usize, Arc<Vec<usize>>, usize),
    ConcatRows(usize, usize),
    PairsDot(usize, Arc<Vec<Edge>>),
    Agg {
        w: usize,
        x: usize,
        pairs: Arc<Vec<Edge>>,
        degree: Vec<f64>,
    },
    Spmm {
        adj: Arc<NormalizedAdjacency>,
        x: usize,
    },
    SumAll(usize),
    MeanAll(usize),
    Mse(usize, usize),
    BceWithLogits {
        logits: usize,
        labels: Arc<Array2<f64>>,
    },
    SegmentLse {
        x: usize,
        offsets: Arc<Vec<usize>>,
    },
}

/// Recorded computation. Build ops through the methods below, then call
/// [`Tape::backward`] on a scalar node.
pub struct Tape {
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
}

/// Row-norm floor inside `row_normalize`; rows shorter than this pass through
/// with unit divisor so the gradient stays finite.
const ROW_NORM_EPS: f64 = 1e-12;

impl Tape {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.values[v.0]
    }

    /// Scalar payload of a 1x1 node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let a = &self.values[v.0];
        assert_eq!(a.dim(), (1, 1), "expected scalar node, got {:?}", a.dim());
        a[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    /// New leaf holding `value`. Gradients accumulate here during backward.
    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.input(Array2::from_elem((1, 1), x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = same_shape(&self.values[a.0], &self.values[b.0], "add");
        let _ = v;
        let out = &self.values[a.0] + &self.values[b.0];
        self.push(out, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        same_shape(&self.values[a.0], &self.values[b.0], "sub");
        let out = &self.values[a.0] - &self.values[b.0];
        self.push(out, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        same_shape(&self.values[a.0], &self.values[b.0], "mul");
        let out = &self.values[a.0] * &self.values[b.0];
        self.push(out, Op::Mul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = &self.values[a.0] * c;
        self.push(out, Op::Scale(a.0, c))
    }

    /// Adds a constant matrix that needs no gradient.
    pub fn add_const(&mut self, a: Var, c: &Array2<f64>) -> Var {
        same_shape(&self.values[a.0], c, "add_const");
        let out = &self.values[a.0] + c;
        self.push(out, Op::AddConst(a.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ar, ac) = self.values[a.0].dim();
        let (br, bc) = self.values[b.0].dim();
        assert_eq!(ac, br, "matmul inner dims {ar}x{ac} vs {br}x{bc}");
        let out = self.values[a.0].dot(&self.values[b.0]);
        self.push(out, Op::Matmul(a.0, b.0))
    }

    /// Broadcast-adds a 1 x k bias row to every row of `x`.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Var {
        let (_, k) = self.values[x.0].dim();
        assert_eq!(
            self.values[bias.0].dim(),
            (1, k),
            "bias must be 1x{k}, got {:?}",
            self.values[bias.0].dim()
        );
        let out = &self.values[x.0] + &self.values[bias.0];
        self.push(out, Op::AddRowBias(x.0, bias.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(|x| x.max(0.0));
        self.push(out, Op::Relu(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(sigmoid_scalar);
        self.push(out, Op::Sigmoid(a.0))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(f64::ln);
        self.push(out, Op::Log(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(f64::exp);
        self.push(out, Op::Exp(a.0))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.values[a.0].mapv(f64::abs);
        self.push(out, Op::Abs(a.0))
    }

    /// Clamp with zero gradient outside the open interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        assert!(lo < hi, "clamp bounds out of order: {lo} >= {hi}");
        let out = self.values[a.0].mapv(|x| x.clamp(lo, hi));
        self.push(out, Op::Clamp(a.0, lo, hi))
    }

    /// L2-normalizes each row. Rows with norm below a small floor are passed
    /// through unscaled.
    pub fn row_normalize(&mut self, a: Var) -> Var {
        let mut out = self.values[a.0].clone();
        for mut row in out.rows_mut() {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > ROW_NORM_EPS {
                row.mapv_inplace(|x| x / n);
            }
        }
        self.push(out, Op::RowNormalize(a.0))
    }

    /// Gathers rows by index; duplicates are allowed.
    pub fn rows_select(&mut self, x: Var, idx: Arc<Vec<usize>>) -> Var {
        let src = &self.values[x.0];
        let k = src.ncols();
        let mut out = Array2::zeros((idx.len(), k));
        for (r, &i) in idx.iter().enumerate() {
            assert!(i < src.nrows(), "row index {i} out of range");
            out.row_mut(r).assign(&src.row(i));
        }
        self.push(out, Op::RowsSelect(x.0, idx))
    }

    /// Copies `base` and overwrites the rows in `idx` with the rows of
    /// `replacement` (one per index, in order). Indices must be unique.
    pub fn rows_scatter(&mut self, base: Var, idx: Arc<Vec<usize>>, replacement: Var) -> Var {
        let rep = &self.values[replacement.0];
        assert_eq!(rep.nrows(), idx.len(), "one replacement row per index");
        assert_eq!(rep.ncols(), self.values[base.0].ncols(), "column mismatch");
        let mut out = self.values[base.0].clone();
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(i).assign(&rep.row(r));
        }
        self.push(out, Op::RowsScatter(base.0, idx, replacement.0))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (ar, ac) = self.values[a.0].dim();
        let (br, bc) = self.values[b.0].dim();
        assert_eq!(ac, bc, "concat_rows column mismatch {ac} vs {bc}");
        let mut out = Array2::zeros((ar + br, ac));
        out.slice_mut(ndarray::s![..ar, ..])
            .assign(&self.values[a.0]);
        out.slice_mut(ndarray::s![ar.., ..])
            .assign(&self.values[b.0]);
        self.push(out, Op::ConcatRows(a.0, b.0))
    }

    /// Row dot products: `out[e] = x[i] . x[j]` for each pair `(i, j)`.
    pub fn pairs_dot(&mut self, x: Var, pairs: Arc<Vec<Edge>>) -> Var {
        let src = &self.values[x.0];
        let mut out = Array2::zeros((pairs.len(), 1));
        for (e, &(i, j)) in pairs.iter().enumerate() {
            out[[e, 0]] = src.row(i).dot(&src.row(j));
        }
        self.push(out, Op::PairsDot(x.0, pairs))
    }

    /// Differentiable row-normalized aggregation with self-loops over weighted
    /// pairs: `out_i = (x_i + sum_e w_e x_j) / (1 + sum_e w_e)`. Gradients flow
    /// to both the features and the edge weights. Weights should be in [0, 1].
    pub fn agg(&mut self, w: Var, x: Var, pairs: Arc<Vec<Edge>>) -> Var {
        let wv = &self.values[w.0];
        let xv = &self.values[x.0];
        assert_eq!(
            wv.dim(),
            (pairs.len(), 1),
            "weights must be {}x1, got {:?}",
            pairs.len(),
            wv.dim()
        );
        let n = xv.nrows();
        let mut degree = vec![1.0; n];
        for (e, &(i, j)) in pairs.iter().enumerate() {
            assert!(i < n && j < n, "pair ({i}, {j}) out of range");
            degree[i] += wv[[e, 0]];
            degree[j] += wv[[e, 0]];
        }
        let mut out = xv.clone();
        for (e, &(i, j)) in pairs.iter().enumerate() {
            let we = wv[[e, 0]];
            for c in 0..xv.ncols() {
                out[[i, c]] += we * xv[[j, c]];
                out[[j, c]] += we * xv[[i, c]];
            }
        }
        for i in 0..n {
            for c in 0..xv.ncols() {
                out[[i, c]] /= degree[i];
            }
        }
        self.push(
            out,
            Op::Agg {
                w: w.0,
                x: x.0,
                pairs,
                degree,
            },
        )
    }

    /// Product with a fixed normalized adjacency; gradient flows to `x` only.
    pub fn spmm(&mut self, adj: Arc<NormalizedAdjacency>, x: Var) -> Var {
        let out = adj.matmul(&self.values[x.0]);
        self.push(out, Op::Spmm { adj, x: x.0 })
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.values[a.0].sum();
        self.push(Array2::from_elem((1, 1), s), Op::SumAll(a.0))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let len = self.values[a.0].len();
        assert!(len > 0, "mean of empty matrix");
        let s = self.values[a.0].sum() / len as f64;
        self.push(Array2::from_elem((1, 1), s), Op::MeanAll(a.0))
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        same_shape(&self.values[a.0], &self.values[b.0], "mse");
        let len = self.values[a.0].len();
        assert!(len > 0, "mse of empty matrices");
        let diff = &self.values[a.0] - &self.values[b.0];
        let s = diff.iter().map(|d| d * d).sum::<f64>() / len as f64;
        self.push(Array2::from_elem((1, 1), s), Op::Mse(a.0, b.0))
    }

    /// Numerically stable mean binary cross-entropy on raw logits.
    pub fn bce_with_logits(&mut self, logits: Var, labels: Arc<Array2<f64>>) -> Var {
        same_shape(&self.values[logits.0], &labels, "bce_with_logits");
        let lv = &self.values[logits.0];
        assert!(!lv.is_empty(), "bce of empty logits");
        let mut total = 0.0;
        for (x, y) in lv.iter().zip(labels.iter()) {
            total += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
        }
        let out = Array2::from_elem((1, 1), total / lv.len() as f64);
        self.push(
            out,
            Op::BceWithLogits {
                logits: logits.0,
                labels,
            },
        )
    }

    /// Log-sum-exp per contiguous segment of an m x 1 column. `offsets` has
    /// one more entry than segments; every segment must be non-empty.
    pub fn segment_logsumexp(&mut self, x: Var, offsets: Arc<Vec<usize>>) -> Var {
        let xv = &self.values[x.0];
        assert_eq!(xv.ncols(), 1, "segment_logsumexp expects a column");
        assert!(offsets.len() >= 2, "need at least one segment");
        assert_eq!(*offsets.last().unwrap(), xv.nrows(), "offsets must cover x");
        let segs = offsets.len() - 1;
        let mut out = Array2::zeros((segs, 1));
        for s in 0..segs {
            let (lo, hi) = (offsets[s], offsets[s + 1]);
            assert!(lo < hi, "empty segment {s}");
            let m = (lo..hi).map(|r| xv[[r, 0]]).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = (lo..hi).map(|r| (xv[[r, 0]] - m).exp()).sum();
            out[[s, 0]] = m + sum.ln();
        }
        self.push(out, Op::SegmentLse { x: x.0, offsets })
    }

    /// Reverse pass from a scalar root. Returns gradients for every node that
    /// the root depends on; leaves hold the gradients callers usually want.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(
            self.values[root.0].dim(),
            (1, 1),
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        grads[root.0] = Some(Array2::from_elem((1, 1), 1.0));
        for i in (0..=root.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.apply_backward(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn apply_backward(&self, i: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        match &self.ops[i] {
            Op::Leaf => {}
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, -g);
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g * &self.values[*b]);
                accumulate(grads, *b, g * &self.values[*a]);
            }
            Op::Scale(a, c) => accumulate(grads, *a, g * *c),
            Op::AddConst(a) => accumulate(grads, *a, g.clone()),
            Op::Matmul(a, b) => {
                accumulate(grads, *a, g.dot(&self.values[*b].t()));
                accumulate(grads, *b, self.values[*a].t().dot(g));
            }
            Op::AddRowBias(x, bias) => {
                accumulate(grads, *x, g.clone());
                let col_sum = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                accumulate(grads, *bias, col_sum);
            }
            Op::Relu(a) => {
                let mask = self.values[*a].mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                accumulate(grads, *a, g * &mask);
            }
            Op::Sigmoid(a) => {
                let s = &self.values[i];
                accumulate(grads, *a, g * &(s * &s.mapv(|x| 1.0 - x)));
            }
            Op::Log(a) => accumulate(grads, *a, g / &self.values[*a]),
            Op::Exp(a) => accumulate(grads, *a, g * &self.values[i]),
            Op::Abs(a) => {
                let sign = self.values[*a].mapv(|x| {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                });
                accumulate(grads, *a, g * &sign);
            }
            Op::Clamp(a, lo, hi) => {
                let src = &self.values[*a];
                let mut ga = g.clone();
                for (gv, &x) in ga.iter_mut().zip(src.iter()) {
                    if x <= *lo || x >= *hi {
                        *gv = 0.0;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::RowNormalize(a) => {
                let src = &self.values[*a];
                let out = &self.values[i];
                let mut ga = Array2::zeros(src.dim());
                for r in 0..src.nrows() {
                    let n = src.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n > ROW_NORM_EPS {
                        let u = out.row(r);
                        let gr = g.row(r);
                        let proj: f64 = u.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                        for c in 0..src.ncols() {
                            ga[[r, c]] = (gr[c] - u[c] * proj) / n;
                        }
                    } else {
                        for c in 0..src.ncols() {
                            ga[[r, c]] = g[[r, c]];
                        }
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::RowsSelect(x, idx) => {
                let mut gx = Array2::zeros(self.values[*x].dim());
                for (r, &i2) in idx.iter().enumerate() {
                    for c in 0..gx.ncols() {
                        gx[[i2, c]] += g[[r, c]];
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::RowsScatter(base, idx, rep) => {
                let mut gb = g.clone();
                let mut gr = Array2::zeros(self.values[*rep].dim());
                for (r, &i2) in idx.iter().enumerate() {
                    for c in 0..gb.ncols() {
                        gr[[r, c]] = gb[[i2, c]];
                        gb[[i2, c]] = 0.0;
                    }
                }
                accumulate(grads, *base, gb);
                accumulate(grads, *rep, gr);
            }
            Op::ConcatRows(a, b) => {
                let ar = self.values[*a].nrows();
                accumulate(grads, *a, g.slice(ndarray::s![..ar, ..]).to_owned());
                accumulate(grads, *b, g.slice(ndarray::s![ar.., ..]).to_owned());
            }
            Op::PairsDot(x, pairs) => {
                let src = &self.values[*x];
                let mut gx = Array2::zeros(src.dim());
                for (e, &(i2, j2)) in pairs.iter().enumerate() {
                    let ge = g[[e, 0]];
                    for c in 0..src.ncols() {
                        gx[[i2, c]] += ge * src[[j2, c]];
                        gx[[j2, c]] += ge * src[[i2, c]];
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::Agg {
                w,
                x,
                pairs,
                degree,
            } => {
                let wv = &self.values[*w];
                let xv = &self.values[*x];
                let out = &self.values[i];
                let cols = xv.ncols();
                let mut gx = Array2::zeros(xv.dim());
                let mut gw = Array2::zeros(wv.dim());
                for r in 0..xv.nrows() {
                    for c in 0..cols {
                        gx[[r, c]] += g[[r, c]] / degree[r];
                    }
                }
                for (e, &(i2, j2)) in pairs.iter().enumerate() {
                    let we = wv[[e, 0]];
                    let mut gwe = 0.0;
                    for c in 0..cols {
                        gx[[j2, c]] += we / degree[i2] * g[[i2, c]];
                        gx[[i2, c]] += we / degree[j2] * g[[j2, c]];
                        gwe += g[[i2, c]] * (xv[[j2, c]] - out[[i2, c]]) / degree[i2];
                        gwe += g[[j2, c]] * (xv[[i2, c]] - out[[j2, c]]) / degree[j2];
                    }
                    gw[[e, 0]] = gwe;
                }
                accumulate(grads, *x, gx);
                accumulate(grads, *w, gw);
            }
            Op::Spmm { adj, x } => {
                let mut gx = Array2::zeros(self.values[*x].dim());
                for r in 0..adj.num_nodes() {
                    for &(j, wt) in adj.row(r) {
                        for c in 0..gx.ncols() {
                            gx[[j, c]] += wt * g[[r, c]];
                        }
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::SumAll(a) => {
                let ga = Array2::from_elem(self.values[*a].dim(), g[[0, 0]]);
                accumulate(grads, *a, ga);
            }
            Op::MeanAll(a) => {
                let len = self.values[*a].len() as f64;
                let ga = Array2::from_elem(self.values[*a].dim(), g[[0, 0]] / len);
                accumulate(grads, *a, ga);
            }
            Op::Mse(a, b) => {
                let len = self.values[*a].len() as f64;
                let diff = &self.values[*a] - &self.values[*b];
                let ga = diff.mapv(|d| 2.0 * d * g[[0, 0]] / len);
                accumulate(grads, *b, -&ga);
                accumulate(grads, *a, ga);
            }
            Op::BceWithLogits { logits, labels } => {
                let lv = &self.values[*logits];
                let len = lv.len() as f64;
                let mut gl = Array2::zeros(lv.dim());
                for ((gv, &x), &y) in gl.iter_mut().zip(lv.iter()).zip(labels.iter()) {
                    *gv = (sigmoid_scalar(x) - y) * g[[0, 0]] / len;
                }
                accumulate(grads, *logits, gl);
            }
            Op::SegmentLse { x, offsets } => {
                let xv = &self.values[*x];
                let out = &self.values[i];
                let mut gx = Array2::zeros(xv.dim());
                for s in 0..offsets.len() - 1 {
                    for r in offsets[s]..offsets[s + 1] {
                        gx[[r, 0]] = g[[s, 0]] * (xv[[r, 0]] - out[[s, 0]]).exp();
                    }
                }
                accumulate(grads, *x, gx);
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

/// Gradients produced by one backward pass.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` if the root does not depend
    /// on it.
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }

    /// Gradient with respect to `v`, zeros if unreachable from the root.
    pub fn wrt_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        match self.grads[v.0].as_ref() {
            Some(g) => g.clone(),
            None => Array2::zeros(shape),
        }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], i: usize, delta: Array2<f64>) {
    match &mut grads[i] {
        Some(g) => *g += &delta,
        slot => *slot = Some(delta),
    }
}

fn same_shape<'a>(a: &'a Array2<f64>, b: &Array2<f64>, op: &str) -> &'a Array2<f64> {
    assert_eq!(a.dim(), b.dim(), "{op}: shape {:?} vs {:?}", a.dim(), b.dim());
    a
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Value-level row L2 normalization matching [`Tape::row_normalize`].
pub fn row_normalize_value(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > ROW_NORM_EPS {
            row.mapv_inplace(|v| v / n);
        }
    }
    out
}

/// Relaxed binary mask configuration. `tau` is the concrete temperature;
/// `hard` selects thresholded 0/1 output at evaluation time.
#[derive(Debug, Clone, Copy)]
pub struct GumbelConfig {
    pub tau: f64,
    pub hard: bool,
}

impl GumbelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(FrogError::Config(format!(
                "gumbel temperature must be positive and finite, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Probability floor applied to mask probabilities before taking logs.
const PROB_EPS: f64 = 1e-12;

/// One logistic noise draw per entry, as the difference of two Gumbel
/// variables sampled by inverse transform.
pub fn logistic_noise(rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64> {
    use rand::Rng;
    let mut out = Array2::zeros((rows, 1));
    for r in 0..rows {
        let u1: f64 = rng.gen_range(PROB_EPS..1.0 - PROB_EPS);
        let u2: f64 = rng.gen_range(PROB_EPS..1.0 - PROB_EPS);
        let g1 = -(-u1.ln()).ln();
        let g2 = -(-u2.ln()).ln();
        out[[r, 0]] = g1 - g2;
    }
    out
}

/// Differentiable binary-concrete relaxation of a probability column:
/// `sigma((logit p + G) / tau)` with `G` the provided logistic noise. Pass
/// zero noise for the deterministic relaxation. Hard-thresholding a noisy
/// sample recovers Bernoulli(p) exactly: P(logit p + G > 0) = p.
pub fn binary_concrete(tape: &mut Tape, probs: Var, noise: &Array2<f64>, tau: f64) -> Var {
    let ones = Array2::ones(tape.value(probs).dim());
    let clamped = tape.clamp(probs, PROB_EPS, 1.0 - PROB_EPS);
    let lp = tape.log(clamped);
    let neg = tape.scale(clamped, -1.0);
    let complement = tape.add_const(neg, &ones);
    let lq = tape.log(complement);
    let logit = tape.sub(lp, lq);
    let shifted = tape.add_const(logit, noise);
    let scaled = tape.scale(shifted, 1.0 / tau);
    tape.sigmoid(scaled)
}

/// Value-level twin of [`binary_concrete`].
pub fn binary_concrete_value(probs: &Array2<f64>, noise: &Array2<f64>, tau: f64) -> Array2<f64> {
    let mut out = Array2::zeros(probs.dim());
    for (o, (&p, &g)) in out.iter_mut().zip(probs.iter().zip(noise.iter())) {
        let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        let logit = pc.ln() - (1.0 - pc).ln();
        *o = sigmoid_scalar((logit + g) / tau);
    }
    out
}

/// Hard 0/1 threshold at one half.
pub fn hard_threshold(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|x| if x >= 0.5 { 1.0 } else { 0.0 })
}

/// Samples a relaxed symmetric mask for a dense probability matrix: noise is
/// drawn once per upper-triangle entry and mirrored, the diagonal stays zero.
/// With `cfg.hard` the result is thresholded to 0/1.
pub fn gumbel_sample_matrix(
    probs: &Array2<f64>,
    cfg: GumbelConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    let (n, m) = probs.dim();
    if n != m {
        return Err(FrogError::Structure(format!(
            "mask probabilities must be square, got {n}x{m}"
        )));
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let noise = logistic_noise(rng, 1)[[0, 0]];
            let pc = probs[[i, j]].clamp(PROB_EPS, 1.0 - PROB_EPS);
            let logit = pc.ln() - (1.0 - pc).ln();
            let soft = sigmoid_scalar((logit + noise) / cfg.tau);
            let v = if cfg.hard {
                if soft >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            } else {
                soft
            };
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(out)
}

/// Central finite differences of `f` at `params`, step `h` per entry. The
/// closure sees the perturbed parameter set each call; entries are restored
/// afterwards.
pub fn finite_difference<F>(params: &mut [Array2<f64>], mut f: F, h: f64) -> Vec<Array2<f64>>
where
    F: FnMut(&[Array2<f64>]) -> f64,
{
    let mut grads: Vec<Array2<f64>> = params.iter().map(|p| Array2::zeros(p.dim())).collect();
    for p in 0..params.len() {
        for r in 0..params[p].nrows() {
            for c in 0..params[p].ncols() {
                let orig = params[p][[r, c]];
                params[p][[r, c]] = orig + h;
                let up = f(params);
                params[p][[r, c]] = orig - h;
                let down = f(params);
                params[p][[r, c]] = orig;
                grads[p][[r, c]] = (up - down) / (2.0 * h);
            }
        }
    }
    grads
}

/// Largest symmetric relative error between two gradient sets.
pub fn max_relative_error(analytic: &[Array2<f64>], numeric: &[Array2<f64>]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric.iter()) {
        assert_eq!(a.dim(), n.dim());
        for (&x, &y) in a.iter().zip(n.iter()) {
            let denom = (x.abs() + y.abs()).max(1e-6);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}
