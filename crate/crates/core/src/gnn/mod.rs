//! Graph convolutional predictor of per-link duty cycles.
//!
//! The model runs on the conflict graph. Layer `l` computes
//! `X^l = act_l(X^{l-1} T0_l + (L X^{l-1}) T1_l)` where `L` is the
//! normalized Laplacian, hidden activations are leaky ReLU, and the
//! output layer is a row-wise softmax over two columns: the predicted
//! fraction of slots a link is scheduled, and its complement. Input
//! features are all ones, so the prediction depends only on the conflict
//! structure.
//!
//! All matrix products accumulate in a fixed order (row by row, summation
//! index ascending), which lets [`forward_local`] reproduce any single
//! row of [`forward`] bit for bit from one vertex's neighborhood alone.

mod train;

pub use train::{train, ReplayBuffer, ReplayTuple, TrainConfig, TrainReport};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::topology::{laplacian_coeff, NormalizedLaplacian};

/// Architecture of the predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    /// Number of graph-conv layers (at least 1).
    pub layers: usize,
    /// Width of every hidden layer.
    pub hidden_width: usize,
    /// Negative-side slope of the hidden leaky ReLU.
    pub leaky_slope: f64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            layers: 5,
            hidden_width: 32,
            leaky_slope: 0.01,
        }
    }
}

impl GnnConfig {
    /// Per-layer feature widths: 1 input column, 2 output columns.
    pub fn widths(&self) -> Vec<usize> {
        assert!(self.layers >= 1, "need at least one layer");
        let mut w = vec![1];
        w.extend(std::iter::repeat_n(self.hidden_width, self.layers - 1));
        w.push(2);
        w
    }
}

/// Trainable parameters. `theta0[l]` and `theta1[l]` are the self and
/// aggregate weights of layer `l + 1`, shaped `widths[l] x widths[l+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnParams {
    pub widths: Vec<usize>,
    pub leaky_slope: f64,
    pub theta0: Vec<Array2<f64>>,
    pub theta1: Vec<Array2<f64>>,
}

impl GnnParams {
    /// Uniform init scaled by fan-in: every weight is drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(cfg: &GnnConfig, seed: u64) -> Self {
        let widths = cfg.widths();
        let mut rng = stream_rng(seed, "gnn-init", &[]);
        let mut draw = |rows: usize, cols: usize| -> Array2<f64> {
            let bound = 1.0 / (rows as f64).sqrt();
            let mut m = Array2::zeros((rows, cols));
            for r in 0..rows {
                for c in 0..cols {
                    m[[r, c]] = rng.random_range(-bound..bound);
                }
            }
            m
        };
        let mut theta0 = Vec::new();
        let mut theta1 = Vec::new();
        for l in 0..widths.len() - 1 {
            theta0.push(draw(widths[l], widths[l + 1]));
            theta1.push(draw(widths[l], widths[l + 1]));
        }
        GnnParams {
            widths,
            leaky_slope: cfg.leaky_slope,
            theta0,
            theta1,
        }
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.theta0
            .iter()
            .chain(&self.theta1)
            .map(|m| m.len())
            .sum()
    }
}

/// Predicted duty cycle per link and its softmax complement.
#[derive(Clone, Debug, PartialEq)]
pub struct DutyCycles {
    values: Vec<f64>,
    complements: Vec<f64>,
}

impl DutyCycles {
    /// Builds from raw values; complements are `1 - value`.
    pub fn from_values(values: Vec<f64>) -> Self {
        let complements = values.iter().map(|v| 1.0 - v).collect();
        DutyCycles {
            values,
            complements,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, link: usize) -> f64 {
        self.values[link]
    }

    pub fn complement(&self, link: usize) -> f64 {
        self.complements[link]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    /// `X^0 .. X^{L-1}`.
    pub inputs: Vec<Array2<f64>>,
    /// `L X^0 .. L X^{L-1}`.
    pub aggregates: Vec<Array2<f64>>,
    /// Pre-activations `Z^1 .. Z^L`.
    pub preacts: Vec<Array2<f64>>,
    /// `X^L` after the output softmax.
    pub output: Array2<f64>,
}

// Fixed-order matrix product: rows outer, summation index ascending.
// Deliberately not BLAS so every row equals the row-local computation.
fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        let mut row = out.row_mut(i);
        accumulate_row(a.row(i), b, &mut row);
    }
    out
}

fn row_matmul(row: ArrayView1<f64>, b: ArrayView2<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(b.ncols());
    accumulate_row(row, b, &mut out.view_mut());
    out
}

fn accumulate_row(
    a_row: ArrayView1<f64>,
    b: ArrayView2<f64>,
    out: &mut ndarray::ArrayViewMut1<f64>,
) {
    for k in 0..a_row.len() {
        let aik = a_row[k];
        for j in 0..b.ncols() {
            out[j] += aik * b[[k, j]];
        }
    }
}

fn leaky_relu_row(row: &mut ndarray::ArrayViewMut1<f64>, slope: f64) {
    for v in row.iter_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

fn softmax_row(row: &mut ndarray::ArrayViewMut1<f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Full forward pass over the conflict graph.
pub fn forward(params: &GnnParams, lap: &NormalizedLaplacian) -> ForwardCache {
    let layers = params.layers();
    let mut x = Array2::ones((lap.dim(), params.widths[0]));
    let mut inputs = Vec::with_capacity(layers);
    let mut aggregates = Vec::with_capacity(layers);
    let mut preacts = Vec::with_capacity(layers);
    for l in 0..layers {
        let agg = lap.apply(&x);
        let mut z = matmul(x.view(), params.theta0[l].view());
        z += &matmul(agg.view(), params.theta1[l].view());
        inputs.push(x);
        aggregates.push(agg);
        let mut activated = z.clone();
        for i in 0..activated.nrows() {
            let mut row = activated.row_mut(i);
            if l + 1 < layers {
                leaky_relu_row(&mut row, params.leaky_slope);
            } else {
                softmax_row(&mut row);
            }
        }
        preacts.push(z);
        x = activated;
    }
    ForwardCache {
        inputs,
        aggregates,
        preacts,
        output: x,
    }
}

/// Forward pass then duty-cycle extraction (output columns 0 and 1).
pub fn predict(params: &GnnParams, lap: &NormalizedLaplacian) -> DutyCycles {
    let cache = forward(params, lap);
    DutyCycles {
        values: cache.output.column(0).to_vec(),
        complements: cache.output.column(1).to_vec(),
    }
}

/// One vertex's view of its neighborhood for a single layer: its own
/// previous-layer features and degree, and each conflicting vertex's
/// features and degree in ascending vertex-id order.
pub struct LocalNeighborhood<'a> {
    pub own: ArrayView1<'a, f64>,
    pub own_degree: usize,
    /// `(features, degree)` per neighbor, ascending by vertex id.
    pub neighbors: Vec<(ArrayView1<'a, f64>, usize)>,
}

/// Computes one row of layer `layer` (0-based) from purely local
/// information. Matches the corresponding row of [`forward`] exactly:
/// same coefficients, same summation order, same activation.
pub fn forward_local(params: &GnnParams, layer: usize, nb: &LocalNeighborhood) -> Array1<f64> {
    let width = nb.own.len();
    let mut agg = Array1::zeros(width);
    if nb.own_degree > 0 {
        agg.assign(&nb.own);
        for (feat, deg) in &nb.neighbors {
            let c = laplacian_coeff(nb.own_degree, *deg);
            for col in 0..width {
                agg[col] -= c * feat[col];
            }
        }
    }
    let mut z = row_matmul(nb.own, params.theta0[layer].view());
    z += &row_matmul(agg.view(), params.theta1[layer].view());
    let mut view = z.view_mut();
    if layer + 1 < params.layers() {
        leaky_relu_row(&mut view, params.leaky_slope);
    } else {
        softmax_row(&mut view);
    }
    z
}

/// Mean squared residual per vertex row: `|X - Y|_F^2 / rows`.
pub fn loss(output: &Array2<f64>, target: &Array2<f64>) -> f64 {
    assert_eq!(output.dim(), target.dim());
    let rows = output.nrows().max(1) as f64;
    output
        .iter()
        .zip(target.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / rows
}

/// Gradient of [`loss`] with respect to the output.
pub fn loss_grad(output: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    assert_eq!(output.dim(), target.dim());
    let rows = output.nrows().max(1) as f64;
    let mut g = output - target;
    g.mapv_inplace(|v| 2.0 * v / rows);
    g
}

/// Parameter gradients, same shapes as [`GnnParams`].
#[derive(Clone, Debug)]
pub struct GnnGradients {
    pub theta0: Vec<Array2<f64>>,
    pub theta1: Vec<Array2<f64>>,
}

impl GnnGradients {
    pub fn zeros_like(params: &GnnParams) -> Self {
        GnnGradients {
            theta0: params.theta0.iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
            theta1: params.theta1.iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &GnnGradients, factor: f64) {
        for (a, b) in self.theta0.iter_mut().zip(&other.theta0) {
            a.zip_mut_with(b, |x, y| *x += factor * y);
        }
        for (a, b) in self.theta1.iter_mut().zip(&other.theta1) {
            a.zip_mut_with(b, |x, y| *x += factor * y);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.theta0
            .iter()
            .chain(&self.theta1)
            .flat_map(|m| m.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Reverse-mode gradients for one tuple, from the cached forward pass and
/// the loss gradient at the output.
pub fn backward(
    params: &GnnParams,
    lap: &NormalizedLaplacian,
    cache: &ForwardCache,
    output_grad: &Array2<f64>,
) -> GnnGradients {
    let layers = params.layers();
    let mut grads = GnnGradients::zeros_like(params);
    let mut g = output_grad.clone();
    for l in (0..layers).rev() {
        let dz = if l + 1 == layers {
            softmax_backward(&cache.output, &g)
        } else {
            leaky_relu_backward(&cache.preacts[l], &g, params.leaky_slope)
        };
        grads.theta0[l] = matmul(cache.inputs[l].t(), dz.view());
        grads.theta1[l] = matmul(cache.aggregates[l].t(), dz.view());
        if l > 0 {
            let mut back = matmul(dz.view(), params.theta0[l].t());
            // The Laplacian is symmetric, so its transpose is itself.
            back += &lap.apply(&matmul(dz.view(), params.theta1[l].t()));
            g = back;
        }
    }
    grads
}

fn softmax_backward(softmax_out: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut dz = Array2::zeros(grad.raw_dim());
    for i in 0..grad.nrows() {
        let s = softmax_out.row(i);
        let g = grad.row(i);
        let dot: f64 = (0..s.len()).map(|j| g[j] * s[j]).sum();
        for j in 0..s.len() {
            dz[[i, j]] = s[j] * (g[j] - dot);
        }
    }
    dz
}

fn leaky_relu_backward(preact: &Array2<f64>, grad: &Array2<f64>, slope: f64) -> Array2<f64> {
    let mut dz = grad.clone();
    dz.zip_mut_with(preact, |g, &z| {
        if z < 0.0 {
            *g *= slope;
        }
    });
    dz
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: GnnGradients,
    v: GnnGradients,
    step: u64,
}

impl AdamState {
    pub fn new(params: &GnnParams) -> Self {
        AdamState {
            m: GnnGradients::zeros_like(params),
            v: GnnGradients::zeros_like(params),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut GnnParams,
    grads: &GnnGradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let m_corr = 1.0 - cfg.beta1.powi(t);
    let v_corr = 1.0 - cfg.beta2.powi(t);
    let update = |p: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>| {
        for ((p, &g), (m, v)) in p
            .iter_mut()
            .zip(g.iter())
            .zip(m.iter_mut().zip(v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / m_corr;
            let v_hat = *v / v_corr;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    };
    for l in 0..params.theta0.len() {
        update(
            &mut params.theta0[l],
            &grads.theta0[l],
            &mut state.m.theta0[l],
            &mut state.v.theta0[l],
        );
        update(
            &mut params.theta1[l],
            &grads.theta1[l],
            &mut state.m.theta1[l],
            &mut state.v.theta1[l],
        );
    }
}

// --- checkpoint serialization ---------------------------------------------

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    version: u32,
    widths: Vec<usize>,
    leaky_slope: f64,
    /// Row-major matrices, one per layer.
    theta0: Vec<Vec<Vec<f64>>>,
    theta1: Vec<Vec<Vec<f64>>>,
}

fn matrices_to_rows(ms: &[Array2<f64>]) -> Vec<Vec<Vec<f64>>> {
    ms.iter()
        .map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect())
        .collect()
}

fn rows_to_matrices(rows: &[Vec<Vec<f64>>], shapes: &[(usize, usize)]) -> Result<Vec<Array2<f64>>> {
    if rows.len() != shapes.len() {
        return Err(Error::MalformedArtifact {
            kind: "checkpoint",
            detail: format!("expected {} layers, got {}", shapes.len(), rows.len()),
        });
    }
    rows.iter()
        .zip(shapes)
        .map(|(m, &(r, c))| {
            if m.len() != r || m.iter().any(|row| row.len() != c) {
                return Err(Error::MalformedArtifact {
                    kind: "checkpoint",
                    detail: format!("layer shape mismatch, expected {r}x{c}"),
                });
            }
            let flat: Vec<f64> = m.iter().flatten().copied().collect();
            Array2::from_shape_vec((r, c), flat).map_err(|e| Error::MalformedArtifact {
                kind: "checkpoint",
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Serializes parameters as versioned JSON. Weights survive the round
/// trip bit-exactly.
pub fn checkpoint_to_json(params: &GnnParams) -> Result<String> {
    let rec = CheckpointRecord {
        version: CHECKPOINT_VERSION,
        widths: params.widths.clone(),
        leaky_slope: params.leaky_slope,
        theta0: matrices_to_rows(&params.theta0),
        theta1: matrices_to_rows(&params.theta1),
    };
    Ok(serde_json::to_string(&rec)?)
}

pub fn checkpoint_from_json(s: &str) -> Result<GnnParams> {
    let rec: CheckpointRecord = serde_json::from_str(s)?;
    if rec.version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            got: rec.version,
            supported: CHECKPOINT_VERSION,
        });
    }
    if rec.widths.len() < 2 || rec.widths[0] != 1 || *rec.widths.last().unwrap() != 2 {
        return Err(Error::MalformedArtifact {
            kind: "checkpoint",
            detail: format!("bad widths {:?}", rec.widths),
        });
    }
    let shapes: Vec<(usize, usize)> = rec
        .widths
        .windows(2)
        .map(|w| (w[0], w[1]))
        .collect();
    Ok(GnnParams {
        theta0: rows_to_matrices(&rec.theta0, &shapes)?,
        theta1: rows_to_matrices(&rec.theta1, &shapes)?,
        widths: rec.widths,
        leaky_slope: rec.leaky_slope,
    })
}

pub fn save_checkpoint(path: &std::path::Path, params: &GnnParams) -> Result<()> {
    std::fs::write(path, checkpoint_to_json(params)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<GnnParams> {
    checkpoint_from_json(&std::fs::read_to_string(path)?)
}
