//! Fully connected network: deterministic forward and backward passes.
//!
//! The network is a stack of dense layers with leakyReLU on every hidden
//! layer and a row-wise softmax on the output layer. Only the three scalar
//! objectives the pipeline needs are differentiated: cross-entropy, the
//! log-probability of the labeled output, and the squared L2 norm of the
//! outputs. Gradients are exact analytic derivatives of the objective
//! summed over the batch, and all batch reductions run in fixed index
//! order so identical inputs give bit-identical results.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::TaskDataset;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::Xoshiro256StarStar;

/// Layer widths used throughout the experiments: 784 inputs, two hidden
/// layers of 300 and 150 units, 10 output classes.
pub const DEFAULT_ARCHITECTURE: [usize; 4] = [784, 300, 150, 10];

/// Negative-side slope of the leakyReLU hidden activation.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_RELU_SLOPE * x
    }
}

#[inline]
fn leaky_relu_grad(pre: f64) -> f64 {
    if pre >= 0.0 {
        1.0
    } else {
        LEAKY_RELU_SLOPE
    }
}

/// Numerically stabilized softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = libm::exp(z - max);
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `-ln p[label]` for a probability vector already produced by a forward
/// pass. Indexing out of range is programmer error and panics.
pub fn cross_entropy(p: &[f64], label: usize) -> f64 {
    -libm::log(p[label])
}

/// One dense layer: weights are `fan_in x fan_out`, bias has `fan_out`
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weights: DenseMatrix::zeros(fan_in, fan_out), bias: vec![0.0; fan_out] }
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }
}

/// Per-layer weight matrices and bias vectors.
///
/// Besides the live network, this type doubles as the container for any
/// value that is shaped like the network: gradients and per-parameter
/// importance values. Shape invariants (adjacent layers chain, bias
/// lengths match) are validated on construction; `layers_mut` exposes the
/// values for in-place updates and must not be used to change shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<LayerParams>,
}

impl NetworkParams {
    /// Seeded initialization: each weight uniform on
    /// `[-sqrt(6/fan_in), +sqrt(6/fan_in)]`, biases zero. Draw order is
    /// canonical (layers in order, weights row-major) so a seed pins the
    /// network exactly.
    pub fn init(architecture: &[usize], seed: u64) -> Result<Self> {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(architecture.len().saturating_sub(1));
        if architecture.len() < 2 {
            return Err(Error::InvalidArgument(String::from(
                "architecture needs at least an input and an output width",
            )));
        }
        for w in architecture.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::InvalidArgument(String::from("layer widths must be nonzero")));
            }
            let limit = libm::sqrt(6.0 / fan_in as f64);
            let mut layer = LayerParams::zeros(fan_in, fan_out);
            for v in layer.weights.data_mut() {
                *v = rng.uniform_in(-limit, limit);
            }
            layers.push(layer);
        }
        Ok(Self { layers })
    }

    pub fn zeros(architecture: &[usize]) -> Result<Self> {
        let mut net = Self::init(architecture, 0)?;
        for layer in &mut net.layers {
            layer.weights.data_mut().fill(0.0);
        }
        Ok(net)
    }

    /// Wraps explicit layers, validating that adjacent shapes chain and
    /// bias lengths match.
    pub fn from_layers(layers: Vec<LayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(String::from("network needs at least one layer")));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::Dimension(format!(
                    "layer {i}: bias has {} entries, weights are {}x{}",
                    layer.bias.len(),
                    layer.fan_in(),
                    layer.fan_out()
                )));
            }
            if i + 1 < layers.len() && layer.fan_out() != layers[i + 1].fan_in() {
                return Err(Error::Dimension(format!(
                    "layer {i} has {} outputs but layer {} expects {} inputs",
                    layer.fan_out(),
                    i + 1,
                    layers[i + 1].fan_in()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    /// Layer widths, input first: `[784, 300, 150, 10]` for the default
    /// network.
    pub fn architecture(&self) -> Vec<usize> {
        let mut arch = Vec::with_capacity(self.layers.len() + 1);
        arch.push(self.layers[0].fan_in());
        arch.extend(self.layers.iter().map(|l| l.fan_out()));
        arch
    }

    #[inline]
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    #[inline]
    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access to the layer values. Shapes must be preserved.
    #[inline]
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.data().len() + l.bias.len()).sum()
    }

    pub fn congruent(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.shape() == b.weights.shape() && a.bias.len() == b.bias.len())
    }

    fn require_congruent(&self, other: &Self, what: &str) -> Result<()> {
        if self.congruent(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!("{what}: operand shapes are not congruent")))
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weights: l.weights.map(&mut f),
                    bias: l.bias.iter().map(|&b| f(b)).collect(),
                })
                .collect(),
        }
    }

    /// Applies `f(&mut self_value, other_value)` elementwise.
    pub fn zip_apply(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) -> Result<()> {
        self.require_congruent(other, "zip_apply")?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, &y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                f(x, y);
            }
            for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
                f(x, y);
            }
        }
        Ok(())
    }

    /// Applies `f(&mut self_value, a_value, b_value)` elementwise.
    pub fn zip2_apply(
        &mut self,
        a: &Self,
        b: &Self,
        mut f: impl FnMut(&mut f64, f64, f64),
    ) -> Result<()> {
        self.require_congruent(a, "zip2_apply")?;
        self.require_congruent(b, "zip2_apply")?;
        for ((dst, pa), pb) in self.layers.iter_mut().zip(&a.layers).zip(&b.layers) {
            for ((x, &u), &v) in dst
                .weights
                .data_mut()
                .iter_mut()
                .zip(pa.weights.data())
                .zip(pb.weights.data())
            {
                f(x, u, v);
            }
            for ((x, &u), &v) in dst.bias.iter_mut().zip(&pa.bias).zip(&pb.bias) {
                f(x, u, v);
            }
        }
        Ok(())
    }

    pub fn binary_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut out = self.clone();
        out.zip_apply(other, |x, y| *x = f(*x, y))?;
        Ok(out)
    }

    /// `self += c * other`, elementwise.
    pub fn add_scaled(&mut self, other: &Self, c: f64) -> Result<()> {
        self.zip_apply(other, |x, y| *x += c * y)
    }

    pub fn scale(&mut self, c: f64) {
        for layer in &mut self.layers {
            for v in layer.weights.data_mut() {
                *v *= c;
            }
            for v in &mut layer.bias {
                *v *= c;
            }
        }
    }

    /// Visits every parameter in canonical order (layers in order, weights
    /// row-major, then bias).
    pub fn param_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().copied().chain(l.bias.iter().copied()))
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

/// Everything the backward pass needs from a forward pass: the input
/// batch and each layer's pre- and post-activations. The last
/// post-activation holds the softmax outputs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: DenseMatrix,
    pre: Vec<DenseMatrix>,
    post: Vec<DenseMatrix>,
}

impl ForwardTrace {
    /// Softmax outputs, one row per sample.
    #[inline]
    pub fn outputs(&self) -> &DenseMatrix {
        self.post.last().expect("trace has at least one layer")
    }

    #[inline]
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    #[inline]
    pub fn input(&self) -> &DenseMatrix {
        &self.input
    }

    #[inline]
    pub fn pre(&self, layer: usize) -> &DenseMatrix {
        &self.pre[layer]
    }

    #[inline]
    pub fn post(&self, layer: usize) -> &DenseMatrix {
        &self.post[layer]
    }

    /// Activations feeding the given layer: the batch input for layer 0,
    /// the previous post-activation otherwise.
    #[inline]
    fn layer_input(&self, layer: usize) -> &DenseMatrix {
        if layer == 0 {
            &self.input
        } else {
            &self.post[layer - 1]
        }
    }

    /// Row-wise log-softmax of the output layer, computed directly from
    /// the pre-activations so small probabilities do not underflow.
    pub fn log_probs(&self) -> DenseMatrix {
        let logits = self.pre.last().expect("trace has at least one layer");
        let mut out = logits.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut sum = 0.0;
            for &z in row.iter() {
                sum += libm::exp(z - max);
            }
            let lse = max + libm::log(sum);
            for z in row.iter_mut() {
                *z -= lse;
            }
        }
        out
    }
}

/// Scalar objective differentiated by [`backward`]. Gradients are of the
/// objective summed over the batch.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `sum_k -ln p_k[label_k]`.
    CrossEntropy { labels: &'a [u8] },
    /// `sum_k ln p_k[label_k]`: the log-probability of the labeled output.
    LogLabeledProb { labels: &'a [u8] },
    /// `sum_k sum_j p_kj^2`: the squared L2 norm of the softmax outputs.
    SquaredOutputNorm,
}

impl Objective<'_> {
    fn check_labels(&self, batch: usize, classes: usize) -> Result<()> {
        let labels = match self {
            Objective::CrossEntropy { labels } | Objective::LogLabeledProb { labels } => labels,
            Objective::SquaredOutputNorm => return Ok(()),
        };
        if labels.len() != batch {
            return Err(Error::Dimension(format!(
                "objective has {} labels for a batch of {batch}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(())
    }
}

/// Runs the batch through the network, recording all intermediate
/// activations.
pub fn forward(params: &NetworkParams, batch: &DenseMatrix) -> Result<ForwardTrace> {
    let arch_in = params.layers()[0].fan_in();
    if batch.cols() != arch_in {
        return Err(Error::Dimension(format!(
            "forward: batch has {} columns but layer 0 expects {arch_in} inputs",
            batch.cols()
        )));
    }
    let depth = params.layer_count();
    let mut pre = Vec::with_capacity(depth);
    let mut post = Vec::with_capacity(depth);
    let mut current = batch;
    for (l, layer) in params.layers().iter().enumerate() {
        let mut z = current.matmul(&layer.weights);
        for r in 0..z.rows() {
            for (v, &b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        let a = if l + 1 == depth {
            let mut a = z.clone();
            for r in 0..a.rows() {
                let (logits, probs) = (z.row(r), a.row_mut(r));
                softmax_into(logits, probs);
            }
            a
        } else {
            z.map(leaky_relu)
        };
        pre.push(z);
        post.push(a);
        current = post.last().expect("just pushed");
    }
    Ok(ForwardTrace { input: batch.clone(), pre, post })
}

/// The objective's value on an existing trace.
pub fn objective_value(trace: &ForwardTrace, objective: &Objective<'_>) -> Result<f64> {
    let outputs = trace.outputs();
    objective.check_labels(trace.batch_size(), outputs.cols())?;
    match objective {
        Objective::CrossEntropy { labels } => {
            let logp = trace.log_probs();
            let mut sum = 0.0;
            for (k, &y) in labels.iter().enumerate() {
                sum -= logp[(k, y as usize)];
            }
            Ok(sum)
        }
        Objective::LogLabeledProb { labels } => {
            let logp = trace.log_probs();
            let mut sum = 0.0;
            for (k, &y) in labels.iter().enumerate() {
                sum += logp[(k, y as usize)];
            }
            Ok(sum)
        }
        Objective::SquaredOutputNorm => {
            Ok(outputs.data().iter().map(|&p| p * p).sum())
        }
    }
}

/// Gradient of the output-layer pre-activations, one row per sample.
fn output_delta(trace: &ForwardTrace, objective: &Objective<'_>) -> Result<DenseMatrix> {
    let probs = trace.outputs();
    objective.check_labels(trace.batch_size(), probs.cols())?;
    let mut dz = probs.clone();
    match objective {
        // d(-ln p[y])/dz = p - onehot(y), row by row.
        Objective::CrossEntropy { labels } => {
            for (k, &y) in labels.iter().enumerate() {
                dz[(k, y as usize)] -= 1.0;
            }
        }
        Objective::LogLabeledProb { labels } => {
            for r in 0..dz.rows() {
                for v in dz.row_mut(r) {
                    *v = -*v;
                }
            }
            for (k, &y) in labels.iter().enumerate() {
                dz[(k, y as usize)] += 1.0;
            }
        }
        // d(sum_j p_j^2)/dz_i = 2 p_i (p_i - sum_j p_j^2).
        Objective::SquaredOutputNorm => {
            for r in 0..dz.rows() {
                let row = dz.row_mut(r);
                let norm: f64 = row.iter().map(|&p| p * p).sum();
                for p in row.iter_mut() {
                    *p = 2.0 * *p * (*p - norm);
                }
            }
        }
    }
    Ok(dz)
}

/// Per-layer pre-activation gradients, back to front, starting from the
/// output delta. Row `k` of each matrix is the contribution of sample `k`
/// alone, which is what the importance estimators exploit.
pub(crate) fn layer_deltas(
    params: &NetworkParams,
    trace: &ForwardTrace,
    objective: &Objective<'_>,
) -> Result<Vec<DenseMatrix>> {
    let depth = params.layer_count();
    let mut deltas = vec![DenseMatrix::zeros(0, 0); depth];
    deltas[depth - 1] = output_delta(trace, objective)?;
    for l in (0..depth.saturating_sub(1)).rev() {
        let upstream = deltas[l + 1].matmul_tr(&params.layers()[l + 1].weights);
        let pre = &trace.pre[l];
        let mut dz = upstream;
        for r in 0..dz.rows() {
            for (v, &z) in dz.row_mut(r).iter_mut().zip(pre.row(r)) {
                *v *= leaky_relu_grad(z);
            }
        }
        deltas[l] = dz;
    }
    Ok(deltas)
}

/// Exact gradient of the objective (summed over the batch) with respect
/// to every weight and bias.
pub fn backward(
    params: &NetworkParams,
    trace: &ForwardTrace,
    objective: &Objective<'_>,
) -> Result<NetworkParams> {
    let deltas = layer_deltas(params, trace, objective)?;
    let mut grads = params.zeros_like();
    for (l, dz) in deltas.iter().enumerate() {
        let layer_in = trace.layer_input(l);
        let grad_layer = &mut grads.layers_mut()[l];
        grad_layer.weights = layer_in.tr_matmul(dz);
        grad_layer.bias = dz.col_sums();
    }
    Ok(grads)
}

/// Fraction of samples whose argmax output matches the label. Ties break
/// to the lowest class index. Evaluation is chunked so memory stays flat
/// on large datasets.
pub fn accuracy(params: &NetworkParams, dataset: &TaskDataset) -> Result<f64> {
    if dataset.inputs.rows() == 0 {
        return Err(Error::EmptyDataset("accuracy"));
    }
    const CHUNK: usize = 512;
    let n = dataset.inputs.rows();
    let mut correct = 0usize;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let chunk = dataset.inputs.gather_rows(&indices);
        let trace = forward(params, &chunk)?;
        let outputs = trace.outputs();
        for (r, &label) in dataset.labels[start..end].iter().enumerate() {
            let row = outputs.row(r);
            let mut best = 0usize;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            if best == label as usize {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / n as f64)
}
