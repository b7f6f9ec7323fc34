//! Per-weight importance estimators.
//!
//! Four estimators are implemented, all producing values aligned 1:1
//! with the network parameters:
//!
//! - **FIS**: diagonal empirical Fisher information, the per-sample
//!   squared gradient of the log-probability of the labeled output,
//!   averaged over the dataset.
//! - **MAS**: the per-sample absolute gradient of the squared L2 norm
//!   of the softmax outputs, averaged over the dataset.
//! - **SI**: an online path integral accumulated during training
//!   (`-gradient * applied update`, per step), normalized at the task
//!   boundary by the squared total displacement plus a damping term.
//! - **SIG**: the total absolute signal passed through each connection:
//!   `sum_k |a_i * w_ij|` for a weight fed by activation `a_i`, and
//!   `N * |b|` for a bias (the bias sees a unit input every sample).
//!
//! FIS and MAS need per-sample gradients. For a dense layer the
//! per-sample weight gradient is the outer product of that sample's
//! input activation row and pre-activation delta row, so the per-sample
//! square/abs factorizes: `(a_i dz_j)^2 = a_i^2 dz_j^2` and
//! `|a_i dz_j| = |a_i| |dz_j|`. Both estimators therefore reduce to one
//! matrix product over transformed activation/delta matrices per layer
//! and run at the cost of a single batched backward pass; the oracle
//! tests check them against plain per-sample finite differences.

use alloc::vec::Vec;
use core::fmt;

use crate::data::TaskDataset;
use crate::error::{Error, Result};
use crate::nn::{forward, layer_deltas, NetworkParams, Objective};

/// Damping added to the squared displacement in the SI normalizer.
pub const SI_XI: f64 = 1e-3;

/// Chunk size for streaming a dataset through forward/backward passes.
const CHUNK: usize = 512;

/// The importance estimator that produced a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Fis,
    Mas,
    Si,
    Sig,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fis, Method::Mas, Method::Si, Method::Sig];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Fis => "FIS",
            Method::Mas => "MAS",
            Method::Si => "SI",
            Method::Sig => "SIG",
        }
    }

    /// Parses the (case-insensitive) estimator name.
    pub fn parse(s: &str) -> Option<Method> {
        let mut buf = [0u8; 8];
        let bytes = s.as_bytes();
        if bytes.len() > buf.len() {
            return None;
        }
        for (i, b) in bytes.iter().enumerate() {
            buf[i] = b.to_ascii_lowercase();
        }
        match &buf[..bytes.len()] {
            b"fis" => Some(Method::Fis),
            b"mas" => Some(Method::Mas),
            b"si" => Some(Method::Si),
            b"sig" => Some(Method::Sig),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which estimators an experiment records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSelection {
    pub fis: bool,
    pub mas: bool,
    pub si: bool,
    pub sig: bool,
}

impl MethodSelection {
    pub const ALL: MethodSelection = MethodSelection { fis: true, mas: true, si: true, sig: true };

    pub fn contains(&self, method: Method) -> bool {
        match method {
            Method::Fis => self.fis,
            Method::Mas => self.mas,
            Method::Si => self.si,
            Method::Sig => self.sig,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Method> + '_ {
        Method::ALL.into_iter().filter(|m| self.contains(*m))
    }
}

impl Default for MethodSelection {
    fn default() -> Self {
        Self::ALL
    }
}

/// Per-parameter importance values, shaped exactly like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMap {
    pub method: Method,
    /// Set when the values have been squared elementwise ([`square_map`]).
    pub squared: bool,
    /// Task after which the map was computed.
    pub task_index: usize,
    pub values: NetworkParams,
}

impl ImportanceMap {
    pub fn zeros_like(params: &NetworkParams, method: Method) -> Self {
        Self { method, squared: false, task_index: 0, values: params.zeros_like() }
    }

    pub fn all_finite(&self) -> bool {
        self.values.all_finite()
    }
}

fn require_nonempty(dataset: &TaskDataset, what: &'static str) -> Result<()> {
    if dataset.is_empty() {
        Err(Error::EmptyDataset(what))
    } else {
        Ok(())
    }
}

/// Streams the dataset through forward + delta backprop and folds the
/// per-sample outer products into `out` using the given elementwise
/// transforms of activations and deltas.
fn fold_per_sample_grads(
    params: &NetworkParams,
    dataset: &TaskDataset,
    kind: ObjectiveKind,
    transform_act: impl Fn(f64) -> f64,
    transform_delta: impl Fn(f64) -> f64,
) -> Result<NetworkParams> {
    let mut out = params.zeros_like();
    let n = dataset.inputs.rows();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let chunk_inputs = dataset.inputs.gather_rows(&indices);
        let chunk_labels = &dataset.labels[start..end];
        let trace = forward(params, &chunk_inputs)?;
        let objective = match kind {
            ObjectiveKind::LogLabeledProb => Objective::LogLabeledProb { labels: chunk_labels },
            ObjectiveKind::SquaredOutputNorm => Objective::SquaredOutputNorm,
        };
        let deltas = layer_deltas(params, &trace, &objective)?;
        for (l, dz) in deltas.iter().enumerate() {
            let act = if l == 0 { trace.input() } else { trace.post(l - 1) };
            let act_t = act.map(&transform_act);
            let dz_t = dz.map(&transform_delta);
            let layer_out = &mut out.layers_mut()[l];
            let contribution = act_t.tr_matmul(&dz_t);
            for (o, &c) in layer_out.weights.data_mut().iter_mut().zip(contribution.data()) {
                *o += c;
            }
            for (o, c) in layer_out.bias.iter_mut().zip(dz_t.col_sums()) {
                *o += c;
            }
        }
        start = end;
    }
    out.scale(1.0 / n as f64);
    Ok(out)
}

#[derive(Clone, Copy)]
enum ObjectiveKind {
    LogLabeledProb,
    SquaredOutputNorm,
}

/// Diagonal empirical Fisher information at the current parameters:
/// `F_i = (1/N) sum_k (d ln p_k / d theta_i)^2` where `p_k` is the
/// softmax output at the labeled class of sample `k`.
pub fn compute_fis(params: &NetworkParams, dataset: &TaskDataset) -> Result<ImportanceMap> {
    require_nonempty(dataset, "compute_fis")?;
    let values =
        fold_per_sample_grads(params, dataset, ObjectiveKind::LogLabeledProb, |a| a * a, |d| d * d)?;
    Ok(ImportanceMap { method: Method::Fis, squared: false, task_index: dataset.task_index, values })
}

/// MAS importance: `Omega_i = (1/N) sum_k |d (sum_j p_kj^2) / d theta_i|`,
/// the mean absolute per-sample gradient of the squared output norm.
pub fn compute_mas(params: &NetworkParams, dataset: &TaskDataset) -> Result<ImportanceMap> {
    require_nonempty(dataset, "compute_mas")?;
    let values =
        fold_per_sample_grads(params, dataset, ObjectiveKind::SquaredOutputNorm, f64::abs, f64::abs)?;
    Ok(ImportanceMap { method: Method::Mas, squared: false, task_index: dataset.task_index, values })
}

/// SIG importance: for a weight, the total absolute signal crossing it
/// over the dataset, `sum_k |a_i^(k) w_ij| = |w_ij| * sum_k |a_i^(k)|`;
/// for a bias, `N * |b|`.
pub fn compute_sig(params: &NetworkParams, dataset: &TaskDataset) -> Result<ImportanceMap> {
    require_nonempty(dataset, "compute_sig")?;
    let n = dataset.inputs.rows();
    // Per-layer column sums of |input activation| over the whole dataset.
    let mut abs_in: Vec<Vec<f64>> =
        params.layers().iter().map(|l| alloc::vec![0.0; l.fan_in()]).collect();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let chunk = dataset.inputs.gather_rows(&indices);
        let trace = forward(params, &chunk)?;
        for (l, sums) in abs_in.iter_mut().enumerate() {
            let act = if l == 0 { trace.input() } else { trace.post(l - 1) };
            for r in 0..act.rows() {
                for (s, &a) in sums.iter_mut().zip(act.row(r)) {
                    *s += a.abs();
                }
            }
        }
        start = end;
    }
    let mut values = params.zeros_like();
    for (l, layer) in params.layers().iter().enumerate() {
        let out_layer = &mut values.layers_mut()[l];
        let fan_out = layer.fan_out();
        let in_rows = layer.weights.data().chunks_exact(fan_out);
        let out_rows = out_layer.weights.data_mut().chunks_exact_mut(fan_out);
        for ((w_row, o_row), &signal) in in_rows.zip(out_rows).zip(&abs_in[l]) {
            for (o, &w) in o_row.iter_mut().zip(w_row) {
                *o = signal * w.abs();
            }
        }
        for (o, &b) in out_layer.bias.iter_mut().zip(&layer.bias) {
            *o = n as f64 * b.abs();
        }
    }
    Ok(ImportanceMap { method: Method::Sig, squared: false, task_index: dataset.task_index, values })
}

/// Online accumulator for the SI path integral. Owned by the training
/// loop; fed once per optimizer step, finalized once per task.
#[derive(Debug, Clone)]
pub struct SiAccumulator {
    omega: NetworkParams,
    theta_start: NetworkParams,
}

impl SiAccumulator {
    /// Starts accumulation at the given task-start parameters.
    pub fn new(params: &NetworkParams) -> Self {
        Self { omega: params.zeros_like(), theta_start: params.clone() }
    }

    /// Records one optimizer step: `omega_i += -grad_i * delta_i`.
    ///
    /// `task_grad` is the task-loss gradient at the pre-step parameters
    /// (the EWC penalty term excluded); `delta` is the update actually
    /// applied to the parameters.
    pub fn step(&mut self, task_grad: &NetworkParams, delta: &NetworkParams) -> Result<()> {
        self.omega.zip2_apply(task_grad, delta, |w, g, d| *w -= g * d)
    }

    /// Closes the task: `Omega_i = omega_i / ((theta_end_i - theta_start_i)^2 + xi)`,
    /// then resets the accumulator so the next task starts at `params_end`.
    ///
    /// SI values can be negative (stochastic steps may move against the
    /// gradient); they are kept raw.
    pub fn finalize(
        &mut self,
        params_end: &NetworkParams,
        task_index: usize,
        xi: f64,
    ) -> Result<ImportanceMap> {
        let mut values = self.omega.clone();
        let displacement = params_end.binary_map(&self.theta_start, |end, start| end - start)?;
        values.zip_apply(&displacement, |w, d| *w /= d * d + xi)?;
        self.omega = params_end.zeros_like();
        self.theta_start = params_end.clone();
        Ok(ImportanceMap { method: Method::Si, squared: false, task_index, values })
    }

    #[cfg(test)]
    pub(crate) fn omega(&self) -> &NetworkParams {
        &self.omega
    }
}

/// Elementwise sum of two maps of the same estimator; the result carries
/// the newer task index.
pub fn accumulate(prior: &ImportanceMap, new: &ImportanceMap) -> Result<ImportanceMap> {
    if prior.method != new.method {
        return Err(Error::MethodMismatch { expected: prior.method, found: new.method });
    }
    if prior.squared != new.squared {
        return Err(Error::InvalidArgument(alloc::format!(
            "cannot accumulate a squared and an unsquared {} map",
            prior.method
        )));
    }
    let values = prior.values.binary_map(&new.values, |a, b| a + b)?;
    Ok(ImportanceMap {
        method: new.method,
        squared: new.squared,
        task_index: new.task_index,
        values,
    })
}

/// Elementwise square, keeping the estimator tag and marking the map as
/// squared.
pub fn square_map(map: &ImportanceMap) -> ImportanceMap {
    ImportanceMap {
        method: map.method,
        squared: true,
        task_index: map.task_index,
        values: map.values.map(|v| v * v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use crate::nn::LayerParams;
    use alloc::vec;

    fn single_layer_net(weights: DenseMatrix) -> NetworkParams {
        let bias = vec![0.0; weights.cols()];
        NetworkParams::from_layers(vec![LayerParams { weights, bias }]).unwrap()
    }

    #[test]
    fn fis_is_zero_when_outputs_saturate_to_the_label() {
        // Logit gap so large the softmax saturates to exactly (1, 0):
        // the log-likelihood is stationary and every importance is 0.
        let params = single_layer_net(DenseMatrix::from_vec(1, 2, vec![800.0, -800.0]).unwrap());
        let data = TaskDataset::raw(DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(), vec![0]);
        let fis = compute_fis(&params, &data).unwrap();
        for v in fis.values.param_iter() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn fis_sigmoid_closed_form() {
        // Two-class softmax with logits (w*x, 0) is sigma(w*x); at w = 0,
        // x = 1, labeled class 0: F_w = (x * (1 - p))^2 = 0.25.
        let params = single_layer_net(DenseMatrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap());
        let data = TaskDataset::raw(DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(), vec![0]);
        let fis = compute_fis(&params, &data).unwrap();
        let w_importance = fis.values.layers()[0].weights[(0, 0)];
        assert!((w_importance - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fis_is_invariant_to_duplicating_samples() {
        let params = NetworkParams::init(&[3, 4, 2], 8).unwrap();
        let inputs = DenseMatrix::from_vec(2, 3, vec![0.2, -0.5, 1.0, 0.8, 0.1, -0.3]).unwrap();
        let data = TaskDataset::raw(inputs.clone(), vec![0, 1]);
        let doubled_inputs = DenseMatrix::from_vec(
            4,
            3,
            inputs.data().iter().chain(inputs.data()).copied().collect(),
        )
        .unwrap();
        let doubled = TaskDataset::raw(doubled_inputs, vec![0, 1, 0, 1]);
        let a = compute_fis(&params, &data).unwrap();
        let b = compute_fis(&params, &doubled).unwrap();
        for (x, y) in a.values.param_iter().zip(b.values.param_iter()) {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-30);
            assert!(rel < 1e-12, "x={x} y={y}");
        }
    }

    #[test]
    fn mas_bias_importance_vanishes_at_uniform_outputs() {
        let params = NetworkParams::zeros(&[3, 4]).unwrap();
        let data = TaskDataset::raw(
            DenseMatrix::from_vec(2, 3, vec![0.3, 0.6, 0.9, 0.1, 0.0, 0.5]).unwrap(),
            vec![0, 1],
        );
        let mas = compute_mas(&params, &data).unwrap();
        for &b in &mas.values.layers()[0].bias {
            assert_eq!(b, 0.0);
        }
    }

    #[test]
    fn mas_vanishes_at_symmetric_two_class_point() {
        // Output vector (p, 1-p) with p = sigma(w) at w = 0: sum p^2 is
        // stationary, so the single weight's importance is 0.
        let params = single_layer_net(DenseMatrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap());
        let data = TaskDataset::raw(DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(), vec![0]);
        let mas = compute_mas(&params, &data).unwrap();
        assert_eq!(mas.values.layers()[0].weights[(0, 0)], 0.0);
    }

    #[test]
    fn estimators_reject_empty_datasets() {
        let params = NetworkParams::zeros(&[2, 2]).unwrap();
        let empty = TaskDataset::raw(DenseMatrix::zeros(0, 2), vec![]);
        assert!(matches!(compute_fis(&params, &empty), Err(Error::EmptyDataset(_))));
        assert!(matches!(compute_mas(&params, &empty), Err(Error::EmptyDataset(_))));
        assert!(matches!(compute_sig(&params, &empty), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn si_step_semantics() {
        let params = NetworkParams::zeros(&[1, 2]).unwrap();
        let mut acc = SiAccumulator::new(&params);

        // Frozen step leaves omega unchanged.
        let grad = params.map(|_| -1.0);
        let zero_delta = params.zeros_like();
        acc.step(&grad, &zero_delta).unwrap();
        assert!(acc.omega().param_iter().all(|v| v == 0.0));

        // grad = -1, delta = +0.1 adds 0.1.
        let delta = params.map(|_| 0.1);
        acc.step(&grad, &delta).unwrap();
        for v in acc.omega().param_iter() {
            assert!((v - 0.1).abs() < 1e-15);
        }

        // A plain descent step contributes lr * g^2 >= 0.
        let g = params.map(|_| 0.7);
        let descent = g.map(|v| -0.05 * v);
        let before: alloc::vec::Vec<f64> = acc.omega().param_iter().collect();
        acc.step(&g, &descent).unwrap();
        for (after, before) in acc.omega().param_iter().zip(before) {
            let contribution = after - before;
            assert!((contribution - 0.05 * 0.7 * 0.7).abs() < 1e-15);
            assert!(contribution >= 0.0);
        }
    }

    #[test]
    fn si_finalize_formula_and_reset() {
        let start = NetworkParams::zeros(&[1, 1]).unwrap();
        let mut acc = SiAccumulator::new(&start);
        // One artificial step: omega = 0.1 on the single weight.
        let grad = start.map(|_| -1.0);
        let delta = start.map(|_| 0.1);
        acc.step(&grad, &delta).unwrap();

        let mut end = start.clone();
        end.layers_mut()[0].weights[(0, 0)] = 0.1;
        let map = acc.finalize(&end, 3, 1e-3).unwrap();
        let omega = map.values.layers()[0].weights[(0, 0)];
        assert!((omega - 0.1 / (0.01 + 1e-3)).abs() < 1e-12);
        assert_eq!(map.task_index, 3);

        // Reset: no movement in the next task gives an all-zero map.
        let map2 = acc.finalize(&end, 4, 1e-3).unwrap();
        assert!(map2.values.param_iter().all(|v| v == 0.0));
    }

    #[test]
    fn si_xi_monotonically_damps() {
        let start = NetworkParams::zeros(&[1, 1]).unwrap();
        let mut acc_small = SiAccumulator::new(&start);
        let mut acc_large = SiAccumulator::new(&start);
        let grad = start.map(|_| -1.0);
        let delta = start.map(|_| 0.2);
        acc_small.step(&grad, &delta).unwrap();
        acc_large.step(&grad, &delta).unwrap();
        let mut end = start.clone();
        end.layers_mut()[0].weights[(0, 0)] = 0.2;
        let small = acc_small.finalize(&end, 0, 1e-3).unwrap();
        let large = acc_large.finalize(&end, 0, 1e-1).unwrap();
        assert!(
            large.values.layers()[0].weights[(0, 0)] < small.values.layers()[0].weights[(0, 0)]
        );
    }

    #[test]
    fn sig_basics() {
        // Single layer, no hidden activations: the input is the signal.
        let weights = DenseMatrix::from_vec(1, 2, vec![0.5, 0.0]).unwrap();
        let params = single_layer_net(weights);
        // Four samples with sum_k |x_k| = 10.
        let inputs = DenseMatrix::from_vec(4, 1, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        let data = TaskDataset::raw(inputs, vec![0, 1, 0, 1]);
        let sig = compute_sig(&params, &data).unwrap();
        let w_map = &sig.values.layers()[0].weights;
        assert!((w_map[(0, 0)] - 5.0).abs() < 1e-12);
        assert_eq!(w_map[(0, 1)], 0.0);

        // Flipping a weight's sign leaves its SIG unchanged.
        let flipped = single_layer_net(DenseMatrix::from_vec(1, 2, vec![-0.5, 0.0]).unwrap());
        let sig_flipped = compute_sig(&flipped, &data).unwrap();
        assert_eq!(
            sig.values.layers()[0].weights[(0, 0)].to_bits(),
            sig_flipped.values.layers()[0].weights[(0, 0)].to_bits()
        );
    }

    #[test]
    fn sig_bias_rule() {
        let mut params = NetworkParams::zeros(&[1, 2]).unwrap();
        params.layers_mut()[0].bias[1] = -0.25;
        let data = TaskDataset::raw(DenseMatrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap(), vec![0, 0, 0]);
        let sig = compute_sig(&params, &data).unwrap();
        assert_eq!(sig.values.layers()[0].bias[0], 0.0);
        assert!((sig.values.layers()[0].bias[1] - 3.0 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn accumulate_identity_and_doubling() {
        let params = NetworkParams::init(&[2, 3], 1).unwrap();
        let data = TaskDataset::raw(
            DenseMatrix::from_vec(2, 2, vec![0.1, 0.9, 0.4, 0.2]).unwrap(),
            vec![0, 2],
        );
        let map = compute_mas(&params, &data).unwrap();
        let zeros = ImportanceMap::zeros_like(&params, Method::Mas);
        let same = accumulate(&zeros, &map).unwrap();
        assert_eq!(same.values, map.values);
        let double = accumulate(&map, &map).unwrap();
        for (d, m) in double.values.param_iter().zip(map.values.param_iter()) {
            assert_eq!(d, 2.0 * m);
        }
    }

    #[test]
    fn accumulate_rejects_method_mismatch() {
        let params = NetworkParams::zeros(&[2, 2]).unwrap();
        let a = ImportanceMap::zeros_like(&params, Method::Fis);
        let b = ImportanceMap::zeros_like(&params, Method::Mas);
        assert!(matches!(accumulate(&a, &b), Err(Error::MethodMismatch { .. })));
    }

    #[test]
    fn square_map_values_and_tag() {
        let params = NetworkParams::zeros(&[1, 3]).unwrap();
        let mut map = ImportanceMap::zeros_like(&params, Method::Mas);
        map.values.layers_mut()[0].weights.data_mut().copy_from_slice(&[0.0, 1.0, 2.0]);
        let sq = square_map(&map);
        assert_eq!(sq.values.layers()[0].weights.data(), &[0.0, 1.0, 4.0]);
        assert!(sq.squared);
        assert_eq!(sq.method, Method::Mas);
        assert!(sq.values.param_iter().all(|v| v >= 0.0));
    }
}
