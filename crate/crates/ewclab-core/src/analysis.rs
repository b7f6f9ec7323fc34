//! Per-layer, per-task correlation of importance maps.
//!
//! A correlation surface holds one Pearson coefficient per (layer, task)
//! cell: for each task, the two estimators' accumulated maps as of that
//! task are flattened per layer and correlated. Biases are excluded from
//! the layer vectors; the weight matrices dominate them by three orders
//! of magnitude on the default architecture, and "importance of weights"
//! is taken literally.
//!
//! Pearson is computed with a two-pass mean-then-moments reduction in
//! `f64`; importance values are heavy-tailed and a single-pass update
//! would lose precision to cancellation. A vector with zero variance has
//! no defined correlation, so those cells carry an explicit undefined
//! marker (`None`), never a silent zero.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::continual::ExperimentRecord;
use crate::error::{Error, Result};
use crate::importance::{square_map, ImportanceMap, Method};

/// One side of a surface pair: an estimator, optionally squared
/// elementwise before correlating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub method: Method,
    pub squared: bool,
}

impl MethodSpec {
    pub fn plain(method: Method) -> Self {
        Self { method, squared: false }
    }

    pub fn squared(method: Method) -> Self {
        Self { method, squared: true }
    }

    /// `"MAS"` or `"MAS^2"`.
    pub fn label(&self) -> String {
        if self.squared {
            format!("{}^2", self.method)
        } else {
            format!("{}", self.method)
        }
    }
}

/// Layers x tasks grid of Pearson coefficients for one method pair.
/// `cells[layer][task]` is `None` where the correlation is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    pub method_a: MethodSpec,
    pub method_b: MethodSpec,
    pub layer_names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl CorrelationSurface {
    pub fn layer_count(&self) -> usize {
        self.cells.len()
    }

    pub fn task_count(&self) -> usize {
        self.cells.first().map_or(0, |row| row.len())
    }

    /// Mean over all defined cells, `None` if every cell is undefined.
    pub fn mean_defined(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for row in &self.cells {
            for cell in row.iter().flatten() {
                sum += cell;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Mean over the defined cells of one layer.
    pub fn layer_mean(&self, layer: usize) -> Option<f64> {
        let row = self.cells.get(layer)?;
        let defined: Vec<f64> = row.iter().flatten().copied().collect();
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Pearson product-moment coefficient. Returns `Ok(None)` when either
/// vector has zero variance (the coefficient is undefined there), and an
/// error for mismatched lengths or fewer than two points.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "pearson needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs at least 2 points, got {}",
            x.len()
        )));
    }
    // A constant vector has zero variance regardless of rounding in the
    // mean; detect it directly rather than trusting the moment sum.
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return Ok(None);
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(None);
    }
    // Rounding can push |r| epsilon past 1; clamp to the legal range.
    Ok(Some((cov / libm::sqrt(var_x * var_y)).clamp(-1.0, 1.0)))
}

/// Fractional ranks with ties averaged, the usual Spearman prelude.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a tied run shares the average rank.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson over average-tie ranks.
///
/// Not part of the standard report (the reference analysis correlates
/// raw values); exposed as an optional extra because rank correlation is
/// insensitive to the heavy tails importance values tend to have.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "spearman needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spearman needs at least 2 points, got {}",
            x.len()
        )));
    }
    pearson(&ranks(x), &ranks(y))
}

fn layer_vectors<'a>(
    a: &'a ImportanceMap,
    b: &'a ImportanceMap,
    layer: usize,
) -> Result<(&'a [f64], &'a [f64])> {
    if !a.values.congruent(&b.values) {
        return Err(Error::Dimension("layer_correlation: maps are not congruent".into()));
    }
    let layers = a.values.layer_count();
    if layer >= layers {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range for a {layers}-layer network"
        )));
    }
    Ok((a.values.layers()[layer].weights.data(), b.values.layers()[layer].weights.data()))
}

/// Pearson over one layer's flattened weight matrix (biases excluded).
pub fn layer_correlation(
    a: &ImportanceMap,
    b: &ImportanceMap,
    layer: usize,
) -> Result<Option<f64>> {
    let (va, vb) = layer_vectors(a, b, layer)?;
    pearson(va, vb)
}

/// The pairs reported by the standard experiment: the six unordered
/// estimator pairs plus FIS against squared MAS.
pub fn standard_pairs() -> Vec<(MethodSpec, MethodSpec)> {
    use Method::*;
    alloc::vec![
        (MethodSpec::plain(Mas), MethodSpec::plain(Fis)),
        (MethodSpec::plain(Mas), MethodSpec::plain(Si)),
        (MethodSpec::plain(Mas), MethodSpec::plain(Sig)),
        (MethodSpec::plain(Fis), MethodSpec::plain(Si)),
        (MethodSpec::plain(Fis), MethodSpec::plain(Sig)),
        (MethodSpec::plain(Si), MethodSpec::plain(Sig)),
        (MethodSpec::plain(Fis), MethodSpec::squared(Mas)),
    ]
}

/// Builds the layers x tasks surface for a method pair from the record's
/// accumulated maps.
pub fn build_surface(
    record: &ExperimentRecord,
    pair: (MethodSpec, MethodSpec),
) -> Result<CorrelationSurface> {
    build_surface_impl(record, pair, false)
}

/// [`build_surface`] with Spearman cells instead of Pearson. An optional
/// extra, outside the standard report.
pub fn build_surface_spearman(
    record: &ExperimentRecord,
    pair: (MethodSpec, MethodSpec),
) -> Result<CorrelationSurface> {
    build_surface_impl(record, pair, true)
}

fn build_surface_impl(
    record: &ExperimentRecord,
    pair: (MethodSpec, MethodSpec),
    use_ranks: bool,
) -> Result<CorrelationSurface> {
    let (spec_a, spec_b) = pair;
    let maps_a = record.accumulated_maps(spec_a.method);
    let maps_b = record.accumulated_maps(spec_b.method);
    if maps_a.len() != record.num_tasks {
        return Err(Error::InvalidArgument(format!(
            "record does not contain {} maps for all tasks",
            spec_a.method
        )));
    }
    if maps_b.len() != record.num_tasks {
        return Err(Error::InvalidArgument(format!(
            "record does not contain {} maps for all tasks",
            spec_b.method
        )));
    }
    let layers = record.architecture.len() - 1;
    let mut cells = alloc::vec![Vec::with_capacity(record.num_tasks); layers];
    for t in 0..record.num_tasks {
        let map_a =
            if spec_a.squared { square_map(&maps_a[t]) } else { maps_a[t].clone() };
        let map_b =
            if spec_b.squared { square_map(&maps_b[t]) } else { maps_b[t].clone() };
        for (l, row) in cells.iter_mut().enumerate() {
            let (va, vb) = layer_vectors(&map_a, &map_b, l)?;
            row.push(if use_ranks { spearman(va, vb)? } else { pearson(va, vb)? });
        }
    }
    let layer_names = (1..=layers).map(|l| format!("layer {l}")).collect();
    Ok(CorrelationSurface { method_a: spec_a, method_b: spec_b, layer_names, cells })
}
