//! Permuted-task construction.
//!
//! A task sequence applies a fresh random pixel permutation to a source
//! image dataset, one permutation per task, with train and test splits
//! permuted identically. Materialized task inputs are large (a full-size
//! permuted train split is hundreds of MB as `f64`), so [`TaskSequence`]
//! stores the source data once plus the per-task permutations and builds
//! each [`TaskDataset`] on request; repeated requests for the same task
//! are bit-identical.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{mix64, Xoshiro256StarStar};

/// One permuted task: inputs scaled to `[0, 1]`, class labels, and the
/// permutation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub inputs: DenseMatrix,
    pub labels: Vec<u8>,
    pub task_index: usize,
    pub permutation: Vec<u32>,
    pub seed: u64,
}

impl TaskDataset {
    /// Wraps already-prepared inputs and labels as a task with the
    /// identity permutation. Mostly useful for evaluation helpers and
    /// tests that do not care about the permutation bookkeeping.
    pub fn raw(inputs: DenseMatrix, labels: Vec<u8>) -> Self {
        let width = inputs.cols() as u32;
        Self {
            inputs,
            labels,
            task_index: 0,
            permutation: (0..width).collect(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A task's train and test splits, permuted by the same permutation.
#[derive(Debug, Clone)]
pub struct Task {
    pub train: TaskDataset,
    pub test: TaskDataset,
}

/// The unpermuted source dataset, already scaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SourceData {
    pub train_inputs: DenseMatrix,
    pub train_labels: Vec<u8>,
    pub test_inputs: DenseMatrix,
    pub test_labels: Vec<u8>,
}

impl SourceData {
    fn validate(&self) -> Result<()> {
        if self.train_inputs.rows() != self.train_labels.len() {
            return Err(Error::Dimension(format!(
                "train split: {} images vs {} labels",
                self.train_inputs.rows(),
                self.train_labels.len()
            )));
        }
        if self.test_inputs.rows() != self.test_labels.len() {
            return Err(Error::Dimension(format!(
                "test split: {} images vs {} labels",
                self.test_inputs.rows(),
                self.test_labels.len()
            )));
        }
        if self.train_inputs.cols() != self.test_inputs.cols() {
            return Err(Error::Dimension(format!(
                "train images have {} pixels, test images {}",
                self.train_inputs.cols(),
                self.test_inputs.cols()
            )));
        }
        Ok(())
    }

    fn truncate(&mut self, train_cap: Option<usize>, test_cap: Option<usize>) {
        if let Some(cap) = train_cap {
            if cap < self.train_inputs.rows() {
                let keep: Vec<usize> = (0..cap).collect();
                self.train_inputs = self.train_inputs.gather_rows(&keep);
                self.train_labels.truncate(cap);
            }
        }
        if let Some(cap) = test_cap {
            if cap < self.test_inputs.rows() {
                let keep: Vec<usize> = (0..cap).collect();
                self.test_inputs = self.test_inputs.gather_rows(&keep);
                self.test_labels.truncate(cap);
            }
        }
    }
}

/// How to build a sequence: task count, master seed, and optional caps
/// that truncate the source splits before permuting (the desk-scale mode
/// for CPU-friendly runs).
#[derive(Debug, Clone)]
pub struct SequenceSpec {
    pub num_tasks: usize,
    pub master_seed: u64,
    pub train_cap: Option<usize>,
    pub test_cap: Option<usize>,
}

impl SequenceSpec {
    pub fn new(num_tasks: usize, master_seed: u64) -> Self {
        Self { num_tasks, master_seed, train_cap: None, test_cap: None }
    }
}

/// An ordered list of permuted tasks over a shared source dataset.
///
/// Task `i`'s permutation is seeded by `master_seed ^ i`; if a freshly
/// drawn permutation collides with an earlier one the seed is re-mixed
/// with [`mix64`] until it does not (vanishingly unlikely at realistic
/// widths, but checked). Tasks materialize on demand via [`Self::task`].
#[derive(Debug, Clone)]
pub struct TaskSequence {
    source: SourceData,
    permutations: Vec<Vec<u32>>,
    seeds: Vec<u64>,
    pub master_seed: u64,
}

/// Fisher–Yates shuffle of `0..n` driven by xoshiro256** seeded with
/// `seed`. The same seed always yields the same permutation, across
/// processes and platforms.
pub fn make_permutation(seed: u64, n: usize) -> Vec<u32> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut perm: Vec<u32> = (0..n as u32).collect();
    rng.shuffle(&mut perm);
    perm
}

/// `out[k][i] = in[k][permutation[i]]` for every sample row `k`.
pub fn apply_permutation(inputs: &DenseMatrix, permutation: &[u32]) -> Result<DenseMatrix> {
    if permutation.len() != inputs.cols() {
        return Err(Error::Dimension(format!(
            "permutation has {} entries but inputs have {} columns",
            permutation.len(),
            inputs.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(inputs.rows(), inputs.cols());
    for r in 0..inputs.rows() {
        let src = inputs.row(r);
        for (v, &p) in out.row_mut(r).iter_mut().zip(permutation) {
            *v = src[p as usize];
        }
    }
    Ok(out)
}

/// Draws the per-task permutations and wraps the source data as a lazy
/// task sequence.
pub fn build_task_sequence(mut source: SourceData, spec: &SequenceSpec) -> Result<TaskSequence> {
    if spec.num_tasks == 0 {
        return Err(Error::InvalidArgument(String::from("num_tasks must be at least 1")));
    }
    source.validate()?;
    source.truncate(spec.train_cap, spec.test_cap);
    if source.train_inputs.rows() == 0 {
        return Err(Error::EmptyDataset("build_task_sequence (train split)"));
    }
    if source.test_inputs.rows() == 0 {
        return Err(Error::EmptyDataset("build_task_sequence (test split)"));
    }
    let width = source.train_inputs.cols();
    let mut permutations: Vec<Vec<u32>> = Vec::with_capacity(spec.num_tasks);
    let mut seeds = Vec::with_capacity(spec.num_tasks);
    for i in 0..spec.num_tasks {
        let mut seed = spec.master_seed ^ i as u64;
        let mut perm = make_permutation(seed, width);
        while permutations.contains(&perm) {
            seed = mix64(seed);
            perm = make_permutation(seed, width);
        }
        permutations.push(perm);
        seeds.push(seed);
    }
    Ok(TaskSequence { source, permutations, seeds, master_seed: spec.master_seed })
}

impl TaskSequence {
    pub fn len(&self) -> usize {
        self.permutations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutations.is_empty()
    }

    pub fn permutation(&self, task: usize) -> &[u32] {
        &self.permutations[task]
    }

    pub fn input_width(&self) -> usize {
        self.source.train_inputs.cols()
    }

    /// Materializes the permuted train split of task `i`.
    pub fn train_split(&self, i: usize) -> Result<TaskDataset> {
        Ok(TaskDataset {
            inputs: apply_permutation(&self.source.train_inputs, &self.permutations[i])?,
            labels: self.source.train_labels.clone(),
            task_index: i,
            permutation: self.permutations[i].clone(),
            seed: self.seeds[i],
        })
    }

    /// Materializes the permuted test split of task `i`.
    pub fn test_split(&self, i: usize) -> Result<TaskDataset> {
        Ok(TaskDataset {
            inputs: apply_permutation(&self.source.test_inputs, &self.permutations[i])?,
            labels: self.source.test_labels.clone(),
            task_index: i,
            permutation: self.permutations[i].clone(),
            seed: self.seeds[i],
        })
    }

    pub fn task(&self, i: usize) -> Result<Task> {
        Ok(Task { train: self.train_split(i)?, test: self.test_split(i)? })
    }
}
