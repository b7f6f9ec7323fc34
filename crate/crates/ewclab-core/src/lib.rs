//! Core algorithms for a continual-learning laboratory.
//!
//! The crate trains a small fully connected network sequentially on a
//! family of pixel-permuted image-classification tasks under an elastic
//! weight consolidation (EWC) penalty, computes four kinds of per-weight
//! importance (FIS, MAS, SI, SIG), and measures per-layer, per-task
//! Pearson correlations between them.
//!
//! Everything in here is pure computation over owned values: no IO, no
//! global state, no threads. The crate is `no_std` (with `alloc`); file
//! formats, the CLI, and rendering live in the companion `ewclab` crate.
//!
//! Module map:
//!
//! - [`matrix`]: the dense row-major `f64` container used throughout.
//! - [`rng`]: the pinned pseudo-random generator (splitmix64 +
//!   xoshiro256**) and seed-derivation scheme; all randomness flows
//!   through it so runs are bit-reproducible.
//! - [`nn`]: forward/backward passes for the MLP, the three scalar
//!   training objectives, and accuracy evaluation.
//! - [`data`]: permuted task construction from a source dataset.
//! - [`importance`]: the four per-weight importance estimators and
//!   cross-task accumulation.
//! - [`continual`]: the sequential EWC training loop and the lambda
//!   grid search.
//! - [`analysis`]: Pearson correlation and the layer-by-task
//!   correlation surfaces.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod continual;
pub mod data;
pub mod error;
pub mod importance;
pub mod matrix;
pub mod nn;
pub mod rng;

pub use analysis::{
    build_surface, build_surface_spearman, layer_correlation, pearson, spearman, standard_pairs,
    CorrelationSurface, MethodSpec,
};
pub use continual::{
    ewc_penalty, grid_search_lambda, run_sequence, train_task, AnchorState, ExperimentRecord,
    LambdaRow, TaskLog, TrainConfig,
};
pub use data::{
    apply_permutation, build_task_sequence, make_permutation, SequenceSpec, SourceData, Task,
    TaskDataset, TaskSequence,
};
pub use error::{Error, Result};
pub use importance::{
    accumulate, compute_fis, compute_mas, compute_sig, square_map, ImportanceMap, Method,
    MethodSelection, SiAccumulator, SI_XI,
};
pub use matrix::DenseMatrix;
pub use nn::{
    accuracy, backward, cross_entropy, forward, leaky_relu, softmax, ForwardTrace, LayerParams,
    NetworkParams, Objective, DEFAULT_ARCHITECTURE, LEAKY_RELU_SLOPE,
};
