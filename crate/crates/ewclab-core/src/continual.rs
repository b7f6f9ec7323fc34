//! Sequential training with the EWC quadratic penalty.
//!
//! The trainer runs plain minibatch SGD on cross-entropy plus the EWC
//! penalty `(lambda/2) * sum_i Omega_i (theta_i - theta*_i)^2`, where
//! `theta*` is the parameter snapshot after the most recent completed
//! task and `Omega` the accumulated MAS importances (the single-anchor
//! online form: one quadratic term, not one per past task). The penalty
//! is driven by MAS only; FIS, SI and SIG are recorded for analysis.
//!
//! The loop is specified single-threaded and fully deterministic:
//! minibatch shuffles are seeded per (task, epoch), batch reductions run
//! in fixed index order, and with `lambda = 0` (or before the first task
//! completes) the penalty path is skipped entirely, so the trainer is
//! bit-identical to plain SGD.
//!
//! The optimizer step splits the loss: the cross-entropy term takes an
//! explicit SGD step, the quadratic penalty term is then applied through
//! its exact proximal map,
//! `theta_i <- (theta_i + lr * lambda * Omega_i * theta*_i) / (1 + lr * lambda * Omega_i)`.
//! The two updates agree to first order in the learning rate, but the
//! explicit penalty gradient is unstable whenever `lr * lambda * Omega_i > 2`
//! (the iterate oscillates and diverges), while the proximal form is
//! stable for every `lambda >= 0` and pins `theta` to `theta*` in the
//! `lambda -> inf` limit, which is the behavior a rigidity sweep needs.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{Task, TaskSequence};
use crate::error::{Error, Result};
use crate::importance::{
    accumulate, compute_fis, compute_mas, compute_sig, ImportanceMap, Method, MethodSelection,
    SiAccumulator, SI_XI,
};
use crate::nn::{accuracy, backward, forward, objective_value, NetworkParams, Objective};
use crate::rng::{derive_seed, Xoshiro256StarStar, STREAM_INIT, STREAM_SHUFFLE};

/// Hyperparameters of a sequential run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// SGD epochs per task.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// EWC penalty strength.
    pub lambda: f64,
    /// Seed for everything: weight init, permutations, shuffles.
    pub master_seed: u64,
    /// Which importance estimators to record.
    pub methods: MethodSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 6,
            batch_size: 100,
            learning_rate: 0.3,
            lambda: DEFAULT_LAMBDA,
            master_seed: 1,
            methods: MethodSelection::ALL,
        }
    }
}

/// Default EWC strength, selected by `grid_search_lambda` over
/// {0.1, 1, 3, 10, 30, 100, 300, 1000} on the desk-scale protocol
/// (3 tasks, caps 10000/2000, 6 epochs, seed 1).
pub const DEFAULT_LAMBDA: f64 = 10.0;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// The EWC anchor: empty until the first task completes, afterwards the
/// post-task parameter snapshot plus the accumulated MAS importances.
#[derive(Debug, Clone, Default)]
pub struct AnchorState {
    inner: Option<AnchorInner>,
}

#[derive(Debug, Clone)]
struct AnchorInner {
    theta_star: NetworkParams,
    omega: ImportanceMap,
}

impl AnchorState {
    pub fn empty() -> Self {
        Self { inner: None }
    }

    pub fn is_active(&self) -> bool {
        self.inner.is_some()
    }

    /// Replaces the anchor after a completed task.
    pub fn set(&mut self, theta_star: NetworkParams, omega: ImportanceMap) {
        self.inner = Some(AnchorInner { theta_star, omega });
    }

    pub fn theta_star(&self) -> Option<&NetworkParams> {
        self.inner.as_ref().map(|a| &a.theta_star)
    }

    pub fn omega(&self) -> Option<&ImportanceMap> {
        self.inner.as_ref().map(|a| &a.omega)
    }
}

/// EWC penalty value and gradient at the given parameters:
/// `value = (lambda/2) * sum_i Omega_i (theta_i - theta*_i)^2`,
/// `grad_i = lambda * Omega_i (theta_i - theta*_i)`.
///
/// With an empty anchor the penalty is identically zero.
pub fn ewc_penalty(
    params: &NetworkParams,
    anchor: &AnchorState,
    lambda: f64,
) -> Result<(f64, NetworkParams)> {
    let Some(inner) = &anchor.inner else {
        return Ok((0.0, params.zeros_like()));
    };
    if !params.congruent(&inner.theta_star) {
        return Err(Error::Dimension(
            "ewc_penalty: live parameters are not congruent with the anchor".into(),
        ));
    }
    let mut value = 0.0;
    let mut grad = params.zeros_like();
    grad.zip2_apply(params, &inner.theta_star, |g, p, star| *g = p - star)?;
    grad.zip_apply(&inner.omega.values, |d, omega| {
        value += omega * *d * *d;
        *d *= lambda * omega;
    })?;
    Ok((0.5 * lambda * value, grad))
}

/// Per-epoch training diagnostics for one task.
#[derive(Debug, Clone, Default)]
pub struct TaskLog {
    /// Mean minibatch loss (cross-entropy + penalty) per epoch.
    pub train_loss: Vec<f64>,
    /// Accuracy on this task's test split after each epoch.
    pub test_accuracy: Vec<f64>,
}

/// Trains on one task with minibatch SGD, feeding every step's task-loss
/// gradient and applied update into the SI accumulator.
pub fn train_task(
    mut params: NetworkParams,
    task: &Task,
    anchor: &AnchorState,
    config: &TrainConfig,
    si: &mut SiAccumulator,
) -> Result<(NetworkParams, TaskLog)> {
    config.validate()?;
    if task.train.is_empty() {
        return Err(Error::EmptyDataset("train_task"));
    }
    let n = task.train.len();
    let penalty_active = anchor.is_active() && config.lambda > 0.0;
    let mut log = TaskLog::default();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let shuffle_seed = derive_seed(
            config.master_seed,
            STREAM_SHUFFLE,
            task.train.task_index as u64,
            epoch as u64,
        );
        let mut order: Vec<usize> = (0..n).collect();
        Xoshiro256StarStar::seed_from_u64(shuffle_seed).shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut steps_in_epoch = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let inputs = task.train.inputs.gather_rows(chunk);
            let labels: Vec<u8> = chunk.iter().map(|&i| task.train.labels[i]).collect();
            let objective = Objective::CrossEntropy { labels: &labels };
            let trace = forward(&params, &inputs)?;
            let batch_len = chunk.len() as f64;
            let mut task_grad = backward(&params, &trace, &objective)?;
            task_grad.scale(1.0 / batch_len);
            let mut loss = objective_value(&trace, &objective)? / batch_len;

            if penalty_active {
                let (pen_value, _) = ewc_penalty(&params, anchor, config.lambda)?;
                loss += pen_value;
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite { step });
            }

            let before = params.clone();
            params.zip_apply(&task_grad, |p, g| *p -= config.learning_rate * g)?;
            if penalty_active {
                let inner = anchor.inner.as_ref().expect("penalty_active implies anchor");
                let c = config.learning_rate * config.lambda;
                params.zip2_apply(&inner.omega.values, &inner.theta_star, |p, omega, star| {
                    *p = (*p + c * omega * star) / (1.0 + c * omega);
                })?;
            }
            let delta = params.binary_map(&before, |after, before| after - before)?;
            si.step(&task_grad, &delta)?;

            loss_sum += loss;
            steps_in_epoch += 1;
            step += 1;
        }
        log.train_loss.push(loss_sum / steps_in_epoch as f64);
        log.test_accuracy.push(accuracy(&params, &task.test)?);
    }
    Ok((params, log))
}

/// Everything a sequential run produces: per-task logs, the accuracy
/// matrix, and every raw and accumulated importance map.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub num_tasks: usize,
    pub architecture: Vec<usize>,
    pub task_logs: Vec<TaskLog>,
    /// `accuracy[i][j]` = accuracy on task `j`'s test split after
    /// training task `i`.
    pub accuracy: Vec<Vec<f64>>,
    /// Per-task maps, indexed `raw_maps(method)[task]`. Empty for
    /// methods that were not recorded.
    raw: MethodTable,
    accumulated: MethodTable,
    pub final_params: NetworkParams,
}

#[derive(Debug, Clone, Default)]
struct MethodTable {
    fis: Vec<ImportanceMap>,
    mas: Vec<ImportanceMap>,
    si: Vec<ImportanceMap>,
    sig: Vec<ImportanceMap>,
}

impl MethodTable {
    fn get(&self, method: Method) -> &Vec<ImportanceMap> {
        match method {
            Method::Fis => &self.fis,
            Method::Mas => &self.mas,
            Method::Si => &self.si,
            Method::Sig => &self.sig,
        }
    }

    fn push(&mut self, method: Method, map: ImportanceMap) {
        match method {
            Method::Fis => self.fis.push(map),
            Method::Mas => self.mas.push(map),
            Method::Si => self.si.push(map),
            Method::Sig => self.sig.push(map),
        }
    }
}

impl ExperimentRecord {
    /// Importance of each task in isolation, one map per completed task.
    pub fn raw_maps(&self, method: Method) -> &[ImportanceMap] {
        self.raw.get(method)
    }

    /// Importance accumulated from task 0 through each task.
    pub fn accumulated_maps(&self, method: Method) -> &[ImportanceMap] {
        self.accumulated.get(method)
    }

    /// Mean accuracy over all tasks after the final task.
    pub fn mean_final_accuracy(&self) -> f64 {
        let last = self.accuracy.last().expect("at least one task");
        last.iter().sum::<f64>() / last.len() as f64
    }
}

/// Runs the full sequential protocol: train each task in order, compute
/// and accumulate the importance maps after each task, refresh the EWC
/// anchor, and measure the accuracy matrix.
pub fn run_sequence(tasks: &TaskSequence, config: &TrainConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let width = tasks.input_width();
    let mut architecture: Vec<usize> = DEFAULT_ARCHITECTURE_HIDDEN.to_vec();
    architecture.insert(0, width);

    let init_seed = derive_seed(config.master_seed, STREAM_INIT, 0, 0);
    let mut params = NetworkParams::init(&architecture, init_seed)?;
    let mut anchor = AnchorState::empty();
    let mut si = SiAccumulator::new(&params);

    let mut record = ExperimentRecord {
        num_tasks: tasks.len(),
        architecture: architecture.clone(),
        task_logs: Vec::with_capacity(tasks.len()),
        accuracy: Vec::with_capacity(tasks.len()),
        raw: MethodTable::default(),
        accumulated: MethodTable::default(),
        final_params: params.clone(),
    };

    for t in 0..tasks.len() {
        let task = tasks.task(t)?;
        let (new_params, log) = train_task(params, &task, &anchor, config, &mut si)?;
        params = new_params;
        record.task_logs.push(log);

        // Post-task importances over the train split. MAS is always
        // computed: it drives the EWC anchor.
        let mas = compute_mas(&params, &task.train)?;
        let si_map = si.finalize(&params, t, SI_XI)?;
        let mut per_method: Vec<(Method, ImportanceMap)> = Vec::new();
        if config.methods.fis {
            per_method.push((Method::Fis, compute_fis(&params, &task.train)?));
        }
        if config.methods.mas {
            per_method.push((Method::Mas, mas.clone()));
        }
        if config.methods.si {
            per_method.push((Method::Si, si_map));
        }
        if config.methods.sig {
            per_method.push((Method::Sig, compute_sig(&params, &task.train)?));
        }
        for (method, map) in per_method {
            let acc = match record.accumulated.get(method).last() {
                Some(prev) => accumulate(prev, &map)?,
                None => map.clone(),
            };
            record.raw.push(method, map);
            record.accumulated.push(method, acc);
        }

        // Refresh the anchor with the accumulated MAS importances.
        let omega_acc = match anchor.omega() {
            Some(prev) => accumulate(prev, &mas)?,
            None => mas,
        };
        anchor.set(params.clone(), omega_acc);

        let mut row = Vec::with_capacity(tasks.len());
        for j in 0..tasks.len() {
            row.push(accuracy(&params, &tasks.test_split(j)?)?);
        }
        record.accuracy.push(row);
    }
    record.final_params = params;
    Ok(record)
}

/// Hidden and output widths appended after the input width.
const DEFAULT_ARCHITECTURE_HIDDEN: [usize; 3] = [300, 150, 10];

/// One grid-search result row.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRow {
    pub lambda: f64,
    pub mean_final_accuracy: f64,
}

/// Runs one sequence per grid value and picks the lambda maximizing mean
/// final accuracy over all tasks; ties go to the smaller lambda.
///
/// Grid runs record MAS only (the anchor driver); skipping the other
/// estimators does not change any training step.
pub fn grid_search_lambda(
    tasks: &TaskSequence,
    config: &TrainConfig,
    grid: &[f64],
) -> Result<(f64, Vec<LambdaRow>)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut run_config = config.clone();
        run_config.lambda = lambda;
        run_config.methods =
            MethodSelection { fis: false, mas: true, si: false, sig: false };
        let record = run_sequence(tasks, &run_config)?;
        rows.push(LambdaRow { lambda, mean_final_accuracy: record.mean_final_accuracy() });
    }
    let mut best = &rows[0];
    for row in &rows[1..] {
        let better = row.mean_final_accuracy > best.mean_final_accuracy
            || (row.mean_final_accuracy == best.mean_final_accuracy && row.lambda < best.lambda);
        if better {
            best = row;
        }
    }
    Ok((best.lambda, rows))
}
