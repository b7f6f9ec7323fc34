//! Run options and the flat config-file format.
//!
//! A config file is UTF-8 `key=value` lines; blank lines and lines
//! starting with `#` are ignored. Keys mirror the CLI flags
//! (`data_dir`, `out`, `tasks`, `epochs`, `batch`, `lr`, `lambda`,
//! `grid`, `seed`, `train_cap`, `test_cap`, `methods`). Precedence is
//! defaults < config file < command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use ewclab_core::continual::DEFAULT_LAMBDA;
use ewclab_core::{Method, MethodSelection, TrainConfig};

use crate::AppError;

/// Fully resolved options for a `run` or `tune` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub tasks: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub train_cap: Option<usize>,
    pub test_cap: Option<usize>,
    pub methods: MethodSelection,
    /// Also emit Spearman surfaces (an extra output, outside the
    /// standard report).
    pub spearman: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data/mnist"),
            out_dir: PathBuf::from("out"),
            tasks: 10,
            epochs: 6,
            batch: 100,
            lr: 0.3,
            lambda: DEFAULT_LAMBDA,
            grid: vec![0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0],
            seed: 1,
            train_cap: None,
            test_cap: None,
            methods: MethodSelection::ALL,
            spearman: false,
        }
    }
}

impl RunOptions {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            learning_rate: self.lr,
            lambda: self.lambda,
            master_seed: self.seed,
            methods: self.methods,
        }
    }

    pub fn methods_string(&self) -> String {
        let names: Vec<&str> =
            self.methods.iter().map(|m| match m {
                Method::Fis => "fis",
                Method::Mas => "mas",
                Method::Si => "si",
                Method::Sig => "sig",
            }).collect();
        names.join(",")
    }
}

/// Options parsed from a config file or from flags; `None` means "not
/// given here".
#[derive(Debug, Clone, Default)]
pub struct PartialOptions {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub tasks: Option<usize>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub lambda: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub train_cap: Option<usize>,
    pub test_cap: Option<usize>,
    pub methods: Option<MethodSelection>,
    pub spearman: Option<bool>,
}

impl PartialOptions {
    /// Applies these values on top of `base`.
    pub fn apply_to(&self, base: &mut RunOptions) {
        if let Some(v) = &self.data_dir {
            base.data_dir = v.clone();
        }
        if let Some(v) = &self.out_dir {
            base.out_dir = v.clone();
        }
        if let Some(v) = self.tasks {
            base.tasks = v;
        }
        if let Some(v) = self.epochs {
            base.epochs = v;
        }
        if let Some(v) = self.batch {
            base.batch = v;
        }
        if let Some(v) = self.lr {
            base.lr = v;
        }
        if let Some(v) = self.lambda {
            base.lambda = v;
        }
        if let Some(v) = &self.grid {
            base.grid = v.clone();
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.train_cap {
            base.train_cap = Some(v);
        }
        if let Some(v) = self.test_cap {
            base.test_cap = Some(v);
        }
        if let Some(v) = self.methods {
            base.methods = v;
        }
        if let Some(v) = self.spearman {
            base.spearman = v;
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> AppError {
    AppError::Usage(format!("config key '{key}': cannot parse '{value}' as {what}"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, AppError> {
    value.parse().map_err(|_| bad(key, value, "an integer"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, AppError> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

/// Parses a comma-separated lambda grid such as `0.1,1,10`.
pub fn parse_grid(value: &str) -> Result<Vec<f64>, AppError> {
    let grid: Result<Vec<f64>, _> =
        value.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match grid {
        Ok(g) if !g.is_empty() => Ok(g),
        _ => Err(AppError::Usage(format!("cannot parse lambda grid '{value}'"))),
    }
}

/// Parses a comma-separated estimator subset such as `fis,mas`.
pub fn parse_methods(value: &str) -> Result<MethodSelection, AppError> {
    let mut selection = MethodSelection { fis: false, mas: false, si: false, sig: false };
    for name in value.split(',') {
        match Method::parse(name.trim()) {
            Some(Method::Fis) => selection.fis = true,
            Some(Method::Mas) => selection.mas = true,
            Some(Method::Si) => selection.si = true,
            Some(Method::Sig) => selection.sig = true,
            None => {
                return Err(AppError::Usage(format!(
                    "unknown importance method '{}' (expected fis, mas, si, sig)",
                    name.trim()
                )))
            }
        }
    }
    Ok(selection)
}

/// Reads a flat `key=value` config file.
pub fn parse_config_file(path: &Path) -> Result<PartialOptions, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = PartialOptions::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(AppError::Usage(format!(
                "{}:{}: expected key=value, got '{raw}'",
                path.display(),
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "data_dir" => out.data_dir = Some(PathBuf::from(value)),
            "out" => out.out_dir = Some(PathBuf::from(value)),
            "tasks" => out.tasks = Some(parse_usize(key, value)?),
            "epochs" => out.epochs = Some(parse_usize(key, value)?),
            "batch" => out.batch = Some(parse_usize(key, value)?),
            "lr" => out.lr = Some(parse_f64(key, value)?),
            "lambda" => out.lambda = Some(parse_f64(key, value)?),
            "grid" => out.grid = Some(parse_grid(value)?),
            "seed" => {
                out.seed = Some(value.parse().map_err(|_| bad(key, value, "an integer"))?)
            }
            "train_cap" => out.train_cap = Some(parse_usize(key, value)?),
            "test_cap" => out.test_cap = Some(parse_usize(key, value)?),
            "methods" => out.methods = Some(parse_methods(value)?),
            "spearman" => {
                out.spearman = Some(match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(bad(key, value, "a boolean")),
                })
            }
            other => {
                return Err(AppError::Usage(format!(
                    "{}:{}: unknown config key '{other}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(out)
}
