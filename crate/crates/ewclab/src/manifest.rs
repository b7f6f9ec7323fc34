//! Per-run manifest: everything needed to reproduce a run bit-exactly on
//! the same build, plus wall-clock timings for the curious.
//!
//! The manifest is flat `key=value` text like the config file. Timings
//! differ between runs; the CSV artifacts are the byte-stable outputs.

use std::fs;
use std::path::Path;
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::config::RunOptions;
use crate::AppError;

#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub load: Duration,
    pub train: Duration,
    pub analysis: Duration,
    pub render: Duration,
    pub total: Duration,
}

pub fn sha256_file(path: &Path) -> Result<String, AppError> {
    let bytes =
        fs::read(path).map_err(|e| AppError::io(format!("hashing {}", path.display()), e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub struct Manifest<'a> {
    pub command: &'a str,
    pub options: &'a RunOptions,
    /// (file name, sha256) of every ingested data file.
    pub data_checksums: &'a [(String, String)],
    pub timings: &'a StageTimings,
    /// Command-specific entries (selected lambda, ...).
    pub extra: &'a [(String, String)],
}

impl Manifest<'_> {
    pub fn to_text(&self) -> String {
        let o = self.options;
        let mut out = String::from("# ewclab run manifest\n");
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("version", env!("CARGO_PKG_VERSION").to_string());
        kv("command", self.command.to_string());
        kv("data_dir", o.data_dir.display().to_string());
        kv("out", o.out_dir.display().to_string());
        kv("tasks", o.tasks.to_string());
        kv("epochs", o.epochs.to_string());
        kv("batch", o.batch.to_string());
        kv("lr", format!("{}", o.lr));
        kv("lambda", format!("{}", o.lambda));
        kv("grid", o.grid.iter().map(|g| format!("{g}")).collect::<Vec<_>>().join(","));
        kv("seed", o.seed.to_string());
        kv("train_cap", o.train_cap.map(|c| c.to_string()).unwrap_or_default());
        kv("test_cap", o.test_cap.map(|c| c.to_string()).unwrap_or_default());
        kv("methods", o.methods_string());
        kv("spearman", o.spearman.to_string());
        for (name, digest) in self.data_checksums {
            kv(&format!("sha256_{name}"), digest.clone());
        }
        for (key, value) in self.extra {
            kv(key, value.clone());
        }
        let t = self.timings;
        kv("seconds_load", format!("{:.3}", t.load.as_secs_f64()));
        kv("seconds_train", format!("{:.3}", t.train.as_secs_f64()));
        kv("seconds_analysis", format!("{:.3}", t.analysis.as_secs_f64()));
        kv("seconds_render", format!("{:.3}", t.render.as_secs_f64()));
        kv("seconds_total", format!("{:.3}", t.total.as_secs_f64()));
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        fs::write(path, self.to_text())
            .map_err(|e| AppError::io(format!("writing {}", path.display()), e))
    }
}
