//! The `run` and `tune` pipelines.
//!
//! `cmd_run` executes the full protocol: ingest the IDX files, build the
//! permuted task sequence, train sequentially under EWC, then write
//!
//! ```text
//! <out>/manifest.txt
//! <out>/accuracy.csv
//! <out>/importance/<method>_task<k>_{raw,acc}.bin
//! <out>/surfaces/surface_<pair>.csv
//! <out>/heatmaps/heatmap_<pair>.svg
//! ```
//!
//! `cmd_tune` runs one sequence per lambda grid point and writes the
//! `(lambda, mean final accuracy)` table plus the selected value.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ewclab_core::{
    build_surface, build_surface_spearman, build_task_sequence, grid_search_lambda, run_sequence,
    standard_pairs, ExperimentRecord, SequenceSpec, SourceData,
};

use crate::config::RunOptions;
use crate::csvio;
use crate::dump::{self, Stage};
use crate::idx;
use crate::manifest::{sha256_file, Manifest, StageTimings};
use crate::svg;
use crate::AppError;

fn ensure_dir(path: &Path) -> Result<(), AppError> {
    fs::create_dir_all(path).map_err(|e| AppError::io(format!("creating {}", path.display()), e))
}

fn load_with_checksums(
    options: &RunOptions,
) -> Result<(SourceData, Vec<(String, String)>), AppError> {
    let mut checksums = Vec::new();
    for name in [idx::TRAIN_IMAGES, idx::TRAIN_LABELS, idx::TEST_IMAGES, idx::TEST_LABELS] {
        let path = options.data_dir.join(name);
        if !path.exists() {
            // Surface missing files as ingestion errors naming the path.
            return Err(AppError::Data(idx::IdxError::Io {
                path: path.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            }));
        }
        checksums.push((name.replace('-', "_"), sha256_file(&path)?));
    }
    let source = idx::load_mnist_dir(&options.data_dir)?;
    Ok((source, checksums))
}

fn sequence_spec(options: &RunOptions) -> SequenceSpec {
    SequenceSpec {
        num_tasks: options.tasks,
        master_seed: options.seed,
        train_cap: options.train_cap,
        test_cap: options.test_cap,
    }
}

/// Writes every artifact derived from a completed experiment record.
/// Split out so tests can drive it without re-training.
pub fn write_run_artifacts(
    record: &ExperimentRecord,
    options: &RunOptions,
    out_dir: &Path,
    timings: &mut StageTimings,
) -> Result<(), AppError> {
    let importance_dir = out_dir.join("importance");
    let surfaces_dir = out_dir.join("surfaces");
    let heatmaps_dir = out_dir.join("heatmaps");
    for dir in [&importance_dir, &surfaces_dir, &heatmaps_dir] {
        ensure_dir(dir)?;
    }

    csvio::write_accuracy_csv(&out_dir.join("accuracy.csv"), &record.accuracy)?;

    for method in options.methods.iter() {
        for (task, map) in record.raw_maps(method).iter().enumerate() {
            let stem = method.name().to_ascii_lowercase();
            dump::write_map(
                &importance_dir.join(format!("{stem}_task{task}_raw.bin")),
                map,
                Stage::Raw,
            )?;
        }
        for (task, map) in record.accumulated_maps(method).iter().enumerate() {
            let stem = method.name().to_ascii_lowercase();
            dump::write_map(
                &importance_dir.join(format!("{stem}_task{task}_acc.bin")),
                map,
                Stage::Accumulated,
            )?;
        }
    }

    let analysis_start = Instant::now();
    let pairs: Vec<_> = standard_pairs()
        .into_iter()
        .filter(|(a, b)| options.methods.contains(a.method) && options.methods.contains(b.method))
        .collect();
    let mut surfaces = Vec::with_capacity(pairs.len());
    for pair in pairs {
        surfaces.push(build_surface(record, pair)?);
    }
    timings.analysis = analysis_start.elapsed();

    // Spearman variants are an extra output, clearly separated from the
    // standard report by file name and column header.
    let mut spearman_surfaces = Vec::new();
    if options.spearman {
        for surface in &surfaces {
            spearman_surfaces
                .push(build_surface_spearman(record, (surface.method_a, surface.method_b))?);
        }
    }

    let render_start = Instant::now();
    for surface in &surfaces {
        let stem = csvio::surface_stem((surface.method_a, surface.method_b));
        csvio::write_surface_csv(&surfaces_dir.join(format!("surface_{stem}.csv")), surface)?;
        svg::render_heatmap(surface, &heatmaps_dir.join(format!("heatmap_{stem}.svg")))?;
    }
    for surface in &spearman_surfaces {
        let stem = csvio::surface_stem((surface.method_a, surface.method_b));
        csvio::write_surface_csv_named(
            &surfaces_dir.join(format!("spearman_{stem}.csv")),
            surface,
            "spearman_r",
        )?;
    }
    timings.render = render_start.elapsed();
    Ok(())
}

pub fn cmd_run(options: &RunOptions) -> Result<(), AppError> {
    let total_start = Instant::now();
    let mut timings = StageTimings::default();
    ensure_dir(&options.out_dir)?;

    let load_start = Instant::now();
    let (source, checksums) = load_with_checksums(options)?;
    let sequence = build_task_sequence(source, &sequence_spec(options))?;
    timings.load = load_start.elapsed();

    let train_start = Instant::now();
    let record = run_sequence(&sequence, &options.train_config())?;
    timings.train = train_start.elapsed();

    write_run_artifacts(&record, options, &options.out_dir, &mut timings)?;

    timings.total = total_start.elapsed();
    Manifest {
        command: "run",
        options,
        data_checksums: &checksums,
        timings: &timings,
        extra: &[],
    }
    .write(&options.out_dir.join("manifest.txt"))?;

    println!(
        "run complete: {} tasks, mean final accuracy {:.4}, artifacts in {}",
        record.num_tasks,
        record.mean_final_accuracy(),
        options.out_dir.display()
    );
    Ok(())
}

pub fn cmd_tune(options: &RunOptions) -> Result<(), AppError> {
    let total_start = Instant::now();
    let mut timings = StageTimings::default();
    if options.grid.is_empty() {
        return Err(AppError::Usage("lambda grid is empty".into()));
    }
    ensure_dir(&options.out_dir)?;

    let load_start = Instant::now();
    let (source, checksums) = load_with_checksums(options)?;
    let sequence = build_task_sequence(source, &sequence_spec(options))?;
    timings.load = load_start.elapsed();

    let train_start = Instant::now();
    let (selected, rows) =
        grid_search_lambda(&sequence, &options.train_config(), &options.grid)?;
    timings.train = train_start.elapsed();

    csvio::write_lambda_csv(&options.out_dir.join("lambda_table.csv"), &rows)?;

    let min = options.grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = options.grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if options.grid.len() > 1 && (selected == min || selected == max) {
        eprintln!(
            "warning: selected lambda {selected} sits on the grid boundary; consider widening the grid"
        );
    }

    timings.total = total_start.elapsed();
    Manifest {
        command: "tune",
        options,
        data_checksums: &checksums,
        timings: &timings,
        extra: &[("selected_lambda".to_string(), format!("{selected}"))],
    }
    .write(&options.out_dir.join("manifest.txt"))?;

    println!("selected lambda = {selected}");
    Ok(())
}
