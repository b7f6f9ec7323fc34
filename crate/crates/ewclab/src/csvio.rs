//! CSV schemas for run artifacts.
//!
//! All floats are written with Rust's shortest round-trip formatting, so
//! `parse(emit(x)) == x` bit-exactly and identical runs yield identical
//! bytes.
//!
//! Schemas:
//!
//! - accuracy matrix: `after_task,task_0,...,task_{n-1}`, one row per
//!   completed task.
//! - correlation surface: `method_a,method_b,transform,layer,task_index,pearson_r`
//!   with `transform` one of `none`/`squared` (applying to `method_b`),
//!   0-based layer/task indices, and an empty `pearson_r` field for
//!   undefined cells.
//! - lambda table: `lambda,mean_final_accuracy`, one row per grid point.

use std::fs;
use std::path::Path;

use ewclab_core::{CorrelationSurface, LambdaRow, Method, MethodSpec};

use crate::AppError;

fn write(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(|e| AppError::io(format!("writing {}", path.display()), e))
}

pub fn accuracy_to_csv(accuracy: &[Vec<f64>]) -> String {
    let tasks = accuracy.first().map_or(0, |row| row.len());
    let mut out = String::from("after_task");
    for j in 0..tasks {
        out.push_str(&format!(",task_{j}"));
    }
    out.push('\n');
    for (i, row) in accuracy.iter().enumerate() {
        out.push_str(&format!("{i}"));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_accuracy_csv(path: &Path, accuracy: &[Vec<f64>]) -> Result<(), AppError> {
    write(path, &accuracy_to_csv(accuracy))
}

pub fn parse_accuracy_csv(text: &str) -> Result<Vec<Vec<f64>>, AppError> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let mut fields = line.split(',');
        let _index = fields.next();
        let row: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| AppError::Usage(format!("bad accuracy row '{line}': {e}")))?);
    }
    Ok(rows)
}

/// A surface with any squared side swapped to `method_b`, matching the
/// single `transform` column. Swapping sides is sound: the cells are
/// symmetric in pair order.
fn canonical(surface: &CorrelationSurface) -> CorrelationSurface {
    if surface.method_a.squared && !surface.method_b.squared {
        CorrelationSurface {
            method_a: surface.method_b,
            method_b: surface.method_a,
            layer_names: surface.layer_names.clone(),
            cells: surface.cells.clone(),
        }
    } else {
        surface.clone()
    }
}

pub fn surface_to_csv(surface: &CorrelationSurface) -> String {
    surface_to_csv_named(surface, "pearson_r")
}

/// Like [`surface_to_csv`] with a custom value-column name, used to
/// label the optional Spearman output unmistakably.
pub fn surface_to_csv_named(surface: &CorrelationSurface, value_column: &str) -> String {
    let surface = canonical(surface);
    let transform = if surface.method_b.squared { "squared" } else { "none" };
    let mut out = format!("method_a,method_b,transform,layer,task_index,{value_column}\n");
    for (layer, row) in surface.cells.iter().enumerate() {
        for (task, cell) in row.iter().enumerate() {
            let r = cell.map(|v| format!("{v}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{transform},{layer},{task},{r}\n",
                surface.method_a.method, surface.method_b.method
            ));
        }
    }
    out
}

pub fn write_surface_csv(path: &Path, surface: &CorrelationSurface) -> Result<(), AppError> {
    write(path, &surface_to_csv(surface))
}

pub fn write_surface_csv_named(
    path: &Path,
    surface: &CorrelationSurface,
    value_column: &str,
) -> Result<(), AppError> {
    write(path, &surface_to_csv_named(surface, value_column))
}

pub fn parse_surface_csv(text: &str) -> Result<CorrelationSurface, AppError> {
    let mut method_a = None;
    let mut method_b = None;
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(AppError::Usage(format!("bad surface row '{line}'")));
        }
        let parse_method = |name: &str| {
            Method::parse(name)
                .ok_or_else(|| AppError::Usage(format!("unknown method '{name}' in surface CSV")))
        };
        let a = MethodSpec::plain(parse_method(fields[0])?);
        let squared = match fields[2] {
            "none" => false,
            "squared" => true,
            other => return Err(AppError::Usage(format!("unknown transform '{other}'"))),
        };
        let b = MethodSpec { method: parse_method(fields[1])?, squared };
        method_a.get_or_insert(a);
        method_b.get_or_insert(b);
        let layer: usize = fields[3]
            .parse()
            .map_err(|_| AppError::Usage(format!("bad layer index '{}'", fields[3])))?;
        let task: usize = fields[4]
            .parse()
            .map_err(|_| AppError::Usage(format!("bad task index '{}'", fields[4])))?;
        let value = if fields[5].is_empty() {
            None
        } else {
            Some(
                fields[5]
                    .parse::<f64>()
                    .map_err(|_| AppError::Usage(format!("bad pearson value '{}'", fields[5])))?,
            )
        };
        if cells.len() <= layer {
            cells.resize(layer + 1, Vec::new());
        }
        if cells[layer].len() <= task {
            cells[layer].resize(task + 1, None);
        }
        cells[layer][task] = value;
    }
    let (Some(method_a), Some(method_b)) = (method_a, method_b) else {
        return Err(AppError::Usage("surface CSV has no data rows".into()));
    };
    let layer_names = (1..=cells.len()).map(|l| format!("layer {l}")).collect();
    Ok(CorrelationSurface { method_a, method_b, layer_names, cells })
}

pub fn lambda_table_to_csv(rows: &[LambdaRow]) -> String {
    let mut out = String::from("lambda,mean_final_accuracy\n");
    for row in rows {
        out.push_str(&format!("{},{}\n", row.lambda, row.mean_final_accuracy));
    }
    out
}

pub fn write_lambda_csv(path: &Path, rows: &[LambdaRow]) -> Result<(), AppError> {
    write(path, &lambda_table_to_csv(rows))
}

pub fn parse_lambda_csv(text: &str) -> Result<Vec<LambdaRow>, AppError> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let Some((l, a)) = line.split_once(',') else {
            return Err(AppError::Usage(format!("bad lambda row '{line}'")));
        };
        let lambda =
            l.parse().map_err(|_| AppError::Usage(format!("bad lambda value '{l}'")))?;
        let mean_final_accuracy =
            a.parse().map_err(|_| AppError::Usage(format!("bad accuracy value '{a}'")))?;
        rows.push(LambdaRow { lambda, mean_final_accuracy });
    }
    Ok(rows)
}

/// File stem for a surface pair: `mas_fis`, `fis_mas_sq`, ...
pub fn surface_stem(pair: (MethodSpec, MethodSpec)) -> String {
    let side = |spec: MethodSpec| {
        let mut name = spec.method.name().to_ascii_lowercase();
        if spec.squared {
            name.push_str("_sq");
        }
        name
    };
    format!("{}_{}", side(pair.0), side(pair.1))
}
