//! Binary importance-map dumps for offline analysis.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "EWIM"
//! 4       4     format version (u32, currently 1)
//! 8       1     method (0 FIS, 1 MAS, 2 SI, 3 SIG)
//! 9       1     squared flag (0/1)
//! 10      1     stage (0 raw per-task map, 1 accumulated map)
//! 11      1     reserved (0)
//! 12      4     task index (u32)
//! 16      4     layer count L (u32)
//! 20      8*L   per layer: rows (u32), cols (u32)
//! ...           per layer: rows*cols weight f64s (row-major), cols bias f64s
//! ```

use std::fs;
use std::path::Path;

use ewclab_core::{DenseMatrix, ImportanceMap, LayerParams, Method, NetworkParams};

use crate::AppError;

pub const MAGIC: &[u8; 4] = b"EWIM";
pub const VERSION: u32 = 1;

/// Whether a dump holds a single task's map or the running sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    Accumulated,
}

impl Stage {
    pub fn suffix(&self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Accumulated => "acc",
        }
    }
}

fn method_code(method: Method) -> u8 {
    match method {
        Method::Fis => 0,
        Method::Mas => 1,
        Method::Si => 2,
        Method::Sig => 3,
    }
}

fn method_from_code(code: u8) -> Option<Method> {
    match code {
        0 => Some(Method::Fis),
        1 => Some(Method::Mas),
        2 => Some(Method::Si),
        3 => Some(Method::Sig),
        _ => None,
    }
}

pub fn encode(map: &ImportanceMap, stage: Stage) -> Vec<u8> {
    let layers = map.values.layers();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(method_code(map.method));
    out.push(map.squared as u8);
    out.push(matches!(stage, Stage::Accumulated) as u8);
    out.push(0);
    out.extend_from_slice(&(map.task_index as u32).to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for layer in layers {
        out.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
    }
    for layer in layers {
        for v in layer.weights.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &layer.bias {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_map(path: &Path, map: &ImportanceMap, stage: Stage) -> Result<(), AppError> {
    fs::write(path, encode(map, stage))
        .map_err(|e| AppError::io(format!("writing {}", path.display()), e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AppError> {
        if self.bytes.len() < self.pos + n {
            return Err(AppError::Usage(format!(
                "{}: truncated importance dump at offset {}",
                self.path, self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, AppError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, AppError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8], origin: &str) -> Result<(ImportanceMap, Stage), AppError> {
    let mut r = Reader { bytes, pos: 0, path: origin.to_string() };
    if r.take(4)? != MAGIC {
        return Err(AppError::Usage(format!("{origin}: not an importance dump")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(AppError::Usage(format!(
            "{origin}: unsupported dump version {version} (expected {VERSION})"
        )));
    }
    let header = r.take(4)?;
    let method = method_from_code(header[0])
        .ok_or_else(|| AppError::Usage(format!("{origin}: bad method code {}", header[0])))?;
    let squared = header[1] != 0;
    let stage = if header[2] != 0 { Stage::Accumulated } else { Stage::Raw };
    let task_index = r.u32()? as usize;
    let layer_count = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        shapes.push((rows, cols));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for (rows, cols) in shapes {
        let mut weights = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            weights.push(r.f64()?);
        }
        let mut bias = Vec::with_capacity(cols);
        for _ in 0..cols {
            bias.push(r.f64()?);
        }
        layers.push(LayerParams {
            weights: DenseMatrix::from_vec(rows, cols, weights)
                .map_err(|e| AppError::Usage(format!("{origin}: {e}")))?,
            bias,
        });
    }
    let values = NetworkParams::from_layers(layers)
        .map_err(|e| AppError::Usage(format!("{origin}: {e}")))?;
    Ok((ImportanceMap { method, squared, task_index, values }, stage))
}

pub fn read_map(path: &Path) -> Result<(ImportanceMap, Stage), AppError> {
    let bytes =
        fs::read(path).map_err(|e| AppError::io(format!("reading {}", path.display()), e))?;
    decode(&bytes, &path.display().to_string())
}
