//! IDX file ingestion.
//!
//! The format is fixed by its header: a 4-byte big-endian magic
//! (`0x00000803` for image tensors, `0x00000801` for label vectors),
//! one big-endian `u32` size per dimension, then the raw unsigned bytes.
//! Pixels are scaled into `[0, 1]` by dividing by 255, so byte 255 maps
//! to exactly 1.0.

use std::fs;
use std::path::Path;

use ewclab_core::{DenseMatrix, SourceData};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Canonical file names of the four MNIST-style archives inside a data
/// directory.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number 0x{found:08X}, expected 0x{expected:08X}")]
    BadMagic { path: String, found: u32, expected: u32 },
    #[error("{path}: truncated, expected {expected} bytes but found {found}")]
    Truncated { path: String, expected: usize, found: usize },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: label {value} at index {index} out of range 0..=9")]
    BadLabel { path: String, index: usize, value: u8 },
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io { path: path.display().to_string(), source })
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, IdxError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(IdxError::Truncated {
            path: path.display().to_string(),
            expected: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

struct IdxPayload {
    dims: Vec<usize>,
    data_offset: usize,
}

fn parse_header(
    bytes: &[u8],
    path: &Path,
    expected_magic: u32,
    ndims: usize,
) -> Result<IdxPayload, IdxError> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != expected_magic {
        return Err(IdxError::BadMagic {
            path: path.display().to_string(),
            found: magic,
            expected: expected_magic,
        });
    }
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(be_u32(bytes, 4 + 4 * d, path)? as usize);
    }
    let data_offset = 4 + 4 * ndims;
    let payload: usize = dims.iter().product();
    if bytes.len() < data_offset + payload {
        return Err(IdxError::Truncated {
            path: path.display().to_string(),
            expected: data_offset + payload,
            found: bytes.len(),
        });
    }
    Ok(IdxPayload { dims, data_offset })
}

/// Loads an image file and its aligned label file. Returns the images as
/// an `N x (rows*cols)` matrix scaled to `[0, 1]` and the labels as raw
/// class indices.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(DenseMatrix, Vec<u8>), IdxError> {
    let image_bytes = read_file(images_path)?;
    let images = parse_header(&image_bytes, images_path, IMAGE_MAGIC, 3)?;
    let (n, rows, cols) = (images.dims[0], images.dims[1], images.dims[2]);

    let label_bytes = read_file(labels_path)?;
    let labels_hdr = parse_header(&label_bytes, labels_path, LABEL_MAGIC, 1)?;
    let label_count = labels_hdr.dims[0];
    if n != label_count {
        return Err(IdxError::CountMismatch { images: n, labels: label_count });
    }

    let width = rows * cols;
    let pixels = &image_bytes[images.data_offset..images.data_offset + n * width];
    let data: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let inputs = DenseMatrix::from_vec(n, width, data)
        .expect("payload length was validated against the header");

    let labels = label_bytes[labels_hdr.data_offset..labels_hdr.data_offset + label_count].to_vec();
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(IdxError::BadLabel {
            path: labels_path.display().to_string(),
            index,
            value,
        });
    }
    Ok((inputs, labels))
}

/// Loads the four canonical files from a directory into a [`SourceData`].
pub fn load_mnist_dir(dir: &Path) -> Result<SourceData, IdxError> {
    let (train_inputs, train_labels) =
        load_idx(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?;
    let (test_inputs, test_labels) = load_idx(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?;
    Ok(SourceData { train_inputs, train_labels, test_inputs, test_labels })
}
