use std::path::{Path, PathBuf};

/// Resolves the MNIST data directory: `EWCLAB_DATA_DIR` if set, else the
/// repository's `data/mnist`.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("EWCLAB_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

/// Panics with fetch instructions when the data files are absent.
pub fn require_mnist() -> PathBuf {
    let dir = mnist_dir();
    let probe = dir.join("train-images-idx3-ubyte");
    assert!(
        probe.exists(),
        "MNIST IDX files not found at {} - run scripts/fetch_mnist.sh or set EWCLAB_DATA_DIR",
        dir.display()
    );
    dir
}
