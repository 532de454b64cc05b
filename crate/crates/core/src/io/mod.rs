//! On-disk dataset: binary frame files, scene directories, the manifest that
//! makes generation resumable, and dataset statistics.

pub mod formats;
pub mod manifest;
pub mod predictions;
pub mod stats;
pub mod store;

use std::path::{Path, PathBuf};

pub use manifest::{plan_generation, Manifest, SceneEntry, SceneStatus, Split, SplitCounts, WorkItem};
pub use stats::{dataset_stats, StatsReport};
pub use store::{read_scene, write_scene, FrameRecord, SceneLog, SceneRecord, SceneWriter};

use crate::digest::fnv1a64;
use crate::sampler::SceneConfig;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{what}: bad magic {found:?}")]
    BadMagic { what: &'static str, found: [u8; 4] },
    #[error("{what}: unsupported format version {found}")]
    BadVersion { what: &'static str, found: u8 },
    #[error("{what}: expected {expected} bytes, found {actual}")]
    Truncated {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{what}: {reason}")]
    Corrupt { what: &'static str, reason: String },
    #[error("cell size {0} m is not a whole number of millimetres")]
    CellSizeNotMillimetres(f64),
    #[error("scene {id}: config digest {actual} does not match recorded {expected}")]
    DigestMismatch { id: String, expected: String, actual: String },
    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),
    #[error("unknown scene {0:?}")]
    UnknownScene(String),
    #[error("no scenes")]
    NoScenes,
    #[error("dataset was created with seed {stored}, config asks for {requested}")]
    SeedMismatch { stored: u64, requested: u64 },
    #[error("{path}:{line}: {reason}")]
    BadLine { path: PathBuf, line: usize, reason: String },
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

/// FNV-1a of the compact JSON of `config`, as 16 hex digits. Struct fields
/// serialize in declaration order and overrides are a sorted map, so the
/// encoding is canonical.
pub fn config_digest(config: &SceneConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    format!("{:016x}", fnv1a64(&bytes))
}

/// `scene_0001/0042`
pub fn frame_id(scene_id: &str, index: usize) -> String {
    format!("{scene_id}/{index:04}")
}
