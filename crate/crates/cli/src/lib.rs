//! Simulator, pipeline runner, metrics, file formats and CLI plumbing for
//! the foot-pose pipeline.
//!
//! The [`sim`] module generates deterministic synthetic sequences that
//! stand in for the camera and network; [`pipeline`] drives decode →
//! grouping → pose → stabilization → occlusion over them and produces a
//! [`report::RunReport`]; [`io`] holds the on-disk formats (binary tensor
//! files, 8-bit PGM masks, JSONL pose and pair streams, the foot model
//! text format).

pub mod bench;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod sim;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("tensor file error at byte {offset}: {message}")]
    TensorFormat { offset: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("simulation error at frame {frame}: {message}")]
    Simulation { frame: usize, message: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
