//! On-disk formats: binary tensors, PGM images and masks, JSONL pose and
//! pair streams, and the foot-model text file.

pub mod pgm;
pub mod pose;
pub mod tensor;

use std::fs;
use std::path::Path;

use footpose::pnp::FootModel;

use crate::HarnessError;

/// Loads a `footmodel v1` text file.
pub fn read_model(path: &Path) -> Result<FootModel, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    FootModel::parse(&text).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))
}

/// Writes a model in the `footmodel v1` text format.
pub fn write_model(path: &Path, model: &FootModel) -> Result<(), HarnessError> {
    fs::write(path, model.to_file_string()).map_err(|e| HarnessError::io(path, e))
}
