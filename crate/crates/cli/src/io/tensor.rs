//! Binary tensor file format.
//!
//! Layout: magic `ARST`, one version byte (1), three little-endian `u32`
//! dimensions `(channels, height, width)`, then `c·h·w` little-endian
//! `f32` values, row-major within each channel. Read-after-write is
//! bitwise exact.

use std::fs;
use std::path::Path;

use footpose::targets::OutputTensors;
use footpose::tensor::Tensor;

use crate::HarnessError;

pub const MAGIC: [u8; 4] = *b"ARST";
pub const VERSION: u8 = 1;

/// Channel count of a stacked frame tensor: 8 heatmap + 14 affinity +
/// 2 segmentation.
pub const STACKED_CHANNELS: usize = 24;

pub fn encode(tensor: &Tensor) -> Vec<u8> {
    let (c, h, w) = tensor.shape();
    let mut out = Vec::with_capacity(17 + tensor.data().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor, HarnessError> {
    let need = |offset: usize, len: usize| -> Result<(), HarnessError> {
        if bytes.len() < offset + len {
            Err(HarnessError::TensorFormat {
                offset: bytes.len(),
                message: format!(
                    "truncated: need {} bytes at offset {offset}, file ends at {}",
                    len,
                    bytes.len()
                ),
            })
        } else {
            Ok(())
        }
    };

    need(0, 4)?;
    if bytes[0..4] != MAGIC {
        return Err(HarnessError::TensorFormat {
            offset: 0,
            message: format!("bad magic {:02x?}", &bytes[0..4]),
        });
    }
    need(4, 1)?;
    if bytes[4] != VERSION {
        return Err(HarnessError::TensorFormat {
            offset: 4,
            message: format!("unsupported version {}", bytes[4]),
        });
    }
    need(5, 12)?;
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(5), dim(9), dim(13));
    let count = c * h * w;
    need(17, count * 4)?;
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let at = 17 + i * 4;
        data.push(f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()));
    }
    Tensor::from_data(c, h, w, data)
        .map_err(|e| HarnessError::Format(format!("inconsistent tensor: {e}")))
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<(), HarnessError> {
    fs::write(path, encode(tensor)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode(&bytes)
}

/// Stacks the three output grids into one 24-channel tensor for single-file
/// frame storage: channels 0..8 heatmap, 8..22 affinity, 22..24
/// segmentation.
pub fn stack(tensors: &OutputTensors) -> Tensor {
    let (h, w) = tensors.grid_size();
    let mut data = Vec::with_capacity(STACKED_CHANNELS * h * w);
    data.extend_from_slice(tensors.heatmap.data());
    data.extend_from_slice(tensors.pafmap.data());
    data.extend_from_slice(tensors.segmap.data());
    Tensor::from_data(STACKED_CHANNELS, h, w, data).expect("stacked shape is consistent")
}

/// Splits a 24-channel stacked tensor back into the three output grids.
pub fn unstack(stacked: &Tensor) -> Result<OutputTensors, HarnessError> {
    let (c, h, w) = stacked.shape();
    if c != STACKED_CHANNELS {
        return Err(HarnessError::Format(format!(
            "expected {STACKED_CHANNELS} channels, got {c}"
        )));
    }
    let plane = h * w;
    let slice = |from: usize, to: usize| stacked.data()[from * plane..to * plane].to_vec();
    let heatmap = Tensor::from_data(8, h, w, slice(0, 8))
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    let pafmap = Tensor::from_data(14, h, w, slice(8, 22))
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    let segmap = Tensor::from_data(2, h, w, slice(22, 24))
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    OutputTensors::new(heatmap, pafmap, segmap)
        .map_err(|e| HarnessError::Format(e.to_string()))
}
