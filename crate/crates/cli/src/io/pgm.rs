//! 8-bit binary PGM (P5) images.
//!
//! Grayscale frames round-trip as raw intensities; binary masks are
//! written as 0/255 and read back with a ≥128 threshold.

use std::fs;
use std::path::Path;

use footpose::track::FrameImage;
use footpose::BinaryMask;

use crate::HarnessError;

pub fn encode(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn decode(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), HarnessError> {
    // Header: "P5", width, height, maxval as whitespace-separated tokens,
    // allowing `#` comments, followed by a single whitespace byte and the
    // raw payload.
    let mut pos = 0usize;
    let mut token = |expect_name: &str| -> Result<String, HarnessError> {
        // Skip whitespace and comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(HarnessError::Format(format!(
                "pgm: missing {expect_name} token"
            )));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token("magic")?;
    if magic != "P5" {
        return Err(HarnessError::Format(format!(
            "pgm: expected P5 magic, got {magic}"
        )));
    }
    let width: usize = token("width")?
        .parse()
        .map_err(|_| HarnessError::Format("pgm: bad width".into()))?;
    let height: usize = token("height")?
        .parse()
        .map_err(|_| HarnessError::Format("pgm: bad height".into()))?;
    let maxval: usize = token("maxval")?
        .parse()
        .map_err(|_| HarnessError::Format("pgm: bad maxval".into()))?;
    if maxval != 255 {
        return Err(HarnessError::Format(format!(
            "pgm: only maxval 255 supported, got {maxval}"
        )));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let expected = width * height;
    if bytes.len() < pos + expected {
        return Err(HarnessError::Format(format!(
            "pgm: payload truncated, need {expected} bytes, have {}",
            bytes.len().saturating_sub(pos)
        )));
    }
    Ok((width, height, bytes[pos..pos + expected].to_vec()))
}

pub fn write_image(path: &Path, image: &FrameImage) -> Result<(), HarnessError> {
    fs::write(
        path,
        encode(image.width(), image.height(), image.intensities()),
    )
    .map_err(|e| HarnessError::io(path, e))
}

pub fn read_image(path: &Path) -> Result<FrameImage, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let (w, h, data) = decode(&bytes)?;
    FrameImage::new(w, h, data).map_err(|e| HarnessError::Format(e.to_string()))
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<(), HarnessError> {
    let data: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    fs::write(path, encode(mask.width(), mask.height(), &data))
        .map_err(|e| HarnessError::io(path, e))
}

pub fn read_mask(path: &Path) -> Result<BinaryMask, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let (w, h, data) = decode(&bytes)?;
    BinaryMask::from_bits(w, h, data.iter().map(|&v| v >= 128).collect())
        .map_err(|e| HarnessError::Format(e.to_string()))
}
