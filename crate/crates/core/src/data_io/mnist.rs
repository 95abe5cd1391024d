//! IDX files as distributed with MNIST.
//!
//! Images: magic `0x00000803`, then big-endian `u32` count, rows, cols and
//! one byte per pixel. Labels: magic `0x00000801`, count, one byte each.

use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn header(bytes: &[u8], index: usize, field: &str) -> Result<u32> {
    let at = index * 4;
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated header: missing `{field}`")))
}

/// Raw pixels with their `(count, rows, cols)` header.
pub fn read_idx_images(bytes: &[u8]) -> Result<(Vec<u8>, [usize; 3])> {
    let magic = header(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!("image file `magic` is {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = header(bytes, 1, "count")? as usize;
    let rows = header(bytes, 2, "rows")? as usize;
    let cols = header(bytes, 3, "cols")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("image `rows`×`cols` is {rows}×{cols}")));
    }
    let body = &bytes[16..];
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format(format!("image `count` {count} overflows")))?;
    if body.len() != need {
        return Err(Error::Format(format!(
            "image `pixels`: header declares {need} bytes, file has {}",
            body.len()
        )));
    }
    Ok((body.to_vec(), [count, rows, cols]))
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = header(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!("label file `magic` is {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let count = header(bytes, 1, "count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Format(format!("label `count` is {count}, file has {} labels", body.len())));
    }
    Ok(body.to_vec())
}

/// Loads images as `n×1×rows×cols`, pixels mapped `0 → −1`, `255 → +1`.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img_bytes = std::fs::read(images).map_err(|e| Error::io(images, e))?;
    let lbl_bytes = std::fs::read(labels).map_err(|e| Error::io(labels, e))?;
    let (pixels, [n, rows, cols]) = read_idx_images(&img_bytes)?;
    let lbl = read_idx_labels(&lbl_bytes)?;
    if lbl.len() != n {
        return Err(Error::Format(format!("`count` mismatch: {n} images but {} labels", lbl.len())));
    }
    let data = pixels.iter().map(|&p| p as f32 / 127.5 - 1.0).collect();
    Dataset::new(
        "mnist",
        Tensor::new(&[n, 1, rows, cols], data)?,
        Some(lbl.into_iter().map(usize::from).collect()),
    )
}
