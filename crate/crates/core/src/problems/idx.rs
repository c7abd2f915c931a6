//! Reader for the IDX image/label container used by classic digit corpora.
//!
//! Only the two layouts we consume are supported: unsigned-byte rank-3
//! image files (magic `0x00000803`) and unsigned-byte rank-1 label files
//! (magic `0x00000801`). All header integers are big-endian.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

/// IDX magic for rank-3 unsigned-byte tensors (images).
const MAGIC_IMAGES: u32 = 0x0000_0803;
/// IDX magic for rank-1 unsigned-byte tensors (labels).
const MAGIC_LABELS: u32 = 0x0000_0801;
/// Refuse to allocate for containers above this many pixels (~256 MiB).
const MAX_PIXELS: u64 = 1 << 28;

/// Failure while reading an IDX container.
#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("i/o error reading idx container: {0}")]
    Io(#[from] io::Error),
    #[error("bad idx magic {got:#010x}, expected {expected:#010x}")]
    BadMagic { got: u32, expected: u32 },
    #[error("idx container truncated: expected {expected} data bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("idx container too large: {pixels} pixels exceeds the {MAX_PIXELS} limit")]
    TooLarge { pixels: u64 },
}

/// A decoded stack of grayscale images, row-major per image.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: u32,
    pub rows: u32,
    pub cols: u32,
    /// `count · rows · cols` bytes, image-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// Pixels of one image.
    pub fn image(&self, index: usize) -> &[u8] {
        let size = (self.rows * self.cols) as usize;
        &self.pixels[index * size..(index + 1) * size]
    }

    /// All images as rows of `f64` scaled to `[0, 1]`.
    pub fn normalized_rows(&self) -> Vec<Vec<f64>> {
        (0..self.count as usize)
            .map(|i| self.image(i).iter().map(|&p| p as f64 / 255.0).collect())
            .collect()
    }
}

fn read_u32_be(r: &mut impl Read) -> Result<u32, IdxError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_be_bytes(buf))
}

fn read_payload(r: &mut impl Read, expected: u64) -> Result<Vec<u8>, IdxError> {
    let mut data = Vec::with_capacity(expected as usize);
    let found = r.take(expected).read_to_end(&mut data)? as u64;
    if found < expected {
        return Err(IdxError::Truncated { expected, found });
    }
    Ok(data)
}

/// Decode a rank-3 unsigned-byte image container from a reader.
pub fn read_idx_images(r: &mut impl Read) -> Result<IdxImages, IdxError> {
    let magic = read_u32_be(r)?;
    if magic != MAGIC_IMAGES {
        return Err(IdxError::BadMagic {
            got: magic,
            expected: MAGIC_IMAGES,
        });
    }
    let count = read_u32_be(r)?;
    let rows = read_u32_be(r)?;
    let cols = read_u32_be(r)?;
    let pixels = count as u64 * rows as u64 * cols as u64;
    if pixels > MAX_PIXELS {
        return Err(IdxError::TooLarge { pixels });
    }
    let data = read_payload(r, pixels)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: data,
    })
}

/// Decode a rank-1 unsigned-byte label container from a reader.
pub fn read_idx_labels(r: &mut impl Read) -> Result<Vec<u8>, IdxError> {
    let magic = read_u32_be(r)?;
    if magic != MAGIC_LABELS {
        return Err(IdxError::BadMagic {
            got: magic,
            expected: MAGIC_LABELS,
        });
    }
    let count = read_u32_be(r)?;
    if count as u64 > MAX_PIXELS {
        return Err(IdxError::TooLarge {
            pixels: count as u64,
        });
    }
    read_payload(r, count as u64)
}

/// Load an image container from disk.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages, IdxError> {
    read_idx_images(&mut File::open(path)?)
}

/// Load a label container from disk.
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>, IdxError> {
    read_idx_labels(&mut File::open(path)?)
}
