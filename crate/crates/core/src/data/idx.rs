// IDX layout: big-endian u32 magic, big-endian u32 sizes, row-major u8 body.

use super::DataError;
use std::fs;
use std::path::Path;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw image bytes, `count` images of `rows * cols` bytes each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let k = self.pixels_per_image();
        &self.pixels[i * k..(i + 1) * k]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn check_len(kind: &'static str, bytes: &[u8], needed: usize) -> Result<(), DataError> {
    if bytes.len() < needed {
        return Err(DataError::Truncated {
            kind,
            needed,
            actual: bytes.len(),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, DataError> {
    const KIND: &str = "image";
    check_len(KIND, bytes, 4)?;
    let magic = be_u32(bytes, 0);
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            kind: KIND,
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    check_len(KIND, bytes, 16)?;
    let (count, rows, cols) = (be_u32(bytes, 4), be_u32(bytes, 8), be_u32(bytes, 12));
    let body = (count as usize)
        .checked_mul(rows as usize)
        .and_then(|v| v.checked_mul(cols as usize))
        .and_then(|v| v.checked_add(16))
        .ok_or(DataError::DimensionOverflow { count, rows, cols })?;
    check_len(KIND, bytes, body)?;
    Ok(IdxImages {
        count: count as usize,
        rows: rows as usize,
        cols: cols as usize,
        pixels: bytes[16..body].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    const KIND: &str = "label";
    check_len(KIND, bytes, 4)?;
    let magic = be_u32(bytes, 0);
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            kind: KIND,
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    check_len(KIND, bytes, 8)?;
    let count = be_u32(bytes, 4) as usize;
    check_len(KIND, bytes, 8 + count)?;
    Ok(bytes[8..8 + count].to_vec())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    parse_idx_images(&bytes)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    parse_idx_labels(&bytes)
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for dim in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(dim as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, encode_idx_images(images)).map_err(|e| DataError::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, encode_idx_labels(labels)).map_err(|e| DataError::io(path, e))
}
