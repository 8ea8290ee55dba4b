//! IDX containers (the MNIST distribution format): a big-endian `u32` magic,
//! big-endian `u32` dimensions, then unsigned bytes in row-major order.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::images::ImageSet;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const DIGIT_SIDE: usize = 28;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad IDX magic 0x{found:08x} (expected 0x{expected:08x})")]
    BadMagic { found: u32, expected: u32 },
    #[error("IDX byte count mismatch: header implies {expected} bytes, file has {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("IDX dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Raw image block of an IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// One row-major `rows * cols` buffer per image.
    pub images: Vec<Vec<u8>>,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

fn check_header(bytes: &[u8], magic: u32, header_len: usize) -> Result<(), IdxError> {
    if bytes.len() < 4 {
        return Err(IdxError::TruncatedFile { expected: header_len, found: bytes.len() });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(IdxError::BadMagic { found, expected: magic });
    }
    if bytes.len() < header_len {
        return Err(IdxError::TruncatedFile { expected: header_len, found: bytes.len() });
    }
    Ok(())
}

/// The payload must match the header exactly; trailing bytes are rejected
/// like missing ones.
fn check_len(bytes: &[u8], header_len: usize, payload: usize) -> Result<(), IdxError> {
    let expected = header_len.checked_add(payload).ok_or_else(|| IdxError::DimMismatch("dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(IdxError::TruncatedFile { expected, found: bytes.len() });
    }
    Ok(())
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    check_header(bytes, IMAGES_MAGIC, 16)?;
    let n = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    let size = rows.checked_mul(cols).ok_or_else(|| IdxError::DimMismatch("image size overflows".into()))?;
    let payload = n.checked_mul(size).ok_or_else(|| IdxError::DimMismatch("payload size overflows".into()))?;
    check_len(bytes, 16, payload)?;
    let images = if size == 0 { vec![Vec::new(); n] } else { bytes[16..].chunks_exact(size).map(<[u8]>::to_vec).collect() };
    Ok(IdxImages { rows, cols, images })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_header(bytes, LABELS_MAGIC, 8)?;
    let n = be_u32(bytes, 4) as usize;
    check_len(bytes, 8, n)?;
    Ok(bytes[8..].to_vec())
}

pub fn encode_images(images: &IdxImages) -> Result<Vec<u8>, IdxError> {
    let size = images.rows * images.cols;
    if let Some(i) = images.images.iter().position(|im| im.len() != size) {
        return Err(IdxError::DimMismatch(format!("image {i} has {} pixels, expected {size}", images.images[i].len())));
    }
    let mut out = Vec::with_capacity(16 + images.images.len() * size);
    for v in [IMAGES_MAGIC, images.images.len() as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for im in &images.images {
        out.extend_from_slice(im);
    }
    Ok(out)
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io { path: path.display().to_string(), source })
}

/// Reads 28x28 digit images, scales pixels to `[0, 1]`, and keeps at most
/// `limit` of them. Labels are attached when `labels` is given.
pub fn read_idx(images: &Path, labels: Option<&Path>, limit: Option<usize>) -> Result<ImageSet, IdxError> {
    let raw = parse_images(&read(images)?)?;
    if raw.rows != DIGIT_SIDE || raw.cols != DIGIT_SIDE {
        return Err(IdxError::DimMismatch(format!("images are {}x{}, expected 28x28", raw.rows, raw.cols)));
    }
    let labels = match labels {
        Some(path) => {
            let l = parse_labels(&read(path)?)?;
            if l.len() != raw.images.len() {
                return Err(IdxError::DimMismatch(format!("{} labels for {} images", l.len(), raw.images.len())));
            }
            Some(l)
        }
        None => None,
    };
    let keep = limit.unwrap_or(usize::MAX).min(raw.images.len());
    Ok(ImageSet {
        rows: raw.rows,
        cols: raw.cols,
        images: raw.images[..keep].iter().map(|im| im.iter().map(|&b| f64::from(b) / 255.0).collect()).collect(),
        labels: labels.map(|mut l| {
            l.truncate(keep);
            l
        }),
    })
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<(), IdxError> {
    let bytes = encode_images(images)?;
    fs::write(path, bytes).map_err(|source| IdxError::Io { path: path.display().to_string(), source })
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<(), IdxError> {
    fs::write(path, encode_labels(labels)).map_err(|source| IdxError::Io { path: path.display().to_string(), source })
}
