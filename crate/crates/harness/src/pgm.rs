//! Binary greyscale PGM (`P5`, maxval 255).

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM: {0}")]
    Format(String),
    #[error("pixel buffer has {found} bytes, expected {expected}")]
    Size { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub pixels: Vec<u8>,
}

impl Gray {
    /// Quantizes `[0, 1]` intensities; values outside are clamped.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self, PgmError> {
        if values.len() != width * height {
            return Err(PgmError::Size { expected: width * height, found: values.len() });
        }
        let pixels = values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        Ok(Gray { width, height, pixels })
    }

    /// White where `mask` is set.
    pub fn from_mask(width: usize, height: usize, mask: &[bool]) -> Result<Self, PgmError> {
        if mask.len() != width * height {
            return Err(PgmError::Size { expected: width * height, found: mask.len() });
        }
        Ok(Gray { width, height, pixels: mask.iter().map(|&m| if m { 255 } else { 0 }).collect() })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PgmError> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PgmError::Format("header ended early".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(PgmError::Format(format!("magic `{}`", fields[0])));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| PgmError::Format(format!("bad number `{s}`")));
        let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if maxval != 255 {
            return Err(PgmError::Format(format!("maxval {maxval} unsupported")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let data = bytes.get(pos + 1..).unwrap_or(&[]);
        if data.len() != width * height {
            return Err(PgmError::Size { expected: width * height, found: data.len() });
        }
        Ok(Gray { width, height, pixels: data.to_vec() })
    }

    pub fn write(&self, path: &Path) -> Result<(), PgmError> {
        Ok(fs::write(path, self.encode())?)
    }

    pub fn read(path: &Path) -> Result<Self, PgmError> {
        Gray::decode(&fs::read(path)?)
    }
}
