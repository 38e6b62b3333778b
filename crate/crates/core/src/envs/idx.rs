//! IDX container: big-endian `u32` magic, big-endian `u32` dimension sizes,
//! then raw unsigned bytes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unsigned bytes, three dimensions (count, rows, cols).
pub const IMAGE_MAGIC: u32 = 0x0000_0803;
/// Unsigned bytes, one dimension (count).
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported magic {found} (expected {expected})")]
    UnsupportedMagic { found: u32, expected: u32 },
    #[error("truncated file: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("trailing data: {extra} bytes after payload")]
    TrailingData { extra: usize },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is outside 0..=9")]
    LabelOutOfRange { index: usize, label: u8 },
    #[error("image has {got} pixels, expected {expected}")]
    ImageSize { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageDataset {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels of all images back to back.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl ImageDataset {
    pub fn new(
        rows: usize,
        cols: usize,
        pixels: Vec<u8>,
        labels: Vec<u8>,
        split: Split,
    ) -> Result<Self, IdxError> {
        let per = rows * cols;
        let images = pixels.len().checked_div(per).unwrap_or(0);
        if per * images != pixels.len() {
            return Err(IdxError::ImageSize {
                expected: per,
                got: pixels.len() % per.max(1),
            });
        }
        if images != labels.len() {
            return Err(IdxError::CountMismatch {
                images,
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
            return Err(IdxError::LabelOutOfRange { index, label });
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let per = self.pixels_per_image();
        &self.pixels[i * per..(i + 1) * per]
    }

    /// Pixels scaled to [0, 1].
    pub fn image_normalized(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| p as f64 / 255.0).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.pixels_per_image());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    let b = bytes.get(at..at + 4).ok_or(IdxError::Truncated {
        needed: at + 4,
        have: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")))
}

fn check_payload(bytes: &[u8], header: usize, payload: usize) -> Result<(), IdxError> {
    let needed = header + payload;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            needed,
            have: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(IdxError::TrailingData {
            extra: bytes.len() - needed,
        });
    }
    Ok(())
}

/// Parses an image file into `(rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), IdxError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(IdxError::UnsupportedMagic {
            found: magic,
            expected: IMAGE_MAGIC,
        });
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    check_payload(bytes, 16, n * rows * cols)?;
    Ok((rows, cols, bytes[16..].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(IdxError::UnsupportedMagic {
            found: magic,
            expected: LABEL_MAGIC,
        });
    }
    let n = be_u32(bytes, 4)? as usize;
    check_payload(bytes, 8, n)?;
    Ok(bytes[8..].to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    std::fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_idx_images(path: &Path) -> Result<(usize, usize, Vec<u8>), IdxError> {
    parse_idx_images(&read(path)?)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>, IdxError> {
    parse_idx_labels(&read(path)?)
}

/// Loads a matching image/label file pair.
pub fn load_dataset(images: &Path, labels: &Path, split: Split) -> Result<ImageDataset, IdxError> {
    let (rows, cols, pixels) = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    ImageDataset::new(rows, cols, pixels, labels, split)
}

pub fn write_idx_images<W: Write>(ds: &ImageDataset, mut w: W) -> std::io::Result<()> {
    w.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    for d in [ds.len(), ds.rows, ds.cols] {
        w.write_all(&(d as u32).to_be_bytes())?;
    }
    w.write_all(&ds.pixels)?;
    w.flush()
}

pub fn write_idx_labels<W: Write>(ds: &ImageDataset, mut w: W) -> std::io::Result<()> {
    w.write_all(&LABEL_MAGIC.to_be_bytes())?;
    w.write_all(&(ds.len() as u32).to_be_bytes())?;
    w.write_all(&ds.labels)?;
    w.flush()
}
