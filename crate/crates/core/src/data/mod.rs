//! Datasets: IDX loading/export, byte normalization and hermetic synthetic fixtures.

mod glyphs;
mod idx;
mod synth;

pub use glyphs::{synth_glyphs, GLYPH_SIDE};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_images, load_idx_labels, parse_idx_images, parse_idx_labels, write_idx_images,
    write_idx_labels, IdxImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use synth::synth_blobs;

use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("wrong magic for {kind} file: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        kind: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("truncated {kind} file: need {needed} bytes, have {actual}")]
    Truncated {
        kind: &'static str,
        needed: usize,
        actual: usize,
    },
    #[error("image dimensions overflow: {count} x {rows} x {cols}")]
    DimensionOverflow { count: u32, rows: u32, cols: u32 },
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("class count {classes} exceeds input dimension {n}")]
    TooManyClasses { classes: usize, n: usize },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Pixel mean and standard deviation of the MNIST training set, as used by
/// the reference PyTorch MNIST example.
pub const MNIST_MEAN: f64 = 0.1307;
pub const MNIST_STD: f64 = 0.3081;

/// Images as flat vectors (in `[0,1]` unless standardized) with labels in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n: usize,
    pub classes: usize,
}

/// Scale raw bytes by 1/255 and validate labels against `classes`.
pub fn make_dataset(images: &IdxImages, labels: &[u8], classes: usize) -> Result<Dataset, DataError> {
    if images.count != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    if let Some((index, &label)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| usize::from(l) >= classes)
    {
        return Err(DataError::LabelOutOfRange {
            index,
            label: usize::from(label),
            classes,
        });
    }
    let data = (0..images.count)
        .map(|i| images.image(i).iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok(Dataset {
        images: data,
        labels: labels.iter().map(|&l| usize::from(l)).collect(),
        n: images.pixels_per_image(),
        classes,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Maps every value `v` to `(v - mean) / std`.
    pub fn standardize(&mut self, mean: f64, std: f64) -> Result<(), DataError> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(DataError::Invalid(format!("bad standardization {mean}/{std}")));
        }
        for v in self.images.iter_mut().flatten() {
            *v = (*v - mean) / std;
        }
        Ok(())
    }

    /// First `limit` examples (or all of them).
    pub fn truncated(&self, limit: usize) -> Dataset {
        let k = limit.min(self.len());
        Dataset {
            images: self.images[..k].to_vec(),
            labels: self.labels[..k].to_vec(),
            n: self.n,
            classes: self.classes,
        }
    }

    /// Checks the type invariants: equal lengths, components in `[0,1]`, labels in range.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.images.len() != self.labels.len() {
            return Err(DataError::CountMismatch {
                images: self.images.len(),
                labels: self.labels.len(),
            });
        }
        for (index, (img, &label)) in self.images.iter().zip(&self.labels).enumerate() {
            if img.len() != self.n {
                return Err(DataError::Invalid(format!(
                    "image {index} has length {}, expected {}",
                    img.len(),
                    self.n
                )));
            }
            if img.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(DataError::Invalid(format!(
                    "image {index} has a component outside [0,1]"
                )));
            }
            if label >= self.classes {
                return Err(DataError::LabelOutOfRange {
                    index,
                    label,
                    classes: self.classes,
                });
            }
        }
        Ok(())
    }

    /// SHA-256 over shape, image bits and labels.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.classes as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for img in &self.images {
            for v in img {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        h.finalize().into()
    }

    /// Quantize back to bytes (round to nearest of 255 levels) for IDX export.
    pub fn to_idx(&self, rows: usize, cols: usize) -> Result<(IdxImages, Vec<u8>), DataError> {
        if rows * cols != self.n {
            return Err(DataError::Invalid(format!(
                "{rows}x{cols} layout does not match n = {}",
                self.n
            )));
        }
        if self.classes > 256 {
            return Err(DataError::Invalid("labels do not fit in a byte".into()));
        }
        let pixels = self
            .images
            .iter()
            .flat_map(|img| img.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect();
        let images = IdxImages {
            count: self.len(),
            rows,
            cols,
            pixels,
        };
        Ok((images, self.labels.iter().map(|&l| l as u8).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes(count: usize, n: usize, fill: u8) -> IdxImages {
        IdxImages {
            count,
            rows: 1,
            cols: n,
            pixels: vec![fill; count * n],
        }
    }

    #[test]
    fn byte_scaling_endpoints() {
        let ds = make_dataset(&bytes(1, 2, 255), &[0], 2).unwrap();
        assert_eq!(ds.images[0], vec![1.0, 1.0]);
        let ds = make_dataset(&bytes(1, 2, 0), &[1], 2).unwrap();
        assert_eq!(ds.images[0], vec![0.0, 0.0]);
        ds.validate().unwrap();
    }

    #[test]
    fn count_mismatch_rejected() {
        let err = make_dataset(&bytes(3, 4, 1), &[0, 1], 2).unwrap_err();
        assert!(matches!(err, DataError::CountMismatch { images: 3, labels: 2 }));
    }

    #[test]
    fn label_out_of_range_rejected_at_construction() {
        let err = make_dataset(&bytes(2, 4, 1), &[3, 12], 10).unwrap_err();
        assert!(matches!(
            err,
            DataError::LabelOutOfRange { index: 1, label: 12, classes: 10 }
        ));
    }

    #[test]
    fn fingerprint_sensitive_to_labels() {
        let a = make_dataset(&bytes(2, 4, 7), &[0, 1], 2).unwrap();
        let b = make_dataset(&bytes(2, 4, 7), &[1, 0], 2).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
