//! MNIST IDX loader.
//!
//! Reads the standard big-endian IDX format: magic `0x00000803` for image
//! files (count x rows x cols of unsigned bytes) and `0x00000801` for label
//! files. Pixels are kept as raw bytes; [`MnistData::normalized_image`]
//! exposes the flattened `[0,1]` view the models consume.

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGE_DIM: usize = 784;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone)]
pub struct MnistData {
    images: Vec<u8>,
    labels: Vec<u8>,
    count: usize,
}

impl MnistData {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Raw pixel bytes of sample `i`.
    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * IMAGE_DIM..(i + 1) * IMAGE_DIM]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    /// Flattened image normalized to `[0, 1]`.
    pub fn normalized_image(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.image(i).iter().map(|&p| p as f64 / 255.0)
    }

    /// Indices of all samples carrying one of `labels`.
    pub fn indices_with_labels(&self, labels: &[u8]) -> Vec<u32> {
        (0..self.count as u32)
            .filter(|&i| labels.contains(&self.labels[i as usize]))
            .collect()
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            detail: format!("file truncated; expected at least {end} bytes"),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Load an IDX image file. Validates magic number, 28x28 geometry and the
/// declared sample count against the payload size.
pub fn load_idx_images(path: &Path) -> Result<(Vec<u8>, usize)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: 0,
            detail: format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let rows = read_u32_be(&bytes, 8, path)? as usize;
    let cols = read_u32_be(&bytes, 12, path)? as usize;
    if rows * cols != IMAGE_DIM {
        return Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: 8,
            detail: format!("unexpected image geometry {rows}x{cols}"),
        });
    }
    let expected = 16 + count * IMAGE_DIM;
    if bytes.len() != expected {
        return Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: bytes.len().min(expected) as u64,
            detail: format!(
                "payload size mismatch: header declares {count} images ({expected} bytes), file has {}",
                bytes.len()
            ),
        });
    }
    Ok((bytes[16..].to_vec(), count))
}

/// Load an IDX label file.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: 0,
            detail: format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: bytes.len().min(expected) as u64,
            detail: format!("payload size mismatch for {count} labels"),
        });
    }
    let labels = bytes[8..].to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: 8,
            detail: format!("label {bad} out of range 0-9"),
        });
    }
    Ok(labels)
}

/// Load a paired image/label set, e.g. prefix `train` or `t10k`.
pub fn load_mnist(dir: &Path, prefix: &str) -> Result<MnistData> {
    let (images, count) = load_idx_images(&dir.join(format!("{prefix}-images-idx3-ubyte")))?;
    let labels = load_idx_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")))?;
    if labels.len() != count {
        return Err(Error::LengthMismatch {
            what: "mnist image/label count",
            expected: count,
            got: labels.len(),
        });
    }
    Ok(MnistData {
        images,
        labels,
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_dir() -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
    }

    #[test]
    fn loads_training_set() {
        let data = load_mnist(&data_dir(), "train").unwrap();
        assert_eq!(data.len(), 60_000);
        assert_eq!(data.image(0).len(), 784);
        let px: Vec<f64> = data.normalized_image(0).collect();
        assert!(px.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(px.iter().any(|&v| v > 0.0));
        assert!(data.label(0) <= 9);
    }

    #[test]
    fn loads_test_set() {
        let data = load_mnist(&data_dir(), "t10k").unwrap();
        assert_eq!(data.len(), 10_000);
    }

    #[test]
    fn empty_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty-images-idx3-ubyte");
        std::fs::write(&path, []).unwrap();
        let err = load_idx_images(&path).unwrap_err();
        assert!(matches!(err, Error::DataFormat { offset: 0, .. }));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad-images-idx3-ubyte");
        std::fs::write(&path, 0xdeadbeefu32.to_be_bytes()).unwrap();
        assert!(load_idx_images(&path).is_err());
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc-images-idx3-ubyte");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes()); // claims 2 images
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&[0u8; 784]); // only one present
        std::fs::write(&path, &bytes).unwrap();
        let err = load_idx_images(&path).unwrap_err();
        match err {
            Error::DataFormat { offset, .. } => assert_eq!(offset, bytes.len() as u64),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
