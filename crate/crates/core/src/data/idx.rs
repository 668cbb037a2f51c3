use super::{DataError, Dataset};
use crate::tensor::Matrix;
use std::path::Path;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Big-endian IDX header: magic then one `u32` per dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxHeader {
    pub magic: u32,
    pub dims: Vec<u32>,
}

impl IdxHeader {
    /// Reads the header, requiring `expected` as the magic. The number of
    /// dimensions is the low byte of the magic.
    pub fn parse(bytes: &[u8], expected: u32, what: &'static str) -> Result<Self, DataError> {
        let word = |i: usize| -> Result<u32, DataError> {
            let b = bytes.get(4 * i..4 * i + 4).ok_or(DataError::Truncated { what, expected: 4 * i + 4, found: bytes.len() })?;
            Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        };
        let magic = word(0)?;
        if magic != expected {
            return Err(DataError::BadMagic { what, expected, found: magic });
        }
        let ndims = (magic & 0xff) as usize;
        let dims = (1..=ndims).map(word).collect::<Result<_, _>>()?;
        Ok(Self { magic, dims })
    }

    pub fn len(&self) -> usize {
        4 + 4 * self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn payload(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

fn payload<'a>(bytes: &'a [u8], header: &IdxHeader, what: &'static str) -> Result<&'a [u8], DataError> {
    let need = header.len() + header.payload();
    if bytes.len() < need {
        return Err(DataError::Truncated { what, expected: need, found: bytes.len() });
    }
    Ok(&bytes[header.len()..need])
}

/// Images as `count x (rows * cols)` bytes plus the pixel count per image.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, &[u8]), DataError> {
    let h = IdxHeader::parse(bytes, IDX_IMAGES_MAGIC, "images")?;
    let data = payload(bytes, &h, "images")?;
    Ok((h.dims[0] as usize, (h.dims[1] * h.dims[2]) as usize, data))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8], DataError> {
    let h = IdxHeader::parse(bytes, IDX_LABELS_MAGIC, "labels")?;
    payload(bytes, &h, "labels")
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

/// Builds a dataset from raw IDX bytes: pixels scaled by `1/255`, labels
/// one-hot over 10 classes, keeping the first `min(count, limit)` samples.
pub fn mnist_from_bytes(images: &[u8], labels: &[u8], limit: Option<usize>) -> Result<Dataset, DataError> {
    let (count, pixels, img) = parse_idx_images(images)?;
    let lab = parse_idx_labels(labels)?;
    if lab.len() != count {
        return Err(DataError::CountMismatch { images: count, labels: lab.len() });
    }
    let n = limit.map_or(count, |l| l.min(count));
    if n == 0 {
        return Err(DataError::TooFewSamples { needed: 1, got: 0 });
    }
    let inputs = Matrix::new(n, pixels, img[..n * pixels].iter().map(|&b| b as f64 / 255.0).collect())?;
    let mut targets = Matrix::zeros(n, 10);
    for (i, &l) in lab[..n].iter().enumerate() {
        if l >= 10 {
            return Err(DataError::LabelRange { index: i, label: l });
        }
        targets.set(i, l as usize, 1.0);
    }
    Dataset::new(inputs, targets)
}

/// Loads an MNIST split from its two IDX files.
pub fn load_mnist(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<Dataset, DataError> {
    mnist_from_bytes(&read(images_path)?, &read(labels_path)?, limit)
}
