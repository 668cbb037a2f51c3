//! Binary dataset cache: a 16-byte header of little-endian `u32`
//! `{tag, P, N_x, N_y}` followed by inputs then targets as little-endian
//! `f64`, row-major.

use super::{DataError, Dataset};
use crate::tensor::Matrix;
use std::io::{Read, Write};
use std::path::Path;

/// `"ZDS1"` read as a little-endian `u32`.
pub const CACHE_TAG: u32 = u32::from_le_bytes(*b"ZDS1");

fn io_err(path: &str) -> impl Fn(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_string(), source }
}

pub fn write_cache<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    let dim = |v: usize| u32::try_from(v).expect("dataset dimension exceeds u32");
    let mut buf = Vec::with_capacity(16 + 8 * (data.inputs().len() + data.targets().len()));
    for v in [CACHE_TAG, dim(data.len()), dim(data.n_x()), dim(data.n_y())] {
        buf.extend(v.to_le_bytes());
    }
    for x in data.inputs().as_slice().iter().chain(data.targets().as_slice()) {
        buf.extend(x.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_cache<R: Read>(mut input: R) -> Result<Dataset, DataError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err("<reader>"))?;
    if bytes.len() < 16 {
        return Err(DataError::Truncated { what: "cache", expected: 16, found: bytes.len() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    if word(0) != CACHE_TAG {
        return Err(DataError::BadMagic { what: "cache", expected: CACHE_TAG, found: word(0) });
    }
    let (p, nx, ny) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let need = 16 + 8 * p * (nx + ny);
    if bytes.len() != need {
        return Err(DataError::Truncated { what: "cache", expected: need, found: bytes.len() });
    }
    let floats: Vec<f64> = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let (x, y) = floats.split_at(p * nx);
    Dataset::new(Matrix::new(p, nx, x.to_vec())?, Matrix::new(p, ny, y.to_vec())?)
}

pub fn write_cache_file(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let name = path.display().to_string();
    let f = std::fs::File::create(path).map_err(io_err(&name))?;
    write_cache(data, std::io::BufWriter::new(f)).map_err(io_err(&name))
}

pub fn read_cache_file(path: &Path) -> Result<Dataset, DataError> {
    let name = path.display().to_string();
    let f = std::fs::File::open(path).map_err(io_err(&name))?;
    read_cache(std::io::BufReader::new(f))
}
