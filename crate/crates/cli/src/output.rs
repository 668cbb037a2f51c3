//! Artifact writers: CSV (shortest round-trip floats, header row), pretty
//! JSON and a binary weight file.

use crate::error::CliError;
use serde::Serialize;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use zerolab::net::TrainingTrace;
use zerolab::tensor::Matrix;

/// Shortest representation that parses back to the same `f64` (at most 17
/// significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// An output directory; every artifact is written through it.
#[derive(Clone, Debug)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).map_err(|e| csv_err(&p, e))?;
        w.write_record(header).map_err(|e| csv_err(&p, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| csv_err(&p, e))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn write_matrix_csv(&self, name: &str, m: &Matrix) -> Result<PathBuf, CliError> {
        let header: Vec<String> = (0..m.cols()).map(|c| format!("c{c}")).collect();
        let rows: Vec<Vec<String>> = (0..m.rows()).map(|r| m.row(r).iter().map(|&v| fmt_f64(v)).collect()).collect();
        self.write_csv(name, &header, &rows)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::BadInput(format!("{}: {other:?}", path.display())),
    }
}

/// Header and rows of `trace.csv`: `step, lr, loss`, then per layer
/// `grad_norm_l`, and `num_rank_l` / `stable_rank_l` when recorded.
pub fn trace_table(trace: &TrainingTrace, depth: usize, grad_norms: bool) -> (Vec<String>, Vec<Vec<String>>) {
    let first = trace.records.first();
    let ranks = first.is_some_and(|r| !r.numeric_ranks.is_empty());
    let stable = first.is_some_and(|r| !r.stable_ranks.is_empty());
    let mut header: Vec<String> = vec!["step".into(), "lr".into(), "loss".into()];
    let layers = 1..=depth;
    if grad_norms {
        header.extend(layers.clone().map(|l| format!("grad_norm_{l}")));
    }
    if ranks {
        header.extend(layers.clone().map(|l| format!("num_rank_{l}")));
    }
    if stable {
        header.extend(layers.map(|l| format!("stable_rank_{l}")));
    }
    let rows = trace
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.step.to_string(), fmt_f64(r.lr), fmt_f64(r.loss)];
            if grad_norms {
                row.extend(r.grad_norms.iter().map(|&g| fmt_f64(g)));
            }
            if ranks {
                row.extend(r.numeric_ranks.iter().map(usize::to_string));
            }
            if stable {
                row.extend(r.stable_ranks.iter().map(|&s| fmt_f64(s)));
            }
            row
        })
        .collect();
    (header, rows)
}

/// A parsed CSV: header plus numeric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a CSV whose cells are all numbers, or empty (read as NaN).
pub fn read_numeric_csv(path: &Path) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|cell| {
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.parse::<f64>().map_err(|e| CliError::BadInput(format!("{}: cell `{cell}`: {e}", path.display())))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// `"ZWT1"` read as a little-endian `u32`.
pub const WEIGHTS_TAG: u32 = u32::from_le_bytes(*b"ZWT1");

/// Weight file: little-endian `u32` tag and layer count, then per layer
/// `u32` rows and cols followed by row-major little-endian `f64` entries.
pub fn encode_weights(weights: &[Matrix]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend(WEIGHTS_TAG.to_le_bytes());
    buf.extend((weights.len() as u32).to_le_bytes());
    for w in weights {
        buf.extend((w.rows() as u32).to_le_bytes());
        buf.extend((w.cols() as u32).to_le_bytes());
        for v in w.as_slice() {
            buf.extend(v.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn word(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

pub fn decode_weights(bytes: &[u8], what: &Path) -> Result<Vec<Matrix>, CliError> {
    let bad = |msg: &str| CliError::BadInput(format!("{}: {msg}", what.display()));
    let truncated = || bad("truncated weight file");
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.word().ok_or_else(truncated)? != WEIGHTS_TAG {
        return Err(bad("not a weight file"));
    }
    let layers = cur.word().ok_or_else(truncated)? as usize;
    let mut out = Vec::new();
    for _ in 0..layers {
        let rows = cur.word().ok_or_else(truncated)? as usize;
        let cols = cur.word().ok_or_else(truncated)? as usize;
        let n = rows.checked_mul(cols).ok_or_else(|| bad("layer shape overflows"))?;
        let raw = cur.take(n.checked_mul(8).ok_or_else(|| bad("layer shape overflows"))?).ok_or_else(truncated)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        out.push(Matrix::new(rows, cols, data).map_err(|e| bad(&e.to_string()))?);
    }
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes after weights"));
    }
    Ok(out)
}

pub fn read_weights(path: &Path) -> Result<Vec<Matrix>, CliError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    decode_weights(&bytes, path)
}

pub fn write_weights(out: &OutDir, name: &str, weights: &[Matrix]) -> Result<PathBuf, CliError> {
    let p = out.path(name);
    let mut f = std::io::BufWriter::new(std::fs::File::create(&p).map_err(|e| CliError::io(&p, e))?);
    f.write_all(&encode_weights(weights)).and_then(|_| f.flush()).map_err(|e| CliError::io(&p, e))?;
    Ok(p)
}
