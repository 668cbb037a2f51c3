use super::AnalysisError;
use crate::init::InitScheme;
use crate::net::{NetworkSpec, TrainingTrace};
use crate::tensor::Matrix;
use serde::{Deserialize, Serialize};

/// Mean pairwise cosine similarity of rows (`c_f`) and of columns (`c_b`).
/// Zero rows/columns are left out and counted; a value is `None` when fewer
/// than two non-zero vectors remain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCorrelations {
    pub c_f: Option<f64>,
    pub c_b: Option<f64>,
    pub excluded_rows: usize,
    pub excluded_cols: usize,
}

fn mean_pairwise_cosine(vectors: &[Vec<f64>]) -> (Option<f64>, usize) {
    let norms: Vec<f64> = vectors.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let kept: Vec<usize> = (0..vectors.len()).filter(|&i| norms[i] > 0.0).collect();
    let excluded = vectors.len() - kept.len();
    let m = kept.len();
    if m < 2 {
        return (None, excluded);
    }
    let mut sum = 0.0;
    for &i in &kept {
        for &j in &kept {
            if i != j {
                let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
                sum += dot / (norms[i] * norms[j]);
            }
        }
    }
    (Some(sum / (m * (m - 1)) as f64), excluded)
}

pub fn symmetry_correlations(w: &Matrix) -> Result<SymmetryCorrelations, AnalysisError> {
    if w.is_zero() {
        return Err(AnalysisError::ZeroMatrix);
    }
    let rows: Vec<Vec<f64>> = (0..w.rows()).map(|r| w.row(r).to_vec()).collect();
    let cols: Vec<Vec<f64>> = (0..w.cols()).map(|c| w.column(c)).collect();
    let (c_f, excluded_rows) = mean_pairwise_cosine(&rows);
    let (c_b, excluded_cols) = mean_pairwise_cosine(&cols);
    Ok(SymmetryCorrelations { c_f, c_b, excluded_rows, excluded_cols })
}

/// Largest symmetry deviation per logged step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level1Report {
    pub steps: Vec<usize>,
    /// Per step, per layer.
    pub deviations: Vec<Vec<f64>>,
    pub holds: Vec<bool>,
}

fn max_row_spread(w: &Matrix) -> f64 {
    let first = w.row(0);
    (1..w.rows()).flat_map(|r| w.row(r).iter().zip(first).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
}

fn max_entry_spread(w: &Matrix) -> f64 {
    let c = w.get(0, 0);
    w.as_slice().iter().map(|v| (v - c).abs()).fold(0.0, f64::max)
}

fn layer_deviation(l: usize, depth: usize, w: &Matrix) -> f64 {
    if l == 0 {
        max_row_spread(w)
    } else if l + 1 == depth {
        max_row_spread(&w.transpose())
    } else {
        max_entry_spread(w)
    }
}

/// Checks the constant-initialization equalities at every snapshot: rows of
/// `W_1` equal, all entries of each middle layer equal, columns of `W_L`
/// equal, each within `tol`.
pub fn level1_symmetry_check(spec: &NetworkSpec, trace: &TrainingTrace, tol: f64) -> Result<Level1Report, AnalysisError> {
    if !matches!(spec.init, InitScheme::Constant { .. }) {
        return Err(AnalysisError::NotApplicable(format!("init {} is not constant", spec.init.name())));
    }
    if spec.has_residual() {
        return Err(AnalysisError::NotApplicable("residual network".into()));
    }
    if spec.depth() < 2 {
        return Err(AnalysisError::NotApplicable("needs at least two layers".into()));
    }
    let hidden = &spec.layer_dims[1..spec.depth()];
    if hidden.iter().any(|&d| d != hidden[0]) {
        return Err(AnalysisError::NotApplicable("hidden widths differ".into()));
    }
    if trace.snapshots.is_empty() {
        return Err(AnalysisError::MissingSnapshots);
    }
    let mut report = Level1Report { steps: Vec::new(), deviations: Vec::new(), holds: Vec::new() };
    for (step, weights) in &trace.snapshots {
        let devs: Vec<f64> = weights.iter().enumerate().map(|(l, w)| layer_deviation(l, weights.len(), w)).collect();
        if let Some((l, &d)) = devs.iter().enumerate().find(|(_, &d)| !(d <= tol)) {
            return Err(AnalysisError::SymmetryViolation { step: *step, layer: l + 1, deviation: d });
        }
        report.steps.push(*step);
        report.deviations.push(devs);
        report.holds.push(true);
    }
    Ok(report)
}
