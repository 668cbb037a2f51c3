//! One-shot per-layer magnitude pruning and classification accuracy.

use crate::data::{argmax, Dataset};
use crate::net::{NetError, Network};
use crate::tensor::Matrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("prune fraction {0} must lie in [0, 1)")]
    InvalidFraction(f64),
    #[error("target row {row} is not one-hot")]
    NotOneHot { row: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Per-layer keep masks (`true` = kept).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PruneMask {
    layers: Vec<Vec<bool>>,
    shapes: Vec<(usize, usize)>,
}

impl PruneMask {
    pub fn layer(&self, l: usize) -> &[bool] {
        &self.layers[l]
    }

    pub fn shape(&self, l: usize) -> (usize, usize) {
        self.shapes[l]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn kept(&self) -> usize {
        self.layers.iter().flatten().filter(|&&k| k).count()
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Kept entries over all entries, in `[0, 1]`.
    pub fn kept_fraction(&self) -> f64 {
        self.kept() as f64 / self.total() as f64
    }

    /// Elementwise product with the mask.
    pub fn apply(&self, weights: &[Matrix]) -> Vec<Matrix> {
        weights
            .iter()
            .zip(&self.layers)
            .map(|(w, keep)| {
                let mut w = w.clone();
                for (v, &k) in w.as_mut_slice().iter_mut().zip(keep) {
                    if !k {
                        *v = 0.0;
                    }
                }
                w
            })
            .collect()
    }
}

/// Zeroes the `floor(fraction * n)` smallest-magnitude entries of each
/// layer, breaking ties by row-major index. The input network is untouched.
pub fn magnitude_prune(net: &Network, fraction: f64) -> Result<(Network, PruneMask), PruneError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(PruneError::InvalidFraction(fraction));
    }
    let mut layers = Vec::with_capacity(net.depth());
    for w in net.weights() {
        let vals = w.as_slice();
        let n_prune = (fraction * vals.len() as f64).floor() as usize;
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()).then(a.cmp(&b)));
        let mut keep = vec![true; vals.len()];
        for &i in &order[..n_prune] {
            keep[i] = false;
        }
        layers.push(keep);
    }
    let mask = PruneMask { layers, shapes: net.weights().iter().map(Matrix::shape).collect() };
    let pruned = Network::from_weights(net.spec().clone(), mask.apply(net.weights()))?;
    Ok((pruned, mask))
}

/// Fraction of samples whose output argmax matches the one-hot target
/// (ties go to the lowest index).
pub fn classify_accuracy(net: &Network, data: &Dataset) -> Result<f64, PruneError> {
    check_one_hot(data.targets())?;
    let out = net.predict(data.inputs())?;
    accuracy_of_outputs(&out, data.targets())
}

/// As [`classify_accuracy`] for precomputed outputs (one row per sample).
pub fn accuracy_of_outputs(outputs: &Matrix, targets: &Matrix) -> Result<f64, PruneError> {
    check_one_hot(targets)?;
    let correct = (0..outputs.rows()).filter(|&r| argmax(outputs.row(r)) == argmax(targets.row(r))).count();
    Ok(correct as f64 / outputs.rows() as f64)
}

fn check_one_hot(t: &Matrix) -> Result<(), PruneError> {
    for r in 0..t.rows() {
        let row = t.row(r);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(PruneError::NotOneHot { row: r });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitScheme;
    use crate::net::{NetworkSpec, Nonlinearity};

    fn single(w: Matrix) -> Network {
        let spec = NetworkSpec::new(vec![w.cols(), w.rows()], Nonlinearity::Identity, InitScheme::zero());
        Network::from_weights(spec, vec![w]).unwrap()
    }

    #[test]
    fn half_of_two_by_two() {
        let net = single(Matrix::from_rows(&[[0.1, -5.0], [2.0, 0.01]]).unwrap());
        let (p, mask) = magnitude_prune(&net, 0.5).unwrap();
        assert_eq!(p.weights()[0].as_slice(), &[0.0, -5.0, 2.0, 0.0]);
        assert_eq!(mask.kept_fraction(), 0.5);
    }

    #[test]
    fn ties_prune_lower_index_first() {
        let net = single(Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap());
        let (p, _) = magnitude_prune(&net, 0.5).unwrap();
        assert_eq!(p.weights()[0].as_slice(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn fraction_bounds() {
        let net = single(Matrix::identity(2));
        for f in [1.0, -0.1, f64::NAN] {
            assert!(magnitude_prune(&net, f).is_err());
        }
        assert_eq!(magnitude_prune(&net, 0.0).unwrap().0, net);
    }

    #[test]
    fn accuracy_requires_one_hot() {
        let net = single(Matrix::identity(2));
        let d = Dataset::new(Matrix::identity(2), Matrix::from_rows(&[[0.5, 0.5], [0.0, 1.0]]).unwrap()).unwrap();
        assert!(matches!(classify_accuracy(&net, &d), Err(PruneError::NotOneHot { row: 0 })));
        let d = Dataset::new(Matrix::identity(2), Matrix::identity(2)).unwrap();
        assert_eq!(classify_accuracy(&net, &d).unwrap(), 1.0);
    }
}
