use crate::config::{DataSource, ExperimentConfig, MNIST_ENV};
use crate::error::CliError;
use std::path::PathBuf;
use zerolab::data::{
    argmax_one_hot, load_mnist, read_cache_file, synthetic_with_teacher, teacher_matrix, whiten, Standardizer,
};
use zerolab::Dataset;

/// Offset separating held-out synthetic inputs from the training draw.
const TEST_SEED_OFFSET: u64 = 0x7e57_0000_0000_0000;

pub struct Splits {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

pub fn mnist_dir(dir: &Option<PathBuf>) -> PathBuf {
    dir.clone()
        .or_else(|| std::env::var_os(MNIST_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

pub fn load(cfg: &ExperimentConfig) -> Result<Splits, CliError> {
    let (n_x, n_y) = (cfg.network.n_x(), cfg.network.n_y());
    let splits = match &cfg.data {
        DataSource::Synthetic { seed, samples, noise_std, test_samples, one_hot, whiten: white } => {
            let teacher = teacher_matrix(*seed, n_x, n_y);
            let label = |d: Dataset| -> Result<Dataset, CliError> {
                if *one_hot {
                    let t = argmax_one_hot(d.targets());
                    Ok(Dataset::new(d.inputs().clone(), t)?)
                } else {
                    Ok(d)
                }
            };
            let mut train = label(synthetic_with_teacher(*seed, &teacher, *samples, *noise_std))?;
            if *white {
                train = whiten(&train)?;
            }
            let test = if *test_samples > 0 {
                Some(label(synthetic_with_teacher(seed ^ TEST_SEED_OFFSET, &teacher, *test_samples, *noise_std))?)
            } else {
                None
            };
            Splits { train, test }
        }
        DataSource::Mnist { dir, train_limit, test_limit, standardize } => {
            let dir = mnist_dir(dir);
            let train = load_mnist(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"), *train_limit)?;
            let test = load_mnist(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"), *test_limit)?;
            if *standardize {
                let s = Standardizer::fit(&train);
                Splits { train: s.apply(&train)?, test: Some(s.apply(&test)?) }
            } else {
                Splits { train, test: Some(test) }
            }
        }
        DataSource::Cache { train, test } => Splits {
            train: read_cache_file(train)?,
            test: test.as_ref().map(|p| read_cache_file(p)).transpose()?,
        },
    };
    for d in std::iter::once(&splits.train).chain(&splits.test) {
        if d.n_x() != n_x || d.n_y() != n_y {
            return Err(CliError::Config(format!(
                "data has {} inputs and {} outputs but the network expects {n_x} and {n_y}",
                d.n_x(),
                d.n_y()
            )));
        }
    }
    Ok(splits)
}
