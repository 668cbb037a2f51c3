use std::path::PathBuf;
use zerolab::data::{
    argmax, load_mnist, mnist_from_bytes, read_cache_file, synthetic_teacher, whiten, write_cache_file, DataError, Dataset,
};
use zerolab::tensor::{matmul, Matrix};

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// `MNIST_DIR`, or `data/mnist` under the workspace root.
fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR").map(PathBuf::from).unwrap_or_else(|| workspace_root().join("data/mnist"))
}

fn identity_deviation(d: &Dataset) -> f64 {
    d.sigma_xx().max_abs_diff(&Matrix::identity(d.n_x())).unwrap()
}

#[test]
fn whitening_anisotropic_gaussian() {
    let d = synthetic_teacher(41, 6, 2, 500, 0.1);
    let stretch = Matrix::from_fn(6, 6, |r, c| if r == c { (r + 1) as f64 * 3.0 } else if c == r + 1 { 0.7 } else { 0.0 });
    let d = d.with_inputs(matmul(d.inputs(), &stretch).unwrap()).unwrap();
    assert!(identity_deviation(&d) > 1.0);
    let w = whiten(&d).unwrap();
    assert!(identity_deviation(&w) < 1e-8);
    assert_eq!(w.targets(), d.targets());
}

#[test]
fn whitening_white_data_keeps_identity_covariance() {
    let d = whiten(&synthetic_teacher(42, 4, 1, 100, 0.0)).unwrap();
    let again = whiten(&d).unwrap();
    assert!(identity_deviation(&again) < 1e-8);
    assert!(again.inputs().max_abs_diff(d.inputs()).unwrap() < 1e-8);
}

#[test]
fn synthetic_input_covariance_near_identity() {
    let p = 10_000;
    let d = synthetic_teacher(43, 8, 4, p, 0.1);
    let cov = d.sigma_xx().scale(1.0 / p as f64);
    assert!(cov.max_abs_diff(&Matrix::identity(8)).unwrap() < 0.1);
}

#[test]
fn cache_file_round_trip() {
    let d = synthetic_teacher(44, 5, 3, 17, 0.3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    write_cache_file(&d, &path).unwrap();
    assert_eq!(read_cache_file(&path).unwrap(), d);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 1;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_cache_file(&path), Err(DataError::BadMagic { .. })));
}

fn tiny_idx(count: u32, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    for v in [0x803u32, count, 2, 2] {
        img.extend(v.to_be_bytes());
    }
    img.extend(pixels);
    let mut lab = Vec::new();
    for v in [0x801u32, count] {
        lab.extend(v.to_be_bytes());
    }
    lab.extend(labels);
    (img, lab)
}

#[test]
fn corrupted_headers_are_rejected_deterministically() {
    let (img, lab) = tiny_idx(2, &[0, 255, 128, 1, 2, 3, 4, 5], &[5, 0]);
    let d = mnist_from_bytes(&img, &lab, None).unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(&d.inputs().row(0)[..2], &[0.0, 1.0]);
    assert_eq!(argmax(d.targets().row(0)), 5);

    let mut bad = img.clone();
    bad[3] = 0x01;
    for _ in 0..2 {
        assert!(matches!(mnist_from_bytes(&bad, &lab, None), Err(DataError::BadMagic { found: 0x801, .. })));
    }
    assert!(matches!(mnist_from_bytes(&img[..img.len() - 1], &lab, None), Err(DataError::Truncated { .. })));
    let (_, lab3) = tiny_idx(3, &[], &[1, 2, 3]);
    assert!(matches!(mnist_from_bytes(&img, &lab3, None), Err(DataError::CountMismatch { .. })));
    let (_, lab_bad) = tiny_idx(2, &[], &[1, 10]);
    assert!(matches!(mnist_from_bytes(&img, &lab_bad, None), Err(DataError::LabelRange { index: 1, label: 10 })));
}

#[test]
fn mnist_training_set() {
    let dir = mnist_dir();
    let images = dir.join("train-images-idx3-ubyte");
    let labels = dir.join("train-labels-idx1-ubyte");
    assert!(
        images.exists() && labels.exists(),
        "MNIST IDX files not found in {}; set MNIST_DIR or see README for how to fetch them",
        dir.display()
    );
    let d = load_mnist(&images, &labels, None).unwrap();
    assert_eq!((d.len(), d.n_x(), d.n_y()), (60_000, 784, 10));
    assert_eq!(argmax(d.targets().row(0)), 5);
    assert!(d.inputs().as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(d.inputs().as_slice().iter().any(|&v| v == 1.0));
    let limited = load_mnist(&images, &labels, Some(100)).unwrap();
    assert_eq!(limited.len(), 100);
    assert_eq!(limited.inputs(), &d.inputs().row_range(0, 100));
}
