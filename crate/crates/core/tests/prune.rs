use std::path::PathBuf;
use zerolab::data::{argmax_one_hot, load_mnist, synthetic_teacher};
use zerolab::net::{train, TrainConfig};
use zerolab::prune::{classify_accuracy, magnitude_prune};
use zerolab::{InitScheme, Network, NetworkSpec, Nonlinearity};

fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

#[test]
fn accuracy_matches_straight_line_count() {
    let d = synthetic_teacher(51, 6, 4, 100, 0.0);
    let d = zerolab::Dataset::new(d.inputs().clone(), argmax_one_hot(d.targets())).unwrap();
    let mut net = Network::build(NetworkSpec::new(vec![6, 16, 4], Nonlinearity::Relu, InitScheme::zero())).unwrap();
    train(&mut net, &d, &TrainConfig::new(0.002, 30)).unwrap();
    let mut correct = 0;
    for mu in 0..d.len() {
        let out = net.forward(d.inputs().row(mu)).unwrap();
        let out = out.output().row(0);
        let mut best = 0;
        for i in 1..out.len() {
            if out[i] > out[best] {
                best = i;
            }
        }
        if d.targets().get(mu, best) == 1.0 {
            correct += 1;
        }
    }
    assert_eq!(classify_accuracy(&net, &d).unwrap(), correct as f64 / 100.0);
}

#[test]
fn constant_output_net_scores_the_first_class_frequency() {
    let dir = mnist_dir();
    let d = load_mnist(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"), None)
        .unwrap_or_else(|e| panic!("MNIST test split not available in {} ({e}); set MNIST_DIR", dir.display()));
    let spec = NetworkSpec::new(vec![784, 10], Nonlinearity::Identity, InitScheme::Constant { value: 0.0 });
    let net = Network::build(spec).unwrap();
    let zeros = (0..d.len()).filter(|&r| d.targets().get(r, 0) == 1.0).count();
    let acc = classify_accuracy(&net, &d).unwrap();
    assert_eq!(acc, zeros as f64 / d.len() as f64);
    assert!((acc - 0.1).abs() < 0.02);
}

#[test]
fn pruning_leaves_the_original_untouched() {
    let net = Network::build(NetworkSpec::new(vec![4, 8, 3], Nonlinearity::Relu, InitScheme::RandomFanIn { gain: 1.0, seed: 2 })).unwrap();
    let before = net.clone();
    let (pruned, mask) = magnitude_prune(&net, 0.5).unwrap();
    assert_eq!(net, before);
    assert_eq!(mask.kept(), 16 + 12);
    assert_eq!(mask.shape(0), (8, 4));
    assert_ne!(pruned, net);
}
