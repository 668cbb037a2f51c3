use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zerolab::data::{synthetic_teacher, Dataset};
use zerolab::net::{train, BatchMode, LossReduction, TrainConfig};
use zerolab::tensor::{singular_values, Matrix};
use zerolab::{InitScheme, Network, NetworkSpec, Nonlinearity};

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| r.random::<f64>() * 2.0 - 1.0)
}

/// A spec with L in {2,3,4}, dims <= 16, either nonlinearity and a random
/// residual pattern, with random weights.
fn random_net(seed: u64) -> Network {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let depth = r.random_range(2..=4);
    let dims: Vec<usize> = (0..=depth).map(|_| r.random_range(1..=16)).collect();
    let nl = if seed % 2 == 0 { Nonlinearity::Relu } else { Nonlinearity::Identity };
    let residual = (0..depth).map(|_| r.random_bool(0.5)).collect();
    let spec = NetworkSpec::new(dims, nl, InitScheme::RandomFanIn { gain: 1.0, seed }).with_residual(residual);
    let weights = (0..depth).map(|l| {
        let (rows, cols) = spec.weight_shape(l);
        random_matrix(&mut r, rows, cols).scale(0.8)
    }).collect();
    Network::from_weights(spec, weights).unwrap()
}

fn random_data(seed: u64, p: usize, n_x: usize, n_y: usize) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
    Dataset::new(random_matrix(&mut r, p, n_x), random_matrix(&mut r, p, n_y)).unwrap()
}

/// Straight-line forward pass for one sample, written independently of the
/// batched implementation.
fn reference_forward(net: &Network, x: &[f64]) -> Vec<f64> {
    let spec = net.spec();
    let mut z = x.to_vec();
    for (l, w) in net.weights().iter().enumerate() {
        let mut next = vec![0.0; w.rows()];
        for i in 0..w.rows() {
            let mut s = 0.0;
            for j in 0..w.cols() {
                s += w.get(i, j) * z[j];
            }
            next[i] = if spec.is_activated(l) && s < 0.0 { 0.0 } else { s };
        }
        if spec.is_residual(l) {
            for i in 0..next.len().min(z.len()) {
                next[i] += z[i];
            }
        }
        z = next;
    }
    z
}

#[test]
fn forward_matches_straight_line_oracle() {
    for seed in 0..12 {
        let net = random_net(seed);
        let d = random_data(seed, 7, net.spec().n_x(), net.spec().n_y());
        let out = net.predict(d.inputs()).unwrap();
        for mu in 0..d.len() {
            let expect = reference_forward(&net, d.inputs().row(mu));
            for (a, b) in out.row(mu).iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn loss_matches_per_sample_accumulation() {
    let net = random_net(3);
    let d = random_data(3, 3, net.spec().n_x(), net.spec().n_y());
    let mut expect = 0.0;
    for mu in 0..3 {
        let f = reference_forward(&net, d.inputs().row(mu));
        expect += 0.5 * f.iter().zip(d.targets().row(mu)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    assert!((net.loss(&d).unwrap() - expect).abs() <= 1e-12 * expect.abs().max(1.0));
}

#[test]
fn single_sample_loss_value() {
    let spec = NetworkSpec::new(vec![1, 2], Nonlinearity::Identity, InitScheme::Constant { value: 0.0 });
    let net = Network::build(spec).unwrap();
    let d = Dataset::new(Matrix::filled(1, 1, 1.0), Matrix::from_rows(&[[3.0, 4.0]]).unwrap()).unwrap();
    assert_eq!(net.loss(&d).unwrap(), 12.5);
}

fn relative_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-7 {
        // Both are numerically zero; compare absolutely.
        (a - n).abs() / 1e-7
    } else {
        (a - n).abs() / scale
    }
}

/// `L(+) - L(-)` as `1/2 sum (f+ - f-)(f+ + f- - 2y)`, avoiding the
/// cancellation of subtracting two large losses.
fn loss_difference(plus: &Matrix, minus: &Matrix, y: &Matrix) -> f64 {
    let mut s = 0.0;
    for ((p, m), t) in plus.as_slice().iter().zip(minus.as_slice()).zip(y.as_slice()) {
        s += 0.5 * (p - m) * (p + m - 2.0 * t);
    }
    s
}

#[test]
fn gradients_match_central_differences() {
    const EPS: f64 = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..12 {
        let net = random_net(seed);
        let d = random_data(seed, 6, net.spec().n_x(), net.spec().n_y());
        let grads = net.backward(&d).unwrap();
        for l in 0..net.depth() {
            for idx in 0..grads[l].len() {
                let mut w = net.weights().to_vec();
                let orig = w[l].as_slice()[idx];
                w[l].as_mut_slice()[idx] = orig + EPS;
                let plus = Network::from_weights(net.spec().clone(), w.clone()).unwrap().predict(d.inputs()).unwrap();
                w[l].as_mut_slice()[idx] = orig - EPS;
                let minus = Network::from_weights(net.spec().clone(), w).unwrap().predict(d.inputs()).unwrap();
                let numeric = loss_difference(&plus, &minus, d.targets()) / (2.0 * EPS);
                let err = relative_error(grads[l].as_slice()[idx], numeric);
                assert!(err < 1e-6, "seed {seed} layer {} entry {idx}: analytic {} numeric {numeric}", l + 1, grads[l].as_slice()[idx]);
                worst = worst.max(err);
            }
        }
    }
    assert!(worst < 1e-6);
}

#[test]
fn mean_reduction_scales_gradients() {
    let net = random_net(4);
    let d = random_data(4, 8, net.spec().n_x(), net.spec().n_y());
    let (ls, gs) = net.loss_and_gradients(d.inputs(), d.targets(), LossReduction::Sum).unwrap();
    let (lm, gm) = net.loss_and_gradients(d.inputs(), d.targets(), LossReduction::Mean).unwrap();
    assert!((ls / 8.0 - lm).abs() < 1e-12 * ls.abs().max(1.0));
    for (a, b) in gs.iter().zip(&gm) {
        assert!(a.scale(1.0 / 8.0).max_abs_diff(b).unwrap() < 1e-12);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    const EPS: f64 = 1e-5;
    for seed in 0..10 {
        let net = random_net(seed);
        let n_x = net.spec().n_x();
        let mut r = ChaCha8Rng::seed_from_u64(seed + 100);
        let x: Vec<f64> = (0..n_x).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let j = net.input_output_jacobian(&x).unwrap();
        assert_eq!(j.shape(), (net.spec().n_y(), n_x));
        for c in 0..n_x {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += EPS;
            xm[c] -= EPS;
            let fp = reference_forward(&net, &xp);
            let fm = reference_forward(&net, &xm);
            for row in 0..j.rows() {
                let numeric = (fp[row] - fm[row]) / (2.0 * EPS);
                assert!(relative_error(j.get(row, c), numeric) < 1e-6, "seed {seed} ({row},{c})");
            }
        }
    }
}

#[test]
fn zero_init_linear_step_is_eta_sigma_yx() {
    let d = synthetic_teacher(11, 5, 3, 40, 0.2);
    let spec = NetworkSpec::new(vec![5, 3], Nonlinearity::Identity, InitScheme::Constant { value: 0.0 });
    let mut net = Network::build(spec).unwrap();
    let g = net.backward(&d).unwrap();
    assert!(g[0].max_abs_diff(&d.sigma_yx().scale(-1.0)).unwrap() < 1e-12);
    train(&mut net, &d, &TrainConfig::new(0.05, 1)).unwrap();
    let expect = d.sigma_yx().scale(0.05);
    assert!(net.weights()[0].max_abs_diff(&expect).unwrap() < 1e-10);
}

#[test]
fn residual_chain_step_is_uniform() {
    let d = synthetic_teacher(12, 4, 4, 30, 0.1);
    let spec = NetworkSpec::new(vec![4; 5], Nonlinearity::Identity, InitScheme::zero()).all_residual();
    let mut net = Network::build(spec).unwrap();
    assert!(net.weights().iter().all(Matrix::is_zero));
    train(&mut net, &d, &TrainConfig::new(0.05, 1)).unwrap();
    let expect = d.sigma_yx().sub(&d.sigma_xx()).unwrap().scale(0.05);
    for w in net.weights() {
        assert!(w.max_abs_diff(&expect).unwrap() < 1e-10);
    }
}

#[test]
fn zero_equal_dims_is_exact_identity() {
    let spec = NetworkSpec::new(vec![6; 4], Nonlinearity::Identity, InitScheme::zero());
    let net = Network::build(spec).unwrap();
    let d = synthetic_teacher(5, 6, 6, 20, 0.0);
    assert_eq!(&net.predict(d.inputs()).unwrap(), d.inputs());
    let j = net.input_output_jacobian(d.inputs().row(0)).unwrap();
    assert_eq!(j, Matrix::identity(6));
    for s in singular_values(&j).unwrap() {
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_residual_relu_net_is_identity_on_positive_inputs() {
    let spec = NetworkSpec::new(vec![4, 4, 4], Nonlinearity::Relu, InitScheme::zero()).all_residual();
    let net = Network::build(spec).unwrap();
    let x = [0.5, 1.0, 2.0, 3.0];
    assert_eq!(net.forward(&x).unwrap().output().row(0), &x);
    assert_eq!(net.input_output_jacobian(&x).unwrap(), Matrix::identity(4));
}

#[test]
fn relu_hadamard_first_layer_pattern() {
    let spec = NetworkSpec::new(vec![3, 4, 4, 3], Nonlinearity::Relu, InitScheme::zero());
    let net = Network::build(spec).unwrap();
    let acts = net.forward(&[0.0, 1.0, 0.0]).unwrap();
    let z1 = acts.post[1].row(0);
    let pattern: Vec<bool> = z1.iter().map(|&v| v > 0.0).collect();
    assert_eq!(pattern, [true, false, true, false]);
    let c = z1[0];
    assert_eq!(z1, &[c, 0.0, c, 0.0]);
}

#[test]
fn full_batch_training_is_deterministic() {
    let d = synthetic_teacher(21, 6, 3, 50, 0.1);
    let spec = NetworkSpec::new(vec![6, 16, 16, 3], Nonlinearity::Relu, InitScheme::zero());
    let run = || {
        let mut net = Network::build(spec.clone()).unwrap();
        let trace = train(&mut net, &d, &TrainConfig::new(0.005, 40)).unwrap();
        (net, trace)
    };
    let (a, ta) = run();
    let (b, tb) = run();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
}

#[test]
fn logging_cadence_does_not_change_weights() {
    let d = synthetic_teacher(22, 5, 2, 64, 0.1);
    let spec = NetworkSpec::new(vec![5, 8, 2], Nonlinearity::Relu, InitScheme::zero());
    let mut finals = Vec::new();
    for log_every in [1, 3, 7, 100] {
        let mut net = Network::build(spec.clone()).unwrap();
        let mut cfg = TrainConfig::new(0.01, 30);
        cfg.batch = BatchMode::Mini { size: 10, shuffle_seed: 9 };
        cfg.warmup_steps = 5;
        cfg.log_every = log_every;
        let trace = train(&mut net, &d, &cfg).unwrap();
        assert_eq!(trace.records[0].step, 0);
        assert!(trace.records.windows(2).all(|w| w[0].step < w[1].step));
        finals.push(net);
    }
    assert!(finals.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn shuffle_seed_changes_minibatch_order() {
    let d = synthetic_teacher(23, 5, 2, 64, 0.1);
    let spec = NetworkSpec::new(vec![5, 8, 2], Nonlinearity::Relu, InitScheme::zero());
    let run = |seed| {
        let mut net = Network::build(spec.clone()).unwrap();
        let mut cfg = TrainConfig::new(0.01, 12);
        cfg.batch = BatchMode::Mini { size: 10, shuffle_seed: seed };
        train(&mut net, &d, &cfg).unwrap();
        net
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[cfg(feature = "parallel")]
#[test]
fn training_is_identical_across_thread_counts() {
    let d = synthetic_teacher(24, 32, 8, 300, 0.1);
    let spec = NetworkSpec::new(vec![32, 256, 256, 8], Nonlinearity::Relu, InitScheme::zero());
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut net = Network::build(spec.clone()).unwrap();
            let mut cfg = TrainConfig::new(0.01, 8);
            cfg.batch = BatchMode::Mini { size: 128, shuffle_seed: 3 };
            cfg.loss_reduction = LossReduction::Mean;
            train(&mut net, &d, &cfg).unwrap();
            net
        })
    };
    assert_eq!(run(1), run(4));
}
