use proptest::prelude::*;
use zerolab::analysis::symmetry_correlations;
use zerolab::data::{read_cache, teacher_matrix, write_cache, Dataset};
use zerolab::init::{census, hadamard_order, partial_identity, zero_init_matrix, Census};
use zerolab::prune::magnitude_prune;
use zerolab::tensor::{fwht, fwht_in_place, hadamard_matrix, matmul, matmul_naive, matmul_seq, matmul_transb, Matrix};
use zerolab::{InitScheme, Network, NetworkSpec, Nonlinearity};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn sized_matrix(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| matrix(r, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fwht_equals_dense_on_integers(m in 0u32..=10, seed in any::<u64>()) {
        let n = 1usize << m;
        let v: Vec<f64> = (0..n).map(|i| ((seed.rotate_left(i as u32 % 64) ^ i as u64) % 2001) as f64 - 1000.0).collect();
        let dense = hadamard_matrix(m).unwrap().matvec(&v).unwrap();
        let mut fast = v.clone();
        let passes = fwht_in_place(&mut fast).unwrap();
        prop_assert_eq!(passes, m);
        prop_assert_eq!(&fast, &dense);
        prop_assert_eq!(fwht(&v).unwrap(), dense);
    }

    #[test]
    fn fwht_is_an_involution_up_to_scale(v in prop::collection::vec(-100i32..100, 64)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let twice = fwht(&fwht(&v).unwrap()).unwrap();
        let back: Vec<f64> = twice.iter().map(|x| x / 64.0).collect();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn gemm_paths_agree_with_naive(a in sized_matrix(40), seed in any::<u64>(), n in 1usize..40) {
        let b = Matrix::from_fn(a.cols(), n, |r, c| ((seed ^ (r * 131 + c) as u64) % 97) as f64 / 7.0 - 6.0);
        let naive = matmul_naive(&a, &b).unwrap();
        prop_assert_eq!(&matmul(&a, &b).unwrap(), &naive);
        prop_assert_eq!(&matmul_seq(&a, &b).unwrap(), &naive);
        prop_assert_eq!(&matmul_transb(&a, &b.transpose()).unwrap(), &naive);
    }

    #[test]
    fn zero_init_shape_and_values(p in 1usize..80, q in 1usize..80) {
        let w = zero_init_matrix(p, q).unwrap();
        prop_assert_eq!(w.shape(), (p, q));
        let c = Census::of_matrix(&w);
        prop_assert_eq!(c.total(), p * q);
        if p <= q {
            prop_assert_eq!(&w, &partial_identity(p, q).unwrap());
            prop_assert_eq!(c.ones, p);
        } else {
            let m = hadamard_order(p);
            let scale = 2f64.powf(-((m as f64) - 1.0) / 2.0);
            prop_assert!(w.as_slice().iter().all(|&v| v.abs() == scale));
            let h = hadamard_matrix(m).unwrap();
            for i in 0..p {
                for j in 0..q {
                    prop_assert_eq!(w.get(i, j), scale * h.get(i, j));
                }
            }
        }
    }

    #[test]
    fn zero_net_census_sums_to_parameters(dims in prop::collection::vec(1usize..40, 2..5)) {
        let net = Network::build(NetworkSpec::new(dims, Nonlinearity::Relu, InitScheme::zero())).unwrap();
        prop_assert_eq!(census(&net).total(), net.parameter_count());
    }

    #[test]
    fn cache_round_trip_is_bit_exact(x in sized_matrix(12), ny in 1usize..5, seed in any::<u64>()) {
        let y = Matrix::from_fn(x.rows(), ny, |r, c| f64::from_bits((seed ^ (r * 7 + c) as u64) & 0x3fff_ffff_ffff_ffff) - 1.0);
        prop_assume!(y.is_finite());
        let d = Dataset::new(x, y).unwrap();
        let mut buf = Vec::new();
        write_cache(&d, &mut buf).unwrap();
        prop_assert_eq!(buf.len(), 16 + 8 * (d.inputs().len() + d.targets().len()));
        let back = read_cache(buf.as_slice()).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.inputs()), bits(d.inputs()));
        prop_assert_eq!(bits(back.targets()), bits(d.targets()));
    }

    #[test]
    fn pruning_is_idempotent_and_monotone(w in sized_matrix(12), f1 in 0.0f64..0.99, f2 in 0.0f64..0.99) {
        let spec = NetworkSpec::new(vec![w.cols(), w.rows()], Nonlinearity::Identity, InitScheme::zero());
        let net = Network::from_weights(spec, vec![w.clone()]).unwrap();
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let (p_lo, m_lo) = magnitude_prune(&net, lo).unwrap();
        let (p_hi, m_hi) = magnitude_prune(&net, hi).unwrap();
        prop_assert_eq!(m_lo.total() - m_lo.kept(), (lo * w.len() as f64).floor() as usize);
        for (k_lo, k_hi) in m_lo.layer(0).iter().zip(m_hi.layer(0)) {
            prop_assert!(*k_lo || !*k_hi, "larger fraction must prune a superset");
        }
        let (again, _) = magnitude_prune(&p_lo, lo).unwrap();
        prop_assert_eq!(&again, &p_lo);
        prop_assert!((0.0..=1.0).contains(&m_hi.kept_fraction()));
        let x = Matrix::from_fn(3, w.cols(), |r, c| (r + 2 * c) as f64 - 1.5);
        let masked = Network::from_weights(net.spec().clone(), m_hi.apply(net.weights())).unwrap();
        prop_assert_eq!(p_hi.predict(&x).unwrap(), masked.predict(&x).unwrap());
    }

    #[test]
    fn correlations_are_bounded(w in sized_matrix(10)) {
        prop_assume!(!w.is_zero());
        let c = symmetry_correlations(&w).unwrap();
        for v in [c.c_f, c.c_b].into_iter().flatten() {
            prop_assert!(v.abs() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn correlations_match_double_loop_oracle() {
    let w = teacher_matrix(31, 16, 16);
    let c = symmetry_correlations(&w).unwrap();
    let cosine = |a: &[f64], b: &[f64]| {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for k in 0..a.len() {
            dot += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        dot / (na.sqrt() * nb.sqrt())
    };
    let mut cf = 0.0;
    let mut cb = 0.0;
    for i in 0..16 {
        for j in 0..16 {
            if i != j {
                cf += cosine(w.row(i), w.row(j));
                cb += cosine(&w.column(i), &w.column(j));
            }
        }
    }
    cf /= 240.0;
    cb /= 240.0;
    assert!((c.c_f.unwrap() - cf).abs() < 1e-12);
    assert!((c.c_b.unwrap() - cb).abs() < 1e-12);
}

#[test]
fn zero_init_product_structure() {
    // c^2 H^T H = 2^{1-m} * 2^m I = 2 I for a full power-of-two height.
    let w = zero_init_matrix(8, 3).unwrap();
    let g = matmul(&w.transpose(), &w).unwrap();
    assert_eq!(g, Matrix::identity(3).scale(2.0));
}
