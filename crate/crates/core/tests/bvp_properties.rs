use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use newtonreg::bvp::{self, BvpSpec, GridFunction};
use newtonreg::linops::{estimate_operator_norm, weighted_dot, weighted_norm, LinearOperator};

fn uniform(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(lo..hi)).collect()
}

#[test]
fn adjoint_identity_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in [10, 100] {
        let spec = bvp::reference_spec(m).unwrap();
        let h = spec.h();
        for _ in 0..50 {
            let c = uniform(&mut rng, m, 0.5, 3.0);
            let u = spec.forward(&c).unwrap();
            let dir = uniform(&mut rng, m, -1.0, 1.0);
            let w = uniform(&mut rng, m, -1.0, 1.0);
            let lhs = weighted_dot(&spec.derivative_apply(&c, &u, &dir).unwrap(), &w, h);
            let rhs = weighted_dot(&dir, &spec.adjoint_apply(&c, &u, &w).unwrap(), h);
            let scale = weighted_norm(&dir, h) * weighted_norm(&w, h);
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "m={m}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn system_matrix_is_symmetric_and_diagonally_dominant() {
    let spec = bvp::reference_spec(40).unwrap();
    let c = bvp::reference_truth(40);
    let a = spec.system(&c).unwrap().to_dense();
    assert_eq!(a, a.transpose());
    for i in 0..40 {
        let off: f64 = (0..40).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        assert!(a[(i, i)] > off);
    }
}

#[test]
fn jacobian_norm_matches_singular_values() {
    let m = 60;
    let spec = bvp::reference_spec(m).unwrap();
    let c = bvp::smooth_initial_guess(m);
    let j = spec.materialize_jacobian(&c).unwrap();
    // Weights cancel: both spaces carry the same h.
    let sigma = DMatrix::from_row_slice(m, m, j.as_slice()).singular_values().max();
    let lin = spec.linearization(&c).unwrap();
    let est = estimate_operator_norm(
        |x| {
            let mut out = vec![0.0; m];
            lin.apply(x, &mut out);
            out
        },
        |y| {
            let mut out = vec![0.0; m];
            lin.apply_adjoint(y, &mut out);
            out
        },
        m,
    );
    assert!((est.value - sigma).abs() <= 1e-4 * sigma, "{} vs {sigma}", est.value);
}

#[test]
fn forward_converges_to_continuum_solution() {
    // u = 1 + t solves the continuum problem exactly and is reproduced by the scheme.
    for m in [10, 50, 200] {
        let u = bvp::reference_spec(m).unwrap().forward(&bvp::reference_truth(m)).unwrap();
        let exact = GridFunction::from_fn(m, |t| 1.0 + t);
        let err: Vec<f64> = u.iter().zip(exact.iter()).map(|(a, b)| a - b).collect();
        assert!(weighted_norm(&err, u.h()) < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maximum_principle(seed in any::<u64>(), m in 3usize..80, g0 in 0.0..5.0f64, g1 in 0.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = uniform(&mut rng, m, 0.0, 10.0);
        let c = uniform(&mut rng, m, 0.0, 10.0);
        let spec = BvpSpec::new(m, f, g0, g1).unwrap();
        let u = spec.forward(&c).unwrap();
        prop_assert!(u.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn adjoint_identity_random_grids(seed in any::<u64>(), m in 2usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = BvpSpec::new(m, uniform(&mut rng, m, -2.0, 2.0), 1.0, -1.0).unwrap();
        let c = uniform(&mut rng, m, 0.0, 4.0);
        let u = spec.forward(&c).unwrap();
        let dir = uniform(&mut rng, m, -1.0, 1.0);
        let w = uniform(&mut rng, m, -1.0, 1.0);
        let h = spec.h();
        let lhs = weighted_dot(&spec.derivative_apply(&c, &u, &dir).unwrap(), &w, h);
        let rhs = weighted_dot(&dir, &spec.adjoint_apply(&c, &u, &w).unwrap(), h);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * weighted_norm(&dir, h) * weighted_norm(&w, h));
    }
}
