mod common;

use nalgebra::DMatrix;
use ptx_core::linalg::{
    orthonormalize, perturbed_basis, principal_angle_sin, random_orthonormal,
    subspace_residual_norms, symmetric_eigen_descending, OrthonormalBasis,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn jacobi_oracle_matches_closed_form_2x2() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let (vals, vecs) = common::jacobi_eigen(&m);
    assert!((vals[0] - 3.0).abs() < 1e-12);
    assert!((vals[1] - 1.0).abs() < 1e-12);
    let recon = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals)) * vecs.transpose();
    assert!((recon - m).norm() < 1e-12);
}

#[test]
fn jacobi_oracle_agrees_with_production_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = DMatrix::from_fn(12, 12, |_, _| rng.sample::<f64, _>(StandardNormal));
    let m = &g * g.transpose();
    let (oracle_vals, _) = common::jacobi_eigen(&m);
    let eig = symmetric_eigen_descending(&m).unwrap();
    for (a, b) in oracle_vals.iter().zip(&eig.eigenvalues) {
        assert!((a - b).abs() <= 1e-8 * m.norm().max(1.0));
    }
}

// Span equality for orthonormalize, checked against the normal-equations
// projector oracle (Jacobi-inverted Gram), on random 25x5 Gaussian inputs.
#[test]
fn orthonormalize_spans_input_column_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let m = DMatrix::from_fn(25, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = orthonormalize(&m).unwrap();
        let gram = q.columns().transpose() * q.columns();
        assert!((gram - DMatrix::<f64>::identity(5, 5)).norm() <= 1e-10);
        let p_prod = q.columns() * q.columns().transpose();
        let p_oracle = common::span_projector(&m);
        assert!((p_prod - p_oracle).norm() <= 1e-8);
    }
}

// span(e1) vs span(cos(pi/6) e1 + sin(pi/6) e2): the principal angle is pi/6,
// so the sine is exactly 0.5. Cross-checked against the projector-difference
// operator-norm oracle.
#[test]
fn planar_rotation_closed_form() {
    let theta = std::f64::consts::PI / 6.0;
    let a = OrthonormalBasis::from_columns(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
    let b = OrthonormalBasis::from_columns(DMatrix::from_column_slice(
        2,
        1,
        &[theta.cos(), theta.sin()],
    ))
    .unwrap();
    let s = principal_angle_sin(&a, &b).unwrap();
    assert!((s - 0.5).abs() <= 1e-12);
    let oracle = common::projector_diff_opnorm(a.columns(), b.columns());
    assert!((s - oracle).abs() <= 1e-10);
}

#[test]
fn perturbed_basis_hits_requested_angle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let b = random_orthonormal(25, 5, &mut rng).unwrap();
    let p = perturbed_basis(&b, 0.3, &mut rng).unwrap();
    let s = principal_angle_sin(&b, &p).unwrap();
    assert!((s - 0.3).abs() <= 1e-8);
    let oracle = common::projector_diff_opnorm(b.columns(), p.columns());
    assert!((oracle - 0.3).abs() <= 1e-8);
}

// Frobenius >= operator >= frobenius / sqrt(k) on 1000 random pairs with
// mixed shapes (d <= 50, k <= 10).
#[test]
fn residual_norm_chain_holds_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for i in 0..1000 {
        let d = 2 + (rng.random::<u64>() % 49) as usize;
        let k = 1 + (rng.random::<u64>() % 10.min(d as u64 - 1)) as usize;
        let a = random_orthonormal(d, k, &mut rng).unwrap();
        let b = random_orthonormal(d, k, &mut rng).unwrap();
        let r = subspace_residual_norms(&a, &b).unwrap();
        let sin = principal_angle_sin(&a, &b).unwrap();
        assert!(
            r.frobenius + 1e-10 >= r.operator,
            "pair {i}: frobenius {} < operator {}",
            r.frobenius,
            r.operator
        );
        assert!(
            r.operator + 1e-10 >= r.frobenius / (k as f64).sqrt(),
            "pair {i}: operator {} < frobenius/sqrt(k) {}",
            r.operator,
            r.frobenius / (k as f64).sqrt()
        );
        assert!((sin - r.operator.min(1.0)).abs() <= 1e-10);
    }
}

#[test]
fn principal_angle_symmetry_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..100 {
        let a = random_orthonormal(20, 4, &mut rng).unwrap();
        let b = random_orthonormal(20, 4, &mut rng).unwrap();
        let ab = principal_angle_sin(&a, &b).unwrap();
        let ba = principal_angle_sin(&b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-10);
    }
}

mod prop {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // perturbed_basis composed with principal_angle_sin is the identity on gamma.
        #[test]
        fn gamma_round_trip(seed in 0u64..1_000_000, gamma in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_orthonormal(12, 3, &mut rng).unwrap();
            let p = perturbed_basis(&b, gamma, &mut rng).unwrap();
            let s = principal_angle_sin(&b, &p).unwrap();
            prop_assert!((s - gamma).abs() <= 1e-8);
        }

        #[test]
        fn angle_is_bounded(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_orthonormal(10, 3, &mut rng).unwrap();
            let b = random_orthonormal(10, 3, &mut rng).unwrap();
            let s = principal_angle_sin(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
