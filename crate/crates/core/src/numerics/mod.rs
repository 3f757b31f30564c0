//! Dense complex linear algebra shared by the tensor-network and oracle code:
//! matrix products, QR with a fixed diagonal convention, truncated SVD and a
//! Lanczos eigensolver.

mod decompose;
mod lanczos;
mod matrix;

pub use decompose::{qr, svd_truncate, TruncatedSvd};
pub use lanczos::{lanczos_lowest, KrylovScalar, LanczosOptions, LanczosResult};
pub use matrix::{matmul, ComplexMatrix, Tensor3};
pub(crate) use matrix::{dgemm, row_major, transposed};


use thiserror::Error;

/// Double-precision complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    DimensionMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: bad shape ({detail})")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: non-finite input")]
    NonFinite { op: &'static str },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
    #[error("{op}: not converged after {iterations} iterations")]
    NotConverged { op: &'static str, iterations: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn triple_loop(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            let mut s = c(0.0, 0.0);
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            s
        })
    }

    #[test]
    fn matmul_identity_and_pauli_x() {
        let a = ComplexMatrix::from_vec(2, 2, vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0), c(4.0, -1.0)]).unwrap();
        assert_eq!(matmul(&ComplexMatrix::identity(2), &a).unwrap(), a);
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(matmul(&x, &x).unwrap(), ComplexMatrix::identity(2));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(3, 4, &mut rng);
        let b = random(4, 2, &mut rng);
        assert!(matmul(&a, &b).unwrap().max_abs_diff(&triple_loop(&a, &b)) < 1e-14);
        let a = random(37, 53, &mut rng);
        let b = random(53, 29, &mut rng);
        assert!(matmul(&a, &b).unwrap().max_abs_diff(&triple_loop(&a, &b)) < 1e-12);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&ComplexMatrix::zeros(2, 3), &ComplexMatrix::zeros(2, 3)).unwrap_err();
        assert_eq!(err, NumericsError::DimensionMismatch { op: "matmul", left: (2, 3), right: (2, 3) });
        assert!(err.to_string().contains("(2, 3)"));
    }

    #[test]
    fn qr_identity_and_vector() {
        let (q, r) = qr(&ComplexMatrix::identity(3)).unwrap();
        assert!(q.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
        assert!(r.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);

        let (q, r) = qr(&ComplexMatrix::from_real(2, 1, &[3.0, 4.0]).unwrap()).unwrap();
        assert!(q.max_abs_diff(&ComplexMatrix::from_real(2, 1, &[0.6, 0.8]).unwrap()) < 1e-15);
        assert!(r.max_abs_diff(&ComplexMatrix::from_real(1, 1, &[5.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(m, n) in &[(6, 4), (4, 6), (64, 64), (10, 1), (1, 7)] {
            let a = random(m, n, &mut rng);
            let (q, r) = qr(&a).unwrap();
            assert!(matmul(&q, &r).unwrap().max_abs_diff(&a) < 1e-12, "{m}x{n}");
            let k = m.min(n);
            assert!(matmul(&q.adjoint(), &q).unwrap().max_abs_diff(&ComplexMatrix::identity(k)) < 1e-12);
            for i in 0..k {
                assert!(r[(i, i)].im == 0.0 && r[(i, i)].re >= 0.0);
                for j in 0..i.min(n) {
                    assert_eq!(r[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn svd_graded_and_degenerate_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spectra: [&[f64]; 4] = [
            &[1.0, 1.0, 1.0, 1e-8, 1e-8, 1e-17, 0.0, 0.0],
            &[3.0, 1e-13, 1e-14, 1e-15, 1e-16, 1e-200, 1e-300],
            &[1.0; 12],
            &[1.0, 0.5, 0.5, 0.5, 1e-3, 1e-3, 1e-12, 1e-12, 1e-12, 0.0],
        ];
        for spec in spectra {
            let n = spec.len();
            for rows in [n, 3 * n] {
                let (q1, _) = qr(&random(rows, n, &mut rng)).unwrap();
                let (q2, _) = qr(&random(n, n, &mut rng)).unwrap();
                let mut us = q1.clone();
                for r in 0..rows {
                    for (k, &sv) in spec.iter().enumerate() {
                        us[(r, k)] *= sv;
                    }
                }
                let a = matmul(&us, &q2.adjoint()).unwrap();
                let svd = svd_truncate(&a, n, 0.0).unwrap();
                assert!(svd.reconstruct().max_abs_diff(&a) < 1e-12 * spec[0], "{rows}x{n}");
                let k = svd.rank();
                assert!(matmul(&svd.u.adjoint(), &svd.u).unwrap().max_abs_diff(&ComplexMatrix::identity(k)) < 1e-12);
                for (got, want) in svd.s.iter().zip(spec) {
                    assert!((got - want).abs() < 1e-12 * spec[0], "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn qr_rejects_nan() {
        let mut a = ComplexMatrix::identity(2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(qr(&a), Err(NumericsError::NonFinite { .. })));
    }

    #[test]
    fn svd_rank_one_and_identity() {
        let u = [c(1.0, 0.5), c(-0.3, 0.0), c(0.2, 2.0)];
        let v = [c(0.7, -0.1), c(1.5, 0.0)];
        let a = ComplexMatrix::from_fn(3, 2, |i, j| u[i] * v[j].conj());
        let svd = svd_truncate(&a, 1, 0.0).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!(svd.reconstruct().max_abs_diff(&a) < 1e-13);
        assert!(svd.discarded_weight < 1e-26);

        let svd = svd_truncate(&ComplexMatrix::identity(2), 1, 0.0).unwrap();
        assert!((svd.discarded_weight - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_full_rank_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(8, 8, &mut rng);
        let svd = svd_truncate(&a, 8, 0.0).unwrap();
        assert!(svd.reconstruct().max_abs_diff(&a) < 1e-12);
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        let uu = matmul(&svd.u.adjoint(), &svd.u).unwrap();
        assert!(uu.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-12);
    }

    #[test]
    fn svd_truncation_error_equals_discarded_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(m, n, k) in &[(12, 7, 3), (5, 9, 2), (16, 16, 10)] {
            let a = random(m, n, &mut rng);
            let svd = svd_truncate(&a, k, 0.0).unwrap();
            let diff = {
                let r = svd.reconstruct();
                ComplexMatrix::from_fn(m, n, |i, j| a[(i, j)] - r[(i, j)])
            };
            let err2 = diff.frobenius_norm().powi(2);
            assert!((err2 - svd.discarded_weight).abs() < 1e-11 * (1.0 + err2));
        }
    }

    #[test]
    fn svd_cutoff_drops_relative_small_values() {
        let a = ComplexMatrix::from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 1e-3, 0.0, 0.0, 0.0, 1e-9]).unwrap();
        let svd = svd_truncate(&a, 3, 1e-6).unwrap();
        assert_eq!(svd.rank(), 2);
        assert!((svd.discarded_weight - 1e-18).abs() < 1e-24);
    }

    #[test]
    fn svd_rank_deficient_keeps_orthonormal_u() {
        let a = ComplexMatrix::zeros(3, 2);
        let svd = svd_truncate(&a, 2, 0.0).unwrap();
        assert_eq!(svd.s, vec![0.0]);
        assert!(svd.reconstruct().max_abs_diff(&a) == 0.0);
    }

    #[test]
    fn lanczos_real_diagonal() {
        let diag: Vec<f64> = (0..50).map(|i| (i as f64 - 10.0) * 0.5).collect();
        let start: Vec<f64> = (0..50).map(|i| 1.0 + (i as f64).sin()).collect();
        let res = lanczos_lowest(
            50,
            |x: &[f64], y: &mut [f64]| {
                for i in 0..50 {
                    y[i] = diag[i] * x[i];
                }
            },
            &start,
            LanczosOptions::default(),
        )
        .unwrap();
        assert!((res.value + 5.0).abs() < 1e-10);
        assert!(res.residual < 1e-10);
    }

    #[test]
    fn lanczos_complex_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random(30, 30, &mut rng);
        let h = {
            let bh = b.adjoint();
            ComplexMatrix::from_fn(30, 30, |i, j| b[(i, j)] + bh[(i, j)])
        };
        let h2 = h.clone();
        let start: Vec<C64> = (0..30).map(|i| c(1.0, i as f64 * 0.1)).collect();
        let res = lanczos_lowest(
            30,
            move |x: &[C64], y: &mut [C64]| {
                for i in 0..30 {
                    y[i] = (0..30).map(|j| h2[(i, j)] * x[j]).sum();
                }
            },
            &start,
            LanczosOptions::default(),
        )
        .unwrap();
        let dense = nalgebra::DMatrix::from_fn(30, 30, |i, j| h[(i, j)]);
        let min = dense.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((res.value - min).abs() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn matmul_is_associative(seed in 0u64..1000, m in 1usize..7, k in 1usize..7, l in 1usize..7, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(m, k, &mut rng);
            let b = random(k, l, &mut rng);
            let cc = random(l, n, &mut rng);
            let left = matmul(&matmul(&a, &b).unwrap(), &cc).unwrap();
            let right = matmul(&a, &matmul(&b, &cc).unwrap()).unwrap();
            proptest::prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }

        #[test]
        fn svd_values_sorted_and_reconstruct(seed in 0u64..1000, m in 1usize..9, n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(m, n, &mut rng);
            let svd = svd_truncate(&a, m.max(n), 0.0).unwrap();
            proptest::prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            proptest::prop_assert!(svd.reconstruct().max_abs_diff(&a) < 1e-12);
        }
    }
}
