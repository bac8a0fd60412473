//! Matrix functions, norms and projectors built on the eigen and singular value solvers.

use crate::error::{Error, Result};
use crate::matcore::{hermitian_eigen, svd, ComplexMatrix, HermitianEigen};
use crate::scalar::{default_rank_tol, Real, C};

/// Moore-Penrose pseudoinverse; singular values at or below `rank_tol * sigma_max` count as zero.
pub fn pseudoinverse<T: Real>(m: &ComplexMatrix<T>, rank_tol: T) -> Result<ComplexMatrix<T>> {
    let s = svd(m)?;
    let cut = rank_tol * s.max_singular();
    // u f(S) v* with real f, so its adjoint is v f(S) u*.
    Ok(s.weighted(|x| if x > cut { x.recip() } else { T::zero() })
        .adjoint())
}

/// `sgn(m) = u sgn(S) v*`, the partial isometry of the polar decomposition.
///
/// Evaluated as the sum of `u_i v_i*` over singular values above the rank cut. Degenerate
/// singular subspaces contribute their full projector, so the result does not depend on the
/// basis chosen inside them.
pub fn matrix_sign<T: Real>(m: &ComplexMatrix<T>, rank_tol: T) -> Result<ComplexMatrix<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "sign of non-square {:?}",
            m.shape()
        )));
    }
    let s = svd(m)?;
    let cut = rank_tol * s.max_singular();
    Ok(s.weighted(|x| if x > cut { T::one() } else { T::zero() }))
}

/// Eigendecomposition of a PSD matrix. Fails with `NotPsd` below `-tol * max(1, lambda_max)`.
pub fn psd_eigen<T: Real>(m: &ComplexMatrix<T>, tol: T) -> Result<HermitianEigen<T>> {
    let e = hermitian_eigen(m, tol)?;
    let scale = e.max_eigenvalue().max(T::one());
    if e.min_eigenvalue() < -tol * scale {
        return Err(Error::NotPsd(e.min_eigenvalue().to_f64_lossy()));
    }
    Ok(e)
}

fn spectral_cut<T: Real>(e: &HermitianEigen<T>, rank_tol: T) -> T {
    rank_tol * e.max_eigenvalue().max(T::zero())
}

/// PSD square root. Eigenvalues at or below the default relative rank cut are set to zero.
pub fn psd_sqrt<T: Real>(m: &ComplexMatrix<T>, tol: T) -> Result<ComplexMatrix<T>> {
    let e = psd_eigen(m, tol)?;
    let cut = spectral_cut(&e, default_rank_tol::<T>(m.rows(), m.cols()));
    Ok(e.map_spectrum(|l| if l > cut { l.sqrt() } else { T::zero() }))
}

/// Pseudoinverse of the PSD square root.
pub fn psd_pinv_sqrt<T: Real>(
    m: &ComplexMatrix<T>,
    tol: T,
    rank_tol: T,
) -> Result<ComplexMatrix<T>> {
    let e = psd_eigen(m, tol)?;
    let cut = spectral_cut(&e, rank_tol);
    Ok(e.map_spectrum(|l| if l > cut { l.sqrt().recip() } else { T::zero() }))
}

/// Pseudoinverse of a PSD matrix computed spectrally.
pub fn psd_pinv<T: Real>(m: &ComplexMatrix<T>, tol: T, rank_tol: T) -> Result<ComplexMatrix<T>> {
    let e = psd_eigen(m, tol)?;
    let cut = spectral_cut(&e, rank_tol);
    Ok(e.map_spectrum(|l| if l > cut { l.recip() } else { T::zero() }))
}

/// Orthogonal projector onto the column space of `m`.
pub fn image_projector<T: Real>(m: &ComplexMatrix<T>, rank_tol: T) -> Result<ComplexMatrix<T>> {
    let s = svd(m)?;
    let r = s.rank(rank_tol);
    let u = &s.u;
    Ok(ComplexMatrix::from_fn(m.rows(), m.rows(), |i, j| {
        (0..r).map(|k| u[(i, k)] * u[(j, k)].conj()).sum()
    }))
}

/// Numerical rank relative to the largest singular value.
pub fn numerical_rank<T: Real>(m: &ComplexMatrix<T>, rank_tol: T) -> Result<usize> {
    Ok(svd(m)?.rank(rank_tol))
}

/// Schatten-1 norm.
pub fn trace_norm<T: Real>(m: &ComplexMatrix<T>) -> Result<T> {
    Ok(svd(m)?.singulars.iter().copied().sum())
}

/// Largest singular value.
pub fn op_norm<T: Real>(m: &ComplexMatrix<T>) -> Result<T> {
    Ok(svd(m)?.max_singular())
}

/// `exp(i t h)` for Hermitian `h`.
pub fn expm_i_hermitian<T: Real>(h: &ComplexMatrix<T>, t: T, tol: T) -> Result<ComplexMatrix<T>> {
    let e = hermitian_eigen(h, tol)?;
    let v = &e.eigenvectors;
    let n = v.rows();
    let phases: Vec<C<T>> = e
        .eigenvalues
        .iter()
        .map(|&l| C::from_polar(T::one(), t * l))
        .collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        phases
            .iter()
            .enumerate()
            .map(|(k, &p)| v[(i, k)] * p * v[(j, k)].conj())
            .sum()
    }))
}

/// `max |U*U - 1|` entrywise.
pub fn unitary_defect<T: Real>(u: &ComplexMatrix<T>) -> T {
    if !u.is_square() {
        return T::infinity();
    }
    u.adjoint()
        .matmul(u)
        .max_abs_diff(&ComplexMatrix::identity(u.cols()))
}

/// `max |W W* W - W|` entrywise.
pub fn partial_isometry_defect<T: Real>(w: &ComplexMatrix<T>) -> T {
    w.matmul(&w.adjoint()).matmul(w).max_abs_diff(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, random_psd, random_unitary, seeded_rng};
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> ComplexMatrix<f64> {
        ComplexMatrix::from_real_diag(v)
    }

    #[test]
    fn pseudoinverse_of_singular_diagonal() {
        let p = pseudoinverse(&diag(&[2.0, 0.0]), 1e-12).unwrap();
        assert!(p.max_abs_diff(&diag(&[0.5, 0.0])) < 1e-15);
    }

    #[test]
    fn pseudoinverse_of_invertible_is_inverse() {
        let mut rng = seeded_rng(21, 0);
        let m = random_matrix(4, 4, &mut rng);
        let p = pseudoinverse(&m, 1e-12).unwrap();
        assert!(m.matmul(&p).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-10);
    }

    #[test]
    fn pseudoinverse_of_rank_one() {
        let mut rng = seeded_rng(22, 0);
        let u = random_unitary(3, &mut rng).col(0);
        let v = random_unitary(3, &mut rng).col(1);
        let p = pseudoinverse(&ComplexMatrix::outer(&u, &v), 1e-12).unwrap();
        assert!(p.max_abs_diff(&ComplexMatrix::outer(&v, &u)) < 1e-12);
    }

    #[test]
    fn sign_of_real_diagonal() {
        let s = matrix_sign(&diag(&[2.0, 0.0, -3.0]), 1e-12).unwrap();
        assert!(s.max_abs_diff(&diag(&[1.0, 0.0, -1.0])) < 1e-15);
    }

    #[test]
    fn sign_of_unitary_is_itself() {
        let mut rng = seeded_rng(23, 0);
        let u = random_unitary(4, &mut rng);
        assert!(matrix_sign(&u, 1e-12).unwrap().max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn sign_times_modulus_reconstructs() {
        let mut rng = seeded_rng(24, 0);
        for _ in 0..10 {
            let m = random_matrix(4, 4, &mut rng);
            let s = matrix_sign(&m, 1e-12).unwrap();
            let modulus = psd_sqrt(&m.adjoint().matmul(&m), 1e-10).unwrap();
            assert!(s.matmul(&modulus).max_abs_diff(&m) < 1e-9);
        }
    }

    #[test]
    fn sqrt_of_diagonal_and_projector() {
        let r = psd_sqrt(&diag(&[4.0, 9.0]), 1e-12).unwrap();
        assert!(r.max_abs_diff(&diag(&[2.0, 3.0])) < 1e-14);
        let p = diag(&[1.0, 0.0, 1.0]);
        assert!(psd_sqrt(&p, 1e-12).unwrap().max_abs_diff(&p) < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = seeded_rng(25, 0);
        let m = random_psd(5, 5, &mut rng);
        let r = psd_sqrt(&m, 1e-10).unwrap();
        assert!(r.matmul(&r).max_abs_diff(&m) < 1e-9);
    }

    #[test]
    fn sqrt_rejects_negative_definite() {
        assert!(matches!(
            psd_sqrt(&diag(&[1.0, -0.5]), 1e-9),
            Err(Error::NotPsd(_))
        ));
        // Tiny negative noise is clamped.
        let r = psd_sqrt(&diag(&[1.0, -1e-15]), 1e-9).unwrap();
        assert!(r.max_abs_diff(&diag(&[1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn projector_edge_cases() {
        let mut rng = seeded_rng(26, 0);
        let full = random_matrix(3, 3, &mut rng);
        let p = image_projector(&full, 1e-12).unwrap();
        assert!(p.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-12);
        let z = image_projector(&ComplexMatrix::<f64>::zeros(3, 3), 1e-12).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let low = random_matrix(3, 2, &mut rng).matmul(&random_matrix(2, 3, &mut rng));
        let p = image_projector(&low, 1e-12).unwrap();
        assert!((p.trace().re - 2.0).abs() < 1e-9);
    }

    #[test]
    fn norms_of_simple_matrices() {
        assert!((trace_norm(&ComplexMatrix::<f64>::identity(4)).unwrap() - 4.0).abs() < 1e-14);
        assert!((trace_norm(&diag(&[1.0, -2.0])).unwrap() - 3.0).abs() < 1e-14);
        assert!((op_norm(&ComplexMatrix::<f64>::identity(3)).unwrap() - 1.0).abs() < 1e-14);
        let mut rng = seeded_rng(27, 0);
        let u = random_unitary(3, &mut rng).scale_real(2.0);
        assert!((op_norm(&u).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn norms_match_eigen_oracle() {
        let mut rng = seeded_rng(28, 0);
        for _ in 0..10 {
            let m = random_matrix(4, 4, &mut rng);
            let gram = m.adjoint().matmul(&m);
            let e = hermitian_eigen(&gram, 1e-12).unwrap();
            let tn: f64 = e.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
            assert!((trace_norm(&m).unwrap() - tn).abs() < 1e-10);
            assert!((op_norm(&m).unwrap() - e.max_eigenvalue().sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn exponential_is_unitary() {
        let mut rng = seeded_rng(29, 0);
        let h = crate::random::random_hermitian(4, &mut rng);
        let u = expm_i_hermitian(&h, 0.7, 1e-12).unwrap();
        assert!(unitary_defect(&u) < 1e-12);
        let back = expm_i_hermitian(&h, -0.7, 1e-12).unwrap();
        assert!(u.matmul(&back).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
    }

    fn low_rank(seed: u64, n: usize, r: usize) -> ComplexMatrix<f64> {
        let mut rng = seeded_rng(seed, 0);
        random_matrix(n, r, &mut rng).matmul(&random_matrix(r, n, &mut rng))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn penrose_conditions(seed in any::<u64>(), n in 1usize..7, r in 1usize..7) {
            let m = low_rank(seed, n, r.min(n));
            let p = pseudoinverse(&m, default_rank_tol(n, n)).unwrap();
            let mn = op_norm(&m).unwrap();
            let pn = op_norm(&p).unwrap();
            prop_assert!(m.matmul(&p).matmul(&m).max_abs_diff(&m) <= 1e-9 * (1.0 + mn));
            prop_assert!(p.matmul(&m).matmul(&p).max_abs_diff(&p) <= 1e-9 * (1.0 + pn));
            prop_assert!(m.matmul(&p).hermitian_defect() <= 1e-9);
            prop_assert!(p.matmul(&m).hermitian_defect() <= 1e-9);
        }

        #[test]
        fn sign_is_partial_isometry(seed in any::<u64>(), n in 1usize..7, r in 1usize..7) {
            let m = low_rank(seed, n, r.min(n));
            let w = matrix_sign(&m, default_rank_tol(n, n)).unwrap();
            prop_assert!(partial_isometry_defect(&w) <= 1e-9);
        }

        #[test]
        fn projector_fixes_image(seed in any::<u64>(), n in 1usize..7, r in 1usize..7) {
            let m = low_rank(seed, n, r.min(n));
            let p = image_projector(&m, default_rank_tol(n, n)).unwrap();
            prop_assert!(p.matmul(&p).max_abs_diff(&p) <= 1e-9);
            prop_assert!(p.matmul(&m).max_abs_diff(&m) <= 1e-9 * m.max_abs().max(1.0));
        }
    }
}
