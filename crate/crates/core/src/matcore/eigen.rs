//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use crate::error::{Error, Result};
use crate::matcore::ComplexMatrix;
use crate::scalar::{Real, C};

const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `m = V diag(eigenvalues) V*`, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: ComplexMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        self.map_spectrum(|x| x)
    }

    /// `V f(diag) V*`.
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> ComplexMatrix<T> {
        let v = &self.eigenvectors;
        let n = v.rows();
        let fl: Vec<T> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = C::new(T::zero(), T::zero());
            for (k, &w) in fl.iter().enumerate() {
                if w != T::zero() {
                    acc += v[(i, k)] * v[(j, k)].conj() * w;
                }
            }
            acc
        })
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues.last().copied().unwrap_or_else(T::zero)
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues.first().copied().unwrap_or_else(T::zero)
    }
}

/// Diagonalizes a Hermitian matrix. `tol` bounds the allowed entry-wise asymmetry.
pub fn hermitian_eigen<T: Real>(m: &ComplexMatrix<T>, tol: T) -> Result<HermitianEigen<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of non-square {:?}",
            m.shape()
        )));
    }
    let asym = m.hermitian_defect();
    if !(asym <= tol) {
        return Err(Error::NotHermitian(asym.to_f64_lossy()));
    }
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::<T>::identity(n);
    let eps = T::epsilon();

    let scale = a.frobenius_norm();
    if scale == T::zero() || n <= 1 {
        return Ok(finish(a, v));
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= eps * scale * T::lit(n as f64) {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q, eps);
            }
        }
    }
    if !converged {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off > T::lit(1e3) * eps * scale {
            return Err(Error::NoConvergence("hermitian_eigen"));
        }
    }
    Ok(finish(a, v))
}

fn rotate<T: Real>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize, eps: T) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == T::zero() {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if mag <= eps * T::lit(1e-3) * (app.abs() + aqq.abs()) {
        a[(p, q)] = C::new(T::zero(), T::zero());
        a[(q, p)] = C::new(T::zero(), T::zero());
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (T::lit(2.0) * mag);
    let t = if theta >= T::zero() {
        T::one() / (theta + (T::one() + theta * theta).sqrt())
    } else {
        -T::one() / (-theta + (T::one() + theta * theta).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;
    // J = [[c, s e^{i phi}], [-s e^{-i phi}, c]] on (p, q); A <- J* A J, V <- V J.
    let jpq = phase * s;
    let jqp = -phase.conj() * s;
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c + akq * jqp;
        a[(k, q)] = akp * jpq + akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c + aqk * jqp.conj();
        a[(q, k)] = apk * jpq.conj() + aqk * c;
    }
    a[(p, q)] = C::new(T::zero(), T::zero());
    a[(q, p)] = C::new(T::zero(), T::zero());
    let (dp, dq) = (a[(p, p)].re, a[(q, q)].re);
    a[(p, p)] = C::new(dp, T::zero());
    a[(q, q)] = C::new(dq, T::zero());
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * c;
    }
}

fn finish<T: Real>(a: ComplexMatrix<T>, v: ComplexMatrix<T>) -> HermitianEigen<T> {
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: ties keep their original index order.
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .re
            .partial_cmp(&a[(i, i)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, seeded_rng};

    #[test]
    fn identity_has_unit_spectrum() {
        let e = hermitian_eigen(&ComplexMatrix::<f64>::identity(3), 1e-12).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_keeps_standard_basis() {
        let m = ComplexMatrix::<f64>::from_real_diag(&[2.0, -1.0]);
        let e = hermitian_eigen(&m, 1e-12).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, -1.0]);
        assert!(e.eigenvectors.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = seeded_rng(7, 0);
        for _ in 0..20 {
            let m = random_hermitian(5, &mut rng);
            let e = hermitian_eigen(&m, 1e-12).unwrap();
            assert!(e.reconstruct().max_abs_diff(&m) <= 1e-10);
            let vv = e.eigenvectors.adjoint().matmul(&e.eigenvectors);
            assert!(vv.max_abs_diff(&ComplexMatrix::identity(5)) <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = ComplexMatrix::<f64>::identity(2);
        m[(0, 1)] = C::new(1.0, 0.0);
        assert!(matches!(
            hermitian_eigen(&m, 1e-9),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let mut rng = seeded_rng(3, 0);
        let m = random_hermitian(4, &mut rng).cast::<f32>();
        let e = hermitian_eigen(&m, 1e-5).unwrap();
        assert!(e.reconstruct().max_abs_diff(&m) <= 1e-4);
    }
}
