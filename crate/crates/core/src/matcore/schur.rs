//! Positive semidefiniteness of 2x2 block matrices through the Schur complement.

use crate::error::{Error, Result};
use crate::matcore::{hermitian_eigen, op_norm, pseudoinverse, ComplexMatrix};
use crate::scalar::{default_rank_tol, Real};

/// Outcome of both PSD tests for `[[a, b], [b*, c]]`.
#[derive(Clone, Debug)]
pub struct SchurCheck<T: Real> {
    /// Smallest eigenvalue of `a`.
    pub a_min_eig: T,
    /// `||(1 - a a^+) b||`: the part of `b` outside the image of `a`.
    pub kernel_leak: T,
    /// Smallest eigenvalue of `c - b* a^+ b`.
    pub complement_min_eig: T,
    /// Smallest eigenvalue of the assembled block matrix.
    pub block_min_eig: T,
    /// Verdict from the complement criterion.
    pub criterion: bool,
    /// Verdict from the assembled block.
    pub direct: bool,
}

impl<T: Real> SchurCheck<T> {
    pub fn agree(&self) -> bool {
        self.criterion == self.direct
    }
}

pub fn schur_psd_check<T: Real>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
    c: &ComplexMatrix<T>,
    tol: T,
) -> Result<SchurCheck<T>> {
    let (p, q) = (a.rows(), c.rows());
    if !a.is_square() || !c.is_square() || b.shape() != (p, q) {
        return Err(Error::DimensionMismatch(format!(
            "schur blocks a {:?}, b {:?}, c {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    let herm_tol = tol.max(T::lit(1e3) * T::epsilon());
    let ea = hermitian_eigen(a, herm_tol)?;
    let a_pinv = pseudoinverse(&a.hermitian_part(), default_rank_tol::<T>(p, p))?;
    let leak_op = b.clone() - a.matmul(&a_pinv).matmul(b);
    let kernel_leak = op_norm(&leak_op)?;
    let complement = c.clone() - b.adjoint().matmul(&a_pinv).matmul(b);
    let ec = hermitian_eigen(&complement.hermitian_part(), herm_tol)?;
    let block = ComplexMatrix::block2(a, b, &b.adjoint(), c)?;
    let eb = hermitian_eigen(&block.hermitian_part(), herm_tol)?;

    let a_min_eig = ea.min_eigenvalue();
    let complement_min_eig = ec.min_eigenvalue();
    let block_min_eig = eb.min_eigenvalue();
    Ok(SchurCheck {
        a_min_eig,
        kernel_leak,
        complement_min_eig,
        block_min_eig,
        criterion: a_min_eig >= -tol && kernel_leak <= tol && complement_min_eig >= -tol,
        direct: block_min_eig >= -tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, random_psd, seeded_rng};
    use proptest::prelude::*;

    #[test]
    fn identity_blocks() {
        let i = ComplexMatrix::<f64>::identity(2);
        let z = ComplexMatrix::zeros(2, 2);
        let ok = schur_psd_check(&i, &z, &i, 1e-9).unwrap();
        assert!(ok.criterion && ok.direct);
        let bad = schur_psd_check(&i, &i.scale_real(2.0), &i, 1e-9).unwrap();
        assert!(!bad.criterion && !bad.direct);
        assert!((bad.block_min_eig + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contraction_is_psd() {
        let mut rng = seeded_rng(31, 0);
        let b = random_matrix(3, 3, &mut rng);
        let b = b.scale_real(1.0 / op_norm(&b).unwrap());
        let i = ComplexMatrix::<f64>::identity(3);
        let r = schur_psd_check(&i, &b, &i, 1e-9).unwrap();
        assert!(r.criterion && r.direct);
    }

    #[test]
    fn singular_corner_needs_aligned_b() {
        let a = ComplexMatrix::<f64>::from_real_diag(&[1.0, 0.0]);
        let c = ComplexMatrix::identity(2);
        let mut b = ComplexMatrix::zeros(2, 2);
        b[(1, 0)] = crate::scalar::C::new(0.1, 0.0);
        let r = schur_psd_check(&a, &b, &c, 1e-9).unwrap();
        assert!(r.kernel_leak > 0.09);
        assert!(!r.criterion && !r.direct);
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let i = ComplexMatrix::<f64>::identity(2);
        let b = ComplexMatrix::zeros(3, 2);
        assert!(matches!(
            schur_psd_check(&i, &b, &i, 1e-9),
            Err(Error::DimensionMismatch(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decision_paths_agree(seed in any::<u64>(), p in 1usize..5, q in 1usize..5, scale in 0.05f64..2.0) {
            let mut rng = seeded_rng(seed, 0);
            let a = random_psd(p, p, &mut rng);
            let c = random_psd(q, q, &mut rng);
            let b = random_matrix(p, q, &mut rng).scale_real(scale);
            let r = schur_psd_check(&a, &b, &c, 1e-9).unwrap();
            if r.block_min_eig.abs() > 1e-6 {
                prop_assert!(r.agree(), "{:?}", r);
            }
        }
    }
}
