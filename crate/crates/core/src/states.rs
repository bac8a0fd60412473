//! Bipartite pure states on `C^{d_A} (x) C^{d_B}`, reduced states and fidelity.
//!
//! A state is stored as its coefficient grid: entry `(i, j)` is the amplitude of `|i>_A |j>_B`.
//! With this convention `(X (x) 1)|C>` has grid `X M` and `(1 (x) X)|C>` has grid `M X^T`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matcore::{complete_orthonormal, psd_sqrt, svd, trace_norm, ComplexMatrix};
use crate::random::random_coeffs;
use crate::scalar::{check_tol, czero, Real, C};

/// Norm deviation beyond which a state is rejected instead of silently renormalized.
pub const NORM_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct BipartitePureState<T: Real> {
    coeffs: ComplexMatrix<T>,
    normalized: bool,
}

impl<T: Real> BipartitePureState<T> {
    /// Wraps a coefficient grid of unit Frobenius norm.
    pub fn new(coeffs: ComplexMatrix<T>) -> Result<Self> {
        if !coeffs.is_finite() {
            return Err(Error::NonFinite("state coefficients".into()));
        }
        let n = coeffs.frobenius_norm();
        if !((n - T::one()).abs() <= T::lit(NORM_TOL)) {
            return Err(Error::NotNormalized(n.to_f64_lossy()));
        }
        Ok(Self {
            coeffs,
            normalized: true,
        })
    }

    /// Keeps the grid as given. Density matrices and overlaps normalize on demand.
    pub fn from_unnormalized(coeffs: ComplexMatrix<T>) -> Result<Self> {
        if !coeffs.is_finite() {
            return Err(Error::NonFinite("state coefficients".into()));
        }
        if coeffs.frobenius_norm() == T::zero() {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(Self {
            coeffs,
            normalized: false,
        })
    }

    /// Rescales an arbitrary nonzero grid to unit norm.
    pub fn normalize_from(coeffs: ComplexMatrix<T>) -> Result<Self> {
        let n = coeffs.frobenius_norm();
        if !(n > T::zero()) || !coeffs.is_finite() {
            return Err(Error::NotNormalized(n.to_f64_lossy()));
        }
        Self::new(coeffs.scale_real(n.recip()))
    }

    pub fn from_vector(dim_a: usize, dim_b: usize, v: &[C<T>]) -> Result<Self> {
        Self::new(ComplexMatrix::from_vec(dim_a, dim_b, v.to_vec())?)
    }

    pub fn dim_a(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn dim_b(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn coeffs(&self) -> &ComplexMatrix<T> {
        &self.coeffs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Grid scaled to unit norm (a no-op for normalized states).
    pub fn unit_coeffs(&self) -> ComplexMatrix<T> {
        if self.normalized {
            self.coeffs.clone()
        } else {
            self.coeffs.scale_real(self.coeffs.frobenius_norm().recip())
        }
    }

    pub fn normalized(&self) -> Self {
        Self {
            coeffs: self.unit_coeffs(),
            normalized: true,
        }
    }

    /// Flat amplitude vector indexed by `i * dim_b + j`.
    pub fn to_vector(&self) -> Vec<C<T>> {
        self.coeffs.as_slice().to_vec()
    }

    /// `(x (x) 1)|self>`.
    pub fn apply_a(&self, x: &ComplexMatrix<T>) -> Result<Self> {
        let grid = x.try_matmul(&self.coeffs)?;
        Ok(Self {
            coeffs: grid,
            normalized: false,
        })
    }

    /// `(1 (x) x)|self>`.
    pub fn apply_b(&self, x: &ComplexMatrix<T>) -> Result<Self> {
        let grid = self.coeffs.try_matmul(&x.transpose())?;
        Ok(Self {
            coeffs: grid,
            normalized: false,
        })
    }

    /// `<self|other>` on the raw grids.
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        if self.coeffs.shape() != other.coeffs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "inner product of {:?} and {:?}",
                self.coeffs.shape(),
                other.coeffs.shape()
            )));
        }
        Ok(self.coeffs.inner(&other.coeffs))
    }

    /// Squared distance `|| |self> - |other> ||^2` on the raw grids.
    pub fn distance_sq(&self, other: &Self) -> Result<T> {
        let d = self.coeffs.clone() - other.coeffs.clone();
        let n = d.frobenius_norm();
        Ok(n * n)
    }
}

impl BipartitePureState<f64> {
    /// Random state with Schmidt rank `rank` and Schmidt coefficients bounded away from zero.
    pub fn random<R: Rng + ?Sized>(dim_a: usize, dim_b: usize, rank: usize, rng: &mut R) -> Self {
        Self::new(random_coeffs(dim_a, dim_b, rank, rng)).expect("generator output is normalized")
    }
}

/// Unnormalized maximally entangled vector `sum_i |i>|i>`.
pub fn omega<T: Real>(d: usize) -> BipartitePureState<T> {
    BipartitePureState {
        coeffs: ComplexMatrix::identity(d),
        normalized: false,
    }
}

/// A validated density matrix: Hermitian, PSD and trace one.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    mat: ComplexMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(mat: ComplexMatrix<T>) -> Result<Self> {
        let tol = check_tol::<T>();
        if !mat.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix {:?}",
                mat.shape()
            )));
        }
        let asym = mat.hermitian_defect();
        if !(asym <= tol) {
            return Err(Error::NotHermitian(asym.to_f64_lossy()));
        }
        let tr = mat.trace().re;
        if !((tr - T::one()).abs() <= tol * T::lit(mat.rows() as f64)) {
            return Err(Error::NotNormalized(tr.to_f64_lossy()));
        }
        let mat = mat.hermitian_part();
        let e = crate::matcore::hermitian_eigen(&mat, tol)?;
        if e.min_eigenvalue() < -tol {
            return Err(Error::NotPsd(e.min_eigenvalue().to_f64_lossy()));
        }
        Ok(Self { mat })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(d).scale_real(T::lit(d as f64).recip()),
        }
    }

    pub fn mat(&self) -> &ComplexMatrix<T> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn into_mat(self) -> ComplexMatrix<T> {
        self.mat
    }
}

/// `Tr_B |s><s| = M M*`.
pub fn reduce_a<T: Real>(s: &BipartitePureState<T>) -> Result<DensityMatrix<T>> {
    let m = s.unit_coeffs();
    DensityMatrix::new(m.matmul(&m.adjoint()).hermitian_part())
}

/// `Tr_A |s><s| = M^T conj(M)`.
pub fn reduce_b<T: Real>(s: &BipartitePureState<T>) -> Result<DensityMatrix<T>> {
    let m = s.unit_coeffs();
    DensityMatrix::new(m.transpose().matmul(&m.conj()).hermitian_part())
}

/// `Tr_A |d><c|` as an operator on B, equal to `D^T conj(C)` on the grids.
pub fn partial_trace_a_outer<T: Real>(
    d: &BipartitePureState<T>,
    c: &BipartitePureState<T>,
) -> Result<ComplexMatrix<T>> {
    if d.coeffs.shape() != c.coeffs.shape() {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of |D><C| with shapes {:?} and {:?}",
            d.coeffs.shape(),
            c.coeffs.shape()
        )));
    }
    Ok(d.coeffs.transpose().matmul(&c.coeffs.conj()))
}

/// `F(rho, sigma) = Tr sqrt(rho^1/2 sigma rho^1/2)`, evaluated as `|| sigma^1/2 rho^1/2 ||_1`.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity between dimensions {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let tol = check_tol::<T>();
    let sr = psd_sqrt(rho.mat(), tol)?;
    let ss = psd_sqrt(sigma.mat(), tol)?;
    trace_norm(&ss.matmul(&sr))
}

/// Schmidt decomposition `|s> = sum_i lambda_i |a_i>|b_i>`.
#[derive(Clone, Debug)]
pub struct SchmidtFrame<T: Real> {
    pub coefficients: Vec<T>,
    /// Columns `a_i`, completed to a unitary on A.
    pub basis_a: ComplexMatrix<T>,
    /// Columns `b_i`, completed to a unitary on B.
    pub basis_b: ComplexMatrix<T>,
    /// For `dim_a == dim_b`: the unitary `X` with `|s> = (sqrt(rho) (x) X)|Omega>`,
    /// `rho = reduce_a(s)`.
    pub x: Option<ComplexMatrix<T>>,
}

impl<T: Real> SchmidtFrame<T> {
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let (da, db) = (self.basis_a.rows(), self.basis_b.rows());
        ComplexMatrix::from_fn(da, db, |i, j| {
            self.coefficients
                .iter()
                .enumerate()
                .fold(czero(), |acc, (k, &l)| {
                    acc + self.basis_a[(i, k)] * self.basis_b[(j, k)] * l
                })
        })
    }
}

fn complete_square<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let n = m.rows();
    if m.cols() >= n {
        return m.clone();
    }
    let known: Vec<Vec<C<T>>> = (0..m.cols()).map(|j| m.col(j)).collect();
    let extra = complete_orthonormal(&known, n, n - m.cols());
    ComplexMatrix::from_fn(n, n, |i, j| {
        if j < m.cols() {
            m[(i, j)]
        } else {
            extra[j - m.cols()][i]
        }
    })
}

pub fn schmidt<T: Real>(s: &BipartitePureState<T>) -> Result<SchmidtFrame<T>> {
    if !s.is_normalized() {
        return schmidt(&s.normalized());
    }
    let dec = svd(s.coeffs())?;
    let basis_a = complete_square(&dec.u);
    let basis_b = complete_square(&dec.v.conj());
    let x = if s.dim_a() == s.dim_b() {
        // grid = sqrt(rho) X^T with sqrt(rho) = U S U*, so X^T = U V*.
        Some(dec.v.conj().matmul(&dec.u.transpose()))
    } else {
        None
    };
    Ok(SchmidtFrame {
        coefficients: dec.singulars,
        basis_a,
        basis_b,
        x,
    })
}

/// `<d| (1 (x) r) |c>` with both states taken at unit norm.
pub fn overlap<T: Real>(
    d: &BipartitePureState<T>,
    r: &ComplexMatrix<T>,
    c: &BipartitePureState<T>,
) -> Result<C<T>> {
    if r.shape() != (c.dim_b(), c.dim_b()) || d.coeffs.shape() != c.coeffs.shape() {
        return Err(Error::DimensionMismatch(format!(
            "overlap with operator {:?} between states {:?} and {:?}",
            r.shape(),
            d.coeffs.shape(),
            c.coeffs.shape()
        )));
    }
    let moved = c.unit_coeffs().matmul(&r.transpose());
    Ok(d.unit_coeffs().inner(&moved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{hermitian_eigen, unitary_defect};
    use crate::random::{random_matrix, random_unitary, seeded_rng};
    use proptest::prelude::*;

    type M = ComplexMatrix<f64>;

    fn product(da: usize, db: usize, i: usize, j: usize) -> BipartitePureState<f64> {
        let mut m = M::zeros(da, db);
        m[(i, j)] = C::new(1.0, 0.0);
        BipartitePureState::new(m).unwrap()
    }

    /// `(1 (x) r)|c>` on the flat vector, with `r` expanded to `1 (x) r`.
    fn apply_b_vector(r: &M, c: &BipartitePureState<f64>) -> Vec<C<f64>> {
        let big = M::identity(c.dim_a()).kron(r);
        big.apply(&c.to_vector())
    }

    #[test]
    fn omega_is_identity_grid_and_reflects() {
        let o = omega::<f64>(2);
        assert_eq!(o.coeffs(), &M::identity(2));
        assert!(!o.is_normalized());
        let mut rng = seeded_rng(51, 0);
        let a = random_matrix(3, 3, &mut rng);
        let o3 = omega::<f64>(3);
        let left = o3.apply_a(&a).unwrap();
        let right = o3.apply_b(&a.transpose()).unwrap();
        assert_eq!(left.coeffs(), right.coeffs());
        let diag = M::from_real_diag(&[1.0, 2.0, 3.0]);
        assert_eq!(o3.apply_a(&diag).unwrap().coeffs(), &diag);
        assert_eq!(o3.apply_b(&diag).unwrap().coeffs(), &diag);
    }

    #[test]
    fn reductions_of_simple_states() {
        let rho = reduce_a(&product(2, 2, 0, 0)).unwrap();
        assert_eq!(rho.mat(), &M::from_real_diag(&[1.0, 0.0]));
        let mixed = reduce_a(&omega::<f64>(3)).unwrap();
        assert!(
            mixed
                .mat()
                .max_abs_diff(&M::identity(3).scale_real(1.0 / 3.0))
                < 1e-15
        );
    }

    #[test]
    fn reductions_brute_force() {
        let mut rng = seeded_rng(52, 0);
        let s = BipartitePureState::random(3, 2, 2, &mut rng);
        let v = s.to_vector();
        let (da, db) = (3, 2);
        let ra = M::from_fn(da, da, |i, k| {
            (0..db).map(|j| v[i * db + j] * v[k * db + j].conj()).sum()
        });
        let rb = M::from_fn(db, db, |j, l| {
            (0..da).map(|i| v[i * db + j] * v[i * db + l].conj()).sum()
        });
        assert!(reduce_a(&s).unwrap().mat().max_abs_diff(&ra) < 1e-14);
        assert!(reduce_b(&s).unwrap().mat().max_abs_diff(&rb) < 1e-14);
    }

    #[test]
    fn rejects_unnormalized() {
        let m = M::identity(2);
        assert!(matches!(
            BipartitePureState::new(m),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn partial_trace_cases() {
        let mut rng = seeded_rng(53, 0);
        let c = BipartitePureState::random(3, 3, 3, &mut rng);
        let t = partial_trace_a_outer(&c, &c).unwrap();
        assert!(t.max_abs_diff(reduce_b(&c).unwrap().mat()) < 1e-14);
        assert!((t.trace().re - 1.0).abs() < 1e-12);

        let d0 = product(2, 2, 0, 1);
        let c1 = product(2, 2, 1, 1);
        assert_eq!(partial_trace_a_outer(&d0, &c1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn partial_trace_brute_force() {
        let mut rng = seeded_rng(54, 0);
        let (da, db) = (3, 4);
        let c = BipartitePureState::random(da, db, 2, &mut rng);
        let d = BipartitePureState::random(da, db, 3, &mut rng);
        let (cv, dv) = (c.to_vector(), d.to_vector());
        // sum_i <i|_A |D><C| |i>_A, entry (j, j') = sum_i D[i j] conj(C[i j']).
        let oracle = M::from_fn(db, db, |j, jp| {
            (0..da)
                .map(|i| dv[i * db + j] * cv[i * db + jp].conj())
                .sum()
        });
        assert!(partial_trace_a_outer(&d, &c).unwrap().max_abs_diff(&oracle) < 1e-14);
    }

    #[test]
    fn fidelity_cases() {
        let mut rng = seeded_rng(55, 0);
        let rho = reduce_a(&BipartitePureState::random(3, 3, 3, &mut rng)).unwrap();
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
        let p0 = reduce_a(&product(2, 2, 0, 0)).unwrap();
        let p1 = reduce_a(&product(2, 2, 1, 0)).unwrap();
        assert!(fidelity(&p0, &p1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn fidelity_of_diagonal_family() {
        let delta = 0.08;
        let rho = DensityMatrix::new(M::identity(4).scale_real(0.25)).unwrap();
        let sigma = DensityMatrix::new(M::from_real_diag(&[
            (1.0 - delta) / 2.0,
            (1.0 - delta) / 2.0,
            delta / 2.0,
            delta / 2.0,
        ]))
        .unwrap();
        let f = fidelity(&rho, &sigma).unwrap();
        let expected = ((1.0 - delta) / 2.0f64).sqrt() + (delta / 2.0f64).sqrt();
        assert!((f - expected).abs() < 1e-12);
        assert!((f - 0.878233).abs() < 1e-6);
    }

    #[test]
    fn schmidt_cases() {
        let f = schmidt(&product(2, 3, 1, 2)).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-15);
        assert!(f.coefficients[1..].iter().all(|&x| x.abs() < 1e-15));
        let f = schmidt(&omega::<f64>(4)).unwrap();
        assert!(f.coefficients.iter().all(|&x| (x - 0.5).abs() < 1e-14));
    }

    #[test]
    fn schmidt_frame_unitary_reproduces_state() {
        let mut rng = seeded_rng(56, 0);
        let s = BipartitePureState::random(4, 4, 2, &mut rng);
        let f = schmidt(&s).unwrap();
        assert!(f.reconstruct().max_abs_diff(s.coeffs()) < 1e-12);
        assert!(unitary_defect(&f.basis_a) < 1e-12 && unitary_defect(&f.basis_b) < 1e-12);
        let x = f.x.unwrap();
        assert!(unitary_defect(&x) < 1e-12);
        let rho = reduce_a(&s).unwrap();
        let sr = psd_sqrt(rho.mat(), 1e-10).unwrap();
        let rebuilt = omega::<f64>(4).apply_a(&sr).unwrap().apply_b(&x).unwrap();
        assert!(rebuilt.coeffs().max_abs_diff(s.coeffs()) < 1e-9);
    }

    #[test]
    fn overlap_cases() {
        let mut rng = seeded_rng(57, 0);
        let c = BipartitePureState::random(3, 3, 3, &mut rng);
        let o = overlap(&c, &M::identity(3), &c).unwrap();
        assert!((o - C::new(1.0, 0.0)).norm() < 1e-14);

        let d = BipartitePureState::random(3, 3, 2, &mut rng);
        let r = random_matrix(3, 3, &mut rng);
        let moved = apply_b_vector(&r, &c);
        let oracle: C<f64> = d
            .to_vector()
            .iter()
            .zip(&moved)
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((overlap(&d, &r, &c).unwrap() - oracle).norm() < 1e-13);
        assert!(matches!(
            overlap(&d, &M::identity(2), &c),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn uhlmann_bound_for_random_unitaries() {
        let mut rng = seeded_rng(58, 0);
        for k in 0..500 {
            let d = 2 + k % 4;
            let c = BipartitePureState::random(d, d, 1 + k % d, &mut rng);
            let dd = BipartitePureState::random(d, d, 1 + (k / 3) % d, &mut rng);
            let f = fidelity(&reduce_a(&c).unwrap(), &reduce_a(&dd).unwrap()).unwrap();
            let r = random_unitary(d, &mut rng);
            assert!(overlap(&dd, &r, &c).unwrap().norm() <= f + 1e-9);
        }
    }

    #[test]
    fn single_precision_state() {
        let mut rng = seeded_rng(59, 0);
        let s = BipartitePureState::new(random_coeffs(3, 3, 3, &mut rng).cast::<f32>()).unwrap();
        let rho = reduce_a(&s).unwrap();
        assert!((rho.mat().trace().re - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn schmidt_spectra_agree(seed in any::<u64>(), da in 1usize..6, db in 1usize..6, r in 1usize..6) {
            let mut rng = seeded_rng(seed, 0);
            let s = BipartitePureState::random(da, db, r, &mut rng);
            let ea = hermitian_eigen(reduce_a(&s).unwrap().mat(), 1e-10).unwrap();
            let eb = hermitian_eigen(reduce_b(&s).unwrap().mat(), 1e-10).unwrap();
            let k = da.min(db);
            for i in 0..k {
                prop_assert!((ea.eigenvalues[i] - eb.eigenvalues[i]).abs() <= 1e-9);
            }
            prop_assert!(ea.eigenvalues[k..].iter().chain(&eb.eigenvalues[k..]).all(|x| x.abs() <= 1e-9));
            let f = schmidt(&s).unwrap();
            let sum_sq: f64 = f.coefficients.iter().map(|x| x * x).sum();
            prop_assert!((sum_sq - 1.0).abs() <= 1e-10);
            prop_assert!(f.reconstruct().max_abs_diff(s.coeffs()) <= 1e-9);
        }

        #[test]
        fn partial_trace_of_self_is_reduce_b(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = seeded_rng(seed, 0);
            let s = BipartitePureState::random(d, d, d, &mut rng);
            let t = partial_trace_a_outer(&s, &s).unwrap();
            prop_assert!(t.max_abs_diff(reduce_b(&s).unwrap().mat()) <= 1e-10);
        }

        #[test]
        fn fidelity_is_symmetric(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = seeded_rng(seed, 0);
            let a = reduce_a(&BipartitePureState::random(d, d, 1 + seed as usize % d, &mut rng)).unwrap();
            let b = reduce_a(&BipartitePureState::random(d, d, d, &mut rng)).unwrap();
            let (fab, fba) = (fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
            prop_assert!((fab - fba).abs() <= 1e-9);
            prop_assert!((0.0..=1.0 + 1e-9).contains(&fab));
        }
    }
}
