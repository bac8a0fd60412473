//! Canonical Uhlmann transformation, the pseudoinverse geometric mean and the rigidity
//! parameters `eta` (spectral gap) and `kappa` (obliqueness).

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    hermitian_eigen, image_projector, matrix_sign, numerical_rank, op_norm,
    partial_isometry_defect, psd_pinv_sqrt, psd_sqrt, pseudoinverse, svd, unitary_defect,
    ComplexMatrix,
};
use crate::random::random_hermitian;
use crate::scalar::{check_tol, default_rank_tol, Real, C};
use crate::states::{
    fidelity, overlap, partial_trace_a_outer, reduce_a, reduce_b, schmidt, BipartitePureState,
    DensityMatrix,
};

/// Tolerance on `||W W* W - W||` accepted as a partial isometry.
pub const PARTIAL_ISOMETRY_TOL: f64 = 1e-8;
/// Tolerance on `||U* U - 1||` accepted as unitary.
pub const UNITARY_TOL: f64 = 1e-8;
/// Leak of `P` outside `Image(rho)` beyond which `kappa` is reported as ill-conditioned.
pub const OBLIQUE_LEAK_TOL: f64 = 1e-6;

/// A pair of states with their cached A-side reduced states.
#[derive(Clone, Debug)]
pub struct UhlmannInstance<T: Real> {
    pub c: BipartitePureState<T>,
    pub d: BipartitePureState<T>,
    pub rho: DensityMatrix<T>,
    pub sigma: DensityMatrix<T>,
}

impl<T: Real> UhlmannInstance<T> {
    pub fn new(c: BipartitePureState<T>, d: BipartitePureState<T>) -> Result<Self> {
        if c.coeffs().shape() != d.coeffs().shape() {
            return Err(Error::DimensionMismatch(format!(
                "states of shape {:?} and {:?}",
                c.coeffs().shape(),
                d.coeffs().shape()
            )));
        }
        let (c, d) = (c.normalized(), d.normalized());
        let rho = reduce_a(&c)?;
        let sigma = reduce_a(&d)?;
        Ok(Self { c, d, rho, sigma })
    }

    pub fn dim_a(&self) -> usize {
        self.c.dim_a()
    }

    pub fn dim_b(&self) -> usize {
        self.c.dim_b()
    }

    /// Default relative rank cut for this instance.
    pub fn rank_tol(&self) -> T {
        default_rank_tol::<T>(self.dim_a(), self.dim_b())
    }

    /// B-side reduced states `(Tr_A |C><C|, Tr_A |D><D|)`.
    pub fn b_marginals(&self) -> Result<(DensityMatrix<T>, DensityMatrix<T>)> {
        Ok((reduce_b(&self.c)?, reduce_b(&self.d)?))
    }

    pub fn fidelity(&self) -> Result<T> {
        fidelity(&self.rho, &self.sigma)
    }

    /// The same instance with `C` and `D` swapped.
    pub fn flipped(&self) -> Self {
        Self {
            c: self.d.clone(),
            d: self.c.clone(),
            rho: self.sigma.clone(),
            sigma: self.rho.clone(),
        }
    }
}

/// `W = sgn(Tr_A |D><C|)`.
pub fn canonical_w<T: Real>(inst: &UhlmannInstance<T>, rank_tol: T) -> Result<ComplexMatrix<T>> {
    matrix_sign(&partial_trace_a_outer(&inst.d, &inst.c)?, rank_tol)
}

/// `a # b = a^1/2 (a^-1/2 b a^-1/2)^1/2 a^1/2` with pseudoinverses.
pub fn geometric_mean<T: Real>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
    rank_tol: T,
) -> Result<ComplexMatrix<T>> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "geometric mean of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let tol = check_tol::<T>();
    let sa = psd_sqrt(a, tol)?;
    let isa = psd_pinv_sqrt(a, tol, rank_tol)?;
    psd_sqrt(&b.hermitian_part(), tol)?;
    let inner = isa.matmul(b).matmul(&isa).hermitian_part();
    let root = psd_sqrt(&inner, tol)?;
    Ok(sa.matmul(&root).matmul(&sa).hermitian_part())
}

/// `rho^-1 # sigma`, evaluated as `rho^-1/2 (rho^1/2 sigma rho^1/2)^1/2 rho^-1/2`.
pub fn inverse_mean<T: Real>(
    rho: &ComplexMatrix<T>,
    sigma: &ComplexMatrix<T>,
    rank_tol: T,
) -> Result<ComplexMatrix<T>> {
    let tol = check_tol::<T>();
    let sr = psd_sqrt(rho, tol)?;
    let isr = psd_pinv_sqrt(rho, tol, rank_tol)?;
    let inner = sr.matmul(sigma).matmul(&sr).hermitian_part();
    let root = psd_sqrt(&inner, tol)?;
    Ok(isr.matmul(&root).matmul(&isr).hermitian_part())
}

fn spectral_gap_of<T: Real>(
    rho: &ComplexMatrix<T>,
    sigma: &ComplexMatrix<T>,
    rank_tol: T,
) -> Result<T> {
    let g = inverse_mean(rho, sigma, rank_tol)?;
    let e = hermitian_eigen(&g, check_tol::<T>())?;
    let cut = rank_tol * e.max_eigenvalue();
    e.eigenvalues
        .iter()
        .rev()
        .copied()
        .find(|&l| l > cut && l > T::zero())
        .ok_or(Error::ZeroFidelity)
}

/// Smallest eigenvalue of `rho^-1 # sigma` above the relative rank cut.
pub fn spectral_gap_eta<T: Real>(inst: &UhlmannInstance<T>, rank_tol: T) -> Result<T> {
    spectral_gap_of(inst.rho.mat(), inst.sigma.mat(), rank_tol)
}

fn obliqueness_of<T: Real>(
    rho: &ComplexMatrix<T>,
    sigma: &ComplexMatrix<T>,
    rank_tol: T,
) -> Result<T> {
    let tol = check_tol::<T>();
    let sr = psd_sqrt(rho, tol)?;
    let isr = psd_pinv_sqrt(rho, tol, rank_tol)?;
    let core = sr.matmul(sigma).matmul(&sr).hermitian_part();
    let p = image_projector(&core, rank_tol)?;
    if p.trace().re < T::lit(0.5) {
        return Err(Error::ZeroFidelity);
    }
    let pi_rho = image_projector(rho, rank_tol)?;
    let n = rho.rows();
    let leak = op_norm(&(ComplexMatrix::identity(n) - pi_rho).matmul(&p))?;
    if leak > T::lit(OBLIQUE_LEAK_TOL) {
        return Err(Error::IllConditioned(leak.to_f64_lossy()));
    }
    let k = op_norm(&isr.matmul(&p).matmul(&sr))?;
    Ok(k * k)
}

/// `||rho^-1/2 P rho^1/2||^2` with `P` the projector onto `Image(rho^1/2 sigma rho^1/2)`.
pub fn obliqueness_kappa<T: Real>(inst: &UhlmannInstance<T>, rank_tol: T) -> Result<T> {
    obliqueness_of(inst.rho.mat(), inst.sigma.mat(), rank_tol)
}

/// The instance rotated into the frame `|C'> = (sqrt(rho) (x) 1)|Omega>`,
/// `|D'> = (sqrt(sigma) (x) 1)|Omega>`, with `|C> = (1 (x) X)|C'>` and `|D> = (1 (x) Y)|D'>`.
#[derive(Clone, Debug)]
pub struct CanonicalFrame<T: Real> {
    pub x: ComplexMatrix<T>,
    pub y: ComplexMatrix<T>,
    pub instance: UhlmannInstance<T>,
}

impl<T: Real> CanonicalFrame<T> {
    /// Maps an operator on B from the rotated frame back to the original one: `Y m X*`.
    pub fn to_original(&self, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.y.matmul(m).matmul(&self.x.adjoint())
    }

    /// Inverse of [`Self::to_original`]: `Y* m X`.
    pub fn from_original(&self, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.y.adjoint().matmul(m).matmul(&self.x)
    }
}

fn frame_unitary<T: Real>(
    s: &BipartitePureState<T>,
    root: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    let x = schmidt(s)?.x.ok_or_else(|| {
        Error::DimensionMismatch(format!(
            "frame rotation needs dim_a == dim_b, got {:?}",
            s.coeffs().shape()
        ))
    })?;
    let rebuilt = root.matmul(&x.transpose());
    let dev = rebuilt.max_abs_diff(s.coeffs());
    if dev > T::lit(1e-8) {
        return Err(Error::Inconsistent(format!(
            "frame unitary reproduces the state only to {:.3e}",
            dev.to_f64_lossy()
        )));
    }
    Ok(x)
}

pub fn canonical_frame<T: Real>(inst: &UhlmannInstance<T>) -> Result<CanonicalFrame<T>> {
    let tol = check_tol::<T>();
    let rc = psd_sqrt(inst.rho.mat(), tol)?;
    let rd = psd_sqrt(inst.sigma.mat(), tol)?;
    let x = frame_unitary(&inst.c, &rc)?;
    let y = frame_unitary(&inst.d, &rd)?;
    let instance = UhlmannInstance::new(
        BipartitePureState::normalize_from(rc)?,
        BipartitePureState::normalize_from(rd)?,
    )?;
    Ok(CanonicalFrame { x, y, instance })
}

/// Entrywise distance of the grids from `sqrt(rho)` and `sqrt(sigma)`.
pub fn frame_deviation<T: Real>(inst: &UhlmannInstance<T>) -> Result<T> {
    let tol = check_tol::<T>();
    let rc = psd_sqrt(inst.rho.mat(), tol)?;
    let rd = psd_sqrt(inst.sigma.mat(), tol)?;
    if !inst.c.coeffs().is_square() {
        return Err(Error::FrameMismatch(f64::INFINITY));
    }
    Ok(rc
        .max_abs_diff(inst.c.coeffs())
        .max(rd.max_abs_diff(inst.d.coeffs())))
}

/// Fails with `FrameMismatch` unless the instance already sits in the rotated frame.
pub fn require_canonical_frame<T: Real>(inst: &UhlmannInstance<T>) -> Result<()> {
    let dev = frame_deviation(inst)?;
    if dev > T::lit(1e-8) {
        return Err(Error::FrameMismatch(dev.to_f64_lossy()));
    }
    Ok(())
}

/// The three expressions for `W`, all reported in the original frame.
#[derive(Clone, Debug)]
pub struct WForms<T: Real> {
    /// `sgn(Tr_A |D><C|)`.
    pub direct: ComplexMatrix<T>,
    /// `Y sgn(sqrt(sigma) sqrt(rho)) X*` with B-side marginals of the rotated states.
    pub polar: ComplexMatrix<T>,
    /// `Y (rho^1/2 sigma^1/2)^+ rho^1/2 (rho^-1 # sigma) rho^1/2 X*`.
    pub mean: ComplexMatrix<T>,
}

impl<T: Real> WForms<T> {
    pub fn max_deviation(&self) -> T {
        self.direct
            .max_abs_diff(&self.polar)
            .max(self.direct.max_abs_diff(&self.mean))
            .max(self.polar.max_abs_diff(&self.mean))
    }
}

pub fn w_forms<T: Real>(inst: &UhlmannInstance<T>, rank_tol: T) -> Result<WForms<T>> {
    let tol = check_tol::<T>();
    let direct = canonical_w(inst, rank_tol)?;
    let frame = canonical_frame(inst)?;
    let (rho, sigma) = frame.instance.b_marginals()?;
    let sr = psd_sqrt(rho.mat(), tol)?;
    let ss = psd_sqrt(sigma.mat(), tol)?;
    let polar = matrix_sign(&ss.matmul(&sr), rank_tol)?;
    let g = inverse_mean(rho.mat(), sigma.mat(), rank_tol)?;
    let left = pseudoinverse(&sr.matmul(&ss), rank_tol)?;
    let mean = left.matmul(&sr).matmul(&g).matmul(&sr);
    Ok(WForms {
        direct,
        polar: frame.to_original(&polar),
        mean: frame.to_original(&mean),
    })
}

/// Comparison of `W W*` and `W* W` with the projectors they should equal.
#[derive(Clone, Debug)]
pub struct ProjectorStructure<T: Real> {
    /// `||W W* - proj Image(sigma^1/2 rho sigma^1/2)||`, entrywise max.
    pub left_defect: T,
    /// `||W* W - proj Image(rho^1/2 sigma rho^1/2)||`, entrywise max.
    pub right_defect: T,
    pub rank: usize,
    pub ok: bool,
}

pub fn projector_structure<T: Real>(
    inst: &UhlmannInstance<T>,
    w: &ComplexMatrix<T>,
    rank_tol: T,
) -> Result<ProjectorStructure<T>> {
    let tol = check_tol::<T>();
    let frame = canonical_frame(inst)?;
    let wp = frame.from_original(w);
    let (rho, sigma) = frame.instance.b_marginals()?;
    let sr = psd_sqrt(rho.mat(), tol)?;
    let ss = psd_sqrt(sigma.mat(), tol)?;
    let left = image_projector(&ss.matmul(rho.mat()).matmul(&ss).hermitian_part(), rank_tol)?;
    let right = image_projector(
        &sr.matmul(sigma.mat()).matmul(&sr).hermitian_part(),
        rank_tol,
    )?;
    let left_defect = wp.matmul(&wp.adjoint()).max_abs_diff(&left);
    let right_defect = wp.adjoint().matmul(&wp).max_abs_diff(&right);
    let lim = T::lit(1e-8);
    Ok(ProjectorStructure {
        left_defect,
        right_defect,
        rank: numerical_rank(&wp, rank_tol)?,
        ok: left_defect <= lim && right_defect <= lim,
    })
}

pub fn projector_structure_check<T: Real>(
    inst: &UhlmannInstance<T>,
    w: &ComplexMatrix<T>,
) -> Result<bool> {
    Ok(projector_structure(inst, w, inst.rank_tol())?.ok)
}

/// Unitary `U` with `U W*W = W`: the kernel of `W` is mapped onto its cokernel by the
/// singular vector pairing.
pub fn unitary_completion<T: Real>(w: &ComplexMatrix<T>, rank_tol: T) -> Result<ComplexMatrix<T>> {
    let n = w.rows();
    let r = completion_rank(w, rank_tol)?;
    unitary_completion_gauged(w, rank_tol, &ComplexMatrix::identity(n - r))
}

fn completion_rank<T: Real>(w: &ComplexMatrix<T>, rank_tol: T) -> Result<usize> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "completion of {:?}",
            w.shape()
        )));
    }
    let defect = partial_isometry_defect(w);
    if !(defect <= T::lit(PARTIAL_ISOMETRY_TOL)) {
        return Err(Error::NotPartialIsometry(defect.to_f64_lossy()));
    }
    numerical_rank(w, rank_tol)
}

/// Dimension of the kernel that a completion gauge acts on.
pub fn completion_kernel_dim<T: Real>(w: &ComplexMatrix<T>, rank_tol: T) -> Result<usize> {
    Ok(w.rows() - completion_rank(w, rank_tol)?)
}

/// Completion `W + sum_{k,l} u_k G_kl v_l*` over kernel/cokernel singular vectors, for any
/// unitary gauge `G` on the kernel.
pub fn unitary_completion_gauged<T: Real>(
    w: &ComplexMatrix<T>,
    rank_tol: T,
    gauge: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    let n = w.rows();
    let r = completion_rank(w, rank_tol)?;
    if gauge.shape() != (n - r, n - r) {
        return Err(Error::DimensionMismatch(format!(
            "gauge {:?} for a kernel of dimension {}",
            gauge.shape(),
            n - r
        )));
    }
    if unitary_defect(gauge) > T::lit(UNITARY_TOL) {
        return Err(Error::NotUnitary(unitary_defect(gauge).to_f64_lossy()));
    }
    let s = svd(w)?;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let mut acc: C<T> = (0..r).map(|k| s.u[(i, k)] * s.v[(j, k)].conj()).sum();
        for k in r..n {
            for l in r..n {
                acc += s.u[(i, k)] * gauge[(k - r, l - r)] * s.v[(j, l)].conj();
            }
        }
        acc
    }))
}

/// `||(1 (x) (W - R) W*W)|C>||^2`, defined for unitary `R`.
pub fn rigidity_residual<T: Real>(
    inst: &UhlmannInstance<T>,
    w: &ComplexMatrix<T>,
    r: &ComplexMatrix<T>,
) -> Result<T> {
    let defect = unitary_defect(r);
    if !(defect <= T::lit(UNITARY_TOL)) {
        return Err(Error::NotUnitary(defect.to_f64_lossy()));
    }
    residual_unchecked(&inst.c, w, r)
}

/// The residual without the unitarity check on `r`.
pub fn residual_unchecked<T: Real>(
    c: &BipartitePureState<T>,
    w: &ComplexMatrix<T>,
    r: &ComplexMatrix<T>,
) -> Result<T> {
    if w.shape() != r.shape() || w.rows() != c.dim_b() {
        return Err(Error::DimensionMismatch(format!(
            "residual with W {:?}, R {:?} on dim_b {}",
            w.shape(),
            r.shape(),
            c.dim_b()
        )));
    }
    let op = (w.clone() - r.clone()).matmul(&w.adjoint().matmul(w));
    let n = c.unit_coeffs().matmul(&op.transpose()).frobenius_norm();
    Ok(n * n)
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub fidelity: f64,
    pub eta: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub delta_bound: f64,
    pub weak_bound: f64,
    pub empirical_primal: Option<f64>,
}

/// Fidelity, `eta`, `kappa`, the bound `2 kappa eps / eta` and the weaker `8(1 - F + sqrt(eps))`.
pub fn rigidity_report<T: Real>(inst: &UhlmannInstance<T>, epsilon: T) -> Result<RigidityReport> {
    if !(epsilon >= T::zero()) {
        return Err(Error::BadParams(format!(
            "epsilon must be >= 0, got {}",
            epsilon
        )));
    }
    let tol = inst.rank_tol();
    let f = inst.fidelity()?;
    let eta = spectral_gap_eta(inst, tol)?;
    let kappa = obliqueness_kappa(inst, tol)?;
    let two = T::lit(2.0);
    Ok(RigidityReport {
        fidelity: f.to_f64_lossy(),
        eta: eta.to_f64_lossy(),
        kappa: kappa.to_f64_lossy(),
        epsilon: epsilon.to_f64_lossy(),
        delta_bound: (two * kappa * epsilon / eta).to_f64_lossy(),
        weak_bound: (T::lit(8.0) * (T::one() - f + epsilon.sqrt())).to_f64_lossy(),
        empirical_primal: None,
    })
}

/// A unitary on the constraint surface `Re <D|1 (x) R|C> >= F - eps`.
#[derive(Clone, Debug)]
pub struct NearOptimal<T: Real> {
    pub r: ComplexMatrix<T>,
    pub overlap: T,
    pub deficit: T,
    pub t: T,
}

const SCAN_STEPS: usize = 64;
const BISECT_STEPS: usize = 60;

/// Walks `R(t) = U0 exp(i t K)` away from the completion `U0` and stops where the overlap
/// deficit first reaches `epsilon`. `K` is rescaled to unit operator norm; if the deficit never
/// reaches `epsilon` on `t in [0, pi]` the endpoint `t = pi` is returned.
pub fn near_optimal_along<T: Real>(
    inst: &UhlmannInstance<T>,
    u0: &ComplexMatrix<T>,
    direction: &ComplexMatrix<T>,
    epsilon: T,
    fidelity: T,
) -> Result<NearOptimal<T>> {
    let e = hermitian_eigen(direction, check_tol::<T>())?;
    let scale = e
        .max_eigenvalue()
        .abs()
        .max(e.min_eigenvalue().abs())
        .max(T::min_positive_value());
    let lam: Vec<T> = e.eigenvalues.iter().map(|&l| l / scale).collect();
    let q = &e.eigenvectors;
    // overlap(R) = Tr(R N^T) with N = D* C, so overlap(t) = sum_k e^{i t lam_k} (Q* N^T U0 Q)_kk.
    let n_mat = inst.d.coeffs().adjoint().matmul(inst.c.coeffs());
    let core = q.adjoint().matmul(&n_mat.transpose()).matmul(u0).matmul(q);
    let z: Vec<C<T>> = (0..lam.len()).map(|k| core[(k, k)]).collect();
    let ov = |t: T| -> T {
        lam.iter()
            .zip(&z)
            .map(|(&l, &zk)| (C::from_polar(T::one(), t * l) * zk).re)
            .sum()
    };
    let deficit = |t: T| fidelity - ov(t);

    let pi = T::PI();
    let mut t_star = if epsilon > T::zero() { pi } else { T::zero() };
    if epsilon > T::zero() {
        let step = pi / T::lit(SCAN_STEPS as f64);
        let mut prev = T::zero();
        for k in 1..=SCAN_STEPS {
            let t = step * T::lit(k as f64);
            if deficit(t) > epsilon {
                let (mut lo, mut hi) = (prev, t);
                for _ in 0..BISECT_STEPS {
                    let mid = (lo + hi) / T::lit(2.0);
                    if deficit(mid) > epsilon {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                t_star = lo;
                break;
            }
            prev = t;
        }
    }
    let n = lam.len();
    let phases: Vec<C<T>> = lam
        .iter()
        .map(|&l| C::from_polar(T::one(), t_star * l))
        .collect();
    let expo = ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| q[(i, k)] * phases[k] * q[(j, k)].conj())
            .sum()
    });
    let r = u0.matmul(&expo);
    let o = overlap(&inst.d, &r, &inst.c)?.re;
    Ok(NearOptimal {
        r,
        overlap: o,
        deficit: fidelity - o,
        t: t_star,
    })
}

/// [`near_optimal_along`] with a random Hermitian direction.
pub fn random_near_optimal<R: Rng + ?Sized>(
    inst: &UhlmannInstance<f64>,
    u0: &ComplexMatrix<f64>,
    epsilon: f64,
    fidelity: f64,
    rng: &mut R,
) -> Result<NearOptimal<f64>> {
    let k = random_hermitian(inst.dim_b(), rng);
    near_optimal_along(inst, u0, &k, epsilon, fidelity)
}
