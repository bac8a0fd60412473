//! Closed-form dual certificate for the rigidity SDP and an empirical probe of the primal.
//!
//! Certificate quantities live in the rotated frame of [`canonical_frame`], where
//! `W = sgn(sqrt(sigma) sqrt(rho))` and `rho`, `sigma` are the B-side marginals of the rotated
//! states.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    hermitian_eigen, psd_sqrt, schur_psd_check, svd, trace_norm, unitary_defect, ComplexMatrix,
    SchurCheck,
};
use crate::random::{random_hermitian, seeded_rng};
use crate::scalar::{check_tol, Real};
use crate::states::overlap;
use crate::uhlmann::{
    canonical_frame, canonical_w, inverse_mean, near_optimal_along, obliqueness_kappa,
    require_canonical_frame, residual_unchecked, spectral_gap_eta, unitary_completion,
    CanonicalFrame, UhlmannInstance, UNITARY_TOL,
};

/// Feasibility verdicts that disagree while the block eigenvalue is this far from zero are an
/// internal error.
pub const AGREEMENT_TOL: f64 = 1e-6;
/// Tolerance for the PSD and feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Per-instance data shared by every certificate: computed once after rotating the frame.
#[derive(Clone, Debug)]
pub struct Prepared<T: Real> {
    pub frame: CanonicalFrame<T>,
    pub rho: ComplexMatrix<T>,
    pub sigma: ComplexMatrix<T>,
    pub w: ComplexMatrix<T>,
    /// `A = sqrt(sigma) sqrt(rho)`.
    pub a: ComplexMatrix<T>,
    /// `P = W* W`.
    pub p: ComplexMatrix<T>,
    pub fidelity: T,
    pub eta: T,
    pub kappa: T,
    pub rank_tol: T,
}

pub fn prepare<T: Real>(inst: &UhlmannInstance<T>) -> Result<Prepared<T>> {
    let frame = canonical_frame(inst)?;
    prepare_framed(frame)
}

fn prepare_framed<T: Real>(frame: CanonicalFrame<T>) -> Result<Prepared<T>> {
    let inst = &frame.instance;
    let tol = check_tol::<T>();
    let rank_tol = inst.rank_tol();
    let (rho, sigma) = inst.b_marginals()?;
    let (rho, sigma) = (rho.into_mat(), sigma.into_mat());
    let w = canonical_w(inst, rank_tol)?;
    let a = psd_sqrt(&sigma, tol)?.matmul(&psd_sqrt(&rho, tol)?);
    let p = w.adjoint().matmul(&w);
    let fidelity = inst.fidelity()?;
    let eta = spectral_gap_eta(inst, rank_tol)?;
    let kappa = obliqueness_kappa(inst, rank_tol)?;
    Ok(Prepared {
        rho,
        sigma,
        w,
        a,
        p,
        fidelity,
        eta,
        kappa,
        rank_tol,
        frame,
    })
}

/// A dual point `(Y1, Y2, alpha)` with zero off-diagonal blocks.
#[derive(Clone, Debug)]
pub struct DualCertificate<T: Real> {
    pub alpha: T,
    /// `T = (alpha A* + P rho W*) / 2`.
    pub t: ComplexMatrix<T>,
    /// `sqrt(T* T)`.
    pub y1: ComplexMatrix<T>,
    /// `T (sqrt(T* T))^+ T*`.
    pub y2: ComplexMatrix<T>,
    /// `2 ||T||_1 + alpha (F - eps)`.
    pub value: T,
    /// `Tr Y1 + Tr Y2 + alpha (F - eps)`, the dual objective evaluated on the blocks.
    pub objective: T,
    pub feasible: bool,
    /// Smallest eigenvalue of `[[Y1, T*], [T, Y2]]`.
    pub feasibility_margin: T,
    pub schur: SchurCheck<T>,
}

impl<T: Real> Prepared<T> {
    /// `Tr(P rho)`.
    pub fn trace_p_rho(&self) -> T {
        self.p.matmul(&self.rho).trace().re
    }

    /// The multiplier `-kappa / eta` that realizes the bound.
    pub fn optimal_alpha(&self) -> T {
        -self.kappa / self.eta
    }

    pub fn certificate(&self, epsilon: T, alpha: T) -> Result<DualCertificate<T>> {
        let half = T::lit(0.5);
        let pr_w = self.p.matmul(&self.rho).matmul(&self.w.adjoint());
        let t = (self.a.adjoint().scale_real(alpha) + pr_w).scale_real(half);
        let s = svd(&t)?;
        // T = U S V*: sqrt(T*T) = V S V* and T (sqrt(T*T))^+ T* = U S U*.
        let n = t.rows();
        let y1 = ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| s.v[(i, k)] * s.singulars[k] * s.v[(j, k)].conj())
                .sum()
        });
        let y2 = ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| s.u[(i, k)] * s.singulars[k] * s.u[(j, k)].conj())
                .sum()
        });
        let tn: T = s.singulars.iter().copied().sum();
        let slack = alpha * (self.fidelity - epsilon);
        let value = T::lit(2.0) * tn + slack;
        let objective = y1.trace().re + y2.trace().re + slack;
        let tol = T::lit(FEASIBILITY_TOL);
        let schur = schur_psd_check(&y1, &t.adjoint(), &y2, tol)?;
        if !schur.agree() && schur.block_min_eig.abs() > T::lit(AGREEMENT_TOL) {
            return Err(Error::Inconsistent(format!(
                "schur criterion and block spectrum disagree (min eig {:.3e})",
                schur.block_min_eig.to_f64_lossy()
            )));
        }
        Ok(DualCertificate {
            alpha,
            value,
            objective,
            feasible: schur.criterion && schur.direct,
            feasibility_margin: schur.block_min_eig,
            t,
            y1,
            y2,
            schur,
        })
    }

    pub fn psd_core(&self) -> Result<PsdCore<T>> {
        let aw = self.a.adjoint().matmul(&self.w);
        let hermitian_defect = aw.hermitian_defect();
        let tol = check_tol::<T>();
        let sr = psd_sqrt(&self.rho, tol)?;
        let mean = inverse_mean(&self.rho, &self.sigma, self.rank_tol)?;
        let mean_defect = aw.max_abs_diff(&sr.matmul(&mean).matmul(&sr));
        let prp = self.p.matmul(&self.rho).matmul(&self.p);
        let core = (aw.scale_real(self.kappa / self.eta) - prp).hermitian_part();
        let e = hermitian_eigen(&core, T::lit(1e-6))?;
        let lim = T::lit(FEASIBILITY_TOL);
        Ok(PsdCore {
            min_eig: e.min_eigenvalue(),
            hermitian_defect,
            mean_defect,
            trace: core.trace().re,
            trace_norm: trace_norm(&core)?,
            ok: e.min_eigenvalue() >= -lim && hermitian_defect <= lim && mean_defect <= lim,
        })
    }

    /// `2 (value at alpha = -kappa/eta + Tr(P rho))`.
    pub fn dual_bound(&self, epsilon: T) -> Result<T> {
        let cert = self.certificate(epsilon, self.optimal_alpha())?;
        Ok(T::lit(2.0) * (cert.value + self.trace_p_rho()))
    }
}

/// Spectral data of `(kappa/eta) A* W - P rho P`.
#[derive(Clone, Debug)]
pub struct PsdCore<T: Real> {
    pub min_eig: T,
    /// `||A*W - (A*W)*||`, entrywise max.
    pub hermitian_defect: T,
    /// `||A*W - rho^1/2 (rho^-1 # sigma) rho^1/2||`, entrywise max.
    pub mean_defect: T,
    pub trace: T,
    pub trace_norm: T,
    pub ok: bool,
}

/// Certificate for an instance already in the rotated frame.
pub fn build_certificate<T: Real>(
    inst: &UhlmannInstance<T>,
    epsilon: T,
    alpha: T,
) -> Result<DualCertificate<T>> {
    require_canonical_frame(inst)?;
    prepare(inst)?.certificate(epsilon, alpha)
}

/// Smallest eigenvalue of `(kappa/eta) A* W - P rho P` for an instance in the rotated frame.
pub fn psd_core_check<T: Real>(inst: &UhlmannInstance<T>) -> Result<PsdCore<T>> {
    require_canonical_frame(inst)?;
    prepare(inst)?.psd_core()
}

/// Weak-duality bound on the rigidity residual; equals `2 kappa eps / eta`.
pub fn dual_bound<T: Real>(inst: &UhlmannInstance<T>, epsilon: T) -> Result<T> {
    if !(epsilon >= T::zero()) {
        return Err(Error::BadParams(format!(
            "epsilon must be >= 0, got {}",
            epsilon
        )));
    }
    prepare(inst)?.dual_bound(epsilon)
}

/// Largest residual found among unitaries meeting the overlap constraint.
#[derive(Clone, Debug, Serialize)]
pub struct PrimalProbe {
    pub best_residual: f64,
    pub best_overlap: f64,
    pub trials: usize,
    pub seed: u64,
    /// Index of the best candidate: trials first, then extra candidates.
    pub best_index: usize,
    /// Number of generated unitaries evaluated (trials plus admissible extras).
    pub evaluated: usize,
}

/// Probe over `trials` random geodesics from a completion of `W`.
pub fn primal_probe(
    inst: &UhlmannInstance<f64>,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<PrimalProbe> {
    primal_probe_with(inst, epsilon, trials, seed, &[])
}

/// As [`primal_probe`], also scoring the given unitaries when they meet the constraint.
pub fn primal_probe_with(
    inst: &UhlmannInstance<f64>,
    epsilon: f64,
    trials: usize,
    seed: u64,
    extra: &[ComplexMatrix<f64>],
) -> Result<PrimalProbe> {
    if trials == 0 {
        return Err(Error::BadParams("trials must be >= 1".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::BadParams(format!(
            "epsilon must be >= 0, got {}",
            epsilon
        )));
    }
    let tol = inst.rank_tol();
    let w = canonical_w(inst, tol)?;
    let u0 = unitary_completion(&w, tol)?;
    let f = inst.fidelity()?;
    let n = inst.dim_b();

    let scored: Vec<(usize, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(usize, f64, f64)> {
            let mut rng = seeded_rng(seed, trial as u64);
            let k = random_hermitian(n, &mut rng);
            let no = near_optimal_along(inst, &u0, &k, epsilon, f)?;
            Ok((trial, residual_unchecked(&inst.c, &w, &no.r)?, no.overlap))
        })
        .collect::<Result<_>>()?;

    let mut all = scored;
    for (i, r) in extra.iter().enumerate() {
        if unitary_defect(r) > UNITARY_TOL {
            return Err(Error::NotUnitary(unitary_defect(r)));
        }
        let ov = overlap(&inst.d, r, &inst.c)?.re;
        if ov >= f - epsilon - 1e-12 {
            all.push((trials + i, residual_unchecked(&inst.c, &w, r)?, ov));
        }
    }
    let (best_index, best_residual, best_overlap) =
        all.iter()
            .copied()
            .fold((usize::MAX, f64::NEG_INFINITY, 0.0), |acc, cand| {
                if cand.1 > acc.1 || (cand.1 == acc.1 && cand.0 < acc.0) {
                    cand
                } else {
                    acc
                }
            });
    Ok(PrimalProbe {
        best_residual,
        best_overlap,
        trials,
        seed,
        best_index,
        evaluated: all.len(),
    })
}
