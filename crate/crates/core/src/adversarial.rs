//! Constructions that show how the rigidity bound depends on its parameters: a discontinuity
//! example, tight adversaries for the spectral gap and the obliqueness, and a rounding step that
//! enlarges the spectral gap at small cost in overlap.

use rayon::prelude::*;
use serde::Serialize;

use crate::certificate::{dual_bound, primal_probe};
use crate::error::{Error, Result};
use crate::matcore::{
    complete_orthonormal, hermitian_eigen, op_norm, psd_sqrt, unitary_defect, vec_inner, vec_norm,
    ComplexMatrix,
};
use crate::scalar::C;
use crate::states::{overlap, schmidt, BipartitePureState, DensityMatrix};
use crate::uhlmann::{
    canonical_w, inverse_mean, obliqueness_kappa, rigidity_residual, spectral_gap_eta,
    unitary_completion, UhlmannInstance,
};

type M = ComplexMatrix<f64>;
type Vector = Vec<C<f64>>;

const CHECK_TOL: f64 = 1e-10;

fn diag_root_state(p: &[f64]) -> Result<BipartitePureState<f64>> {
    let s: Vec<f64> = p.iter().map(|x| x.max(0.0).sqrt()).collect();
    BipartitePureState::new(M::from_real_diag(&s))
}

/// One CSV line per construction.
#[derive(Clone, Debug, Serialize)]
pub struct CsvRow {
    pub construction: String,
    pub d: usize,
    pub eta_param: f64,
    pub tau: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub eta: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub residual: f64,
    pub bound: f64,
    pub tight: bool,
}

impl CsvRow {
    pub const HEADER: &'static str =
        "construction,d,eta_param,tau,F,eta,kappa,epsilon,residual,bound,tight";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            self.construction,
            self.d,
            self.eta_param,
            self.tau,
            self.fidelity,
            self.eta,
            self.kappa,
            self.epsilon,
            self.residual,
            self.bound,
            self.tight
        )
    }
}

// ---------------------------------------------------------------------------------------------
// Discontinuity of W in the states.

#[derive(Clone, Debug)]
pub struct QutritSensitivity {
    pub epsilon: f64,
    pub pair: UhlmannInstance<f64>,
    pub swapped_pair: UhlmannInstance<f64>,
    pub w: M,
    pub w_swapped: M,
    /// `||W - W~||_inf`.
    pub w_gap: f64,
    /// `|| |C> - |C~> ||`, equal to `sqrt(2 eps)`.
    pub state_distance: f64,
    /// Whether the distance is at most `eps` itself.
    pub within_epsilon: bool,
}

/// Two qutrit pairs `(C, C)` and `(C~, C)` whose canonical transformations differ by a swap of
/// `|1>` and `|2>` although `C` and `C~` are close.
pub fn qutrit_sensitivity(epsilon: f64) -> Result<QutritSensitivity> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::BadParams(format!(
            "epsilon must lie in [0, 1), got {}",
            epsilon
        )));
    }
    let a = C::new((1.0 - epsilon).sqrt(), 0.0);
    let b = C::new((epsilon / 2.0).sqrt(), 0.0);
    let mut c = M::zeros(3, 3);
    c[(0, 0)] = a;
    c[(1, 1)] = b;
    c[(2, 2)] = b;
    let mut ct = M::zeros(3, 3);
    ct[(0, 0)] = a;
    ct[(1, 2)] = b;
    ct[(2, 1)] = b;
    let c = BipartitePureState::new(c)?;
    let ct = BipartitePureState::new(ct)?;
    let pair = UhlmannInstance::new(c.clone(), c.clone())?;
    let swapped_pair = UhlmannInstance::new(ct.clone(), c.clone())?;
    let tol = pair.rank_tol();
    let w = canonical_w(&pair, tol)?;
    let w_swapped = canonical_w(&swapped_pair, tol)?;
    let w_gap = op_norm(&(w.clone() - w_swapped.clone()))?;
    let state_distance = c.distance_sq(&ct)?.sqrt();
    if epsilon > 0.0 {
        let mut swap = M::zeros(3, 3);
        swap[(0, 0)] = C::new(1.0, 0.0);
        swap[(1, 2)] = C::new(1.0, 0.0);
        swap[(2, 1)] = C::new(1.0, 0.0);
        let dev = w
            .max_abs_diff(&M::identity(3))
            .max(w_swapped.max_abs_diff(&swap));
        if dev > 1e-9 {
            return Err(Error::Inconsistent(format!(
                "qutrit transformations off by {:.3e}",
                dev
            )));
        }
    }
    Ok(QutritSensitivity {
        epsilon,
        pair,
        swapped_pair,
        w,
        w_swapped,
        w_gap,
        state_distance,
        within_epsilon: state_distance <= epsilon,
    })
}

// ---------------------------------------------------------------------------------------------
// Spectral gap family.

#[derive(Clone, Debug)]
pub struct EtaFamily {
    pub d: usize,
    pub eta: f64,
    /// `eta^2 / 2`.
    pub delta: f64,
    pub tau: f64,
    /// Indices moved by the adversary (a block of the lower-weight half).
    pub g: Vec<usize>,
    pub instance: UhlmannInstance<f64>,
    /// Cyclic shift on `g`, identity elsewhere.
    pub adversary_r: M,
    /// `tau sqrt(delta / 2)`, the deficit for `|G| = tau d / 2` exactly.
    pub epsilon_nominal: f64,
    /// Deficit of the adversary: `|G| eta / d`.
    pub epsilon: f64,
    /// `2 |G| / d`, the value `tau` takes once `|G|` is rounded to an integer.
    pub tau_effective: f64,
    pub fidelity: f64,
    pub eta_measured: f64,
    pub kappa: f64,
    pub residual: f64,
    /// Dual bound `2 kappa eps / eta` at the adversary's deficit.
    pub bound: f64,
}

impl EtaFamily {
    pub fn row(&self) -> CsvRow {
        CsvRow {
            construction: "eta".into(),
            d: self.d,
            eta_param: self.eta,
            tau: self.tau,
            fidelity: self.fidelity,
            eta: self.eta_measured,
            kappa: self.kappa,
            epsilon: self.epsilon,
            residual: self.residual,
            bound: self.bound,
            tight: (self.residual - self.bound).abs() <= 1e-6,
        }
    }

    /// Largest residual of the flipped pair `(D, C)` over probed near-optimal unitaries at the
    /// adversary's deficit, together with `2 sqrt(2) eps`.
    pub fn reverse_probe(&self, trials: usize, seed: u64) -> Result<(f64, f64)> {
        let flipped = self.instance.flipped();
        let probe = primal_probe(&flipped, self.epsilon, trials, seed)?;
        Ok((probe.best_residual, 2.0 * 2f64.sqrt() * self.epsilon))
    }
}

pub fn build_eta_family(d: usize, eta: f64, tau: f64) -> Result<EtaFamily> {
    if d < 4 || !d.is_multiple_of(2) {
        return Err(Error::BadParams(format!(
            "d must be even and at least 4, got {}",
            d
        )));
    }
    if !(eta > 0.0 && eta < 1.0) || !(tau > 0.0 && tau < 1.0) {
        return Err(Error::BadParams(format!(
            "eta and tau must lie in (0, 1), got eta={}, tau={}",
            eta, tau
        )));
    }
    let half = d / 2;
    let delta = eta * eta / 2.0;
    let g_size = ((tau * half as f64).ceil() as usize).max(2).min(half);
    let g: Vec<usize> = (half..half + g_size).collect();

    let mut sig = vec![2.0 * (1.0 - delta) / d as f64; half];
    sig.extend(vec![2.0 * delta / d as f64; half]);
    let c = diag_root_state(&vec![1.0 / d as f64; d])?;
    let dd = diag_root_state(&sig)?;
    let instance = UhlmannInstance::new(c, dd)?;

    let mut r = M::identity(d);
    for (k, &i) in g.iter().enumerate() {
        let j = g[(k + 1) % g_size];
        r[(i, i)] = C::new(0.0, 0.0);
        r[(j, i)] = C::new(1.0, 0.0);
    }

    let tol = instance.rank_tol();
    let fidelity = instance.fidelity()?;
    let eta_measured = spectral_gap_eta(&instance, tol)?;
    let kappa = obliqueness_kappa(&instance, tol)?;
    let w = canonical_w(&instance, tol)?;
    let residual = rigidity_residual(&instance, &w, &r)?;
    let epsilon = fidelity - overlap(&instance.d, &r, &instance.c)?.re;
    let bound = dual_bound(&instance, epsilon.max(0.0))?;

    let expected_f = ((1.0 - delta) / 2.0).sqrt() + (delta / 2.0).sqrt();
    let checks = [
        ("fidelity", (fidelity - expected_f).abs()),
        ("eta", (eta_measured - eta).abs()),
        ("deficit", (epsilon - g_size as f64 * eta / d as f64).abs()),
        (
            "residual",
            (residual - 2.0 * g_size as f64 / d as f64).abs(),
        ),
    ];
    if let Some((name, dev)) = checks.iter().find(|(_, dev)| *dev > 1e-9) {
        return Err(Error::Inconsistent(format!(
            "eta family {} off by {:.3e}",
            name, dev
        )));
    }
    if fidelity < 0.5 || residual < 2.0 * epsilon / eta - 1e-9 {
        return Err(Error::Inconsistent(
            "eta family lower bounds violated".into(),
        ));
    }

    Ok(EtaFamily {
        d,
        eta,
        delta,
        tau,
        g,
        instance,
        adversary_r: r,
        epsilon_nominal: tau * (delta / 2.0).sqrt(),
        epsilon,
        tau_effective: 2.0 * g_size as f64 / d as f64,
        fidelity,
        eta_measured,
        kappa,
        residual,
        bound,
    })
}

/// All combinations of the given parameters, built in parallel, in row-major grid order.
pub fn eta_family_grid(ds: &[usize], etas: &[f64], taus: &[f64]) -> Result<Vec<EtaFamily>> {
    let mut params = Vec::new();
    for &d in ds {
        for &e in etas {
            for &t in taus {
                params.push((d, e, t));
            }
        }
    }
    params
        .into_par_iter()
        .map(|(d, e, t)| build_eta_family(d, e, t))
        .collect()
}

// ---------------------------------------------------------------------------------------------
// Obliqueness family.

#[derive(Clone, Debug)]
pub struct KappaFamily {
    pub d: usize,
    pub rho: DensityMatrix<f64>,
    pub sigma_vec: Vector,
    pub epsilon: f64,
    /// `|C> = (1 (x) sqrt(rho))|Omega>`, `|D> = |conj(s)>|s>`.
    pub instance: UhlmannInstance<f64>,
    /// The rank-two partial isometry `|s><v^| + |s_perp><v^_perp|`.
    pub adversary_r: M,
    /// A unitary completion of `adversary_r`.
    pub adversary_unitary: M,
    /// `<s|rho^2|s> / <s|rho|s>^2`.
    pub kappa_formula: f64,
    pub kappa: f64,
    /// `1 / sqrt(<s|rho|s>)`.
    pub eta_formula: f64,
    pub eta: f64,
    pub fidelity: f64,
    pub overlap: f64,
    pub residual: f64,
    /// `kappa eps^2`.
    pub lower: f64,
    /// `2 kappa eps / eta`.
    pub upper: f64,
}

impl KappaFamily {
    pub fn row(&self) -> CsvRow {
        CsvRow {
            construction: "kappa".into(),
            d: self.d,
            eta_param: self.eta_formula,
            tau: f64::NAN,
            fidelity: self.fidelity,
            eta: self.eta,
            kappa: self.kappa,
            epsilon: self.epsilon,
            residual: self.residual,
            bound: self.upper,
            tight: (self.residual - self.upper).abs() <= 1e-6,
        }
    }
}

/// First vector of the standard basis, orthogonalized against `v`.
fn orthogonal_unit(v: &[C<f64>]) -> Vector {
    complete_orthonormal(&[v.to_vec()], v.len(), 1).remove(0)
}

/// `(<s|rho|s>, <s|rho^2|s> / <s|rho|s>^2)`.
fn kappa_moments(rho: &DensityMatrix<f64>, s: &[C<f64>]) -> (f64, f64) {
    let q1 = vec_inner(s, &rho.mat().apply(s)).re;
    let q2 = vec_inner(s, &rho.mat().matmul(rho.mat()).apply(s)).re;
    (q1, q2 / (q1 * q1))
}

/// Largest admissible deficit for [`build_kappa_family`]: `min(kappa^-1/2, 2F)`.
pub fn kappa_max_epsilon(rho: &DensityMatrix<f64>, sigma_vec: &[C<f64>]) -> f64 {
    let (q1, kappa) = kappa_moments(rho, sigma_vec);
    kappa.powf(-0.5).min(2.0 * q1.sqrt())
}

pub fn build_kappa_family(
    rho: &DensityMatrix<f64>,
    sigma_vec: &[C<f64>],
    epsilon: f64,
) -> Result<KappaFamily> {
    let d = rho.dim();
    if sigma_vec.len() != d || d < 2 {
        return Err(Error::DimensionMismatch(format!(
            "sigma vector of length {} for rho of dimension {}",
            sigma_vec.len(),
            d
        )));
    }
    let e = hermitian_eigen(rho.mat(), CHECK_TOL)?;
    if e.min_eigenvalue() <= 1e-12 {
        return Err(Error::NotInvertible(e.min_eigenvalue()));
    }
    let n = vec_norm(sigma_vec);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    let s: Vector = sigma_vec.to_vec();
    let (q1, kappa_formula) = kappa_moments(rho, &s);
    let f = q1.sqrt();
    let max_eps = kappa_max_epsilon(rho, &s);
    if !(epsilon > 0.0) {
        return Err(Error::BadParams(format!(
            "epsilon must be positive, got {}",
            epsilon
        )));
    }
    if epsilon > max_eps * (1.0 + 1e-12) {
        return Err(Error::EpsilonTooLarge {
            epsilon,
            max: max_eps,
        });
    }

    let root = psd_sqrt(rho.mat(), CHECK_TOL)?;
    // (1 (x) X)|Omega> has grid X^T.
    let c = BipartitePureState::new(root.transpose())?;
    let s_bar: Vector = s.iter().map(|z| z.conj()).collect();
    let dd = BipartitePureState::new(M::from_fn(d, d, |i, j| s_bar[i] * s[j]))?;
    let instance = UhlmannInstance::new(c, dd)?;

    let v: Vector = root.apply(&s).into_iter().map(|z| z / f).collect();
    let u = orthogonal_unit(&v);
    let a = 1.0 - epsilon / f;
    let b = (1.0 - a * a).max(0.0).sqrt();
    let v_hat: Vector = v.iter().zip(&u).map(|(x, y)| x * a + y * b).collect();
    let v_hat_perp: Vector = v.iter().zip(&u).map(|(x, y)| x * b - y * a).collect();
    let s_perp = orthogonal_unit(&s);
    let r = M::outer(&s, &v_hat) + M::outer(&s_perp, &v_hat_perp);

    let tol = instance.rank_tol();
    let unitary = unitary_completion(&r, tol)?;
    let w = canonical_w(&instance, tol)?;
    let w_expected = M::outer(&s, &v);
    let dev = w.max_abs_diff(&w_expected);
    if dev > 1e-8 {
        return Err(Error::Inconsistent(format!(
            "kappa family W off by {:.3e}",
            dev
        )));
    }
    let fidelity = instance.fidelity()?;
    let kappa = obliqueness_kappa(&instance, tol)?;
    let eta = spectral_gap_eta(&instance, tol)?;
    let ov = overlap(&instance.d, &unitary, &instance.c)?.re;
    let residual = rigidity_residual(&instance, &w, &unitary)?;
    Ok(KappaFamily {
        d,
        rho: rho.clone(),
        sigma_vec: s,
        epsilon,
        instance,
        adversary_r: r,
        adversary_unitary: unitary,
        kappa_formula,
        kappa,
        eta_formula: 1.0 / f,
        eta,
        fidelity,
        overlap: ov,
        residual,
        lower: kappa * epsilon * epsilon,
        upper: 2.0 * kappa * epsilon / eta,
    })
}

/// `rho = diag(1 - t, t)` padded with a uniform tail, and `|s>` placed mostly on the `t`
/// eigenvector so that `kappa` is close to `1 / (4t)` for small `t`.
pub fn kappa_instance_for(target_kappa: f64, d: usize) -> Result<(DensityMatrix<f64>, Vector)> {
    if !(target_kappa >= 1.0) || d < 2 {
        return Err(Error::BadParams(format!(
            "need kappa >= 1 and d >= 2, got kappa={}, d={}",
            target_kappa, d
        )));
    }
    let t = (0.25 / target_kappa).min(0.25);
    let tail = if d > 2 { 0.05 } else { 0.0 };
    let mut p = vec![(1.0 - t) * (1.0 - tail), t * (1.0 - tail)];
    for _ in 2..d {
        p.push(tail / (d - 2) as f64);
    }
    let rho = DensityMatrix::new(M::from_real_diag(&p))?;
    // Weight t / (1 + t) on the large eigenvector keeps <s|rho|s> of order t.
    let w_big = (t / (1.0 + t)).sqrt();
    let mut s = vec![C::new(0.0, 0.0); d];
    s[0] = C::new(w_big, 0.0);
    s[1] = C::new((1.0 - w_big * w_big).sqrt(), 0.0);
    Ok((rho, s))
}

// ---------------------------------------------------------------------------------------------
// Fidelity-boosted obliqueness family.

#[derive(Clone, Debug)]
pub struct BoostedKappa {
    /// `(|perp> + |C~>)/sqrt(2)` and `(|perp> + |D~>)/sqrt(2)` with `|perp> = |d>|d>` in one
    /// extra dimension on each side.
    pub instance: UhlmannInstance<f64>,
    pub base_fidelity: f64,
    pub fidelity: f64,
    pub eta: f64,
    pub kappa: f64,
    pub base_kappa: f64,
    /// `kappa F(base)^2`; at most one since `kappa(base) <= 1 / F(base)^2`.
    pub kappa_times_base_fidelity_sq: f64,
    /// The base adversary extended by the identity on the extra dimension.
    pub adversary_unitary: M,
    pub epsilon: f64,
    pub residual: f64,
    pub upper: f64,
}

impl BoostedKappa {
    pub fn row(&self) -> CsvRow {
        CsvRow {
            construction: "boosted".into(),
            d: self.instance.dim_a(),
            eta_param: f64::NAN,
            tau: f64::NAN,
            fidelity: self.fidelity,
            eta: self.eta,
            kappa: self.kappa,
            epsilon: self.epsilon,
            residual: self.residual,
            bound: self.upper,
            tight: (self.residual - self.upper).abs() <= 1e-6,
        }
    }
}

fn pad_with_corner(m: &M, corner: C<f64>) -> M {
    let (r, c) = m.shape();
    M::from_fn(r + 1, c + 1, |i, j| {
        if i < r && j < c {
            m[(i, j)]
        } else if i == r && j == c {
            corner
        } else {
            C::new(0.0, 0.0)
        }
    })
}

pub fn build_boosted_kappa(base: &KappaFamily) -> Result<BoostedKappa> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = pad_with_corner(&base.instance.c.coeffs().scale_real(h), C::new(h, 0.0));
    let d = pad_with_corner(&base.instance.d.coeffs().scale_real(h), C::new(h, 0.0));
    let instance = UhlmannInstance::new(BipartitePureState::new(c)?, BipartitePureState::new(d)?)?;
    let tol = instance.rank_tol();
    let fidelity = instance.fidelity()?;
    let eta = spectral_gap_eta(&instance, tol)?;
    let kappa = obliqueness_kappa(&instance, tol)?;
    let adversary = pad_with_corner(&base.adversary_unitary, C::new(1.0, 0.0));
    let w = canonical_w(&instance, tol)?;
    let residual = rigidity_residual(&instance, &w, &adversary)?;
    let epsilon = fidelity - overlap(&instance.d, &adversary, &instance.c)?.re;
    Ok(BoostedKappa {
        base_fidelity: base.fidelity,
        fidelity,
        eta,
        kappa,
        base_kappa: base.kappa,
        kappa_times_base_fidelity_sq: kappa * base.fidelity * base.fidelity,
        adversary_unitary: adversary,
        epsilon,
        residual,
        upper: 2.0 * kappa * epsilon / eta,
        instance,
    })
}

// ---------------------------------------------------------------------------------------------
// Rounding the spectral gap.

#[derive(Clone, Debug)]
pub struct RoundedPair {
    pub original: UhlmannInstance<f64>,
    pub rounded: UhlmannInstance<f64>,
    pub eta_target: f64,
    pub mix_delta: f64,
    /// `|<C^|C>|^2`.
    pub overlap_c: f64,
    /// `|<D~|D>|^2 = Tr(Pi sigma)`.
    pub overlap_d: f64,
    /// `1 / Tr(Pi sigma)`.
    pub beta: f64,
    pub rank_pi: usize,
    pub rounded_gap: f64,
}

/// Mixes `rho` toward the maximally mixed state, then projects `D` onto the eigenspace of
/// `rho^-1 # sigma` with eigenvalues at least `eta_target`.
///
/// Only `rho` is mixed: the projection argument needs `rho` invertible but not `sigma`.
/// `mix_delta <= eta_target^2` is required so that the mixing step alone keeps
/// `|<C^|C>|^2 >= 1 - eta_target^2`.
pub fn round_spectral_gap(
    inst: &UhlmannInstance<f64>,
    eta_target: f64,
    mix_delta: f64,
) -> Result<RoundedPair> {
    if !(eta_target > 0.0 && eta_target < 1.0) {
        return Err(Error::BadParams(format!(
            "eta_target must lie in (0, 1), got {}",
            eta_target
        )));
    }
    if !(mix_delta > 0.0 && mix_delta < 1.0) || mix_delta > eta_target * eta_target {
        return Err(Error::BadParams(format!(
            "mix_delta must lie in (0, eta_target^2] = (0, {}], got {}",
            eta_target * eta_target,
            mix_delta
        )));
    }
    let d = inst.dim_a();
    if d != inst.dim_b() {
        return Err(Error::DimensionMismatch(format!(
            "rounding needs dim_a == dim_b, got {}x{}",
            d,
            inst.dim_b()
        )));
    }
    let frame = schmidt(&inst.c)?;
    let x = frame.x.expect("square grid has a frame unitary");
    let rho_hat = inst.rho.mat().scale_real(1.0 - mix_delta)
        + M::identity(d).scale_real(mix_delta / d as f64);
    let root = psd_sqrt(&rho_hat, CHECK_TOL)?;
    let c_hat = BipartitePureState::normalize_from(root.matmul(&x.transpose()))?;
    let overlap_c = inst.c.inner(&c_hat)?.norm_sqr();

    let tol = inst.rank_tol();
    let g = inverse_mean(&rho_hat, inst.sigma.mat(), tol)?;
    let e = hermitian_eigen(&g, 1e-9)?;
    let keep: Vec<usize> = (0..d).filter(|&k| e.eigenvalues[k] >= eta_target).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateProjection);
    }
    let v = &e.eigenvectors;
    let pi = M::from_fn(d, d, |i, j| {
        keep.iter().map(|&k| v[(i, k)] * v[(j, k)].conj()).sum()
    });
    let projected = pi.matmul(inst.d.coeffs());
    let weight = projected.frobenius_norm().powi(2);
    if weight <= 1e-14 {
        return Err(Error::DegenerateProjection);
    }
    let d_tilde = BipartitePureState::normalize_from(projected)?;
    let overlap_d = inst.d.inner(&d_tilde)?.norm_sqr();
    let rounded = UhlmannInstance::new(c_hat, d_tilde)?;
    let rounded_gap = spectral_gap_eta(&rounded, rounded.rank_tol())?;
    Ok(RoundedPair {
        original: inst.clone(),
        rounded,
        eta_target,
        mix_delta,
        overlap_c,
        overlap_d,
        beta: 1.0 / weight,
        rank_pi: keep.len(),
        rounded_gap,
    })
}

/// `true` if `u` is unitary within `1e-9`.
pub fn is_unitary(u: &M) -> bool {
    unitary_defect(u) <= 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded_rng;

    #[test]
    fn qutrit_example() {
        for eps in [1e-4, 1e-2, 0.3] {
            let q = qutrit_sensitivity(eps).unwrap();
            assert!((q.w_gap - 2.0).abs() < 1e-9);
            assert!((q.state_distance - (2.0 * eps).sqrt()).abs() < 1e-12);
        }
        assert!(!qutrit_sensitivity(1e-2).unwrap().within_epsilon);
        let z = qutrit_sensitivity(0.0).unwrap();
        assert_eq!(z.state_distance, 0.0);
    }

    #[test]
    fn eta_family_reference_values() {
        let f = build_eta_family(4, 0.4, 0.5).unwrap();
        assert!((f.delta - 0.08).abs() < 1e-15);
        assert!((f.fidelity - (0.46f64.sqrt() + 0.04f64.sqrt())).abs() < 1e-12);
        assert!((f.epsilon_nominal - 0.1).abs() < 1e-12);
        assert_eq!(f.g.len(), 2);
        assert!((f.residual - 2.0 * 2.0 / 4.0).abs() < 1e-12);
        assert!((f.epsilon - 0.2).abs() < 1e-12);
        assert!((f.residual - f.bound).abs() < 1e-9);
        assert!(is_unitary(&f.adversary_r));
        let (rev, lim) = f.reverse_probe(64, 3).unwrap();
        assert!(rev <= lim + 1e-6);
    }

    #[test]
    fn eta_family_rejects_bad_params() {
        assert!(matches!(
            build_eta_family(3, 0.4, 0.5),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            build_eta_family(4, 1.4, 0.5),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn adversary_fixes_everything_outside_g() {
        let f = build_eta_family(8, 0.2, 0.25).unwrap();
        for i in 0..8 {
            if !f.g.contains(&i) {
                assert_eq!(f.adversary_r[(i, i)], C::new(1.0, 0.0));
            } else {
                assert_eq!(f.adversary_r[(i, i)], C::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn kappa_family_for_maximally_mixed_rho() {
        let rho = DensityMatrix::maximally_mixed(3);
        let mut rng = seeded_rng(91, 0);
        let s = crate::random::random_unit_vector(3, &mut rng);
        let k = build_kappa_family(&rho, &s, 0.1).unwrap();
        assert!((k.kappa - 1.0).abs() < 1e-9);
        assert!(k.residual >= 0.01 - 1e-8);
        assert!((k.overlap - (k.fidelity - 0.1)).abs() < 1e-8);
    }

    #[test]
    fn kappa_family_formulas() {
        let (rho, s) = kappa_instance_for(50.0, 3).unwrap();
        let eps = 0.5 * (1.0 / 50f64.sqrt()).min(0.1);
        let k = build_kappa_family(&rho, &s, eps).unwrap();
        assert!((k.kappa - k.kappa_formula).abs() < 1e-9 * k.kappa);
        assert!((k.eta - k.eta_formula).abs() < 1e-9 * k.eta);
        assert!(k.kappa > 10.0);
        assert!(k.residual >= k.lower - 1e-8);
        assert!(k.residual <= k.upper + 1e-6);
        assert!((k.overlap - (k.fidelity - eps)).abs() < 1e-8);
        assert!(crate::matcore::partial_isometry_defect(&k.adversary_r) < 1e-12);
    }

    #[test]
    fn kappa_family_rejects_large_epsilon_and_singular_rho() {
        let (rho, s) = kappa_instance_for(4.0, 2).unwrap();
        assert!(matches!(
            build_kappa_family(&rho, &s, 0.9),
            Err(Error::EpsilonTooLarge { .. })
        ));
        let sing = DensityMatrix::new(M::from_real_diag(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            build_kappa_family(&sing, &s, 0.01),
            Err(Error::NotInvertible(_))
        ));
    }

    #[test]
    fn boosted_family_relations() {
        let (rho, s) = kappa_instance_for(20.0, 2).unwrap();
        let base = build_kappa_family(&rho, &s, 0.05).unwrap();
        let b = build_boosted_kappa(&base).unwrap();
        assert!((b.fidelity - (0.5 + 0.5 * base.fidelity)).abs() < 1e-9);
        assert!(b.fidelity >= 0.5);
        assert!((b.eta - 1.0).abs() < 1e-6);
        assert!((b.kappa - base.kappa).abs() < 1e-6 * base.kappa);
        assert!(b.kappa_times_base_fidelity_sq <= 1.0 + 1e-9);
        assert!((b.epsilon - 0.025).abs() < 1e-9);
        assert!((b.residual - 0.5 * base.residual).abs() < 1e-9);
    }

    #[test]
    fn boosted_identical_states_have_unit_fidelity() {
        let rho = DensityMatrix::maximally_mixed(2);
        let s = vec![C::new(1.0, 0.0), C::new(0.0, 0.0)];
        let base = build_kappa_family(&rho, &s, 0.1).unwrap();
        let same = KappaFamily {
            instance: UhlmannInstance::new(base.instance.c.clone(), base.instance.c.clone())
                .unwrap(),
            ..base
        };
        let b = build_boosted_kappa(&same).unwrap();
        assert!((b.fidelity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rounding_already_gapped_instance_only_mixes() {
        let mut rng = seeded_rng(92, 0);
        let c = BipartitePureState::random(3, 3, 3, &mut rng);
        let inst = UhlmannInstance::new(c.clone(), c).unwrap();
        let r = round_spectral_gap(&inst, 0.5, 0.01).unwrap();
        assert_eq!(r.rank_pi, 3);
        assert!((r.overlap_d - 1.0).abs() < 1e-10);
        assert!(r.overlap_c >= 1.0 - 0.01);
        assert!(r.rounded_gap >= 0.5 - 1e-8);
    }

    #[test]
    fn rounding_the_eta_family() {
        let f = build_eta_family(8, 0.2, 0.5).unwrap();
        let r = round_spectral_gap(&f.instance, 0.5, 0.1).unwrap();
        assert!(r.rounded_gap >= 0.5 - 1e-8);
        assert!(r.overlap_c >= 1.0 - 0.25 && r.overlap_d >= 1.0 - 0.25);
        assert!(r.beta >= 1.0);
    }
}
