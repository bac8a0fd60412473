//! Stability of approximate representations of finite groups, phrased as an Uhlmann pair.
//!
//! Register layout: `A` purifies `rho`; `B = B1 (x) B2 (x) B3` with `B1` the representation
//! space and `B2`, `B3` copies of the group algebra. The B index is `(j |G| + g) |G| + h`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::RawGroup;
use crate::matcore::{expm_i_hermitian, op_norm, psd_sqrt, unitary_defect, ComplexMatrix};
use crate::random::{random_hermitian, random_psd, seeded_rng};
use crate::scalar::C;
use crate::states::{BipartitePureState, DensityMatrix};
use crate::uhlmann::{obliqueness_kappa, spectral_gap_eta, UhlmannInstance};

type M = ComplexMatrix<f64>;

const REP_UNITARY_TOL: f64 = 1e-9;
const MEASURE_TOL: f64 = 1e-9;
/// Largest order accepted for the built-in cyclic groups.
pub const MAX_CYCLIC_ORDER: usize = 8;

/// `table[a][b]` is the product `a b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<Vec<usize>>,
    inverse: Vec<usize>,
    identity: usize,
    labels: Vec<String>,
}

impl FiniteGroup {
    /// Validates closure, identity, inverses and associativity exhaustively.
    pub fn from_table(table: Vec<Vec<usize>>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        if table
            .iter()
            .any(|row| row.len() != n || row.iter().any(|&x| x >= n))
        {
            return Err(Error::InvalidGroup(format!(
                "table must be {n}x{n} with entries below {n}"
            )));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| table[e][a] == a && table[a][e] == a))
            .ok_or_else(|| Error::InvalidGroup("no identity element".into()))?;
        let mut inverse = Vec::with_capacity(n);
        for (a, row) in table.iter().enumerate() {
            let inv = (0..n)
                .find(|&b| row[b] == identity && table[b][a] == identity)
                .ok_or_else(|| Error::InvalidGroup(format!("element {a} has no inverse")))?;
            inverse.push(inv);
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::InvalidGroup(format!(
                            "({a} {b}) {c} != {a} ({b} {c})"
                        )));
                    }
                }
            }
        }
        let labels = match labels {
            Some(l) if l.len() != n => {
                return Err(Error::InvalidGroup(format!(
                    "{} labels for order {}",
                    l.len(),
                    n
                )))
            }
            Some(l) => l,
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        Ok(FiniteGroup {
            order: n,
            table,
            inverse,
            identity,
            labels,
        })
    }

    pub fn from_raw(raw: RawGroup) -> Result<Self> {
        if raw.order != raw.table.len() {
            return Err(Error::InvalidGroup(format!(
                "order {} but table has {} rows",
                raw.order,
                raw.table.len()
            )));
        }
        Self::from_table(raw.table, raw.labels)
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_CYCLIC_ORDER {
            return Err(Error::InvalidGroup(format!(
                "cyclic order must lie in 1..={MAX_CYCLIC_ORDER}, got {n}"
            )));
        }
        let table = (0..n)
            .map(|a| (0..n).map(|b| (a + b) % n).collect())
            .collect();
        Self::from_table(table, None)
    }

    /// Permutations of three points; `a b` applies `b` first.
    pub fn s3() -> Self {
        let perms = s3_perms();
        let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        let table = perms
            .iter()
            .map(|a| {
                perms
                    .iter()
                    .map(|b| idx([a[b[0]], a[b[1]], a[b[2]]]))
                    .collect()
            })
            .collect();
        let labels = perms
            .iter()
            .map(|p| format!("{}{}{}", p[0], p[1], p[2]))
            .collect();
        Self::from_table(table, Some(labels)).expect("S3 table is a group")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

fn s3_perms() -> [[usize; 3]; 6] {
    [
        [0, 1, 2],
        [1, 0, 2],
        [0, 2, 1],
        [2, 1, 0],
        [1, 2, 0],
        [2, 0, 1],
    ]
}

fn permutation_matrix(images: &[usize]) -> M {
    let n = images.len();
    M::from_fn(n, n, |i, j| {
        if images[j] == i {
            C::new(1.0, 0.0)
        } else {
            C::new(0.0, 0.0)
        }
    })
}

/// Unitaries indexed by group element, a measure, and the state the defect is measured on.
#[derive(Clone, Debug)]
pub struct ApproxRep {
    pub group: FiniteGroup,
    pub unitaries: Vec<M>,
    pub measure: Vec<f64>,
    pub state: DensityMatrix<f64>,
}

impl ApproxRep {
    pub fn new(
        group: FiniteGroup,
        unitaries: Vec<M>,
        measure: Vec<f64>,
        state: DensityMatrix<f64>,
    ) -> Result<Self> {
        let n = group.order();
        if unitaries.len() != n || measure.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} unitaries and {} weights for a group of order {}",
                unitaries.len(),
                measure.len(),
                n
            )));
        }
        let d = state.dim();
        for u in &unitaries {
            if u.shape() != (d, d) {
                return Err(Error::DimensionMismatch(format!(
                    "unitary {:?} on dimension {}",
                    u.shape(),
                    d
                )));
            }
            let defect = unitary_defect(u);
            if !(defect <= REP_UNITARY_TOL) {
                return Err(Error::NotUnitary(defect));
            }
        }
        let total: f64 = measure.iter().sum();
        if measure.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > MEASURE_TOL {
            return Err(Error::BadParams(format!(
                "measure must be a probability vector, sums to {}",
                total
            )));
        }
        Ok(ApproxRep {
            group,
            unitaries,
            measure,
            state,
        })
    }

    pub fn uniform(
        group: FiniteGroup,
        unitaries: Vec<M>,
        state: DensityMatrix<f64>,
    ) -> Result<Self> {
        let n = group.order();
        Self::new(group, unitaries, vec![1.0 / n as f64; n], state)
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    fn n(&self) -> usize {
        self.group.order()
    }
}

/// Exact representations used as perturbation centres.
pub mod reps {
    use super::*;

    /// `U_k = diag(exp(2 pi i k c_j / n))`.
    pub fn cyclic_characters(group: &FiniteGroup, charges: &[i64]) -> Vec<M> {
        let n = group.order() as f64;
        (0..group.order())
            .map(|k| {
                let phases: Vec<C<f64>> = charges
                    .iter()
                    .map(|&c| C::from_polar(1.0, 2.0 * PI * (k as f64) * (c as f64) / n))
                    .collect();
                M::from_diag(&phases)
            })
            .collect()
    }

    /// `U_g |x> = |g x>`, dimension `|G|`.
    pub fn regular(group: &FiniteGroup) -> Vec<M> {
        (0..group.order())
            .map(|g| {
                let images: Vec<usize> = (0..group.order()).map(|x| group.mul(g, x)).collect();
                permutation_matrix(&images)
            })
            .collect()
    }

    /// Permutation matrices of `S3` on three points, in the element order of [`FiniteGroup::s3`].
    pub fn s3_permutation() -> Vec<M> {
        s3_perms().iter().map(|p| permutation_matrix(p)).collect()
    }

    pub fn s3_sign() -> Vec<M> {
        s3_permutation()
            .iter()
            .map(|p| {
                let trace = p.trace().re;
                // Identity and 3-cycles have trace 3 and 0, transpositions trace 1.
                let s = if (trace - 1.0).abs() < 0.5 { -1.0 } else { 1.0 };
                M::from_real_diag(&[s])
            })
            .collect()
    }

    /// Restriction of the permutation representation to the complement of `(1, 1, 1)`.
    pub fn s3_standard() -> Vec<M> {
        let a = 1.0 / 2f64.sqrt();
        let b = 1.0 / 6f64.sqrt();
        let basis = M::from_fn(3, 2, |i, j| {
            let v = match (i, j) {
                (0, 0) => a,
                (1, 0) => -a,
                (2, 0) => 0.0,
                (0, 1) | (1, 1) => b,
                _ => -2.0 * b,
            };
            C::new(v, 0.0)
        });
        s3_permutation()
            .iter()
            .map(|p| basis.adjoint().matmul(p).matmul(&basis))
            .collect()
    }

    /// Direct sum of two representations of the same group.
    pub fn direct_sum(a: &[M], b: &[M]) -> Result<Vec<M>> {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                M::block2(
                    x,
                    &M::zeros(x.rows(), y.cols()),
                    &M::zeros(y.rows(), x.cols()),
                    y,
                )
            })
            .collect()
    }
}

/// `Tr(X* X rho)`.
fn rho_norm_sq(x: &M, rho: &M) -> f64 {
    x.adjoint().matmul(x).matmul(rho).trace().re
}

/// `E_{g ~ mu, h uniform} ||U_h U_g - U_hg||_rho^2` by the full double sum.
pub fn rep_defect(rep: &ApproxRep) -> f64 {
    let n = rep.n();
    let rho = rep.state.mat();
    let mut acc = 0.0;
    for g in 0..n {
        if rep.measure[g] == 0.0 {
            continue;
        }
        for h in 0..n {
            let diff = rep.unitaries[h].matmul(&rep.unitaries[g])
                - rep.unitaries[rep.group.mul(h, g)].clone();
            acc += rep.measure[g] * rho_norm_sq(&diff, rho);
        }
    }
    acc / n as f64
}

/// `|psi> = (1 (x) sqrt(rho))|Omega>`, grid `sqrt(rho)^T`.
pub fn purification(rho: &DensityMatrix<f64>) -> Result<M> {
    Ok(psd_sqrt(rho.mat(), 1e-10)?.transpose())
}

fn group_state(
    rep: &ApproxRep,
    psi: &M,
    pick: impl Fn(usize, usize) -> usize,
) -> Result<BipartitePureState<f64>> {
    let n = rep.n();
    let d = rep.dim();
    let da = psi.rows();
    let mut grid = M::zeros(da, d * n * n);
    for g in 0..n {
        let w = (rep.measure[g] / n as f64).sqrt();
        if w == 0.0 {
            continue;
        }
        for h in 0..n {
            let moved = psi.matmul(&rep.unitaries[pick(g, h)].transpose());
            for k in 0..da {
                for j in 0..d {
                    grid[(k, (j * n + g) * n + h)] = moved[(k, j)] * w;
                }
            }
        }
    }
    BipartitePureState::new(grid)
}

/// `|C>` carries `U_g` on `B1` and `|D>` carries `U_hg`.
pub fn build_states(rep: &ApproxRep) -> Result<UhlmannInstance<f64>> {
    let psi = purification(&rep.state)?;
    let c = group_state(rep, &psi, |g, _| g)?;
    let d = group_state(rep, &psi, |g, h| rep.group.mul(h, g))?;
    UhlmannInstance::new(c, d)
}

fn diag_unit(n: usize, g: usize, h: usize) -> M {
    let mut e = M::zeros(n * n, n * n);
    e[(g * n + h, g * n + h)] = C::new(1.0, 0.0);
    e
}

/// `sum_{g,h} U_hg U_g* (x) |g,h><g,h|`.
pub fn w_tilde(rep: &ApproxRep) -> M {
    let n = rep.n();
    let d = rep.dim();
    let mut out = M::zeros(d * n * n, d * n * n);
    for g in 0..n {
        for h in 0..n {
            let block = rep.unitaries[rep.group.mul(h, g)].matmul(&rep.unitaries[g].adjoint());
            out = out + block.kron(&diag_unit(n, g, h));
        }
    }
    out
}

/// `sum_h U_h (x) 1_B2 (x) |h><h|`.
pub fn prover_unitary(rep: &ApproxRep) -> M {
    let n = rep.n();
    let d = rep.dim();
    let mut out = M::zeros(d * n * n, d * n * n);
    for h in 0..n {
        let mut e = M::zeros(n * n, n * n);
        for g in 0..n {
            e[(g * n + h, g * n + h)] = C::new(1.0, 0.0);
        }
        out = out + rep.unitaries[h].kron(&e);
    }
    out
}

/// The regular action `R(g) = sum_h |h><hg|` as index maps, and the isometry
/// `V = |G|^-1/2 sum_h U_h (x) |h>` from `B1` into `B1 (x) B3`.
#[derive(Clone, Debug)]
pub struct Intertwiner {
    /// `perm[g][x]` is the image of basis vector `x` under `R(g)`.
    pub perm: Vec<Vec<usize>>,
    pub isometry: M,
}

impl Intertwiner {
    pub fn r_matrix(&self, g: usize) -> M {
        permutation_matrix(&self.perm[g])
    }

    /// `V* (1 (x) R(g)) V`.
    pub fn compressed(&self, g: usize) -> M {
        let d = self.isometry.cols();
        let lifted = M::identity(d).kron(&self.r_matrix(g));
        self.isometry
            .adjoint()
            .matmul(&lifted)
            .matmul(&self.isometry)
    }
}

pub fn intertwiner(rep: &ApproxRep) -> Intertwiner {
    let n = rep.n();
    let d = rep.dim();
    // R(g) sends |hg> to |h>.
    let perm = (0..n)
        .map(|g| {
            let mut images = vec![0; n];
            for h in 0..n {
                images[rep.group.mul(h, g)] = h;
            }
            images
        })
        .collect();
    let s = 1.0 / (n as f64).sqrt();
    let isometry = M::from_fn(d * n, d, |row, col| {
        let (j, h) = (row / n, row % n);
        rep.unitaries[h][(j, col)] * s
    });
    Intertwiner { perm, isometry }
}

/// `|G|^-1 sum_h U_h* U_hg`.
pub fn convolution(rep: &ApproxRep, g: usize) -> M {
    let n = rep.n();
    let mut acc = M::zeros(rep.dim(), rep.dim());
    for h in 0..n {
        acc = acc
            + rep.unitaries[h]
                .adjoint()
                .matmul(&rep.unitaries[rep.group.mul(h, g)]);
    }
    acc.scale_real(1.0 / n as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityResult {
    /// `E ||U_h U_g - U_hg||_rho^2`.
    pub defect_epsilon: f64,
    /// `E_g ||U_g - V* R(g) V||_rho^2`.
    pub stability_distance: f64,
    /// `||(1 (x) (U - W~))|C>||^2`.
    pub uhlmann_residual: f64,
    /// `E_g ||V U_g - R(g) V||_rho^2`.
    pub dilated_distance: f64,
    /// `Re <D|(1 (x) U)|C>`.
    pub overlap: f64,
    pub eta: f64,
    pub kappa: f64,
    /// `|uhlmann_residual - stability_distance|`.
    pub chain_gap: f64,
    pub chain_holds: bool,
    pub bound_holds: bool,
    pub unit_parameters: bool,
}

pub const CHAIN_TOL: f64 = 1e-8;
pub const BOUND_TOL: f64 = 1e-6;
pub const PARAMETER_TOL: f64 = 1e-8;

pub fn stability_check(rep: &ApproxRep) -> Result<StabilityResult> {
    let n = rep.n();
    let rho = rep.state.mat();
    let defect = rep_defect(rep);
    let inst = build_states(rep)?;
    let wt = w_tilde(rep);
    let u = prover_unitary(rep);
    let diff = inst.c.apply_b(&(u.clone() - wt))?;
    let uhlmann_residual = diff.coeffs().frobenius_norm().powi(2);
    let overlap = inst.d.inner(&inst.c.apply_b(&u)?)?.re;

    let tw = intertwiner(rep);
    let mut stability = 0.0;
    let mut dilated = 0.0;
    for g in 0..n {
        if rep.measure[g] == 0.0 {
            continue;
        }
        let ug = &rep.unitaries[g];
        stability += rep.measure[g] * rho_norm_sq(&(ug.clone() - tw.compressed(g)), rho);
        let lifted = M::identity(rep.dim()).kron(&tw.r_matrix(g));
        let dil = tw.isometry.matmul(ug) - lifted.matmul(&tw.isometry);
        dilated += rep.measure[g] * rho_norm_sq(&dil, rho);
    }

    let tol = inst.rank_tol();
    let eta = spectral_gap_eta(&inst, tol)?;
    let kappa = obliqueness_kappa(&inst, tol)?;
    let chain_gap = (uhlmann_residual - stability).abs();
    Ok(StabilityResult {
        defect_epsilon: defect,
        stability_distance: stability,
        uhlmann_residual,
        dilated_distance: dilated,
        overlap,
        eta,
        kappa,
        chain_gap,
        chain_holds: chain_gap <= CHAIN_TOL,
        bound_holds: stability <= defect + BOUND_TOL,
        unit_parameters: (eta - 1.0).abs() <= PARAMETER_TOL && (kappa - 1.0).abs() <= PARAMETER_TOL,
    })
}

/// Random density matrix with spectrum bounded below by `floor / d`.
pub fn random_state<R: Rng + ?Sized>(
    d: usize,
    floor: f64,
    rng: &mut R,
) -> Result<DensityMatrix<f64>> {
    let g = random_psd(d, d, rng);
    let g = g.scale_real(1.0 / g.trace().re);
    DensityMatrix::new(g.scale_real(1.0 - floor) + M::identity(d).scale_real(floor / d as f64))
}

/// `U_g = R(g) exp(i s H_g)` with independent Hermitian `H_g` of operator norm one.
pub fn perturb<R: Rng + ?Sized>(exact: &[M], scale: f64, rng: &mut R) -> Result<Vec<M>> {
    exact
        .iter()
        .map(|u| {
            let h = random_hermitian(u.rows(), rng);
            let norm = op_norm(&h)?;
            let h = if norm > 0.0 {
                h.scale_real(1.0 / norm)
            } else {
                h
            };
            Ok(u.matmul(&expm_i_hermitian(&h, scale, 1e-10)?))
        })
        .collect()
}

/// A uniform-measure perturbation of `exact` at the given scale on a fresh random state.
pub fn random_perturbed_rep<R: Rng + ?Sized>(
    group: &FiniteGroup,
    exact: &[M],
    scale: f64,
    rng: &mut R,
) -> Result<ApproxRep> {
    if exact.len() != group.order() {
        return Err(Error::DimensionMismatch(format!(
            "{} unitaries for a group of order {}",
            exact.len(),
            group.order()
        )));
    }
    let us = perturb(exact, scale, rng)?;
    let state = random_state(exact[0].rows(), 0.2, rng)?;
    ApproxRep::uniform(group.clone(), us, state)
}

/// `count` perturbations of `exact`, scales drawn uniformly from `[0, max_scale]`, each with
/// its own RNG stream and a fresh random state.
pub fn perturbation_sweep(
    group: &FiniteGroup,
    exact: &[M],
    count: usize,
    max_scale: f64,
    seed: u64,
) -> Result<Vec<(f64, StabilityResult)>> {
    (0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_rng(seed, t as u64);
            let s = rng.random::<f64>() * max_scale;
            let rep = random_perturbed_rep(group, exact, s, &mut rng)?;
            Ok((s, stability_check(&rep)?))
        })
        .collect()
}
