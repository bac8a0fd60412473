//! One-sided (Hestenes) Jacobi singular value decomposition.

use crate::error::{Error, Result};
use crate::matcore::matrix::{vec_inner, vec_norm};
use crate::matcore::ComplexMatrix;
use crate::scalar::{czero, Real, C};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `m = u diag(singulars) v*` with `k = min(rows, cols)` columns in `u` and `v`.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub u: ComplexMatrix<T>,
    pub singulars: Vec<T>,
    pub v: ComplexMatrix<T>,
}

impl<T: Real> Svd<T> {
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        self.weighted(|s| s)
    }

    /// `u f(diag) v*`.
    pub fn weighted(&self, f: impl Fn(T) -> T) -> ComplexMatrix<T> {
        let (m, n) = (self.u.rows(), self.v.rows());
        let w: Vec<T> = self.singulars.iter().map(|&s| f(s)).collect();
        ComplexMatrix::from_fn(m, n, |i, j| {
            let mut acc = czero();
            for (k, &wk) in w.iter().enumerate() {
                if wk != T::zero() {
                    acc += self.u[(i, k)] * self.v[(j, k)].conj() * wk;
                }
            }
            acc
        })
    }

    pub fn max_singular(&self) -> T {
        self.singulars.first().copied().unwrap_or_else(T::zero)
    }

    /// Number of singular values strictly above `rank_tol * max_singular`.
    pub fn rank(&self, rank_tol: T) -> usize {
        let cut = rank_tol * self.max_singular();
        self.singulars
            .iter()
            .filter(|&&s| s > cut && s > T::zero())
            .count()
    }
}

pub fn svd<T: Real>(m: &ComplexMatrix<T>) -> Result<Svd<T>> {
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.adjoint())?;
        Ok(Svd {
            u: t.v,
            singulars: t.singulars,
            v: t.u,
        })
    }
}

fn jacobi_tall<T: Real>(m: &ComplexMatrix<T>) -> Result<Svd<T>> {
    let (rows, n) = m.shape();
    let mut cols: Vec<Vec<C<T>>> = (0..n).map(|j| m.col(j)).collect();
    let mut v: Vec<Vec<C<T>>> = (0..n)
        .map(|j| {
            let mut e = vec![czero(); n];
            e[j] = C::new(T::one(), T::zero());
            e
        })
        .collect();
    let eps = T::epsilon();
    let rel_tol = eps * T::lit(rows.max(1) as f64);
    let fro2: T = cols.iter().flatten().map(|z| z.norm_sqr()).sum();
    let abs_floor = eps * eps * fro2;
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha: T = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: T = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = vec_inner(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g <= abs_floor || g <= rel_tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (T::lit(2.0) * g);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let jpq = phase * s;
                let jqp = -phase.conj() * s;
                rotate_pair(&mut cols, p, q, c, jpq, jqp);
                rotate_pair(&mut v, p, q, c, jpq, jqp);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("svd"));
    }

    let norms: Vec<T> = cols.iter().map(|c| vec_norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let smax = order.first().map(|&i| norms[i]).unwrap_or_else(T::zero);
    let floor = smax * eps * T::lit(rows.max(n) as f64);

    let mut ucols: Vec<Vec<C<T>>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if norms[i] > floor && norms[i] > T::zero() {
            let inv = T::one() / norms[i];
            ucols.push(cols[i].iter().map(|&z| z * inv).collect());
        } else {
            ucols.push(Vec::new());
            pending.push(k);
        }
    }
    if !pending.is_empty() {
        let known: Vec<Vec<C<T>>> = ucols.iter().filter(|c| !c.is_empty()).cloned().collect();
        let extra = complete_orthonormal(&known, rows, pending.len());
        for (slot, col) in pending.into_iter().zip(extra) {
            ucols[slot] = col;
        }
    }
    let u = ComplexMatrix::from_fn(rows, n, |i, j| ucols[j][i]);
    let vm = ComplexMatrix::from_fn(n, n, |i, j| v[order[j]][i]);
    let singulars = order.iter().map(|&i| norms[i]).collect();
    Ok(Svd {
        u,
        singulars,
        v: vm,
    })
}

fn rotate_pair<T: Real>(cols: &mut [Vec<C<T>>], p: usize, q: usize, c: T, jpq: C<T>, jqp: C<T>) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = a * c + b * jqp;
        *y = a * jpq + b * c;
    }
}

/// Extends an orthonormal set by `count` further orthonormal vectors in `C^dim`,
/// drawn deterministically from the standard basis by Gram-Schmidt.
pub fn complete_orthonormal<T: Real>(
    known: &[Vec<C<T>>],
    dim: usize,
    count: usize,
) -> Vec<Vec<C<T>>> {
    let mut basis: Vec<Vec<C<T>>> = known.to_vec();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut best: Option<(T, Vec<C<T>>)> = None;
        for e in 0..dim {
            let mut w = vec![czero(); dim];
            w[e] = C::new(T::one(), T::zero());
            for _ in 0..2 {
                for b in &basis {
                    let proj = vec_inner(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= *bi * proj;
                    }
                }
            }
            let nrm = vec_norm(&w);
            if best.as_ref().is_none_or(|(bn, _)| nrm > *bn) {
                best = Some((nrm, w));
            }
        }
        let (nrm, w) = best.expect("dimension at least one");
        let inv = T::one() / nrm;
        let w: Vec<C<T>> = w.into_iter().map(|z| z * inv).collect();
        basis.push(w.clone());
        out.push(w);
    }
    out
}
