//! Seeded random matrices, unitaries and state coefficient grids.
//!
//! Every randomized routine takes an explicit RNG. `seeded_rng(seed, stream)` gives independent
//! substreams for parallel trials so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::{vec_inner, vec_norm, ComplexMatrix};
use crate::scalar::C;

pub type CMat = ComplexMatrix<f64>;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian with `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C<f64> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    random_matrix(n, n, rng).hermitian_part()
}

/// `G G*` with `G` of shape `n x rank`.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> CMat {
    let g = random_matrix(n, rank, rng);
    g.matmul(&g.adjoint()).hermitian_part()
}

pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C<f64>> {
    loop {
        let v: Vec<C<f64>> = (0..n).map(|_| complex_normal(rng)).collect();
        let nrm = vec_norm(&v);
        if nrm > 1e-8 {
            return v.into_iter().map(|z| z / nrm).collect();
        }
    }
}

/// Haar-distributed unitary via Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut cols: Vec<Vec<C<f64>>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut w: Vec<C<f64>> = (0..n).map(|_| complex_normal(rng)).collect();
        for _ in 0..2 {
            for b in &cols {
                let p = vec_inner(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= *bi * p;
                }
            }
        }
        let nrm = vec_norm(&w);
        if nrm > 1e-6 {
            cols.push(w.into_iter().map(|z| z / nrm).collect());
        }
    }
    CMat::from_fn(n, n, |i, j| cols[j][i])
}

/// Coefficient grid `U diag(s) V*` of exact rank `rank`, singular values drawn from
/// `[0.1, 1]` and then normalized to unit Frobenius norm.
pub fn random_coeffs<R: Rng + ?Sized>(
    dim_a: usize,
    dim_b: usize,
    rank: usize,
    rng: &mut R,
) -> CMat {
    let k = rank.clamp(1, dim_a.min(dim_b));
    let u = random_unitary(dim_a, rng);
    let v = random_unitary(dim_b, rng);
    let s: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..=1.0)).collect();
    let nrm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    CMat::from_fn(dim_a, dim_b, |i, j| {
        (0..k)
            .map(|l| u[(i, l)] * (s[l] / nrm) * v[(j, l)].conj())
            .sum()
    })
}
