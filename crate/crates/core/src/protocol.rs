//! Monte-Carlo simulation of the two-round synthesis protocol with unitary provers.
//!
//! Each test round is an independent Bernoulli draw whose probability is the exact Born
//! probability of the all-zeros outcome, so no statevector sampling error enters.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{numerical_rank, svd, trace_norm, unitary_defect, ComplexMatrix};
use crate::random::{random_unitary, seeded_rng};
use crate::scalar::C;
use crate::states::{overlap, BipartitePureState};
use crate::uhlmann::{
    canonical_w, obliqueness_kappa, random_near_optimal, spectral_gap_eta, unitary_completion,
    unitary_completion_gauged, UhlmannInstance,
};

type M = ComplexMatrix<f64>;

const CHANNEL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolParams {
    pub n: u32,
    pub r: u32,
    pub gamma: f64,
    pub eta: f64,
    pub kappa: f64,
    /// `ceil(8 n (kappa r / eta)^2)`.
    pub m: usize,
    /// `m (gamma - eta / (4 kappa r))`; non-positive means every run accepts.
    pub threshold: f64,
}

impl ProtocolParams {
    pub fn new(n: u32, r: u32, gamma: f64, eta: f64, kappa: f64) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::BadParams("n and r must be positive".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) || !(eta > 0.0) || !(kappa > 0.0) {
            return Err(Error::BadParams(format!(
                "need gamma in (0, 1], eta > 0, kappa > 0; got gamma={}, eta={}, kappa={}",
                gamma, eta, kappa
            )));
        }
        let ratio = kappa * r as f64 / eta;
        let m = (8.0 * n as f64 * ratio * ratio).ceil().max(1.0);
        if m > 1e7 {
            return Err(Error::BadParams(format!(
                "repetition count {} is too large to simulate",
                m
            )));
        }
        let m = m as usize;
        Ok(ProtocolParams {
            n,
            r,
            gamma,
            eta,
            kappa,
            m,
            threshold: m as f64 * (gamma - eta / (4.0 * kappa * r as f64)),
        })
    }

    /// Parameters read off the instance; `gamma` defaults to the honest per-round accept
    /// probability.
    pub fn for_instance(
        inst: &UhlmannInstance<f64>,
        n: u32,
        r: u32,
        gamma: Option<f64>,
    ) -> Result<Self> {
        check_qubits(inst, n)?;
        let tol = inst.rank_tol();
        let eta = spectral_gap_eta(inst, tol)?;
        let kappa = obliqueness_kappa(inst, tol)?;
        let gamma = match gamma {
            Some(g) => g,
            None => accept_probability(inst, &ProverStrategy::honest(inst)?)?,
        };
        ProtocolParams::new(n, r, gamma, eta, kappa)
    }

    /// `1 - 2^-n`.
    pub fn completeness_target(&self) -> f64 {
        1.0 - 0.5f64.powi(self.n as i32)
    }
}

fn check_qubits(inst: &UhlmannInstance<f64>, n: u32) -> Result<()> {
    if n >= 16 || inst.dim_b() != 1usize << n {
        return Err(Error::DimensionMismatch(format!(
            "register B has dimension {}, expected 2^{}",
            inst.dim_b(),
            n
        )));
    }
    Ok(())
}

/// A unitary on `B (x) E` with the ancilla `E` starting in `|0>`. Basis order is `b * dim_e + e`.
#[derive(Clone, Debug)]
pub struct ProverStrategy {
    pub label: String,
    pub channel: M,
    pub ancilla_dim: usize,
}

impl ProverStrategy {
    pub fn unitary(label: impl Into<String>, u: M) -> Result<Self> {
        Self::with_ancilla(label, u, 1)
    }

    pub fn with_ancilla(label: impl Into<String>, u: M, ancilla_dim: usize) -> Result<Self> {
        if ancilla_dim == 0 || !u.is_square() || !u.rows().is_multiple_of(ancilla_dim) {
            return Err(Error::DimensionMismatch(format!(
                "channel {:?} with ancilla dimension {}",
                u.shape(),
                ancilla_dim
            )));
        }
        let defect = unitary_defect(&u);
        if !(defect <= CHANNEL_TOL) {
            return Err(Error::NotUnitary(defect));
        }
        Ok(ProverStrategy {
            label: label.into(),
            channel: u,
            ancilla_dim,
        })
    }

    /// The canonical completion of `W`.
    pub fn honest(inst: &UhlmannInstance<f64>) -> Result<Self> {
        let w = canonical_w(inst, inst.rank_tol())?;
        Self::unitary("honest", unitary_completion(&w, inst.rank_tol())?)
    }

    /// Cyclic shift `|b> -> |b + 1 mod d>`.
    pub fn derangement(d: usize) -> Result<Self> {
        let u = M::from_fn(d, d, |i, j| {
            if i == (j + 1) % d {
                C::new(1.0, 0.0)
            } else {
                C::new(0.0, 0.0)
            }
        });
        Self::unitary("derangement", u)
    }

    pub fn random(d: usize, seed: u64) -> Result<Self> {
        Self::unitary("random", random_unitary(d, &mut seeded_rng(seed, 0)))
    }

    /// A unitary whose overlap falls short of the fidelity by `epsilon`.
    pub fn near_optimal(inst: &UhlmannInstance<f64>, epsilon: f64, seed: u64) -> Result<Self> {
        let honest = Self::honest(inst)?;
        let f = inst.fidelity()?;
        let near =
            random_near_optimal(inst, &honest.channel, epsilon, f, &mut seeded_rng(seed, 0))?;
        Self::unitary(format!("epsilon:{}", epsilon), near.r)
    }

    pub fn dim_b(&self) -> usize {
        self.channel.rows() / self.ancilla_dim
    }

    /// `K_e = (1 (x) <e|) U (1 (x) |0>)`.
    pub fn kraus(&self) -> Vec<M> {
        let de = self.ancilla_dim;
        let d = self.dim_b();
        (0..de)
            .map(|e| M::from_fn(d, d, |i, j| self.channel[(i * de + e, j * de)]))
            .collect()
    }
}

fn check_prover(inst: &UhlmannInstance<f64>, prover: &ProverStrategy) -> Result<()> {
    if prover.dim_b() != inst.dim_b() {
        return Err(Error::DimensionMismatch(format!(
            "prover acts on dimension {}, register B has {}",
            prover.dim_b(),
            inst.dim_b()
        )));
    }
    Ok(())
}

/// Probability that one test round reports the all-zeros outcome.
pub fn accept_probability(inst: &UhlmannInstance<f64>, prover: &ProverStrategy) -> Result<f64> {
    check_prover(inst, prover)?;
    let mut p = 0.0;
    for k in prover.kraus() {
        p += overlap(&inst.d, &k, &inst.c)?.norm_sqr();
    }
    Ok(p.min(1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub accepted: bool,
    pub j: usize,
    pub i_star: usize,
    /// `<T|out|T>` with `T` the canonical completion applied to the input slot.
    pub output_state_fidelity: f64,
}

fn slot_fidelity(
    inst: &UhlmannInstance<f64>,
    prover: &ProverStrategy,
    input: &BipartitePureState<f64>,
) -> Result<f64> {
    if input.dim_b() != inst.dim_b() {
        return Err(Error::DimensionMismatch(format!(
            "input register has dimension {}, expected {}",
            input.dim_b(),
            inst.dim_b()
        )));
    }
    let honest = ProverStrategy::honest(inst)?;
    let target = input.apply_b(&honest.channel)?;
    let mut f = 0.0;
    for k in prover.kraus() {
        f += overlap(&target, &k, input)?.norm_sqr();
    }
    Ok(f)
}

fn run_rounds<R: Rng + ?Sized>(
    params: &ProtocolParams,
    p: f64,
    rng: &mut R,
) -> (usize, usize, bool) {
    let i_star = rng.random_range(0..params.m);
    let mut j = 0;
    for i in 0..params.m {
        if i != i_star && rng.random::<f64>() < p {
            j += 1;
        }
    }
    (i_star, j, j as f64 >= params.threshold)
}

/// One execution of the protocol. The input slot is `input`'s B register.
pub fn run_protocol(
    inst: &UhlmannInstance<f64>,
    params: &ProtocolParams,
    prover: &ProverStrategy,
    input: &BipartitePureState<f64>,
    seed: u64,
) -> Result<RunOutcome> {
    let p = accept_probability(inst, prover)?;
    let output_state_fidelity = slot_fidelity(inst, prover, input)?;
    let (i_star, j, accepted) = run_rounds(params, p, &mut seeded_rng(seed, 0));
    Ok(RunOutcome {
        accepted,
        j,
        i_star,
        output_state_fidelity,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub i_star: usize,
    pub j: usize,
    pub accepted: bool,
}

/// Independent runs with per-trial RNG streams, ordered by trial.
pub fn simulate(
    inst: &UhlmannInstance<f64>,
    params: &ProtocolParams,
    prover: &ProverStrategy,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let p = accept_probability(inst, prover)?;
    Ok((0..trials)
        .into_par_iter()
        .map(|t| {
            let (i_star, j, accepted) = run_rounds(params, p, &mut seeded_rng(seed, t as u64));
            TrialRecord {
                trial: t,
                i_star,
                j,
                accepted,
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletenessReport {
    pub trials: usize,
    pub accepted: usize,
    pub acceptance: f64,
    /// Binomial standard error of `acceptance`.
    pub sigma_hat: f64,
    /// `1 - 2^-n`.
    pub target: f64,
    pub band_lower: f64,
    pub meets_band: bool,
    pub honest_probability: f64,
    pub params: ProtocolParams,
}

pub fn completeness_experiment(
    inst: &UhlmannInstance<f64>,
    params: &ProtocolParams,
    trials: usize,
    seed: u64,
) -> Result<CompletenessReport> {
    if trials == 0 {
        return Err(Error::BadParams("trials must be positive".into()));
    }
    let honest = ProverStrategy::honest(inst)?;
    let records = simulate(inst, params, &honest, trials, seed)?;
    let accepted = records.iter().filter(|r| r.accepted).count();
    let acceptance = accepted as f64 / trials as f64;
    let sigma_hat = (acceptance * (1.0 - acceptance) / trials as f64).sqrt();
    let target = params.completeness_target();
    let band_lower = target - 3.0 * sigma_hat;
    Ok(CompletenessReport {
        trials,
        accepted,
        acceptance,
        sigma_hat,
        target,
        band_lower,
        meets_band: acceptance >= band_lower,
        honest_probability: accept_probability(inst, &honest)?,
        params: params.clone(),
    })
}

/// Unitary completion of `W` closest in Frobenius norm to `r`: the kernel gauge is the polar
/// factor of `r` compressed to the kernel/cokernel pair.
pub fn closest_completion(w: &M, r: &M, rank_tol: f64) -> Result<M> {
    let s = svd(w)?;
    let n = w.rows();
    let k = numerical_rank(w, rank_tol)?;
    let compressed = M::from_fn(n - k, n - k, |a, b| {
        let mut acc = C::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += s.u[(i, k + a)].conj() * r[(i, j)] * s.v[(j, k + b)];
            }
        }
        acc
    });
    let gauge = if n == k {
        M::identity(0)
    } else {
        svd(&compressed)?.weighted(|_| 1.0)
    };
    unitary_completion_gauged(w, rank_tol, &gauge)
}

fn pure_density(v: &[C<f64>]) -> M {
    M::outer(v, v)
}

/// Trace distance between the prover's output on `|C>` and the closest completion's output.
pub fn slot_trace_distance(inst: &UhlmannInstance<f64>, prover: &ProverStrategy) -> Result<f64> {
    check_prover(inst, prover)?;
    let tol = inst.rank_tol();
    let w = canonical_w(inst, tol)?;
    let kraus = prover.kraus();
    let target = closest_completion(&w, &kraus[0], tol)?;
    let t = inst.c.apply_b(&target)?.to_vector();
    let mut out = M::zeros(t.len(), t.len());
    for k in &kraus {
        out = out + pure_density(&inst.c.apply_b(k)?.to_vector());
    }
    Ok(0.5 * trace_norm(&(out - pure_density(&t)))?)
}

#[derive(Clone, Debug, Serialize)]
pub struct SoundnessEntry {
    pub label: String,
    pub round_probability: f64,
    pub acceptance: f64,
    /// Present when the prover is accepted at least half of the time.
    pub distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SoundnessReport {
    pub entries: Vec<SoundnessEntry>,
    pub max_distance: f64,
    /// `1 / r`.
    pub limit: f64,
}

pub fn soundness_probe(
    inst: &UhlmannInstance<f64>,
    params: &ProtocolParams,
    provers: &[ProverStrategy],
    trials: usize,
    seed: u64,
) -> Result<SoundnessReport> {
    if provers.is_empty() || trials == 0 {
        return Err(Error::BadParams(
            "need at least one prover and one trial".into(),
        ));
    }
    let mut entries = Vec::with_capacity(provers.len());
    for (idx, prover) in provers.iter().enumerate() {
        let records = simulate(inst, params, prover, trials, seed.wrapping_add(idx as u64))?;
        let acceptance = records.iter().filter(|r| r.accepted).count() as f64 / trials as f64;
        let distance = if acceptance >= 0.5 {
            Some(slot_trace_distance(inst, prover)?)
        } else {
            None
        };
        entries.push(SoundnessEntry {
            label: prover.label.clone(),
            round_probability: accept_probability(inst, prover)?,
            acceptance,
            distance,
        });
    }
    let max_distance = entries
        .iter()
        .filter_map(|e| e.distance)
        .fold(0.0, f64::max);
    Ok(SoundnessReport {
        entries,
        max_distance,
        limit: 1.0 / params.r as f64,
    })
}

/// `rho = diag(.4, .3, .2, .1)` and `sigma = diag(.4, .6, 0, 0)` purified on two qubits.
/// Both the spectral gap and the obliqueness equal one.
pub fn reference_instance() -> Result<UhlmannInstance<f64>> {
    let c = M::from_real_diag(&[0.4f64.sqrt(), 0.3f64.sqrt(), 0.2f64.sqrt(), 0.1f64.sqrt()]);
    let d = M::from_real_diag(&[0.4f64.sqrt(), 0.6f64.sqrt(), 0.0, 0.0]);
    UhlmannInstance::new(BipartitePureState::new(c)?, BipartitePureState::new(d)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::build_eta_family;

    #[test]
    fn reference_params() {
        let inst = reference_instance().unwrap();
        let p = ProtocolParams::for_instance(&inst, 2, 2, None).unwrap();
        assert!((p.eta - 1.0).abs() < 1e-9 && (p.kappa - 1.0).abs() < 1e-9);
        assert_eq!(p.m, 64);
        let f = 0.16f64.sqrt() + 0.18f64.sqrt();
        assert!((p.gamma - f * f).abs() < 1e-10);
    }

    #[test]
    fn honest_probability_matches_full_vector_born_rule() {
        let mut rng = seeded_rng(71, 0);
        let c = BipartitePureState::random(3, 4, 3, &mut rng);
        let d = BipartitePureState::random(3, 4, 2, &mut rng);
        let inst = UhlmannInstance::new(c, d).unwrap();
        let honest = ProverStrategy::honest(&inst).unwrap();
        let big = M::identity(3).kron(&honest.channel);
        let moved = big.apply(&inst.c.to_vector());
        let amp: C<f64> = inst
            .d
            .to_vector()
            .iter()
            .zip(&moved)
            .map(|(x, y)| x.conj() * y)
            .sum();
        let p = accept_probability(&inst, &honest).unwrap();
        assert!((p - amp.norm_sqr()).abs() < 1e-12);
        let f = inst.fidelity().unwrap();
        assert!((p - f * f).abs() < 1e-9);
    }

    #[test]
    fn identity_prover_on_equal_states_always_passes() {
        let mut rng = seeded_rng(72, 0);
        let c = BipartitePureState::random(2, 2, 2, &mut rng);
        let inst = UhlmannInstance::new(c.clone(), c).unwrap();
        let id = ProverStrategy::unitary("id", M::identity(2)).unwrap();
        assert!((accept_probability(&inst, &id).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ancilla_prover_splits_probability_over_kraus_blocks() {
        let inst = reference_instance().unwrap();
        let honest = ProverStrategy::honest(&inst).unwrap();
        // Honest unitary with an idle qubit ancilla.
        let u = honest.channel.kron(&M::identity(2));
        let p = ProverStrategy::with_ancilla("anc", u, 2).unwrap();
        let a = accept_probability(&inst, &p).unwrap();
        assert!((a - accept_probability(&inst, &honest).unwrap()).abs() < 1e-12);
        assert!(slot_trace_distance(&inst, &p).unwrap() < 1e-8);
    }

    #[test]
    fn empirical_rate_tracks_born_probability() {
        let fam = build_eta_family(4, 0.4, 0.5).unwrap();
        let adv = ProverStrategy::unitary("adv", fam.adversary_r.clone()).unwrap();
        let p = accept_probability(&fam.instance, &adv).unwrap();
        let mut rng = seeded_rng(73, 0);
        let n = 10_000;
        let hits = (0..n).filter(|_| rng.random::<f64>() < p).count();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() <= 3.0 * se);
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = reference_instance().unwrap();
        let params = ProtocolParams::for_instance(&inst, 2, 2, None).unwrap();
        let h = ProverStrategy::honest(&inst).unwrap();
        let a = run_protocol(&inst, &params, &h, &inst.c, 5).unwrap();
        let b = run_protocol(&inst, &params, &h, &inst.c, 5).unwrap();
        assert_eq!((a.j, a.i_star, a.accepted), (b.j, b.i_star, b.accepted));
        assert!(a.j < params.m);
        assert!((a.output_state_fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn completeness_small_grid() {
        let inst = reference_instance().unwrap();
        for r in [2, 3] {
            let params = ProtocolParams::for_instance(&inst, 2, r, None).unwrap();
            let rep = completeness_experiment(&inst, &params, 400, 9).unwrap();
            assert!(rep.meets_band, "{:?}", rep);
        }
    }

    #[test]
    fn non_positive_threshold_always_accepts() {
        let inst = reference_instance().unwrap();
        let params = ProtocolParams::new(2, 1, 0.2, 1.0, 1.0).unwrap();
        assert!(params.threshold <= 0.0);
        let rep = completeness_experiment(&inst, &params, 50, 1).unwrap();
        assert_eq!(rep.accepted, 50);
    }

    #[test]
    fn soundness_honest_and_far_provers() {
        let inst = reference_instance().unwrap();
        let params = ProtocolParams::for_instance(&inst, 2, 2, None).unwrap();
        let provers = vec![
            ProverStrategy::honest(&inst).unwrap(),
            ProverStrategy::near_optimal(&inst, 0.01, 3).unwrap(),
            ProverStrategy::derangement(4).unwrap(),
        ];
        let rep = soundness_probe(&inst, &params, &provers, 300, 4).unwrap();
        assert!(rep.entries[0].distance.unwrap() < 1e-8);
        assert!(rep.entries[1].distance.unwrap() <= rep.limit + 0.05);
        assert!(rep.entries[2].acceptance < 0.5);
    }

    #[test]
    fn wrong_qubit_count_is_rejected() {
        let inst = reference_instance().unwrap();
        assert!(matches!(
            ProtocolParams::for_instance(&inst, 3, 2, None),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
