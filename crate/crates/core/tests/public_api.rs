use proptest::prelude::*;
use uhlmann_core::certificate::dual_bound;
use uhlmann_core::formats::{matrix_from_json, matrix_to_json, state_from_json, state_to_json};
use uhlmann_core::random::{random_coeffs, random_unitary, seeded_rng};
use uhlmann_core::states::overlap;
use uhlmann_core::uhlmann::{
    canonical_w, obliqueness_kappa, rigidity_residual, spectral_gap_eta, UhlmannInstance,
};
use uhlmann_core::{CMatrix, CMatrix32, Error, State, State32};

fn random_instance(seed: u64, da: usize, db: usize) -> UhlmannInstance<f64> {
    let mut rng = seeded_rng(seed, 0);
    let c = State::new(random_coeffs(da, db, db, &mut rng)).unwrap();
    let d = State::new(random_coeffs(da, db, db, &mut rng)).unwrap();
    UhlmannInstance::new(c, d).unwrap()
}

#[test]
fn state_json_round_trip_is_exact() {
    let mut rng = seeded_rng(7, 1);
    let s = State::new(random_coeffs(3, 2, 2, &mut rng)).unwrap();
    let back = state_from_json(&state_to_json(&s)).unwrap();
    assert_eq!(back.coeffs(), s.coeffs());

    let m = random_unitary(4, &mut rng);
    let back = matrix_from_json(&matrix_to_json(&m)).unwrap();
    assert_eq!(back, m);
}

#[test]
fn malformed_state_file_is_rejected() {
    let err = state_from_json(r#"{"rows":2,"cols":2,"data":[[1,0]]}"#).unwrap_err();
    assert!(matches!(err, Error::InvalidFormat(_)), "{err:?}");
}

#[test]
fn f32_alias_tracks_f64() {
    let inst = random_instance(99, 3, 3);
    let c32 = State32::new(inst.c.coeffs().cast::<f32>()).unwrap();
    let d32 = State32::new(inst.d.coeffs().cast::<f32>()).unwrap();
    let inst32 = UhlmannInstance::new(c32, d32).unwrap();
    let f64_f = inst.fidelity().unwrap();
    let f32_f = inst32.fidelity().unwrap() as f64;
    assert!((f64_f - f32_f).abs() < 1e-4, "{f64_f} vs {f32_f}");
    let w32: CMatrix32 = canonical_w(&inst32, inst32.rank_tol()).unwrap();
    let w: CMatrix = canonical_w(&inst, inst.rank_tol()).unwrap();
    assert!((w32.cast::<f64>() - w).frobenius_norm() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Any unitary with overlap deficit eps has residual at most the dual bound at eps.
    #[test]
    fn residual_never_exceeds_bound(seed in 0u64..10_000, d in 1usize..5) {
        let inst = random_instance(seed, d, d);
        let tol = inst.rank_tol();
        let w = canonical_w(&inst, tol).unwrap();
        let r = random_unitary(d, &mut seeded_rng(seed, 2));
        let f = inst.fidelity().unwrap();
        let eps = (f - overlap(&inst.d, &r, &inst.c).unwrap().re).max(0.0);
        let residual = rigidity_residual(&inst, &w, &r).unwrap();
        let bound = dual_bound(&inst, eps).unwrap();
        prop_assert!(residual <= bound + 1e-9, "residual {} > bound {}", residual, bound);
    }

    #[test]
    fn eta_and_kappa_are_ordered(seed in 0u64..10_000, d in 1usize..5) {
        let inst = random_instance(seed, d + 1, d);
        let tol = inst.rank_tol();
        let eta = spectral_gap_eta(&inst, tol).unwrap();
        let kappa = obliqueness_kappa(&inst, tol).unwrap();
        prop_assert!(eta > 0.0 && eta <= 1.0 + 1e-9);
        prop_assert!(kappa >= 1.0 - 1e-9);
    }
}
