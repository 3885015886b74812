use std::f64::consts::LN_2;

use approx::assert_relative_eq;
use spinlabor::montecarlo::StopRule;
use spinlabor::{
    bound_a, bound_b, jarzynski_lhs, jarzynski_rhs, ledger_check, mean_spinlabor, pmf_after_m_cycles,
    pmf_full_erasure, simulate_ensemble, simulate_ensemble_with, simulate_trajectory, variance_spinlabor,
    violation_curve, ErasureParams, ErasureParamsF32,
};

#[test]
fn simulation_tracks_exact_distribution() {
    for (g, p) in [(LN_2, 0.5), (0.4, 0.3), (1.5, 1.0)] {
        let params = ErasureParams::from_gamma(g, p).unwrap();
        let n = 200_000u64;
        let summary = simulate_ensemble(&params, n, 99).unwrap();
        let exact = pmf_after_m_cycles(&params, summary.cycles).unwrap();
        for q in 0..summary.counts.len().max(exact.probs().len()) {
            let pq = exact.prob(q);
            let sd = (n as f64 * pq * (1.0 - pq)).sqrt().max(1.0);
            let dev = (summary.counts.get(q).copied().unwrap_or(0) as f64 - n as f64 * pq).abs();
            assert!(dev < 5.0 * sd, "g={g} p={p} q={q}: deviation {dev} vs sd {sd}");
        }
        assert_eq!(summary.unbalanced_ledgers, 0);
        assert!(ledger_check(&summary).passed);
    }
}

#[test]
fn simulated_exp_average_satisfies_equality() {
    let params = ErasureParams::from_gamma(0.5, 0.5).unwrap();
    let summary = simulate_ensemble(&params, 200_000, 5).unwrap();
    let est = summary.exp_average();
    assert!(est.z_score(jarzynski_rhs(0.5)) < 5.0, "{est:?}");
}

#[test]
fn full_erasure_moments_match_series() {
    for g in [0.05, 0.2, LN_2, 2.0] {
        let params = ErasureParams::from_gamma(g, 0.5).unwrap();
        let pmf = pmf_full_erasure(&params).unwrap();
        assert_relative_eq!(pmf.mean(), mean_spinlabor(&params).unwrap(), max_relative = 1e-11);
        assert_relative_eq!(pmf.variance(), variance_spinlabor(&params).unwrap(), max_relative = 1e-10);
        assert!((jarzynski_lhs(&pmf).unwrap() - jarzynski_rhs(g)).abs() < 1e-12);
    }
}

#[test]
fn single_precision_agrees_with_double() {
    for g in [0.3f32, std::f32::consts::LN_2, 1.5] {
        let p32 = pmf_full_erasure(&ErasureParamsF32::from_gamma(g, 0.5).unwrap()).unwrap();
        let p64 = pmf_full_erasure(&ErasureParams::from_gamma(g as f64, 0.5).unwrap()).unwrap();
        for q in 0..p32.probs().len().min(p64.probs().len()) {
            assert!((p32.prob(q) as f64 - p64.prob(q)).abs() < 1e-5, "g={g} q={q}");
        }
        assert!((jarzynski_lhs(&p32).unwrap() as f64 - jarzynski_rhs(g as f64)).abs() < 1e-5);
    }
}

#[test]
fn bounds_tighten_in_order() {
    for g in [0.1, LN_2 / 3.0, 1.0, 2.5] {
        let params = ErasureParams::from_gamma(g, 0.5).unwrap();
        let pmf = pmf_full_erasure(&params).unwrap();
        assert!(bound_b(&pmf).unwrap() <= bound_a(g).unwrap());
        violation_curve(&params, 10.0, 0.05).unwrap().validate().unwrap();
    }
}

#[test]
fn trajectory_replay_matches_ensemble_counts() {
    let params = ErasureParams::from_gamma(0.8, 0.5).unwrap();
    let stop = StopRule::MaxCycles(25);
    let summary = simulate_ensemble_with(&params, 64, 1234, stop).unwrap();
    let mut counts = vec![0u64; summary.counts.len()];
    for i in 0..64 {
        let seed = spinlabor::montecarlo::substream_seed(1234, i);
        let rec = simulate_trajectory(&params, seed, stop).unwrap();
        assert!(rec.ledger.is_balanced());
        counts[rec.spinlabor_quanta() as usize] += 1;
    }
    assert_eq!(counts, summary.counts);
}
