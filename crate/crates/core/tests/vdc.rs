mod common;

use common::{div, mul, Hp};
use num_complex::Complex64;
use smallcap_core::vdc::*;

/// `sum_{n = offset+1}^{offset+N} e(t log n / 2 pi)` at 256 bits.
fn reference_log_sum(t: f64, offset: u64, n: u64) -> Complex64 {
    let mut hp = Hp::new();
    let tt = hp.f(t);
    let two_pi = hp.two_pi();
    let phases: Vec<_> = (offset + 1..=offset + n)
        .map(|m| {
            let l = hp.ln(&hp.int(m as i64));
            div(&mul(&tt, &l), &two_pi)
        })
        .collect();
    hp.sum_e(phases)
}

#[test]
fn log_phase_sum_matches_reference() {
    let spec = PhaseSpec { f: PhaseFn::LogPhase { t: 1e6, offset: 0 }, n_terms: 10_000, k: 4, lambda_k: 1.0, a: 16.0 };
    let got = phase_sum(&spec).unwrap();
    let want = reference_log_sum(1e6, 0, 10_000);
    assert!((got - want).norm() <= 1e-6 * want.norm().max(1.0), "{got} vs {want}");
}

#[test]
fn extended_precision_phases_match_reference() {
    for (t, n) in [(1e10, 1000u64), (3.7e11, 500)] {
        let got = zeta_block_sum(t, n).unwrap();
        let want = reference_log_sum(t, n, n);
        assert!((got - want).norm() <= 1e-9 * n as f64, "t={t}: {got} vs {want}");
    }
}

#[test]
fn block_sum_equals_shifted_phase_sum() {
    for (t, n) in [(1e6, 100u64), (1e9, 3000), (2.5e7, 4096)] {
        let a = zeta_block_sum(t, n).unwrap();
        let b = phase_sum(&PhaseSpec::zeta_block(t, n)).unwrap();
        assert!((a - b).norm() <= 1e-12 * n as f64);
        assert!(a.norm() <= n as f64 + 1e-9);
    }
}

#[test]
fn documented_block_bound() {
    let (t, n) = (1e8, 1000u64);
    let s = zeta_block_sum(t, n).unwrap().norm();
    assert!(s <= 20.0 * (n as f64).powf(11.0 / 15.0) * t.powf(1.0 / 15.0));
}

#[test]
fn dyadic_scan_within_slack_of_the_new_bound() {
    let t: f64 = 1e6;
    let mut n = 128u64;
    while (n as f64) <= t.powf(5.0 / 12.0) {
        let spec = PhaseSpec::zeta_block(t, n);
        let s = zeta_block_sum(t, n).unwrap().norm();
        assert!(s <= 10.0 * new_fourth_bound(&spec, 0.0).unwrap(), "N={n}");
        n *= 2;
    }
}

#[test]
fn new_bound_improves_on_bdg_across_the_regime() {
    for i in 0..10 {
        let n = 2u64.pow(8 + i);
        for j in 0..10 {
            let varpi = 1.0 + j as f64 / 9.0;
            let lambda = (n as f64).powf(-varpi);
            let spec = PhaseSpec::bound_only(n, 4, lambda, 16.0);
            let new = new_fourth_bound(&spec, 0.0).unwrap();
            let bdg = bdg_bound(&spec, 0.0).unwrap();
            assert!(new <= bdg, "N={n} varpi={varpi}: {new} > {bdg}");
        }
    }
}

#[test]
fn block_certificates_hold() {
    for (t, n) in [(1e6, 200u64), (1e10, 10_000)] {
        assert!(PhaseSpec::zeta_block(t, n).certify().unwrap());
    }
}
