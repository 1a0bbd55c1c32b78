//! Structural properties of the key length and its ingredients.

use cvmdi_core::{
    asymptotic_rate, gamma_fn, key_length, loss_db_to_transmittance, mutual_information, AdcSpec,
    ChannelScenario, D0Policy, FiniteSizeParams, Reconciliation, SecurityBudget, TailModel,
};
use proptest::prelude::*;

fn adc() -> AdcSpec {
    AdcSpec::new(52.0, 13).unwrap()
}

fn trusted() -> SecurityBudget {
    SecurityBudget::default().with_tail(TailModel::Trusted)
}

fn scenario(loss_db: f64, eps1: f64, eps2: f64, v: f64) -> ChannelScenario {
    let t1 = loss_db_to_transmittance(loss_db).unwrap();
    ChannelScenario::new(t1, 1.0, eps1, eps2, v, v).unwrap()
}

fn fsp(n_total: u64) -> FiniteSizeParams {
    FiniteSizeParams::with_ratio(n_total, 0.1, 0, D0Policy::default()).unwrap()
}

fn ell(s: &ChannelScenario, n_total: u64, rec: &Reconciliation) -> f64 {
    key_length(s, &adc(), &trusted(), &fsp(n_total), rec).unwrap().ell
}

fn reconciliations() -> Vec<Reconciliation> {
    vec![
        Reconciliation::direct(1.0).unwrap(),
        Reconciliation::reverse(1.0).unwrap(),
        Reconciliation::direct(0.969).unwrap(),
        Reconciliation::reverse(0.969).unwrap(),
    ]
}

#[test]
fn key_length_grows_with_block_size() {
    for rec in reconciliations() {
        for loss in [0.2, 1.0, 2.0, 4.0, 6.0] {
            let s = scenario(loss, 0.002, 0.002, 1e5);
            let ells: Vec<f64> = (7..=13).map(|p| ell(&s, 10u64.pow(p), &rec)).collect();
            for w in ells.windows(2) {
                assert!(w[1] >= w[0], "{rec:?} at {loss} dB: {ells:?}");
            }
        }
    }
}

#[test]
fn key_length_falls_with_loss() {
    for rec in reconciliations() {
        let ells: Vec<f64> = (0..=40)
            .map(|k| ell(&scenario(k as f64 * 0.2, 0.002, 0.002, 1e5), 1_000_000_000_000, &rec))
            .collect();
        for w in ells.windows(2) {
            assert!(w[1] <= w[0], "{rec:?}: {ells:?}");
        }
    }
}

#[test]
fn key_length_falls_with_excess_noise() {
    for rec in reconciliations() {
        let grid = [0.0, 0.001, 0.002, 0.005, 0.01, 0.02];
        for &loss in &[0.5, 1.5] {
            let by_eps1: Vec<f64> = grid.iter().map(|&e| ell(&scenario(loss, e, 0.002, 1e5), 1u64 << 40, &rec)).collect();
            let by_eps2: Vec<f64> = grid.iter().map(|&e| ell(&scenario(loss, 0.002, e, 1e5), 1u64 << 40, &rec)).collect();
            for w in by_eps1.windows(2).chain(by_eps2.windows(2)) {
                assert!(w[1] <= w[0], "{rec:?}");
            }
        }
    }
}

#[test]
fn key_length_grows_with_efficiency() {
    let s = scenario(0.5, 0.002, 0.002, 1e5);
    for direction in [cvmdi_core::Direction::Direct, cvmdi_core::Direction::Reverse] {
        let ells: Vec<f64> = [0.9, 0.95, 0.969, 0.99, 1.0]
            .iter()
            .map(|&b| ell(&s, 1_000_000_000_000, &Reconciliation::new(direction, b).unwrap()))
            .collect();
        for w in ells.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}

#[test]
fn reverse_reconciliation_dominates_when_bob_variance_is_smaller() {
    for v in [5.04, 1e3, 1e5] {
        for k in 0..=30 {
            let s = scenario(k as f64 * 0.25, 0.002, 0.002, v);
            for beta in [0.969, 1.0] {
                let dr = ell(&s, 1_000_000_000_000, &Reconciliation::direct(beta).unwrap());
                let rr = ell(&s, 1_000_000_000_000, &Reconciliation::reverse(beta).unwrap());
                assert!(rr >= dr, "V = {v}, loss = {}", k as f64 * 0.25);
            }
        }
    }
}

#[test]
fn finite_size_ordering_holds_at_every_loss() {
    for rec in reconciliations() {
        for k in 0..=28 {
            let s = scenario(k as f64 * 0.25, 0.002, 0.002, 1e5);
            let r_inf = asymptotic_rate(&s, &adc(), &trusted(), &rec).unwrap();
            let reports: Vec<_> = [10_000_000_000u64, 100_000_000_000, 1_000_000_000_000]
                .iter()
                .map(|&n| key_length(&s, &adc(), &trusted(), &fsp(n), &rec).unwrap())
                .collect();
            assert!(reports[0].ell <= reports[1].ell);
            assert!(reports[1].ell <= reports[2].ell);
            assert!(reports[2].ell <= reports[2].n as f64 * r_inf.max(0.0));
        }
    }
}

#[test]
fn gamma_is_increasing_and_continuous_at_zero() {
    let mut prev = gamma_fn(0.0).unwrap();
    assert_eq!(prev, 1.0);
    for k in 1..=100_000 {
        let g = gamma_fn(k as f64 * 1e-3).unwrap();
        assert!(g > prev, "t = {}", k as f64 * 1e-3);
        prev = g;
    }
    assert!(gamma_fn(1e-3).unwrap() - 1.0 < 0.01);
}

#[test]
fn mutual_information_grid() {
    for &t in &[0.05, 0.3, 0.7, 1.0] {
        let mut prev_v = f64::NEG_INFINITY;
        for v in [1.0, 1.5, 5.04, 50.0, 1e3, 1e5] {
            let mut prev_e = f64::INFINITY;
            for e in [0.0, 0.001, 0.01, 0.1, 1.0] {
                let i = mutual_information(v, t, e).unwrap();
                assert!(i <= prev_e);
                prev_e = i;
            }
            let i0 = mutual_information(v, t, 0.01).unwrap();
            assert!(i0 >= prev_v);
            prev_v = i0;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn report_terms_recombine(loss in 0.0f64..8.0, v in 1.5f64..1e5, beta in 0.9f64..=1.0, p in 6u32..13, rr in any::<bool>()) {
        let s = scenario(loss, 0.002, 0.002, v);
        let rec = if rr { Reconciliation::reverse(beta) } else { Reconciliation::direct(beta) }.unwrap();
        let r = key_length(&s, &adc(), &trusted(), &fsp(10u64.pow(p)), &rec).unwrap();
        let expr = r.term_hmin - r.term_hmax - r.term_leak - r.term_eps;
        prop_assert_eq!(r.ell_raw, expr);
        prop_assert_eq!(r.aborted, expr <= 0.0);
        if !r.aborted {
            prop_assert_eq!(r.ell, expr);
        } else {
            prop_assert_eq!(r.ell, 0.0);
        }
    }

    #[test]
    fn asymptotic_bounds_finite(loss in 0.0f64..8.0, v in 1.5f64..1e5, p in 6u32..13, rr in any::<bool>()) {
        let s = scenario(loss, 0.002, 0.002, v);
        let rec = if rr { Reconciliation::reverse(0.969) } else { Reconciliation::direct(0.969) }.unwrap();
        let r = key_length(&s, &adc(), &trusted(), &fsp(10u64.pow(p)), &rec).unwrap();
        let r_inf = asymptotic_rate(&s, &adc(), &trusted(), &rec).unwrap();
        prop_assert!(r.ell_raw / r.n as f64 <= r_inf);
    }
}
