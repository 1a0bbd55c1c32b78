//! The symplectic relay pipeline and the closed-form equivalent channel must agree.

use cvmdi_core::gaussian::{symplectic_form, PHYSICAL_TOL, SYMPLECTIC_TOL};
use cvmdi_core::{
    beamsplitter_op, build_pre_measurement_state, correlated_e, compose_pre_measurement_state, equivalent_cm,
    equivalent_e_general, equivalent_e_optimal, equivalent_t, optimal_gain, relay_and_displace, tmsv,
    Attack, ChannelScenario, GainPolicy,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const ROUTE_TOL: f64 = 1e-9;

/// `equivalent_cm` without its `T <= 1` guard, so that amplifying gains can be compared too.
fn closed_form(v_a: f64, t: f64, e: f64) -> DMatrix<f64> {
    let c = (t * (v_a * v_a - 1.0)).sqrt();
    let vb = t * (v_a - 1.0) + 1.0 + t * e;
    DMatrix::from_row_slice(4, 4, &[
        v_a, 0.0, c, 0.0, //
        0.0, v_a, 0.0, -c, //
        c, 0.0, vb, 0.0, //
        0.0, -c, 0.0, vb,
    ])
}

fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn scenario() -> impl Strategy<Value = ChannelScenario> {
    (0.05f64..=1.0, 0.05f64..=1.0, 0.0f64..=0.1, 0.0f64..=0.1, 1.0f64..=20.0, 1.0f64..=20.0)
        .prop_map(|(t1, t2, e1, e2, va, vb)| ChannelScenario::new(t1, t2, e1, e2, va, vb).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn relay_matches_equivalent_channel(s in scenario(), g in 0.5f64..=2.0) {
        let pre = build_pre_measurement_state(&s).unwrap();
        let out = relay_and_displace(&pre, g).unwrap();
        let t = equivalent_t(s.t1, g);
        let e = equivalent_e_general(&s, g);
        let expected = closed_form(s.v_a, t, e);
        prop_assert!(max_abs(out.matrix(), &expected) < ROUTE_TOL,
            "diff {:e}", max_abs(out.matrix(), &expected));
        if t <= 1.0 {
            prop_assert!(max_abs(out.matrix(), equivalent_cm(s.v_a, t, e).unwrap().matrix()) < ROUTE_TOL);
        }
    }

    #[test]
    fn closed_form_state_matches_composition(s in scenario()) {
        let a = build_pre_measurement_state(&s).unwrap();
        let b = compose_pre_measurement_state(&s).unwrap();
        prop_assert!(a.max_abs_diff(&b) < ROUTE_TOL, "diff {:e}", a.max_abs_diff(&b));
        prop_assert!(a.min_uncertainty_eigenvalue() >= -PHYSICAL_TOL);
    }

    #[test]
    fn optimal_gain_closes_general_formula(s in scenario()) {
        prop_assume!(s.v_b > 1.0);
        let g = optimal_gain(s.v_b, s.t2).unwrap();
        let diff = equivalent_e_general(&s, g) - equivalent_e_optimal(&s);
        prop_assert!(diff.abs() < 1e-12 * equivalent_e_optimal(&s).max(1.0));
    }

    #[test]
    fn optimal_gain_minimizes_noise(s in scenario()) {
        prop_assume!(s.v_b > 1.0);
        let g0 = optimal_gain(s.v_b, s.t2).unwrap();
        let e0 = equivalent_e_general(&s, g0);
        for k in -50..=50 {
            let g = g0 * (1.0 + k as f64 * 0.004);
            prop_assert!(equivalent_e_general(&s, g) >= e0 - 1e-12);
        }
    }

    #[test]
    fn beamsplitters_are_symplectic(t in 0.0f64..=1.0, a in 0usize..4, b in 0usize..4) {
        prop_assume!(a != b);
        let op = beamsplitter_op(t, 4, (a, b)).unwrap();
        prop_assert!(op.symplectic_defect() < SYMPLECTIC_TOL);
        let omega = symplectic_form(4);
        let lhs = op.matrix() * &omega * op.matrix().transpose();
        prop_assert!(max_abs(&lhs, &omega) < SYMPLECTIC_TOL);
    }

    #[test]
    fn relay_output_is_physical(s in scenario(), g in 0.5f64..=2.0) {
        let out = relay_and_displace(&build_pre_measurement_state(&s).unwrap(), g).unwrap();
        prop_assert!(out.is_physical(), "min eig {:e}", out.min_uncertainty_eigenvalue());
    }

    #[test]
    fn equivalent_cm_is_monotone(va in 1.0f64..100.0, t in 0.01f64..=1.0, e in 0.0f64..1.0, de in 1e-6f64..1.0) {
        let base = equivalent_cm(va, t, e).unwrap().get(2, 2);
        prop_assert!(equivalent_cm(va, t, e + de).unwrap().get(2, 2) > base);
        prop_assert!(equivalent_cm(va + de, t, e).unwrap().get(2, 2) > base);
    }

    #[test]
    fn correlated_closed_form_matches_composition(
        t1 in 0.05f64..0.99, t2 in 0.05f64..0.99, eps in 0.0f64..=0.1, va in 1.0f64..=20.0, vb in 1.0f64..=20.0
    ) {
        let s = ChannelScenario::new(t1, t2, eps, eps, va, vb).unwrap().with_attack(Attack::CorrelatedMaximal);
        let a = build_pre_measurement_state(&s).unwrap();
        let b = compose_pre_measurement_state(&s).unwrap();
        prop_assert!(a.max_abs_diff(&b) < ROUTE_TOL * 100.0, "diff {:e}", a.max_abs_diff(&b));
    }

    #[test]
    fn correlated_relay_matches_correlated_noise(
        t1 in 0.05f64..0.99, t2 in 0.05f64..0.99, eps in 0.0f64..=0.1, va in 1.0f64..=20.0, vb in 1.5f64..=20.0
    ) {
        let s = ChannelScenario::new(t1, t2, eps, eps, va, vb).unwrap().with_attack(Attack::CorrelatedMaximal);
        // Optimal gain can give an amplifying equivalent channel (T > 1) here, which the
        // key-rate pipeline rejects, so the raw formulas are compared.
        let g = optimal_gain(s.v_b, s.t2).unwrap();
        let e_prime = correlated_e(&s, g).unwrap().e_prime;
        let out = relay_and_displace(&compose_pre_measurement_state(&s).unwrap(), g).unwrap();
        let expected = closed_form(s.v_a, equivalent_t(s.t1, g), e_prime);
        prop_assert!(max_abs(out.matrix(), &expected) < 1e-7 * expected.abs().max(),
            "diff {:e}", max_abs(out.matrix(), &expected));
    }
}

#[test]
fn lossless_vacuum_relay_leaves_conjugate_noise() {
    // With no modulation on Bob's side his displacement cannot cancel anything: the
    // relay adds two vacuum units, e = 2.
    let s = ChannelScenario::new(1.0, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap().with_gain(GainPolicy::Fixed(2f64.sqrt()));
    let out = relay_and_displace(&build_pre_measurement_state(&s).unwrap(), 2f64.sqrt()).unwrap();
    assert!(max_abs(out.matrix(), equivalent_cm(1.0, 1.0, 2.0).unwrap().matrix()) < 1e-12);
}

#[test]
fn relay_on_vacuum_and_tmsv_beamsplitter_preserves_physicality() {
    let vac = tmsv(1.0).unwrap();
    let state = vac.direct_sum(&tmsv(2.0).unwrap());
    let out = state.transform(&beamsplitter_op(0.5, 4, (1, 2)).unwrap()).unwrap();
    assert!(out.is_physical());
    assert!((out.get(2, 2) - 1.5).abs() < 1e-15);
}
