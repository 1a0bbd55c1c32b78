//! Shared fixtures for the pipeline benchmarks.

use cvmdi_cli::config::{BlockSize, LossAxis};
use cvmdi_cli::{figure_preset, SweepConfig};
use cvmdi_core::{
    loss_db_to_transmittance, AdcSpec, ChannelScenario, D0Policy, FiniteSizeParams, Reconciliation, SecurityBudget,
    TailModel,
};

/// Everything `key_length` needs for one evaluation.
pub struct KeyRateFixture {
    pub scenario: ChannelScenario,
    pub adc: AdcSpec,
    pub budget: SecurityBudget,
    pub finite: FiniteSizeParams,
    pub reconciliation: Reconciliation,
}

/// Ideal modulation, asymmetric relay, 1 dB, `N = 1e12`, direct reconciliation.
pub fn ideal_point() -> KeyRateFixture {
    let t1 = loss_db_to_transmittance(1.0).expect("valid loss");
    KeyRateFixture {
        scenario: ChannelScenario::new(t1, 1.0, 0.002, 0.002, 1e5, 1e5).expect("valid scenario"),
        adc: AdcSpec::new(52.0, 13).expect("valid ADC"),
        budget: SecurityBudget::default().with_tail(TailModel::Trusted),
        finite: FiniteSizeParams::with_ratio(1_000_000_000_000, 0.1, 0, D0Policy::default()).expect("valid block"),
        reconciliation: Reconciliation::direct(1.0).expect("valid beta"),
    }
}

/// The fig2 preset trimmed to `points` losses and a single finite block size.
pub fn small_sweep(points: usize) -> SweepConfig {
    let mut cfg = figure_preset("fig2").expect("built-in preset");
    cfg.axes.loss_db = LossAxis::List((0..points).map(|k| 0.05 * k as f64).collect());
    cfg.axes.block_sizes = vec![BlockSize::Finite(1_000_000_000_000)];
    cfg
}
