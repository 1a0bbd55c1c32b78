//! Composable finite-size secret-key rates for squeezed-state continuous-variable
//! measurement-device-independent QKD.
//!
//! The pipeline runs from the physical scenario to a key length:
//!
//! 1. [`ChannelScenario`] holds both channel legs, the modulation variances, the attack
//!    model and the displacement-gain policy, and maps them to an
//!    [`EquivalentChannel`] `(T, e)`.
//! 2. [`gaussian`] builds the covariance matrices, either in closed form or by composing
//!    symplectic operations and conditioning on the relay outcomes.
//! 3. [`entropy`] provides the ADC geometry, the uncertainty-relation constants and the
//!    discretized entropies.
//! 4. [`key_length`] assembles the composable key length with a full term breakdown;
//!    [`asymptotic_rate`] gives the infinite-block limit.
//! 5. [`mc`] is a Monte Carlo oracle for the analytic quantities, and [`bounds`] holds the
//!    repeaterless capacity used as a sanity ceiling.
//!
//! All quantities are in shot-noise units; entropies and key lengths are in bits;
//! distances are in ADC index units.

// Negated comparisons such as `!(x > 0.0)` are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod budget;
pub mod channel;
pub mod entropy;
pub mod error;
pub mod finite_key;
pub mod gaussian;
pub mod mc;

pub use bounds::{compare_to_bound, plob_bound, plob_bound_db, DominanceReport, Normalization, RateCurve, RatePoint};
pub use budget::{compose_security, SecurityBudget, TailModel};
pub use channel::{
    correlated_e, equivalent_e_general, equivalent_e_optimal, equivalent_t, loss_db_to_transmittance,
    optimal_gain, Attack, ChannelScenario, CommonVariance, CorrelatedNoise, EquivalentChannel, EveModel,
    GainPolicy,
};
pub use entropy::{
    c_delta, discrete_entropy_approx, discrete_entropy_exact, distance_stats, eps_prime, expected_distance,
    gamma_fn, log2_gamma, mu_correction, mutual_information, p_alpha_gaussian, AdcSpec, DistanceStats,
};
pub use error::{Error, Result};
pub use finite_key::{
    asymptotic_rate, asymptotic_report, key_length, leakage_dr, leakage_rr, AsymptoticReport, ChannelSummary,
    D0Policy, Direction, FiniteSizeParams, KeyRateReport, Reconciliation,
};
pub use gaussian::{
    beamsplitter_op, build_pre_measurement_state, compose_pre_measurement_state, equivalent_cm,
    relay_and_displace, tmsv, CovarianceMatrix, SymplecticOp,
};
pub use mc::{
    discretize, empirical_distance, empirical_entropy, estimate_rescale, sample_correlated, Quadrature,
    SampleBatch,
};
