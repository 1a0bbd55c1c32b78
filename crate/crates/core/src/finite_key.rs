//! Composable finite-size key length and the asymptotic key rate.
//!
//! ```text
//! l = n [log2(1/c(delta)) - log2 gamma(d0 + mu)] - leak_EC - log2(1/(eps_s^2 eps_c))
//! ```

use std::fmt;

use crate::budget::SecurityBudget;
use crate::channel::ChannelScenario;
use crate::entropy::{
    c_delta, discrete_entropy_approx, distance_stats, log2_gamma, mu_correction,
    mutual_information, AdcSpec, DistanceStats,
};
use crate::error::{check_range, Error, Result};
use crate::gaussian::equivalent_cm;

/// Which party's data the error correction reconciles towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Bob corrects towards Alice; leakage uses Alice's entropy.
    Direct,
    /// Alice corrects towards Bob; leakage uses Bob's entropy.
    Reverse,
}

impl Direction {
    pub fn tag(&self) -> &'static str {
        match self {
            Direction::Direct => "DR",
            Direction::Reverse => "RR",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Reconciliation direction and efficiency `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconciliation {
    pub direction: Direction,
    pub beta: f64,
}

impl Reconciliation {
    pub fn new(direction: Direction, beta: f64) -> Result<Self> {
        check_range("beta", beta, "(0, 1]", beta > 0.0 && beta <= 1.0)?;
        Ok(Reconciliation { direction, beta })
    }

    pub fn direct(beta: f64) -> Result<Self> {
        Self::new(Direction::Direct, beta)
    }

    pub fn reverse(beta: f64) -> Result<Self> {
        Self::new(Direction::Reverse, beta)
    }
}

/// How the parameter-estimation threshold `d0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum D0Policy {
    /// `d0 = E[d]`.
    AnalyticExpectation,
    /// `d0 = E[d] + z sigma_d / sqrt(k_pe)`, a margin that an honest run exceeds only
    /// with small probability. Reduces to `E[d]` in the asymptotic limit.
    AnalyticPlusMargin(f64),
    /// A fixed threshold in index units.
    Fixed(f64),
    /// `d0 = f E[d]`, for sensitivity sweeps.
    Scaled(f64),
}

impl Default for D0Policy {
    fn default() -> Self {
        D0Policy::AnalyticPlusMargin(3.0)
    }
}

impl D0Policy {
    fn validate(&self) -> Result<()> {
        match *self {
            D0Policy::AnalyticExpectation => Ok(()),
            D0Policy::AnalyticPlusMargin(z) => check_range("z", z, "[0, inf)", z >= 0.0 && z.is_finite()),
            D0Policy::Fixed(v) => check_range("d0", v, "[0, inf)", v >= 0.0 && v.is_finite()),
            D0Policy::Scaled(f) => check_range("d0 scale", f, "[0, inf)", f >= 0.0 && f.is_finite()),
        }
    }

    /// Threshold for a finite run with `k_pe` test symbols.
    pub fn resolve(&self, stats: &DistanceStats, k_pe: u64) -> f64 {
        match *self {
            D0Policy::AnalyticExpectation => stats.mean,
            D0Policy::AnalyticPlusMargin(z) => stats.mean + z * stats.std_dev / (k_pe as f64).sqrt(),
            D0Policy::Fixed(v) => v,
            D0Policy::Scaled(f) => f * stats.mean,
        }
    }

    /// Threshold in the asymptotic limit (`k_pe -> inf`).
    pub fn resolve_asymptotic(&self, stats: &DistanceStats) -> f64 {
        match *self {
            D0Policy::AnalyticExpectation | D0Policy::AnalyticPlusMargin(_) => stats.mean,
            D0Policy::Fixed(v) => v,
            D0Policy::Scaled(f) => f * stats.mean,
        }
    }
}

impl fmt::Display for D0Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            D0Policy::AnalyticExpectation => write!(f, "expectation"),
            D0Policy::AnalyticPlusMargin(z) => write!(f, "margin:{z}"),
            D0Policy::Fixed(v) => write!(f, "fixed:{v}"),
            D0Policy::Scaled(s) => write!(f, "scaled:{s}"),
        }
    }
}

impl std::str::FromStr for D0Policy {
    type Err = Error;

    /// Parses `expectation`, `margin[:z]`, `fixed:v` or `scaled:f`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Degenerate(format!(
            "unknown d0 policy '{s}' (expected expectation, margin[:z], fixed:<d0> or scaled:<factor>)"
        ));
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())
        };
        let policy = match head {
            "expectation" => {
                if arg.is_some() {
                    return Err(bad());
                }
                D0Policy::AnalyticExpectation
            }
            "margin" => D0Policy::AnalyticPlusMargin(if arg.is_some() { num(arg)? } else { 3.0 }),
            "fixed" => D0Policy::Fixed(num(arg)?),
            "scaled" => D0Policy::Scaled(num(arg)?),
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Block bookkeeping: `N` sifted symbols split into `k_pe` test, `k_check` hash-check and
/// `n = N - k_pe - k_check` key symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeParams {
    pub n_total: u64,
    pub k_pe: u64,
    pub k_check: u64,
    pub d0_policy: D0Policy,
}

impl FiniteSizeParams {
    pub fn new(n_total: u64, k_pe: u64, k_check: u64, d0_policy: D0Policy) -> Result<Self> {
        let p = FiniteSizeParams {
            n_total,
            k_pe,
            k_check,
            d0_policy,
        };
        p.validate()?;
        Ok(p)
    }

    /// `k_pe = round(ratio * N)`, the default ratio being one tenth.
    pub fn with_ratio(n_total: u64, k_pe_ratio: f64, k_check: u64, d0_policy: D0Policy) -> Result<Self> {
        check_range("k_pe ratio", k_pe_ratio, "(0, 1)", k_pe_ratio > 0.0 && k_pe_ratio < 1.0)?;
        let k_pe = ((n_total as f64) * k_pe_ratio).round() as u64;
        Self::new(n_total, k_pe.max(1), k_check, d0_policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_pe == 0 {
            return Err(Error::Degenerate("k_pe must be at least 1".into()));
        }
        let used = self.k_pe.checked_add(self.k_check);
        match used {
            Some(u) if u < self.n_total => {}
            _ => {
                return Err(Error::Degenerate(format!(
                    "no key symbols left: N = {}, k_pe = {}, k_check = {}",
                    self.n_total, self.k_pe, self.k_check
                )))
            }
        }
        self.d0_policy.validate()
    }

    /// Number of key symbols `n`.
    pub fn n(&self) -> u64 {
        self.n_total - self.k_pe - self.k_check
    }
}

/// Full breakdown of a finite-size key length evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    /// Extractable key length in bits (0 when aborted).
    pub ell: f64,
    /// The key-length expression before clipping at zero.
    pub ell_raw: f64,
    /// `ell / N`.
    pub rate_per_sifted: f64,
    /// `ell / (2N)`.
    pub rate_per_pulse: f64,
    /// `n log2(1/c(delta))`.
    pub term_hmin: f64,
    /// `n log2 gamma(d0 + mu)`.
    pub term_hmax: f64,
    /// Error-correction leakage `leak_EC`.
    pub term_leak: f64,
    /// `log2(1/(eps_s^2 eps_c))`.
    pub term_eps: f64,
    pub mu: f64,
    pub d0: f64,
    pub aborted: bool,
    pub n_total: u64,
    pub n: u64,
    pub k_pe: u64,
    pub channel: ChannelSummary,
    pub p_alpha: f64,
    pub eps_prime: f64,
}

/// Equivalent channel and entropies feeding a key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSummary {
    pub t: f64,
    pub e: f64,
    pub g: f64,
    pub c_e: f64,
    /// Bob's displaced-mode variance `T(V_A - 1) + 1 + T e`.
    pub v_b_prime: f64,
    pub h_a: f64,
    pub h_b: f64,
    pub mutual_information: f64,
    pub distance: DistanceStats,
}

/// Asymptotic key rate with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticReport {
    /// Bits per key symbol.
    pub rate: f64,
    pub d0: f64,
    /// `log2(1/c(delta))`.
    pub hmin: f64,
    /// `log2 gamma(d0)`.
    pub hmax: f64,
    /// Per-symbol leakage `H - beta I`.
    pub leak: f64,
    pub channel: ChannelSummary,
}

/// Direct-reconciliation leakage `n (H_A - beta I)`.
pub fn leakage_dr(h_a: f64, i: f64, beta: f64, n: u64) -> Result<f64> {
    leakage(h_a, i, beta, n)
}

/// Reverse-reconciliation leakage `n (H_B - beta I)`.
pub fn leakage_rr(h_b: f64, i: f64, beta: f64, n: u64) -> Result<f64> {
    leakage(h_b, i, beta, n)
}

fn leakage(h: f64, i: f64, beta: f64, n: u64) -> Result<f64> {
    check_range("beta", beta, "(0, 1]", beta > 0.0 && beta <= 1.0)?;
    check_range("I", i, "[0, inf)", i >= 0.0)?;
    if !(h >= i) {
        return Err(Error::Degenerate(format!(
            "discretized entropy {h} is below the mutual information {i}"
        )));
    }
    Ok(n as f64 * (h - beta * i))
}

fn summarize(scenario: &ChannelScenario, adc: &AdcSpec) -> Result<ChannelSummary> {
    let ch = scenario.equivalent_channel()?;
    let cm = equivalent_cm(scenario.v_a, ch.t, ch.e)?;
    let distance = distance_stats(&cm, adc)?;
    let v_b_prime = cm.get(2, 2);
    let delta = adc.delta();
    Ok(ChannelSummary {
        t: ch.t,
        e: ch.e,
        g: ch.g,
        c_e: ch.c_e,
        v_b_prime,
        h_a: discrete_entropy_approx(scenario.v_a, delta)?,
        h_b: discrete_entropy_approx(v_b_prime, delta)?,
        mutual_information: mutual_information(scenario.v_a, ch.t, ch.e)?,
        distance,
    })
}

fn leak_per_symbol(ch: &ChannelSummary, rec: &Reconciliation) -> Result<f64> {
    match rec.direction {
        Direction::Direct => leakage_dr(ch.h_a, ch.mutual_information, rec.beta, 1),
        Direction::Reverse => leakage_rr(ch.h_b, ch.mutual_information, rec.beta, 1),
    }
}

/// Composable finite-size key length.
///
/// An infeasible budget (`eps' <= 0`) is an error; a non-positive key length is reported
/// as `aborted` with `ell = 0`.
pub fn key_length(
    scenario: &ChannelScenario,
    adc: &AdcSpec,
    budget: &SecurityBudget,
    fsp: &FiniteSizeParams,
    rec: &Reconciliation,
) -> Result<KeyRateReport> {
    budget.validate()?;
    fsp.validate()?;
    let ch = summarize(scenario, adc)?;
    let n = fsp.n();
    let p_alpha = budget.p_alpha(adc, ch.v_b_prime)?;
    let eps_prime = budget.eps_prime(p_alpha, n)?;
    let mu = mu_correction(adc, fsp.n_total, fsp.k_pe, n, eps_prime)?;
    let d0 = fsp.d0_policy.resolve(&ch.distance, fsp.k_pe);

    let nf = n as f64;
    let term_hmin = -nf * c_delta(adc.delta())?.log2();
    let term_hmax = nf * log2_gamma(d0 + mu)?;
    let term_leak = nf * leak_per_symbol(&ch, rec)?;
    let term_eps = budget.log_penalty();
    let ell_raw = term_hmin - term_hmax - term_leak - term_eps;
    let aborted = !(ell_raw > 0.0);
    let ell = if aborted { 0.0 } else { ell_raw };
    let total = fsp.n_total as f64;

    Ok(KeyRateReport {
        ell,
        ell_raw,
        rate_per_sifted: ell / total,
        rate_per_pulse: ell / (2.0 * total),
        term_hmin,
        term_hmax,
        term_leak,
        term_eps,
        mu,
        d0,
        aborted,
        n_total: fsp.n_total,
        n,
        k_pe: fsp.k_pe,
        channel: ch,
        p_alpha,
        eps_prime,
    })
}

/// Asymptotic key rate per key symbol, `log2(1/c) - log2 gamma(E[d]) - (H - beta I)`.
pub fn asymptotic_rate(
    scenario: &ChannelScenario,
    adc: &AdcSpec,
    budget: &SecurityBudget,
    rec: &Reconciliation,
) -> Result<f64> {
    Ok(asymptotic_report(scenario, adc, budget, rec, &D0Policy::AnalyticExpectation)?.rate)
}

/// Asymptotic key rate with an explicit threshold policy and full breakdown.
///
/// The finite-size security terms vanish in this limit, so the budget is only validated.
pub fn asymptotic_report(
    scenario: &ChannelScenario,
    adc: &AdcSpec,
    budget: &SecurityBudget,
    rec: &Reconciliation,
    d0_policy: &D0Policy,
) -> Result<AsymptoticReport> {
    budget.validate()?;
    d0_policy.validate()?;
    let ch = summarize(scenario, adc)?;
    let d0 = d0_policy.resolve_asymptotic(&ch.distance);
    let hmin = -c_delta(adc.delta())?.log2();
    let hmax = log2_gamma(d0)?;
    let leak = leak_per_symbol(&ch, rec)?;
    Ok(AsymptoticReport {
        rate: hmin - hmax - leak,
        d0,
        hmin,
        hmax,
        leak,
        channel: ch,
    })
}
