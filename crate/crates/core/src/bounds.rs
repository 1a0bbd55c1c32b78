//! The repeaterless (PLOB) secret-key capacity and rate-curve dominance checks.

use std::fmt;

use crate::channel::loss_db_to_transmittance;
use crate::error::{check_range, Error, Result};

/// How a rate is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Bits per key symbol (asymptotic rates).
    PerSymbol,
    /// `ell / N`.
    PerSifted,
    /// `ell / (2N)`.
    PerPulse,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::PerSymbol => "per_symbol",
            Normalization::PerSifted => "per_sifted",
            Normalization::PerPulse => "per_pulse",
        })
    }
}

/// One point of a rate-versus-loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub loss_db: f64,
    /// Non-negative rate; aborted points carry `0`.
    pub rate: f64,
    pub aborted: bool,
}

/// A rate curve over strictly increasing losses.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub label: String,
    pub normalization: Normalization,
    points: Vec<RatePoint>,
}

impl RateCurve {
    pub fn new(label: impl Into<String>, normalization: Normalization) -> Self {
        RateCurve {
            label: label.into(),
            normalization,
            points: Vec::new(),
        }
    }

    /// Appends a point; negative rates are recorded as aborted zeros.
    pub fn push(&mut self, loss_db: f64, rate: f64) -> Result<()> {
        check_range("loss", loss_db, "[0, inf)", loss_db >= 0.0 && loss_db.is_finite())?;
        if let Some(last) = self.points.last() {
            if !(loss_db > last.loss_db) {
                return Err(Error::Degenerate(format!(
                    "losses must be strictly increasing ({} after {})",
                    loss_db, last.loss_db
                )));
            }
        }
        if rate.is_nan() {
            return Err(Error::Degenerate(format!("NaN rate at {loss_db} dB")));
        }
        let aborted = !(rate > 0.0);
        self.points.push(RatePoint {
            loss_db,
            rate: if aborted { 0.0 } else { rate },
            aborted,
        });
        Ok(())
    }

    pub fn points(&self) -> &[RatePoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `-log2(1 - eta)`, the secret-key capacity of a pure-loss channel.
pub fn plob_bound(eta: f64) -> Result<f64> {
    check_range("eta", eta, "[0, 1]", (0.0..=1.0).contains(&eta))?;
    if eta == 1.0 {
        return Err(Error::Unbounded("lossless channel has infinite secret-key capacity".into()));
    }
    Ok(-(-eta).ln_1p() / std::f64::consts::LN_2)
}

/// PLOB bound at a loss in dB.
pub fn plob_bound_db(loss_db: f64) -> Result<f64> {
    plob_bound(loss_db_to_transmittance(loss_db)?)
}

/// Per-point gap between the bound and a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    /// `bound - rate` for every point, in curve order.
    pub margins: Vec<f64>,
    /// Indices of points with a non-positive margin.
    pub violations: Vec<usize>,
}

impl DominanceReport {
    pub fn dominated(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Compares a curve with the bound evaluated at `eta_of_loss(loss_db)`.
///
/// A point at zero loss has an unbounded capacity and therefore a `+inf` margin.
pub fn compare_to_bound(curve: &RateCurve, eta_of_loss: impl Fn(f64) -> f64) -> Result<DominanceReport> {
    if curve.is_empty() {
        return Err(Error::Degenerate("empty rate curve".into()));
    }
    let mut margins = Vec::with_capacity(curve.points.len());
    let mut violations = Vec::new();
    for (k, p) in curve.points.iter().enumerate() {
        let margin = match plob_bound(eta_of_loss(p.loss_db)) {
            Ok(b) => b - p.rate,
            Err(Error::Unbounded(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if !(margin > 0.0) {
            violations.push(k);
        }
        margins.push(margin);
    }
    Ok(DominanceReport { margins, violations })
}
