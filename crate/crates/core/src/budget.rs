//! Composable-security parameters and their bookkeeping.

use crate::entropy::{eps_prime, p_alpha_gaussian, AdcSpec};
use crate::error::{check_range, Result};

/// How the per-symbol probability of a quadrature falling outside `[-alpha, alpha]` is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TailModel {
    /// Trust the source: `p_alpha = 0`. Needed for very large modulation variances,
    /// where the Gaussian tail would make the budget infeasible.
    Trusted,
    /// Two-sided Gaussian tail of the measured quadrature.
    #[default]
    Gaussian,
    /// A fixed per-symbol tail probability.
    Fixed(f64),
}

/// Secrecy, correctness and pass-probability parameters of a protocol run.
///
/// `eps_s` is identified with the secrecy parameter and `eps_c` with the correctness
/// parameter, so the composed security parameter is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityBudget {
    pub eps_s: f64,
    pub eps_c: f64,
    pub p_pass: f64,
    pub tail: TailModel,
}

impl Default for SecurityBudget {
    /// `eps_s = eps_c = 1e-21`, `p_pass = 0.99`, Gaussian tail model.
    fn default() -> Self {
        SecurityBudget {
            eps_s: 1e-21,
            eps_c: 1e-21,
            p_pass: 0.99,
            tail: TailModel::Gaussian,
        }
    }
}

impl SecurityBudget {
    pub fn new(eps_s: f64, eps_c: f64, p_pass: f64, tail: TailModel) -> Result<Self> {
        let b = SecurityBudget {
            eps_s,
            eps_c,
            p_pass,
            tail,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = tail;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_range("eps_s", self.eps_s, "(0, 1)", self.eps_s > 0.0 && self.eps_s < 1.0)?;
        check_range("eps_c", self.eps_c, "(0, 1)", self.eps_c > 0.0 && self.eps_c < 1.0)?;
        check_range("p_pass", self.p_pass, "(0, 1]", self.p_pass > 0.0 && self.p_pass <= 1.0)?;
        if let TailModel::Fixed(p) = self.tail {
            check_range("p_alpha", p, "[0, 1)", (0.0..1.0).contains(&p))?;
        }
        Ok(())
    }

    /// Composed security parameter `eps_s + eps_c`.
    pub fn eps_total(&self) -> Result<f64> {
        compose_security(self.eps_s, self.eps_c)
    }

    /// `log2(1 / (eps_s^2 eps_c))`, the privacy-amplification and hash-check cost.
    pub fn log_penalty(&self) -> f64 {
        -2.0 * self.eps_s.log2() - self.eps_c.log2()
    }

    /// Per-symbol tail probability for a quadrature of the given variance.
    pub fn p_alpha(&self, adc: &AdcSpec, variance: f64) -> Result<f64> {
        match self.tail {
            TailModel::Trusted => Ok(0.0),
            TailModel::Gaussian => p_alpha_gaussian(adc.alpha(), variance),
            TailModel::Fixed(p) => Ok(p),
        }
    }

    /// Smoothing parameter `eps'` for `n` key symbols and tail probability `p_alpha`.
    pub fn eps_prime(&self, p_alpha: f64, n: u64) -> Result<f64> {
        eps_prime(self.eps_s, self.p_pass, p_alpha, n)
    }
}

/// `eps = eps_s + eps_c`, with both inputs in `(0, 1)`.
pub fn compose_security(eps_s: f64, eps_c: f64) -> Result<f64> {
    check_range("eps_s", eps_s, "(0, 1)", eps_s > 0.0 && eps_s < 1.0)?;
    check_range("eps_c", eps_c, "(0, 1)", eps_c > 0.0 && eps_c < 1.0)?;
    Ok(eps_s + eps_c)
}
