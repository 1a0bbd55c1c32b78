//! Physical channel and attack parameters mapped to the equivalent one-way
//! Alice-Bob channel `(T, e)`.

use crate::error::{check_range, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attack {
    /// Two independent entangling cloners.
    Independent,
    /// Cloner ancillas forming a maximally correlated pair with common variance `V_E`,
    /// correlated with the sign that adds noise to the relay outcomes.
    CorrelatedMaximal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainPolicy {
    Optimal,
    Fixed(f64),
}

/// How the correlated attack reconciles unequal cloner variances `W1 != W2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommonVariance {
    /// `V_E = max(W1, W2)`; the other channel's excess noise is re-derived from `V_E`.
    #[default]
    Max,
    /// Unequal cloner variances are an error.
    Strict,
}

/// Everything that defines the equivalent Alice-Bob channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScenario {
    /// Alice-to-relay transmittance.
    pub t1: f64,
    /// Bob-to-relay transmittance.
    pub t2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub v_a: f64,
    pub v_b: f64,
    pub attack: Attack,
    pub gain_policy: GainPolicy,
    pub common_variance: CommonVariance,
}

/// Excess noises and cloner correlation actually seen by the two channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveModel {
    pub eps1: f64,
    pub eps2: f64,
    /// Common cloner variance, when the attack is correlated and some channel is lossy.
    pub cloner_variance: Option<f64>,
    /// `<E2x E3x>`; `<E2p E3p>` is its negative.
    pub correlation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentChannel {
    pub t: f64,
    pub e: f64,
    pub g: f64,
    /// Correlation contribution to `e` (zero for independent cloners).
    pub c_e: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl ChannelScenario {
    /// Independent-cloner scenario with the optimal displacement gain.
    pub fn new(t1: f64, t2: f64, eps1: f64, eps2: f64, v_a: f64, v_b: f64) -> Result<Self> {
        let s = ChannelScenario {
            t1,
            t2,
            eps1,
            eps2,
            v_a,
            v_b,
            attack: Attack::Independent,
            gain_policy: GainPolicy::Optimal,
            common_variance: CommonVariance::Max,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_attack(mut self, attack: Attack) -> Self {
        self.attack = attack;
        self
    }

    pub fn with_gain(mut self, gain_policy: GainPolicy) -> Self {
        self.gain_policy = gain_policy;
        self
    }

    pub fn with_common_variance(mut self, policy: CommonVariance) -> Self {
        self.common_variance = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_range("T1", self.t1, "(0, 1]", self.t1 > 0.0 && self.t1 <= 1.0)?;
        check_range("T2", self.t2, "(0, 1]", self.t2 > 0.0 && self.t2 <= 1.0)?;
        check_range("eps1", self.eps1, "[0, inf)", self.eps1 >= 0.0 && self.eps1.is_finite())?;
        check_range("eps2", self.eps2, "[0, inf)", self.eps2 >= 0.0 && self.eps2.is_finite())?;
        if !(self.v_a >= 1.0 && self.v_a.is_finite()) {
            return Err(Error::InvalidVariance(self.v_a));
        }
        if !(self.v_b >= 1.0 && self.v_b.is_finite()) {
            return Err(Error::InvalidVariance(self.v_b));
        }
        if let GainPolicy::Fixed(g) = self.gain_policy {
            check_range("gain", g, "(0, inf)", g > 0.0 && g.is_finite())?;
        }
        Ok(())
    }

    pub fn gain(&self) -> Result<f64> {
        match self.gain_policy {
            GainPolicy::Fixed(g) => Ok(g),
            GainPolicy::Optimal => {
                let g = optimal_gain(self.v_b, self.t2)?;
                if g == 0.0 {
                    return Err(Error::Degenerate(
                        "optimal gain is zero for V_B = 1 (no Bob modulation)".into(),
                    ));
                }
                Ok(g)
            }
        }
    }

    pub fn eve_model(&self) -> Result<EveModel> {
        match self.attack {
            Attack::Independent => Ok(EveModel {
                eps1: self.eps1,
                eps2: self.eps2,
                cloner_variance: None,
                correlation: 0.0,
            }),
            Attack::CorrelatedMaximal => {
                let (v_e, eps1, eps2) = common_cloner(self)?;
                let correlated = self.t1 < 1.0 && self.t2 < 1.0;
                let correlation = match v_e {
                    Some(v) if correlated => -(v * v - 1.0).sqrt(),
                    _ => 0.0,
                };
                Ok(EveModel {
                    eps1,
                    eps2,
                    cloner_variance: v_e,
                    correlation,
                })
            }
        }
    }

    /// Equivalent `(T, e)` for this scenario's attack and gain policy.
    pub fn equivalent_channel(&self) -> Result<EquivalentChannel> {
        self.validate()?;
        let g = self.gain()?;
        let t = equivalent_t(self.t1, g);
        if t > 1.0 {
            return Err(Error::OutOfRange {
                name: "equivalent transmittance",
                value: t,
                range: "(0, 1]",
            });
        }
        match self.attack {
            Attack::Independent => Ok(EquivalentChannel {
                t,
                e: equivalent_e_general(self, g),
                g,
                c_e: 0.0,
                eps1: self.eps1,
                eps2: self.eps2,
            }),
            Attack::CorrelatedMaximal => {
                let c = correlated_e(self, g)?;
                Ok(EquivalentChannel {
                    t,
                    e: c.e_prime,
                    g,
                    c_e: c.c_e,
                    eps1: c.eps1,
                    eps2: c.eps2,
                })
            }
        }
    }
}

/// `g = sqrt(2 / T2) sqrt((V_B - 1) / (V_B + 1))`, the gain minimizing `e`.
///
/// `V_B = 1` returns zero gain and logs a warning.
pub fn optimal_gain(v_b: f64, t2: f64) -> Result<f64> {
    if !(v_b >= 1.0 && v_b.is_finite()) {
        return Err(Error::InvalidVariance(v_b));
    }
    check_range("T2", t2, "(0, 1]", t2 > 0.0 && t2 <= 1.0)?;
    if v_b == 1.0 {
        log::warn!("optimal gain degenerates to zero: V_B = 1 leaves no Bob modulation to cancel");
        return Ok(0.0);
    }
    Ok((2.0 / t2).sqrt() * ((v_b - 1.0) / (v_b + 1.0)).sqrt())
}

/// `T = T1 g^2 / 2`.
pub fn equivalent_t(t1: f64, g: f64) -> f64 {
    0.5 * t1 * g * g
}

fn e_base(t1: f64, t2: f64, eps1: f64, eps2: f64) -> f64 {
    1.0 + (2.0 + t2 * (eps2 - 2.0) + t1 * (eps1 - 1.0)) / t1
}

fn gain_mismatch(t1: f64, t2: f64, v_b: f64, g: f64) -> f64 {
    let r = 2f64.sqrt() / g * (v_b - 1.0).sqrt() - t2.sqrt() * (v_b + 1.0).sqrt();
    r * r / t1
}

/// Equivalent excess noise for an arbitrary gain, independent cloners.
pub fn equivalent_e_general(s: &ChannelScenario, g: f64) -> f64 {
    e_base(s.t1, s.t2, s.eps1, s.eps2) + gain_mismatch(s.t1, s.t2, s.v_b, g)
}

/// Equivalent excess noise at the optimal gain: `eps1 + (T2 (eps2 - 2) + 2) / T1`.
pub fn equivalent_e_optimal(s: &ChannelScenario) -> f64 {
    s.eps1 + (s.t2 * (s.eps2 - 2.0) + 2.0) / s.t1
}

fn cloner_variance(t: f64, eps: f64) -> Option<f64> {
    (t < 1.0).then(|| 1.0 + t * eps / (1.0 - t))
}

fn eps_from_cloner(t: f64, w: f64) -> f64 {
    (w - 1.0) * (1.0 - t) / t
}

fn common_cloner(s: &ChannelScenario) -> Result<(Option<f64>, f64, f64)> {
    let w1 = cloner_variance(s.t1, s.eps1);
    let w2 = cloner_variance(s.t2, s.eps2);
    match (w1, w2) {
        (Some(a), Some(b)) => {
            let equal = (a - b).abs() <= 1e-12 * a.max(b);
            if !equal && s.common_variance == CommonVariance::Strict {
                return Err(Error::InconsistentCommonVariance { w1: a, w2: b });
            }
            let v = a.max(b);
            Ok((Some(v), eps_from_cloner(s.t1, v), eps_from_cloner(s.t2, v)))
        }
        (Some(a), None) => Ok((Some(a), s.eps1, s.eps2)),
        (None, Some(b)) => Ok((Some(b), s.eps1, s.eps2)),
        (None, None) => Ok((None, s.eps1, s.eps2)),
    }
}

/// Correlated-attack excess noise and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedNoise {
    pub e_prime: f64,
    /// `equivalent_e_general` evaluated on the effective excess noises.
    pub e_independent: f64,
    pub c_e: f64,
    pub v_e: Option<f64>,
    pub eps1: f64,
    pub eps2: f64,
}

/// `e' = e + C_E` with `C_E = (2/T1) sqrt((1-T1)(1-T2)) sqrt(V_E^2 - 1)`.
///
/// The ancilla pair has `<E2x E3x> = -sqrt(V_E^2 - 1)` and `<E2p E3p> = +sqrt(V_E^2 - 1)`,
/// the sign that raises the noise of both relay outputs; each quadrature then adds `C_E`.
/// `C_E` vanishes when either transmittance is 1.
pub fn correlated_e(s: &ChannelScenario, g: f64) -> Result<CorrelatedNoise> {
    s.validate()?;
    let (v_e, eps1, eps2) = common_cloner(s)?;
    let e_independent = e_base(s.t1, s.t2, eps1, eps2) + gain_mismatch(s.t1, s.t2, s.v_b, g);
    let c_e = match v_e {
        Some(v) if s.t1 < 1.0 && s.t2 < 1.0 => {
            2.0 / s.t1 * ((1.0 - s.t1) * (1.0 - s.t2)).sqrt() * (v * v - 1.0).sqrt()
        }
        _ => 0.0,
    };
    Ok(CorrelatedNoise {
        e_prime: e_independent + c_e,
        e_independent,
        c_e,
        v_e,
        eps1,
        eps2,
    })
}

/// `T = 10^(-L/10)`.
pub fn loss_db_to_transmittance(loss_db: f64) -> Result<f64> {
    check_range("loss (dB)", loss_db, "[0, inf)", loss_db >= 0.0)?;
    Ok(10f64.powf(-loss_db / 10.0))
}
