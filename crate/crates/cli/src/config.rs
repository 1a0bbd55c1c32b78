//! Sweep configuration: a TOML document with typed sections.
//!
//! ```toml
//! name = "fig2"
//!
//! [scenario]
//! geometry = "asymmetric"      # T2 = 1, loss on Alice's leg; "symmetric" splits it evenly
//! eps1 = 0.002
//! eps2 = 0.002
//! gain = "optimal"             # or a number
//! common_variance = "max"      # or "strict"
//!
//! [[profiles]]
//! label = "ideal"
//! v_a = 1e5
//! v_b = 1e5
//! beta = 1.0
//! trusted_tail = true
//!
//! [adc]
//! alpha = 52.0
//! bits = 13
//!
//! [security]
//! eps_s = 1e-21
//! eps_c = 1e-21
//! p_pass = 0.99
//!
//! [finite_size]
//! k_pe_ratio = 0.1
//! k_check = 0
//! d0 = "margin:3"              # expectation | margin[:z] | fixed:<d0> | scaled:<f>
//!
//! [axes]
//! loss_db = { start = 0.0, stop = 3.0, step = 0.05 }   # or a list
//! block_sizes = [1e10, 1e11, 1e12, "inf"]
//! reconciliation = ["DR"]      # DR | RR
//! attack = ["independent"]     # independent | correlated
//!
//! [mc]
//! enabled = false
//! samples = 100000
//! seed = 1
//!
//! [output]
//! path = "fig2.csv"
//! plob_overlay = false
//! plob_reference = "t1"        # or "equivalent"
//! ```

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context};
use cvmdi_core::{Attack, CommonVariance, D0Policy, Direction, GainPolicy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub scenario: ScenarioTemplate,
    pub profiles: Vec<Profile>,
    #[serde(default)]
    pub adc: AdcConfig,
    #[serde(default)]
    pub security: SecurityConfig,
    #[serde(default)]
    pub finite_size: FiniteSizeConfig,
    pub axes: Axes,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Bob sits at the relay: `T2 = 1`, the whole loss is on Alice's leg.
    Asymmetric,
    /// Relay halfway: each leg carries half of the loss (in dB).
    Symmetric,
}

impl Geometry {
    /// `(T1, T2)` for a total Alice-Bob loss in dB.
    pub fn transmittances(&self, loss_db: f64) -> anyhow::Result<(f64, f64)> {
        Ok(match self {
            Geometry::Asymmetric => (cvmdi_core::loss_db_to_transmittance(loss_db)?, 1.0),
            Geometry::Symmetric => {
                let t = cvmdi_core::loss_db_to_transmittance(loss_db / 2.0)?;
                (t, t)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSetting {
    Fixed(f64),
    Named(GainName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainName {
    Optimal,
}

impl GainSetting {
    pub fn policy(&self) -> GainPolicy {
        match *self {
            GainSetting::Fixed(g) => GainPolicy::Fixed(g),
            GainSetting::Named(GainName::Optimal) => GainPolicy::Optimal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommonVarianceSetting {
    Max,
    Strict,
}

impl From<CommonVarianceSetting> for CommonVariance {
    fn from(s: CommonVarianceSetting) -> Self {
        match s {
            CommonVarianceSetting::Max => CommonVariance::Max,
            CommonVarianceSetting::Strict => CommonVariance::Strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub geometry: Geometry,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default = "default_gain")]
    pub gain: GainSetting,
    #[serde(default = "default_common_variance")]
    pub common_variance: CommonVarianceSetting,
}

fn default_gain() -> GainSetting {
    GainSetting::Named(GainName::Optimal)
}

fn default_common_variance() -> CommonVarianceSetting {
    CommonVarianceSetting::Max
}

/// A modulation / reconciliation profile, e.g. "ideal" or "practical".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub label: String,
    pub v_a: f64,
    pub v_b: f64,
    pub beta: f64,
    /// Force `p_alpha = 0` (needed for very large modulation variances).
    #[serde(default)]
    pub trusted_tail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcConfig {
    pub alpha: f64,
    pub bits: u32,
}

impl Default for AdcConfig {
    fn default() -> Self {
        AdcConfig { alpha: 52.0, bits: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityConfig {
    pub eps_s: f64,
    pub eps_c: f64,
    pub p_pass: f64,
}

impl Default for SecurityConfig {
    fn default() -> Self {
        SecurityConfig {
            eps_s: 1e-21,
            eps_c: 1e-21,
            p_pass: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSizeConfig {
    pub k_pe_ratio: f64,
    pub k_check: u64,
    #[serde(with = "d0_serde")]
    pub d0: D0Policy,
}

impl Default for FiniteSizeConfig {
    fn default() -> Self {
        FiniteSizeConfig {
            k_pe_ratio: 0.1,
            k_check: 0,
            d0: D0Policy::default(),
        }
    }
}

mod d0_serde {
    use cvmdi_core::D0Policy;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &D0Policy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<D0Policy, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Either an explicit list of losses or an inclusive `start..=stop` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossAxis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl LossAxis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            LossAxis::List(ref v) => v.clone(),
            LossAxis::Range { start, stop, step } => {
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=count).map(|k| start + k as f64 * step).collect()
            }
        }
    }
}

/// A block size `N`, or `inf` for the asymptotic limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BlockSizeRepr", into = "BlockSizeRepr")]
pub enum BlockSize {
    Finite(u64),
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BlockSizeRepr {
    Int(u64),
    Float(f64),
    Text(String),
}

impl TryFrom<BlockSizeRepr> for BlockSize {
    type Error = String;

    fn try_from(r: BlockSizeRepr) -> Result<Self, String> {
        match r {
            BlockSizeRepr::Int(n) => Ok(BlockSize::Finite(n)),
            BlockSizeRepr::Float(x) => float_block(x),
            BlockSizeRepr::Text(s) => s.parse(),
        }
    }
}

impl From<BlockSize> for BlockSizeRepr {
    fn from(b: BlockSize) -> Self {
        match b {
            BlockSize::Finite(n) if n <= i64::MAX as u64 => BlockSizeRepr::Int(n),
            other => BlockSizeRepr::Text(other.to_string()),
        }
    }
}

fn float_block(x: f64) -> Result<BlockSize, String> {
    if x.is_infinite() && x > 0.0 {
        return Ok(BlockSize::Infinite);
    }
    if x >= 1.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(BlockSize::Finite(x as u64))
    } else {
        Err(format!("block size {x} is not a positive integer"))
    }
}

impl std::str::FromStr for BlockSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(BlockSize::Infinite);
        }
        if let Ok(n) = s.parse::<u64>() {
            return Ok(BlockSize::Finite(n));
        }
        s.parse::<f64>()
            .map_err(|_| format!("invalid block size '{s}' (expected an integer or 'inf')"))
            .and_then(float_block)
    }
}

impl fmt::Display for BlockSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockSize::Finite(n) => write!(f, "{n}"),
            BlockSize::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReconciliationSetting {
    DR,
    RR,
}

impl From<ReconciliationSetting> for Direction {
    fn from(r: ReconciliationSetting) -> Self {
        match r {
            ReconciliationSetting::DR => Direction::Direct,
            ReconciliationSetting::RR => Direction::Reverse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackSetting {
    Independent,
    Correlated,
}

impl From<AttackSetting> for Attack {
    fn from(a: AttackSetting) -> Self {
        match a {
            AttackSetting::Independent => Attack::Independent,
            AttackSetting::Correlated => Attack::CorrelatedMaximal,
        }
    }
}

impl AttackSetting {
    pub fn tag(&self) -> &'static str {
        match self {
            AttackSetting::Independent => "independent",
            AttackSetting::Correlated => "correlated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    pub loss_db: LossAxis,
    pub block_sizes: Vec<BlockSize>,
    pub reconciliation: Vec<ReconciliationSetting>,
    #[serde(default = "default_attacks")]
    pub attack: Vec<AttackSetting>,
}

fn default_attacks() -> Vec<AttackSetting> {
    vec![AttackSetting::Independent]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub enabled: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            enabled: false,
            samples: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlobReference {
    /// Transmittance of Alice's leg, `T1`.
    T1,
    /// Equivalent Alice-Bob transmittance `T`.
    Equivalent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub plob_overlay: bool,
    #[serde(default = "default_plob_reference")]
    pub plob_reference: PlobReference,
}

fn default_plob_reference() -> PlobReference {
    PlobReference::T1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: None,
            plob_overlay: false,
            plob_reference: PlobReference::T1,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).context("invalid sweep configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Checks that every axis is non-empty and every range is well formed.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.profiles.is_empty() {
            bail!("at least one [[profiles]] entry is required");
        }
        if let LossAxis::Range { start, stop, step } = self.axes.loss_db {
            if !(step > 0.0) {
                bail!("loss_db range needs a positive step (got {step})");
            }
            if !(stop >= start) {
                bail!("loss_db range has stop {stop} < start {start}");
            }
        }
        let losses = self.axes.loss_db.values();
        if losses.is_empty() {
            bail!("loss_db axis is empty");
        }
        if let Some(bad) = losses.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            bail!("loss {bad} dB is not a finite non-negative number");
        }
        if self.axes.block_sizes.is_empty() {
            bail!("block_sizes axis is empty");
        }
        if self.axes.reconciliation.is_empty() {
            bail!("reconciliation axis is empty");
        }
        if self.axes.attack.is_empty() {
            bail!("attack axis is empty");
        }
        if !(self.finite_size.k_pe_ratio > 0.0 && self.finite_size.k_pe_ratio < 1.0) {
            bail!("k_pe_ratio must lie in (0, 1)");
        }
        if self.mc.enabled && self.mc.samples < 2 {
            bail!("mc.samples must be at least 2");
        }
        cvmdi_core::AdcSpec::new(self.adc.alpha, self.adc.bits)?;
        cvmdi_core::SecurityBudget::new(
            self.security.eps_s,
            self.security.eps_c,
            self.security.p_pass,
            cvmdi_core::TailModel::Gaussian,
        )?;
        Ok(())
    }
}

/// Command-line values that replace configuration entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub trusted_tail: bool,
    pub d0: Option<D0Policy>,
    pub eps_s: Option<f64>,
    pub eps_c: Option<f64>,
    pub p_pass: Option<f64>,
    pub k_check: Option<u64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SweepConfig) -> anyhow::Result<()> {
        if self.trusted_tail {
            for p in &mut cfg.profiles {
                p.trusted_tail = true;
            }
        }
        if let Some(d0) = self.d0 {
            cfg.finite_size.d0 = d0;
        }
        if let Some(v) = self.eps_s {
            cfg.security.eps_s = v;
        }
        if let Some(v) = self.eps_c {
            cfg.security.eps_c = v;
        }
        if let Some(v) = self.p_pass {
            cfg.security.p_pass = v;
        }
        if let Some(v) = self.k_check {
            cfg.finite_size.k_check = v;
        }
        if let Some(v) = self.seed {
            cfg.mc.seed = v;
        }
        cfg.validate()
    }
}
