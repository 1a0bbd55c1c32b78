//! Grid expansion, parallel evaluation and CSV emission.

use std::collections::BTreeMap;
use std::io::Write;

use anyhow::Context;
use cvmdi_core::mc::{empirical_distance_with_se, Quadrature};
use cvmdi_core::{
    asymptotic_report, discretize, equivalent_cm, estimate_rescale, key_length, plob_bound, sample_correlated,
    AdcSpec, ChannelScenario, Error as CoreError, FiniteSizeParams, Normalization, RateCurve, Reconciliation,
    SecurityBudget, TailModel,
};
use rayon::prelude::*;

use crate::config::{AttackSetting, BlockSize, PlobReference, ReconciliationSetting, SweepConfig};
use crate::csv::{escape, fmt_f64, fmt_opt};

/// One point of the sweep grid. Grid order is profile, attack, reconciliation, block
/// size, loss (innermost), so each rate-vs-loss curve is contiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub profile: usize,
    pub attack: AttackSetting,
    pub reconciliation: ReconciliationSetting,
    pub block: BlockSize,
    pub loss_db: f64,
}

pub fn grid(cfg: &SweepConfig) -> Vec<GridPoint> {
    let losses = cfg.axes.loss_db.values();
    let mut points = Vec::new();
    for profile in 0..cfg.profiles.len() {
        for &attack in &cfg.axes.attack {
            for &reconciliation in &cfg.axes.reconciliation {
                for &block in &cfg.axes.block_sizes {
                    for &loss_db in &losses {
                        points.push(GridPoint {
                            index: points.len(),
                            profile,
                            attack,
                            reconciliation,
                            block,
                            loss_db,
                        });
                    }
                }
            }
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Aborted,
    /// The security budget cannot be met (`eps' <= 0`).
    Infeasible(String),
    /// The point is outside the model's domain.
    Error(String),
}

impl Status {
    pub fn label(&self) -> String {
        match self {
            Status::Ok => "ok".into(),
            Status::Aborted => "aborted".into(),
            Status::Infeasible(m) => format!("infeasible: {m}"),
            Status::Error(m) => format!("error: {m}"),
        }
    }
}

/// Monte Carlo cross-check of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McColumns {
    pub var_a_z: f64,
    pub var_b_z: f64,
    pub cov_z: f64,
    pub distance: f64,
    pub distance_se: f64,
    pub distance_z: f64,
    pub rescale_rel_err: f64,
}

/// One evaluated grid point. Numeric fields are `None` where they do not apply.
///
/// For finite blocks `leak` and `ell` are block totals in bits; for `N = inf` they are
/// per key symbol. `rate_per_symbol` is the unclipped key rate per key symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub point: GridPoint,
    pub profile: String,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub n: Option<u64>,
    pub k_pe: Option<u64>,
    pub d0: Option<f64>,
    pub mu: Option<f64>,
    pub eps_prime: Option<f64>,
    pub p_alpha: Option<f64>,
    pub t: Option<f64>,
    pub e: Option<f64>,
    pub h_a: Option<f64>,
    pub h_b: Option<f64>,
    pub i: Option<f64>,
    pub leak: Option<f64>,
    pub ell: Option<f64>,
    pub rate_per_symbol: Option<f64>,
    pub rate_per_sifted: Option<f64>,
    pub rate_per_pulse: Option<f64>,
    pub aborted: Option<bool>,
    pub status: Status,
    pub plob: Option<f64>,
    pub mc: Option<McColumns>,
}

impl Row {
    fn empty(point: GridPoint, profile: String) -> Self {
        Row {
            point,
            profile,
            t1: None,
            t2: None,
            n: None,
            k_pe: None,
            d0: None,
            mu: None,
            eps_prime: None,
            p_alpha: None,
            t: None,
            e: None,
            h_a: None,
            h_b: None,
            i: None,
            leak: None,
            ell: None,
            rate_per_symbol: None,
            rate_per_sifted: None,
            rate_per_pulse: None,
            aborted: None,
            status: Status::Ok,
            plob: None,
            mc: None,
        }
    }
}

/// Rows plus rate-vs-loss curves (per-sifted normalization for finite blocks, per key
/// symbol for `N = inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    pub curves: Vec<RateCurve>,
}

/// Builds the channel scenario of a grid point.
pub fn scenario_for(cfg: &SweepConfig, point: &GridPoint) -> cvmdi_core::Result<ChannelScenario> {
    let p = &cfg.profiles[point.profile];
    let (t1, t2) = cfg
        .scenario
        .geometry
        .transmittances(point.loss_db)
        .map_err(|e| CoreError::Degenerate(e.to_string()))?;
    Ok(ChannelScenario::new(t1, t2, cfg.scenario.eps1, cfg.scenario.eps2, p.v_a, p.v_b)?
        .with_attack(point.attack.into())
        .with_gain(cfg.scenario.gain.policy())
        .with_common_variance(cfg.scenario.common_variance.into()))
}

fn budget_for(cfg: &SweepConfig, point: &GridPoint) -> cvmdi_core::Result<SecurityBudget> {
    let tail = if cfg.profiles[point.profile].trusted_tail {
        TailModel::Trusted
    } else {
        TailModel::Gaussian
    };
    SecurityBudget::new(cfg.security.eps_s, cfg.security.eps_c, cfg.security.p_pass, tail)
}

fn status_of(err: &CoreError) -> Status {
    match err {
        CoreError::InfeasibleBudget(m) => Status::Infeasible(m.clone()),
        other => Status::Error(other.to_string()),
    }
}

/// Evaluates one grid point. Model errors are recorded in the row's status.
pub fn evaluate(cfg: &SweepConfig, point: &GridPoint) -> Row {
    let profile = &cfg.profiles[point.profile];
    let mut row = Row::empty(*point, profile.label.clone());
    if let Err(e) = fill(cfg, point, &mut row) {
        row.status = status_of(&e);
    }
    row
}

fn fill(cfg: &SweepConfig, point: &GridPoint, row: &mut Row) -> cvmdi_core::Result<()> {
    let profile = &cfg.profiles[point.profile];
    let scenario = scenario_for(cfg, point)?;
    row.t1 = Some(scenario.t1);
    row.t2 = Some(scenario.t2);
    let adc = AdcSpec::new(cfg.adc.alpha, cfg.adc.bits)?;
    let budget = budget_for(cfg, point)?;
    let rec = Reconciliation::new(point.reconciliation.into(), profile.beta)?;

    let (channel, rate_per_symbol, aborted) = match point.block {
        BlockSize::Finite(n_total) => {
            let fsp = FiniteSizeParams::with_ratio(
                n_total,
                cfg.finite_size.k_pe_ratio,
                cfg.finite_size.k_check,
                cfg.finite_size.d0,
            )?;
            row.n = Some(fsp.n());
            row.k_pe = Some(fsp.k_pe);
            let r = key_length(&scenario, &adc, &budget, &fsp, &rec)?;
            row.d0 = Some(r.d0);
            row.mu = Some(r.mu);
            row.eps_prime = Some(r.eps_prime);
            row.p_alpha = Some(r.p_alpha);
            row.leak = Some(r.term_leak);
            row.ell = Some(r.ell);
            row.rate_per_sifted = Some(r.rate_per_sifted);
            row.rate_per_pulse = Some(r.rate_per_pulse);
            (r.channel, r.ell_raw / r.n as f64, r.aborted)
        }
        BlockSize::Infinite => {
            let a = asymptotic_report(&scenario, &adc, &budget, &rec, &cfg.finite_size.d0)?;
            // Per sifted symbol, only the key fraction n / N = 1 - k_pe/N - k_check/N
            // carries key; k_check is negligible in the limit.
            let key_fraction = 1.0 - cfg.finite_size.k_pe_ratio;
            let clipped = a.rate.max(0.0);
            row.d0 = Some(a.d0);
            row.mu = Some(0.0);
            row.leak = Some(a.leak);
            row.ell = Some(clipped);
            row.rate_per_sifted = Some(key_fraction * clipped);
            row.rate_per_pulse = Some(key_fraction * clipped / 2.0);
            (a.channel, a.rate, !(a.rate > 0.0))
        }
    };
    row.t = Some(channel.t);
    row.e = Some(channel.e);
    row.h_a = Some(channel.h_a);
    row.h_b = Some(channel.h_b);
    row.i = Some(channel.mutual_information);
    row.rate_per_symbol = Some(rate_per_symbol);
    row.aborted = Some(aborted);
    row.status = if aborted { Status::Aborted } else { Status::Ok };

    if cfg.output.plob_overlay {
        let eta = match cfg.output.plob_reference {
            PlobReference::T1 => scenario.t1,
            PlobReference::Equivalent => channel.t,
        };
        row.plob = match plob_bound(eta) {
            Ok(b) => Some(b),
            Err(CoreError::Unbounded(_)) => Some(f64::INFINITY),
            Err(e) => return Err(e),
        };
    }
    if cfg.mc.enabled {
        let seed = cfg.mc.seed.wrapping_add(point.index as u64);
        row.mc = Some(mc_columns(profile.v_a, channel.t, channel.e, &adc, cfg.mc.samples, seed)?);
    }
    Ok(())
}

/// Samples the equivalent-channel state and compares it with the analytic moments,
/// distance and rescale factor.
pub fn mc_columns(v_a: f64, t: f64, e: f64, adc: &AdcSpec, samples: usize, seed: u64) -> cvmdi_core::Result<McColumns> {
    let cm = equivalent_cm(v_a, t, e)?;
    let stats = cvmdi_core::distance_stats(&cm, adc)?;
    let batch = sample_correlated(&cm, samples, seed, Quadrature::X)?;
    let check = batch.check_moments(&cm)?;
    let t_hat = estimate_rescale(&batch.x_a, &batch.x_b)?;
    let d = discretize(&batch.rescale_alice(stats.rescale), adc);
    let (distance, distance_se) = empirical_distance_with_se(&d.i_a, &d.i_b)?;
    let distance_z = if distance_se > 0.0 {
        (distance - stats.mean) / distance_se
    } else if distance == stats.mean {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(McColumns {
        var_a_z: check.z_var_a,
        var_b_z: check.z_var_b,
        cov_z: check.z_cov,
        distance,
        distance_se,
        distance_z,
        rescale_rel_err: t_hat / stats.rescale - 1.0,
    })
}

/// Evaluates every grid point on `workers` threads (the machine default when `None`).
///
/// Rows come back in grid order regardless of scheduling.
pub fn run_sweep(cfg: &SweepConfig, workers: Option<usize>) -> anyhow::Result<SweepResult> {
    cfg.validate()?;
    let points = grid(cfg);
    let eval = || points.par_iter().map(|p| evaluate(cfg, p)).collect::<Vec<_>>();
    let rows = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("building worker pool")?
            .install(eval),
        None => eval(),
    };
    if rows.iter().all(|r| r.status != Status::Ok) {
        log::warn!("sweep '{}': no grid point yields a positive key", cfg.name);
    }
    let curves = curves(&rows)?;
    Ok(SweepResult { rows, curves })
}

fn curve_key(p: &GridPoint) -> (usize, AttackSetting, ReconciliationSetting, BlockSize) {
    (p.profile, p.attack, p.reconciliation, p.block)
}

fn curves(rows: &[Row]) -> anyhow::Result<Vec<RateCurve>> {
    let mut out: Vec<RateCurve> = Vec::new();
    let mut current = None;
    for row in rows {
        let key = curve_key(&row.point);
        if current != Some(key) {
            let norm = match row.point.block {
                BlockSize::Finite(_) => Normalization::PerSifted,
                BlockSize::Infinite => Normalization::PerSymbol,
            };
            let label = format!(
                "{} {:?} {} N={}",
                row.profile,
                row.point.reconciliation,
                row.point.attack.tag(),
                row.point.block
            );
            out.push(RateCurve::new(label, norm));
            current = Some(key);
        }
        let rate = match row.point.block {
            BlockSize::Finite(_) => row.rate_per_sifted,
            BlockSize::Infinite => row.rate_per_symbol,
        };
        let curve = out.last_mut().expect("curve started above");
        // Losses in a list axis may repeat or be unordered; such points stay in the CSV only.
        if curve.points().last().is_none_or(|p| row.point.loss_db > p.loss_db) {
            curve.push(row.point.loss_db, rate.unwrap_or(0.0))?;
        }
    }
    Ok(out)
}

pub const BASE_COLUMNS: [&str; 28] = [
    "loss_db",
    "T1",
    "T2",
    "N",
    "n",
    "k_pe",
    "reconciliation",
    "attack",
    "d0",
    "mu",
    "eps_prime",
    "H_A",
    "H_B",
    "I",
    "leak",
    "ell",
    "rate_per_sifted",
    "rate_per_pulse",
    "aborted",
    "profile",
    "V_A",
    "V_B",
    "beta",
    "T",
    "e",
    "p_alpha",
    "rate_per_symbol",
    "status",
];

pub const MC_COLUMNS: [&str; 7] = [
    "mc_var_a_z",
    "mc_var_b_z",
    "mc_cov_z",
    "mc_distance",
    "mc_distance_se",
    "mc_distance_z",
    "mc_rescale_rel_err",
];

/// Writes the rows as CSV: a header, then one line per grid point in grid order.
pub fn write_csv<W: Write>(w: &mut W, cfg: &SweepConfig, rows: &[Row]) -> std::io::Result<()> {
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    if cfg.output.plob_overlay {
        header.push("plob");
    }
    if cfg.mc.enabled {
        header.extend(MC_COLUMNS);
    }
    writeln!(w, "{}", header.join(","))?;
    let int = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let p = &cfg.profiles[r.point.profile];
        let (n_col, n_key, k_pe) = match r.point.block {
            BlockSize::Finite(n) => (n.to_string(), int(r.n), int(r.k_pe)),
            BlockSize::Infinite => ("inf".to_string(), "inf".to_string(), "inf".to_string()),
        };
        let mut fields = vec![
            fmt_f64(r.point.loss_db),
            fmt_opt(r.t1),
            fmt_opt(r.t2),
            n_col,
            n_key,
            k_pe,
            format!("{:?}", r.point.reconciliation),
            r.point.attack.tag().to_string(),
            fmt_opt(r.d0),
            fmt_opt(r.mu),
            fmt_opt(r.eps_prime),
            fmt_opt(r.h_a),
            fmt_opt(r.h_b),
            fmt_opt(r.i),
            fmt_opt(r.leak),
            fmt_opt(r.ell),
            fmt_opt(r.rate_per_sifted),
            fmt_opt(r.rate_per_pulse),
            r.aborted.map(|a| a.to_string()).unwrap_or_default(),
            escape(&r.profile),
            fmt_f64(p.v_a),
            fmt_f64(p.v_b),
            fmt_f64(p.beta),
            fmt_opt(r.t),
            fmt_opt(r.e),
            fmt_opt(r.p_alpha),
            fmt_opt(r.rate_per_symbol),
            escape(&r.status.label()),
        ];
        if cfg.output.plob_overlay {
            fields.push(fmt_opt(r.plob));
        }
        if cfg.mc.enabled {
            match r.mc {
                Some(m) => fields.extend(
                    [
                        m.var_a_z,
                        m.var_b_z,
                        m.cov_z,
                        m.distance,
                        m.distance_se,
                        m.distance_z,
                        m.rescale_rel_err,
                    ]
                    .map(fmt_f64),
                ),
                None => fields.extend(std::iter::repeat_n(String::new(), MC_COLUMNS.len())),
            }
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Renders the rows as a CSV string.
pub fn csv_string(cfg: &SweepConfig, rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, cfg, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

/// Zero crossing of one rate-vs-loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    pub profile: String,
    pub reconciliation: ReconciliationSetting,
    pub attack: AttackSetting,
    pub block: BlockSize,
    /// Linearly interpolated loss where the per-symbol rate reaches zero. `None` when the
    /// curve never turns positive or is still positive at the last loss.
    pub loss_db: Option<f64>,
    pub positive_anywhere: bool,
}

/// Interpolated zero crossings of every curve in a sweep.
pub fn cutoffs(rows: &[Row]) -> Vec<Cutoff> {
    let mut groups: BTreeMap<usize, (Cutoff, Vec<(f64, f64)>)> = BTreeMap::new();
    let mut order: Vec<(usize, AttackSetting, ReconciliationSetting, BlockSize)> = Vec::new();
    for r in rows {
        let key = curve_key(&r.point);
        let id = match order.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                order.push(key);
                order.len() - 1
            }
        };
        let entry = groups.entry(id).or_insert_with(|| {
            (
                Cutoff {
                    profile: r.profile.clone(),
                    reconciliation: r.point.reconciliation,
                    attack: r.point.attack,
                    block: r.point.block,
                    loss_db: None,
                    positive_anywhere: false,
                },
                Vec::new(),
            )
        });
        if let Some(rate) = r.rate_per_symbol {
            entry.1.push((r.point.loss_db, rate));
        }
    }
    groups
        .into_values()
        .map(|(mut c, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            c.positive_anywhere = pts.iter().any(|p| p.1 > 0.0);
            c.loss_db = zero_crossing(&pts);
            c
        })
        .collect()
}

/// Last positive-to-non-positive transition, linearly interpolated.
pub fn zero_crossing(pts: &[(f64, f64)]) -> Option<f64> {
    pts.windows(2).rev().find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        x0 + (x1 - x0) * y0 / (y0 - y1)
    })
}
