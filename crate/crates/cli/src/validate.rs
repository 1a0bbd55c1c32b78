//! Monte Carlo validation of the analytic quantities at every distinct channel point
//! of a sweep.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use cvmdi_core::mc::{empirical_distance_with_se, write_batch, Quadrature};
use cvmdi_core::{
    discrete_entropy_exact, discretize, distance_stats, empirical_entropy, equivalent_cm, estimate_rescale,
    p_alpha_gaussian, sample_correlated, AdcSpec,
};
use rayon::prelude::*;

use crate::config::{AttackSetting, SweepConfig};
use crate::csv::{escape, fmt_f64};
use crate::sweep::{grid, scenario_for};

/// Standard errors allowed for moment and distance checks.
pub const Z_MAX: f64 = 4.0;
/// Relative tolerance of the rescale-factor estimate.
pub const RESCALE_TOL: f64 = 0.01;
/// Entropy tolerance in bits, before the plug-in bias allowance.
pub const ENTROPY_TOL: f64 = 0.01;
/// Tail probability above which a point is flagged as overflowing the ADC range.
pub const SATURATION_WARN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub profile: String,
    pub attack: AttackSetting,
    pub loss_db: f64,
    pub samples: usize,
    pub seed: u64,
    pub t: f64,
    pub e: f64,
    pub max_moment_z: f64,
    pub distance: f64,
    pub distance_se: f64,
    pub expected_distance: f64,
    pub distance_z: f64,
    pub rescale: f64,
    pub rescale_expected: f64,
    pub entropy_plugin: f64,
    pub entropy_exact: f64,
    /// Allowed `|plugin - exact|`: `ENTROPY_TOL` plus the plug-in bias bound
    /// `(bins - 1) / (2 count ln 2)`.
    pub entropy_tol: f64,
    pub pass: bool,
    pub note: String,
}

/// Runs the oracle at each distinct (profile, attack, loss) point of the sweep grid.
///
/// When `dump` is set, every batch is written to `dump/batch_<k>.csv`.
pub fn validate_mc(cfg: &SweepConfig, samples: usize, dump: Option<&Path>, workers: Option<usize>) -> anyhow::Result<Vec<McRow>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for p in grid(cfg) {
        let key = (p.profile, p.attack, p.loss_db.to_bits());
        if !points.iter().any(|q: &crate::sweep::GridPoint| (q.profile, q.attack, q.loss_db.to_bits()) == key) {
            points.push(p);
        }
    }
    let adc = AdcSpec::new(cfg.adc.alpha, cfg.adc.bits)?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let run = || {
        points
            .par_iter()
            .enumerate()
            .map(|(k, p)| -> anyhow::Result<McRow> {
                let seed = cfg.mc.seed.wrapping_add(k as u64);
                let profile = &cfg.profiles[p.profile];
                let mut row = McRow {
                    profile: profile.label.clone(),
                    attack: p.attack,
                    loss_db: p.loss_db,
                    samples,
                    seed,
                    t: f64::NAN,
                    e: f64::NAN,
                    max_moment_z: f64::NAN,
                    distance: f64::NAN,
                    distance_se: f64::NAN,
                    expected_distance: f64::NAN,
                    distance_z: f64::NAN,
                    rescale: f64::NAN,
                    rescale_expected: f64::NAN,
                    entropy_plugin: f64::NAN,
                    entropy_exact: f64::NAN,
                    entropy_tol: f64::NAN,
                    pass: false,
                    note: String::new(),
                };
                let ch = match scenario_for(cfg, p).and_then(|s| s.equivalent_channel()) {
                    Ok(ch) => ch,
                    Err(e) => {
                        row.note = e.to_string();
                        return Ok(row);
                    }
                };
                row.t = ch.t;
                row.e = ch.e;
                let cm = equivalent_cm(profile.v_a, ch.t, ch.e)?;
                let stats = distance_stats(&cm, &adc)?;
                let batch = sample_correlated(&cm, samples, seed, Quadrature::X)?;
                row.max_moment_z = batch.check_moments(&cm)?.max_abs_z();
                row.rescale = estimate_rescale(&batch.x_a, &batch.x_b)?;
                row.rescale_expected = stats.rescale;
                let d = discretize(&batch.rescale_alice(stats.rescale), &adc);
                let (dist, se) = empirical_distance_with_se(&d.i_a, &d.i_b)?;
                row.distance = dist;
                row.distance_se = se;
                row.expected_distance = stats.mean;
                row.distance_z = if se > 0.0 { (dist - stats.mean) / se } else { 0.0 };
                let raw = discretize(&batch, &adc);
                row.entropy_plugin = empirical_entropy(&raw.i_b)?;
                row.entropy_exact = discrete_entropy_exact(cm.get(2, 2).sqrt(), &adc)?;
                let occupied = {
                    let mut v = raw.i_b.clone();
                    v.sort_unstable();
                    v.dedup();
                    v.len()
                };
                row.entropy_tol = ENTROPY_TOL + (occupied as f64 - 1.0) / (2.0 * samples as f64 * std::f64::consts::LN_2);
                row.pass = row.max_moment_z < Z_MAX
                    && row.distance_z.abs() < Z_MAX
                    && (row.rescale / row.rescale_expected - 1.0).abs() < RESCALE_TOL
                    && (row.entropy_plugin - row.entropy_exact).abs() < row.entropy_tol;
                let p_alpha = p_alpha_gaussian(adc.alpha(), cm.get(2, 2))?;
                if p_alpha > SATURATION_WARN {
                    row.note = format!(
                        "ADC saturation (p_alpha = {}): the unclipped distance model does not apply",
                        fmt_f64(p_alpha)
                    );
                }
                if let Some(dir) = dump {
                    let path = dir.join(format!("batch_{k}.csv"));
                    let mut f = std::io::BufWriter::new(
                        std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
                    );
                    write_batch(&mut f, &d, &cm, &adc)?;
                    f.flush()?;
                }
                Ok(row)
            })
            .collect::<anyhow::Result<Vec<_>>>()
    };
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?.install(run),
        None => run(),
    }
}

pub fn write_mc_csv<W: Write>(w: &mut W, rows: &[McRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "profile,attack,loss_db,samples,seed,T,e,max_moment_z,distance,distance_se,expected_distance,distance_z,\
         rescale,rescale_expected,entropy_plugin,entropy_exact,entropy_tol,pass,note"
    )?;
    for r in rows {
        let nums = [
            r.t,
            r.e,
            r.max_moment_z,
            r.distance,
            r.distance_se,
            r.expected_distance,
            r.distance_z,
            r.rescale,
            r.rescale_expected,
            r.entropy_plugin,
            r.entropy_exact,
            r.entropy_tol,
        ]
        .map(fmt_f64);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            escape(&r.profile),
            r.attack.tag(),
            fmt_f64(r.loss_db),
            r.samples,
            r.seed,
            nums.join(","),
            r.pass,
            escape(&r.note)
        )?;
    }
    Ok(())
}
