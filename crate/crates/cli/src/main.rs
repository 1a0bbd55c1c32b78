use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cvmdi_cli::config::{Overrides, SweepConfig};
use cvmdi_cli::csv::fmt_f64;
use cvmdi_cli::{cutoffs, figure_preset, run_sweep, validate, write_csv, BlockSize};
use cvmdi_core::{
    asymptotic_report, key_length, loss_db_to_transmittance, Attack, ChannelScenario, D0Policy, Direction,
    FiniteSizeParams, Reconciliation, SecurityBudget, TailModel,
};

/// Composable finite-size key rates for squeezed-state CV-MDI QKD.
#[derive(Debug, Parser)]
#[command(name = "cvmdi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sweep described by a TOML configuration and write its CSV.
    Sweep {
        config: PathBuf,
        /// Output CSV (defaults to the config's output.path, then stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Reproduce the data of a published figure (fig2 ... fig9).
    Figure {
        name: String,
        /// Directory for <name>.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-check the analytic model against Monte Carlo sampling.
    ValidateMc {
        config: PathBuf,
        /// Samples per channel point (defaults to the config's mc.samples).
        #[arg(long)]
        samples: Option<usize>,
        /// Directory for per-point sample dumps.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a single point and print every term of the key length.
    Point(PointArgs),
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// Force p_alpha = 0 for every profile.
    #[arg(long)]
    trusted_tail: bool,
    /// Threshold policy: expectation | margin[:z] | fixed:<d0> | scaled:<factor>.
    #[arg(long, value_parser = parse_d0)]
    d0: Option<D0Policy>,
    #[arg(long)]
    eps_s: Option<f64>,
    #[arg(long)]
    eps_c: Option<f64>,
    #[arg(long)]
    p_pass: Option<f64>,
    #[arg(long)]
    k_check: Option<u64>,
    /// Worker threads (machine default when omitted).
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed of the Monte Carlo streams.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            trusted_tail: self.trusted_tail,
            d0: self.d0,
            eps_s: self.eps_s,
            eps_c: self.eps_c,
            p_pass: self.p_pass,
            k_check: self.k_check,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RecArg {
    #[value(name = "DR", alias = "dr")]
    Dr,
    #[value(name = "RR", alias = "rr")]
    Rr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AttackArg {
    Independent,
    Correlated,
}

#[derive(Debug, Args)]
struct PointArgs {
    /// Loss of Alice's leg in dB (Bob's leg is lossless unless --t2 is given).
    #[arg(long, conflicts_with = "t1")]
    loss_db: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t2: f64,
    #[arg(long, default_value_t = 0.002)]
    eps1: f64,
    #[arg(long, default_value_t = 0.002)]
    eps2: f64,
    #[arg(long, default_value_t = 1e5)]
    v_a: f64,
    #[arg(long, default_value_t = 1e5)]
    v_b: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, value_enum, default_value = "DR")]
    reconciliation: RecArg,
    #[arg(long, value_enum, default_value = "independent")]
    attack: AttackArg,
    /// Block size N, or "inf" for the asymptotic rate.
    #[arg(long, default_value = "1e12", value_parser = parse_block)]
    block: BlockSize,
    #[arg(long, default_value_t = 52.0)]
    alpha: f64,
    #[arg(long, default_value_t = 13)]
    bits: u32,
    #[arg(long, default_value_t = 0.1)]
    k_pe_ratio: f64,
    #[command(flatten)]
    common: Common,
}

fn parse_d0(s: &str) -> Result<D0Policy, String> {
    s.parse().map_err(|e: cvmdi_core::Error| e.to_string())
}

fn parse_block(s: &str) -> Result<BlockSize, String> {
    s.parse()
}

fn open_out(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn report_cutoffs(result: &cvmdi_cli::SweepResult) {
    for c in cutoffs(&result.rows) {
        let at = match (c.loss_db, c.positive_anywhere) {
            (Some(l), _) => format!("{l:.3} dB"),
            (None, true) => "beyond the sweep range".into(),
            (None, false) => "no positive key".into(),
        };
        eprintln!("  {} {:?} {} N={}: cutoff {}", c.profile, c.reconciliation, c.attack.tag(), c.block, at);
    }
}

fn sweep_to(cfg: &SweepConfig, out: Option<&Path>, workers: Option<usize>) -> anyhow::Result<()> {
    let result = run_sweep(cfg, workers)?;
    match out {
        Some(path) => {
            let mut w = open_out(path)?;
            write_csv(&mut w, cfg, &result.rows)?;
            w.flush()?;
            eprintln!("{}: wrote {} rows to {}", cfg.name, result.rows.len(), path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_csv(&mut w, cfg, &result.rows)?;
            w.flush()?;
        }
    }
    report_cutoffs(&result);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Sweep { config, out, common } => {
            let mut cfg = SweepConfig::load(&config)?;
            common.overrides().apply(&mut cfg)?;
            let out = out.or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
            sweep_to(&cfg, out.as_deref(), common.workers)?;
        }
        Command::Figure { name, out, common } => {
            let mut cfg = figure_preset(&name)?;
            common.overrides().apply(&mut cfg)?;
            sweep_to(&cfg, Some(&out.join(format!("{name}.csv"))), common.workers)?;
        }
        Command::ValidateMc {
            config,
            samples,
            dump,
            out,
            common,
        } => {
            let mut cfg = SweepConfig::load(&config)?;
            common.overrides().apply(&mut cfg)?;
            let samples = samples.unwrap_or(cfg.mc.samples);
            let rows = validate::validate_mc(&cfg, samples, dump.as_deref(), common.workers)?;
            match out {
                Some(path) => {
                    let mut w = open_out(&path)?;
                    validate::write_mc_csv(&mut w, &rows)?;
                    w.flush()?;
                }
                None => validate::write_mc_csv(&mut io::stdout().lock(), &rows)?,
            }
            let failed = rows.iter().filter(|r| !r.pass).count();
            eprintln!("{}: {} of {} points passed", cfg.name, rows.len() - failed, rows.len());
            return Ok(failed == 0);
        }
        Command::Point(args) => point(args)?,
    }
    Ok(true)
}

fn point(a: PointArgs) -> anyhow::Result<()> {
    let t1 = match (a.loss_db, a.t1) {
        (Some(l), _) => loss_db_to_transmittance(l)?,
        (None, Some(t)) => t,
        (None, None) => anyhow::bail!("one of --loss-db or --t1 is required"),
    };
    let attack = match a.attack {
        AttackArg::Independent => Attack::Independent,
        AttackArg::Correlated => Attack::CorrelatedMaximal,
    };
    let scenario = ChannelScenario::new(t1, a.t2, a.eps1, a.eps2, a.v_a, a.v_b)?.with_attack(attack);
    let direction = match a.reconciliation {
        RecArg::Dr => Direction::Direct,
        RecArg::Rr => Direction::Reverse,
    };
    let rec = Reconciliation::new(direction, a.beta)?;
    let adc = cvmdi_core::AdcSpec::new(a.alpha, a.bits)?;
    let defaults = SecurityBudget::default();
    let budget = SecurityBudget::new(
        a.common.eps_s.unwrap_or(defaults.eps_s),
        a.common.eps_c.unwrap_or(defaults.eps_c),
        a.common.p_pass.unwrap_or(defaults.p_pass),
        if a.common.trusted_tail { TailModel::Trusted } else { TailModel::Gaussian },
    )?;
    let d0 = a.common.d0.unwrap_or_default();

    let mut out = io::stdout().lock();
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}");
    kv("T1", fmt_f64(scenario.t1))?;
    kv("T2", fmt_f64(scenario.t2))?;
    kv("reconciliation", direction.to_string())?;
    kv("beta", fmt_f64(a.beta))?;
    kv("delta", fmt_f64(adc.delta()))?;
    kv("eps_total", fmt_f64(budget.eps_total()?))?;
    kv("tail_model", format!("{:?}", budget.tail))?;
    kv("d0_policy", d0.to_string())?;
    kv("eps_prime_reading", "eps' = eps_s / (4 p_pass) - 2 f(p_alpha, n) / sqrt(p_pass), f = sqrt(2 (1 - (1 - p_alpha)^n))".into())?;
    match a.block {
        BlockSize::Finite(n_total) => {
            let fsp = FiniteSizeParams::with_ratio(n_total, a.k_pe_ratio, a.common.k_check.unwrap_or(0), d0)?;
            let r = key_length(&scenario, &adc, &budget, &fsp, &rec)?;
            let c = &r.channel;
            for (k, v) in [
                ("T", c.t),
                ("e", c.e),
                ("g", c.g),
                ("V_B_prime", c.v_b_prime),
                ("H_A", c.h_a),
                ("H_B", c.h_b),
                ("I", c.mutual_information),
                ("expected_distance", c.distance.mean),
                ("p_alpha", r.p_alpha),
                ("eps_prime", r.eps_prime),
                ("mu", r.mu),
                ("d0", r.d0),
                ("term_hmin", r.term_hmin),
                ("term_hmax", r.term_hmax),
                ("term_leak", r.term_leak),
                ("term_eps", r.term_eps),
                ("ell", r.ell),
                ("rate_per_sifted", r.rate_per_sifted),
                ("rate_per_pulse", r.rate_per_pulse),
            ] {
                kv(k, fmt_f64(v))?;
            }
            kv("N", r.n_total.to_string())?;
            kv("n", r.n.to_string())?;
            kv("k_pe", r.k_pe.to_string())?;
            kv("aborted", r.aborted.to_string())?;
        }
        BlockSize::Infinite => {
            let r = asymptotic_report(&scenario, &adc, &budget, &rec, &d0)?;
            let c = &r.channel;
            for (k, v) in [
                ("T", c.t),
                ("e", c.e),
                ("g", c.g),
                ("V_B_prime", c.v_b_prime),
                ("H_A", c.h_a),
                ("H_B", c.h_b),
                ("I", c.mutual_information),
                ("d0", r.d0),
                ("hmin_per_symbol", r.hmin),
                ("hmax_per_symbol", r.hmax),
                ("leak_per_symbol", r.leak),
                ("rate_per_symbol", r.rate),
            ] {
                kv(k, fmt_f64(v))?;
            }
            kv("N", "inf".into())?;
            kv("aborted", (r.rate.is_nan() || r.rate <= 0.0).to_string())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
