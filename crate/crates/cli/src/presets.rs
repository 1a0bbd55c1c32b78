//! Built-in sweeps reproducing the published figures.
//!
//! All presets share `d = 13`, `alpha = 52`, `eps1 = eps2 = 0.002`,
//! `eps_s = eps_c = 1e-21` and `k_pe = N / 10`. The ideal profile (`V = 1e5`, `beta = 1`)
//! runs with the trusted-tail override because its Gaussian tail probability makes the
//! budget infeasible; the practical profile (`V = 5.04`, `beta = 0.969`) uses the
//! Gaussian tail model.

use anyhow::anyhow;

use crate::config::{
    AdcConfig, AttackSetting, Axes, BlockSize, CommonVarianceSetting, FiniteSizeConfig, GainName,
    GainSetting, Geometry, LossAxis, McConfig, OutputConfig, PlobReference, Profile,
    ReconciliationSetting, ScenarioTemplate, SecurityConfig, SweepConfig,
};

pub const PRESETS: [&str; 8] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

pub fn ideal_profile() -> Profile {
    Profile {
        label: "ideal".into(),
        v_a: 1e5,
        v_b: 1e5,
        beta: 1.0,
        trusted_tail: true,
    }
}

pub fn practical_profile() -> Profile {
    Profile {
        label: "practical".into(),
        v_a: 5.04,
        v_b: 5.04,
        beta: 0.969,
        trusted_tail: false,
    }
}

fn paper_blocks() -> Vec<BlockSize> {
    vec![
        BlockSize::Finite(10_000_000_000),
        BlockSize::Finite(100_000_000_000),
        BlockSize::Finite(1_000_000_000_000),
        BlockSize::Infinite,
    ]
}

/// `1e6, 2e6, 5e6, 1e7, ..., 1e13`.
fn block_scan() -> Vec<BlockSize> {
    let mut v = Vec::new();
    for exp in 6..13 {
        let base = 10u64.pow(exp);
        v.extend([base, 2 * base, 5 * base].map(BlockSize::Finite));
    }
    v.push(BlockSize::Finite(10u64.pow(13)));
    v
}

fn range(start: f64, stop: f64, step: f64) -> LossAxis {
    LossAxis::Range { start, stop, step }
}

fn base(name: &str, description: &str, geometry: Geometry, profiles: Vec<Profile>, axes: Axes) -> SweepConfig {
    SweepConfig {
        name: name.into(),
        description: description.into(),
        scenario: ScenarioTemplate {
            geometry,
            eps1: 0.002,
            eps2: 0.002,
            gain: GainSetting::Named(GainName::Optimal),
            common_variance: CommonVarianceSetting::Max,
        },
        profiles,
        adc: AdcConfig::default(),
        security: SecurityConfig::default(),
        finite_size: FiniteSizeConfig::default(),
        axes,
        mc: McConfig::default(),
        output: OutputConfig {
            path: Some(format!("{name}.csv")),
            plob_overlay: false,
            plob_reference: PlobReference::T1,
        },
    }
}

fn axes(loss_db: LossAxis, block_sizes: Vec<BlockSize>, reconciliation: Vec<ReconciliationSetting>) -> Axes {
    Axes {
        loss_db,
        block_sizes,
        reconciliation,
        attack: vec![AttackSetting::Independent],
    }
}

/// Configuration of a named figure preset.
pub fn figure_preset(name: &str) -> anyhow::Result<SweepConfig> {
    use ReconciliationSetting::{DR, RR};
    let cfg = match name {
        "fig2" => base(
            name,
            "Direct reconciliation, ideal modulation, asymmetric relay; rate vs loss",
            Geometry::Asymmetric,
            vec![ideal_profile()],
            axes(range(0.0, 3.0, 0.05), paper_blocks(), vec![DR]),
        ),
        "fig3" => base(
            name,
            "Direct reconciliation, practical modulation, asymmetric relay; rate vs loss",
            Geometry::Asymmetric,
            vec![practical_profile()],
            axes(range(0.0, 1.0, 0.01), paper_blocks(), vec![DR]),
        ),
        "fig4" => base(
            name,
            "Direct reconciliation, rate vs block size at 0.2, 0.4 and 0.5 dB",
            Geometry::Asymmetric,
            vec![ideal_profile(), practical_profile()],
            axes(LossAxis::List(vec![0.2, 0.4, 0.5]), block_scan(), vec![DR]),
        ),
        "fig5" => base(
            name,
            "Reverse reconciliation, ideal modulation, asymmetric relay; rate vs loss",
            Geometry::Asymmetric,
            vec![ideal_profile()],
            axes(range(0.0, 7.0, 0.1), paper_blocks(), vec![RR]),
        ),
        "fig6" => base(
            name,
            "Reverse reconciliation, practical modulation, asymmetric relay; rate vs loss",
            Geometry::Asymmetric,
            vec![practical_profile()],
            axes(range(0.0, 4.0, 0.05), paper_blocks(), vec![RR]),
        ),
        "fig7" => base(
            name,
            "Reverse reconciliation, rate vs block size at 1, 2 and 3 dB",
            Geometry::Asymmetric,
            vec![ideal_profile(), practical_profile()],
            axes(LossAxis::List(vec![1.0, 2.0, 3.0]), block_scan(), vec![RR]),
        ),
        "fig8" => {
            let mut c = base(
                name,
                "Symmetric relay, independent vs correlated two-mode attack, asymptotic",
                Geometry::Symmetric,
                vec![ideal_profile(), practical_profile()],
                axes(range(0.0, 3.0, 0.05), vec![BlockSize::Infinite], vec![DR, RR]),
            );
            c.axes.attack = vec![AttackSetting::Independent, AttackSetting::Correlated];
            c
        }
        "fig9" => {
            let mut c = base(
                name,
                "Asymmetric relay, ideal modulation, asymptotic DR and RR against the PLOB bound",
                Geometry::Asymmetric,
                vec![ideal_profile()],
                axes(range(0.1, 7.0, 0.1), vec![BlockSize::Infinite], vec![DR, RR]),
            );
            c.output.plob_overlay = true;
            c
        }
        other => {
            return Err(anyhow!(
                "unknown figure preset '{other}'; valid presets: {}",
                PRESETS.join(", ")
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
