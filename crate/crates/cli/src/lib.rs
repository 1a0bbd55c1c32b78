//! Configuration-driven sweeps, figure presets and Monte Carlo validation on top of
//! [`cvmdi_core`].

// Negated comparisons such as `!(x > 0.0)` are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod presets;
pub mod sweep;
pub mod validate;

pub use config::{BlockSize, Overrides, SweepConfig};
pub use presets::{figure_preset, PRESETS};
pub use sweep::{csv_string, cutoffs, run_sweep, write_csv, Cutoff, Row, Status, SweepResult};
pub use validate::validate_mc;
