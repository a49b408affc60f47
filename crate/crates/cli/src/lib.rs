//! Configuration-driven experiment runner for the `skewreg-core` library.
//!
//! A run reads one TOML config, executes the named experiment, and writes a
//! machine-readable table, a human summary and field snapshots.

// Parameter guards are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod sweep;

pub use config::{ExperimentConfig, Kind};
pub use error::CliError;
pub use report::Report;

use std::path::{Path, PathBuf};

/// Runs the configured experiment and returns its report without writing it.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    use experiments as x;
    match cfg.experiment {
        Kind::Gauge => x::gauge(cfg),
        Kind::Hodge => x::hodge(cfg),
        Kind::Wente => x::wente(cfg),
        Kind::HardyBmo => x::hardy_bmo(cfg),
        Kind::System => x::system(cfg),
        Kind::HSurface => x::h_surface(cfg),
        Kind::Morrey => x::morrey(cfg),
        Kind::Boundary => x::boundary(cfg),
        Kind::Sweep => sweep::sweep(cfg),
    }
}

/// Runs the experiment and writes its files into `out`.
pub fn run_to(cfg: &ExperimentConfig, out: &Path) -> Result<(Report, Vec<PathBuf>), CliError> {
    let rep = run(cfg)?;
    let files = rep.write(out)?;
    Ok((rep, files))
}
