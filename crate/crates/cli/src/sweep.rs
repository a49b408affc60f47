//! Parameter sweeps. Entries run on the rayon pool; the report is assembled on
//! the calling thread in input order.

use crate::config::{ExperimentConfig, SweepTarget};
use crate::error::CliError;
use crate::experiments::{gauge_case, probe_source, record_probe, PROBE_COLUMNS};
use crate::report::{Cell, Report};
use rayon::prelude::*;
use skewreg_core::gauge::{gauge_structure, GaugeConfig, GaugeWorkspace, SkewPotential};
use skewreg_core::morrey::{boundary_probe, BoundaryProbeReport};
use skewreg_core::random::{random_skew_potential, rng};
use skewreg_core::{build_grid, Disc, DiscGrid};
use std::sync::Arc;

pub fn sweep(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let values = &cfg.sweep.values;
    if values.is_empty() {
        return Err(CliError::Config("sweep.values is empty: nothing to run".into()));
    }
    match cfg.sweep.target {
        SweepTarget::BoundaryDelta => delta_sweep(cfg),
        SweepTarget::GaugeAmplitude => amplitude_sweep(cfg),
    }
}

fn delta_sweep(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let src = probe_source(cfg)?;
    let theta1 = cfg.boundary.theta1;
    let parts: Vec<BoundaryProbeReport> = cfg
        .sweep
        .values
        .par_iter()
        .map(|&d| boundary_probe(&src.u, &src.psi, theta1, &[d]))
        .collect::<Result<_, _>>()?;
    let merged = BoundaryProbeReport {
        theta1,
        entries: parts.into_iter().flat_map(|p| p.entries).collect(),
    };
    let mut rep = Report::new(cfg, PROBE_COLUMNS);
    record_probe(&mut rep, &merged, cfg.tolerances.probe_noise);
    Ok(rep)
}

const AMPLITUDE_COLUMNS: &[&str] = &[
    "omega_norm",
    "stage",
    "accepted",
    "relative_residual",
    "rotation_defect",
    "status",
];

struct Probe {
    norm: f64,
    accepted: bool,
    relative_residual: Option<f64>,
    rotation_defect: Option<f64>,
    status: String,
}

/// The potential at norm `t` is the same random direction rescaled, so the sweep
/// moves along one ray.
fn amplitude_probe(
    g: &Arc<DiscGrid>,
    ws: &GaugeWorkspace,
    cfg: &ExperimentConfig,
    gcfg: &GaugeConfig,
    t: f64,
) -> Result<Probe, CliError> {
    let om = random_skew_potential(g, cfg.m, &Disc::unit(), t, &mut rng(cfg.seed))?;
    let case = gauge_case(ws, &SkewPotential::new(om)?, gcfg);
    Ok(match &case.pair {
        Ok(gp) => Probe {
            norm: t,
            accepted: true,
            relative_residual: Some(gp.relative_residual()),
            rotation_defect: Some(gauge_structure(gp)?.rotation_defect),
            status: "ok".into(),
        },
        Err(e) => Probe {
            norm: t,
            accepted: false,
            relative_residual: None,
            rotation_defect: None,
            status: crate::experiments::error_tag(e).into(),
        },
    })
}

fn amplitude_sweep(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let g = Arc::new(build_grid(cfg.resolution)?);
    let ws = GaugeWorkspace::new(&g, &Disc::unit(), cfg.m)?;
    let gcfg = GaugeConfig {
        epsilon_threshold: cfg.gauge.epsilon_threshold,
        residual_tol: cfg.gauge.residual_tol,
        ..GaugeConfig::default()
    };
    let mut values = cfg.sweep.values.clone();
    values.sort_by(f64::total_cmp);
    let mut probes: Vec<(&str, Probe)> = values
        .par_iter()
        .map(|&t| amplitude_probe(&g, &ws, cfg, &gcfg, t).map(|p| ("grid", p)))
        .collect::<Result<_, _>>()?;

    // Bisect between the largest accepted norm below the first failure and that failure.
    let first_fail = probes.iter().position(|(_, p)| !p.accepted);
    let mut threshold = None;
    if let Some(i) = first_fail {
        let mut hi = probes[i].1.norm;
        let mut lo = if i == 0 { 0.0 } else { probes[i - 1].1.norm };
        for _ in 0..cfg.sweep.bisection_steps {
            let mid = 0.5 * (lo + hi);
            let p = amplitude_probe(&g, &ws, cfg, &gcfg, mid)?;
            if p.accepted {
                lo = mid;
            } else {
                hi = mid;
            }
            probes.push(("bisection", p));
        }
        threshold = Some(0.5 * (lo + hi));
    }

    let mut rep = Report::new(cfg, AMPLITUDE_COLUMNS);
    let mut worst_rot: f64 = 0.0;
    for (stage, p) in &probes {
        worst_rot = worst_rot.max(p.rotation_defect.unwrap_or(0.0));
        rep.row(vec![
            p.norm.into(),
            (*stage).into(),
            p.accepted.into(),
            p.relative_residual.into(),
            p.rotation_defect.into(),
            Cell::Text(p.status.clone()),
        ]);
    }
    rep.metric("empirical_threshold", threshold);
    rep.metric("configured_threshold", cfg.gauge.epsilon_threshold);
    rep.check(
        "accepted_rotation",
        worst_rot <= cfg.tolerances.rotation,
        format!("max ‖PᵀP − I‖ over accepted decompositions = {worst_rot:.3e}"),
    );
    Ok(rep)
}
