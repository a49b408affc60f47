use super::{grid, observed_order};
use crate::config::{ExperimentConfig, HSurfaceParams, SurfaceBoundary, SystemData, SystemOmega};
use crate::error::CliError;
use crate::report::{Cell, Report};
use skewreg_core::gauge::{decompose, manufactured_omega, GaugeConfig, SkewPotential};
use skewreg_core::random::{random_skew_potential, rng};
use skewreg_core::systems::{
    constant_curvature, gauged_divergence_residual, interior_max_error, manufactured_system, solve_h_surface,
    solve_linear_system, stereographic, system_residual, trace_of, BoundaryTrace, HSurfaceProblem, PicardConfig,
    SystemProblem,
};
use skewreg_core::{Disc, DiscGrid, Field, Shape, Structure};
use std::sync::Arc;

fn system_omega(cfg: &ExperimentConfig, g: &Arc<DiscGrid>) -> Result<SkewPotential, CliError> {
    let m = cfg.m;
    let p = &cfg.system;
    Ok(match p.omega {
        SystemOmega::Zero => SkewPotential::new(Field::zeros(g.clone(), Shape::matrix_form(m), Structure::Skew))?,
        SystemOmega::Manufactured => manufactured_omega(g, m, p.norm)?,
        SystemOmega::Random => {
            SkewPotential::new(random_skew_potential(g, m, &Disc::unit(), p.norm, &mut rng(cfg.seed))?)?
        }
    })
}

pub fn system(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.system;
    let resolutions = cfg.resolutions(&p.resolutions);
    let mut rep = Report::new(
        cfg,
        &[
            "resolution",
            "omega_norm",
            "residual",
            "relative_residual",
            "max_error",
            "gauged_residual",
        ],
    );
    let mut errors = Vec::new();
    let mut worst_rel: f64 = 0.0;
    for &n in &resolutions {
        let g = grid(n)?;
        let omega = system_omega(cfg, &g)?;
        let omega_norm = omega.l2_on(&Disc::unit());
        let (prob, exact) = match p.data {
            SystemData::Manufactured => {
                let ms = manufactured_system(&g, omega)?;
                (ms.problem, Some(ms.exact))
            }
            SystemData::Fourier => {
                let e = Field::from_fn(g.clone(), Shape::vector(cfg.m), Structure::General, |_| p.e.clone())?;
                let psi = BoundaryTrace::fourier(&g, &p.psi)?;
                (SystemProblem::new(Some(omega), e, cfg.s, psi)?, None)
            }
        };
        let u = solve_linear_system(&prob)?;
        let om = prob.omega.as_ref().map(|o| o.field());
        let residual = system_residual(&u, om, &prob.e)?;
        let scale = skewreg_core::measure::l2_norm(&prob.e).max(f64::MIN_POSITIVE);
        let rel = residual / scale;
        worst_rel = worst_rel.max(rel);
        let err = exact.as_ref().map(|x| interior_max_error(&u, x, 0.0));
        let gauged = if p.gauged {
            let gp = decompose(
                prob.omega.as_ref().expect("system potential"),
                &Disc::unit(),
                &GaugeConfig::default(),
            )?;
            Some(gauged_divergence_residual(&u, &gp, &prob.e)?)
        } else {
            None
        };
        if let Some(e) = err {
            errors.push((n, e));
            rep.metric(format!("max_error_{n}"), e);
        }
        if let Some(gr) = gauged {
            rep.metric(format!("gauged_residual_{n}"), gr);
        }
        rep.row(vec![
            n.into(),
            omega_norm.into(),
            residual.into(),
            rel.into(),
            err.into(),
            gauged.into(),
        ]);
        if Some(&n) == resolutions.last() {
            rep.snapshot("u", u);
        }
    }
    rep.metric("max_relative_residual", worst_rel);
    rep.check(
        "solve",
        worst_rel <= 1e-8,
        format!("discrete residual relative to ‖e‖ at most {worst_rel:.3e}"),
    );
    if let [(n0, e0), (n1, e1)] = errors[..] {
        let order = observed_order(e0, e1, n0, n1);
        rep.metric("error_order", order);
        rep.check(
            "error_order",
            order >= cfg.tolerances.system_order,
            format!("interior max error {e0:.3e} → {e1:.3e}, order {order:.3}"),
        );
    }
    Ok(rep)
}

/// Trace and, when known, the exact solution for the configured boundary.
fn surface_data(g: &Arc<DiscGrid>, p: &HSurfaceParams) -> Result<(BoundaryTrace, Option<Field>), CliError> {
    let c = match p.boundary {
        SurfaceBoundary::Sphere => 1.0,
        SurfaceBoundary::Cap => p.cap_scale,
        SurfaceBoundary::Fourier => return Ok((BoundaryTrace::fourier(g, &p.psi)?, None)),
    };
    let map = move |x: [f64; 2]| stereographic([c * x[0], c * x[1]]).to_vec();
    let exact = Field::from_fn(g.clone(), Shape::vector(3), Structure::General, map)?;
    Ok((trace_of(g, 3, map)?, Some(exact)))
}

/// One Picard solve of the H-surface problem at resolution `n`.
#[derive(Clone, Debug)]
pub struct SurfaceRun {
    pub resolution: usize,
    pub iterations: usize,
    pub converged: bool,
    pub last_increment: f64,
    pub residual: Option<f64>,
    pub error: Option<f64>,
    pub status: &'static str,
    pub u: Option<Field>,
}

pub fn surface_run(n: usize, p: &HSurfaceParams) -> Result<SurfaceRun, CliError> {
    let g = grid(n)?;
    let (psi, exact) = surface_data(&g, p)?;
    let prob = HSurfaceProblem {
        h: constant_curvature(p.h),
        psi,
        picard: PicardConfig {
            max_iterations: p.max_iterations,
            damping: p.damping,
            tol: p.tol,
        },
    };
    match solve_h_surface(&g, &prob) {
        Ok(sol) => Ok(SurfaceRun {
            resolution: n,
            iterations: sol.iterations,
            converged: true,
            last_increment: sol.increments.last().copied().unwrap_or(0.0),
            residual: Some(sol.residual),
            error: exact.as_ref().map(|x| interior_max_error(&sol.u, x, 0.0)),
            status: "converged",
            u: Some(sol.u),
        }),
        Err(skewreg_core::Error::NonConvergence {
            iterations,
            last_increment,
            ..
        }) => Ok(SurfaceRun {
            resolution: n,
            iterations,
            converged: false,
            last_increment,
            residual: None,
            error: None,
            status: "non-convergence",
            u: None,
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn h_surface(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.h_surface;
    let resolutions = cfg.resolutions(&p.resolutions);
    let mut rep = Report::new(
        cfg,
        &[
            "resolution",
            "iterations",
            "last_increment",
            "residual",
            "max_error",
            "status",
        ],
    );
    let mut runs = Vec::new();
    for &n in &resolutions {
        let run = surface_run(n, p)?;
        rep.row(vec![
            n.into(),
            run.iterations.into(),
            run.last_increment.into(),
            run.residual.into(),
            run.error.into(),
            Cell::Text(run.status.into()),
        ]);
        if let Some(e) = run.error {
            rep.metric(format!("max_error_{n}"), e);
        }
        runs.push(run);
    }
    let stuck: Vec<String> = runs
        .iter()
        .filter(|r| !r.converged)
        .map(|r| {
            format!(
                "resolution {} stopped after {} iterations (increment {:.3e})",
                r.resolution, r.iterations, r.last_increment
            )
        })
        .collect();
    let most = runs.iter().map(|r| r.iterations).max().unwrap_or(0);
    rep.metric("max_iterations_used", most);
    rep.check(
        "converged",
        stuck.is_empty(),
        if stuck.is_empty() {
            format!("Picard converged in at most {most} iterations")
        } else {
            stuck.join("; ")
        },
    );
    let has_exact = p.boundary != SurfaceBoundary::Fourier;
    if has_exact && runs.len() == 2 {
        match (runs[0].error, runs[1].error) {
            (Some(e0), Some(e1)) => {
                let order = observed_order(e0, e1, runs[0].resolution, runs[1].resolution);
                rep.metric("error_order", order);
                rep.check(
                    "error_order",
                    order >= cfg.tolerances.h_surface_order,
                    format!("interior max error {e0:.3e} → {e1:.3e}, order {order:.3}"),
                );
            }
            _ => rep.check("error_order", false, "no order: a resolution did not converge"),
        }
    }
    if let Some(u) = runs.pop().and_then(|r| r.u) {
        rep.snapshot("u", u);
    }
    Ok(rep)
}
