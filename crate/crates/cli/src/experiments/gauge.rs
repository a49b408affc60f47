use super::{grid, observed_order};
use crate::config::{ExperimentConfig, OmegaSource};
use crate::error::CliError;
use crate::report::{Cell, Report};
use rayon::prelude::*;
use skewreg_core::gauge::{
    audit_estimates, decompose_in, gauge_structure, manufactured_omega, GaugeConfig, GaugePair, GaugeWorkspace,
    SkewPotential,
};
use skewreg_core::random::{random_skew_potential, rng, SmoothRandom};
use skewreg_core::{Disc, DiscGrid, Field, Shape, Structure};
use std::sync::Arc;

const COLUMNS: &[&str] = &[
    "resolution",
    "case",
    "omega_norm",
    "residual",
    "relative_residual",
    "rotation_defect",
    "xi_skew",
    "xi_mean",
    "boundary_deviation",
    "ratio_w12",
    "ratio_w22",
    "halvings",
    "xi_error",
    "p_deviation",
    "status",
];

/// `Ω = ∇⊥β·J` with `J = [[0, −1], [1, 0]]`; returns `Ω` and `β` at the nodes.
pub fn abelian_omega(g: &Arc<DiscGrid>, amplitude: f64, seed: u64) -> Result<(SkewPotential, Vec<f64>), CliError> {
    let beta = SmoothRandom::new(&mut rng(seed), 5, 2.5);
    let sh = Shape::matrix_form(2);
    let mut data = vec![0.0; g.len() * sh.ncomp()];
    let mut b = Vec::with_capacity(g.len());
    for (k, node) in g.nodes().iter().enumerate() {
        let d = beta.gradient(node.x);
        let perp = [-amplitude * d[1], amplitude * d[0]];
        let o = &mut data[k * sh.ncomp()..(k + 1) * sh.ncomp()];
        for s in 0..2 {
            o[sh.index(0, 1, s)] = -perp[s];
            o[sh.index(1, 0, s)] = perp[s];
        }
        b.push(amplitude * beta.eval(node.x));
    }
    Ok((
        SkewPotential::new(Field::new(g.clone(), sh, Structure::Skew, data)?)?,
        b,
    ))
}

/// `(‖ξ − (β − mean β)J‖, ‖β‖, max|P − I|)` on the unit disc.
fn abelian_errors(gp: &GaugePair, beta: &[f64]) -> (f64, f64, f64) {
    let g = gp.p.grid();
    let nodes = g.nodes_in(&Disc::unit());
    let w = g.weights();
    let area: f64 = nodes.iter().map(|&k| w[k]).sum();
    let mean = nodes.iter().map(|&k| w[k] * beta[k]).sum::<f64>() / area;
    let (mut err, mut norm) = (0.0, 0.0);
    for &k in &nodes {
        let b = beta[k] - mean;
        let xi = gp.xi.at(k);
        // ξ = bJ: entries (0,1) = −b, (1,0) = b.
        let e = [xi[0], xi[1] + b, xi[2] - b, xi[3]];
        err += w[k] * e.iter().map(|v| v * v).sum::<f64>();
        norm += w[k] * beta[k] * beta[k];
    }
    let p_dev = (0..g.len())
        .flat_map(|k| {
            let p = gp.p.at(k);
            [p[0] - 1.0, p[1], p[2], p[3] - 1.0]
        })
        .fold(0.0, |a: f64, v| a.max(v.abs()));
    (err.sqrt(), norm.sqrt(), p_dev)
}

/// Outcome of one decomposition.
#[derive(Clone, Debug)]
pub struct GaugeCase {
    pub omega_norm: f64,
    pub pair: Result<GaugePair, skewreg_core::Error>,
    pub ratio_w12: f64,
    pub ratio_w22: f64,
}

pub fn gauge_case(ws: &GaugeWorkspace, omega: &SkewPotential, cfg: &GaugeConfig) -> GaugeCase {
    let omega_norm = omega.l2_on(&Disc::unit());
    let pair = decompose_in(ws, omega, cfg);
    let (ratio_w12, ratio_w22) = match &pair {
        Ok(gp) => audit_estimates(gp, omega).map_or((f64::NAN, f64::NAN), |a| (a.ratio_w12, a.ratio_w22)),
        Err(_) => (f64::NAN, f64::NAN),
    };
    GaugeCase {
        omega_norm,
        pair,
        ratio_w12,
        ratio_w22,
    }
}

fn gauge_config(cfg: &ExperimentConfig) -> GaugeConfig {
    GaugeConfig {
        epsilon_threshold: cfg.gauge.epsilon_threshold,
        residual_tol: cfg.gauge.residual_tol,
        ..GaugeConfig::default()
    }
}

pub fn gauge(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.gauge;
    let tol = &cfg.tolerances;
    let m = if p.omega == OmegaSource::Abelian { 2 } else { cfg.m };
    let gcfg = gauge_config(cfg);
    let resolutions = cfg.resolutions(&p.resolutions);
    let mut rep = Report::new(cfg, COLUMNS);
    // Per resolution: (relative residuals, max ratio_w12, all finite).
    let mut per_res = Vec::new();
    let (mut rot, mut skew, mut mean, mut bdry): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let (mut abel_xi, mut abel_p) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for (ri, &n) in resolutions.iter().enumerate() {
        let g = grid(n)?;
        let ws = GaugeWorkspace::new(&g, &Disc::unit(), m)?;
        let mut betas = Vec::new();
        let omegas: Vec<SkewPotential> = (0..p.cases)
            .map(|i| match p.omega {
                OmegaSource::Zero => Ok(SkewPotential::new(Field::zeros(
                    g.clone(),
                    Shape::matrix_form(m),
                    Structure::Skew,
                ))?),
                OmegaSource::Manufactured => Ok(manufactured_omega(&g, m, p.amplitude)?),
                OmegaSource::Random => {
                    let norm = if p.cases == 1 {
                        p.norm_max
                    } else {
                        p.norm_min + (p.norm_max - p.norm_min) * i as f64 / (p.cases - 1) as f64
                    };
                    let f = random_skew_potential(&g, m, &Disc::unit(), norm, &mut rng(cfg.seed + i as u64))?;
                    Ok(SkewPotential::new(f)?)
                }
                OmegaSource::Abelian => {
                    let (om, b) = abelian_omega(&g, p.amplitude, cfg.seed + i as u64)?;
                    betas.push(b);
                    Ok(om)
                }
            })
            .collect::<Result<_, CliError>>()?;
        let cases: Vec<GaugeCase> = omegas.par_iter().map(|om| gauge_case(&ws, om, &gcfg)).collect();
        let mut rels = Vec::new();
        let mut max_w12: f64 = 0.0;
        let mut finite = true;
        for (i, c) in cases.iter().enumerate() {
            match &c.pair {
                Ok(gp) => {
                    let st = gauge_structure(gp)?;
                    rot = rot.max(st.rotation_defect);
                    skew = skew.max(st.xi_skew);
                    mean = mean.max(st.xi_mean);
                    bdry = bdry.max(st.boundary_deviation);
                    let (xi_err, p_dev) = if p.omega == OmegaSource::Abelian {
                        let (e, b, d) = abelian_errors(gp, &betas[i]);
                        let rel = if b > 0.0 { e / b } else { e };
                        if ri + 1 == resolutions.len() {
                            abel_xi = abel_xi.max(rel);
                            abel_p = abel_p.max(d);
                        }
                        (Some(rel), Some(d))
                    } else {
                        (None, None)
                    };
                    rels.push(gp.relative_residual());
                    max_w12 = max_w12.max(c.ratio_w12);
                    finite &= c.ratio_w12.is_finite() && c.ratio_w22.is_finite();
                    rep.row(vec![
                        n.into(),
                        i.into(),
                        c.omega_norm.into(),
                        gp.residual.into(),
                        gp.relative_residual().into(),
                        st.rotation_defect.into(),
                        st.xi_skew.into(),
                        st.xi_mean.into(),
                        st.boundary_deviation.into(),
                        c.ratio_w12.into(),
                        c.ratio_w22.into(),
                        gp.halvings.into(),
                        xi_err.into(),
                        p_dev.into(),
                        "ok".into(),
                    ]);
                    if ri + 1 == resolutions.len() && i == 0 {
                        rep.snapshot("p", gp.p.clone());
                        rep.snapshot("xi", gp.xi.clone());
                    }
                }
                Err(e) => {
                    failures.push(format!("resolution {n} case {i}: {e}"));
                    let mut row: Vec<Cell> = vec![n.into(), i.into(), c.omega_norm.into()];
                    row.extend((0..11).map(|_| Cell::Text("-".into())));
                    row.push(Cell::Text(error_tag(e).into()));
                    rep.row(row);
                }
            }
        }
        per_res.push((n, rels, max_w12, finite));
    }
    rep.check(
        "decomposition",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} decompositions accepted", rep.rows.len())
        } else {
            failures.join("; ")
        },
    );
    let (n_fine, rels_fine, _, _) = per_res.last().expect("at least one resolution");
    let worst = rels_fine.iter().copied().fold(0.0, f64::max);
    rep.metric("max_relative_residual", worst);
    if matches!(p.omega, OmegaSource::Zero | OmegaSource::Manufactured) {
        rep.check(
            "residual",
            worst <= tol.gauge_residual,
            format!(
                "relative residual {worst:.3e} at resolution {n_fine} (limit {:.1e})",
                tol.gauge_residual
            ),
        );
    }
    if per_res.len() == 2 && p.omega == OmegaSource::Manufactured && failures.is_empty() {
        let (n0, r0, _, _) = &per_res[0];
        let order = observed_order(r0[0], rels_fine[0], *n0, *n_fine);
        rep.metric("residual_order", order);
        rep.check(
            "residual_order",
            order >= tol.gauge_order,
            format!(
                "observed order {order:.3} between {n0} and {n_fine} (minimum {})",
                tol.gauge_order
            ),
        );
    }
    rep.metric("rotation_defect", rot);
    rep.metric("xi_skew", skew);
    rep.metric("xi_mean", mean);
    rep.metric("boundary_deviation", bdry);
    rep.check("rotation", rot <= tol.rotation, format!("max ‖PᵀP − I‖ = {rot:.3e}"));
    rep.check(
        "xi_skew",
        skew <= tol.skew,
        format!("max skew defect of ξ = {skew:.3e}"),
    );
    rep.check("xi_mean", mean <= tol.xi_mean, format!("max |mean ξ|/‖ξ‖ = {mean:.3e}"));
    rep.check(
        "boundary_gauge",
        bdry <= tol.boundary_gauge,
        format!("max boundary |P − I| = {bdry:.3e}"),
    );
    for (n, _, w12, _) in &per_res {
        rep.metric(format!("max_ratio_w12_{n}"), *w12);
    }
    let finite = per_res.iter().all(|r| r.3);
    rep.check("audit_finite", finite, "all audit ratios finite");
    if per_res.len() == 2 {
        let (a, b) = (per_res[0].2, per_res[1].2);
        let change = a.max(b) / a.min(b);
        rep.metric("audit_change", change);
        rep.check(
            "audit_stable",
            finite && change <= tol.audit_factor,
            format!(
                "max ratio {a:.4} vs {b:.4}, factor {change:.3} (limit {})",
                tol.audit_factor
            ),
        );
    }
    if p.omega == OmegaSource::Abelian {
        rep.metric("abelian_xi_error", abel_xi);
        rep.metric("abelian_p_deviation", abel_p);
        rep.check(
            "abelian_xi",
            abel_xi <= tol.abelian_xi,
            format!("‖ξ − (β − mean β)J‖/‖β‖ = {abel_xi:.3e}"),
        );
        rep.check(
            "abelian_p",
            abel_p <= tol.abelian_p,
            format!("‖P − I‖_∞ = {abel_p:.3e}"),
        );
    }
    Ok(rep)
}

pub fn error_tag(e: &skewreg_core::Error) -> &'static str {
    use skewreg_core::Error as E;
    match e {
        E::SmallnessViolated { .. } => "smallness-violated",
        E::StepFailure { .. } => "step-failure",
        E::DecompositionFailed { .. } => "decomposition-failed",
        E::DivergenceTooLarge { .. } => "divergence-too-large",
        E::SolverFailure { .. } => "solver-failure",
        E::NonConvergence { .. } => "non-convergence",
        _ => "error",
    }
}
