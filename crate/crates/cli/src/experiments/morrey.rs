use super::{grid, source_field, SourceField};
use crate::config::{ExperimentConfig, FieldSource};
use crate::error::CliError;
use crate::report::Report;
use skewreg_core::morrey::{
    boundary_probe, decay_fit, default_stride, modulus_of_continuity, v_rho_bmo_check, BoundaryProbeReport,
    MorreyConfig,
};

fn morrey_config(cfg: &ExperimentConfig) -> MorreyConfig {
    MorreyConfig {
        p: cfg.p,
        s: cfg.s,
        gamma: cfg.morrey.gamma,
        constant: cfg.morrey.constant,
        stride: 0,
        min_r2: cfg.tolerances.morrey_r2,
    }
}

const COLUMNS: &[&str] = &["resolution", "field", "center_x", "center_y", "radius", "j_p", "m_p"];

pub fn morrey(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.morrey;
    let tol = &cfg.tolerances;
    let mcfg = morrey_config(cfg);
    let resolutions = cfg.resolutions(&p.resolutions);
    let mut rep = Report::new(cfg, COLUMNS);
    let mut decay_ok = true;
    let mut decay_detail = Vec::new();
    let mut exponent_ok = true;
    let mut exponent_detail = Vec::new();
    // (x¹ ratio, source ratio) per resolution
    let mut vrho = Vec::new();
    let mut modulus = None;
    for &n in &resolutions {
        let g = grid(n)?;
        let src = source_field(&g, p.source, cfg.m, p.omega_norm, cfg.seed)?;
        let decay = decay_fit(&src.u, src.e.as_ref(), &p.centers, &p.radii, &mcfg)?;
        for s in &decay.samples {
            rep.row(vec![
                n.into(),
                "source".into(),
                s.center[0].into(),
                s.center[1].into(),
                s.radius.into(),
                s.j.into(),
                s.m.into(),
            ]);
        }
        let mu = decay.mu.unwrap_or(f64::NAN);
        let r2 = decay.min_r2.unwrap_or(f64::NAN);
        rep.metric(format!("mu_{n}"), decay.mu);
        rep.metric(format!("min_r2_{n}"), decay.min_r2);
        rep.metric(format!("contraction_{n}"), decay.contraction);
        rep.metric(format!("decay_constant_{n}"), decay.constant);
        let ok = decay.all_decay() && mu > tol.morrey_mu && r2 >= tol.morrey_r2;
        decay_ok &= ok;
        decay_detail.push(format!("{n}: μ = {mu:.4}, min R² = {r2:.5}"));

        let harmonic = source_field(&g, FieldSource::Harmonic, 1, 0.0, cfg.seed)?;
        let hfit = decay_fit(&harmonic.u, None, &p.centers, &p.radii, &mcfg)?;
        for s in &hfit.samples {
            rep.row(vec![
                n.into(),
                "harmonic".into(),
                s.center[0].into(),
                s.center[1].into(),
                s.radius.into(),
                s.j.into(),
                s.m.into(),
            ]);
        }
        let slopes: Vec<f64> = hfit
            .centers
            .iter()
            .map(|c| c.j_fit.map_or(f64::NAN, |f| f.slope))
            .collect();
        let (lo, hi) = slopes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        rep.metric(format!("harmonic_exponent_min_{n}"), lo);
        rep.metric(format!("harmonic_exponent_max_{n}"), hi);
        exponent_ok &= slopes.iter().all(|s| (s - cfg.p).abs() <= tol.harmonic_exponent);
        exponent_detail.push(format!("{n}: exponents in [{lo:.4}, {hi:.4}]"));

        let stride = default_stride(&g);
        let x1 = source_field(&g, FieldSource::Linear, 1, 0.0, cfg.seed)?;
        let a = v_rho_bmo_check(&x1.u, p.vrho_center, p.vrho_radius, cfg.p, stride)?;
        let b = v_rho_bmo_check(&src.u, p.vrho_center, p.vrho_radius, cfg.p, stride)?;
        rep.metric(format!("vrho_linear_{n}"), a.ratio);
        rep.metric(format!("vrho_source_{n}"), b.ratio);
        vrho.push((n, a.ratio, b.ratio));

        if Some(&n) == resolutions.last() {
            let m = modulus_of_continuity(
                &src.u,
                src.e.as_ref(),
                p.modulus_center,
                p.modulus_radius,
                mu.max(mcfg.chain_mu()),
                &mcfg,
            )?;
            rep.metric("modulus_oscillation", m.oscillation);
            rep.metric("modulus_ratio_linear", m.ratio_linear);
            rep.metric("modulus_ratio_root", m.ratio_root);
            modulus = Some(m);
            rep.snapshot("u", src.u);
        }
    }
    rep.check("morrey_decay", decay_ok, decay_detail.join("; "));
    rep.check("harmonic_exponent", exponent_ok, exponent_detail.join("; "));
    let finite = vrho
        .iter()
        .all(|(_, a, b)| a.is_some_and(f64::is_finite) && b.is_some_and(f64::is_finite));
    rep.check("vrho_finite", finite, format!("{vrho:?}"));
    if let [(n0, a0, b0), (n1, a1, b1)] = vrho[..] {
        let change = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => (y - x).abs() / x,
            _ => f64::INFINITY,
        };
        let (ca, cb) = (change(a0, a1), change(b0, b1));
        rep.metric("vrho_linear_change", ca);
        rep.metric("vrho_source_change", cb);
        rep.check(
            "vrho_stable",
            ca <= tol.vrho_stability && cb <= tol.vrho_stability,
            format!(
                "ratio changes {n0}→{n1}: x¹ {:.2}%, source {:.2}%",
                100.0 * ca,
                100.0 * cb
            ),
        );
    }
    let m = modulus.expect("at least one resolution");
    rep.check(
        "modulus_bounded",
        m.ratio_linear.is_finite() && m.ratio_root.is_finite(),
        format!(
            "oscillation {:.4e}, ratios {:.4} (linear) and {:.4} (root)",
            m.oscillation, m.ratio_linear, m.ratio_root
        ),
    );
    rep.check(
        "modulus_sweep",
        m.sweep_decreasing,
        format!("F(a, ϱ) along the sweep: {:?}", m.sweep),
    );
    Ok(rep)
}

/// Field probed by the boundary experiment and the δ-sweep.
pub fn probe_source(cfg: &ExperimentConfig) -> Result<SourceField, CliError> {
    let g = grid(cfg.resolution)?;
    source_field(&g, cfg.boundary.source, cfg.m, cfg.boundary.omega_norm, cfg.seed)
}

pub const PROBE_COLUMNS: &[&str] = &[
    "delta",
    "annulus_energy",
    "sigma",
    "angle",
    "slice_energy",
    "slice_bound",
    "gap",
    "bound",
    "psi_interpolated",
];

/// One row per δ plus the gap-bound, good-angle and monotonicity checks.
pub fn record_probe(rep: &mut Report, pr: &BoundaryProbeReport, noise: f64) {
    for e in &pr.entries {
        rep.row(vec![
            e.delta.into(),
            e.annulus_energy.into(),
            e.sigma.into(),
            e.angle.into(),
            e.slice_energy.into(),
            e.slice_bound.into(),
            e.gap.into(),
            e.bound.into(),
            e.psi_interpolated.into(),
        ]);
    }
    let worst = pr.entries.iter().map(|e| e.gap / e.bound).fold(0.0, f64::max);
    rep.metric("max_gap_over_bound", worst);
    rep.check("gap_bound", pr.within_bounds(), format!("max gap/bound = {worst:.4}"));
    rep.check(
        "good_angle",
        pr.good_angles_hold(),
        "slice energy at the chosen angle within I/(σ(1 − δ))",
    );
    let gaps: Vec<f64> = pr.entries.iter().map(|e| e.gap).collect();
    rep.check("gaps_decrease", pr.gaps_decrease(noise), format!("gaps {gaps:?}"));
}

pub fn boundary(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let b = &cfg.boundary;
    let src = probe_source(cfg)?;
    let mut rep = Report::new(cfg, PROBE_COLUMNS);
    let pr = boundary_probe(&src.u, &src.psi, b.theta1, &b.deltas)?;
    record_probe(&mut rep, &pr, cfg.tolerances.probe_noise);
    Ok(rep)
}
