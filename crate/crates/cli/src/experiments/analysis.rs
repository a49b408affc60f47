use super::grid;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::Report;
use rayon::prelude::*;
use skewreg_core::elliptic::{
    gradient, harmonic_decay_check, harmonic_residual, hodge_decompose, rotated_gradient, DecayCheckConfig,
};
use skewreg_core::hardy_bmo::{batch_max, div_curl_hardy_check, duality_check, MaximalConfig, WenteSolver};
use skewreg_core::measure::{cutoff, l2_norm};
use skewreg_core::random::{random_field, rng};
use skewreg_core::{Disc, DiscGrid, Field, Shape};
use std::f64::consts::PI;
use std::sync::Arc;

pub fn hodge(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.hodge;
    let tol = &cfg.tolerances;
    let g = grid(cfg.resolution)?;
    let d = Disc::unit();
    let mut rep = Report::new(
        cfg,
        &[
            "case",
            "chi_norm",
            "reconstruction",
            "relative_reconstruction",
            "harmonic_residual",
        ],
    );
    let cases: Vec<(f64, f64, f64)> = (0..p.cases)
        .into_par_iter()
        .map(|i| {
            let chi = random_field(
                &g,
                Shape::vector_form(cfg.m),
                &mut rng(cfg.seed + i as u64),
                p.modes,
                p.max_freq,
            );
            let t = hodge_decompose(&chi, &d)?;
            let back = gradient(&t.f)?.add(&rotated_gradient(&t.g)?)?.add(&t.h)?;
            let err = l2_norm(&chi.sub(&back)?);
            Ok((l2_norm(&chi), err, harmonic_residual(&t.h, &d)))
        })
        .collect::<Result<_, CliError>>()?;
    let (mut worst_rec, mut worst_lap): (f64, f64) = (0.0, 0.0);
    for (i, &(norm, err, lap)) in cases.iter().enumerate() {
        let rel = err / norm.max(f64::MIN_POSITIVE);
        worst_rec = worst_rec.max(rel);
        worst_lap = worst_lap.max(lap);
        rep.row(vec![i.into(), norm.into(), err.into(), rel.into(), lap.into()]);
    }
    rep.metric("max_relative_reconstruction", worst_rec);
    rep.metric("max_harmonic_residual", worst_lap);
    rep.check(
        "reconstruction",
        worst_rec <= tol.hodge_reconstruction,
        format!("max ‖χ − ∇f − ∇⊥g − h‖/‖χ‖ = {worst_rec:.3e}"),
    );
    rep.check(
        "harmonic",
        worst_lap <= tol.harmonic,
        format!("max interior |Δh| = {worst_lap:.3e}"),
    );

    // x¹ is harmonic with ∫_{B_r}|x¹|² = πr⁴/4, so C = (r/ϱ)² exactly.
    let x1 = Field::scalar_fn(g.clone(), |x| x[0]);
    let decay = harmonic_decay_check(&x1, &d, 2.0, &[p.decay_ratio], &DecayCheckConfig::default())?;
    let c = decay.entries[0].1;
    let expected = p.decay_ratio * p.decay_ratio;
    rep.metric("decay_constant", c);
    rep.metric("decay_expected", expected);
    rep.check(
        "decay_constant",
        (c - expected).abs() <= tol.decay_constant,
        format!("C = {c:.5} at r/ϱ = {}, expected {expected:.5}", p.decay_ratio),
    );
    Ok(rep)
}

/// Pair `(a, b)` of band-limited scalars for batch case `i`.
fn random_pair(g: &Arc<DiscGrid>, seed: u64, modes: usize, max_freq: f64) -> (Field, Field) {
    let mut r = rng(seed);
    let a = random_field(g, Shape::SCALAR, &mut r, modes, max_freq);
    let b = random_field(g, Shape::SCALAR, &mut r, modes, max_freq);
    (a, b)
}

pub fn wente(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.wente;
    let tol = &cfg.tolerances;
    let resolutions = cfg.resolutions(&p.resolutions);
    let mut rep = Report::new(cfg, &["resolution", "case", "grad_u", "grad_a", "grad_b", "ratio"]);
    let exact = (PI / 8.0).sqrt() / PI;
    let mut maxima = Vec::new();
    let mut closed = f64::NAN;
    for &n in &resolutions {
        let g = grid(n)?;
        let solver = WenteSolver::new(&g)?;
        let a = Field::scalar_fn(g.clone(), |x| x[0]);
        let b = Field::scalar_fn(g.clone(), |x| x[1]);
        closed = solver.check(&a, &b, 2.0)?.ratio;
        let batch: Vec<_> = (0..p.cases)
            .into_par_iter()
            .map(|i| {
                let (a, b) = random_pair(&g, cfg.seed + i as u64, p.modes, p.max_freq);
                solver.check(&a, &b, 2.0)
            })
            .collect::<Result<_, _>>()?;
        for (i, r) in batch.iter().enumerate() {
            rep.row(vec![
                n.into(),
                i.into(),
                r.grad_u.into(),
                r.grad_a.into(),
                r.grad_b.into(),
                r.ratio.into(),
            ]);
        }
        let max = batch_max(batch.iter().map(|r| r.ratio));
        rep.metric(format!("batch_max_{n}"), max);
        maxima.push(max);
    }
    let n_fine = *resolutions.last().expect("at least one resolution");
    let err = (closed - exact).abs() / exact;
    rep.metric("closed_form_ratio", closed);
    rep.metric("closed_form_expected", exact);
    rep.check(
        "closed_form",
        err <= tol.wente_closed_form,
        format!("ratio {closed:.6} vs {exact:.6} at resolution {n_fine}, relative error {err:.3e}"),
    );
    let finite = maxima.iter().all(|m| m.is_finite() && *m > 0.0);
    rep.check("batch_finite", finite, format!("batch maxima {maxima:?}"));
    if maxima.len() == 2 {
        let change = (maxima[1] - maxima[0]).abs() / maxima[0];
        rep.metric("batch_change", change);
        rep.check(
            "batch_stable",
            finite && change <= tol.wente_stability,
            format!(
                "batch max {:.5} → {:.5}, change {:.2}%",
                maxima[0],
                maxima[1],
                100.0 * change
            ),
        );
    }
    Ok(rep)
}

/// `Δφ` for `φ(z) = (1 − |z − c|²/r²)⁴`, which has zero integral.
fn laplacian_bump(g: &Arc<DiscGrid>, c: [f64; 2], r: f64) -> Field {
    Field::scalar_fn(g.clone(), move |x| {
        let s = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (r * r);
        if s >= 1.0 {
            0.0
        } else {
            -16.0 / (r * r) * (1.0 - s).powi(2) * (1.0 - 4.0 * s)
        }
    })
}

fn windowed(f: &Field, eta: &Field) -> Field {
    let data = f.data().iter().zip(eta.data()).map(|(a, b)| a * b).collect();
    Field::new(f.grid().clone(), Shape::SCALAR, f.structure(), data).expect("product of finite fields")
}

pub fn hardy_bmo(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.hardy_bmo;
    let g = grid(cfg.resolution)?;
    let mcfg = MaximalConfig::dyadic(g.spacing(), p.margin)?;
    // Cutoff ≡ 1 on B_{2w/3}, supported in B_w.
    let eta = cutoff(&g, &Disc::new([0.0, 0.0], 2.0 * p.window / 3.0)?)?;
    let mut rep = Report::new(cfg, &["test", "case", "numerator", "denominator", "ratio"]);

    let a = windowed(&Field::scalar_fn(g.clone(), |x| x[0]), &eta);
    let b = windowed(&Field::scalar_fn(g.clone(), |x| x[1]), &eta);
    let dc = div_curl_hardy_check(&a, &b, &mcfg)?;
    rep.row(vec![
        "div_curl_linear".into(),
        0usize.into(),
        dc.hardy.into(),
        (dc.grad_a * dc.grad_b).into(),
        dc.ratio.into(),
    ]);
    let same = div_curl_hardy_check(&a, &a, &mcfg)?;
    rep.row(vec![
        "div_curl_equal".into(),
        0usize.into(),
        same.hardy.into(),
        (same.grad_a * same.grad_a).into(),
        same.ratio.into(),
    ]);

    let div_curl: Vec<_> = (0..p.cases)
        .into_par_iter()
        .map(|i| {
            let (a, b) = random_pair(&g, cfg.seed + i as u64, p.modes, p.max_freq);
            div_curl_hardy_check(&windowed(&a, &eta), &windowed(&b, &eta), &mcfg)
        })
        .collect::<Result<_, _>>()?;
    for (i, r) in div_curl.iter().enumerate() {
        rep.row(vec![
            "div_curl_random".into(),
            i.into(),
            r.hardy.into(),
            (r.grad_a * r.grad_b).into(),
            r.ratio.into(),
        ]);
    }

    let bump = laplacian_bump(&g, [0.1, -0.1], 0.4);
    let x1 = Field::scalar_fn(g.clone(), |x| x[0]);
    let du = duality_check(&x1, &bump, p.bmo_radius, &mcfg)?;
    rep.row(vec![
        "duality_linear".into(),
        0usize.into(),
        du.pairing.into(),
        (du.bmo * du.hardy).into(),
        du.ratio.into(),
    ]);
    let duality: Vec<_> = (0..p.cases)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(cfg.seed + 10_000 + i as u64);
            let f = random_field(&g, Shape::SCALAR, &mut r, p.modes, p.max_freq);
            let c = [0.4 * (i as f64 * 1.3).cos(), 0.4 * (i as f64 * 1.3).sin()];
            duality_check(&f, &laplacian_bump(&g, c, 0.3), p.bmo_radius, &mcfg)
        })
        .collect::<Result<_, _>>()?;
    for (i, r) in duality.iter().enumerate() {
        rep.row(vec![
            "duality_random".into(),
            i.into(),
            r.pairing.into(),
            (r.bmo * r.hardy).into(),
            r.ratio.into(),
        ]);
    }

    let dc_max = batch_max(div_curl.iter().map(|r| r.ratio).chain([dc.ratio]));
    let du_max = batch_max(duality.iter().filter_map(|r| r.ratio).chain(du.ratio));
    rep.metric("div_curl_linear", dc.ratio);
    rep.metric("div_curl_max", dc_max);
    rep.metric("duality_linear", du.ratio);
    rep.metric("duality_max", du_max);
    rep.check(
        "div_curl_equal",
        same.ratio == 0.0 || same.hardy <= 1e-12,
        format!("ratio {:e}", same.ratio),
    );
    let dc_finite = dc.ratio.is_finite() && dc.ratio > 0.0 && div_curl.iter().all(|r| r.ratio.is_finite());
    rep.check("div_curl_bounded", dc_finite, format!("max ratio {dc_max:.5}"));
    let du_finite =
        du.ratio.is_some_and(f64::is_finite) && duality.iter().all(|r| r.ratio.map_or(true, f64::is_finite));
    rep.check("duality_bounded", du_finite, format!("max ratio {du_max:.5}"));
    Ok(rep)
}
