//! Measured stand-ins for the `W^{1,2}` and `W^{2,2}` gauge estimates.

use super::continuation::{GaugePair, SkewPotential};
use super::operator::{derive, l2_matrix};
use crate::error::Result;
use crate::grid::{dist, DiscGrid};
use crate::measure::{l2_over, mean_over};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditReport {
    pub omega_l2: f64,
    pub omega_w12: f64,
    /// `(‖∇ξ‖ + ‖∇P‖) / ‖Ω‖_{L²}`.
    pub ratio_w12: f64,
    /// `(‖ξ‖_{W²'²} + ‖P − I‖_{W²'²}) / ‖Ω‖_{W¹'²}`.
    pub ratio_w22: f64,
    pub residual: f64,
}

/// Squared norms `(‖u‖², ‖∇u‖², ‖∇²u‖²)` over `nodes`.
fn sobolev_parts(g: &DiscGrid, u: &[f64], nc: usize, nodes: &[usize]) -> [f64; 3] {
    let mut out = [l2_matrix(g, u, nc, nodes).powi(2), 0.0, 0.0];
    for i in 0..2 {
        let du = derive(g, i, u, nc);
        out[1] += l2_matrix(g, &du, nc, nodes).powi(2);
        for j in 0..2 {
            out[2] += l2_matrix(g, &derive(g, j, &du, nc), nc, nodes).powi(2);
        }
    }
    out
}

pub fn audit_estimates(gp: &GaugePair, omega: &SkewPotential) -> Result<AuditReport> {
    let g = gp.p.grid();
    let nodes = g.nodes_in(&gp.disc);
    let nc = gp.p.ncomp();
    let m = gp.p.shape().rows;
    let mut pm = gp.p.data().to_vec();
    for block in pm.chunks_mut(nc) {
        for p in 0..m {
            block[p * m + p] -= 1.0;
        }
    }
    let xi = sobolev_parts(g, gp.xi.data(), nc, &nodes);
    let p = sobolev_parts(g, &pm, nc, &nodes);
    let om = sobolev_parts(g, omega.field().data(), 2 * nc, &nodes);
    let omega_l2 = om[0].sqrt();
    let omega_w12 = (om[0] + om[1]).sqrt();
    let (ratio_w12, ratio_w22) = if omega_l2 == 0.0 {
        (0.0, 0.0)
    } else {
        (
            (xi[1].sqrt() + p[1].sqrt()) / omega_l2,
            (xi.iter().sum::<f64>().sqrt() + p.iter().sum::<f64>().sqrt()) / omega_w12,
        )
    };
    Ok(AuditReport {
        omega_l2,
        omega_w12,
        ratio_w12,
        ratio_w22,
        residual: gp.residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchAudit {
    pub max_ratio_w12: f64,
    pub max_ratio_w22: f64,
    pub all_finite: bool,
}

pub fn audit_batch(reports: &[AuditReport]) -> BatchAudit {
    let all_finite = reports
        .iter()
        .all(|r| r.ratio_w12.is_finite() && r.ratio_w22.is_finite());
    BatchAudit {
        max_ratio_w12: reports.iter().map(|r| r.ratio_w12).fold(0.0, f64::max),
        max_ratio_w22: reports.iter().map(|r| r.ratio_w22).fold(0.0, f64::max),
        all_finite,
    }
}

/// Flags growth of the batch maxima between two resolutions beyond `factor`.
pub fn audit_unstable(coarse: &BatchAudit, fine: &BatchAudit, factor: f64) -> bool {
    let grow = |a: f64, b: f64| a.max(b) > factor * a.min(b);
    !coarse.all_finite || !fine.all_finite || grow(coarse.max_ratio_w12, fine.max_ratio_w12)
}

/// Structural facts about a returned pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureReport {
    /// `max ‖PᵀP − I‖` over all nodes.
    pub rotation_defect: f64,
    pub xi_skew: f64,
    /// `|mean ξ| / ‖ξ‖_{L²}` on the working disc; 0 when `ξ` vanishes.
    pub xi_mean: f64,
    /// `max |P − I|` over the nodes just outside the working disc (the circle for
    /// the unit disc), where the gauge is pinned.
    pub boundary_deviation: f64,
}

pub fn gauge_structure(gp: &GaugePair) -> Result<StructureReport> {
    let g = gp.p.grid();
    let m = gp.p.shape().rows;
    let mm = m * m;
    let inside = g.nodes_in(&gp.disc);
    let mean = mean_over(&gp.xi, &inside);
    let norm = l2_over(g.weights(), gp.xi.data(), mm, &inside);
    let mean_abs = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let live = g.n_interior() + g.n_boundary();
    let reach = gp.disc.radius + 2.0 * g.spacing();
    let boundary_deviation = (0..live)
        .filter(|k| inside.binary_search(k).is_err() && dist(g.node(*k).x, gp.disc.center) <= reach)
        .flat_map(|k| {
            gp.p.at(k)
                .iter()
                .enumerate()
                .map(move |(i, v)| (v - if i / m == i % m { 1.0 } else { 0.0 }).abs())
        })
        .fold(0.0, f64::max);
    Ok(StructureReport {
        rotation_defect: gp.p.rotation_defect()?,
        xi_skew: gp.xi.skew_defect()?,
        xi_mean: if norm > 0.0 { mean_abs / norm } else { 0.0 },
        boundary_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, Shape, Structure};
    use crate::gauge::{decompose, manufactured_omega, GaugeConfig};
    use crate::grid::{build_grid, Disc};
    use std::sync::Arc;

    #[test]
    fn zero_potential_ratios_vanish() {
        let g = Arc::new(build_grid(33).unwrap());
        let om = SkewPotential::new(Field::zeros(g, Shape::matrix_form(2), Structure::Skew)).unwrap();
        let gp = decompose(&om, &Disc::unit(), &GaugeConfig::default()).unwrap();
        let rep = audit_estimates(&gp, &om).unwrap();
        assert_eq!((rep.ratio_w12, rep.ratio_w22), (0.0, 0.0));
    }

    #[test]
    fn scaling_keeps_ratio() {
        let g = Arc::new(build_grid(33).unwrap());
        let cfg = GaugeConfig::default();
        let r: Vec<f64> = [0.02, 0.04]
            .iter()
            .map(|&a| {
                let om = manufactured_omega(&g, 3, a).unwrap();
                let gp = decompose(&om, &Disc::unit(), &cfg).unwrap();
                audit_estimates(&gp, &om).unwrap().ratio_w12
            })
            .collect();
        assert!(r[0].max(r[1]) <= 2.0 * r[0].min(r[1]), "{r:?}");
    }

    #[test]
    fn structure_of_manufactured_pair() {
        let g = Arc::new(build_grid(33).unwrap());
        let om = manufactured_omega(&g, 3, 0.05).unwrap();
        let gp = decompose(&om, &Disc::unit(), &GaugeConfig::default()).unwrap();
        let s = gauge_structure(&gp).unwrap();
        assert!(s.rotation_defect < 1e-12, "{s:?}");
        assert!(
            s.xi_skew < 1e-12 && s.xi_mean < 1e-8 && s.boundary_deviation < 1e-6,
            "{s:?}"
        );
    }
}
