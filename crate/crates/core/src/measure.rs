//! Disc-restricted integrals, means and norms, and the cutoff profile.

use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{dist, norm, Disc};

/// Euclidean norm of a node's components.
pub(crate) fn node_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Σ wᵢ` over the nodes of `B_r(a) ∩ D²`.
pub fn disc_area(u: &Field, d: &Disc) -> Result<f64> {
    let g = u.grid();
    let nodes = g.resolved_nodes(d)?;
    Ok(nodes.iter().map(|&k| g.weights()[k]).sum())
}

/// Weighted average `(u)_{a,r}` over the nodes of `B_r(a) ∩ D²`.
pub fn mean_value(u: &Field, d: &Disc) -> Result<Vec<f64>> {
    let g = u.grid();
    let nodes = g.resolved_nodes(d)?;
    Ok(mean_over(u, &nodes))
}

pub(crate) fn mean_over(u: &Field, nodes: &[usize]) -> Vec<f64> {
    let w = u.grid().weights();
    let nc = u.ncomp();
    let mut acc = vec![0.0; nc];
    let mut area = 0.0;
    for &k in nodes {
        area += w[k];
        for (a, v) in acc.iter_mut().zip(u.at(k)) {
            *a += w[k] * v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= area);
    acc
}

/// `(Σ wᵢ |u(xᵢ)|ᵖ)^{1/p}` over the nodes of `B_r(a) ∩ D²`.
pub fn lp_norm_on_disc(u: &Field, d: &Disc, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be ≥ 1 (got {p})")));
    }
    let nodes = u.grid().resolved_nodes(d)?;
    Ok(lp_norm_over(u, &nodes, p))
}

pub(crate) fn lp_norm_over(u: &Field, nodes: &[usize], p: f64) -> f64 {
    let w = u.grid().weights();
    let s: f64 = nodes.iter().map(|&k| w[k] * node_norm(u.at(k)).powf(p)).sum();
    s.powf(1.0 / p)
}

/// `L²` norm over all interior nodes of the unit disc.
pub fn l2_norm(u: &Field) -> f64 {
    let g = u.grid();
    let w = g.weights();
    g.interior()
        .map(|k| w[k] * u.at(k).iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Weighted `L²` norm of node-major data with `ncomp` components over `nodes`.
pub(crate) fn l2_over(w: &[f64], data: &[f64], ncomp: usize, nodes: &[usize]) -> f64 {
    nodes
        .iter()
        .map(|&k| w[k] * data[k * ncomp..(k + 1) * ncomp].iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Radial profile of the cutoff: 1 up to `r`, quintic smoothstep down to 0 at `3r/2`.
pub fn cutoff_profile(rho: f64, r: f64) -> f64 {
    let s = (rho - r) / (0.5 * r);
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// Cutoff `η` with `η ≡ 1` on `B_r(a)` and support in `B_{3r/2}(a)`; requires
/// `B_{2r}(a) ⊂ D²`.
pub fn cutoff(grid: &std::sync::Arc<crate::grid::DiscGrid>, d: &Disc) -> Result<Field> {
    if norm(d.center) + 2.0 * d.radius > 1.0 + 1e-12 {
        return Err(Error::DiscOutsideDomain {
            cx: d.center[0],
            cy: d.center[1],
            radius: 2.0 * d.radius,
        });
    }
    let data = grid
        .nodes()
        .iter()
        .map(|n| cutoff_profile(dist(n.x, d.center), d.radius))
        .collect();
    Ok(Field::from_parts(grid.clone(), Shape::SCALAR, Structure::General, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DiscGrid};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(build_grid(n).unwrap())
    }

    #[test]
    fn mean_of_constant_and_odd() {
        let g = grid(33);
        let d = Disc::new([0.0, 0.0], 0.5).unwrap();
        let c = Field::scalar_fn(g.clone(), |_| 2.5);
        assert!((mean_value(&c, &d).unwrap()[0] - 2.5).abs() < 1e-14);
        let x = Field::scalar_fn(g, |x| x[0]);
        assert!(mean_value(&x, &d).unwrap()[0].abs() < 1e-14);
    }

    #[test]
    fn mean_of_radius_squared() {
        let g = grid(129);
        let r = 0.5;
        let u = Field::scalar_fn(g, |x| x[0] * x[0] + x[1] * x[1]);
        let m = mean_value(&u, &Disc::new([0.0, 0.0], r).unwrap()).unwrap()[0];
        assert!((m - r * r / 2.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn lp_norms() {
        let g = grid(129);
        let one = Field::scalar_fn(g.clone(), |_| 1.0);
        let r = 0.5;
        let d = Disc::new([0.0, 0.0], r).unwrap();
        let n1 = lp_norm_on_disc(&one, &d, 2.0).unwrap();
        assert!((n1 - (PI * r * r).sqrt()).abs() / n1 < 0.02);
        let x = Field::scalar_fn(g.clone(), |x| x[0]);
        let n2 = lp_norm_on_disc(&x, &Disc::unit(), 2.0).unwrap();
        assert!((n2 - (PI / 4.0).sqrt()).abs() < 0.01);
        let zero = Field::scalar_fn(g, |_| 0.0);
        assert_eq!(lp_norm_on_disc(&zero, &d, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn unresolved_disc_rejected() {
        let g = grid(17);
        let u = Field::scalar_fn(g, |_| 1.0);
        assert!(matches!(
            mean_value(&u, &Disc::new([0.1, 0.1], 0.01).unwrap()),
            Err(Error::DiscUnresolved { .. })
        ));
    }

    #[test]
    fn cutoff_plateau_support_and_slope() {
        let g = grid(129);
        let r = 0.2;
        let d = Disc::new([0.1, -0.1], r).unwrap();
        let eta = cutoff(&g, &d).unwrap();
        for (k, node) in g.nodes().iter().enumerate() {
            let rho = dist(node.x, d.center);
            let v = eta.at(k)[0];
            assert!((0.0..=1.0).contains(&v));
            if rho <= r {
                assert_eq!(v, 1.0);
            }
            if rho >= 1.5 * r {
                assert_eq!(v, 0.0);
            }
        }
        let ex = g.derivative(0).matvec(eta.data());
        let ey = g.derivative(1).matvec(eta.data());
        let max = g.interior().map(|k| ex[k].hypot(ey[k])).fold(0.0, f64::max);
        assert!(max <= 4.0 / r, "{max}");
        assert!(cutoff(&g, &Disc::new([0.5, 0.0], 0.3).unwrap()).is_err());
    }
}
