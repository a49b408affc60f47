//! Discrete differential operators, Dirichlet Poisson solves, the Hodge splitting
//! and harmonicity diagnostics.

use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{dist, Disc, DiscGrid};
use crate::measure::{lp_norm_over, node_norm};
use crate::sparse::{CsrMatrix, LuSolver};
use std::sync::Arc;

/// Relative residual accepted from direct solves.
pub const SOLVE_TOL: f64 = 1e-10;

fn require_spatial(u: &Field, spatial: usize, op: &str) -> Result<()> {
    if u.shape().spatial != spatial {
        return Err(Error::ShapeMismatch {
            expected: format!("{op} needs {spatial} spatial slot(s)"),
            found: u.shape().to_string(),
        });
    }
    Ok(())
}

fn apply_each(g: &DiscGrid, m: &CsrMatrix, u: &Field) -> Vec<f64> {
    m.apply_strided(u.data(), u.ncomp())
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if i / u.ncomp() < g.n_interior() + g.n_boundary() {
                v
            } else {
                0.0
            }
        })
        .collect()
}

fn interleave(grid: &Arc<DiscGrid>, shape: Shape, a: Vec<f64>, b: Vec<f64>) -> Field {
    let nc = shape.ncomp();
    let mut data = Vec::with_capacity(2 * a.len());
    for (ca, cb) in a.chunks(nc).zip(b.chunks(nc)) {
        for c in 0..nc {
            data.push(ca[c]);
            data.push(cb[c]);
        }
    }
    Field::from_parts(grid.clone(), shape.with_spatial(2), Structure::General, data)
}

/// `∇u = (∂₁u, ∂₂u)`.
pub fn gradient(u: &Field) -> Result<Field> {
    require_spatial(u, 1, "gradient")?;
    let g = u.grid();
    let a = apply_each(g, g.derivative(0), u);
    let b = apply_each(g, g.derivative(1), u);
    Ok(interleave(g, u.shape(), a, b))
}

/// `∇⊥u = (−∂₂u, ∂₁u)`.
pub fn rotated_gradient(u: &Field) -> Result<Field> {
    require_spatial(u, 1, "rotated_gradient")?;
    let g = u.grid();
    let a: Vec<f64> = apply_each(g, g.derivative(1), u).into_iter().map(|v| -v).collect();
    let b = apply_each(g, g.derivative(0), u);
    Ok(interleave(g, u.shape(), a, b))
}

fn div_like(w: &Field, rotated: bool) -> Result<Field> {
    require_spatial(w, 2, if rotated { "curl" } else { "divergence" })?;
    let g = w.grid();
    let w1 = w.spatial_slot(0);
    let w2 = w.spatial_slot(1);
    let (a, b) = if rotated {
        (apply_each(g, g.derivative(0), &w2), apply_each(g, g.derivative(1), &w1))
    } else {
        (apply_each(g, g.derivative(0), &w1), apply_each(g, g.derivative(1), &w2))
    };
    let data = a
        .iter()
        .zip(&b)
        .map(|(x, y)| if rotated { x - y } else { x + y })
        .collect();
    Ok(Field::from_parts(g.clone(), w1.shape(), Structure::General, data))
}

/// `div w = ∂₁w₁ + ∂₂w₂`.
pub fn divergence(w: &Field) -> Result<Field> {
    div_like(w, false)
}

/// `curl w = ∂₁w₂ − ∂₂w₁`.
pub fn curl(w: &Field) -> Result<Field> {
    div_like(w, true)
}

/// Dirichlet data for [`solve_poisson`].
#[derive(Clone, Copy)]
pub enum Boundary<'a> {
    Zero,
    /// Values given pointwise; also used to fill nodes outside the working disc.
    Function(&'a dyn Fn([f64; 2]) -> Vec<f64>),
    /// Values taken from a field: exactly at unit-circle nodes, interpolated at
    /// cut points of smaller discs; nodes outside the working disc keep the field.
    Field(&'a Field),
}

impl std::fmt::Debug for Boundary<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Zero => write!(f, "Zero"),
            Boundary::Function(_) => write!(f, "Function"),
            Boundary::Field(_) => write!(f, "Field"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Target {
    Unknown(usize),
    /// Cut point on the working circle, with the grid node when it is one.
    Cut([f64; 2], Option<usize>),
}

/// Shortley–Weller Dirichlet Laplacian on the lattice nodes strictly inside a disc.
#[derive(Debug)]
pub struct DiscLaplacian {
    grid: Arc<DiscGrid>,
    disc: Disc,
    unknowns: Vec<usize>,
    /// Per unknown: `(target, weight)` of the off-diagonal entries and the diagonal.
    stencil: Vec<(Vec<(Target, f64)>, f64)>,
    lu: LuSolver,
}

impl DiscLaplacian {
    pub fn new(grid: &Arc<DiscGrid>, d: &Disc) -> Result<Self> {
        if !d.inside_unit() {
            return Err(Error::DiscOutsideDomain {
                cx: d.center[0],
                cy: d.center[1],
                radius: d.radius,
            });
        }
        let h = grid.spacing();
        let unit = d.is_unit();
        let unknowns: Vec<usize> = if unit {
            grid.interior().collect()
        } else {
            grid.nodes_in(d)
                .into_iter()
                .filter(|&k| dist(grid.node(k).x, d.center) < d.radius - 1e-10)
                .collect()
        };
        if unknowns.len() < crate::grid::MIN_DISC_NODES {
            return Err(Error::DiscUnresolved {
                cx: d.center[0],
                cy: d.center[1],
                radius: d.radius,
                nodes: unknowns.len(),
                min: crate::grid::MIN_DISC_NODES,
            });
        }
        let mut pos = vec![usize::MAX; grid.len()];
        for (i, &k) in unknowns.iter().enumerate() {
            pos[k] = i;
        }
        let dirs = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let mut stencil = Vec::with_capacity(unknowns.len());
        let mut trip = Vec::new();
        for (row, &k) in unknowns.iter().enumerate() {
            let x0 = grid.node(k).x;
            let mut targets = [(Target::Unknown(0), 1.0); 4];
            for (dnum, e) in dirs.iter().enumerate() {
                let arm = grid.arms(k)[dnum];
                if arm.frac == 1.0 && pos[arm.node] != usize::MAX {
                    targets[dnum] = (Target::Unknown(pos[arm.node]), 1.0);
                } else if unit {
                    targets[dnum] = (Target::Cut(grid.node(arm.node).x, Some(arm.node)), arm.frac);
                } else {
                    let rel = [x0[0] - d.center[0], x0[1] - d.center[1]];
                    let b = rel[0] * e[0] + rel[1] * e[1];
                    let c = rel[0] * rel[0] + rel[1] * rel[1] - d.radius * d.radius;
                    let frac = ((-b + (b * b - c).sqrt()) / h).min(1.0);
                    let p = [x0[0] + frac * h * e[0], x0[1] + frac * h * e[1]];
                    targets[dnum] = (Target::Cut(p, None), frac);
                }
            }
            let mut off = Vec::with_capacity(4);
            let mut diag = 0.0;
            for axis in 0..2 {
                let (tr, sr) = targets[2 * axis];
                let (tl, sl) = targets[2 * axis + 1];
                let (hr, hl) = (sr * h, sl * h);
                // −Δ, so the system matrix is positive on the diagonal.
                off.push((tl, -2.0 / (hl * (hl + hr))));
                off.push((tr, -2.0 / (hr * (hl + hr))));
                diag += 2.0 / (hl * hr);
            }
            trip.push((row, row, diag));
            for &(t, v) in &off {
                if let Target::Unknown(col) = t {
                    trip.push((row, col, v));
                }
            }
            stencil.push((off, diag));
        }
        let n = unknowns.len();
        let lu = LuSolver::new(&CsrMatrix::from_triplets(n, n, &trip))?;
        Ok(Self {
            grid: grid.clone(),
            disc: *d,
            unknowns,
            stencil,
            lu,
        })
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    /// Solves `−Δu = rhs` inside the disc with the given Dirichlet data.
    pub fn solve(&self, rhs: &Field, boundary: Boundary<'_>) -> Result<Field> {
        require_spatial(rhs, 1, "solve_poisson")?;
        let g = &self.grid;
        if rhs.grid().resolution() != g.resolution() {
            return Err(Error::ShapeMismatch {
                expected: format!("resolution {}", g.resolution()),
                found: format!("resolution {}", rhs.grid().resolution()),
            });
        }
        let nc = rhs.ncomp();
        if let Boundary::Field(f) = boundary {
            if f.ncomp() != nc {
                return Err(Error::ShapeMismatch {
                    expected: rhs.shape().to_string(),
                    found: f.shape().to_string(),
                });
            }
        }
        let boundary_value = |p: [f64; 2], node: Option<usize>| -> Vec<f64> {
            match boundary {
                Boundary::Zero => vec![0.0; nc],
                Boundary::Function(f) => f(p),
                Boundary::Field(f) => match node {
                    Some(k) => f.at(k).to_vec(),
                    None => g.interpolate(f.data(), nc, p),
                },
            }
        };

        let n = self.unknowns.len();
        let mut b = vec![vec![0.0; n]; nc];
        for (row, &k) in self.unknowns.iter().enumerate() {
            let r = rhs.at(k);
            for c in 0..nc {
                b[c][row] = r[c];
            }
            for &(t, v) in &self.stencil[row].0 {
                if let Target::Cut(p, node) = t {
                    let bv = boundary_value(p, node);
                    for c in 0..nc {
                        b[c][row] -= v * bv[c];
                    }
                }
            }
        }

        let mut data = vec![0.0; g.len() * nc];
        match boundary {
            Boundary::Zero => {}
            Boundary::Function(f) => {
                for (k, node) in g.nodes().iter().enumerate() {
                    let v = f(node.x);
                    data[k * nc..(k + 1) * nc].copy_from_slice(&v[..nc]);
                }
            }
            Boundary::Field(f) => data.copy_from_slice(f.data()),
        }
        for (c, bc) in b.iter().enumerate() {
            let x = self.lu.solve(bc, SOLVE_TOL)?;
            for (row, &k) in self.unknowns.iter().enumerate() {
                data[k * nc + c] = x[row];
            }
        }
        let _ = self.disc;
        Ok(Field::from_parts(g.clone(), rhs.shape(), Structure::General, data))
    }
}

/// `−Δu = rhs` in `B_r(a)`, `u = boundary` on its boundary.
pub fn solve_poisson(rhs: &Field, boundary: Boundary<'_>, d: &Disc) -> Result<Field> {
    DiscLaplacian::new(rhs.grid(), d)?.solve(rhs, boundary)
}

/// Harmonic extension of the boundary data into the disc.
pub fn harmonic_extension(grid: &Arc<DiscGrid>, shape: Shape, boundary: Boundary<'_>, d: &Disc) -> Result<Field> {
    let zero = Field::zeros(grid.clone(), shape, Structure::General);
    solve_poisson(&zero, boundary, d)
}

/// `(f, g, h)` with `χ = ∇f + ∇⊥g + h`.
#[derive(Clone, Debug)]
pub struct HodgeTriple {
    pub f: Field,
    pub g: Field,
    pub h: Field,
}

/// Composed Laplacian `Σᵢ DᵢDᵢ` acting on data supported in `nodes`, restricted to
/// rows in `nodes`.
pub(crate) fn composed_laplacian(g: &DiscGrid, nodes: &[usize]) -> CsrMatrix {
    let all: Vec<usize> = (0..g.len()).collect();
    let mut total: Option<CsrMatrix> = None;
    for axis in 0..2 {
        let d = g.derivative(axis);
        let term = d.select(nodes, &all).matmul(&d.select(&all, nodes));
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term),
        });
    }
    total.unwrap()
}

/// Splits `χ` (shape `m×1×2`) on the working disc.
///
/// `f` and `g` vanish off the interior nodes of the disc and solve
/// `ΔΔf = div χ`, `ΔΔg = curl χ` there, where `ΔΔ` is the composition of the same
/// first differences used for `div` and `curl`. Then `h := χ − ∇f − ∇⊥g` is
/// reconstructed exactly, and its discrete divergence and curl vanish wherever
/// the difference operators commute (everywhere except a thin rim).
pub fn hodge_decompose(chi: &Field, d: &Disc) -> Result<HodgeTriple> {
    let sh = chi.shape();
    if sh.cols != 1 || sh.spatial != 2 {
        return Err(Error::ShapeMismatch {
            expected: "m×1×2".into(),
            found: sh.to_string(),
        });
    }
    let g = chi.grid();
    let m = sh.rows;
    let nodes = g.resolved_nodes(d)?;
    let lu = LuSolver::new(&composed_laplacian(g, &nodes))?;
    let div_chi = divergence(chi)?;
    let curl_chi = curl(chi)?;

    let mut fdat = vec![0.0; g.len() * m];
    let mut gdat = vec![0.0; g.len() * m];
    for comp in 0..m {
        for (src, dst) in [(&div_chi, &mut fdat), (&curl_chi, &mut gdat)] {
            let rhs: Vec<f64> = nodes.iter().map(|&k| src.at(k)[comp]).collect();
            let sol = lu.solve(&rhs, SOLVE_TOL)?;
            for (i, &k) in nodes.iter().enumerate() {
                dst[k * m + comp] = sol[i];
            }
        }
    }
    let f = Field::from_parts(g.clone(), Shape::vector(m), Structure::General, fdat);
    let gf = Field::from_parts(g.clone(), Shape::vector(m), Structure::General, gdat);
    let h = chi.sub(&gradient(&f)?)?.sub(&rotated_gradient(&gf)?)?;
    Ok(HodgeTriple { f, g: gf, h })
}

/// Maximum of `|∂₁∂₁h + ∂₂∂₂h|` (composed first differences) over the interior
/// nodes at least four spacings inside the disc; 0 if there are none.
pub fn harmonic_residual(h: &Field, d: &Disc) -> f64 {
    let g = h.grid();
    let margin = 4.0 * g.spacing();
    let inner: Vec<usize> = g
        .nodes_in(d)
        .into_iter()
        .filter(|&k| dist(g.node(k).x, d.center) <= d.radius - margin)
        .collect();
    if inner.is_empty() {
        return 0.0;
    }
    let nc = h.ncomp();
    let mut lap = vec![0.0; h.data().len()];
    for axis in 0..2 {
        let dm = g.derivative(axis);
        let first = dm.apply_strided(h.data(), nc);
        let second = dm.apply_strided(&first, nc);
        lap.iter_mut().zip(second).for_each(|(a, b)| *a += b);
    }
    inner
        .iter()
        .flat_map(|&k| lap[k * nc..(k + 1) * nc].iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCheckConfig {
    /// Entries above this value are flagged.
    pub bound: f64,
    /// Accepted `harmonic_residual` relative to `sup |h| / ϱ²` on the disc.
    pub harmonic_tol: f64,
}

impl Default for DecayCheckConfig {
    fn default() -> Self {
        Self {
            bound: 4.0,
            harmonic_tol: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicDecayReport {
    pub p: f64,
    /// `(r/ϱ, C)` with `C = ∫_{B_r}|h|ᵖ / ((r/ϱ)² ∫_{B_ϱ}|h|ᵖ)`.
    pub entries: Vec<(f64, f64)>,
    pub max_constant: f64,
    pub harmonic_residual: f64,
    pub violated: bool,
}

/// Measures the constant in `∫_{B_r}|h|ᵖ ≤ C (r/ϱ)² ∫_{B_ϱ}|h|ᵖ` for the given
/// ratios `r/ϱ`, with `d = B_ϱ(a)`.
pub fn harmonic_decay_check(
    h: &Field,
    d: &Disc,
    p: f64,
    ratios: &[f64],
    cfg: &DecayCheckConfig,
) -> Result<HarmonicDecayReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be ≥ 1 (got {p})")));
    }
    let g = h.grid();
    let outer = g.resolved_nodes(d)?;
    let residual = harmonic_residual(h, d);
    let sup = outer.iter().map(|&k| node_norm(h.at(k))).fold(0.0, f64::max);
    let tolerance = cfg.harmonic_tol * sup.max(f64::MIN_POSITIVE) / (d.radius * d.radius);
    if residual > tolerance {
        return Err(Error::NotHarmonic { residual, tolerance });
    }
    let big = lp_norm_over(h, &outer, p).powf(p);
    let mut entries = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ratio r/ϱ must lie in (0, 1] (got {ratio})"
            )));
        }
        let inner = g.resolved_nodes(&Disc::new(d.center, ratio * d.radius)?)?;
        let small = lp_norm_over(h, &inner, p).powf(p);
        let c = if big == 0.0 { 0.0 } else { small / (ratio * ratio * big) };
        entries.push((ratio, c));
    }
    let max_constant = entries.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(HarmonicDecayReport {
        p,
        entries,
        max_constant,
        harmonic_residual: residual,
        violated: max_constant > cfg.bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::measure::l2_norm;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(build_grid(n).unwrap())
    }

    fn max_interior(f: &Field, g: &DiscGrid, exact: impl Fn([f64; 2]) -> Vec<f64>) -> f64 {
        g.interior()
            .flat_map(|k| {
                let e = exact(g.node(k).x);
                f.at(k).iter().zip(e).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradients_of_linear_functions() {
        let g = grid(33);
        let x1 = Field::scalar_fn(g.clone(), |x| x[0]);
        let x2 = Field::scalar_fn(g.clone(), |x| x[1]);
        assert!(max_interior(&gradient(&x1).unwrap(), &g, |_| vec![1.0, 0.0]) < 1e-12);
        assert!(max_interior(&rotated_gradient(&x2).unwrap(), &g, |_| vec![-1.0, 0.0]) < 1e-12);
        assert!(gradient(&gradient(&x1).unwrap()).is_err());
    }

    #[test]
    fn div_of_rotated_gradient_converges() {
        let f = |x: [f64; 2]| (2.0 * x[0]).sin() * (x[1] + 0.3).cos() + x[0] * x[1] * x[1];
        let err = |n: usize| {
            let g = grid(n);
            let u = Field::scalar_fn(g.clone(), f);
            let dv = divergence(&rotated_gradient(&u).unwrap()).unwrap();
            let cg = curl(&gradient(&u).unwrap()).unwrap();
            // The defect lives in the cut-cell layer; L¹ sees its area shrink.
            g.interior()
                .map(|k| g.weights()[k] * (dv.at(k)[0].abs() + cg.at(k)[0].abs()))
                .sum::<f64>()
        };
        let (a, b) = (err(65), err(129));
        let order = (a / b).log2();
        assert!(order >= 1.8, "order {order} ({a:e} → {b:e})");
    }

    #[test]
    fn poisson_closed_forms() {
        let g = grid(33);
        let d = Disc::unit();
        let zero = Field::zeros(g.clone(), Shape::SCALAR, Structure::General);
        let u = solve_poisson(&zero, Boundary::Zero, &d).unwrap();
        assert!(u.data().iter().all(|v| *v == 0.0));

        let four = Field::scalar_fn(g.clone(), |_| 4.0);
        let u = solve_poisson(&four, Boundary::Zero, &d).unwrap();
        assert!(max_interior(&u, &g, |x| vec![1.0 - x[0] * x[0] - x[1] * x[1]]) < 1e-10);

        let lin = |x: [f64; 2]| vec![x[0]];
        let u = solve_poisson(&zero, Boundary::Function(&lin), &d).unwrap();
        assert!(max_interior(&u, &g, lin) < 1e-12);
    }

    #[test]
    fn poisson_on_sub_disc() {
        let g = grid(65);
        let d = Disc::new([0.2, -0.1], 0.5).unwrap();
        let four = Field::scalar_fn(g.clone(), |_| 4.0);
        let u = solve_poisson(&four, Boundary::Zero, &d).unwrap();
        for k in g.nodes_in(&d) {
            let x = g.node(k).x;
            let r2 = (x[0] - 0.2).powi(2) + (x[1] + 0.1).powi(2);
            assert!((u.at(k)[0] - (0.25 - r2).max(0.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_second_order() {
        let exact = |x: [f64; 2]| (x[0] + 0.5 * x[1]).sin() * x[1].exp();
        // −Δ of sin(x + y/2) e^y = (1 + 1/4 − 1) sin(..)e^y − cos(..)e^y
        let rhs = |x: [f64; 2]| {
            let s = (x[0] + 0.5 * x[1]).sin();
            let c = (x[0] + 0.5 * x[1]).cos();
            (0.25 * s - c) * x[1].exp()
        };
        let err = |n: usize| {
            let g = grid(n);
            let f = Field::scalar_fn(g.clone(), rhs);
            let b = |x: [f64; 2]| vec![exact(x)];
            let u = solve_poisson(&f, Boundary::Function(&b), &Disc::unit()).unwrap();
            max_interior(&u, &g, b)
        };
        let order = (err(33) / err(65)).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn hodge_examples() {
        let g = grid(65);
        let d = Disc::unit();
        let chi = Field::from_fn(g.clone(), Shape::vector_form(2), Structure::General, |x| {
            vec![-2.0 * x[0], -2.0 * x[1], 0.0, 0.0]
        })
        .unwrap();
        let t = hodge_decompose(&chi, &d).unwrap();
        let pot = |x: [f64; 2]| 1.0 - x[0] * x[0] - x[1] * x[1];
        let ferr = g
            .interior()
            .map(|k| (t.f.at(k)[0] - pot(g.node(k).x)).abs())
            .fold(0.0, f64::max);
        assert!(ferr < 1e-10, "{ferr}");
        assert!(l2_norm(&t.h) < 1e-10 * l2_norm(&chi));

        let constant = Field::from_fn(g.clone(), Shape::vector_form(1), Structure::General, |_| {
            vec![1.0, -0.5]
        })
        .unwrap();
        let t = hodge_decompose(&constant, &d).unwrap();
        let (nf, ng) = (l2_norm(&t.f), l2_norm(&t.g));
        let nh = l2_norm(&t.h.sub(&constant).unwrap());
        assert!(nf < 1e-12 && ng < 1e-12 && nh < 1e-12, "{nf:e} {ng:e} {nh:e}");
    }

    #[test]
    fn hodge_harmonic_part_is_discretely_harmonic() {
        let g = grid(65);
        let chi = Field::from_fn(g.clone(), Shape::vector_form(1), Structure::General, |x| {
            vec![(3.0 * x[1]).sin() + x[0] * x[0], x[0] * x[1] - (2.0 * x[0]).cos()]
        })
        .unwrap();
        let t = hodge_decompose(&chi, &Disc::unit()).unwrap();
        let back = gradient(&t.f)
            .unwrap()
            .add(&rotated_gradient(&t.g).unwrap())
            .unwrap()
            .add(&t.h)
            .unwrap();
        assert!(l2_norm(&back.sub(&chi).unwrap()) <= 1e-12 * l2_norm(&chi));
        assert!(harmonic_residual(&t.h, &Disc::unit()) < 1e-6);
    }

    #[test]
    fn harmonic_residual_examples() {
        let g = grid(33);
        let d = Disc::unit();
        assert!(harmonic_residual(&Field::scalar_fn(g.clone(), |x| x[0]), &d) < 1e-12);
        assert!(harmonic_residual(&Field::scalar_fn(g.clone(), |x| x[0] * x[0] - x[1] * x[1]), &d) < 1e-10);
        let r = harmonic_residual(&Field::scalar_fn(g, |x| x[0] * x[0] + x[1] * x[1]), &d);
        assert!((r - 4.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_decay_examples() {
        let g = grid(129);
        let cfg = DecayCheckConfig::default();
        let one = Field::scalar_fn(g.clone(), |_| 1.0);
        let rep = harmonic_decay_check(&one, &Disc::unit(), 2.0, &[0.25, 0.5], &cfg).unwrap();
        for (_, c) in rep.entries {
            assert!((c - 1.0).abs() < 0.02);
        }
        let x1 = Field::scalar_fn(g.clone(), |x| x[0]);
        let rep = harmonic_decay_check(&x1, &Disc::unit(), 2.0, &[0.5], &cfg).unwrap();
        assert!((rep.entries[0].1 - 0.25).abs() < 0.02);
        let bad = Field::scalar_fn(g, |x| x[0] * x[0] + x[1] * x[1]);
        assert!(matches!(
            harmonic_decay_check(&bad, &Disc::unit(), 2.0, &[0.5], &cfg),
            Err(Error::NotHarmonic { .. })
        ));
    }
}
