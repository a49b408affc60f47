//! The linear system `−Δu = Ω·∇u + e` with Dirichlet trace, the H-surface system
//! by Picard iteration, and exact-solution factories.

use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::gauge::{GaugePair, SkewPotential};
use crate::grid::DiscGrid;
use crate::measure::l2_over;
use crate::sparse::{CsrMatrix, LuSolver};
use std::sync::Arc;

/// `(Ω·∇u)ⁱ = Σⱼ Σₛ Ωⁱʲₛ ∂ₛuʲ` at every node, from node-major data.
fn omega_dot(omega: &[f64], du: &[Vec<f64>; 2], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for k in 0..n {
        let om = &omega[k * 2 * m * m..(k + 1) * 2 * m * m];
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                for s in 0..2 {
                    acc += om[(i * m + j) * 2 + s] * du[s][k * m + j];
                }
            }
            out[k * m + i] = acc;
        }
    }
    out
}

fn derivatives(g: &DiscGrid, u: &[f64], m: usize) -> [Vec<f64>; 2] {
    let live = (g.n_interior() + g.n_boundary()) * m;
    [0, 1].map(|axis| {
        let mut d = g.derivative(axis).apply_strided(u, m);
        d[live..].iter_mut().for_each(|v| *v = 0.0);
        d
    })
}

/// `Ω·∇u` as a vector field.
pub fn omega_dot_grad(omega: &Field, u: &Field) -> Result<Field> {
    let m = vector_dim(u)?;
    if omega.shape() != Shape::matrix_form(m) {
        return Err(Error::ShapeMismatch {
            expected: Shape::matrix_form(m).to_string(),
            found: omega.shape().to_string(),
        });
    }
    let g = u.grid();
    let du = derivatives(g, u.data(), m);
    Ok(Field::from_parts(
        g.clone(),
        Shape::vector(m),
        Structure::General,
        omega_dot(omega.data(), &du, m, g.len()),
    ))
}

fn vector_dim(u: &Field) -> Result<usize> {
    let sh = u.shape();
    if sh.cols != 1 || sh.spatial != 1 {
        return Err(Error::ShapeMismatch {
            expected: "m×1×1".into(),
            found: sh.to_string(),
        });
    }
    Ok(sh.rows)
}

/// Dirichlet data at the boundary nodes, `m` values per node.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    m: usize,
    values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn new(grid: &DiscGrid, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_boundary() * m {
            return Err(Error::ShapeMismatch {
                expected: format!("{} boundary values", grid.n_boundary() * m),
                found: values.len().to_string(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite trace value at boundary node {}",
                i / m
            )));
        }
        Ok(Self { m, values })
    }

    pub fn zero(grid: &DiscGrid, m: usize) -> Self {
        Self {
            m,
            values: vec![0.0; grid.n_boundary() * m],
        }
    }

    pub fn from_fn(grid: &DiscGrid, m: usize, f: impl Fn([f64; 2]) -> Vec<f64>) -> Result<Self> {
        let values = grid
            .boundary()
            .flat_map(|k| f(grid.node(k).x).into_iter().take(m))
            .collect();
        Self::new(grid, m, values)
    }

    pub fn from_field(u: &Field) -> Result<Self> {
        let m = vector_dim(u)?;
        let g = u.grid();
        Self::new(g, m, g.boundary().flat_map(|k| u.at(k).to_vec()).collect())
    }

    /// `ψⁱ(θ) = Σ (aₖ cos kθ + bₖ sin kθ)` per component, terms `(k, a, b)`.
    pub fn fourier(grid: &DiscGrid, series: &[Vec<(u32, f64, f64)>]) -> Result<Self> {
        let m = series.len();
        let values = grid
            .boundary()
            .flat_map(|k| {
                let th = grid.node(k).theta.unwrap_or(0.0);
                series.iter().map(move |terms| {
                    terms
                        .iter()
                        .map(|&(f, a, b)| {
                            let (s, c) = (f as f64 * th).sin_cos();
                            a * c + b * s
                        })
                        .sum::<f64>()
                })
            })
            .collect();
        Self::new(grid, m, values)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.m != other.m || self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("trace with m = {}", self.m),
                found: format!("trace with m = {}", other.m),
            });
        }
        Ok(Self {
            m: self.m,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }
}

/// `−Δu = Ω·∇u + e` in `D²`, `u = ψ` on `∂D²`.
#[derive(Clone, Debug)]
pub struct SystemProblem {
    pub omega: Option<SkewPotential>,
    pub e: Field,
    /// Integrability exponent of `e`, recorded for the Morrey bounds.
    pub s: f64,
    pub psi: BoundaryTrace,
}

impl SystemProblem {
    pub fn new(omega: Option<SkewPotential>, e: Field, s: f64, psi: BoundaryTrace) -> Result<Self> {
        let m = vector_dim(&e)?;
        if !(s > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "integrability exponent s must exceed 1, got {s}"
            )));
        }
        if psi.m() != m {
            return Err(Error::ShapeMismatch {
                expected: format!("trace with m = {m}"),
                found: format!("trace with m = {}", psi.m()),
            });
        }
        if let Some(om) = &omega {
            if om.m() != m || om.field().grid().resolution() != e.grid().resolution() {
                return Err(Error::ShapeMismatch {
                    expected: format!("Ω of size {m} on resolution {}", e.grid().resolution()),
                    found: format!("Ω of size {} on resolution {}", om.m(), om.field().grid().resolution()),
                });
            }
        }
        Ok(Self { omega, e, s, psi })
    }

    pub fn m(&self) -> usize {
        self.psi.m()
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        self.e.grid()
    }
}

/// Assembled `−Δ − Ω·∇` on the interior unknowns, with the boundary columns kept
/// apart for the trace.
fn assemble(g: &DiscGrid, m: usize, omega: Option<&[f64]>) -> (CsrMatrix, Vec<(usize, usize, usize, f64)>) {
    let ni = g.n_interior();
    let mut trip = Vec::new();
    // (row, boundary node, component, value)
    let mut bcols = Vec::new();
    let mut push = |row: usize, col_node: usize, j: usize, v: f64| {
        if col_node < ni {
            trip.push((row, col_node * m + j, v));
        } else {
            bcols.push((row, col_node, j, v));
        }
    };
    for k in g.interior() {
        for (c, v) in g.laplacian().row(k) {
            for i in 0..m {
                push(k * m + i, c, i, -v);
            }
        }
        if let Some(om) = omega {
            let base = k * 2 * m * m;
            for s in 0..2 {
                for (c, v) in g.derivative(s).row(k) {
                    for i in 0..m {
                        for j in 0..m {
                            let w = om[base + (i * m + j) * 2 + s];
                            if w != 0.0 {
                                push(k * m + i, c, j, -w * v);
                            }
                        }
                    }
                }
            }
        }
    }
    (CsrMatrix::from_triplets(ni * m, ni * m, &trip), bcols)
}

/// Direct solve of the discrete system; relative residual at most `1e-10`.
pub fn solve_linear_system(prob: &SystemProblem) -> Result<Field> {
    let g = prob.grid();
    let m = prob.m();
    let (a, bcols) = assemble(g, m, prob.omega.as_ref().map(|o| o.field().data()));
    let ni = g.n_interior();
    let nb0 = g.boundary().start;
    let mut rhs: Vec<f64> = prob.e.data()[..ni * m].to_vec();
    let psi = prob.psi.values();
    for &(row, node, j, v) in &bcols {
        rhs[row] -= v * psi[(node - nb0) * m + j];
    }
    let lu = LuSolver::new(&a)?;
    let x = lu.solve(&rhs, 1e-10).map_err(|e| match e {
        Error::SolverFailure { residual, .. } => Error::SolverFailure {
            reason: format!("system solve lost accuracy (dimension {})", a.nrows()),
            residual,
        },
        other => other,
    })?;
    let mut data = vec![0.0; g.len() * m];
    data[..ni * m].copy_from_slice(&x);
    data[nb0 * m..(nb0 + g.n_boundary()) * m].copy_from_slice(psi);
    Ok(Field::from_parts(g.clone(), Shape::vector(m), Structure::General, data))
}

/// `‖−Δu − Ω·∇u − e‖_{L²}` over the interior nodes.
pub fn system_residual(u: &Field, omega: Option<&Field>, e: &Field) -> Result<f64> {
    let m = vector_dim(u)?;
    let g = u.grid();
    let lap = g.laplacian().apply_strided(u.data(), m);
    let od = match omega {
        Some(o) => omega_dot_grad(o, u)?.into_data(),
        None => vec![0.0; g.len() * m],
    };
    let r: Vec<f64> = (0..g.len() * m).map(|i| -lap[i] - od[i] - e.data()[i]).collect();
    let nodes: Vec<usize> = g.interior().collect();
    Ok(l2_over(g.weights(), &r, m, &nodes))
}

/// `H(u)·[[0, ∇⊥u³, −∇⊥u²], [−∇⊥u³, 0, ∇⊥u¹], [∇⊥u², −∇⊥u¹, 0]]`, for which
/// `Ω·∇u = −2H(u) ∂₁u ∧ ∂₂u`.
pub fn build_h_surface_omega(u: &Field, h: &dyn Fn(&[f64]) -> f64) -> Result<SkewPotential> {
    let m = vector_dim(u)?;
    if m != 3 {
        return Err(Error::InvalidParameter(format!(
            "the H-surface system needs m = 3, got {m}"
        )));
    }
    let g = u.grid();
    let du = derivatives(g, u.data(), 3);
    let mut data = vec![0.0; g.len() * 18];
    for k in 0..g.len() {
        let hk = h(u.at(k));
        // ∇⊥uʲ = (−∂₂uʲ, ∂₁uʲ)
        let perp = |j: usize| [-du[1][k * 3 + j], du[0][k * 3 + j]];
        let o = &mut data[k * 18..(k + 1) * 18];
        for (i, j, c, sign) in [(0, 1, 2, 1.0), (0, 2, 1, -1.0), (1, 2, 0, 1.0)] {
            let p = perp(c);
            for s in 0..2 {
                o[(i * 3 + j) * 2 + s] = sign * hk * p[s];
                o[(j * 3 + i) * 2 + s] = -sign * hk * p[s];
            }
        }
    }
    SkewPotential::new(Field::from_parts(
        g.clone(),
        Shape::matrix_form(3),
        Structure::Skew,
        data,
    ))
}

/// `∂₁u × ∂₂u` at every node.
pub fn wedge(u: &Field) -> Result<Field> {
    if vector_dim(u)? != 3 {
        return Err(Error::InvalidParameter("wedge needs m = 3".into()));
    }
    let g = u.grid();
    let du = derivatives(g, u.data(), 3);
    let mut data = vec![0.0; g.len() * 3];
    for k in 0..g.len() {
        let a = &du[0][k * 3..k * 3 + 3];
        let b = &du[1][k * 3..k * 3 + 3];
        data[k * 3] = a[1] * b[2] - a[2] * b[1];
        data[k * 3 + 1] = a[2] * b[0] - a[0] * b[2];
        data[k * 3 + 2] = a[0] * b[1] - a[1] * b[0];
    }
    Ok(Field::from_parts(g.clone(), Shape::vector(3), Structure::General, data))
}

/// Mean-curvature function `H(u)`.
pub type CurvatureFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub fn constant_curvature(h: f64) -> CurvatureFn {
    Arc::new(move |_| h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardConfig {
    pub max_iterations: usize,
    /// Relaxation weight: `uᵏ⁺¹ = (1 − θ)uᵏ + θ ũ`.
    pub damping: f64,
    /// Stop once `‖uᵏ⁺¹ − uᵏ‖_{W^{1,2}} ≤ tol`.
    pub tol: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            damping: 1.0,
            tol: 1e-9,
        }
    }
}

#[derive(Clone)]
pub struct HSurfaceProblem {
    pub h: CurvatureFn,
    pub psi: BoundaryTrace,
    pub picard: PicardConfig,
}

#[derive(Clone, Debug)]
pub struct HSurfaceSolution {
    pub u: Field,
    pub iterations: usize,
    pub increments: Vec<f64>,
    /// `‖−Δu − Ω(u)·∇u‖_{L²}` at the last iterate.
    pub residual: f64,
}

/// `W^{1,2}` norm over the interior nodes of node-major vector data.
fn w12(g: &DiscGrid, v: &[f64], m: usize) -> f64 {
    let nodes: Vec<usize> = g.interior().collect();
    let du = derivatives(g, v, m);
    let w = g.weights();
    (l2_over(w, v, m, &nodes).powi(2) + l2_over(w, &du[0], m, &nodes).powi(2) + l2_over(w, &du[1], m, &nodes).powi(2))
        .sqrt()
}

/// Picard iteration from the harmonic extension of `ψ`.
pub fn solve_h_surface(grid: &Arc<DiscGrid>, prob: &HSurfaceProblem) -> Result<HSurfaceSolution> {
    let cfg = prob.picard;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in (0, 1], got {}",
            cfg.damping
        )));
    }
    if prob.psi.m() != 3 {
        return Err(Error::InvalidParameter("the H-surface system needs m = 3".into()));
    }
    let zero = Field::zeros(grid.clone(), Shape::vector(3), Structure::General);
    let mut u = solve_linear_system(&SystemProblem::new(None, zero.clone(), 2.0, prob.psi.clone())?)?;
    let mut increments = Vec::new();
    for it in 1..=cfg.max_iterations {
        let omega = build_h_surface_omega(&u, &*prob.h)?;
        let next = solve_linear_system(&SystemProblem::new(Some(omega), zero.clone(), 2.0, prob.psi.clone())?)?;
        let mixed: Vec<f64> = u
            .data()
            .iter()
            .zip(next.data())
            .map(|(a, b)| a + cfg.damping * (b - a))
            .collect();
        let diff: Vec<f64> = mixed.iter().zip(u.data()).map(|(a, b)| a - b).collect();
        let inc = w12(grid, &diff, 3);
        u = Field::from_parts(grid.clone(), Shape::vector(3), Structure::General, mixed);
        increments.push(inc);
        if !inc.is_finite() {
            break;
        }
        if inc <= cfg.tol {
            let omega = build_h_surface_omega(&u, &*prob.h)?;
            let residual = system_residual(&u, Some(omega.field()), &zero)?;
            return Ok(HSurfaceSolution {
                u,
                iterations: it,
                increments,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: increments.len(),
        last_increment: increments.last().copied().unwrap_or(f64::NAN),
        increments,
    })
}

/// `u*(x) = (2x¹, 2x², |x|² − 1)/(1 + |x|²)`.
pub fn stereographic(x: [f64; 2]) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let d = 1.0 + r2;
    [2.0 * x[0] / d, 2.0 * x[1] / d, (r2 - 1.0) / d]
}

pub fn stereographic_sphere(grid: &Arc<DiscGrid>) -> Field {
    Field::from_fn(grid.clone(), Shape::vector(3), Structure::General, |x| {
        stereographic(x).to_vec()
    })
    .expect("finite by construction")
}

/// Defect of `−div(P⁻¹∇u) = ∇⊥ξ·P⁻¹∇u + P⁻¹e` in `L²` over the working disc.
pub fn gauged_divergence_residual(u: &Field, gp: &GaugePair, e: &Field) -> Result<f64> {
    let m = vector_dim(u)?;
    if gp.p.shape() != Shape::matrix(m) {
        return Err(Error::ShapeMismatch {
            expected: Shape::matrix(m).to_string(),
            found: gp.p.shape().to_string(),
        });
    }
    let g = u.grid();
    let n = g.len();
    let mm = m * m;
    let p = gp.p.data();
    let du = derivatives(g, u.data(), m);
    let dxi = derivatives(g, gp.xi.data(), mm);
    // Pᵀ∂ₛu
    let pdu: [Vec<f64>; 2] = [0, 1].map(|s| {
        let mut out = vec![0.0; n * m];
        for k in 0..n {
            for i in 0..m {
                out[k * m + i] = (0..m).map(|j| p[k * mm + j * m + i] * du[s][k * m + j]).sum();
            }
        }
        out
    });
    let d0 = derivatives(g, &pdu[0], m);
    let d1 = derivatives(g, &pdu[1], m);
    let mut defect = vec![0.0; n * m];
    for k in 0..n {
        for i in 0..m {
            let div = d0[0][k * m + i] + d1[1][k * m + i];
            let mut rhs = 0.0;
            for j in 0..m {
                // ∇⊥ξ = (−∂₂ξ, ∂₁ξ)
                rhs += -dxi[1][k * mm + i * m + j] * pdu[0][k * m + j] + dxi[0][k * mm + i * m + j] * pdu[1][k * m + j];
                rhs += p[k * mm + j * m + i] * e.data()[k * m + j];
            }
            defect[k * m + i] = -div - rhs;
        }
    }
    Ok(l2_over(g.weights(), &defect, m, &g.nodes_in(&gp.disc)))
}

/// Smooth exact solution of a manufactured system: `u*`, `e = −Δu* − Ω·∇u*`
/// with analytic derivatives of `u*`, and `ψ = u*` on the circle.
#[derive(Clone, Debug)]
pub struct ManufacturedSystem {
    pub problem: SystemProblem,
    pub exact: Field,
}

/// Components `(value, ∂₁, ∂₂, Δ)` of the manufactured solution.
fn manufactured_u(x: [f64; 2], i: usize) -> [f64; 4] {
    let a = 0.8 + 0.3 * i as f64;
    let b = 0.5 - 0.2 * i as f64;
    let ph = 0.4 * i as f64;
    let arg = a * x[0] + b * x[1] + ph;
    let (s, c) = arg.sin_cos();
    let q = 0.25 * (i as f64 + 1.0);
    // sin(arg) + q x¹x²
    [
        s + q * x[0] * x[1],
        a * c + q * x[1],
        b * c + q * x[0],
        -(a * a + b * b) * s,
    ]
}

pub fn manufactured_system(grid: &Arc<DiscGrid>, omega: SkewPotential) -> Result<ManufacturedSystem> {
    let m = omega.m();
    let exact = Field::from_fn(grid.clone(), Shape::vector(m), Structure::General, |x| {
        (0..m).map(|i| manufactured_u(x, i)[0]).collect()
    })?;
    let om = omega.field().data();
    let mut edata = vec![0.0; grid.len() * m];
    for k in 0..grid.len() {
        let x = grid.node(k).x;
        let parts: Vec<[f64; 4]> = (0..m).map(|i| manufactured_u(x, i)).collect();
        for i in 0..m {
            let mut od = 0.0;
            for j in 0..m {
                for s in 0..2 {
                    od += om[k * 2 * m * m + (i * m + j) * 2 + s] * parts[j][1 + s];
                }
            }
            edata[k * m + i] = -parts[i][3] - od;
        }
    }
    let e = Field::new(grid.clone(), Shape::vector(m), Structure::General, edata)?;
    let psi = BoundaryTrace::from_field(&exact)?;
    Ok(ManufacturedSystem {
        problem: SystemProblem::new(Some(omega), e, 2.0, psi)?,
        exact,
    })
}

/// Maximum nodewise error over interior nodes at distance at least `margin` from
/// the circle.
pub fn interior_max_error(u: &Field, exact: &Field, margin: f64) -> f64 {
    let g = u.grid();
    g.interior()
        .filter(|&k| crate::grid::norm(g.node(k).x) <= 1.0 - margin)
        .map(|k| {
            u.at(k)
                .iter()
                .zip(exact.at(k))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Boundary trace `θ ↦ u(cos θ, sin θ)` for a closed-form map.
pub fn trace_of(grid: &DiscGrid, m: usize, f: impl Fn([f64; 2]) -> Vec<f64>) -> Result<BoundaryTrace> {
    BoundaryTrace::from_fn(grid, m, |x| {
        let th = x[1].atan2(x[0]);
        f([th.cos(), th.sin()])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::manufactured_omega;
    use crate::grid::build_grid;
    use crate::random::{rng, SmoothRandom};

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(build_grid(n).unwrap())
    }

    #[test]
    fn harmonic_trace_reproduced() {
        let g = grid(33);
        let zero = Field::zeros(g.clone(), Shape::vector(2), Structure::General);
        let psi = BoundaryTrace::from_fn(&g, 2, |x| vec![x[0], 0.0]).unwrap();
        let u = solve_linear_system(&SystemProblem::new(None, zero, 2.0, psi).unwrap()).unwrap();
        for k in g.interior() {
            assert!((u.at(k)[0] - g.node(k).x[0]).abs() < 1e-12);
            assert!(u.at(k)[1].abs() < 1e-14);
        }
    }

    #[test]
    fn poisson_closed_form() {
        let g = grid(33);
        let e = Field::from_fn(g.clone(), Shape::vector(3), Structure::General, |_| vec![4.0, 0.0, 0.0]).unwrap();
        let u = solve_linear_system(&SystemProblem::new(None, e, 2.0, BoundaryTrace::zero(&g, 3)).unwrap()).unwrap();
        for k in g.interior() {
            let x = g.node(k).x;
            assert!((u.at(k)[0] - (1.0 - x[0] * x[0] - x[1] * x[1])).abs() < 1e-10);
            assert!(u.at(k)[1] == 0.0 && u.at(k)[2] == 0.0);
        }
    }

    #[test]
    fn manufactured_second_order() {
        let errs: Vec<f64> = [33, 65]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let ms = manufactured_system(&g, manufactured_omega(&g, 3, 0.1).unwrap()).unwrap();
                let u = solve_linear_system(&ms.problem).unwrap();
                interior_max_error(&u, &ms.exact, 0.0)
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.7, "{errs:?} order {order}");
    }

    #[test]
    fn linear_in_data() {
        let g = grid(33);
        let om = manufactured_omega(&g, 2, 0.1).unwrap();
        let e1 = Field::from_fn(g.clone(), Shape::vector(2), Structure::General, |x| vec![x[0], 0.5]).unwrap();
        let e2 = Field::from_fn(g.clone(), Shape::vector(2), Structure::General, |x| {
            vec![x[1] * x[1], -1.0]
        })
        .unwrap();
        let p1 = BoundaryTrace::fourier(&g, &[vec![(1, 1.0, 0.0)], vec![(2, 0.0, 0.3)]]).unwrap();
        let p2 = BoundaryTrace::fourier(&g, &[vec![(0, 0.2, 0.0)], vec![(1, 0.0, 1.0)]]).unwrap();
        let solve = |e: &Field, p: &BoundaryTrace| {
            solve_linear_system(&SystemProblem::new(Some(om.clone()), e.clone(), 2.0, p.clone()).unwrap()).unwrap()
        };
        let sum = solve(&e1.add(&e2).unwrap(), &p1.add(&p2).unwrap());
        let parts = solve(&e1, &p1).add(&solve(&e2, &p2)).unwrap();
        let err = sum
            .sub(&parts)
            .unwrap()
            .data()
            .iter()
            .fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn h_surface_omega_identity() {
        let g = grid(33);
        let mut r = rng(4);
        let comps: Vec<SmoothRandom> = (0..3).map(|_| SmoothRandom::new(&mut r, 5, 3.0)).collect();
        let u = Field::from_fn(g.clone(), Shape::vector(3), Structure::General, |x| {
            comps.iter().map(|c| c.eval(x)).collect()
        })
        .unwrap();
        let h = |v: &[f64]| 0.5 + 0.1 * v[0];
        let om = build_h_surface_omega(&u, &h).unwrap();
        assert_eq!(om.field().skew_defect().unwrap(), 0.0);
        let lhs = omega_dot_grad(om.field(), &u).unwrap();
        let w = wedge(&u).unwrap();
        let mut err: f64 = 0.0;
        for k in 0..g.len() {
            for i in 0..3 {
                err = err.max((lhs.at(k)[i] + 2.0 * h(u.at(k)) * w.at(k)[i]).abs());
            }
        }
        assert!(err < 1e-10, "{err:e}");

        let c = Field::from_fn(g.clone(), Shape::vector(3), Structure::General, |_| vec![1.0, 2.0, 3.0]).unwrap();
        assert!(build_h_surface_omega(&c, &h)
            .unwrap()
            .field()
            .data()
            .iter()
            .all(|v| v.abs() < 1e-12));
        assert!(build_h_surface_omega(&u, &|_| 0.0)
            .unwrap()
            .field()
            .data()
            .iter()
            .all(|v| *v == 0.0));
        let two = Field::zeros(g, Shape::vector(2), Structure::General);
        assert!(build_h_surface_omega(&two, &h).is_err());
    }

    #[test]
    fn stereographic_facts() {
        let g = grid(33);
        let u = stereographic_sphere(&g);
        for k in 0..g.len() {
            let v = u.at(k);
            assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-14);
        }
        assert_eq!(stereographic([0.0, 0.0]), [0.0, 0.0, -1.0]);
    }

    #[test]
    fn picard_zero_curvature_is_harmonic_extension() {
        let g = grid(33);
        let psi = BoundaryTrace::fourier(&g, &[vec![(1, 1.0, 0.0)], vec![(1, 0.0, 1.0)], vec![(2, 0.3, 0.0)]]).unwrap();
        let prob = HSurfaceProblem {
            h: constant_curvature(0.0),
            psi,
            picard: PicardConfig::default(),
        };
        let sol = solve_h_surface(&g, &prob).unwrap();
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn picard_small_curvature_converges_geometrically() {
        let g = grid(33);
        let psi = BoundaryTrace::fourier(
            &g,
            &[
                vec![(1, 0.3, 0.1)],
                vec![(2, 0.0, 0.2)],
                vec![(1, 0.1, 0.0), (3, 0.0, 0.1)],
            ],
        )
        .unwrap();
        let prob = HSurfaceProblem {
            h: constant_curvature(0.1),
            psi,
            picard: PicardConfig::default(),
        };
        let sol = solve_h_surface(&g, &prob).unwrap();
        let inc = &sol.increments;
        assert!(inc.windows(2).all(|w| w[1] < 0.5 * w[0]), "{inc:?}");
    }

    #[test]
    fn gauged_divergence_trivial_gauge() {
        let g = grid(33);
        let om = SkewPotential::new(Field::zeros(g.clone(), Shape::matrix_form(2), Structure::Skew)).unwrap();
        let gp = crate::gauge::decompose(&om, &crate::grid::Disc::unit(), &Default::default()).unwrap();
        let u = Field::from_fn(g.clone(), Shape::vector(2), Structure::General, |x| {
            vec![x[0] * x[1], x[0] * x[0] - x[1] * x[1]]
        })
        .unwrap();
        let e = Field::zeros(g.clone(), Shape::vector(2), Structure::General);
        let r = gauged_divergence_residual(&u, &gp, &e).unwrap();
        // Interior rows are exact for quadratics; the rim carries the LS-fit error.
        assert!(r < 1e-2, "{r}");
    }
}
