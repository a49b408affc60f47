//! The operator `T(U, λ) = div(e^{−U}∇e^{U} + e^{−U}(∇⊥ζ + λ)e^{U})`, its
//! linearization, and the Newton solve `T(U, λ) = 0` for one continuation step.

use super::lie::{ad_matrix, exp_skew_matrix, from_coords, matmul, matmul_tn, skew_dim, skew_project, to_coords};
use crate::elliptic::SOLVE_TOL;
use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{Disc, DiscGrid};
use crate::sparse::{CsrMatrix, LuSolver};
use std::sync::Arc;

/// A matrix-valued 1-form as two node-major slot arrays of `m×m` blocks.
pub(crate) type Form = [Vec<f64>; 2];

/// Applies `D_axis` to node-major data; rows outside the disc are zero.
pub(crate) fn derive(g: &DiscGrid, axis: usize, data: &[f64], ncomp: usize) -> Vec<f64> {
    let mut out = g.derivative(axis).apply_strided(data, ncomp);
    let live = (g.n_interior() + g.n_boundary()) * ncomp;
    out[live..].iter_mut().for_each(|v| *v = 0.0);
    out
}

/// `∇⊥ζ = (−∂₂ζ, ∂₁ζ)` for matrix data.
pub(crate) fn perp_gradient(g: &DiscGrid, zeta: &[f64], ncomp: usize) -> Form {
    let a = derive(g, 1, zeta, ncomp).into_iter().map(|v| -v).collect();
    let b = derive(g, 0, zeta, ncomp);
    [a, b]
}

pub(crate) fn form_from_field(f: &Field) -> Form {
    [f.spatial_slot(0).into_data(), f.spatial_slot(1).into_data()]
}

pub(crate) fn field_from_form(grid: &Arc<DiscGrid>, m: usize, form: &Form, structure: Structure) -> Field {
    let a = Field::from_parts(grid.clone(), Shape::matrix(m), structure, form[0].clone());
    let b = Field::from_parts(grid.clone(), Shape::matrix(m), structure, form[1].clone());
    Field::from_slots(&a, &b).expect("slots share grid and shape")
}

/// Nodewise exponential of node-major skew data.
pub(crate) fn exp_nodes(u: &[f64], m: usize) -> Vec<f64> {
    let mm = m * m;
    let mut out = Vec::with_capacity(u.len());
    for node in u.chunks(mm) {
        out.extend(exp_skew_matrix(node, m));
    }
    out
}

/// `F_i = skew(Qᵀ ∂ᵢQ + Qᵀ A_i Q)` for `Q = e^U`.
pub(crate) fn flux(g: &DiscGrid, m: usize, q: &[f64], a: &Form) -> Form {
    let mm = m * m;
    let mut out: Form = [vec![0.0; q.len()], vec![0.0; q.len()]];
    let mut t1 = vec![0.0; mm];
    let mut t2 = vec![0.0; mm];
    for axis in 0..2 {
        let dq = derive(g, axis, q, mm);
        for k in 0..g.len() {
            let s = k * mm..(k + 1) * mm;
            let qk = &q[s.clone()];
            let o = &mut out[axis][s.clone()];
            matmul_tn(qk, &dq[s.clone()], m, o);
            matmul_tn(qk, &a[axis][s.clone()], m, &mut t1);
            matmul(&t1, qk, m, &mut t2);
            o.iter_mut().zip(&t2).for_each(|(x, y)| *x += y);
            skew_project(o, m);
        }
    }
    out
}

/// `Σᵢ ∂ᵢFᵢ`, skew-projected.
pub(crate) fn divergence_of(g: &DiscGrid, m: usize, f: &Form) -> Vec<f64> {
    let mm = m * m;
    let mut out = derive(g, 0, &f[0], mm);
    for (o, v) in out.iter_mut().zip(derive(g, 1, &f[1], mm)) {
        *o += v;
    }
    for node in out.chunks_mut(mm) {
        skew_project(node, m);
    }
    out
}

/// `T(U, A)` with the 1-form `A = ∇⊥ζ + λ` already assembled.
pub(crate) fn t_form(g: &DiscGrid, m: usize, u: &[f64], a: &Form) -> (Vec<f64>, Form) {
    let q = exp_nodes(u, m);
    let f = flux(g, m, &q, a);
    (divergence_of(g, m, &f), f)
}

fn check_matrix(f: &Field, spatial: usize, what: &str) -> Result<usize> {
    let sh = f.shape();
    if sh.rows != sh.cols || sh.spatial != spatial {
        return Err(Error::ShapeMismatch {
            expected: format!("{what}: m×m×{spatial}"),
            found: sh.to_string(),
        });
    }
    Ok(sh.rows)
}

fn assemble_a(zeta: &Field, lambda: Option<&Field>) -> Result<Form> {
    let m = check_matrix(zeta, 1, "ζ")?;
    let g = zeta.grid();
    let mut a = perp_gradient(g, zeta.data(), m * m);
    if let Some(l) = lambda {
        if check_matrix(l, 2, "λ")? != m {
            return Err(Error::ShapeMismatch {
                expected: format!("λ of size {m}"),
                found: l.shape().to_string(),
            });
        }
        let lf = form_from_field(l);
        for axis in 0..2 {
            a[axis].iter_mut().zip(&lf[axis]).for_each(|(x, y)| *x += y);
        }
    }
    Ok(a)
}

/// Evaluates `T(U, λ)` with `A = ∇⊥ζ + λ`; the result is skew.
pub fn t_apply(u: &Field, lambda: &Field, zeta: &Field) -> Result<Field> {
    let m = check_matrix(u, 1, "U")?;
    let a = assemble_a(zeta, Some(lambda))?;
    let (t, _) = t_form(u.grid(), m, u.data(), &a);
    Ok(Field::from_parts(
        u.grid().clone(),
        Shape::matrix(m),
        Structure::Skew,
        t,
    ))
}

/// Derivative of `U ↦ T(U, λ)` at `U = 0` in direction `ψ`:
/// `Σᵢ ∂ᵢ(∂ᵢψ + [Aᵢ, ψ])` with `A = ∇⊥ζ + λ` (λ optional).
pub fn linearized_apply(psi: &Field, zeta: &Field, lambda: Option<&Field>) -> Result<Field> {
    let m = check_matrix(psi, 1, "ψ")?;
    let g = psi.grid();
    let mm = m * m;
    let a = assemble_a(zeta, lambda)?;
    let mut f: Form = [Vec::new(), Vec::new()];
    let (mut ap, mut pa) = (vec![0.0; mm], vec![0.0; mm]);
    for axis in 0..2 {
        let mut d = derive(g, axis, psi.data(), mm);
        for k in 0..g.len() {
            let s = k * mm..(k + 1) * mm;
            matmul(&a[axis][s.clone()], &psi.data()[s.clone()], m, &mut ap);
            matmul(&psi.data()[s.clone()], &a[axis][s.clone()], m, &mut pa);
            for (i, v) in d[s].iter_mut().enumerate() {
                *v += ap[i] - pa[i];
            }
        }
        f[axis] = d;
    }
    let t = divergence_of(g, m, &f);
    Ok(Field::from_parts(g.clone(), Shape::matrix(m), Structure::Skew, t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Absolute tolerance on `‖T‖_{L²}` over the working nodes.
    pub tol: f64,
    pub max_iterations: usize,
    /// A step fails when the residual grows by more than this factor.
    pub growth_factor: f64,
    /// Refactor the Jacobian when the last contraction ratio exceeds this.
    pub refactor_ratio: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 30,
            growth_factor: 2.0,
            refactor_ratio: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    /// `U` as node-major `m×m` blocks.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub factorizations: usize,
}

/// Weighted `L²` (Frobenius) norm of node-major `m×m` data over `nodes`.
pub(crate) fn l2_matrix(g: &DiscGrid, data: &[f64], mm: usize, nodes: &[usize]) -> f64 {
    crate::measure::l2_over(g.weights(), data, mm, nodes)
}

/// Factorized Jacobian at `U = 0`, `A = 0`, i.e. of `Σᵢ DᵢDᵢ` on the unknowns.
pub(crate) fn base_jacobian(g: &DiscGrid, m: usize, unknowns: &[usize]) -> Result<LuSolver> {
    let mut pos = vec![usize::MAX; g.len()];
    for (i, &node) in unknowns.iter().enumerate() {
        pos[node] = i;
    }
    let zero: Form = [vec![0.0; g.len() * m * m], vec![0.0; g.len() * m * m]];
    LuSolver::new(&jacobian(g, m, &zero, unknowns, &pos))
}

/// Jacobian `Σᵢ Dᵢ(Dᵢ + ad Fᵢ)` in `so(m)` coordinates, restricted to the
/// unknown nodes (`δ = 0` elsewhere).
fn jacobian(g: &DiscGrid, m: usize, f: &Form, unknowns: &[usize], pos: &[usize]) -> CsrMatrix {
    let k = skew_dim(m);
    let mm = m * m;
    let n = g.len();
    let nu = unknowns.len();
    let mut total: Option<CsrMatrix> = None;
    for axis in 0..2 {
        let d = g.derivative(axis);
        let mut outer = Vec::new();
        let mut rows_needed = vec![false; n];
        for (s, &r) in unknowns.iter().enumerate() {
            for (c, v) in d.row(r) {
                rows_needed[c] = true;
                for a in 0..k {
                    outer.push((s * k + a, c * k + a, v));
                }
            }
        }
        let mut inner = Vec::new();
        for r in (0..n).filter(|&r| rows_needed[r]) {
            for (c, v) in d.row(r) {
                if pos[c] != usize::MAX {
                    for a in 0..k {
                        inner.push((r * k + a, pos[c] * k + a, v));
                    }
                }
            }
            if pos[r] != usize::MAX {
                let ad = ad_matrix(&f[axis][r * mm..(r + 1) * mm], m);
                for a in 0..k {
                    for b in 0..k {
                        if ad[a * k + b] != 0.0 {
                            inner.push((r * k + a, pos[r] * k + b, ad[a * k + b]));
                        }
                    }
                }
            }
        }
        let outer = CsrMatrix::from_triplets(nu * k, n * k, &outer);
        let inner = CsrMatrix::from_triplets(n * k, nu * k, &inner);
        let term = outer.matmul(&inner);
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term),
        });
    }
    total.unwrap()
}

/// Solves `T(U, A) = 0` for `U` supported on `unknowns` by Newton's method with an
/// assembled Jacobian. A factorization left in `lu` by an earlier call is reused
/// while the iteration contracts fast enough.
pub(crate) fn newton(
    g: &DiscGrid,
    m: usize,
    a: &Form,
    unknowns: &[usize],
    cfg: &NewtonConfig,
    lu: &mut Option<Arc<LuSolver>>,
) -> Result<NewtonOutcome> {
    let k = skew_dim(m);
    let mm = m * m;
    let mut pos = vec![usize::MAX; g.len()];
    for (i, &node) in unknowns.iter().enumerate() {
        pos[node] = i;
    }
    let mut u = vec![0.0; g.len() * mm];
    if lu.as_ref().is_some_and(|f| f.dim() != unknowns.len() * k) {
        *lu = None;
    }
    let mut factorizations = 0;
    let mut prev: Option<f64> = None;
    let mut ratio = 0.0;
    let mut coords = vec![0.0; k];
    let mut block = vec![0.0; mm];
    for it in 0..=cfg.max_iterations {
        let (t, f) = t_form(g, m, &u, a);
        let res = l2_matrix(g, &t, mm, unknowns);
        if !res.is_finite() {
            return Err(Error::StepFailure {
                iterations: it,
                residual: res,
            });
        }
        if res <= cfg.tol {
            return Ok(NewtonOutcome {
                u,
                iterations: it,
                residual: res,
                factorizations,
            });
        }
        if let Some(p) = prev {
            if res > cfg.growth_factor * p {
                return Err(Error::StepFailure {
                    iterations: it,
                    residual: res,
                });
            }
            ratio = res / p;
        }
        if it == cfg.max_iterations {
            return Err(Error::StepFailure {
                iterations: it,
                residual: res,
            });
        }
        prev = Some(res);
        if lu.is_none() || ratio > cfg.refactor_ratio {
            *lu = Some(Arc::new(LuSolver::new(&jacobian(g, m, &f, unknowns, &pos))?));
            factorizations += 1;
        }
        let mut rhs = vec![0.0; unknowns.len() * k];
        for (s, &node) in unknowns.iter().enumerate() {
            to_coords(&t[node * mm..(node + 1) * mm], m, &mut coords);
            for a in 0..k {
                rhs[s * k + a] = -coords[a];
            }
        }
        let delta = lu.as_ref().expect("factorized above").solve(&rhs, 1e3 * SOLVE_TOL)?;
        for (s, &node) in unknowns.iter().enumerate() {
            from_coords(&delta[s * k..(s + 1) * k], m, &mut block);
            for (x, y) in u[node * mm..(node + 1) * mm].iter_mut().zip(&block) {
                *x += y;
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// One continuation step: `U` skew, zero off the working disc, with
/// `‖T(U, λ)‖_{L²} ≤ cfg.tol` for `A = ∇⊥ζ + λ`.
pub fn solve_gauge_step(zeta: &Field, lambda: &Field, d: &Disc, cfg: &NewtonConfig) -> Result<(Field, NewtonOutcome)> {
    let m = check_matrix(zeta, 1, "ζ")?;
    let g = zeta.grid();
    let a = assemble_a(zeta, Some(lambda))?;
    let unknowns = g.resolved_nodes(d)?;
    let out = newton(g, m, &a, &unknowns, cfg, &mut None)?;
    let u = Field::from_parts(g.clone(), Shape::matrix(m), Structure::Skew, out.u.clone());
    Ok((u, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::measure::l2_norm;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(build_grid(n).unwrap())
    }

    /// Skew 3×3 field from a vector-valued function via the hat map.
    fn hat_field(g: &Arc<DiscGrid>, f: impl Fn([f64; 2]) -> [f64; 3]) -> Field {
        Field::from_fn(g.clone(), Shape::matrix(3), Structure::Skew, |x| {
            let w = f(x);
            vec![0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0]
        })
        .unwrap()
    }

    fn bump(x: [f64; 2]) -> f64 {
        1.0 - x[0] * x[0] - x[1] * x[1]
    }

    #[test]
    fn t_of_zero_is_div_perp() {
        let g = grid(33);
        let zero = Field::zeros(g.clone(), Shape::matrix(3), Structure::Skew);
        let lam = Field::zeros(g.clone(), Shape::matrix_form(3), Structure::Skew);
        let zeta = hat_field(&g, |x| [x[0] * x[1], (2.0 * x[0]).sin(), x[1] * x[1]]);
        let t = t_apply(&zero, &lam, &zeta).unwrap();
        // D₁, D₂ commute away from the rim.
        let inner = crate::elliptic::harmonic_residual(&t, &Disc::new([0.0, 0.0], 0.8).unwrap());
        let _ = inner;
        let deep: f64 = g
            .interior()
            .filter(|&k| crate::grid::norm(g.node(k).x) < 0.85)
            .flat_map(|k| t.at(k).to_vec())
            .fold(0.0, |a, b| a.max(b.abs()));
        assert!(deep < 1e-12, "{deep:e}");
    }

    #[test]
    fn t_with_gradient_lambda_is_laplacian() {
        let g = grid(65);
        let zero = Field::zeros(g.clone(), Shape::matrix(3), Structure::Skew);
        let s = [0.0, -1.0, 0.5, 1.0, 0.0, -0.25, -0.5, 0.25, 0.0];
        let lam = Field::from_fn(g.clone(), Shape::matrix_form(3), Structure::Skew, |x| {
            let gr = [-2.0 * x[0], -2.0 * x[1]];
            let mut v = vec![0.0; 18];
            for c in 0..9 {
                v[2 * c] = gr[0] * s[c];
                v[2 * c + 1] = gr[1] * s[c];
            }
            v
        })
        .unwrap();
        let t = t_apply(&zero, &lam, &zero).unwrap();
        for k in g.interior().filter(|&k| crate::grid::norm(g.node(k).x) < 0.9) {
            for c in 0..9 {
                assert!((t.at(k)[c] + 4.0 * s[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let g = grid(33);
        let psi = hat_field(&g, |x| {
            let b = bump(x).max(0.0);
            [b * x[0], b * (x[1] + 0.5), b * x[0] * x[1]]
        });
        let zeta = hat_field(&g, |x| [0.3 * x[1], 0.2 * x[0] * x[0], -0.1 * x[0]]);
        let lam = {
            let a = hat_field(&g, |x| [0.1 * x[0], 0.05, 0.2 * x[1]]);
            let b = hat_field(&g, |x| [-0.1, 0.3 * x[0] * x[1], 0.0]);
            Field::from_slots(&a, &b).unwrap()
        };
        let base = t_apply(&Field::zeros(g.clone(), Shape::matrix(3), Structure::Skew), &lam, &zeta).unwrap();
        let pred = linearized_apply(&psi, &zeta, Some(&lam)).unwrap();
        let mut errs = Vec::new();
        for eps in [1e-3, 1e-4] {
            let t = t_apply(&psi.scale(eps), &lam, &zeta).unwrap();
            let fd = t.sub(&base).unwrap().scale(1.0 / eps);
            errs.push(l2_norm(&fd.sub(&pred).unwrap()) / l2_norm(&pred));
        }
        assert!(errs[0] < 1e-2 && errs[1] < errs[0] / 5.0, "{errs:?}");

        let zero = Field::zeros(g.clone(), Shape::matrix(3), Structure::Skew);
        assert_eq!(l2_norm(&linearized_apply(&zero, &zeta, None).unwrap()), 0.0);
    }

    #[test]
    fn newton_examples() {
        let g = grid(33);
        let cfg = NewtonConfig::default();
        let zero = Field::zeros(g.clone(), Shape::matrix(3), Structure::Skew);
        let lam0 = Field::zeros(g.clone(), Shape::matrix_form(3), Structure::Skew);
        let (_, out) = solve_gauge_step(&zero, &lam0, &Disc::unit(), &cfg).unwrap();
        assert_eq!(out.iterations, 0);

        // Manufactured root: λ := −(∇e^{U*}) e^{−U*} conjugated back, so that
        // e^{−U*}∇e^{U*} + e^{−U*}λe^{U*} = 0 identically.
        let ustar = hat_field(&g, |x| {
            let b = bump(x).max(0.0);
            [0.2 * b, 0.1 * b * x[0], -0.15 * b * x[1]]
        });
        let q = exp_nodes(ustar.data(), 3);
        let mut lam: Form = [vec![0.0; q.len()], vec![0.0; q.len()]];
        let mut tmp = vec![0.0; 9];
        for axis in 0..2 {
            let dq = derive(&g, axis, &q, 9);
            for k in 0..g.len() {
                let s = k * 9..(k + 1) * 9;
                // λ = −∂Q Qᵀ
                let mut qt = vec![0.0; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        qt[i * 3 + j] = q[k * 9 + j * 3 + i];
                    }
                }
                matmul(&dq[s.clone()], &qt, 3, &mut tmp);
                for (l, v) in lam[axis][s].iter_mut().zip(&tmp) {
                    *l = -v;
                }
            }
        }
        let lam = field_from_form(&g, 3, &lam, Structure::General);
        let (_, out) = solve_gauge_step(&zero, &lam, &Disc::unit(), &cfg).unwrap();
        assert!(out.residual <= cfg.tol);
    }
}
