//! Continuation in `t` from `(P, ξ) = (I, 0)` to a decomposition of `Ω`.

use super::lie::{exp_skew_matrix, matmul, matmul_tn, skew_project};
use super::operator::{base_jacobian, derive, field_from_form, form_from_field, l2_matrix, newton, Form, NewtonConfig};
use super::potential::{PotentialSolver, DEFAULT_DIVERGENCE_TOL};
use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{Disc, DiscGrid};
use crate::sparse::LuSolver;
use std::sync::Arc;

/// Skew-symmetric `m×m×2` coefficient field.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewPotential {
    field: Field,
}

pub const SKEW_TOL: f64 = 1e-12;

impl SkewPotential {
    pub fn new(field: Field) -> Result<Self> {
        let sh = field.shape();
        if sh.rows != sh.cols || sh.spatial != 2 {
            return Err(Error::ShapeMismatch {
                expected: "m×m×2".into(),
                found: sh.to_string(),
            });
        }
        let defect = field.skew_defect()?;
        if defect > SKEW_TOL {
            return Err(Error::Structure(format!("Ω is not skew: defect {defect:e}")));
        }
        let field = field.skew_part()?;
        Ok(Self { field })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn m(&self) -> usize {
        self.field.shape().rows
    }

    /// `‖Ω‖_{L²(d)}`.
    pub fn l2_on(&self, d: &Disc) -> f64 {
        let g = self.field.grid();
        l2_matrix(g, self.field.data(), self.field.ncomp(), &g.nodes_in(d))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeConfig {
    pub newton: NewtonConfig,
    pub initial_step: f64,
    pub min_step: f64,
    /// Upper bound on `‖Ω‖_{L²(d)}`.
    pub epsilon_threshold: f64,
    pub divergence_tol: f64,
    /// Accepted states need `‖∇⊥ξ − W‖ ≤ residual_tol · t‖Ω‖`.
    pub residual_tol: f64,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            initial_step: 0.1,
            min_step: 1e-3,
            epsilon_threshold: 0.5,
            divergence_tol: DEFAULT_DIVERGENCE_TOL,
            residual_tol: 1e-3,
        }
    }
}

/// Record of one accepted continuation step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationState {
    pub t: f64,
    pub step: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub factorizations: usize,
    pub residual: f64,
}

/// `P` and `ξ` with `∇⊥ξ ≈ P⁻¹∇P + P⁻¹ΩP` on the working disc.
#[derive(Clone, Debug)]
pub struct GaugePair {
    pub p: Field,
    pub xi: Field,
    /// The gauged form `skew(P⁻¹∇P + P⁻¹ΩP)`.
    pub form: Field,
    pub disc: Disc,
    /// `‖∇⊥ξ − P⁻¹∇P − P⁻¹ΩP‖_{L²(d)}`.
    pub residual: f64,
    pub omega_norm: f64,
    pub history: Vec<ContinuationState>,
    /// Number of step halvings along the way.
    pub halvings: usize,
}

impl GaugePair {
    pub fn relative_residual(&self) -> f64 {
        if self.omega_norm == 0.0 {
            self.residual
        } else {
            self.residual / self.omega_norm
        }
    }
}

/// `skew(Rᵀ∂ᵢR + Rᵀ(tΩᵢ)R)` for both slots.
pub(crate) fn gauged_form(g: &DiscGrid, m: usize, r: &[f64], omega: &Form, t: f64) -> Form {
    let mm = m * m;
    let mut out: Form = [vec![0.0; r.len()], vec![0.0; r.len()]];
    let (mut t1, mut t2) = (vec![0.0; mm], vec![0.0; mm]);
    for axis in 0..2 {
        let dr = derive(g, axis, r, mm);
        for k in 0..g.len() {
            let s = k * mm..(k + 1) * mm;
            let rk = &r[s.clone()];
            let o = &mut out[axis][s.clone()];
            matmul_tn(rk, &dr[s.clone()], m, o);
            matmul_tn(rk, &omega[axis][s.clone()], m, &mut t1);
            matmul(&t1, rk, m, &mut t2);
            o.iter_mut().zip(&t2).for_each(|(x, y)| *x += t * y);
            skew_project(o, m);
        }
    }
    out
}

/// `‖∇⊥ξ − W‖_{L²}` over `nodes`.
pub(crate) fn potential_residual(g: &DiscGrid, mm: usize, xi: &[f64], w: &Form, nodes: &[usize]) -> f64 {
    let dx = derive(g, 0, xi, mm);
    let dy = derive(g, 1, xi, mm);
    let e0: Vec<f64> = dy.iter().zip(&w[0]).map(|(a, b)| -a - b).collect();
    let e1: Vec<f64> = dx.iter().zip(&w[1]).map(|(a, b)| a - b).collect();
    (l2_matrix(g, &e0, mm, nodes).powi(2) + l2_matrix(g, &e1, mm, nodes).powi(2)).sqrt()
}

/// Grid- and disc-dependent factorizations shared by decompositions of different
/// potentials of the same size.
pub struct GaugeWorkspace {
    grid: Arc<DiscGrid>,
    disc: Disc,
    m: usize,
    nodes: Vec<usize>,
    potential: PotentialSolver,
    base: Arc<LuSolver>,
}

impl GaugeWorkspace {
    pub fn new(grid: &Arc<DiscGrid>, d: &Disc, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "matrix size must be at least 2, got {m}"
            )));
        }
        let nodes = grid.resolved_nodes(d)?;
        Ok(Self {
            grid: grid.clone(),
            disc: *d,
            m,
            potential: PotentialSolver::new(grid, d)?,
            base: Arc::new(base_jacobian(grid, m, &nodes)?),
            nodes,
        })
    }
}

/// Decomposes `Ω` on `d` by continuation in `t`. Each step solves `T(U, λ) = 0`
/// with `λ = Rᵀ(Δt Ω)R` and the carried form `W_t` in place of `∇⊥ξ_t`, then
/// updates `R ← R e^U` and recovers `ξ` from `W_{t+Δt}`.
pub fn decompose(omega: &SkewPotential, d: &Disc, cfg: &GaugeConfig) -> Result<GaugePair> {
    // Reject before paying for the factorizations.
    check_smallness(omega, d, cfg)?;
    decompose_in(&GaugeWorkspace::new(omega.field().grid(), d, omega.m())?, omega, cfg)
}

fn check_smallness(omega: &SkewPotential, d: &Disc, cfg: &GaugeConfig) -> Result<f64> {
    let norm = omega.l2_on(d);
    if !(norm <= cfg.epsilon_threshold) {
        return Err(Error::SmallnessViolated {
            norm,
            threshold: cfg.epsilon_threshold,
        });
    }
    Ok(norm)
}

/// [`decompose`] with prebuilt factorizations.
pub fn decompose_in(ws: &GaugeWorkspace, omega: &SkewPotential, cfg: &GaugeConfig) -> Result<GaugePair> {
    let f = omega.field();
    let g = &ws.grid;
    let m = omega.m();
    if m != ws.m || f.grid().resolution() != g.resolution() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}x2 on resolution {}", ws.m, ws.m, g.resolution()),
            found: format!("{} on resolution {}", f.shape(), f.grid().resolution()),
        });
    }
    let d = &ws.disc;
    let mm = m * m;
    let nodes = &ws.nodes;
    let omega_norm = check_smallness(omega, d, cfg)?;
    let om = form_from_field(f);
    let solver = &ws.potential;

    let mut r = Field::identity(g.clone(), m).into_data();
    let mut w: Form = [vec![0.0; r.len()], vec![0.0; r.len()]];
    let mut xi = vec![0.0; r.len()];
    let mut t = 0.0;
    let mut step = cfg.initial_step;
    let mut history = Vec::new();
    let mut halvings = 0;
    let mut residual = 0.0;
    let mut block = vec![0.0; mm];
    let mut lu = Some(ws.base.clone());

    while t < 1.0 {
        step = step.min(1.0 - t);
        let t1 = if step >= 1.0 - t { 1.0 } else { t + step };
        let dt = t1 - t;
        let attempt = (|| -> Result<_> {
            let lam = gauged_form_no_derivative(g, m, &r, &om, dt);
            let a: Form = [0, 1].map(|s| w[s].iter().zip(&lam[s]).map(|(x, y)| x + y).collect());
            let out = newton(g, m, &a, nodes, &cfg.newton, &mut lu)?;
            let mut r_new = r.clone();
            for &k in nodes {
                let q = exp_skew_matrix(&out.u[k * mm..(k + 1) * mm], m);
                matmul(&r[k * mm..(k + 1) * mm], &q, m, &mut block);
                r_new[k * mm..(k + 1) * mm].copy_from_slice(&block);
            }
            let w_new = gauged_form(g, m, &r_new, &om, t1);
            let wf = field_from_form(g, m, &w_new, Structure::Skew);
            let xi_new = solver.recover(&wf, cfg.divergence_tol)?.into_data();
            let res = potential_residual(g, mm, &xi_new, &w_new, nodes);
            if res > cfg.residual_tol * t1 * omega_norm {
                return Err(Error::StepFailure {
                    iterations: out.iterations,
                    residual: res,
                });
            }
            Ok((out, r_new, w_new, xi_new, res))
        })();
        match attempt {
            Ok((out, r_new, w_new, xi_new, res)) => {
                r = r_new;
                w = w_new;
                xi = xi_new;
                residual = res;
                t = t1;
                history.push(ContinuationState {
                    t,
                    step: dt,
                    newton_iterations: out.iterations,
                    newton_residual: out.residual,
                    factorizations: out.factorizations,
                    residual: res,
                });
                step = (2.0 * dt).min(cfg.initial_step);
            }
            Err(Error::StepFailure { .. })
            | Err(Error::DivergenceTooLarge { .. })
            | Err(Error::SolverFailure { .. }) => {
                step = dt / 2.0;
                halvings += 1;
                lu = None;
                if step < cfg.min_step {
                    return Err(Error::DecompositionFailed { last_t: t, step });
                }
            }
            Err(e) => return Err(e),
        }
    }

    Ok(GaugePair {
        p: Field::from_parts(g.clone(), Shape::matrix(m), Structure::Rotation, r),
        xi: Field::from_parts(g.clone(), Shape::matrix(m), Structure::Skew, xi),
        form: field_from_form(g, m, &w, Structure::Skew),
        disc: *d,
        residual,
        omega_norm,
        history,
        halvings,
    })
}

/// `Rᵀ(sΩ)R` for both slots, without the derivative term.
fn gauged_form_no_derivative(g: &DiscGrid, m: usize, r: &[f64], omega: &Form, s: f64) -> Form {
    let mm = m * m;
    let mut out: Form = [vec![0.0; r.len()], vec![0.0; r.len()]];
    let mut t1 = vec![0.0; mm];
    for axis in 0..2 {
        for k in 0..g.len() {
            let sl = k * mm..(k + 1) * mm;
            matmul_tn(&r[sl.clone()], &omega[axis][sl.clone()], m, &mut t1);
            let o = &mut out[axis][sl.clone()];
            matmul(&t1, &r[sl.clone()], m, o);
            o.iter_mut().for_each(|v| *v *= s);
            skew_project(o, m);
        }
    }
    out
}

/// Smooth manufactured potential `Ω = P₀∇⊥ξ₀P₀⁻¹ − ∇P₀P₀⁻¹` with
/// `P₀ = exp(U₀)`, `U₀ = 0` on the unit circle; `amplitude` scales `U₀` and `ξ₀`.
pub fn manufactured_omega(grid: &Arc<DiscGrid>, m: usize, amplitude: f64) -> Result<SkewPotential> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "matrix size must be at least 2, got {m}"
        )));
    }
    let mm = m * m;
    let pairs = super::lie::basis_pairs(m);
    let shape = Shape::matrix(m);
    let build = |f: &dyn Fn([f64; 2], usize) -> f64| {
        Field::from_fn(grid.clone(), shape, Structure::Skew, |x| {
            let mut v = vec![0.0; mm];
            for (b, &(p, q)) in pairs.iter().enumerate() {
                let c = f(x, b);
                v[p * m + q] = c;
                v[q * m + p] = -c;
            }
            v
        })
    };
    let u0 = build(&|x, b| {
        let bump = (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0);
        let ph = 0.7 * b as f64;
        amplitude * bump * (0.8 * x[0] + ph).cos() * (1.0 + 0.5 * x[1] * (b as f64 + 1.0).sqrt())
    })?;
    let xi0 = build(&|x, b| {
        let ph = 1.1 * b as f64;
        amplitude * ((0.9 * x[0] - 0.6 * x[1] + ph).sin() + 0.3 * x[0] * x[1])
    })?;
    let p0 = super::lie::exp_skew(&u0)?.into_data();
    let g = &**grid;
    let gx = derive(g, 0, xi0.data(), mm);
    let gy = derive(g, 1, xi0.data(), mm);
    let perp = [gy.iter().map(|v| -v).collect::<Vec<_>>(), gx];
    let mut om: Form = [vec![0.0; p0.len()], vec![0.0; p0.len()]];
    let (mut t1, mut t2, mut t3) = (vec![0.0; mm], vec![0.0; mm], vec![0.0; mm]);
    for axis in 0..2 {
        let dp = derive(g, axis, &p0, mm);
        for k in 0..g.len() {
            let s = k * mm..(k + 1) * mm;
            let pk = &p0[s.clone()];
            let mut pt = vec![0.0; mm];
            for i in 0..m {
                for j in 0..m {
                    pt[i * m + j] = pk[j * m + i];
                }
            }
            matmul(pk, &perp[axis][s.clone()], m, &mut t1);
            matmul(&t1, &pt, m, &mut t2);
            matmul(&dp[s.clone()], &pt, m, &mut t3);
            let o = &mut om[axis][s.clone()];
            for i in 0..mm {
                o[i] = t2[i] - t3[i];
            }
            skew_project(o, m);
        }
    }
    SkewPotential::new(field_from_form(grid, m, &om, Structure::Skew))
}
