//! BMO seminorm, a discrete Hardy norm via one canonical maximal function, and the
//! div–curl, duality and Wente measurements built on them.

use crate::elliptic::{gradient, Boundary, DiscLaplacian};
use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{norm, Disc, DiscGrid, MEMBER_EPS};
use crate::measure::{l2_norm, lp_norm_over, mean_over, node_norm};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// `c` in `φ₀(z) = c(1 − |z|²)³`, chosen so that `max|∇φ₀| = 1`.
pub const BUMP_SCALE: f64 = 0.582_309_369_140_570_2;

pub fn bump(z2: f64) -> f64 {
    if z2 >= 1.0 {
        0.0
    } else {
        BUMP_SCALE * (1.0 - z2).powi(3)
    }
}

fn check_scalar_or_vector(f: &Field) -> Result<()> {
    if f.shape().spatial != 1 {
        return Err(Error::ShapeMismatch {
            expected: "spatial arity 1".into(),
            found: f.shape().to_string(),
        });
    }
    Ok(())
}

/// Radii `R, R/2, R/4, …` down to `2h`.
fn dyadic_radii(h: f64, max_radius: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = max_radius;
    while r >= 2.0 * h * (1.0 - 1e-12) {
        out.push(r);
        r /= 2.0;
    }
    out
}

/// `sup ⨍_B |f − (f)_B|` over discs `B = B_r(x_k) ⊂ D²` with node centers and
/// dyadic radii in `[2h, max_radius]`.
pub fn bmo_seminorm(f: &Field, max_radius: f64) -> Result<f64> {
    check_scalar_or_vector(f)?;
    let g = f.grid();
    let h = g.spacing();
    if !(max_radius > h) {
        return Err(Error::InvalidParameter(format!(
            "BMO radius {max_radius} must exceed the spacing {h}"
        )));
    }
    let radii = dyadic_radii(h, max_radius);
    let w = g.weights();
    let nc = f.ncomp();
    let sup = g
        .interior()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| {
            let x = g.node(k).x;
            let mut best: f64 = 0.0;
            for &r in &radii {
                if norm(x) + r > 1.0 + MEMBER_EPS {
                    continue;
                }
                let nodes: Vec<usize> = g
                    .nearby(x, r + MEMBER_EPS)
                    .into_iter()
                    .filter(|&q| q < g.n_interior())
                    .collect();
                let mean = mean_over(f, &nodes);
                let (mut acc, mut area) = (0.0, 0.0);
                let mut diff = vec![0.0; nc];
                for &q in &nodes {
                    for (c, v) in f.at(q).iter().enumerate() {
                        diff[c] = v - mean[c];
                    }
                    acc += w[q] * node_norm(&diff);
                    area += w[q];
                }
                if area > 0.0 {
                    best = best.max(acc / area);
                }
            }
            best
        })
        .collect::<Vec<f64>>();
    Ok(sup.into_iter().fold(0.0, f64::max))
}

/// Scales and evaluation window of the discrete maximal function.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximalConfig {
    /// Sorted, positive.
    pub scales: Vec<f64>,
    /// The window is `[−1 − margin, 1 + margin]²`; must be at least the largest scale.
    pub margin: f64,
}

impl MaximalConfig {
    pub fn new(mut scales: Vec<f64>, margin: f64) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidParameter("empty scale set".into()));
        }
        if scales.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParameter("scales must be positive".into()));
        }
        scales.sort_by(f64::total_cmp);
        let tmax = *scales.last().unwrap();
        if !(margin >= tmax) {
            return Err(Error::InvalidParameter(format!(
                "window margin {margin} does not cover the largest scale {tmax}"
            )));
        }
        Ok(Self { scales, margin })
    }

    /// `t = 2ʲh` for `j ≥ 1` up to the margin.
    pub fn dyadic(spacing: f64, margin: f64) -> Result<Self> {
        let mut scales = Vec::new();
        let mut t = 2.0 * spacing;
        while t <= margin * (1.0 + 1e-12) {
            scales.push(t);
            t *= 2.0;
        }
        Self::new(scales, margin)
    }
}

struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn run(&self, data: &mut [Complex<f64>], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let n = self.n;
        plan.process(data);
        let mut col = vec![Complex::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
        if inverse {
            let s = 1.0 / (n * n) as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Window layout: lattice node `(i, j)` of the grid sits at `(i + pad, j + pad)`.
fn window(g: &DiscGrid, margin: f64) -> (usize, usize) {
    let h = g.spacing();
    let pad = (margin / h).ceil() as usize;
    (g.resolution() + 2 * pad, pad)
}

/// Discrete maximal function `f*(x) = sup_t |∫ t⁻²φ₀((x − y)/t) f(y) dy|` on the
/// window lattice, with `f` extended by zero off the disc. Row-major `n×n`.
pub fn maximal_function(f: &Field, cfg: &MaximalConfig) -> Result<(Vec<f64>, usize)> {
    check_scalar_or_vector(f)?;
    let g = f.grid();
    let h = g.spacing();
    let (n, pad) = window(g, cfg.margin);
    let fft = Fft2::new(n);
    let nc = f.ncomp();
    let w = g.weights();

    let mut spectra = Vec::with_capacity(nc);
    for c in 0..nc {
        let mut buf = vec![Complex::default(); n * n];
        for k in g.interior() {
            let (i, j) = g.lattice_position(k).expect("interior nodes are lattice nodes");
            buf[(i + pad) * n + j + pad] = Complex::new(f.at(k)[c] * w[k], 0.0);
        }
        fft.run(&mut buf, false);
        spectra.push(buf);
    }

    let mut out = vec![0.0; n * n];
    let mut kernel = vec![Complex::default(); n * n];
    let mut conv = vec![Complex::default(); n * n];
    let mut mag = vec![0.0; n * n];
    for &t in &cfg.scales {
        kernel.iter_mut().for_each(|v| *v = Complex::default());
        let reach = (t / h).ceil() as i64;
        for di in -reach..=reach {
            for dj in -reach..=reach {
                let z2 = ((di * di + dj * dj) as f64) * h * h / (t * t);
                let v = bump(z2) / (t * t);
                if v != 0.0 {
                    let i = di.rem_euclid(n as i64) as usize;
                    let j = dj.rem_euclid(n as i64) as usize;
                    kernel[i * n + j] = Complex::new(v, 0.0);
                }
            }
        }
        fft.run(&mut kernel, false);
        mag.iter_mut().for_each(|v| *v = 0.0);
        for spec in &spectra {
            for ((c, a), b) in conv.iter_mut().zip(spec).zip(&kernel) {
                *c = a * b;
            }
            fft.run(&mut conv, true);
            for (m, c) in mag.iter_mut().zip(&conv) {
                *m += c.re * c.re;
            }
        }
        for (o, m) in out.iter_mut().zip(&mag) {
            *o = f64::max(*o, m.sqrt());
        }
    }
    Ok((out, n))
}

/// `‖f*‖_{L¹}` over the window.
pub fn hardy_norm(f: &Field, cfg: &MaximalConfig) -> Result<f64> {
    let (mx, _) = maximal_function(f, cfg)?;
    let h = f.grid().spacing();
    Ok(mx.iter().sum::<f64>() * h * h)
}

/// Relative size below which a denominator factor counts as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// `‖∇f‖₂` is numerically zero compared with `‖f‖₂`.
fn flat(grad: f64, f: &Field) -> bool {
    grad <= DEGENERATE_TOL * l2_norm(f).max(1.0)
}

/// `f` minus its mean over the unit disc.
fn mean_free(f: &Field) -> Field {
    let g = f.grid();
    let nodes: Vec<usize> = g.interior().collect();
    let mean = mean_over(f, &nodes);
    let nc = f.ncomp();
    let data = f.data().iter().enumerate().map(|(i, v)| v - mean[i % nc]).collect();
    Field::from_parts(g.clone(), f.shape(), Structure::General, data)
}

/// `∇a·∇⊥b = −∂₁a ∂₂b + ∂₂a ∂₁b` for scalar `a`, `b`.
pub fn div_curl_product(a: &Field, b: &Field) -> Result<Field> {
    for f in [a, b] {
        if f.shape() != Shape::SCALAR {
            return Err(Error::ShapeMismatch {
                expected: "scalar".into(),
                found: f.shape().to_string(),
            });
        }
    }
    let (ga, gb) = (gradient(a)?, gradient(b)?);
    let data = (0..a.grid().len())
        .map(|k| {
            let (x, y) = (ga.at(k), gb.at(k));
            -x[0] * y[1] + x[1] * y[0]
        })
        .collect();
    Ok(Field::from_parts(
        a.grid().clone(),
        Shape::SCALAR,
        Structure::General,
        data,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivCurlReport {
    pub hardy: f64,
    pub grad_a: f64,
    pub grad_b: f64,
    /// `‖∇a·∇⊥b‖_𝓗 / (‖∇a‖₂‖∇b‖₂)`, 0 when either gradient vanishes.
    pub ratio: f64,
}

pub fn div_curl_hardy_check(a: &Field, b: &Field, cfg: &MaximalConfig) -> Result<DivCurlReport> {
    let rho = mean_free(&div_curl_product(a, b)?);
    let grad_a = l2_norm(&gradient(a)?);
    let grad_b = l2_norm(&gradient(b)?);
    let hardy = hardy_norm(&rho, cfg)?;
    let ratio = if flat(grad_a, a) || flat(grad_b, b) {
        0.0
    } else {
        hardy / (grad_a * grad_b)
    };
    Ok(DivCurlReport {
        hardy,
        grad_a,
        grad_b,
        ratio,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityReport {
    pub pairing: f64,
    pub bmo: f64,
    pub hardy: f64,
    /// `|∫fg| / ([f]_BMO ‖g‖_𝓗)`; `None` when a denominator factor vanishes.
    pub ratio: Option<f64>,
}

pub fn duality_check(f: &Field, g: &Field, bmo_radius: f64, cfg: &MaximalConfig) -> Result<DualityReport> {
    if f.shape() != Shape::SCALAR || g.shape() != Shape::SCALAR {
        return Err(Error::ShapeMismatch {
            expected: "scalar pair".into(),
            found: format!("{} and {}", f.shape(), g.shape()),
        });
    }
    let grid = f.grid();
    let w = grid.weights();
    let pairing: f64 = grid.interior().map(|k| w[k] * f.at(k)[0] * g.at(k)[0]).sum();
    let bmo = bmo_seminorm(f, bmo_radius)?;
    let hardy = hardy_norm(g, cfg)?;
    let scale_f = l2_norm(f).max(f64::MIN_POSITIVE);
    let degenerate = bmo <= DEGENERATE_TOL * scale_f || hardy == 0.0;
    Ok(DualityReport {
        pairing,
        bmo,
        hardy,
        ratio: (!degenerate).then(|| pairing.abs() / (bmo * hardy)),
    })
}

#[derive(Clone, Debug)]
pub struct WenteReport {
    pub p: f64,
    pub u: Field,
    pub grad_u: f64,
    pub grad_a: f64,
    pub grad_b: f64,
    /// `‖∇u‖_p / (‖∇a‖₂ ‖∇b‖_p)`.
    pub ratio: f64,
}

/// Reusable Dirichlet solver for batches of Wente measurements.
pub struct WenteSolver {
    laplacian: DiscLaplacian,
}

impl WenteSolver {
    pub fn new(grid: &Arc<DiscGrid>) -> Result<Self> {
        Ok(Self {
            laplacian: DiscLaplacian::new(grid, &Disc::unit())?,
        })
    }

    /// Solves `−Δu = ∇a·∇⊥b`, `u = 0` on the circle, and measures the ratio.
    pub fn check(&self, a: &Field, b: &Field, p: f64) -> Result<WenteReport> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must lie in (1, ∞), got {p}")));
        }
        let rho = div_curl_product(a, b)?;
        let u = self.laplacian.solve(&rho, Boundary::Zero)?;
        let g = a.grid();
        let nodes: Vec<usize> = g.interior().collect();
        let grad_u = lp_norm_over(&gradient(&u)?, &nodes, p);
        let grad_a = lp_norm_over(&gradient(a)?, &nodes, 2.0);
        let grad_b = lp_norm_over(&gradient(b)?, &nodes, p);
        let ratio = if flat(grad_a, a) || flat(grad_b, b) {
            0.0
        } else {
            grad_u / (grad_a * grad_b)
        };
        Ok(WenteReport {
            p,
            u,
            grad_u,
            grad_a,
            grad_b,
            ratio,
        })
    }
}

pub fn wente_check(a: &Field, b: &Field, p: f64) -> Result<WenteReport> {
    WenteSolver::new(a.grid())?.check(a, b, p)
}

/// Largest finite ratio of a batch.
pub fn batch_max(ratios: impl IntoIterator<Item = f64>) -> f64 {
    ratios.into_iter().filter(|r| r.is_finite()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(build_grid(n).unwrap())
    }

    #[test]
    fn bump_gradient_peaks_at_one() {
        // |∇φ₀|(ρ) = 6cρ(1 − ρ²)², maximal at ρ = 1/√5.
        let rho = 1.0 / 5f64.sqrt();
        let slope = 6.0 * BUMP_SCALE * rho * (1.0 - rho * rho).powi(2);
        assert!((slope - 1.0).abs() < 1e-12);
        assert!((BUMP_SCALE - 25.0 * 5f64.sqrt() / 96.0).abs() < 1e-15);
    }

    #[test]
    fn bmo_constant_is_zero() {
        let g = grid(33);
        let f = Field::scalar_fn(g, |_| 3.5);
        assert!(bmo_seminorm(&f, 0.5).unwrap() < 1e-14);
    }

    #[test]
    fn bmo_of_linear_function() {
        let g = grid(129);
        let f = Field::scalar_fn(g.clone(), |x| x[0]);
        let r = 0.5;
        let v = bmo_seminorm(&f, r).unwrap();
        let exact = 4.0 * r / (3.0 * PI);
        assert!((v - exact).abs() < 0.02 * exact, "{v} vs {exact}");
        let shifted = bmo_seminorm(&f.map(Structure::General, |v| v + 7.0).unwrap(), r).unwrap();
        let scaled = bmo_seminorm(&f.scale(-2.0), r).unwrap();
        assert!((shifted - v).abs() < 1e-13 && (scaled - 2.0 * v).abs() < 1e-13);
    }

    #[test]
    fn bmo_of_jump() {
        let g = grid(65);
        let f = Field::scalar_fn(g, |x| if x[0] >= 0.0 { 1.0 } else { -1.0 });
        let v = bmo_seminorm(&f, 0.5).unwrap();
        assert!((0.5..=1.0).contains(&v), "{v}");
    }

    #[test]
    fn scale_set_validated() {
        assert!(MaximalConfig::new(vec![], 1.0).is_err());
        assert!(MaximalConfig::new(vec![0.5, 2.0], 1.0).is_err());
        let c = MaximalConfig::dyadic(1.0 / 32.0, 1.0).unwrap();
        assert_eq!(c.scales.len(), 5);
    }

    #[test]
    fn hardy_norm_homogeneous() {
        let g = grid(33);
        let cfg = MaximalConfig::dyadic(g.spacing(), 1.0).unwrap();
        assert_eq!(
            hardy_norm(&Field::zeros(g.clone(), Shape::SCALAR, Structure::General), &cfg).unwrap(),
            0.0
        );
        let f = Field::scalar_fn(g.clone(), |x| (3.0 * x[0]).sin() * x[1]);
        let a = hardy_norm(&f, &cfg).unwrap();
        let b = hardy_norm(&f.scale(-3.0), &cfg).unwrap();
        assert!(a > 0.0 && (b - 3.0 * a).abs() < 1e-12 * b);
    }

    /// `Δ` of the bump `(1 − 4|x|²)⁴` supported in `B_{1/2}`.
    fn laplacian_of_bump(x: [f64; 2]) -> f64 {
        let s = 4.0 * (x[0] * x[0] + x[1] * x[1]);
        if s >= 1.0 {
            return 0.0;
        }
        // φ'' + φ'/ρ with s = 4ρ².
        let q = 1.0 - s;
        -64.0 * q.powi(3) + 192.0 * s * q * q
    }

    #[test]
    fn hardy_norm_of_laplacian_is_stable() {
        let vals: Vec<f64> = [65, 129]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let f = Field::scalar_fn(g.clone(), laplacian_of_bump);
                hardy_norm(&f, &MaximalConfig::dyadic(g.spacing(), 1.0).unwrap()).unwrap()
            })
            .collect();
        assert!((vals[0] - vals[1]).abs() < 0.1 * vals[1], "{vals:?}");
    }

    #[test]
    fn nonzero_mean_not_in_hardy_space() {
        let g = grid(33);
        let f = Field::scalar_fn(g.clone(), |x| if norm(x) <= 0.5 { 1.0 } else { 0.0 });
        let norms: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&m| hardy_norm(&f, &MaximalConfig::dyadic(g.spacing(), m).unwrap()).unwrap())
            .collect();
        let steps = [norms[1] - norms[0], norms[2] - norms[1]];
        assert!(steps[0] > 0.0 && steps[1] > 0.5 * steps[0], "{norms:?}");
    }

    #[test]
    fn div_curl_of_equal_pair_vanishes() {
        let g = grid(33);
        let a = Field::scalar_fn(g.clone(), |x| (x[0] * 2.0).sin() + x[1] * x[1]);
        let cfg = MaximalConfig::dyadic(g.spacing(), 1.0).unwrap();
        let rep = div_curl_hardy_check(&a, &a, &cfg).unwrap();
        assert_eq!(rep.ratio, 0.0);
        let zero = Field::scalar_fn(g, |_| 1.0);
        assert_eq!(div_curl_hardy_check(&a, &zero, &cfg).unwrap().ratio, 0.0);
    }

    #[test]
    fn duality_examples() {
        let g = grid(65);
        let cfg = MaximalConfig::dyadic(g.spacing(), 1.0).unwrap();
        let lap = Field::scalar_fn(g.clone(), laplacian_of_bump);
        let c = Field::scalar_fn(g.clone(), |_| 2.0);
        assert!(duality_check(&c, &lap, 0.5, &cfg).unwrap().ratio.is_none());
        let x1 = Field::scalar_fn(g.clone(), |x| x[0] + x[0] * x[1]);
        let shifted = Field::scalar_fn(g.clone(), |x| laplacian_of_bump([x[0] - 0.2, x[1]]));
        let rep = duality_check(&x1, &shifted, 0.5, &cfg).unwrap();
        let r = rep.ratio.unwrap();
        assert!(r.is_finite() && r > 0.0, "{rep:?}");
    }

    #[test]
    fn wente_closed_form() {
        let g = grid(65);
        let a = Field::scalar_fn(g.clone(), |x| x[0]);
        let b = Field::scalar_fn(g.clone(), |x| x[1]);
        let rep = wente_check(&a, &b, 2.0).unwrap();
        let exact = (PI / 8.0).sqrt() / PI;
        assert!((rep.ratio - exact).abs() < 0.02 * exact, "{} vs {exact}", rep.ratio);
        let zero = wente_check(&a, &a, 2.0).unwrap();
        assert_eq!(zero.ratio, 0.0);
    }

    #[test]
    fn wente_invariances() {
        let g = grid(33);
        let solver = WenteSolver::new(&g).unwrap();
        let a = Field::scalar_fn(g.clone(), |x| (2.0 * x[0]).sin() * x[1]);
        let b = Field::scalar_fn(g.clone(), |x| x[0] * x[0] - (x[1] * 1.5).cos());
        let base = solver.check(&a, &b, 2.0).unwrap().ratio;
        let shifted = solver
            .check(
                &a.map(Structure::General, |v| v + 4.0).unwrap(),
                &b.map(Structure::General, |v| v - 1.0).unwrap(),
                2.0,
            )
            .unwrap()
            .ratio;
        let swapped = solver.check(&b, &a, 2.0).unwrap().ratio;
        assert!((shifted - base).abs() < 1e-9 * base);
        assert!((swapped - base).abs() < 1e-9 * base);
        assert!(solver.check(&a, &b, 1.0).is_err());
    }
}
