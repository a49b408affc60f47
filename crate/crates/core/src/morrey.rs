//! Morrey quantities `Jₚ`, `𝓜ₚ`, decay fits, the `v_ϱ`–BMO comparison, the
//! Dirichlet-growth modulus of continuity and the good-angle boundary probe.

use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{dist, norm, Disc, DiscGrid, MIN_DISC_NODES};
use crate::hardy_bmo::bmo_seminorm;
use crate::measure::{cutoff, lp_norm_over, mean_over, node_norm};
use crate::systems::BoundaryTrace;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Sub-radii per octave in the `𝓜ₚ` sample set.
const RADII_PER_OCTAVE: i32 = 4;

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, 2], got {p}")));
    }
    Ok(())
}

/// `|∇u|` at every node (Euclidean over all components and both directions).
pub fn gradient_density(u: &Field) -> Vec<f64> {
    let g = u.grid();
    let nc = u.ncomp();
    let dx = g.derivative(0).apply_strided(u.data(), nc);
    let dy = g.derivative(1).apply_strided(u.data(), nc);
    let live = g.n_interior() + g.n_boundary();
    (0..g.len())
        .map(|k| {
            if k >= live {
                return 0.0;
            }
            (k * nc..(k + 1) * nc)
                .map(|i| dx[i] * dx[i] + dy[i] * dy[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Precomputed `|∇u|` for repeated `Jₚ` queries.
#[derive(Clone, Debug)]
pub struct Energy<'a> {
    grid: &'a DiscGrid,
    density: Vec<f64>,
}

impl<'a> Energy<'a> {
    pub fn new(u: &'a Field) -> Self {
        Self {
            grid: u.grid(),
            density: gradient_density(u),
        }
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `∫_{B_r(a)∩D²} |∇u|ᵖ`, or `None` when the disc holds too few nodes.
    fn integral(&self, a: [f64; 2], r: f64, p: f64) -> Option<f64> {
        let nodes = self.grid.nodes_in(&Disc { center: a, radius: r });
        if nodes.len() < MIN_DISC_NODES {
            return None;
        }
        let w = self.grid.weights();
        Some(nodes.iter().map(|&k| w[k] * self.density[k].powf(p)).sum())
    }

    pub fn j_p(&self, a: [f64; 2], r: f64, p: f64) -> Result<f64> {
        check_p(p)?;
        let d = Disc::new(a, r)?;
        let v = self.integral(a, r, p).ok_or_else(|| Error::DiscUnresolved {
            cx: a[0],
            cy: a[1],
            radius: r,
            nodes: self.grid.nodes_in(&d).len(),
            min: MIN_DISC_NODES,
        })?;
        Ok(r.powf(p - 2.0) * v)
    }

    /// `sup Jₚ(z, ϱ)` over sub-lattice centers `z` (spacing `stride·h`, plus `a`)
    /// and radii `ϱ = r·2^{−k/4} ≥ h` with `|a − z| + ϱ ≤ r`. Sets for `r` and
    /// `r·2^{−k/4}` are nested, so the value is monotone along such chains.
    pub fn m_p(&self, a: [f64; 2], r: f64, p: f64, stride: usize) -> Result<f64> {
        check_p(p)?;
        Disc::new(a, r)?;
        let g = self.grid;
        let h = g.spacing();
        let stride = stride.max(1);
        let mut centers = vec![a];
        for k in g.nearby(a, r) {
            if k >= g.n_interior() {
                continue;
            }
            if let Some((i, j)) = g.lattice_position(k) {
                if i % stride == 0 && j % stride == 0 {
                    centers.push(g.node(k).x);
                }
            }
        }
        let mut radii = Vec::new();
        let mut k = 0;
        loop {
            let rho = r * 2f64.powf(-(k as f64) / RADII_PER_OCTAVE as f64);
            if rho < h * (1.0 - 1e-12) {
                break;
            }
            radii.push(rho);
            k += 1;
        }
        let best = centers
            .par_iter()
            .map(|&z| {
                let off = dist(a, z);
                radii
                    .iter()
                    .filter(|&&rho| off + rho <= r * (1.0 + 1e-12))
                    .filter_map(|&rho| self.integral(z, rho, p).map(|v| rho.powf(p - 2.0) * v))
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<f64>>();
        Ok(best.into_iter().fold(0.0, f64::max))
    }
}

/// `Jₚ(a,r;u) = r^{p−2} ∫_{B_r(a)∩D²} |∇u|ᵖ`.
pub fn j_p(u: &Field, a: [f64; 2], r: f64, p: f64) -> Result<f64> {
    Energy::new(u).j_p(a, r, p)
}

/// `𝓜ₚ(a,r;u)` on the sampled set described at [`Energy::m_p`].
pub fn m_p(u: &Field, a: [f64; 2], r: f64, p: f64, stride: usize) -> Result<f64> {
    Energy::new(u).m_p(a, r, p, stride)
}

/// Sub-lattice stride giving a center spacing of about `1/16` at any resolution.
pub fn default_stride(grid: &DiscGrid) -> usize {
    ((grid.resolution() - 1) / 32).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallnessRadius {
    pub r0: f64,
    /// False when even the smallest scanned radius fails.
    pub passed: bool,
    /// `max_a (1+C)‖Ω‖_{L²(B_{2R₀}(a)∩D²)}` at the returned radius.
    pub worst: f64,
}

/// Largest dyadic `R₀ ≤ 1` with `(1+C)‖Ω‖_{L²(B_{2R₀}(a)∩D²)} ≤ δ` at every
/// sampled center `a`.
pub fn smallness_radius(omega: &Field, delta: f64, audit_constant: f64) -> Result<SmallnessRadius> {
    if !(delta > 0.0) || !(audit_constant >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smallness radius needs δ > 0 and C ≥ 0, got δ = {delta}, C = {audit_constant}"
        )));
    }
    let g = omega.grid();
    let stride = default_stride(g);
    let centers: Vec<[f64; 2]> = g
        .interior()
        .filter(|&k| {
            g.lattice_position(k)
                .is_some_and(|(i, j)| i % stride == 0 && j % stride == 0)
        })
        .map(|k| g.node(k).x)
        .collect();
    let min_r = 2.0 * g.spacing();
    let mut r = 1.0;
    loop {
        let worst = centers
            .par_iter()
            .map(|&a| {
                let nodes = g.nodes_in(&Disc {
                    center: a,
                    radius: 2.0 * r,
                });
                (1.0 + audit_constant) * lp_norm_over(omega, &nodes, 2.0)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max);
        if worst <= delta {
            return Ok(SmallnessRadius {
                r0: r,
                passed: true,
                worst,
            });
        }
        if r / 2.0 < min_r {
            return Ok(SmallnessRadius {
                r0: r,
                passed: false,
                worst,
            });
        }
        r /= 2.0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorreyConfig {
    pub p: f64,
    pub s: f64,
    /// Iteration ratio `γ`; the chain uses `γ̃ = γ/2`.
    pub gamma: f64,
    /// Constant `C` in the modulus-of-continuity bound.
    pub constant: f64,
    /// Sub-lattice stride for `𝓜ₚ` centers; `0` picks [`default_stride`].
    pub stride: usize,
    pub min_r2: f64,
}

impl Default for MorreyConfig {
    fn default() -> Self {
        Self {
            p: 1.5,
            s: 1.25,
            gamma: 0.25,
            constant: 1.0,
            stride: 0,
            min_r2: 0.9,
        }
    }
}

impl MorreyConfig {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.s > 1.0 && self.s < 4.0 / 3.0) {
            return Err(Error::InvalidParameter(format!(
                "s must lie in (1, 4/3), got {}",
                self.s
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "γ must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// `l = 2p(1 − 1/s)`.
    pub fn l(&self) -> f64 {
        2.0 * self.p * (1.0 - 1.0 / self.s)
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma / 2.0
    }

    /// `θ` with `γ̃^θ = 1/2`.
    pub fn theta(&self) -> f64 {
        0.5f64.ln() / self.gamma_tilde().ln()
    }

    /// `μ = θl`, the exponent the iteration chain guarantees.
    pub fn chain_mu(&self) -> f64 {
        self.theta() * self.l()
    }

    fn stride_for(&self, g: &DiscGrid) -> usize {
        if self.stride == 0 {
            default_stride(g)
        } else {
            self.stride
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorreySample {
    pub center: [f64; 2],
    pub radius: f64,
    pub j: f64,
    pub m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)`; `R² = 1` for an exactly flat response.
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterFit {
    pub center: [f64; 2],
    /// Fit of `log 𝓜ₚ` against `log r`; `None` when every sample vanishes.
    pub m_fit: Option<LineFit>,
    pub j_fit: Option<LineFit>,
    /// Failed decay: non-positive slope, `R²` below the threshold or too few radii.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MorreyReport {
    pub config: MorreyConfig,
    pub samples: Vec<MorreySample>,
    pub centers: Vec<CenterFit>,
    /// Smallest fitted `𝓜ₚ` exponent over non-degenerate centers.
    pub mu: Option<f64>,
    pub min_r2: Option<f64>,
    /// `max 𝓜ₚ(r) / ([𝓜ₚ(R) + ‖e‖ᵖ_{Lˢ(B_R)}](r/R)^μ)` with `R` the largest radius.
    pub constant: Option<f64>,
    /// `max 𝓜ₚ(γ̃R)/𝓜ₚ(R)` over centers.
    pub contraction: Option<f64>,
}

impl MorreyReport {
    pub fn degenerate(&self) -> bool {
        self.mu.is_none()
    }

    pub fn all_decay(&self) -> bool {
        !self.centers.is_empty() && self.centers.iter().all(|c| c.m_fit.is_some() && !c.flagged)
    }
}

/// Fits `𝓜ₚ(a, r) ∼ r^μ` over a decreasing dyadic radius chain at every center.
pub fn decay_fit(
    u: &Field,
    e: Option<&Field>,
    centers: &[[f64; 2]],
    radii: &[f64],
    cfg: &MorreyConfig,
) -> Result<MorreyReport> {
    cfg.validate()?;
    if radii.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "decay fit needs at least 3 radii, got {}",
            radii.len()
        )));
    }
    for w in radii.windows(2) {
        if !((w[0] / w[1] - 2.0).abs() <= 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "radii must form a decreasing dyadic chain, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let en = Energy::new(u);
    let g = u.grid();
    let stride = cfg.stride_for(g);
    let p = cfg.p;
    let big_r = radii[0];
    let mut samples = Vec::new();
    let mut fits = Vec::new();
    let mut constant: Option<f64> = None;
    let mut contraction: Option<f64> = None;
    for &a in centers {
        let mut js = Vec::with_capacity(radii.len());
        let mut ms = Vec::with_capacity(radii.len());
        for &r in radii {
            let j = en.j_p(a, r, p)?;
            let m = en.m_p(a, r, p, stride)?;
            samples.push(MorreySample {
                center: a,
                radius: r,
                j,
                m,
            });
            js.push(j);
            ms.push(m);
        }
        let lr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let fit = |v: &[f64]| {
            if v.iter().all(|&x| x > 0.0) {
                Some(fit_line(&lr, &v.iter().map(|x| x.ln()).collect::<Vec<_>>()))
            } else {
                None
            }
        };
        let m_fit = fit(&ms);
        let j_fit = fit(&js);
        let degenerate = ms.iter().all(|&x| x == 0.0);
        let flagged = !degenerate
            && match m_fit {
                Some(f) => !(f.slope > 0.0) || f.r2 < cfg.min_r2 || radii.len() < 4,
                None => true,
            };
        if let Some(f) = m_fit {
            let e_norm = match e {
                Some(e) => lp_norm_over(
                    e,
                    &g.nodes_in(&Disc {
                        center: a,
                        radius: big_r,
                    }),
                    cfg.s,
                ),
                None => 0.0,
            };
            let base = ms[0] + e_norm.powf(p);
            let c = radii
                .iter()
                .zip(&ms)
                .map(|(&r, &m)| m / (base * (r / big_r).powf(f.slope)))
                .fold(0.0, f64::max);
            constant = Some(constant.map_or(c, |x: f64| x.max(c)));
            let small = en.m_p(a, cfg.gamma_tilde() * big_r, p, stride)?;
            let ratio = small / ms[0];
            contraction = Some(contraction.map_or(ratio, |x: f64| x.max(ratio)));
        }
        fits.push(CenterFit {
            center: a,
            m_fit,
            j_fit,
            flagged,
        });
    }
    let live: Vec<&LineFit> = fits.iter().filter_map(|c| c.m_fit.as_ref()).collect();
    let mu = live.iter().map(|f| f.slope).reduce(f64::min);
    let min_r2 = live.iter().map(|f| f.r2).reduce(f64::min);
    Ok(MorreyReport {
        config: *cfg,
        samples,
        centers: fits,
        mu,
        min_r2,
        constant,
        contraction,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VrhoBmoReport {
    pub bmo: f64,
    /// `𝓜ₚ(x₁, 2ϱ; u)`.
    pub m_p: f64,
    /// `[v_ϱ]_BMO / 𝓜ₚ^{1/p}`; `None` when both vanish.
    pub ratio: Option<f64>,
}

/// Builds `v_ϱ = η(u − (u)_{x₁,ϱ})` and compares `[v_ϱ]_BMO` with
/// `𝓜ₚ(x₁,2ϱ;u)^{1/p}`. BMO discs range over radii up to `2ϱ`.
pub fn v_rho_bmo_check(u: &Field, x1: [f64; 2], rho: f64, p: f64, stride: usize) -> Result<VrhoBmoReport> {
    check_p(p)?;
    let g = u.grid();
    let d = Disc::new(x1, rho)?;
    let eta = cutoff(g, &d)?;
    let mean = mean_over(u, &g.resolved_nodes(&d)?);
    let nc = u.ncomp();
    let data: Vec<f64> = (0..g.len())
        .flat_map(|k| {
            let s = eta.data()[k];
            u.at(k)
                .iter()
                .zip(&mean)
                .map(move |(v, m)| s * (v - m))
                .collect::<Vec<_>>()
        })
        .collect();
    let shape = if nc == 1 { Shape::SCALAR } else { Shape::vector(nc) };
    let v = Field::new(g.clone(), shape, Structure::General, data)?;
    let bmo = bmo_seminorm(&v, 2.0 * rho)?;
    let m = m_p(u, x1, 2.0 * rho, p, stride)?;
    let ratio = if m > 0.0 {
        Some(bmo / m.powf(1.0 / p))
    } else if bmo == 0.0 {
        None
    } else {
        Some(f64::INFINITY)
    };
    Ok(VrhoBmoReport { bmo, m_p: m, ratio })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusReport {
    /// `max |u(x) − u(y)|` over nodes in `B_{ϱ/2}(a)`.
    pub oscillation: f64,
    /// `C(p/μ)(‖∇u‖_{L²(B_ϱ)} + ‖e‖_{Lˢ(B_ϱ)})`.
    pub rhs_linear: f64,
    /// The same bracket raised to `1/p`.
    pub rhs_root: f64,
    pub ratio_linear: f64,
    pub ratio_root: f64,
    /// `(ϱₖ, F(a, ϱₖ))` for `ϱₖ = ϱ·2^{−k}` while the half disc stays resolved.
    pub sweep: Vec<(f64, f64)>,
    pub sweep_decreasing: bool,
}

fn oscillation(u: &Field, nodes: &[usize]) -> f64 {
    let mut best: f64 = 0.0;
    let mut diff = vec![0.0; u.ncomp()];
    for (i, &x) in nodes.iter().enumerate() {
        for &y in &nodes[i + 1..] {
            for (c, (a, b)) in u.at(x).iter().zip(u.at(y)).enumerate() {
                diff[c] = a - b;
            }
            best = best.max(node_norm(&diff));
        }
    }
    best
}

/// Measured oscillation on `B_{ϱ/2}(a)` against the Dirichlet-growth bound.
pub fn modulus_of_continuity(
    u: &Field,
    e: Option<&Field>,
    a: [f64; 2],
    rho: f64,
    mu: f64,
    cfg: &MorreyConfig,
) -> Result<ModulusReport> {
    cfg.validate()?;
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("fitted μ must be positive, got {mu}")));
    }
    let g = u.grid();
    let d = Disc::new(a, rho)?;
    if !d.inside_unit() {
        return Err(Error::DiscOutsideDomain {
            cx: a[0],
            cy: a[1],
            radius: rho,
        });
    }
    let big = g.resolved_nodes(&d)?;
    let grad = Field::new(g.clone(), Shape::SCALAR, Structure::General, gradient_density(u))?;
    let grad_l2 = lp_norm_over(&grad, &big, 2.0);
    let e_norm = e.map_or(0.0, |e| lp_norm_over(e, &big, cfg.s));
    let bracket = grad_l2 + e_norm;
    let pref = cfg.constant * cfg.p / mu;
    let rhs_linear = pref * bracket;
    let rhs_root = pref * bracket.powf(1.0 / cfg.p);
    let osc = oscillation(u, &g.resolved_nodes(&Disc::new(a, rho / 2.0)?)?);
    let mut sweep = Vec::new();
    let mut r = rho;
    while let Ok(nodes) = g.resolved_nodes(&Disc::new(a, r / 2.0)?) {
        sweep.push((r, oscillation(u, &nodes)));
        r /= 2.0;
    }
    let sweep_decreasing = sweep.windows(2).all(|w| w[1].1 <= w[0].1);
    let ratio = |rhs: f64| if rhs > 0.0 { osc / rhs } else { 0.0 };
    Ok(ModulusReport {
        oscillation: osc,
        rhs_linear,
        rhs_root,
        ratio_linear: ratio(rhs_linear),
        ratio_root: ratio(rhs_root),
        sweep,
        sweep_decreasing,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeEntry {
    pub delta: f64,
    /// `I(δ) = ∫_{1−δ≤|x|≤1} |∇u|²`.
    pub annulus_energy: f64,
    pub sigma: f64,
    /// Good angle `θ′`.
    pub angle: f64,
    /// `∫_{1−δ}^1 |v_r(r,θ′)|² dr`.
    pub slice_energy: f64,
    /// `I(δ)/(σ(1−δ))`.
    pub slice_bound: f64,
    /// `|u(x′) − ψ(y′)|`.
    pub gap: f64,
    /// `2(I(δ)/(1−δ))^{1/2}`.
    pub bound: f64,
    /// `ψ(y′)` came from angular interpolation between boundary nodes.
    pub psi_interpolated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryProbeReport {
    pub theta1: f64,
    pub entries: Vec<ProbeEntry>,
}

impl BoundaryProbeReport {
    pub fn within_bounds(&self) -> bool {
        self.entries.iter().all(|e| e.gap <= e.bound)
    }

    pub fn good_angles_hold(&self) -> bool {
        self.entries.iter().all(|e| e.slice_energy <= e.slice_bound)
    }

    /// Gaps decrease along the sweep up to relative noise `tol`.
    pub fn gaps_decrease(&self, tol: f64) -> bool {
        self.entries.windows(2).all(|w| w[1].gap <= (1.0 + tol) * w[0].gap)
    }
}

/// Boundary nodes sorted by angle in `[0, 2π)`.
fn boundary_by_angle(g: &DiscGrid) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = g
        .boundary()
        .map(|k| (g.node(k).theta.unwrap_or(0.0).rem_euclid(2.0 * PI), k))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `ψ` at angle `t`, linear in angle between neighbouring boundary nodes.
fn psi_at(sorted: &[(f64, usize)], psi: &BoundaryTrace, first: usize, t: f64) -> Vec<f64> {
    let m = psi.m();
    let t = t.rem_euclid(2.0 * PI);
    let n = sorted.len();
    let hi = sorted.partition_point(|s| s.0 <= t);
    let (a, b) = (sorted[(hi + n - 1) % n], sorted[hi % n]);
    let span = (b.0 - a.0).rem_euclid(2.0 * PI);
    let s = if span > 0.0 {
        (t - a.0).rem_euclid(2.0 * PI) / span
    } else {
        0.0
    };
    let va = &psi.values()[(a.1 - first) * m..(a.1 - first + 1) * m];
    let vb = &psi.values()[(b.1 - first) * m..(b.1 - first + 1) * m];
    va.iter().zip(vb).map(|(x, y)| (1.0 - s) * x + s * y).collect()
}

/// Radial samples of the composite Simpson rule on `[1 − δ, 1]`.
const SLICE_INTERVALS: usize = 32;

/// Radial-slice energy argument at `x₁ = (1−δ)e^{iθ₁}` for every `δ`.
///
/// Candidate angles are boundary-node angles in `(θ₁, θ₁ + δ/4)`, where `ψ` is
/// exact; a window without boundary nodes is sampled at 16 angles with `ψ`
/// interpolated. The returned angle minimizes the slice energy, and a minimum
/// above `I(δ)/(σ(1−δ))` is an error.
pub fn boundary_probe(u: &Field, psi: &BoundaryTrace, theta1: f64, deltas: &[f64]) -> Result<BoundaryProbeReport> {
    let g = u.grid();
    let m = psi.m();
    if u.ncomp() != m {
        return Err(Error::ShapeMismatch {
            expected: format!("{m} components"),
            found: format!("{} components", u.ncomp()),
        });
    }
    let dx = g.derivative(0).apply_strided(u.data(), m);
    let dy = g.derivative(1).apply_strided(u.data(), m);
    let density = gradient_density(u);
    let sorted = boundary_by_angle(g);
    let first = g.boundary().start;
    let live = g.n_interior() + g.n_boundary();
    let mut entries = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("δ must lie in (0, 1), got {delta}")));
        }
        let rho1 = 1.0 - delta;
        let energy: f64 = (0..live)
            .filter(|&k| norm(g.node(k).x) >= rho1 - 1e-12)
            .map(|k| g.weights()[k] * density[k] * density[k])
            .sum();
        let sigma = delta / 4.0;
        let slice_bound = energy / (sigma * rho1);
        let lo = theta1.rem_euclid(2.0 * PI);
        let in_window = |t: f64| {
            let off = (t - lo).rem_euclid(2.0 * PI);
            off > 0.0 && off < sigma
        };
        let mut candidates: Vec<(f64, Option<usize>)> = sorted
            .iter()
            .filter(|s| in_window(s.0))
            .map(|&(t, k)| (t, Some(k)))
            .collect();
        if candidates.is_empty() {
            candidates = (1..=16).map(|i| (lo + sigma * i as f64 / 17.0, None)).collect();
        }
        let slice = |t: f64| {
            let (c, s) = (t.cos(), t.sin());
            let step = delta / SLICE_INTERVALS as f64;
            (0..=SLICE_INTERVALS)
                .map(|i| {
                    let r = rho1 + step * i as f64;
                    let x = [r * c, r * s];
                    let gx = g.interpolate(&dx, m, x);
                    let gy = g.interpolate(&dy, m, x);
                    let vr2: f64 = gx.iter().zip(&gy).map(|(a, b)| (c * a + s * b).powi(2)).sum();
                    let wt = if i == 0 || i == SLICE_INTERVALS {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    wt * vr2
                })
                .sum::<f64>()
                * step
                / 3.0
        };
        let (angle, node, slice_energy) = candidates
            .iter()
            .map(|&(t, k)| (t, k, slice(t)))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("non-empty candidate list");
        if !(slice_energy <= slice_bound) {
            return Err(Error::NoGoodAngle(format!(
                "δ = {delta}: smallest slice energy {slice_energy:e} exceeds I(δ)/(σ(1−δ)) = {slice_bound:e}"
            )));
        }
        let xp = [rho1 * angle.cos(), rho1 * angle.sin()];
        let ux = g.interpolate(u.data(), m, xp);
        let pv = match node {
            Some(k) => psi.values()[(k - first) * m..(k - first + 1) * m].to_vec(),
            None => psi_at(&sorted, psi, first, angle),
        };
        let gap = node_norm(&ux.iter().zip(&pv).map(|(a, b)| a - b).collect::<Vec<_>>());
        entries.push(ProbeEntry {
            delta,
            annulus_energy: energy,
            sigma,
            angle,
            slice_energy,
            slice_bound,
            gap,
            bound: 2.0 * (energy / rho1).sqrt(),
            psi_interpolated: node.is_none(),
        });
    }
    Ok(BoundaryProbeReport { theta1, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<DiscGrid> {
        Arc::new(build_grid(n).unwrap())
    }

    fn linear(g: &Arc<DiscGrid>) -> Field {
        Field::scalar_fn(g.clone(), |x| x[0])
    }

    #[test]
    fn j_p_of_linear_map() {
        let g = grid(129);
        let u = linear(&g);
        for (a, r) in [([0.0, 0.0], 0.5), ([0.2, -0.1], 0.25)] {
            let j = j_p(&u, a, r, 1.5).unwrap();
            let want = PI * r.powf(1.5);
            assert!((j / want - 1.0).abs() < 0.03, "{j} vs {want}");
        }
        let c = Field::scalar_fn(g.clone(), |_| 3.0);
        assert_eq!(j_p(&c, [0.0, 0.0], 0.5, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn j_p_homogeneous() {
        let g = grid(65);
        let u = Field::scalar_fn(g.clone(), |x| (2.0 * x[0]).sin() * x[1]);
        let a = j_p(&u, [0.1, 0.1], 0.3, 1.7).unwrap();
        let b = j_p(&u.scale(-2.0), [0.1, 0.1], 0.3, 1.7).unwrap();
        assert!((b - 2f64.powf(1.7) * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn m_p_of_linear_map_attains_largest_disc() {
        let g = grid(65);
        let u = linear(&g);
        let en = Energy::new(&u);
        let s = default_stride(&g);
        let m = en.m_p([0.0, 0.0], 0.5, 1.5, s).unwrap();
        assert_eq!(m, en.j_p([0.0, 0.0], 0.5, 1.5).unwrap());
        assert!(m >= en.j_p([0.0, 0.0], 0.25, 1.5).unwrap());
    }

    #[test]
    fn m_p_monotone_along_chain() {
        let g = grid(65);
        let u = Field::scalar_fn(g.clone(), |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let en = Energy::new(&u);
        let s = default_stride(&g);
        let vals: Vec<f64> = (0..5)
            .map(|k| en.m_p([0.1, 0.2], 0.6 * 0.5f64.powi(k), 1.5, s).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]), "{vals:?}");
    }

    #[test]
    fn smallness_radius_cases() {
        let g = grid(129);
        let zero = Field::zeros(g.clone(), Shape::matrix_form(2), Structure::Skew);
        assert_eq!(smallness_radius(&zero, 0.1, 1.0).unwrap().r0, 1.0);

        let uniform = Field::scalar_fn(g.clone(), |_| 1.0);
        let total = crate::measure::l2_norm(&uniform);
        let delta = 0.3;
        let scaled = uniform.scale(delta / (2.0 * 2.0 * total));
        assert_eq!(smallness_radius(&scaled, delta, 1.0).unwrap().r0, 1.0);

        let bump = |amp: f64| Field::scalar_fn(g.clone(), move |x| amp * (-(x[0] * x[0] + x[1] * x[1]) / 0.01).exp());
        let r: Vec<SmallnessRadius> = [1.0, 1.5, 2.0, 3.0, 6.0]
            .iter()
            .map(|&a| smallness_radius(&bump(a), 0.4, 1.0).unwrap())
            .collect();
        assert!(r.windows(2).all(|w| w[1].r0 <= w[0].r0));
        assert!(r[0].r0 == 1.0 && r[4].r0 < 1.0 / 8.0, "{r:?}");
    }

    #[test]
    fn decay_fit_harmonic_exponent() {
        let g = grid(65);
        let u = Field::scalar_fn(g.clone(), |x| x[0] * x[0] - x[1] * x[1] + x[0]);
        let cfg = MorreyConfig::default();
        let rep = decay_fit(&u, None, &[[0.0, 0.0], [0.3, -0.2]], &[0.4, 0.2, 0.1, 0.05], &cfg).unwrap();
        for c in &rep.centers {
            let s = c.j_fit.unwrap().slope;
            assert!((s - cfg.p).abs() < 0.3, "{s}");
            assert!(!c.flagged, "{c:?}");
        }
        assert!(rep.mu.unwrap() > 0.2);
        assert!(rep.contraction.unwrap() < 0.25);

        let c = Field::scalar_fn(g.clone(), |_| 1.0);
        let rep = decay_fit(&c, None, &[[0.0, 0.0]], &[0.4, 0.2, 0.1, 0.05], &cfg).unwrap();
        assert!(rep.degenerate());
        assert!(decay_fit(&u, None, &[[0.0, 0.0]], &[0.4, 0.2], &cfg).is_err());
    }

    #[test]
    fn chain_constants() {
        let cfg = MorreyConfig::default();
        assert!((cfg.l() - 0.6).abs() < 1e-15);
        assert!((cfg.gamma_tilde().powf(cfg.theta()) - 0.5).abs() < 1e-14);
        assert!((cfg.chain_mu() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn v_rho_bmo_linear_map() {
        let rs: Vec<f64> = [33, 65]
            .iter()
            .map(|&n| {
                let g = grid(n);
                v_rho_bmo_check(&linear(&g), [0.0, 0.0], 0.25, 1.5, default_stride(&g))
                    .unwrap()
                    .ratio
                    .unwrap()
            })
            .collect();
        assert!(rs.iter().all(|r| r.is_finite() && *r > 0.0));
        let g = grid(33);
        let c = Field::scalar_fn(g.clone(), |_| 2.0);
        assert!(v_rho_bmo_check(&c, [0.0, 0.0], 0.25, 1.5, 1).unwrap().ratio.is_none());
    }

    #[test]
    fn oscillation_of_linear_map() {
        let g = grid(65);
        let cfg = MorreyConfig::default();
        let rep = modulus_of_continuity(&linear(&g), None, [0.0, 0.0], 0.5, 1.0, &cfg).unwrap();
        assert!((rep.oscillation - 0.5).abs() < 1e-12);
        assert!(rep.sweep_decreasing);
        let c = Field::scalar_fn(g.clone(), |_| 1.0);
        assert_eq!(
            modulus_of_continuity(&c, None, [0.0, 0.0], 0.5, 1.0, &cfg)
                .unwrap()
                .oscillation,
            0.0
        );
    }

    #[test]
    fn probe_linear_map() {
        let g = grid(129);
        let u = linear(&g);
        let psi = BoundaryTrace::fourier(&g, &[vec![(1, 1.0, 0.0)]]).unwrap();
        let rep = boundary_probe(&u, &psi, 0.3, &[0.2, 0.1, 0.05, 0.025]).unwrap();
        for e in &rep.entries {
            let exact = PI * (1.0 - (1.0 - e.delta).powi(2));
            assert!(
                (e.annulus_energy / exact - 1.0).abs() < 0.1,
                "{} vs {exact}",
                e.annulus_energy
            );
        }
        assert!(rep.within_bounds() && rep.good_angles_hold());
        assert!(rep.gaps_decrease(0.1));

        let c = Field::scalar_fn(g.clone(), |_| 0.7);
        let psi = BoundaryTrace::fourier(&g, &[vec![(0, 0.7, 0.0)]]).unwrap();
        let rep = boundary_probe(&c, &psi, 1.0, &[0.1]).unwrap();
        assert!(rep.entries[0].gap < 1e-14);
    }
}
