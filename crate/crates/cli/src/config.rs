//! Experiment configuration: a TOML file with one table per experiment kind.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Gauge,
    Hodge,
    Wente,
    HardyBmo,
    System,
    HSurface,
    Morrey,
    Boundary,
    Sweep,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Gauge => "gauge",
            Kind::Hodge => "hodge",
            Kind::Wente => "wente",
            Kind::HardyBmo => "hardy-bmo",
            Kind::System => "system",
            Kind::HSurface => "h-surface",
            Kind::Morrey => "morrey",
            Kind::Boundary => "boundary",
            Kind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds of the asserted invariants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Gauge residual relative to `‖Ω‖_{L²}`.
    pub gauge_residual: f64,
    pub gauge_order: f64,
    pub rotation: f64,
    pub skew: f64,
    pub xi_mean: f64,
    pub boundary_gauge: f64,
    pub audit_factor: f64,
    pub abelian_xi: f64,
    pub abelian_p: f64,
    pub hodge_reconstruction: f64,
    pub harmonic: f64,
    pub decay_constant: f64,
    pub wente_closed_form: f64,
    pub wente_stability: f64,
    pub system_order: f64,
    pub h_surface_order: f64,
    pub morrey_mu: f64,
    pub morrey_r2: f64,
    pub harmonic_exponent: f64,
    pub probe_noise: f64,
    pub vrho_stability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gauge_residual: 1e-6,
            gauge_order: 1.5,
            rotation: 1e-8,
            skew: 1e-12,
            xi_mean: 1e-8,
            boundary_gauge: 1e-6,
            audit_factor: 2.0,
            abelian_xi: 1e-3,
            abelian_p: 1e-4,
            hodge_reconstruction: 1e-8,
            harmonic: 1e-6,
            decay_constant: 0.02,
            wente_closed_form: 0.02,
            wente_stability: 0.15,
            system_order: 1.8,
            h_surface_order: 1.8,
            morrey_mu: 0.2,
            morrey_r2: 0.9,
            harmonic_exponent: 0.3,
            probe_noise: 0.1,
            vrho_stability: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaSource {
    Zero,
    /// Closed-form gauge example with known `(P, ξ)`.
    Manufactured,
    /// Band-limited random skew potentials with prescribed `L²` norms.
    Random,
    /// `Ω = ∇⊥β·J` for `m = 2`.
    Abelian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeParams {
    pub omega: OmegaSource,
    /// Manufactured amplitude, or the scale of `β` for the abelian case.
    pub amplitude: f64,
    pub cases: usize,
    /// Random norms are spaced evenly in `[norm_min, norm_max]`.
    pub norm_min: f64,
    pub norm_max: f64,
    pub epsilon_threshold: f64,
    pub residual_tol: f64,
    /// Two resolutions enable the refinement checks; empty means `resolution`.
    pub resolutions: Vec<usize>,
}

impl Default for GaugeParams {
    fn default() -> Self {
        Self {
            omega: OmegaSource::Manufactured,
            amplitude: 0.04,
            cases: 1,
            norm_min: 0.05,
            norm_max: 0.3,
            epsilon_threshold: 0.5,
            residual_tol: 1e-3,
            resolutions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HodgeParams {
    pub cases: usize,
    pub modes: usize,
    pub max_freq: f64,
    /// Ratio `r/ϱ` of the harmonic decay check on `x¹`.
    pub decay_ratio: f64,
}

impl Default for HodgeParams {
    fn default() -> Self {
        Self {
            cases: 10,
            modes: 6,
            max_freq: 3.0,
            decay_ratio: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WenteParams {
    pub cases: usize,
    pub modes: usize,
    pub max_freq: f64,
    pub resolutions: Vec<usize>,
}

impl Default for WenteParams {
    fn default() -> Self {
        Self {
            cases: 50,
            modes: 6,
            max_freq: 4.0,
            resolutions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardyBmoParams {
    pub cases: usize,
    pub modes: usize,
    pub max_freq: f64,
    /// Largest mollifier scale of the maximal function.
    pub margin: f64,
    pub bmo_radius: f64,
    /// Support radius of the cutoff windowing the div–curl factors.
    pub window: f64,
}

impl Default for HardyBmoParams {
    fn default() -> Self {
        Self {
            cases: 5,
            modes: 5,
            max_freq: 3.0,
            margin: 0.5,
            bmo_radius: 0.5,
            window: 0.4,
        }
    }
}

/// Fourier terms `(k, cos-coefficient, sin-coefficient)` per component.
pub type FourierTrace = Vec<Vec<(u32, f64, f64)>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemOmega {
    Zero,
    Random,
    Manufactured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemData {
    /// Smooth exact solution; `e` and `ψ` follow from it.
    Manufactured,
    /// Constant `e` and a Fourier trace.
    Fourier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub omega: SystemOmega,
    /// `‖Ω‖_{L²}` for random potentials, amplitude for manufactured ones.
    pub norm: f64,
    pub data: SystemData,
    pub e: Vec<f64>,
    pub psi: FourierTrace,
    /// Also decompose `Ω` and report the gauged divergence defect.
    pub gauged: bool,
    pub resolutions: Vec<usize>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega: SystemOmega::Random,
            norm: 0.2,
            data: SystemData::Manufactured,
            e: Vec::new(),
            psi: Vec::new(),
            gauged: false,
            resolutions: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceBoundary {
    /// Trace of the stereographic map.
    Sphere,
    /// Trace of `u*(c·x)`, a spherical cap below the hemisphere.
    Cap,
    Fourier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HSurfaceParams {
    pub h: f64,
    pub boundary: SurfaceBoundary,
    pub cap_scale: f64,
    pub psi: FourierTrace,
    pub damping: f64,
    pub max_iterations: usize,
    pub tol: f64,
    pub resolutions: Vec<usize>,
}

impl Default for HSurfaceParams {
    fn default() -> Self {
        Self {
            h: 1.0,
            boundary: SurfaceBoundary::Sphere,
            cap_scale: 0.6,
            psi: Vec::new(),
            damping: 1.0,
            max_iterations: 30,
            tol: 1e-9,
            resolutions: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSource {
    /// Solved manufactured system with a random `Ω` of norm `omega_norm`.
    System,
    /// `e^{x¹} cos x²`.
    Harmonic,
    /// `x¹`.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorreyParams {
    pub source: FieldSource,
    pub omega_norm: f64,
    pub centers: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
    pub gamma: f64,
    pub constant: f64,
    pub vrho_center: [f64; 2],
    pub vrho_radius: f64,
    pub modulus_center: [f64; 2],
    pub modulus_radius: f64,
    pub resolutions: Vec<usize>,
}

impl Default for MorreyParams {
    fn default() -> Self {
        Self {
            source: FieldSource::System,
            omega_norm: 0.2,
            centers: vec![[0.0, 0.0], [0.3, 0.2], [-0.4, 0.1], [0.1, -0.5]],
            radii: vec![0.4, 0.2, 0.1, 0.05],
            gamma: 0.25,
            constant: 1.0,
            vrho_center: [0.1, 0.0],
            vrho_radius: 0.25,
            modulus_center: [0.0, 0.0],
            modulus_radius: 0.5,
            resolutions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryParams {
    pub source: FieldSource,
    pub omega_norm: f64,
    pub deltas: Vec<f64>,
    pub theta1: f64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            source: FieldSource::System,
            omega_norm: 0.2,
            deltas: vec![0.2, 0.1, 0.05, 0.025],
            theta1: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTarget {
    /// Boundary probe over `values` as δ.
    BoundaryDelta,
    /// Random gauge decompositions over `values` as `‖Ω‖_{L²}`, then bisection.
    GaugeAmplitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub target: SweepTarget,
    pub values: Vec<f64>,
    pub bisection_steps: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            target: SweepTarget::BoundaryDelta,
            values: Vec::new(),
            bisection_steps: 4,
        }
    }
}

fn default_m() -> usize {
    3
}

fn default_p() -> f64 {
    1.5
}

fn default_s() -> f64 {
    1.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Kind,
    pub resolution: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub gauge: GaugeParams,
    #[serde(default)]
    pub hodge: HodgeParams,
    #[serde(default)]
    pub wente: WenteParams,
    #[serde(default, rename = "hardy-bmo")]
    pub hardy_bmo: HardyBmoParams,
    #[serde(default)]
    pub system: SystemParams,
    #[serde(default, rename = "h-surface")]
    pub h_surface: HSurfaceParams,
    #[serde(default)]
    pub morrey: MorreyParams,
    #[serde(default)]
    pub boundary: BoundaryParams,
    #[serde(default)]
    pub sweep: SweepParams,
}

pub const MAX_RESOLUTION: usize = 513;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_resolution(n: usize) -> Result<(), CliError> {
    if n < 17 || n % 2 == 0 || n > MAX_RESOLUTION {
        return Err(bad(format!(
            "resolution must be odd in [17, {MAX_RESOLUTION}], got {n}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(bad(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_resolutions(name: &str, list: &[usize]) -> Result<(), CliError> {
    if list.len() > 2 {
        return Err(bad(format!(
            "{name}.resolutions takes at most two entries, got {}",
            list.len()
        )));
    }
    if list.len() == 2 && list[0] >= list[1] {
        return Err(bad(format!("{name}.resolutions must be increasing")));
    }
    list.iter().try_for_each(|&n| check_resolution(n))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_resolution(self.resolution)?;
        if !(2..=8).contains(&self.m) {
            return Err(bad(format!("m must lie in [2, 8], got {}", self.m)));
        }
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(bad(format!("p must lie in (1, 2], got {}", self.p)));
        }
        if !(self.s > 1.0 && self.s.is_finite()) {
            return Err(bad(format!("s must exceed 1, got {}", self.s)));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("gauge_residual", t.gauge_residual),
            ("gauge_order", t.gauge_order),
            ("rotation", t.rotation),
            ("skew", t.skew),
            ("xi_mean", t.xi_mean),
            ("boundary_gauge", t.boundary_gauge),
            ("audit_factor", t.audit_factor),
            ("abelian_xi", t.abelian_xi),
            ("abelian_p", t.abelian_p),
            ("hodge_reconstruction", t.hodge_reconstruction),
            ("harmonic", t.harmonic),
            ("decay_constant", t.decay_constant),
            ("wente_closed_form", t.wente_closed_form),
            ("wente_stability", t.wente_stability),
            ("system_order", t.system_order),
            ("h_surface_order", t.h_surface_order),
            ("morrey_mu", t.morrey_mu),
            ("morrey_r2", t.morrey_r2),
            ("harmonic_exponent", t.harmonic_exponent),
            ("probe_noise", t.probe_noise),
            ("vrho_stability", t.vrho_stability),
        ] {
            check_positive(&format!("tolerances.{name}"), v)?;
        }
        let g = &self.gauge;
        check_resolutions("gauge", &g.resolutions)?;
        if g.cases == 0 || g.cases > 1000 {
            return Err(bad(format!("gauge.cases must lie in [1, 1000], got {}", g.cases)));
        }
        if !(g.amplitude >= 0.0 && g.norm_min >= 0.0 && g.norm_max >= g.norm_min && g.norm_max.is_finite()) {
            return Err(bad(
                "gauge amplitudes and norms must be non-negative with norm_min ≤ norm_max",
            ));
        }
        check_positive("gauge.epsilon_threshold", g.epsilon_threshold)?;
        check_positive("gauge.residual_tol", g.residual_tol)?;
        if g.omega == OmegaSource::Abelian && self.m != 2 && self.experiment == Kind::Gauge {
            return Err(bad("the abelian gauge example needs m = 2"));
        }
        let h = &self.hodge;
        if h.cases == 0 || h.modes == 0 {
            return Err(bad("hodge.cases and hodge.modes must be positive"));
        }
        check_positive("hodge.max_freq", h.max_freq)?;
        if !(h.decay_ratio > 0.0 && h.decay_ratio < 1.0) {
            return Err(bad(format!(
                "hodge.decay_ratio must lie in (0, 1), got {}",
                h.decay_ratio
            )));
        }
        let w = &self.wente;
        check_resolutions("wente", &w.resolutions)?;
        if w.modes == 0 {
            return Err(bad("wente.modes must be positive"));
        }
        check_positive("wente.max_freq", w.max_freq)?;
        let hb = &self.hardy_bmo;
        if hb.cases == 0 || hb.modes == 0 {
            return Err(bad("hardy-bmo.cases and hardy-bmo.modes must be positive"));
        }
        check_positive("hardy-bmo.margin", hb.margin)?;
        check_positive("hardy-bmo.bmo_radius", hb.bmo_radius)?;
        if !(hb.window > 0.0 && hb.window <= 0.5) {
            return Err(bad(format!("hardy-bmo.window must lie in (0, 0.5], got {}", hb.window)));
        }
        let sy = &self.system;
        check_resolutions("system", &sy.resolutions)?;
        if !(sy.norm >= 0.0 && sy.norm.is_finite()) {
            return Err(bad("system.norm must be non-negative"));
        }
        if sy.data == SystemData::Fourier {
            if sy.e.len() != self.m {
                return Err(bad(format!("system.e needs {} entries, got {}", self.m, sy.e.len())));
            }
            if sy.psi.len() != self.m {
                return Err(bad(format!(
                    "system.psi needs {} components, got {}",
                    self.m,
                    sy.psi.len()
                )));
            }
        }
        let hs = &self.h_surface;
        check_resolutions("h-surface", &hs.resolutions)?;
        if !hs.h.is_finite() {
            return Err(bad("h-surface.h must be finite"));
        }
        if !(hs.damping > 0.0 && hs.damping <= 1.0) {
            return Err(bad(format!("h-surface.damping must lie in (0, 1], got {}", hs.damping)));
        }
        if hs.max_iterations == 0 {
            return Err(bad("h-surface.max_iterations must be positive"));
        }
        check_positive("h-surface.tol", hs.tol)?;
        if !(hs.cap_scale > 0.0 && hs.cap_scale <= 1.0) {
            return Err(bad(format!(
                "h-surface.cap_scale must lie in (0, 1], got {}",
                hs.cap_scale
            )));
        }
        if hs.boundary == SurfaceBoundary::Fourier && hs.psi.len() != 3 {
            return Err(bad("h-surface.psi needs 3 components"));
        }
        let mo = &self.morrey;
        check_resolutions("morrey", &mo.resolutions)?;
        if mo.radii.len() < 3 {
            return Err(bad(format!(
                "morrey.radii needs at least 3 entries, got {}",
                mo.radii.len()
            )));
        }
        if mo.centers.is_empty() {
            return Err(bad("morrey.centers must not be empty"));
        }
        check_positive("morrey.vrho_radius", mo.vrho_radius)?;
        check_positive("morrey.modulus_radius", mo.modulus_radius)?;
        check_positive("morrey.constant", mo.constant)?;
        if !(mo.gamma > 0.0 && mo.gamma < 1.0) {
            return Err(bad(format!("morrey.gamma must lie in (0, 1), got {}", mo.gamma)));
        }
        let b = &self.boundary;
        if b.deltas.is_empty() {
            return Err(bad("boundary.deltas must not be empty"));
        }
        if b.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(bad("boundary.deltas must lie in (0, 1)"));
        }
        if self.experiment == Kind::Sweep {
            let sw = &self.sweep;
            if sw.values.is_empty() {
                return Err(bad("sweep.values is empty: nothing to run"));
            }
            if sw.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(bad("sweep.values must be positive and finite"));
            }
            if sw.target == SweepTarget::BoundaryDelta && sw.values.iter().any(|&d| d >= 1.0) {
                return Err(bad("boundary δ values must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Applies command-line overrides; `resolution` replaces every resolution list.
    pub fn apply_overrides(&mut self, seed: Option<u64>, resolution: Option<usize>) -> Result<(), CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(n) = resolution {
            self.resolution = n;
            for list in [
                &mut self.gauge.resolutions,
                &mut self.wente.resolutions,
                &mut self.system.resolutions,
                &mut self.h_surface.resolutions,
                &mut self.morrey.resolutions,
            ] {
                list.clear();
            }
        }
        self.validate()
    }

    /// Canonical serialization of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of [`ExperimentConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Resolution list of a multi-resolution section, falling back to `resolution`.
    pub fn resolutions<'a>(&'a self, list: &'a [usize]) -> Vec<usize> {
        if list.is_empty() {
            vec![self.resolution]
        } else {
            list.to_vec()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::parse("experiment = \"gauge\"\nresolution = 33\n").unwrap();
        assert_eq!(cfg.m, 3);
        assert_eq!(cfg.gauge, GaugeParams::default());
        assert_eq!(cfg.tolerances, Tolerances::default());
    }

    #[test]
    fn parse_error_names_line() {
        let err = ExperimentConfig::parse("experiment = \"gauge\"\nresolution = = 3\n").unwrap_err();
        assert!(matches!(err, CliError::Parse(_)));
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ExperimentConfig::parse("experiment = \"gauge\"\nresolution = 32\n").is_err());
        assert!(ExperimentConfig::parse("experiment = \"gauge\"\nresolution = 33\np = 2.5\n").is_err());
        assert!(ExperimentConfig::parse("experiment = \"nope\"\nresolution = 33\n").is_err());
        assert!(ExperimentConfig::parse("experiment = \"gauge\"\nresolution = 33\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("experiment = \"sweep\"\nresolution = 33\n").is_err());
    }

    #[test]
    fn hash_tracks_effective_config() {
        let mut a = ExperimentConfig::parse("experiment = \"hodge\"\nresolution = 33\n").unwrap();
        let b = a.clone();
        assert_eq!(a.hash(), b.hash());
        a.apply_overrides(Some(9), None).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
