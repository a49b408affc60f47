//! One runner per experiment kind. Each returns a [`Report`] whose checks are
//! the invariants asserted for that experiment.

mod analysis;
mod gauge;
mod morrey;
mod systems;

pub use analysis::{hardy_bmo, hodge, wente};
pub use gauge::{abelian_omega, error_tag, gauge, gauge_case, GaugeCase};
pub use morrey::{boundary, morrey, probe_source, record_probe, PROBE_COLUMNS};
pub use systems::{h_surface, surface_run, system, SurfaceRun};

use crate::config::FieldSource;
use crate::error::CliError;
use skewreg_core::gauge::SkewPotential;
use skewreg_core::random::{random_skew_potential, rng};
use skewreg_core::systems::{manufactured_system, solve_linear_system, BoundaryTrace};
use skewreg_core::{build_grid, Disc, DiscGrid, Field, Shape, Structure};
use std::sync::Arc;

pub(crate) fn grid(n: usize) -> Result<Arc<DiscGrid>, CliError> {
    Ok(Arc::new(build_grid(n)?))
}

/// Observed order `log(e_c/e_f) / log(h_c/h_f)` between two resolutions.
pub fn observed_order(coarse: f64, fine: f64, n_coarse: usize, n_fine: usize) -> f64 {
    (coarse / fine).ln() / ((n_fine - 1) as f64 / (n_coarse - 1) as f64).ln()
}

/// A field for the Morrey and boundary experiments with its boundary trace and
/// right-hand side.
pub struct SourceField {
    pub u: Field,
    pub psi: BoundaryTrace,
    pub e: Option<Field>,
}

/// Solved manufactured system with a random `Ω` of the given norm, or a closed
/// form harmonic map.
pub fn source_field(
    g: &Arc<DiscGrid>,
    source: FieldSource,
    m: usize,
    omega_norm: f64,
    seed: u64,
) -> Result<SourceField, CliError> {
    match source {
        FieldSource::System => {
            let om = random_skew_potential(g, m, &Disc::unit(), omega_norm, &mut rng(seed))?;
            let ms = manufactured_system(g, SkewPotential::new(om)?)?;
            let u = solve_linear_system(&ms.problem)?;
            Ok(SourceField {
                u,
                psi: ms.problem.psi.clone(),
                e: Some(ms.problem.e),
            })
        }
        FieldSource::Harmonic | FieldSource::Linear => {
            let f: fn([f64; 2]) -> f64 = if source == FieldSource::Linear {
                |x| x[0]
            } else {
                |x| x[0].exp() * x[1].cos()
            };
            let u = Field::from_fn(g.clone(), Shape::vector(1), Structure::General, move |x| vec![f(x)])?;
            let psi = BoundaryTrace::from_field(&u)?;
            Ok(SourceField { u, psi, e: None })
        }
    }
}
