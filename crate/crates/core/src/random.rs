//! Seeded band-limited random fields.

use crate::error::{Error, Result};
use crate::field::{Field, Shape, Structure};
use crate::grid::{Disc, DiscGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Sum of `modes` random plane waves with wavenumbers up to `max_freq` and
/// amplitudes decaying like `1/(1+|k|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothRandom {
    waves: Vec<([f64; 2], f64, f64)>,
}

impl SmoothRandom {
    pub fn new(rng: &mut ChaCha8Rng, modes: usize, max_freq: f64) -> Self {
        let waves = (0..modes)
            .map(|_| {
                let k = [rng.gen_range(-max_freq..=max_freq), rng.gen_range(-max_freq..=max_freq)];
                let amp = rng.gen_range(-1.0..1.0) / (1.0 + k[0].hypot(k[1]));
                (k, amp, rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        Self { waves }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.waves
            .iter()
            .map(|(k, a, ph)| a * (k[0] * x[0] + k[1] * x[1] + ph).cos())
            .sum()
    }

    /// Analytic gradient.
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.waves.iter().fold([0.0, 0.0], |g, (k, a, ph)| {
            let s = -a * (k[0] * x[0] + k[1] * x[1] + ph).sin();
            [g[0] + s * k[0], g[1] + s * k[1]]
        })
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random smooth field with independent components of the given shape.
pub fn random_field(grid: &Arc<DiscGrid>, shape: Shape, rng: &mut ChaCha8Rng, modes: usize, max_freq: f64) -> Field {
    let comps: Vec<SmoothRandom> = (0..shape.ncomp())
        .map(|_| SmoothRandom::new(rng, modes, max_freq))
        .collect();
    Field::from_fn(grid.clone(), shape, Structure::General, |x| {
        comps.iter().map(|c| c.eval(x)).collect()
    })
    .expect("finite by construction")
}

/// Random smooth skew `m×m×2` field rescaled to `‖Ω‖_{L²(d)} = norm`.
pub fn random_skew_potential(
    grid: &Arc<DiscGrid>,
    m: usize,
    d: &Disc,
    norm: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Field> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "matrix size must be at least 2, got {m}"
        )));
    }
    let raw = random_field(grid, Shape::matrix_form(m), rng, 6, 3.0).skew_part()?;
    let current = crate::measure::lp_norm_on_disc(&raw, d, 2.0)?;
    if current == 0.0 {
        return Err(Error::InvalidParameter("degenerate random potential".into()));
    }
    Ok(raw.scale(norm / current))
}
