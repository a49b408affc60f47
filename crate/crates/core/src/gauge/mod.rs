//! Gauge decomposition `∇⊥ξ = P⁻¹∇P + P⁻¹ΩP` for skew `Ω` of small `L²` norm.

mod audit;
mod continuation;
pub mod lie;
mod operator;
mod potential;

pub use audit::{
    audit_batch, audit_estimates, audit_unstable, gauge_structure, AuditReport, BatchAudit, StructureReport,
};
pub use continuation::{
    decompose, decompose_in, manufactured_omega, ContinuationState, GaugeConfig, GaugePair, GaugeWorkspace,
    SkewPotential, SKEW_TOL,
};
pub use lie::exp_skew;
pub use operator::{linearized_apply, solve_gauge_step, t_apply, NewtonConfig, NewtonOutcome};
pub use potential::{vector_potential, PotentialSolver, DEFAULT_DIVERGENCE_TOL};
