//! Parametric densities `Φ = (CG)⁻¹ Ψ (CG)⁻*`, their moment maps and the
//! Newton solver for `∫ G Φ G* = Σ`.

mod maps;
mod prior;
mod probe;
mod solve;

pub use maps::{density_eval, differential_omega_scalar, differential_tau, omega_eval, tau_eval, DensityParameter};
pub use prior::{Prior, PriorKind, PriorSource, PriorSpec};
pub use probe::{prior_condition_probe, probe_pair, ProbeReport, ProbeWitness};
pub use solve::{
    solve_estimation, static_closed_form, SolveOptions, SolveReport, NON_UNIQUENESS_THRESHOLD, SIGMA_CONDITION_FLOOR,
};
