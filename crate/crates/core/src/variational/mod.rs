//! Large-deviation exponents and minimizing control paths.

pub mod amplitude;
pub mod bounds;
pub mod full;
pub mod solparam;
pub mod sweep;

/// `‖Φ⁺ ∂_x u_S‖²`-type constant of the soliton family, `12 + π²`.
pub const SECH_CONTROL_CONSTANT: f64 = 12.0 + std::f64::consts::PI * std::f64::consts::PI;

pub use amplitude::{
    amplitude_solve, AmplitudeCoefficients, AmplitudeMethod, AmplitudeProblem, AmplitudeSettings, AmplitudeSolution,
};
pub use bounds::{
    lower_bound_exponents, risk_optimal_gamma_lower, risk_optimal_gamma_upper, threshold, upper_bound_exponents,
    BoundQuery, ExponentPair,
};
pub use solparam::{soliton_param_solution, PathKind, SolitonParamPath};
pub use full::{full_lagrangian, full_param_solve, reduced_lagrangian, FullParamSettings, FullParamState};
pub use sweep::{gamma_sweep, write_sweep_csv, SweepRow, SWEEP_HEADER};
