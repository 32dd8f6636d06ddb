//! Numerical toolkit for the stochastic nonlinear Schrödinger equation
//! `i du = (Δu + λ|u|^{2σ}u) dt + √ε dW` on a periodic interval.

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod noise;
pub mod ode;
pub mod quad;
pub mod spectral;
pub mod transmission;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{FieldState, ModelParams, SpatialGrid};
pub use noise::{FilterProfile, NoiseOperator, NoiseStream};
