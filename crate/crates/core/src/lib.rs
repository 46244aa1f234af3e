//! Numerical laboratory for the high-friction relaxation of damped
//! Euler–Riesz flows towards fractional porous medium flows.

pub mod config;
pub mod energetics;
pub mod error;
pub mod euler_riesz;
pub mod fpme;
pub mod metrics;
pub mod grid;
pub mod inequality;
pub mod report;
pub mod state;
pub mod sweep;
pub mod trajectory;
pub mod verify;

pub use error::{RelaxError, Result};
pub use grid::{Field, PeriodicGrid, VectorField};
pub use state::{FluidState, LimitState, Params, Profile, Regime};
