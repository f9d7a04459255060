//! Deterministic simulation and diagnostics for Nosé-Hoover thermostatted
//! dynamics.
//!
//! The crate integrates three model systems (harmonic oscillator, pendulum,
//! planar central force) under the thermostatted flow, tabulates their
//! action-angle data, evaluates the exact and averaged first integrals that
//! obstruct ergodic sampling of the canonical measure, computes Poincaré
//! return maps on the angle section, and reproduces the associated figure
//! data as CSV through a command-line experiment runner.

pub mod actionlib;
pub mod averaged;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod interp;
pub mod invariants;
pub mod models;
pub mod poincare;
pub mod quadrature;
pub(crate) mod sampling;

pub use error::{NhError, Result};
