//! Numerical Morse theory: critical points, gradient-like flows, moduli
//! spaces of connecting orbits with orientation signs, and the Morse chain
//! complex with its integer homology.

pub mod complex;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod moduli;
pub mod normalform;
pub mod ode;
pub mod pipeline;
pub mod scenario;

pub use error::{MorseError, Result};
pub use scenario::{load_scenario, DerivativeBundle, Scenario, ScenarioSpace, VectorField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scalar type of the geometric layer.
pub type Real = f64;
pub type Point = Vec<Real>;
