pub mod bump;
pub mod homotopy;
pub mod inclination;
pub mod model;
pub mod quadratic;

pub use bump::{bump, bump_derivative, bump_scaled, bump_scaled_derivative};
pub use homotopy::{FieldHomotopy, HomotopyMember};
pub use inclination::{
    inclination, inclination_experiment, inclination_sweep, start_grid, InclinationConfig, InclinationReport,
    InclinationRun, InclinationStart, InclinationSweep,
};
pub use model::{ModelField, SplitQuadratic};
pub use quadratic::{gauss_legendre, NormalFormCheck, QuadraticNormalization};
