pub mod constants;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod minimize;
pub mod model;
pub mod ode;
pub mod segregation;
pub mod thresholds;
