//! Driving noise, the Stratonovich diffusion, and the linear coefficient
//! systems solved along its paths.

mod diffusion;
mod linear;
mod noise;

pub use diffusion::{integrate_diffusion, DiffusionPath};
pub use linear::{
    eval_field_along_path, field_along_path, integrate_linear_system, make_admissible_system,
    CoefficientPath, LinearSystemSpec,
};
pub use noise::{sample_brownian, BrownianPath, CameronMartinPath, TimeGrid};
