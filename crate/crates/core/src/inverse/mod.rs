//! Noisy point measurements, their denoising, and Tikhonov inversion in
//! the reduced space.

mod denoise;
mod measurement;
mod tikhonov;

pub use denoise::{denoise, denoise_auto, h2_seminorm, select_alpha, ALPHA_FLOOR};
pub use measurement::{add_noise, uniform_detectors, MeasurementSet};
pub use tikhonov::{
    gradient_of_j, invert, objective, tikhonov_direct, tikhonov_direct_coordinates, tikhonov_gradient_descent, InverseConfig,
    InversionResult, SolveMode,
};
