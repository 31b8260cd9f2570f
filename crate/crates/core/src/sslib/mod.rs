//! Discrete-time LTI models, simulation, signal generators and Riccati-based
//! gain synthesis.

pub mod benchmarks;
mod model;
mod riccati;
mod signals;
mod simulate;

pub use model::{ControllerModel, StateSpaceModel};
pub use riccati::{
    dare_solve, kalman_gain, riccati_map, stabilizing_output_injection, DEFAULT_DARE_MAX_ITER,
    DEFAULT_DARE_TOL,
};
pub use signals::{excitation_reference, gaussian_noise, high_samples, square_wave, NOISE_GENERATOR};
pub use simulate::{closed_loop, simulate_closed_loop, ClosedLoop, simulate_open_loop, Trajectory};

pub(crate) use simulate::LoopStepper;
