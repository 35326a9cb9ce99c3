//! Secure ISAC with artificial noise: beamformer construction, angle CRBs,
//! their distributions under random channels, and ergodic secrecy rates.

pub mod beamforming;
pub mod config;
pub mod crb;
pub mod error;
pub mod experiments;
pub mod monte_carlo;
pub mod quadrature;
pub mod rng;
pub mod secrecy;
pub mod stochastic;
pub mod system_model;
pub mod validation;

pub use error::{Error, Result};
pub use rng::StreamSeed;
pub use system_model::SystemParams;
