//! Certified upper bounds on the Lipschitz constant of feed-forward networks
//! with slope-restricted activations, computed layer by layer.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod netio;
pub mod sdpsolve;
pub mod spectral;

pub use cascade::{verify_chain, verify_monolithic, Algorithm, Certificate};
pub use error::{Error, Result};
pub use estimators::{estimate, EstimateOptions};
pub use netio::Network;
