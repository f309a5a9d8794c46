//! Minimax estimation of linear, quadratic and ℓ2-norm functionals of a
//! sparse mean in the Gaussian sequence model `y = θ + σξ`.
//!
//! ```
//! use sparse_functionals::estimators::estimate_linear_b0;
//! use sparse_functionals::model::{generate_observation, ParameterVector};
//! use sparse_functionals::rates::rate_linear_b0;
//!
//! let theta = ParameterVector::spikes(1024, 4, 3.0)?;
//! let obs = generate_observation(&theta, 1.0, 42)?;
//! let estimate = estimate_linear_b0(&obs, 4)?;
//! let rate = rate_linear_b0(4, 1024, 1.0)?;
//! assert!((estimate - 12.0).powi(2) < 50.0 * rate.value);
//! # Ok::<(), sparse_functionals::Error>(())
//! ```

pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod harness;
pub mod io;
pub mod lower_bounds;
pub mod model;
pub mod rates;
pub mod testing;

pub use error::{Error, Result};
