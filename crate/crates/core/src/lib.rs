//! Bayesian multilevel hidden Markov models for multivariate count series.
//!
//! Poisson emissions with lognormal individual rates, multinomial-logit
//! transitions with individual random effects, a hybrid Gibbs/Metropolis
//! sampler, decoding, and evaluation tooling.

pub mod data;
pub mod decode;
pub mod error;
pub mod evaluate;
pub mod hmm;
pub mod matrix;
pub mod model;
pub mod persist;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};

pub type Mat = matrix::Matrix<f64>;
pub type Mat32 = matrix::Matrix<f32>;
pub type Emission = model::EmissionParams<f64>;
pub type Emission32 = model::EmissionParams<f32>;
pub type Tpm = model::TransitionMatrix<f64>;
pub type Tpm32 = model::TransitionMatrix<f32>;
pub type Logits = model::TransitionLogits<f64>;
pub type Logits32 = model::TransitionLogits<f32>;
pub type Individual = model::IndividualParams<f64>;
pub type Individual32 = model::IndividualParams<f32>;
pub type Group = model::GroupParams<f64>;
pub type Group32 = model::GroupParams<f32>;
