pub mod align;
pub mod baselines;
pub mod corpus;
pub mod data;
mod error;
pub mod eval;
pub mod irr;
pub mod neural;
pub mod pipeline;
pub mod preprocess;
pub mod project;
pub mod rng;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use rng::Rng;
