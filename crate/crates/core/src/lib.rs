pub mod algos;
pub mod autodiff;
pub mod envs;
pub mod error;
pub mod harness;
pub mod oracles;
pub mod policy;
pub mod quantile;
pub mod seeds;

pub use error::{Error, Result};

/// Random number generator used for every simulation stream.
pub type SimRng = rand_chacha::ChaCha8Rng;
