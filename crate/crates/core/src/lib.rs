pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod models;
pub mod optimizer;
pub mod propagator;
pub mod rng;
pub mod scan;
pub mod tradeoff;

pub use error::{Error, Result};
