pub mod clustering;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod importance;
pub mod rng;
pub mod selection;
pub mod similarity;

pub use error::{Error, Result};
