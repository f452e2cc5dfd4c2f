pub mod checkpoint;
pub mod error;
pub mod market;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod parallel;
pub mod selfcheck;
pub mod stats;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
