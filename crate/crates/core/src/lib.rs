pub mod cli;
pub mod curveflow;
pub mod error;
pub mod hypothesis;
pub mod monitors;
pub mod patch;
pub mod potential;

pub use error::{Error, Result};
