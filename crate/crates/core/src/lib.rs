pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod limits;
pub mod model;
pub mod quad;
pub mod radial;
pub mod special;

pub use error::{Error, Result};
