pub mod cli;
pub mod error;
pub mod dimension;
pub mod fractal;
pub mod geometry;
pub mod index;
pub mod io;
pub mod multiplicity;
pub mod tangency;
pub mod verify;

pub use error::{Error, Result};
