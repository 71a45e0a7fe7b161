pub mod arrays;
pub mod diophantine;
pub mod error;
pub mod harness;
pub mod moments;
pub mod spectral;
pub mod waveform;

pub use error::{Error, Result};
