pub mod boltzmann;
pub mod cli;
pub mod error;
pub mod integrate;
pub mod io;
pub mod kac;
pub mod kernels;
pub mod linalg;
pub mod markov;
pub mod measures;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
