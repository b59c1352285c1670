pub mod config;
pub mod dnp;
pub mod error;
pub mod fit;
pub mod io;
pub mod plan;
pub mod signal;
pub mod seed;
pub mod spectra;
pub mod spin;

pub use error::{Error, Result};
