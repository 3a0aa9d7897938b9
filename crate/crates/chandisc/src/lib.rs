//! Bounds on error exponents for energy-constrained discrimination of bosonic
//! dephasing and loss-dephasing channels.

extern crate openblas_src;

pub mod channels;
pub mod conic;
pub mod divergences;
pub mod error;
pub mod hilbert;
pub mod matfunc;
pub mod oracle;
pub mod truncation;

pub use error::{Error, Result};
