//! Data I/O, preprocessing, fixtures and benchmark arms around `blitz-core`.

pub mod bench;
pub mod error;
pub mod fixtures;
pub mod libsvm;
pub mod preprocess;

pub use error::{HarnessError, Result};
