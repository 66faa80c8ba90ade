pub mod bounds;
pub mod cli;
pub mod error;
pub mod fading;
pub mod linalg;
pub mod numeric;
pub mod powerchain;
pub mod seed;
pub mod simulate;
pub mod topology;

pub use error::{Error, Result};
