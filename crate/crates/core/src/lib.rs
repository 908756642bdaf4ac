pub mod dynsys;
pub mod error;
pub mod harness;
pub mod hyperopt;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod observe;
pub mod reservoir;
pub mod seed;
pub mod tensorcore;
pub mod transformer;

pub use error::{Error, Result};
pub use matrix::Matrix;
