pub mod data;
pub mod error;
pub mod lambert;
pub mod losses;
pub mod metrics;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
