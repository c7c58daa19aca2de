pub mod error;
pub mod field;
pub mod fieldspec;
pub mod game;
pub mod gaussian;
pub mod inequality;
pub mod means;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod value;

pub use error::{Error, Result};
