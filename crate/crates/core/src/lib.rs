pub mod cli;
pub mod dynamics;
pub mod error;
pub mod flux;
pub mod lattice;
pub mod linalg;
pub mod network;
pub mod path;
pub mod walk;

pub use error::{Error, Result};
