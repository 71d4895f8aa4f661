//! Quasi-static frictional contact on faults with a stabilized augmented
//! Lagrangian method and face-bubble enrichment.

pub mod bench;
pub mod bubble;
pub mod config;
pub mod contact;
pub mod driver;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod meshio;
pub mod output;
pub mod solver;

pub use error::{Error, Result};
