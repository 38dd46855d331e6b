//! Numerical toolkit for small random perturbations of dynamical systems:
//! trajectories, quasipotentials, metastability hierarchies, averaging on
//! graphs, reaction-diffusion fronts and slow-fast switching.

pub mod action;
pub mod cycles;
pub mod dsl;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod field;
pub mod fixtures;
pub mod front;
pub mod graph;
pub mod linalg;
pub mod markov;
pub mod mc;
pub mod phantom;
pub mod quad;
pub mod reeb;
pub mod rng;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use field::Field;
pub use rng::RngStream;
