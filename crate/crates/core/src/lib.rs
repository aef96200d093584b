//! Fast direct solver for the 2D Laplace double-layer equation on locally
//! perturbed curves: an HBS solver of the original curve is updated by a
//! low-rank correction instead of being rebuilt.

pub mod bench;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod hbs;
pub mod io;
pub mod lowrank;
pub mod oracle;
pub mod update;

pub use error::{Error, Result};
