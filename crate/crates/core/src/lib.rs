//! Analysis of balanced bilinear epidemic models.
//!
//! The crate covers the full pipeline from a matrix bundle or a mass-action
//! reaction network to disease-free and endemic equilibria, reproduction
//! numbers, Perron data, Lyapunov certificates and siphon structure.

pub mod crn;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod ngm;
pub mod random;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
pub use model::{BilinearModel, RankClass, RankTag, Tolerances};
