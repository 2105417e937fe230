//! Numerical experiments for phase-space restriction of Laplace eigenfunctions
//! on flat Grauert tubes (circle and 2-torus).

pub mod error;
pub mod fbi;
pub mod fit;
pub mod geometry;
pub mod hypersurface;
pub mod logspace;
pub mod qer;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
