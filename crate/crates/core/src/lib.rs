//! Numerical laboratory for the mixed operator 𝓔u = -Lu - div(a∇u), where L is
//! a symmetric stable operator given by a spectral measure.

pub mod config;
pub mod error;
pub mod fft;
pub mod grid;
pub mod heat;
pub mod io;
pub mod linalg;
pub mod local;
pub mod measure;
pub mod nonlocal;
pub mod reglab;
pub mod run;
pub mod solve;

pub use error::{Error, Result};
pub use grid::{Exterior, Field, GridDomain, Point, Shape};
pub use measure::{OperatorSpec, SpectralMeasure};
