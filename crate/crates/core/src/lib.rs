//! Calderón operators for Wick-rotated Klein-Gordon operators on analytic
//! 1+1-dimensional spacetimes `R x S^1`, the two-point functions they induce,
//! and numerical checks of the identities relating them.

pub mod error;
pub mod geometry;
pub mod calderon;
pub mod config;
pub mod elliptic;
pub mod linalg;
pub mod lorentzian;
pub mod report;
pub mod runner;
pub mod twopoint;
pub mod wick;

pub use error::{Error, Result};
