//! Boundary blow-up ("large") solutions of `(-Δ)^s u = -f(u)` on the
//! interval `(-1, 1)` and the radial unit ball.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod fraclap;
pub mod kernels;
pub mod ko;
pub mod mesh;
pub mod nonlinearity;
pub mod quad;
pub mod report;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
