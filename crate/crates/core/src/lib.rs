//! Numerical toolkit for Dirichlet problems
//! `-div(A(x) Du) = H(x, u, Du) + f(x) + a0(x) u` with a Hamiltonian of
//! quadratic growth in `Du`.
//!
//! The pieces are:
//! - [`constants`]: the exponent `theta`, the critical parameter `delta_0`,
//!   the a priori radius `Z_{delta_0}` and the two smallness conditions;
//! - [`nonlinear`]: pointwise nonlinearities and the exponential change of unknown;
//! - [`grid`], [`linalg`], [`sobolev`]: the discretization, norms and the
//!   discrete Sobolev constant;
//! - [`solver`]: the truncated problem, its fixed-point iteration and the
//!   truncation continuation;
//! - [`config`] and [`experiment`]: JSON configs and the command pipeline.

pub mod config;
pub mod constants;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linalg;
pub mod nonlinear;
pub mod sobolev;
pub mod solver;

pub use error::{Error, Result};
