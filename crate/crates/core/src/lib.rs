//! Numerical laboratory for the spatially homogeneous Landau equation.
//!
//! The crate discretises velocity space on a cell-centred lattice, computes
//! the nonlocal coefficient fields by zero-padded FFT convolution, and
//! measures the weighted-inequality functionals (Muckenhoupt and
//! reverse-Hölder constants, epsilon-Poincaré spectral bounds, Moser
//! iteration norms) along simulated trajectories.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod cli;
pub mod coefficients;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod numerics;
pub mod operator;
pub mod poincare;
pub mod rates;
pub mod report;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
