//! A numerical laboratory for kernel-weighted neural-network-style operators
//! on quantum states: channels and their representations, the tanh-difference
//! density kernel and its moments, finite-difference and Marchaud fractional
//! derivatives of state maps, the simplex-lattice approximation operator, its
//! asymptotic-expansion coefficients, and applications (matrix geometric
//! means, channel interpolation, Richardson/Romberg acceleration, covariance
//! forms).

pub mod applications;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod kernel;
pub mod qcore;
pub mod qnno;
pub mod quad;
pub mod statemaps;

pub use error::{QvdError, Result};
