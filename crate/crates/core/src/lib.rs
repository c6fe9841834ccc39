//! Numerical toolkit for the computable core of a non-spherical GL(3)
//! Kuznetsov formula: exact Kloosterman sums and their finite Fourier
//! transforms, Bessel kernels in two independent representations, weight
//! transforms, Hecke eigenvalue identities and the stationary-phase surface.
//!
//! Every quadrature returns a [`QuadResult`] carrying an error estimate, so
//! results from independent representations can be compared honestly.

pub mod cli;
pub mod decay;
pub mod error;
pub mod kernels;
pub mod kloosterman;
pub mod kuznetsov;
pub mod lfunction;
pub mod phase;
pub mod quad;
pub mod special;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use quad::{QuadResult, QuadratureSettings};
pub use special::SpectralPoint;
