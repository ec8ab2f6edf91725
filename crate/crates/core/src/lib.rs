//! Desk-scale laboratory for Dirichlet boundary spectra on smooth strictly
//! convex domains: exact eigenpairs on the disk and ball, a collocation
//! eigensolver for other planar domains, boundary flux functionals, and
//! packet-averaged cancellation statistics with rate fits.

pub mod bessel;
pub mod geometry;
pub mod io;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod legendre;
pub mod mps;
pub mod packets;
pub mod spectra;

pub use error::{Error, Result};
