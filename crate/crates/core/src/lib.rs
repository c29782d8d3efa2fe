//! Generalized Laplace analysis of Koopman operators.
//!
//! Trajectories of linear, conjugate-nonlinear and limit-cycle systems
//! ([`dynsys`]), their truncated eigenvalue lattices ([`spectra`]), Laplace
//! averages and the recursive peel-off that extracts spectral projections
//! ([`gla`]), closed-form eigenfunctions used as oracles ([`analytic`]) and
//! ring polynomials with their spectral measure ([`hardy`]).
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analytic;
pub mod dynsys;
mod error;
pub mod gla;
pub mod hardy;
mod kahan;
pub mod linalg;
pub mod spectra;
mod wide;

pub use error::{Error, Result};
pub use kahan::KahanSum;
pub use num_complex::Complex64;
pub use wide::Wide;
