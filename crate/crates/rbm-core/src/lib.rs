//! Averaged density of states of 1D Gaussian random band matrices, computed two
//! independent ways:
//!
//! * [`ensemble`] — direct Monte-Carlo: sample Hermitian band matrices with
//!   covariance profile J = (-W²Δ+1)⁻¹ and average the resolvent trace over
//!   eigenvalue decompositions.
//! * [`transfer`] — a supersymmetric transfer-operator identity: the n-fold
//!   coupled integral representation of the averaged Green's function collapses
//!   to powers of a single operator 𝒦 = K̆S acting on 2-component fields over a
//!   2D quadrature grid, where K̆ is a separable Gaussian smoothing operator and
//!   S a pointwise 2×2 mixing matrix.
//!
//! Supporting layers: [`landscape`] holds the closed-form saddle-point data of
//! the two scalar potentials entering the integral representation; [`grid`]
//! builds composite Gauss–Legendre quadrature grids, banded Gaussian blur
//! operators, and a Hermite-basis model operator used as a high-precision test
//! oracle; [`oracle`] brute-forces the 1- and 2-site field integrals that pin
//! down every sign and normalization convention; [`spectral`] computes leading
//! eigenvalues of the transfer operator matrix-free.
//!
//! The [`acceptance`] module bundles the end-to-end verification checks (exact
//! normalization, oracle equivalence, leading eigenvalue, spectral-gap and
//! density-of-states W-scaling, Monte-Carlo cross-validation).

pub mod acceptance;
pub mod eig;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod grid;
pub mod landscape;
pub mod oracle;
pub mod params;
pub mod spectral;
pub mod transfer;

pub use error::Error;
pub use params::ModelParams;

/// Shorthand used throughout: double-precision complex scalar.
pub type C64 = num_complex::Complex64;
