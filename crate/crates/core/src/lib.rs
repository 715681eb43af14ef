//! Spherical locality-sensitive filters (Spherical-LSF) for the angular
//! (γ, cγ)-approximate near neighbor problem on the unit sphere.
//!
//! A filter is a spherical cap `h(x) = 1{θᵀx ≥ τ}` with `θ ~ N(0, I/d)`.
//! Data points are stored in every bucket whose filter they pass; a query
//! scans only the buckets of the filters it passes itself.
//!
//! The crate is split along the same lines as the analysis:
//!
//! - [`sphere`]: unit vectors, angles and planted-pair construction.
//! - [`gauss`]: standard normal density, CDF, quantile and tail bounds.
//! - [`collision`]: analytic collision-probability bounds, the exact joint
//!   probability by quadrature, and the ρ exponent.
//! - [`filter`]: the filter bank, signatures and parameter selection.
//! - [`index`]: bucketed index and early-exit query.
//! - [`verify`]: Monte Carlo estimators checking the analytic bounds.
//! - [`dataset`], [`bench`]: file formats and the end-to-end benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod collision;
pub mod dataset;
mod error;
pub mod filter;
pub mod gauss;
pub mod index;
pub mod quadrature;
pub mod rng;
pub mod sphere;
pub mod verify;

pub use error::{Error, Result};
pub use filter::write_atomic;
pub use rng::{derive_seed, seeded_rng, SeededRng};
pub use sphere::{Angle, UnitVector};
