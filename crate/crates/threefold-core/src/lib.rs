//! Exact Čech cohomology on two-chart total spaces over the projective line.
//!
//! The threefolds treated here are glued from two copies of C^3 with
//! coordinates (z, u1, u2) and (xi, v1, v2), related over z != 0 by
//!
//! ```text
//! (xi, v1, v2) = (z^-1, z^k1 u1 + P1, z^k2 u2 + P2)
//! ```
//!
//! for integers k1, k2 and perturbation series P1, P2. Everything is computed
//! with exact rational coefficients inside an explicit truncation window, so
//! that coboundary membership, cohomology dimensions and bundle invariants
//! are exact linear-algebra decisions rather than numerical estimates.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the CLI
//! live in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bundles;
pub mod cech;
pub mod deform;
pub mod geometry;
pub mod linalg;
pub mod series;

pub use geometry::{BundleTransition, ExtensionClass, Slot, ThreefoldSpec, Transition};
pub use series::{Chart, Exponent, MultiSeries, SeriesError, SubstRules, TruncationPolicy, Var};
