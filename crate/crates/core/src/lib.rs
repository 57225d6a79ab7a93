//! Numerical laboratory for Schrödinger operators `T + U + λV` on regular
//! rooted trees, where `T` is the adjacency operator, `U` a radially periodic
//! background and `V` a random potential.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: tree geometry, background potential and disorder samplers.
//! * [`resolvent`]: forward resolvents `Γ_x` on truncated trees, radial
//!   chains and population-dynamics pools.
//! * [`cocycle`]: the periodic Möbius cocycle, its discriminant, ac bands
//!   and the half-line cross-check.
//! * [`stats`]: relative widths, Lyapunov estimates and inequality checkers.
//! * [`experiments`]: scenario drivers producing curve records and reports.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Every random
//! draw is keyed by a counter-based stream, so results do not depend on the
//! number of worker threads.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cocycle;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod par;
pub mod resolvent;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
