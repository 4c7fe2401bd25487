//! Simulation and analysis of "spin lenses": unitary focusing of a
//! delocalized spin excitation on a lattice of two-level atoms.
//!
//! Units: energies in the nearest-neighbour hopping `J`, lengths in the
//! lattice spacing `a`, times in `1/J` (ħ = 1).
//!
//! Width convention: a packet `ψ(x) ∝ exp(-x²/(2σ²))` has width `σ`, so the
//! reported width is `√2` times the standard deviation of `|ψ|²` along each
//! axis. See [`singlex::rms_width`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod disorder;
pub mod error;
pub mod lattice;
pub mod lens;
pub mod manybody;
pub mod propagator;
pub mod protocol;
pub mod rydberg;
pub mod singlex;
pub mod sparse;
pub mod table;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
