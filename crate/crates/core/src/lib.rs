//! Discrete weak KAM theory on finite state spaces with a nonlinear
//! vanishing-discount problem on top.
//!
//! The classical layer ([`classical`], [`mather`]) computes the critical
//! constant, Peierls barrier, Aubry set and Mather measures of a base cost.
//! [`implicit`] and [`discounted`] solve the implicit discounted fixed-point
//! equation, and [`limit`] computes its vanishing-discount limit by two
//! independent formulas. [`experiments`] sweeps λ and probes uniqueness.

pub mod classical;
pub mod cli;
pub mod discounted;
pub mod error;
pub mod experiments;
pub mod implicit;
pub mod limit;
pub mod mather;
pub mod model;
pub mod table;

pub use error::{Error, Result};
pub use model::{BaseCost, CostModel, Coupling, CouplingVariant, FiniteSpace};
pub use table::{Potential, Table};
