//! Congestion-constrained tumor growth with nutrient consumption.
//!
//! The density `rho <= 1` grows at rate `n - b` and is transported by the
//! pressure gradient; the nutrient `n` diffuses and is consumed by the tumor.
//! Time stepping alternates a Wasserstein projection onto `{rho <= 1}` with
//! an explicit nutrient update.

pub mod elliptic;
pub mod error;
pub mod grid;
pub mod master;
pub mod geometry;
pub mod ot;
pub mod presets;
pub mod scheme;

pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarField};
