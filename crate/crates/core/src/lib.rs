//! Exact Wigner-Weyl calculus on finite periodic tight-binding lattices.
//!
//! Operators on a ring (or torus) of physical sites are mapped to symbols on
//! the doubled lattice 𝔒 × momentum grid. The W symbol reproduces operator
//! products through an exact star product, traces through phase-space sums,
//! and feeds the Hall-conductivity invariant of the [`response`] module.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod moyal;
pub mod operator;
pub mod response;
pub mod series;
pub mod suite;
pub mod symbols;

pub use error::{Error, Result};
pub use geometry::LatticeGeometry;
pub use num_complex::Complex64;
pub use series::{series_integral_symbol, series_symbol, SymbolSeries};
pub use operator::{kernel_to_operator, momentum_kernel, spectral_gap, LatticeOperator, MomentumKernel};
pub use symbols::{buot_symbol, continuum_symbol, inverse_weyl, weyl_symbol, Flavor, ModeForm, WeylSymbol};
