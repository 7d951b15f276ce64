//! Gaussian-measure Weyl calculus at finite truncation.
//!
//! Phase space is `E² = ℝ^D × ℝ^D`; the infinite-dimensional ambient space is represented
//! by the truncation dimension `D`. Functions on `E` live in the Hermite basis of
//! `L²(μ_{h/2})`, symbols are callables on `E²`, and operators are matrices in that basis.

pub mod bargmann;
pub mod checks;
pub mod contraction;
pub mod error;
pub mod gaussian_core;
pub mod heat_semigroup;
pub mod hermite_space;
pub mod limits;
pub mod linalg;
pub mod mc_wiener;
pub mod mutation;
pub mod phase;
pub mod quantizer;
pub mod symbol_library;
pub mod wigner;

pub use error::{GwError, Result};
pub use phase::{PhasePoint, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
