//! Character sums over finite fields and numerical checks of their moment
//! bounds and equidistribution.
//!
//! - [`field`]: F_q arithmetic, discrete logs, multiplicative and additive characters.
//! - [`charsums`]: Gauss, Jacobi, hyper-Kloosterman and hypergeometric sums.
//! - [`moments`]: mixed and bilinear moments of Jacobi sums with their bounds.
//! - [`equidist`]: angle samples, discrepancy, Erdős–Turán–Koksma bounds, prime scans.
//! - [`cache`]: binary cache files for built field contexts.

pub mod cache;
pub mod charsums;
pub mod equidist;
pub mod error;
pub mod field;
pub mod moments;
mod poly;
pub mod util;

pub use charsums::{GaussMethod, GaussTable, HypergeomSpec};
pub use error::{Error, Result};
pub use field::{build_field, CharIndex, Elem, FieldBuilder, FieldCtx};
pub use num_complex::Complex64;
