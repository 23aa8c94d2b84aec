//! Quality measures for cubature formulas on the torus: classical and smooth
//! discrepancies, diaphony, plus point-set generators, a greedy knot
//! construction and a rate-study harness.

pub mod diaphony;
pub mod discrepancy;
pub mod error;
pub mod generators;
pub mod greedy;
pub mod harness;
pub mod kernels;
pub mod numeric;
pub mod pointset;
pub mod quadrature;

pub use error::{Error, Result};
pub use numeric::Exponent;
pub use pointset::{CubatureFormula, NormSpec, PointSet, RateEntry, RateReport, Weights};
