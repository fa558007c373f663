//! Numerical laboratory for mostly contracting skew products.

pub mod carriers;
pub mod dynamics;
pub mod error;
pub mod hyperbolicity;
pub mod measures;
pub mod pliss;
pub mod seed;
pub mod stochastic;

pub use dynamics::{Point, SkewProductMap, Space, TangentBlock};
pub use error::{Error, Result};
