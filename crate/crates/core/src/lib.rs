//! Ricci flow on two-dimensional Riemannian groupoids whose orbit space is a
//! circle, reduced to periodic data on `[0, 1)`.
//!
//! The metric is `g = e^{2k} dx² + e^{2u} dy²` where `k` may carry a linear
//! twist `k(y + 1) = k(y) + λ` and `u` is periodic.

pub mod analysis;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod twisted_grid;

pub use geometry::{Ambient, GeometryError, GroupoidMetric, HaarWeight, ReducedTensor};
pub use twisted_grid::{Grid, GridError, GridFunction, GridSpec, PeriodicField, Scheme, TwistedField};
