//! Reusable numerical kernels: Gauss-Hermite quadrature and natural cubic
//! spline interpolation.

mod hermite;
mod spline;

pub use hermite::{gauss_hermite, GaussHermiteRule, QuadratureError, MAX_QUAD_ORDER};
pub use spline::{CubicSpline, SplineError};
