//! Floating-point consequences of the exact machinery: certified
//! integration against μ, the Kinney dimension, and recurrence coefficients
//! of the orthonormal polynomials of μ.

pub mod gauss;
pub mod jacobi;
pub mod kinney;
pub mod quadrature;
