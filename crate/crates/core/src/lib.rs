//! Exact Stern–Brocot / Möbius-IFS machinery for Minkowski's question mark
//! function and its measure μ.
//!
//! The exact layer is generic over an integer carrier implementing
//! [`scalar::ExactInt`]; the floating layer over [`scalar::Real`]. The
//! aliases below fix the carriers used by the CLI and the test suites.

pub mod exact;
pub mod partition;
pub mod question_mark;
pub mod regularity;
pub mod scalar;
pub mod spectral;
pub mod verify;

use num_bigint::BigInt;

pub use num_rational::BigRational;

pub type Fraction = exact::Fraction<BigInt>;
pub type UnimodularMap = exact::UnimodularMap<BigInt>;
pub type DyadicRational = question_mark::DyadicRational<BigInt>;
pub type IfsInterval = partition::IfsInterval<BigInt>;
pub type SternBrocotLevel = partition::SternBrocotLevel<BigInt>;

pub use partition::Word;
pub type CensusRecord = regularity::CensusRecord<BigInt>;
pub type PipelineReport = regularity::PipelineReport<BigInt>;
pub type QAlphaSet = regularity::QAlphaSet<BigInt>;
pub type LambdaStarReport = regularity::LambdaStarReport<BigInt>;

pub type QuadratureResult = spectral::quadrature::QuadratureResult<f64>;
pub type MeasureAtoms = spectral::jacobi::MeasureAtoms<f64>;
pub type RecurrenceCoeffs = spectral::jacobi::RecurrenceCoeffs<f64>;
