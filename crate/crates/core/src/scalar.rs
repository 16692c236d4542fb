//! Scalar traits the rest of the crate is generic over.
//!
//! Exact code is written against [`ExactInt`], an integer ring with floor
//! division and shifts; the crate-root aliases pick [`num_bigint::BigInt`].
//! Floating code is written against [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Shl;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{Float, FromPrimitive, Signed, ToPrimitive};

/// Integer type usable as the carrier of exact fractions and Möbius maps.
///
/// Overflow is the caller's problem for fixed-width types; only unbounded
/// integers give the exactness guarantees documented throughout the crate.
pub trait ExactInt:
    Integer
    + Signed
    + Clone
    + Debug
    + Display
    + FromStr
    + FromPrimitive
    + ToPrimitive
    + Shl<usize, Output = Self>
    + Send
    + Sync
{
    fn from_u64(v: u64) -> Self {
        <Self as FromPrimitive>::from_u64(v).expect("u64 fits in the integer carrier")
    }

    /// `2^k`.
    fn pow2(k: usize) -> Self {
        Self::one() << k
    }

    /// Lossy conversion used only for decimal renderings.
    fn to_f64_lossy(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl<T> ExactInt for T where
    T: Integer
        + Signed
        + Clone
        + Debug
        + Display
        + FromStr
        + FromPrimitive
        + ToPrimitive
        + Shl<usize, Output = T>
        + Send
        + Sync
{
}

/// Floating-point scalar for the spectral module.
pub trait Real: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<F> {
    sum: F,
    carry: F,
}

impl<F: Real> Default for CompensatedSum<F> {
    fn default() -> Self {
        Self {
            sum: F::zero(),
            carry: F::zero(),
        }
    }
}

impl<F: Real> CompensatedSum<F> {
    pub fn add(&mut self, v: F) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> F {
        self.sum + self.carry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn pow2_matches_shift() {
        assert_eq!(<BigInt as ExactInt>::pow2(70), BigInt::from(1u8) << 70usize);
        assert_eq!(<i64 as ExactInt>::pow2(10), 1024);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::<f64>::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-14).abs() < 1e-20);
    }
}
