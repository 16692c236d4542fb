//! Exact fractions on `[0, 1]`, Farey operations and unimodular Möbius maps.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::ExactInt;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("value {0} lies outside [0, 1]")]
    OutsideUnitInterval(String),
    #[error("map denominator vanishes or changes sign on [0, 1]")]
    VanishingDenominator,
    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },
}

/// An irreducible fraction `num/den` with `0 <= num <= den`, `den > 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Fraction<T> {
    num: T,
    den: T,
}

impl<T: ExactInt> Fraction<T> {
    /// Builds and reduces `num/den`. Rejects values outside `[0, 1]`.
    pub fn new(num: T, den: T) -> Result<Self, ExactError> {
        if den.is_zero() {
            return Err(ExactError::ZeroDenominator);
        }
        let (mut num, mut den) = (num, den);
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        if num.is_negative() || num > den {
            return Err(ExactError::OutsideUnitInterval(format!("{num}/{den}")));
        }
        let g = num.gcd(&den);
        Ok(Self {
            num: num / g.clone(),
            den: den / g,
        })
    }

    /// Skips the gcd. Callers guarantee irreducibility, e.g. a mediant of
    /// Farey neighbours.
    pub fn new_unchecked(num: T, den: T) -> Self {
        debug_assert!(den.is_positive());
        debug_assert!(!num.is_negative() && num <= den);
        debug_assert!(num.gcd(&den).is_one(), "{num}/{den} is not reduced");
        Self { num, den }
    }

    pub fn from_ratio(r: &Ratio<T>) -> Result<Self, ExactError> {
        Self::new(r.numer().clone(), r.denom().clone())
    }

    pub fn zero() -> Self {
        Self {
            num: T::zero(),
            den: T::one(),
        }
    }

    pub fn one() -> Self {
        Self {
            num: T::one(),
            den: T::one(),
        }
    }

    pub fn numer(&self) -> &T {
        &self.num
    }

    pub fn denom(&self) -> &T {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn to_ratio(&self) -> Ratio<T> {
        Ratio::new_raw(self.num.clone(), self.den.clone())
    }

    /// `1 - x`.
    pub fn complement(&self) -> Self {
        Self {
            num: self.den.clone() - self.num.clone(),
            den: self.den.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.num, &self.den)
    }

    /// Farey sum `(p + p')/(q + q')`, reduced.
    pub fn mediant(&self, other: &Self) -> Self {
        let num = self.num.clone() + other.num.clone();
        let den = self.den.clone() + other.den.clone();
        if farey_det(self, other).abs().is_one() {
            Self::new_unchecked(num, den)
        } else {
            Self::new(num, den).expect("mediant of two fractions in [0,1] stays in [0,1]")
        }
    }

    /// Exact `other - self`; negative differences are reported as the
    /// signed rational.
    pub fn gap(&self, other: &Self) -> Ratio<T> {
        other.to_ratio() - self.to_ratio()
    }
}

/// `Δ(f, g) = g.num·f.den − g.den·f.num`.
pub fn farey_det<T: ExactInt>(f: &Fraction<T>, g: &Fraction<T>) -> T {
    g.num.clone() * f.den.clone() - g.den.clone() * f.num.clone()
}

pub fn mediant<T: ExactInt>(f: &Fraction<T>, g: &Fraction<T>) -> Fraction<T> {
    f.mediant(g)
}

impl<T: ExactInt> Ord for Fraction<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num.clone() * other.den.clone()).cmp(&(other.num.clone() * self.den.clone()))
    }
}

impl<T: ExactInt> PartialOrd for Fraction<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: ExactInt> fmt::Display for Fraction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl<T: ExactInt> fmt::Debug for Fraction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<T: ExactInt> FromStr for Fraction<T> {
    type Err = ExactError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ExactError::Parse {
            what: "fraction",
            input: s.to_string(),
        };
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let n: T = n.parse().map_err(|_| err())?;
        let d: T = d.parse().map_err(|_| err())?;
        Self::new(n, d)
    }
}

impl<T: ExactInt> Serialize for Fraction<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de, T: ExactInt> Deserialize<'de> for Fraction<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `num/den` as the nearest-ish `f64`, robust to operands beyond `f64` range.
pub fn ratio_to_f64<T: ExactInt>(num: &T, den: &T) -> f64 {
    let (n, d) = (num.to_f64_lossy(), den.to_f64_lossy());
    if n.is_finite() && d.is_finite() && d != 0.0 {
        return n / d;
    }
    // Scale both down by a common power of two until they fit.
    let bits = |v: &T| -> usize {
        let mut v = v.abs();
        let mut b = 0usize;
        let chunk = T::pow2(64);
        while v >= chunk {
            v = v / chunk.clone();
            b += 64;
        }
        b
    };
    let shift = bits(num).max(bits(den)).saturating_sub(960);
    let scale = T::pow2(shift);
    let n = (num.clone() / scale.clone()).to_f64_lossy();
    let d = (den.clone() / scale).to_f64_lossy();
    n / d
}

/// A Möbius map `x ↦ (a·x + b)/(c·x + d)` with integer entries.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UnimodularMap<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: ExactInt> UnimodularMap<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    /// `M_0(x) = x/(1+x)`.
    pub fn m0() -> Self {
        Self::new(T::one(), T::zero(), T::one(), T::one())
    }

    /// `M_1(x) = 1/(2-x)`.
    pub fn m1() -> Self {
        let two = T::one() + T::one();
        Self::new(T::zero(), T::one(), -T::one(), two)
    }

    pub fn generator(bit: bool) -> Self {
        if bit {
            Self::m1()
        } else {
            Self::m0()
        }
    }

    pub fn det(&self) -> T {
        self.a.clone() * self.d.clone() - self.b.clone() * self.c.clone()
    }

    /// `self ∘ other`, i.e. the matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        let out = Self::new(
            self.a.clone() * other.a.clone() + self.b.clone() * other.c.clone(),
            self.a.clone() * other.b.clone() + self.b.clone() * other.d.clone(),
            self.c.clone() * other.a.clone() + self.d.clone() * other.c.clone(),
            self.c.clone() * other.b.clone() + self.d.clone() * other.d.clone(),
        );
        debug_assert!(
            out.det() == self.det() * other.det(),
            "determinant is multiplicative"
        );
        out
    }

    /// `self ∘ M_bit` without a general matrix product.
    pub fn then_generator(&self, bit: bool) -> Self {
        if bit {
            // [[a,b],[c,d]]·[[0,1],[-1,2]]
            let two_b = self.b.clone() + self.b.clone();
            let two_d = self.d.clone() + self.d.clone();
            Self::new(
                -self.b.clone(),
                self.a.clone() + two_b,
                -self.d.clone(),
                self.c.clone() + two_d,
            )
        } else {
            // [[a,b],[c,d]]·[[1,0],[1,1]]
            Self::new(
                self.a.clone() + self.b.clone(),
                self.b.clone(),
                self.c.clone() + self.d.clone(),
                self.d.clone(),
            )
        }
    }

    /// Image of `x`. Errors if the result leaves `[0, 1]` or the denominator
    /// vanishes, which cannot happen for generator compositions.
    pub fn apply(&self, x: &Fraction<T>) -> Result<Fraction<T>, ExactError> {
        let num = self.a.clone() * x.num.clone() + self.b.clone() * x.den.clone();
        let den = self.c.clone() * x.num.clone() + self.d.clone() * x.den.clone();
        if den.is_zero() {
            return Err(ExactError::VanishingDenominator);
        }
        if self.det().abs().is_one() {
            // Unimodular maps send reduced fractions to reduced fractions.
            let (num, den) = if den.is_negative() {
                (-num, -den)
            } else {
                (num, den)
            };
            if num.is_negative() || num > den {
                return Err(ExactError::OutsideUnitInterval(format!("{num}/{den}")));
            }
            Ok(Fraction::new_unchecked(num, den))
        } else {
            Fraction::new(num, den)
        }
    }

    /// `M(0) = b/d`.
    pub fn at_zero(&self) -> Fraction<T> {
        Fraction::new_unchecked(self.b.clone(), self.d.clone())
    }

    /// `M(1) = (a+b)/(c+d)`.
    pub fn at_one(&self) -> Fraction<T> {
        Fraction::new_unchecked(
            self.a.clone() + self.b.clone(),
            self.c.clone() + self.d.clone(),
        )
    }

    /// Rebuilds `M_σ` from the endpoints of `I_σ`:
    /// `x ↦ ((p̂−p)x + p)/((q̂−q)x + q)`.
    pub fn from_endpoints(left: &Fraction<T>, right: &Fraction<T>) -> Self {
        Self::new(
            right.num.clone() - left.num.clone(),
            left.num.clone(),
            right.den.clone() - left.den.clone(),
            left.den.clone(),
        )
    }
}

impl<T: ExactInt> fmt::Display for UnimodularMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

impl<T: ExactInt> fmt::Debug for UnimodularMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<T: ExactInt> FromStr for UnimodularMap<T> {
    type Err = ExactError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ExactError::Parse {
            what: "map",
            input: s.to_string(),
        };
        let cleaned: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '[' && *c != ']')
            .collect();
        let parts = cleaned
            .split(',')
            .map(|p| p.parse::<T>().map_err(|_| err()))
            .collect::<Result<Vec<_>, _>>()?;
        match <[T; 4]>::try_from(parts) {
            Ok([a, b, c, d]) => Ok(Self::new(a, b, c, d)),
            Err(_) => Err(err()),
        }
    }
}

impl<T: ExactInt> Serialize for UnimodularMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de, T: ExactInt> Deserialize<'de> for UnimodularMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    type F = Fraction<BigInt>;
    type M = UnimodularMap<BigInt>;

    fn fr(s: &str) -> F {
        s.parse().unwrap()
    }

    #[test]
    fn mediant_examples() {
        assert_eq!(mediant(&fr("0/1"), &fr("1/1")), fr("1/2"));
        assert_eq!(mediant(&fr("1/3"), &fr("1/2")), fr("2/5"));
        assert_eq!(mediant(&fr("1/2"), &fr("1/1")), fr("2/3"));
    }

    #[test]
    fn mediant_reduces_non_neighbours() {
        // 1/3 ⊕ 2/3 = 3/6 = 1/2
        assert_eq!(mediant(&fr("1/3"), &fr("2/3")), fr("1/2"));
    }

    #[test]
    fn farey_det_examples() {
        assert_eq!(farey_det(&fr("0/1"), &fr("1/1")), BigInt::from(1));
        assert_eq!(farey_det(&fr("1/3"), &fr("1/2")), BigInt::from(1));
        assert_eq!(farey_det(&fr("1/3"), &fr("2/3")), BigInt::from(3));
    }

    #[test]
    fn compose_and_apply_examples() {
        let id = M::identity();
        assert_eq!(id.compose(&M::m0()), M::m0());
        let zero = F::zero();
        assert_eq!(M::m0().compose(&M::m1()).apply(&zero).unwrap(), fr("1/3"));
        assert_eq!(M::m1().compose(&M::m0()).apply(&zero).unwrap(), fr("1/2"));
        assert_eq!(M::m0().apply(&F::one()).unwrap(), fr("1/2"));
        assert_eq!(M::m1().apply(&F::zero()).unwrap(), fr("1/2"));
        let m01 = M::m0().compose(&M::m1());
        assert_eq!(m01.apply(&F::zero()).unwrap(), fr("1/3"));
        assert_eq!(m01.apply(&F::one()).unwrap(), fr("1/2"));
        assert_eq!(
            m01.apply(&F::zero()).unwrap(),
            mediant(&F::zero(), &fr("1/2"))
        );
    }

    #[test]
    fn apply_rejects_images_outside_unit_interval() {
        let shift = M::new(1.into(), 1.into(), 0.into(), 1.into());
        assert!(matches!(
            shift.apply(&fr("1/2")),
            Err(ExactError::OutsideUnitInterval(_))
        ));
        let pole = M::new(1.into(), 0.into(), (-2).into(), 1.into());
        assert!(pole.apply(&fr("1/2")).is_err());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(F::new(1.into(), 0.into()), Err(ExactError::ZeroDenominator));
        assert!(F::new(3.into(), 2.into()).is_err());
        assert!("3/2".parse::<F>().is_err());
        assert!("abc".parse::<F>().is_err());
        assert_eq!(F::new(2.into(), 4.into()).unwrap(), fr("1/2"));
        assert_eq!(F::new((-1).into(), (-2).into()).unwrap(), fr("1/2"));
    }

    #[test]
    fn serialization_forms() {
        assert_eq!(fr("2/5").to_string(), "2/5");
        assert_eq!(M::m1().to_string(), "[[0,1],[-1,2]]");
        assert_eq!("[[0,1],[-1,2]]".parse::<M>().unwrap(), M::m1());
        let json = serde_json::to_string(&fr("3/7")).unwrap();
        assert_eq!(json, "\"3/7\"");
        let back: F = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fr("3/7"));
    }

    #[test]
    fn huge_ratio_to_f64() {
        let big = BigInt::from(3) << 2000usize;
        let den = BigInt::from(4) << 2000usize;
        assert!((ratio_to_f64(&big, &den) - 0.75).abs() < 1e-15);
    }

    fn word() -> impl Strategy<Value = Vec<bool>> {
        proptest::collection::vec(any::<bool>(), 0..40)
    }

    fn compose_word(bits: &[bool]) -> M {
        bits.iter()
            .fold(M::identity(), |m, &b| m.compose(&M::generator(b)))
    }

    proptest! {
        #[test]
        fn generator_words_are_unimodular_and_increasing(bits in word(), a in 0u32..1000, b in 1u32..1000, c in 0u32..1000, d in 1u32..1000) {
            let m = compose_word(&bits);
            prop_assert_eq!(m.det(), BigInt::from(1));
            prop_assert_eq!(m.clone(), bits.iter().fold(M::identity(), |m, &b| m.then_generator(b)));
            let x = F::new(a.min(b).into(), b.into()).unwrap();
            let y = F::new(c.min(d).into(), d.into()).unwrap();
            let (fx, fy) = (m.apply(&x).unwrap(), m.apply(&y).unwrap());
            prop_assert_eq!(x.cmp(&y), fx.cmp(&fy));
            prop_assert_eq!(m.apply(&F::zero()).unwrap(), m.at_zero());
            prop_assert_eq!(m.apply(&F::one()).unwrap(), m.at_one());
            // at_zero/at_one use the unchecked constructor: irreducible when det = 1.
            let z = m.at_zero();
            prop_assert!(num_integer::Integer::gcd(z.numer(), z.denom()) == BigInt::from(1));
        }

        #[test]
        fn mediant_of_neighbours_is_neighbour_of_both(bits in word()) {
            let m = compose_word(&bits);
            let (l, r) = (m.at_zero(), m.at_one());
            prop_assume!(farey_det(&l, &r) == BigInt::from(1));
            let md = mediant(&l, &r);
            prop_assert_eq!(farey_det(&l, &md), BigInt::from(1));
            prop_assert_eq!(farey_det(&md, &r), BigInt::from(1));
            prop_assert!(l < md && md < r);
            prop_assert_eq!(M::from_endpoints(&l, &r), m);
        }
    }
}
