//! Minkowski's question mark function: exact values on rationals, a
//! tail-bounded evaluator for floats, the inverse on dyadics, and μ-measures
//! of intervals through `?(x) = μ([0, x))`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::exact::{ExactError, Fraction, UnimodularMap};
use crate::partition::Word;
use crate::scalar::{ExactInt, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QmError {
    #[error("argument {0} is outside [0, 1]")]
    OutsideUnitInterval(String),
    #[error("argument is not finite")]
    NonFinite,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(String),
    #[error("interval endpoints out of order: {0} > {1}")]
    Reversed(String, String),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Simple continued fraction `[n_1, n_2, …]` of a number in `[0, 1]`,
/// meaning `1/(n_1 + 1/(n_2 + …))`. The empty list encodes `0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ContinuedFraction {
    terms: Vec<u64>,
}

impl ContinuedFraction {
    /// Accepts any list of positive terms, canonical or not.
    pub fn new(terms: Vec<u64>) -> Result<Self, QmError> {
        if terms.contains(&0) {
            return Err(QmError::OutsideUnitInterval(format!("{terms:?}")));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[u64] {
        &self.terms
    }

    /// Last term is at least 2 whenever there are two or more terms.
    pub fn is_canonical(&self) -> bool {
        self.terms.len() < 2 || *self.terms.last().unwrap() >= 2
    }

    /// Rewrites `[…, n]` with `n >= 2` as `[…, n-1, 1]`.
    pub fn split_last(&self) -> Option<Self> {
        let (&last, head) = self.terms.split_last()?;
        if last < 2 {
            return None;
        }
        let mut terms = head.to_vec();
        terms.push(last - 1);
        terms.push(1);
        Some(Self { terms })
    }

    /// Partial sums `N_j = n_1 + … + n_j`.
    pub fn partial_sums(&self) -> impl Iterator<Item = u64> + '_ {
        self.terms.iter().scan(0u64, |acc, &n| {
            *acc += n;
            Some(*acc)
        })
    }

    pub fn value<T: ExactInt>(&self) -> Fraction<T> {
        let (mut num, mut den) = (T::zero(), T::one());
        for &n in self.terms.iter().rev() {
            // 1/(n + num/den) = den/(n·den + num)
            let new_den = <T as ExactInt>::from_u64(n) * den.clone() + num;
            num = den;
            den = new_den;
        }
        Fraction::new_unchecked(num, den)
    }
}

/// `numerator / 2^exponent` in `[0, 1]`, stored in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational<T> {
    numerator: T,
    exponent: usize,
}

impl<T: ExactInt> DyadicRational<T> {
    pub fn new(numerator: T, exponent: usize) -> Result<Self, QmError> {
        if numerator.is_negative() || numerator > T::pow2(exponent) {
            return Err(QmError::OutsideUnitInterval(format!(
                "{numerator}/2^{exponent}"
            )));
        }
        Ok(Self::normalized(numerator, exponent))
    }

    fn normalized(mut numerator: T, mut exponent: usize) -> Self {
        if numerator.is_zero() {
            return Self {
                numerator,
                exponent: 0,
            };
        }
        let two = T::one() + T::one();
        while exponent > 0 && numerator.is_even() {
            numerator = numerator / two.clone();
            exponent -= 1;
        }
        Self {
            numerator,
            exponent,
        }
    }

    pub fn zero() -> Self {
        Self {
            numerator: T::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Self {
            numerator: T::one(),
            exponent: 0,
        }
    }

    pub fn numerator(&self) -> &T {
        &self.numerator
    }

    pub fn exponent(&self) -> usize {
        self.exponent
    }

    /// `2^{-k}`.
    pub fn unit(k: usize) -> Self {
        Self {
            numerator: T::one(),
            exponent: k,
        }
    }

    fn scaled_to(&self, exponent: usize) -> T {
        debug_assert!(exponent >= self.exponent);
        self.numerator.clone() << (exponent - self.exponent)
    }

    /// Exact difference, `None` when negative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let e = self.exponent.max(other.exponent);
        let diff = self.scaled_to(e) - other.scaled_to(e);
        if diff.is_negative() {
            None
        } else {
            Some(Self::normalized(diff, e))
        }
    }

    /// Exact sum, `None` above 1.
    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        let e = self.exponent.max(other.exponent);
        let sum = self.scaled_to(e) + other.scaled_to(e);
        if sum > T::pow2(e) {
            None
        } else {
            Some(Self::normalized(sum, e))
        }
    }

    pub fn complement(&self) -> Self {
        Self::normalized(
            T::pow2(self.exponent) - self.numerator.clone(),
            self.exponent,
        )
    }

    pub fn to_fraction(&self) -> Fraction<T> {
        Fraction::new_unchecked(self.numerator.clone(), T::pow2(self.exponent))
    }

    pub fn to_f64(&self) -> f64 {
        crate::exact::ratio_to_f64(&self.numerator, &T::pow2(self.exponent))
    }

    /// Binary digits of the value, most significant first, padded to the
    /// stored exponent.
    pub fn digits(&self) -> Word {
        let mut bits = vec![false; self.exponent];
        let mut m = self.numerator.clone();
        let two = T::one() + T::one();
        for slot in bits.iter_mut().rev() {
            let (q, r) = m.div_rem(&two);
            *slot = !r.is_zero();
            m = q;
        }
        Word::from_bits(bits)
    }
}

impl<T: ExactInt> PartialOrd for DyadicRational<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: ExactInt> Ord for DyadicRational<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let e = self.exponent.max(other.exponent);
        self.scaled_to(e).cmp(&other.scaled_to(e))
    }
}

impl<T: ExactInt> fmt::Display for DyadicRational<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.exponent)
    }
}

impl<T: ExactInt> fmt::Debug for DyadicRational<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<T: ExactInt> FromStr for DyadicRational<T> {
    type Err = QmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || {
            QmError::Exact(ExactError::Parse {
                what: "dyadic rational",
                input: s.to_string(),
            })
        };
        let (m, k) = s.split_once("/2^").ok_or_else(err)?;
        let m: T = m.trim().parse().map_err(|_| err())?;
        let k: usize = k.trim().parse().map_err(|_| err())?;
        Self::new(m, k)
    }
}

impl<T: ExactInt> Serialize for DyadicRational<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de, T: ExactInt> Deserialize<'de> for DyadicRational<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Canonical continued fraction by the Euclidean algorithm.
pub fn cf_of_rational<T: ExactInt>(x: &Fraction<T>) -> ContinuedFraction {
    let (mut p, mut q) = (x.numer().clone(), x.denom().clone());
    let mut terms = Vec::new();
    while !p.is_zero() {
        let (n, r) = q.div_rem(&p);
        terms.push(n.to_u64().expect("continued fraction term fits in u64"));
        q = p;
        p = r;
    }
    ContinuedFraction { terms }
}

/// `Σ_j (−1)^{j+1} 2^{−N_j+1}` over any finite term list.
pub fn qm_of_terms<T: ExactInt>(cf: &ContinuedFraction) -> DyadicRational<T> {
    let sums: Vec<u64> = cf.partial_sums().collect();
    let Some(&top) = sums.last() else {
        return DyadicRational::zero();
    };
    let exponent = (top - 1) as usize;
    let mut acc = T::zero();
    for (j, &n) in sums.iter().enumerate() {
        let term = T::pow2(exponent - (n - 1) as usize);
        if j % 2 == 0 {
            acc = acc + term;
        } else {
            acc = acc - term;
        }
    }
    DyadicRational::normalized(acc, exponent)
}

/// Exact `?(x)` on a rational.
pub fn qm_rational<T: ExactInt>(x: &Fraction<T>) -> DyadicRational<T> {
    qm_of_terms(&cf_of_rational(x))
}

/// `?(x)` for a float, to within `eps` of `?` evaluated at the exact binary
/// value of `x`.
///
/// Every finite float is a dyadic rational, so the continued-fraction terms
/// are extracted with exact integer arithmetic; the alternating series is then
/// truncated once the next term is below `eps`.
pub fn qm_real<F: Real>(x: F, eps: F) -> Result<F, QmError> {
    if !x.is_finite() {
        return Err(QmError::NonFinite);
    }
    if eps.partial_cmp(&F::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(QmError::BadTolerance(format!("{eps}")));
    }
    if x < F::zero() || x > F::one() {
        return Err(QmError::OutsideUnitInterval(format!("{x}")));
    }
    if x.is_zero() {
        return Ok(F::zero());
    }
    let (mantissa, exp, _) = x.integer_decode();
    // x = mantissa · 2^exp with exp < 0 for x <= 1 (or exp >= 0 only when x = 1).
    let (mut p, mut q) = if exp >= 0 {
        (BigInt::from(mantissa) << exp as usize, BigInt::one())
    } else {
        (BigInt::from(mantissa), BigInt::one() << (-exp) as usize)
    };
    let g = p.gcd(&q);
    p /= &g;
    q /= &g;

    let half = F::lit(0.5);
    let mut total = crate::scalar::CompensatedSum::<F>::default();
    let mut partial: u64 = 0;
    let mut sign = F::one();
    while !p.is_zero() {
        let (n, r) = q.div_rem(&p);
        let n = n.to_u64().unwrap_or(u64::MAX);
        partial = partial.saturating_add(n);
        let term = pow_half::<F>(partial - 1, half);
        total.add(sign * term);
        sign = -sign;
        // Remaining terms alternate and shrink; the tail is below the next
        // one, which is at most 2^{-N_j}.
        if term * half < eps {
            break;
        }
        q = p;
        p = r;
    }
    Ok(total.value())
}

fn pow_half<F: Real>(k: u64, half: F) -> F {
    if k > 4000 {
        return F::zero();
    }
    half.powi(k as i32)
}

/// The unique rational with `?(x) = y`: `M_σ(0)` for the binary digits σ of
/// `y`.
pub fn qm_inverse_dyadic<T: ExactInt>(y: &DyadicRational<T>) -> Fraction<T> {
    if *y == DyadicRational::one() {
        return Fraction::one();
    }
    let map = y
        .digits()
        .bits()
        .iter()
        .fold(UnimodularMap::identity(), |m: UnimodularMap<T>, &b| {
            m.then_generator(b)
        });
    map.at_zero()
}

/// `μ([a, b]) = ?(b) − ?(a)`.
pub fn measure_interval<T: ExactInt>(
    a: &Fraction<T>,
    b: &Fraction<T>,
) -> Result<DyadicRational<T>, QmError> {
    if a > b {
        return Err(QmError::Reversed(a.to_string(), b.to_string()));
    }
    Ok(qm_rational(b)
        .checked_sub(&qm_rational(a))
        .expect("? is increasing"))
}

/// `P_0(y) = y/2`, `P_1(y) = (y+1)/2`.
pub fn dyadic_map<T: ExactInt>(bit: bool, y: &DyadicRational<T>) -> DyadicRational<T> {
    let num = if bit {
        y.numerator.clone() + T::pow2(y.exponent)
    } else {
        y.numerator.clone()
    };
    DyadicRational::normalized(num, y.exponent + 1)
}
