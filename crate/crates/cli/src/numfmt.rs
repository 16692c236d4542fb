//! Decimal rendering at 17 significant digits and parsing of exact inputs.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

const DIGITS: usize = 17;

/// `digits` holds exactly [`DIGITS`] decimal digits `d0 d1 ...`, read as
/// `d0.d1... × 10^exp`.
fn layout(negative: bool, digits: &str, exp: i64) -> String {
    let sign = if negative { "-" } else { "" };
    if (-5..DIGITS as i64).contains(&exp) {
        let body = if exp >= 0 {
            let (int, frac) = digits.split_at(exp as usize + 1);
            let frac = frac.trim_end_matches('0');
            if frac.is_empty() {
                int.to_string()
            } else {
                format!("{int}.{frac}")
            }
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            format!("0.{zeros}{}", digits.trim_end_matches('0'))
        };
        format!("{sign}{body}")
    } else {
        let (lead, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        let dot = if rest.is_empty() { "" } else { "." };
        format!("{sign}{lead}{dot}{rest}e{exp}")
    }
}

pub fn float(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // `{:e}` rounds correctly from the exact binary value
    let s = format!("{:.*e}", DIGITS - 1, v.abs());
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    layout(v < 0.0, &digits, exp.parse().expect("integer exponent"))
}

/// Correctly rounded (half to even) rendering of an exact rational.
pub fn ratio(r: &BigRational) -> String {
    if r.is_zero() {
        return "0".into();
    }
    let a = r.abs();
    let ten = BigInt::from(10);
    let mut exp = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    let scale = |e: i64| -> BigRational {
        let shift = DIGITS as i64 - 1 - e;
        let p =
            BigRational::from_integer(num_traits::pow(ten.clone(), shift.unsigned_abs() as usize));
        if shift >= 0 {
            &a * p
        } else {
            &a / p
        }
    };
    let lo = BigRational::from_integer(num_traits::pow(ten.clone(), DIGITS - 1));
    let hi = &lo * BigRational::from_integer(ten.clone());
    let mut scaled = scale(exp);
    while scaled >= hi {
        exp += 1;
        scaled = scale(exp);
    }
    while scaled < lo {
        exp -= 1;
        scaled = scale(exp);
    }
    let (q, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem * 2u32;
    let mut q = match twice.cmp(scaled.denom()) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1u32,
        std::cmp::Ordering::Equal if q.is_even() => q,
        std::cmp::Ordering::Equal => q + 1u32,
    };
    if q == *hi.numer() {
        q = lo.numer().clone();
        exp += 1;
    }
    layout(r.is_negative(), &q.to_string(), exp)
}

/// `"P/Q"`, an integer, or a finite decimal such as `0.05` or `2.5e-2`,
/// read exactly.
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    let bad = || format!("cannot read {s:?} as a rational (expected P/Q or a decimal)");
    if s.contains('/') {
        return s.parse::<BigRational>().map_err(|_| bad());
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let well_formed = !(int.is_empty() && frac.is_empty())
        && int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit());
    if !well_formed || exp.unsigned_abs() > 10_000 {
        return Err(bad());
    }
    let numer: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let shift = exp - frac.len() as i64;
    let p = num_traits::pow(BigInt::from(10), shift.unsigned_abs() as usize);
    let mut r = if shift >= 0 {
        BigRational::from_integer(numer * p)
    } else {
        BigRational::new(numer, p)
    };
    if negative {
        r = -r;
    }
    Ok(r)
}

/// Exponent `k` with `d = 2^k`, if any.
pub fn log2_exact(d: &BigInt) -> Option<usize> {
    if !d.is_positive() {
        return None;
    }
    let k = d.bits() as usize - 1;
    (*d == BigInt::one() << k).then_some(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn float_rendering() {
        assert_eq!(float(0.5), "0.5");
        assert_eq!(float(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(float(-2.0), "-2");
        assert_eq!(float(1e-9), "1.0000000000000001e-9");
        assert_eq!(float(1e20), "1e20");
        assert_eq!(float(0.0), "0");
    }

    #[test]
    fn ratio_rendering_is_correctly_rounded() {
        assert_eq!(ratio(&q("1/3")), "0.33333333333333333");
        assert_eq!(ratio(&q("2/3")), "0.66666666666666667");
        assert_eq!(ratio(&q("1/2")), "0.5");
        assert_eq!(ratio(&q("-7/1")), "-7");
        assert_eq!(ratio(&q("1/100000")), "0.00001");
        assert_eq!(ratio(&q("1/1000000")), "1e-6");
        // 99999999999999999.5 rounds to even, carrying into a new digit
        assert_eq!(ratio(&q("199999999999999999/2")), "1e17");
        assert_eq!(ratio(&q("0")), "0");
    }

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(q("0.05"), q("1/20"));
        assert_eq!(q("2.5e-2"), q("1/40"));
        assert_eq!(q("3"), q("3/1"));
        assert_eq!(q("-.5"), q("-1/2"));
        assert_eq!(q("1E1"), q("10/1"));
        for bad in ["", ".", "1/0", "abc", "1.2.3", "1e"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(log2_exact(&BigInt::from(1)), Some(0));
        assert_eq!(log2_exact(&BigInt::from(1024)), Some(10));
        assert_eq!(log2_exact(&BigInt::from(12)), None);
        assert_eq!(log2_exact(&BigInt::from(0)), None);
    }
}
