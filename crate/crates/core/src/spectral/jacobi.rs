//! Discrete approximations of μ and the three-term recurrence
//! `x p_k = b_{k+1} p_{k+1} + a_{k+1} p_k + b_k p_{k−1}` of their
//! orthonormal polynomials.
//!
//! Coefficients are computed by the Rutishauser–Kahan–Pal–Walker update,
//! which inserts one atom at a time into the Jacobi matrix with plane
//! rotations. Entry `k` only depends on entries above it, so keeping the
//! leading `N + 1` entries gives the exact leading coefficients with `O(N)`
//! memory and `O(N·M)` work for `M` atoms.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::partition::{level_budget_from_env, PartitionError};
use crate::scalar::Real;
use crate::spectral::gauss::GaussRule;
use crate::spectral::quadrature::Cell;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JacobiError {
    #[error("{requested} coefficients need more than {atoms} atoms")]
    TooFewAtoms { atoms: usize, requested: usize },
    #[error("b_{k} is not positive: resolution exhausted")]
    LostPositivity { k: usize },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// A positive discrete measure with strictly increasing support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureAtoms<F> {
    pub points: Vec<F>,
    pub weights: Vec<F>,
}

impl<F: Real> MeasureAtoms<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> F {
        self.weights.iter().copied().sum()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0] < w[1])
    }
}

fn level_cells(n: usize) -> Vec<Cell> {
    let mut out = Vec::with_capacity(1 << n);
    let mut stack = vec![Cell::ROOT];
    while let Some(c) = stack.pop() {
        if c.depth as usize == n {
            out.push(c);
            continue;
        }
        let (c0, c1) = c.children().expect("level cells fit in u64");
        stack.push(c1);
        stack.push(c0);
    }
    out
}

/// `2^n` atoms of mass `2^{−n}` at the midpoints of the level-`n` intervals.
pub fn discretize<F: Real>(n: usize) -> Result<MeasureAtoms<F>, JacobiError> {
    let budget = level_budget_from_env();
    if n > budget {
        return Err(PartitionError::OverBudget { level: n, budget }.into());
    }
    let w = F::lit(0.5).powi(n as i32);
    let points = level_cells(n)
        .iter()
        .map(|c| (c.left::<F>() + c.right::<F>()) * F::lit(0.5))
        .collect::<Vec<_>>();
    let weights = vec![w; points.len()];
    Ok(MeasureAtoms { points, weights })
}

/// Cells this deep (mass `2^{−200}`) are not split further.
const MAX_ADAPTIVE_DEPTH: u32 = 200;

/// Cells are split while `λ(I_σ) ≥ h`; each leaf carries the pushforward of
/// `rule` under `M_σ`, scaled by `2^{−|σ|}`.
pub fn discretize_adaptive<F: Real>(h: f64, rule: &GaussRule<F>) -> MeasureAtoms<F> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut stack = vec![Cell::ROOT];
    while let Some(c) = stack.pop() {
        if c.length::<f64>() < h || c.depth >= MAX_ADAPTIVE_DEPTH {
            let m = c.mass::<F>();
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                points.push(c.map(x));
                weights.push(m * w);
            }
            continue;
        }
        let (c0, c1) = c.children().expect("adaptive cells stay small");
        stack.push(c1);
        stack.push(c0);
    }
    MeasureAtoms { points, weights }
}

/// Gauss–Chebyshev atoms on `[0, 1]`, a discretisation of the arcsine
/// (equilibrium) measure.
pub fn arcsine_atoms<F: Real>(m: usize) -> MeasureAtoms<F> {
    let pi = F::lit(std::f64::consts::PI);
    let half = F::lit(0.5);
    let mut points: Vec<F> = (0..m)
        .map(|i| (F::one() + (pi * (F::lit(i as f64) + half) / F::lit(m as f64)).cos()) * half)
        .collect();
    points.reverse();
    MeasureAtoms {
        points,
        weights: vec![F::one() / F::lit(m as f64); m],
    }
}

/// `a_1..a_N`, `b_1..b_N` and `geo_mean_j = (b_1⋯b_j)^{1/j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceCoeffs<F> {
    pub a: Vec<F>,
    pub b: Vec<F>,
    pub geo_mean: Vec<F>,
}

impl<F: Real> RecurrenceCoeffs<F> {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    fn from_parts(a: Vec<F>, b: Vec<F>) -> Self {
        let mut acc = F::zero();
        let geo_mean = b
            .iter()
            .enumerate()
            .map(|(j, &bk)| {
                acc = acc + bk.ln();
                (acc / F::lit((j + 1) as f64)).exp()
            })
            .collect();
        Self { a, b, geo_mean }
    }

    /// The first `n` coefficients.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            a: self.a[..n].to_vec(),
            b: self.b[..n].to_vec(),
            geo_mean: self.geo_mean[..n].to_vec(),
        }
    }
}

/// Leading `m` diagonal entries and squared off-diagonals of the Jacobi
/// matrix; `beta[0]` is the total mass.
fn rkpw<F: Real>(atoms: &MeasureAtoms<F>, m: usize) -> (Vec<F>, Vec<F>) {
    let mut alpha = vec![F::zero(); m];
    let mut beta = vec![F::zero(); m];
    alpha[0] = atoms.points[0];
    beta[0] = atoms.weights[0];
    for n in 1..atoms.len() {
        let mut pn = atoms.weights[n];
        let xlam = atoms.points[n];
        let (mut gam, mut sig, mut t) = (F::one(), F::zero(), F::zero());
        for k in 0..(n + 1).min(m) {
            let rho = beta[k] + pn;
            let tmp = gam * rho;
            let tsig = sig;
            if rho <= F::zero() {
                gam = F::one();
                sig = F::zero();
            } else {
                gam = beta[k] / rho;
                sig = pn / rho;
            }
            let tk = sig * (alpha[k] - xlam) - gam * t;
            alpha[k] = alpha[k] - (tk - t);
            t = tk;
            pn = if sig <= F::zero() {
                tsig * beta[k]
            } else {
                t * t / sig
            };
            beta[k] = tmp;
        }
    }
    (alpha, beta)
}

/// First `n` recurrence coefficients of the orthonormal polynomials of
/// `atoms`.
pub fn recurrence_coeffs<F: Real>(
    atoms: &MeasureAtoms<F>,
    n: usize,
) -> Result<RecurrenceCoeffs<F>, JacobiError> {
    if n == 0 || atoms.len() <= n {
        return Err(JacobiError::TooFewAtoms {
            atoms: atoms.len(),
            requested: n,
        });
    }
    let (alpha, beta) = rkpw(atoms, n + 1);
    let mut b = Vec::with_capacity(n);
    for (k, &bk) in beta[1..=n].iter().enumerate() {
        if bk.partial_cmp(&F::zero()) != Some(std::cmp::Ordering::Greater) {
            return Err(JacobiError::LostPositivity { k: k + 1 });
        }
        b.push(bk.sqrt());
    }
    Ok(RecurrenceCoeffs::from_parts(alpha[..n].to_vec(), b))
}

/// Monic Stieltjes procedure in exact rational arithmetic: `(a_1..a_n,
/// b_1²..b_n²)`. Intended for small atom sets as a calibration oracle.
pub fn exact_recurrence(
    points: &[BigRational],
    weights: &[BigRational],
    n: usize,
) -> Result<(Vec<BigRational>, Vec<BigRational>), JacobiError> {
    if n == 0 || points.len() <= n {
        return Err(JacobiError::TooFewAtoms {
            atoms: points.len(),
            requested: n,
        });
    }
    let m = points.len();
    let mut prev = vec![BigRational::zero(); m];
    let mut cur = vec![BigRational::from_integer(1.into()); m];
    let mut norm_prev = BigRational::zero();
    let mut a = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut b_k = BigRational::zero();
    for k in 0..=n {
        let mut norm = BigRational::zero();
        let mut moment = BigRational::zero();
        for i in 0..m {
            let wp2 = &weights[i] * &cur[i] * &cur[i];
            moment += &wp2 * &points[i];
            norm += wp2;
        }
        if norm.is_zero() {
            return Err(JacobiError::LostPositivity { k });
        }
        if k > 0 {
            b_k = &norm / &norm_prev;
            beta.push(b_k.clone());
        }
        if k == n {
            break;
        }
        let a_k = moment / &norm;
        let next: Vec<BigRational> = (0..m)
            .map(|i| (&points[i] - &a_k) * &cur[i] - &b_k * &prev[i])
            .collect();
        a.push(a_k);
        prev = std::mem::replace(&mut cur, next);
        norm_prev = norm;
    }
    Ok((a, beta))
}

/// Number of leading coefficients on which two discretisations agree
/// within `tol`.
pub fn honest_count<F: Real>(
    coarse: &RecurrenceCoeffs<F>,
    refined: &RecurrenceCoeffs<F>,
    tol: F,
) -> usize {
    coarse
        .a
        .iter()
        .zip(&coarse.b)
        .zip(refined.a.iter().zip(&refined.b))
        .take_while(|((a1, b1), (a2, b2))| (**a1 - **a2).abs() <= tol && (**b1 - **b2).abs() <= tol)
        .count()
}

/// One row of the `j ↦ geo_mean_j` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticRow<F> {
    pub j: usize,
    pub a: F,
    pub b: F,
    pub geo_mean: F,
    /// `|geo_mean_j − 1/4|`.
    pub gap: F,
}

/// Logarithmic capacity of `[0, 1]`.
pub const CAPACITY: f64 = 0.25;

pub fn regularity_diagnostic<F: Real>(coeffs: &RecurrenceCoeffs<F>) -> Vec<DiagnosticRow<F>> {
    (0..coeffs.len())
        .map(|k| DiagnosticRow {
            j: k + 1,
            a: coeffs.a[k],
            b: coeffs.b[k],
            geo_mean: coeffs.geo_mean[k],
            gap: (coeffs.geo_mean[k] - F::lit(CAPACITY)).abs(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::level_intervals;
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;

    /// Lanczos with twice-repeated classical Gram–Schmidt, for cross-checks.
    fn lanczos(atoms: &MeasureAtoms<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
        let x = &atoms.points;
        let mut v: Vec<f64> = atoms.weights.iter().map(|w| w.sqrt()).collect();
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.iter_mut().for_each(|t| *t /= norm);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let mut u: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi * vi).collect();
            basis.push(v.clone());
            a.push(u.iter().zip(&v).map(|(s, t)| s * t).sum());
            for _ in 0..2 {
                for q in &basis {
                    let d: f64 = q.iter().zip(&u).map(|(s, t)| s * t).sum();
                    u.iter_mut().zip(q).for_each(|(s, t)| *s -= d * t);
                }
            }
            let bk = u.iter().map(|t| t * t).sum::<f64>().sqrt();
            b.push(bk);
            v = u.into_iter().map(|t| t / bk).collect();
        }
        (a, b)
    }

    #[test]
    fn discretize_examples() {
        let d = discretize::<f64>(1).unwrap();
        assert_eq!(d.points, vec![0.25, 0.75]);
        assert_eq!(d.weights, vec![0.5, 0.5]);
        let d = discretize::<f64>(2).unwrap();
        let mids: Vec<f64> = level_intervals::<BigInt>(2)
            .iter()
            .map(|iv| (iv.left.to_f64() + iv.right.to_f64()) / 2.0)
            .collect();
        assert_eq!(d.points, mids);
        for n in [0, 3, 10, 16] {
            let d = discretize::<f64>(n).unwrap();
            assert_eq!(d.total_mass(), 1.0);
            assert!(d.is_strictly_increasing());
        }
        assert!(matches!(
            discretize::<f64>(40),
            Err(JacobiError::Partition(_))
        ));
    }

    #[test]
    fn atoms_are_symmetric() {
        for n in 0..=16 {
            let d = discretize::<f64>(n).unwrap();
            let len = d.len();
            for i in 0..len {
                assert!((d.points[i] + d.points[len - 1 - i] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_point_measure() {
        let atoms = MeasureAtoms {
            points: vec![0.0f64, 1.0],
            weights: vec![0.5, 0.5],
        };
        let c = recurrence_coeffs(&atoms, 1).unwrap();
        assert!((c.a[0] - 0.5).abs() < 1e-16 && (c.b[0] - 0.5).abs() < 1e-16);
        assert_eq!(c.geo_mean[0], c.b[0]);
        assert!(matches!(
            recurrence_coeffs(&atoms, 2),
            Err(JacobiError::TooFewAtoms { .. })
        ));
    }

    #[test]
    fn symmetric_atoms_have_constant_diagonal() {
        let c = recurrence_coeffs(&discretize::<f64>(12).unwrap(), 40).unwrap();
        assert!(c.a.iter().all(|a| (a - 0.5).abs() < 1e-12));
    }

    #[test]
    fn matches_reorthogonalised_lanczos() {
        for n in [6, 12] {
            let atoms = discretize::<f64>(n).unwrap();
            let c = recurrence_coeffs(&atoms, 50).unwrap();
            let (a, b) = lanczos(&atoms, 50);
            for k in 0..50 {
                assert!((c.a[k] - a[k]).abs() < 1e-12, "a {n} {k}");
                assert!((c.b[k] - b[k]).abs() < 1e-12, "b {n} {k}");
            }
        }
    }

    #[test]
    fn matches_exact_rational_oracle() {
        let ivs = level_intervals::<BigInt>(6);
        let two = BigRational::from_integer(2.into());
        let pts: Vec<BigRational> = ivs
            .iter()
            .map(|iv| (iv.left.to_ratio() + iv.right.to_ratio()) / &two)
            .collect();
        let w = BigRational::new(1.into(), BigInt::from(64));
        let wts = vec![w; 64];
        let (a, beta) = exact_recurrence(&pts, &wts, 30).unwrap();
        let c = recurrence_coeffs(&discretize::<f64>(6).unwrap(), 30).unwrap();
        for k in 0..30 {
            assert!((a[k].to_f64().unwrap() - c.a[k]).abs() < 1e-12);
            assert!((beta[k].to_f64().unwrap().sqrt() - c.b[k]).abs() < 1e-12);
            assert_eq!(a[k], BigRational::new(1.into(), 2.into()));
        }
    }

    #[test]
    fn coefficient_sanity() {
        for n in [10, 14] {
            let c = recurrence_coeffs(&discretize::<f64>(n).unwrap(), 60).unwrap();
            assert!(c.b.iter().all(|&b| b > 0.0 && b <= 0.5));
            assert!(c.a.iter().all(|&a| a > 0.0 && a < 1.0));
        }
    }

    #[test]
    fn arcsine_control_is_chebyshev() {
        let c = recurrence_coeffs(&arcsine_atoms::<f64>(400), 100).unwrap();
        assert!((c.b[0] - 2f64.sqrt() / 4.0).abs() < 1e-12);
        assert!(c.b[1..].iter().all(|b| (b - 0.25).abs() < 1e-12));
        let rows = regularity_diagnostic(&c);
        assert_eq!(rows[0].geo_mean, c.b[0]);
        assert!(rows.windows(2).all(|w| w[1].gap < w[0].gap));
    }

    #[test]
    fn honest_count_detects_disagreement() {
        let c1 = recurrence_coeffs(&discretize::<f64>(8).unwrap(), 40).unwrap();
        let c2 = recurrence_coeffs(&discretize::<f64>(10).unwrap(), 40).unwrap();
        let h = honest_count(&c1, &c2, 1e-6);
        assert!(h < 40);
        assert_eq!(honest_count(&c1, &c1, 0.0), 40);
    }

    #[test]
    fn f32_path() {
        let c = recurrence_coeffs(&discretize::<f32>(8).unwrap(), 10).unwrap();
        assert!(c.a.iter().all(|a| (a - 0.5).abs() < 1e-5));
    }
}
