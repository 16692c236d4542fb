//! Large and small intervals of the partition, the seed set `Q_α`, the
//! sublemma constants `k1`, `k2`, `k3`, the three-level bound pipeline for
//! `#L^n(α)`, and the lower bound for the Lebesgue measure of `Λ^n(α)`.
//!
//! Throughout `α = r/s` is an exact positive rational. With `q`, `q̂` the
//! endpoint denominators of `I_σ` and `n = |σ|`:
//!
//! * large: `λ(I_σ) ≥ α/n`, i.e. `s·n ≥ r·q·q̂` (boundary cases are large);
//! * small: the complement, `s·n < r·q·q̂`;
//! * `σ ∈ E`: `r·q² > s` and `r·q̂² > s`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exact::Fraction;
use crate::partition::{
    interval_of_word, par_enumerate_level, predecessor_word, successor_word, theta, IfsInterval,
    LevelVisitor, Node, Word,
};
use crate::scalar::ExactInt;

/// Upper limit for the `k2`/`k3` searches.
pub const K_SEARCH_CAP: u64 = 1_000_000;

/// Depth at which censuses split into parallel subtrees.
const CENSUS_SPLIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegularityError {
    #[error("alpha must be a positive rational, got {0}")]
    NonPositiveAlpha(String),
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("word {0} is not in E for this alpha")]
    NotInE(String),
    #[error("search for k exceeded the cap {cap}")]
    SearchCap { cap: u64 },
}

fn alpha_parts<T: ExactInt>(alpha: &Ratio<T>) -> Result<(T, T), RegularityError> {
    if !alpha.numer().is_positive() || !alpha.denom().is_positive() {
        return Err(RegularityError::NonPositiveAlpha(alpha.to_string()));
    }
    Ok((alpha.numer().clone(), alpha.denom().clone()))
}

fn from_usize<T: ExactInt>(n: usize) -> T {
    <T as ExactInt>::from_u64(n as u64)
}

/// Endpoint denominators `(q, q̂)` of `I_σ`.
fn denominators<T: ExactInt>(iv: &IfsInterval<T>) -> (T, T) {
    (iv.left.denom().clone(), iv.right.denom().clone())
}

fn small_by_denominators<T: ExactInt>(q: &T, qh: &T, n: usize, r: &T, s: &T) -> bool {
    s.clone() * from_usize::<T>(n) < r.clone() * q.clone() * qh.clone()
}

fn in_e_by_denominators<T: ExactInt>(q: &T, qh: &T, r: &T, s: &T) -> bool {
    r.clone() * q.clone() * q.clone() > *s && r.clone() * qh.clone() * qh.clone() > *s
}

/// `λ(I_w) < α/|w|`.
pub fn is_small<T: ExactInt>(w: &Word, alpha: &Ratio<T>) -> Result<bool, RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    let (q, qh) = denominators(&interval_of_word::<T>(w));
    Ok(small_by_denominators(&q, &qh, w.len(), &r, &s))
}

/// Both endpoint denominators exceed `1/√α`.
pub fn in_e<T: ExactInt>(w: &Word, alpha: &Ratio<T>) -> Result<bool, RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    let (q, qh) = denominators(&interval_of_word::<T>(w));
    Ok(in_e_by_denominators(&q, &qh, &r, &s))
}

/// A large interval found by [`large_census`].
#[derive(Clone, PartialEq, Eq, Serialize)]
#[serde(bound = "T: ExactInt")]
pub struct CensusMember<T: ExactInt> {
    pub word: Word,
    pub left: Fraction<T>,
    pub right: Fraction<T>,
    pub length: Fraction<T>,
}

impl<T: ExactInt> std::fmt::Debug for CensusMember<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}:[{}, {}]", self.word, self.left, self.right)
    }
}

impl<T: ExactInt> CensusMember<T> {
    fn from_node(node: &Node<'_, T>) -> Self {
        let left = node.left();
        let right = node.right();
        let length =
            Fraction::new_unchecked(T::one(), left.denom().clone() * right.denom().clone());
        Self {
            word: node.word(),
            left,
            right,
            length,
        }
    }

    pub fn theta(&self) -> BigUint {
        theta(&self.word)
    }
}

/// `L^n(α)`, in Θ order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(bound = "T: ExactInt")]
pub struct CensusRecord<T: ExactInt> {
    pub n: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub alpha: Ratio<T>,
    pub members: Vec<CensusMember<T>>,
    pub count: usize,
}

pub(crate) fn ser_ratio<T: ExactInt, S: serde::Serializer>(
    r: &Ratio<T>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_str(r)
}

struct CensusVisitor<T: ExactInt> {
    n: usize,
    r: T,
    s: T,
    members: Vec<CensusMember<T>>,
}

impl<T: ExactInt> CensusVisitor<T> {
    fn is_large(&self, node: &Node<'_, T>) -> bool {
        !small_by_denominators(node.q_left(), &node.q_right(), self.n, &self.r, &self.s)
    }
}

impl<T: ExactInt> LevelVisitor<T> for CensusVisitor<T> {
    // Descendants are strictly shorter, so a small ancestor has no large
    // descendant at level n.
    fn descend(&mut self, node: &Node<'_, T>) -> bool {
        self.is_large(node)
    }

    fn visit(&mut self, node: &Node<'_, T>) {
        if self.is_large(node) {
            self.members.push(CensusMember::from_node(node));
        }
    }
}

/// All σ ∈ Σ^n with `λ(I_σ) ≥ α/n`, by pruned depth-first search.
pub fn large_census<T: ExactInt>(
    n: usize,
    alpha: &Ratio<T>,
) -> Result<CensusRecord<T>, RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    if n == 0 {
        return Err(RegularityError::ZeroLevel);
    }
    let make = || CensusVisitor {
        n,
        r: r.clone(),
        s: s.clone(),
        members: Vec::new(),
    };
    let members: Vec<_> = par_enumerate_level(n, CENSUS_SPLIT, make)
        .into_iter()
        .flat_map(|v| v.members)
        .collect();
    Ok(CensusRecord {
        n,
        alpha: alpha.clone(),
        count: members.len(),
        members,
    })
}

/// Irreducible fractions in `[0, 1]` with a bounded denominator, sorted,
/// with their Stern–Brocot depths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(bound = "T: ExactInt")]
pub struct QAlphaSet<T: ExactInt> {
    #[serde(serialize_with = "ser_ratio")]
    pub alpha: Ratio<T>,
    pub members: Vec<Fraction<T>>,
    pub depths: Vec<usize>,
}

impl<T: ExactInt> QAlphaSet<T> {
    pub fn max_depth(&self) -> Option<usize> {
        self.depths.iter().copied().max()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn farey_up_to<T: ExactInt>(keep: impl Fn(&T) -> bool) -> Vec<Fraction<T>> {
    let mut out = Vec::new();
    let mut q = T::one();
    while keep(&q) {
        let mut p = T::zero();
        while p <= q {
            if p.gcd(&q).is_one() {
                out.push(Fraction::new_unchecked(p.clone(), q.clone()));
            }
            p = p + T::one();
        }
        q = q + T::one();
    }
    out.sort();
    out
}

fn with_depths<T: ExactInt>(alpha: &Ratio<T>, members: Vec<Fraction<T>>) -> QAlphaSet<T> {
    let depths = members.iter().map(sb_depth).collect();
    QAlphaSet {
        alpha: alpha.clone(),
        members,
        depths,
    }
}

/// `Q_α = {p/q ∈ [0,1] : q² < 1/α}`.
pub fn q_alpha<T: ExactInt>(alpha: &Ratio<T>) -> Result<QAlphaSet<T>, RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    let members = farey_up_to(|q: &T| r.clone() * q.clone() * q.clone() < s);
    Ok(with_depths(alpha, members))
}

/// Seeds of the pipeline: every endpoint denominator outside `E`, i.e.
/// `q² ≤ 1/α`. Agrees with [`q_alpha`] unless `1/α` is a perfect square.
/// Empty for `α ≥ 1`.
pub fn pipeline_seeds<T: ExactInt>(alpha: &Ratio<T>) -> Result<QAlphaSet<T>, RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    if r >= s {
        return Ok(with_depths(alpha, Vec::new()));
    }
    let members = farey_up_to(|q: &T| r.clone() * q.clone() * q.clone() <= s);
    Ok(with_depths(alpha, members))
}

/// Position of a rational in the Stern–Brocot tree: depth `d` and, for
/// `d ≥ 1`, the word τ of length `d − 1` with `z = x_{τ1}`, the mediant of
/// the endpoints of `I_τ`.
pub fn sb_locate<T: ExactInt>(z: &Fraction<T>) -> (usize, Word) {
    let mut path = Word::empty();
    if z.is_zero() || z.is_one() {
        return (0, path);
    }
    let mut lo = Fraction::<T>::zero();
    let mut hi = Fraction::<T>::one();
    loop {
        let m = lo.mediant(&hi);
        match z.cmp(&m) {
            std::cmp::Ordering::Equal => return (path.len() + 1, path),
            std::cmp::Ordering::Less => {
                path.push(false);
                hi = m;
            }
            std::cmp::Ordering::Greater => {
                path.push(true);
                lo = m;
            }
        }
    }
}

/// Least `n` with `z ∈ B^n`.
pub fn sb_depth<T: ExactInt>(z: &Fraction<T>) -> usize {
    sb_locate(z).0
}

/// Least `k ≥ 0` such that every `wη` with `|η| = k` is small at level
/// `|w| + k`. Uses `q_min = min(q, q̂)`: `k` is the least integer with
/// `r(q q̂ + k q_min²) > s(n + k)`.
pub fn k1<T: ExactInt>(w: &Word, alpha: &Ratio<T>) -> Result<u64, RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    let (q, qh) = denominators(&interval_of_word::<T>(w));
    if !in_e_by_denominators(&q, &qh, &r, &s) {
        return Err(RegularityError::NotInE(w.to_string()));
    }
    let qmin = q.clone().min(qh.clone());
    let num = s.clone() * from_usize::<T>(w.len()) - r.clone() * q * qh;
    if num.is_negative() {
        return Ok(0);
    }
    let den = r * qmin.clone() * qmin - s;
    let k = num.div_floor(&den) + T::one();
    Ok(k.to_u64().expect("k1 fits in u64"))
}

/// `k_min` with `w b^k b̄ ∈ E ∩ S^{n+k+1}` for every `k ≥ k_min`, where the
/// denominators of `I_{w b^k b̄}` are `far + k·near` and `far + (k+1)·near`.
fn descent_constant<T: ExactInt>(
    near: &T,
    far: &T,
    n: usize,
    r: &T,
    s: &T,
) -> Result<u64, RegularityError> {
    let cond = |k: u64| {
        let kk = <T as ExactInt>::from_u64(k);
        let a = far.clone() + kk.clone() * near.clone();
        let b = a.clone() + near.clone();
        in_e_by_denominators(&a, &b, r, s)
            && s.clone() * from_usize::<T>(n + k as usize + 1) < r.clone() * a * b
    };
    // The small-test margin r·A·B − s(n+k+1) grows by 2r·near·B(k) − s per
    // step, so the condition is monotone from the first k where that is ≥ 0.
    let two_r_near = <T as ExactInt>::from_u64(2) * r.clone() * near.clone();
    let mut start = 0u64;
    while two_r_near.clone() * (far.clone() + <T as ExactInt>::from_u64(start + 1) * near.clone())
        < *s
    {
        start += 1;
        if start > K_SEARCH_CAP {
            return Err(RegularityError::SearchCap { cap: K_SEARCH_CAP });
        }
    }
    let mut k = start;
    while !cond(k) {
        k += 1;
        if k > K_SEARCH_CAP {
            return Err(RegularityError::SearchCap { cap: K_SEARCH_CAP });
        }
    }
    while k > 0 && cond(k - 1) {
        k -= 1;
    }
    Ok(k)
}

/// `(k2, k3)`: least constants with `w 0^k 1 ∈ E ∩ S` for all `k ≥ k2`
/// and `w 1^k 0 ∈ E ∩ S` for all `k ≥ k3`, at level `|w| + k + 1`.
pub fn k2_k3<T: ExactInt>(w: &Word, alpha: &Ratio<T>) -> Result<(u64, u64), RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    let (q, qh) = denominators(&interval_of_word::<T>(w));
    let k2 = descent_constant(&q, &qh, w.len(), &r, &s)?;
    let k3 = descent_constant(&qh, &q, w.len(), &r, &s)?;
    Ok((k2, k3))
}

/// The constructive quantities bounding `#L^n(α)` for `n ≥ n3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(bound = "T: ExactInt")]
pub struct PipelineReport<T: ExactInt> {
    #[serde(serialize_with = "ser_ratio")]
    pub alpha: Ratio<T>,
    pub seeds: QAlphaSet<T>,
    pub n1: usize,
    pub f_left: Vec<Word>,
    pub f_right: Vec<Word>,
    pub k2_max: u64,
    pub k3_max: u64,
    pub kappa: usize,
    pub n2: usize,
    pub e_large: Vec<CensusMember<T>>,
    pub k1_max: u64,
    pub n3: usize,
    pub l_bound: usize,
}

impl<T: ExactInt> PipelineReport<T> {
    /// The only words that may be large at level `n ≥ n3`:
    /// `σ0^{n−n1}` for σ ∈ F_l and `σ1^{n−n1}` for σ ∈ F_r, in Θ order.
    pub fn predicted_words(&self, n: usize) -> Vec<Word> {
        assert!(n >= self.n1);
        let mut out: Vec<Word> = self
            .f_left
            .iter()
            .map(|w| w.extended(false, n - self.n1))
            .chain(self.f_right.iter().map(|w| w.extended(true, n - self.n1)))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

fn f_sets<T: ExactInt>(seeds: &QAlphaSet<T>, n1: usize) -> (Vec<Word>, Vec<Word>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for z in &seeds.members {
        if z.is_zero() {
            left.push(Word::repeated(false, n1));
        } else if z.is_one() {
            right.push(Word::repeated(true, n1));
        } else {
            let (d, tau) = sb_locate(z);
            let mut l = tau.clone();
            l.push(true);
            left.push(l.extended(false, n1 - d));
            let mut r = tau;
            r.push(false);
            right.push(r.extended(true, n1 - d));
        }
    }
    left.sort();
    right.sort();
    (left, right)
}

/// Three-level construction: `n1` puts every seed into `B^{n1}`; `n2 = n1 + κ`
/// pushes the descendants of F-words off the seeds; `n3 = n2 + K1` makes every
/// remaining large word of `E` small.
pub fn prop1_pipeline<T: ExactInt>(alpha: &Ratio<T>) -> Result<PipelineReport<T>, RegularityError> {
    let seeds = pipeline_seeds(alpha)?;
    let n1 = seeds.max_depth().map_or(1, |d| d + 1);
    let (f_left, f_right) = f_sets(&seeds, n1);
    let mut k2_max = 0;
    for w in &f_left {
        k2_max = k2_max.max(k2_k3(w, alpha)?.0);
    }
    let mut k3_max = 0;
    for w in &f_right {
        k3_max = k3_max.max(k2_k3(w, alpha)?.1);
    }
    let kappa = k2_max.max(k3_max) as usize + 1;
    let n2 = n1 + kappa;
    let census = large_census(n2, alpha)?;
    let mut e_large = Vec::new();
    let mut k1_max = 0;
    for m in census.members {
        if in_e(&m.word, alpha)? {
            k1_max = k1_max.max(k1(&m.word, alpha)?);
            e_large.push(m);
        }
    }
    let n3 = n2 + k1_max as usize;
    Ok(PipelineReport {
        alpha: alpha.clone(),
        l_bound: f_left.len() + f_right.len(),
        seeds,
        n1,
        f_left,
        f_right,
        k2_max,
        k3_max,
        kappa,
        n2,
        e_large,
        k1_max,
        n3,
    })
}

/// For each F-word, whether its constant extension to level `n` is large.
/// Purely empirical; nothing requires these to be large.
pub fn descendant_probe<T: ExactInt>(
    report: &PipelineReport<T>,
    n: usize,
) -> Result<Vec<(Word, bool)>, RegularityError> {
    report
        .predicted_words(n)
        .into_iter()
        .map(|w| {
            let small = is_small(&w, &report.alpha)?;
            Ok((w, !small))
        })
        .collect()
}

/// An index of `Ā^n(α)` and the length of its interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplementEntry<T: ExactInt> {
    pub index: BigUint,
    pub length: Fraction<T>,
}

/// `Ā^n(α) = {j ≤ 2^n − 2 : x_{j+2} − x_j > α/n} ∪ {2^n − 1}`.
///
/// If `λ_j + λ_{j+1} > α/n` then one of the two lengths exceeds `α/(2n)`, so
/// `j` or `j + 1` lies in `L^n(α/2)`. Only those members and their left
/// neighbours are tested.
pub fn a_complement<T: ExactInt>(
    n: usize,
    alpha: &Ratio<T>,
) -> Result<Vec<ComplementEntry<T>>, RegularityError> {
    Ok(a_complement_with_census(n, alpha)?.0)
}

fn a_complement_with_census<T: ExactInt>(
    n: usize,
    alpha: &Ratio<T>,
) -> Result<(Vec<ComplementEntry<T>>, usize), RegularityError> {
    let (r, s) = alpha_parts(alpha)?;
    let half = alpha / Ratio::from_integer(<T as ExactInt>::from_u64(2));
    let census = large_census(n, &half)?;
    let mut candidates: BTreeMap<BigUint, Word> = BTreeMap::new();
    for m in &census.members {
        if let Some(p) = predecessor_word(&m.word) {
            candidates.insert(theta(&p), p);
        }
        candidates.insert(m.theta(), m.word.clone());
    }
    let last = Word::repeated(true, n);
    let mut out = Vec::new();
    for (index, word) in candidates {
        let Some(next) = successor_word(&word) else {
            continue;
        };
        let (q0, q1) = denominators(&interval_of_word::<T>(&word));
        let q2 = interval_of_word::<T>(&next).right.denom().clone();
        let a = q0 * q1.clone();
        let b = q1 * q2;
        // 1/a + 1/b > r/(s n)
        if s.clone() * from_usize::<T>(n) * (a.clone() + b.clone()) > r.clone() * a.clone() * b {
            out.push(ComplementEntry {
                index,
                length: Fraction::new_unchecked(T::one(), a),
            });
        }
    }
    out.push(ComplementEntry {
        index: theta(&last),
        length: Fraction::new_unchecked(T::one(), from_usize(n + 1)),
    });
    Ok((out, census.count))
}

/// Exact lower bound for the Lebesgue measure of `Λ^n(α)` with the
/// quantities that bound it from below.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaStarReport<T: ExactInt> {
    pub n: usize,
    pub alpha: Ratio<T>,
    pub complement: Vec<ComplementEntry<T>>,
    /// `#L^n(α/2)`.
    pub half_census_count: usize,
    /// `1 − Σ_{j ∈ Ā} λ_j`.
    pub lower: Fraction<T>,
    /// `(2·#L^n(α/2) + 1)/(n + 1)`.
    pub ceiling: Ratio<T>,
}

impl<T: ExactInt> LambdaStarReport<T> {
    /// `1 − ceiling`, the bound the exact lower value must dominate.
    pub fn chain_bound(&self) -> Ratio<T> {
        Ratio::one() - self.ceiling.clone()
    }

    pub fn chain_holds(&self) -> bool {
        self.lower.to_ratio() >= self.chain_bound()
    }
}

/// See [`LambdaStarReport`].
pub fn lambda_star<T: ExactInt>(
    n: usize,
    alpha: &Ratio<T>,
) -> Result<LambdaStarReport<T>, RegularityError> {
    let (complement, half_count) = a_complement_with_census(n, alpha)?;
    let removed = complement
        .iter()
        .fold(Ratio::<T>::zero(), |acc, e| acc + e.length.to_ratio());
    let lower = Fraction::from_ratio(&(Ratio::one() - removed))
        .expect("disjoint intervals of [0,1] have total length at most 1");
    let ceiling = Ratio::new(from_usize(2 * half_count + 1), from_usize(n + 1));
    Ok(LambdaStarReport {
        n,
        alpha: alpha.clone(),
        complement,
        half_census_count: half_count,
        lower,
        ceiling,
    })
}

/// `1 − Σ_{j ∈ Ā^n(α)} (x_{j+1} − x_j)`.
pub fn lambda_star_lower<T: ExactInt>(
    n: usize,
    alpha: &Ratio<T>,
) -> Result<Fraction<T>, RegularityError> {
    Ok(lambda_star(n, alpha)?.lower)
}
