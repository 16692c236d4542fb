//! Exact invariant suite over the partition, the question mark function and
//! the sublemmas of the bound pipeline. Every check counts the cases it
//! examined and the violations it found.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exact::{farey_det, Fraction, UnimodularMap};
use crate::partition::{
    enumerate_level, interval_of_word, stern_brocot, successor_word, theta, word_of_index,
    IfsInterval, LevelVisitor, Node, Word,
};
use crate::question_mark::{dyadic_map, measure_interval, qm_rational, DyadicRational};
use crate::regularity::{a_complement, in_e, is_small, k1, k2_k3};

type Frac = Fraction<BigInt>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub checked: u64,
    pub failures: u64,
    /// First violation found, if any.
    pub example: Option<String>,
}

impl CheckOutcome {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            checked: 0,
            failures: 0,
            example: None,
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.example.is_none() {
                self.example = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<46} {:>10} checked {:>6} failed",
            self.name, self.checked, self.failures
        )?;
        if let Some(e) = &self.example {
            write!(f, "  first: {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

struct LevelChecker {
    n: usize,
    index: BigUint,
    prev_right: Option<Frac>,
    endpoints: Vec<Frac>,
    keep_endpoints: bool,
    measure: CheckOutcome,
    dyadic: CheckOutcome,
    det: CheckOutcome,
    order: CheckOutcome,
}

impl LevelVisitor<BigInt> for LevelChecker {
    fn visit(&mut self, node: &Node<'_, BigInt>) {
        let (l, r) = (node.left(), node.right());
        let word = node.word();
        self.measure.record(
            measure_interval(&l, &r).ok() == Some(DyadicRational::unit(self.n)),
            || format!("mu(I_{word}) at n={}", self.n),
        );
        let expect = DyadicRational::new(BigInt::from(self.index.clone()), self.n).ok();
        self.dyadic.record(Some(qm_rational(&l)) == expect, || {
            format!("?(x_{word}) != theta 2^-n at n={}", self.n)
        });
        self.det
            .record(farey_det(&l, &r).is_one(), || format!("det(I_{word})"));
        // Θ increases by one per visit; strictly increasing endpoints along
        // the walk give the order isomorphism for every pair.
        let step_ok = theta(&word) == self.index
            && self.prev_right.as_ref().map_or(l.is_zero(), |p| *p == l)
            && l < r;
        self.order.record(step_ok, || format!("order at {word}"));
        if self.keep_endpoints {
            self.endpoints.push(l);
        }
        self.prev_right = Some(r);
        self.index += 1u32;
    }
}

/// Every level `n ≤ max_level`: `μ(I_σ) = 2^{−n}`, `?(x_σ) = Θ(σ)2^{−n}`,
/// unit Farey determinants, Θ order equal to endpoint order, and the
/// endpoints equal to `B^n`.
pub fn partition_suite(max_level: usize) -> Vec<CheckOutcome> {
    let mut measure = CheckOutcome::new("interval measure 2^-n");
    let mut dyadic = CheckOutcome::new("?(x_sigma) = theta 2^-n");
    let mut det = CheckOutcome::new("unit Farey determinant");
    let mut order = CheckOutcome::new("theta order = endpoint order");
    let mut sb = CheckOutcome::new("endpoints = Stern-Brocot level");
    for n in 0..=max_level {
        let mut c = LevelChecker {
            n,
            index: BigUint::zero(),
            prev_right: None,
            endpoints: Vec::new(),
            keep_endpoints: n <= 20,
            measure,
            dyadic,
            det,
            order,
        };
        enumerate_level(n, &mut c);
        c.order
            .record(c.prev_right.as_ref().is_some_and(Fraction::is_one), || {
                format!("last endpoint at n={n}")
            });
        if c.keep_endpoints {
            c.endpoints.push(Frac::one());
            let level = stern_brocot::<BigInt>(n, n).expect("within explicit budget");
            sb.record(
                level.points == c.endpoints && level.is_well_formed(),
                || format!("B^{n} mismatch"),
            );
        }
        (measure, dyadic, det, order) = (c.measure, c.dyadic, c.det, c.order);
    }
    vec![measure, dyadic, det, order, sb]
}

/// Random words at levels `min_level..=max_level`: measure, dyadic value,
/// determinant and adjacency of `I_σ` with its successor.
pub fn sampled_partition_suite(
    min_level: usize,
    max_level: usize,
    samples_per_level: usize,
    seed: u64,
) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measure = CheckOutcome::new("sampled interval measure 2^-n");
    let mut dyadic = CheckOutcome::new("sampled ?(x_sigma) = theta 2^-n");
    let mut det = CheckOutcome::new("sampled unit Farey determinant");
    let mut order = CheckOutcome::new("sampled successor adjacency");
    for n in min_level..=max_level {
        for _ in 0..samples_per_level {
            let word = Word::from_bits((0..n).map(|_| rng.gen()).collect());
            let iv: IfsInterval<BigInt> = interval_of_word(&word);
            measure.record(
                measure_interval(&iv.left, &iv.right).ok() == Some(DyadicRational::unit(n)),
                || format!("mu(I_{word})"),
            );
            let expect = DyadicRational::new(BigInt::from(theta(&word)), n).ok();
            dyadic.record(Some(qm_rational(&iv.left)) == expect, || {
                format!("?(x_{word})")
            });
            det.record(farey_det(&iv.left, &iv.right).is_one(), || {
                format!("det(I_{word})")
            });
            let adjacent = match successor_word(&word) {
                Some(s) => {
                    let next: IfsInterval<BigInt> = interval_of_word(&s);
                    next.left == iv.right && theta(&s) == theta(&word) + 1u32
                }
                None => iv.right.is_one(),
            };
            order.record(adjacent && iv.left < iv.right, || {
                format!("successor of {word}")
            });
        }
    }
    vec![measure, dyadic, det, order]
}

/// `?(M_i(x)) = P_i(?(x))` on random rationals for both generators.
pub fn functional_equation(samples: usize, max_den: u64, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CheckOutcome::new("functional equation");
    for _ in 0..samples {
        let q: u64 = rng.gen_range(1..=max_den);
        let p: u64 = rng.gen_range(0..=q);
        let x = Frac::new(p.into(), q.into()).expect("p <= q");
        let qx = qm_rational(&x);
        for bit in [false, true] {
            let ok = UnimodularMap::<BigInt>::generator(bit)
                .apply(&x)
                .is_ok_and(|mx| qm_rational(&mx) == dyadic_map(bit, &qx));
            out.record(ok, || format!("M_{}({x})", u8::from(bit)));
        }
    }
    out
}

/// `λ(I_{0^k}) = λ(I_{1^k}) = 1/(k+1)` for `k ≤ max_k`, and the longest
/// interval at level `n ≤ max_level` has length `1/(n+1)`.
pub fn extremal_lengths(max_k: usize, max_level: usize) -> Vec<CheckOutcome> {
    let mut spine = CheckOutcome::new("lambda(I_0^k) = lambda(I_1^k) = 1/(k+1)");
    let mut zero = IfsInterval::<BigInt>::root();
    let mut one = IfsInterval::<BigInt>::root();
    for k in 0..=max_k {
        let expect = Frac::new(BigInt::one(), BigInt::from(k + 1)).expect("unit fraction");
        spine.record(zero.length() == expect && one.length() == expect, || {
            format!("k={k}")
        });
        zero = crate::partition::children(&zero).0;
        one = crate::partition::children(&one).1;
    }
    struct MaxLen(Frac);
    impl LevelVisitor<BigInt> for MaxLen {
        fn visit(&mut self, node: &Node<'_, BigInt>) {
            let len = Frac::new_unchecked(BigInt::one(), node.q_left() * node.q_right());
            if len > self.0 {
                self.0 = len;
            }
        }
    }
    let mut maxima = CheckOutcome::new("max length at level n = 1/(n+1)");
    for n in 0..=max_level {
        let mut v = MaxLen(Frac::zero());
        enumerate_level(n, &mut v);
        let expect = Frac::new(BigInt::one(), BigInt::from(n + 1)).expect("unit fraction");
        maxima.record(v.0 == expect, || format!("n={n}: {}", v.0));
    }
    vec![spine, maxima]
}

/// For every `j ∈ A^n(α)`, sampled points `x ∈ [x_j, x_{j+1}]` satisfy
/// `μ([x, x + α/n]) ≥ 2^{−n}`.
pub fn a_n_inclusion(max_level: usize, alphas: &[Ratio<BigInt>]) -> CheckOutcome {
    let mut out = CheckOutcome::new("A^n intervals inside Lambda^n");
    for alpha in alphas {
        for n in 1..=max_level {
            let complement: Vec<BigUint> = a_complement(n, alpha)
                .expect("positive alpha")
                .into_iter()
                .map(|e| e.index)
                .collect();
            let step = alpha / Ratio::from_integer(BigInt::from(n));
            let last = (BigUint::one() << n) - 1u32;
            let mut j = BigUint::zero();
            while j < last {
                if !complement.contains(&j) {
                    let iv: IfsInterval<BigInt> =
                        interval_of_word(&word_of_index(n, &j).expect("index in range"));
                    for x in [
                        iv.left.clone(),
                        iv.left.mediant(&iv.right),
                        iv.right.clone(),
                    ] {
                        let y = x.to_ratio() + step.clone();
                        let top = if y >= Ratio::one() {
                            Frac::one()
                        } else {
                            Frac::from_ratio(&y).expect("inside [0,1]")
                        };
                        let ok =
                            measure_interval(&x, &top).is_ok_and(|m| m >= DyadicRational::unit(n));
                        out.record(ok, || format!("n={n} j={j} x={x} alpha={alpha}"));
                    }
                }
                j += 1u32;
            }
        }
    }
    out
}

fn all_words(max_len: usize) -> impl Iterator<Item = Word> {
    (0..=max_len).flat_map(|n| {
        (0u64..(1u64 << n)).map(move |j| word_of_index(n, &BigUint::from(j)).expect("in range"))
    })
}

/// Calls `f(ext, I_{wη})` for every extension η with `1 ≤ |η| ≤ max_ext`.
fn for_extensions(w: &Word, max_ext: usize, mut f: impl FnMut(&Word, &IfsInterval<BigInt>)) {
    let base: IfsInterval<BigInt> = interval_of_word(w);
    let mut stack = vec![base];
    while let Some(iv) = stack.pop() {
        if iv.level() > w.len() {
            f(&iv.word, &iv);
        }
        if iv.level() < w.len() + max_ext {
            let (a, b) = crate::partition::children(&iv);
            stack.push(b);
            stack.push(a);
        }
    }
}

fn small_iv(iv: &IfsInterval<BigInt>, alpha: &Ratio<BigInt>) -> bool {
    let (q, qh) = (iv.left.denom(), iv.right.denom());
    alpha.denom() * BigInt::from(iv.level()) < alpha.numer() * q * qh
}

fn in_e_iv(iv: &IfsInterval<BigInt>, alpha: &Ratio<BigInt>) -> bool {
    let (q, qh) = (iv.left.denom(), iv.right.denom());
    alpha.numer() * q * q > *alpha.denom() && alpha.numer() * qh * qh > *alpha.denom()
}

/// The stability sublemmas and the constants `k1`, `k2`, `k3`, exhaustively
/// over `|σ| ≤ max_len`.
pub fn sublemma_suite(max_len: usize, max_ext: usize, alpha: &Ratio<BigInt>) -> Vec<CheckOutcome> {
    let tag = |s: &str| format!("{s} (alpha={alpha})");
    let mut e_stable = CheckOutcome::new(tag("E stable under extension"));
    let mut es_stable = CheckOutcome::new(tag("E and S stable under extension"));
    let mut k1_check = CheckOutcome::new(tag("k1 makes all extensions small"));
    let mut k2_check = CheckOutcome::new(tag("sigma 0^k 1 in E and S for k>=k2"));
    let mut k3_check = CheckOutcome::new(tag("sigma 1^k 0 in E and S for k>=k3"));
    for w in all_words(max_len) {
        let in_e_w = in_e(&w, alpha).expect("positive alpha");
        if in_e_w {
            let small_w = is_small(&w, alpha).expect("positive alpha");
            for_extensions(&w, max_ext, |v, iv| {
                let e = in_e_iv(iv, alpha);
                e_stable.record(e, || format!("{w} -> {v}"));
                if small_w {
                    es_stable.record(e && small_iv(iv, alpha), || format!("{w} -> {v}"));
                }
            });
            let k = k1(&w, alpha).expect("w in E") as usize;
            if k <= 8 {
                for len in k..=k.max(max_ext) {
                    // all extensions of exactly this length
                    let base: IfsInterval<BigInt> = interval_of_word(&w);
                    let mut stack = vec![base];
                    while let Some(iv) = stack.pop() {
                        if iv.level() == w.len() + len {
                            k1_check.record(small_iv(&iv, alpha), || {
                                format!("{w} k1={k} -> {}", iv.word)
                            });
                            continue;
                        }
                        let (a, b) = crate::partition::children(&iv);
                        stack.push(b);
                        stack.push(a);
                    }
                }
            }
        }
        let (k2, k3) = k2_k3(&w, alpha).expect("search within cap");
        for (kk, bit, check) in [(k2, false, &mut k2_check), (k3, true, &mut k3_check)] {
            for k in kk..=kk + 8 {
                let mut v = w.extended(bit, k as usize);
                v.push(!bit);
                let iv: IfsInterval<BigInt> = interval_of_word(&v);
                check.record(in_e_iv(&iv, alpha) && small_iv(&iv, alpha), || {
                    format!("{w} k={k}")
                });
            }
        }
    }
    vec![e_stable, es_stable, k1_check, k2_check, k3_check]
}

/// Partition suite up to `max_level`, a sampled suite up to level 20,
/// the functional equation, extremal lengths and the inclusion of the
/// `A^n` intervals in `Λ^n`.
pub fn run_all(max_level: usize) -> VerifyReport {
    let mut checks = partition_suite(max_level);
    if max_level < 20 {
        checks.extend(sampled_partition_suite(max_level + 1, 20, 64, 1));
    }
    checks.push(functional_equation(2000, 1 << 20, 2));
    checks.extend(extremal_lengths(1000, max_level.min(14)));
    let alphas: Vec<Ratio<BigInt>> = ["2", "1", "1/2", "1/5"]
        .iter()
        .map(|s| s.parse().expect("literal"))
        .collect();
    checks.push(a_n_inclusion(max_level.min(8), &alphas));
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let report = run_all(8);
        for c in &report.checks {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn sublemmas_small() {
        for alpha in ["1/2", "1/5"] {
            for c in sublemma_suite(5, 4, &alpha.parse().unwrap()) {
                assert!(c.passed(), "{c}");
            }
        }
    }

    #[test]
    fn outcome_records_first_failure() {
        let mut c = CheckOutcome::new("x");
        c.record(true, || unreachable!());
        c.record(false, || "a".into());
        c.record(false, || "b".into());
        assert_eq!(
            (c.checked, c.failures, c.example.as_deref()),
            (3, 2, Some("a"))
        );
        assert!(!c.passed());
        assert!(!CheckOutcome::new("empty").passed());
    }
}
