//! Certified adaptive integration against μ over the IFS intervals.
//!
//! A leaf `I_σ` contributes `2^{−|σ|}·R(f, I_σ)` where `R` is a convex
//! combination of values of `f` inside `I_σ`, so its error is at most
//! `2^{−|σ|}·osc(I_σ)`. The reported bound is the sum of those terms.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{CompensatedSum, Real};

/// Default cap on the number of leaves, overridable with
/// `QMARK_MAX_INTERVALS`.
pub const DEFAULT_MAX_INTERVALS: u64 = 1 << 33;

/// Depth beyond which a cell is not split.
pub const MAX_DEPTH: u32 = 1000;

const FRONTIER_DEPTH: u32 = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("tolerance must be positive and finite")]
    BadTolerance,
    #[error("tolerance not reached within {intervals} intervals (bound {error_bound:e})")]
    BudgetExhausted { intervals: u64, error_bound: f64 },
    #[error("cell denominators overflow at depth {depth}")]
    Overflow { depth: u32 },
}

/// `I_σ = [p/q, p̂/q̂]` with machine-word endpoints and `depth = |σ|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub p: u64,
    pub q: u64,
    pub ph: u64,
    pub qh: u64,
    pub depth: u32,
}

impl Cell {
    pub const ROOT: Cell = Cell {
        p: 0,
        q: 1,
        ph: 1,
        qh: 1,
        depth: 0,
    };

    /// `(I_{σ0}, I_{σ1})`; `None` if the mediant overflows.
    pub fn children(&self) -> Option<(Cell, Cell)> {
        let mp = self.p.checked_add(self.ph)?;
        let mq = self.q.checked_add(self.qh)?;
        let depth = self.depth + 1;
        Some((
            Cell {
                ph: mp,
                qh: mq,
                depth,
                ..*self
            },
            Cell {
                p: mp,
                q: mq,
                depth,
                ..*self
            },
        ))
    }

    /// `μ(I_σ) = 2^{−depth}`.
    pub fn mass<F: Real>(&self) -> F {
        F::lit(0.5).powi(self.depth as i32)
    }

    pub fn left<F: Real>(&self) -> F {
        F::lit(self.p as f64) / F::lit(self.q as f64)
    }

    pub fn right<F: Real>(&self) -> F {
        F::lit(self.ph as f64) / F::lit(self.qh as f64)
    }

    /// `1/(q q̂)`.
    pub fn length<F: Real>(&self) -> F {
        F::one() / (F::lit(self.q as f64) * F::lit(self.qh as f64))
    }

    /// `M_σ(x) = ((p̂ − p)x + p)/((q̂ − q)x + q)`.
    pub fn map<F: Real>(&self, x: F) -> F {
        let (p, q) = (F::lit(self.p as f64), F::lit(self.q as f64));
        let (ph, qh) = (F::lit(self.ph as f64), F::lit(self.qh as f64));
        ((ph - p) * x + p) / ((qh - q) * x + q)
    }

    /// Order of left endpoints, which is the Θ order within a level.
    pub fn cmp_position(&self, other: &Cell) -> Ordering {
        (self.p as u128 * other.q as u128)
            .cmp(&(other.p as u128 * self.q as u128))
            .then(self.depth.cmp(&other.depth))
    }
}

/// Representative value of `f` on a cell.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafRule<F> {
    Midpoint,
    LeftEndpoint,
    /// `Σ w_i f(M_σ(x_i))` for a positive rule `(x_i, w_i)` on `[0, 1]`
    /// with `Σ w_i = 1`.
    Pushforward {
        nodes: Vec<F>,
        weights: Vec<F>,
    },
}

impl<F: Real> LeafRule<F> {
    pub fn eval<G: Fn(F) -> F>(&self, f: &G, cell: &Cell) -> F {
        match self {
            LeafRule::Midpoint => f((cell.left::<F>() + cell.right::<F>()) * F::lit(0.5)),
            LeafRule::LeftEndpoint => f(cell.left()),
            LeafRule::Pushforward { nodes, weights } => nodes
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w * f(cell.map(x)))
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult<F> {
    pub value: F,
    pub error_bound: F,
    pub intervals_used: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadOptions<F> {
    pub rule: LeafRule<F>,
    pub max_intervals: u64,
}

impl<F: Real> Default for QuadOptions<F> {
    fn default() -> Self {
        Self {
            rule: LeafRule::Midpoint,
            max_intervals: max_intervals_from_env(),
        }
    }
}

/// `QMARK_MAX_INTERVALS` if set and valid, else [`DEFAULT_MAX_INTERVALS`].
pub fn max_intervals_from_env() -> u64 {
    std::env::var("QMARK_MAX_INTERVALS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_INTERVALS)
}

fn check_eps<F: Real>(eps: F) -> Result<(), QuadError> {
    if eps > F::zero() && eps.is_finite() {
        Ok(())
    } else {
        Err(QuadError::BadTolerance)
    }
}

struct Entry<F> {
    weight: F,
    cell: Cell,
}

impl<F: Real> PartialEq for Entry<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<F: Real> Eq for Entry<F> {}
impl<F: Real> PartialOrd for Entry<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Real> Ord for Entry<F> {
    // Largest bound first; among equals the leftmost cell.
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .partial_cmp(&other.weight)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.cell.cmp_position(&self.cell))
    }
}

/// Refines the cell with the largest `mass·osc` until the summed bound is
/// below `eps`.
pub fn integrate<F, G, O>(
    f: G,
    osc: O,
    eps: F,
    opts: &QuadOptions<F>,
) -> Result<QuadratureResult<F>, QuadError>
where
    F: Real,
    G: Fn(F) -> F,
    O: Fn(&Cell) -> F,
{
    check_eps(eps)?;
    let entry = |cell: Cell| Entry {
        weight: cell.mass::<F>() * osc(&cell),
        cell,
    };
    let mut heap = BinaryHeap::new();
    let root = entry(Cell::ROOT);
    let mut total = root.weight;
    heap.push(root);
    loop {
        if total < eps {
            // the running total drifts; confirm before stopping
            let mut exact = CompensatedSum::default();
            heap.iter().for_each(|e| exact.add(e.weight));
            total = exact.value();
            if total < eps {
                break;
            }
        }
        if heap.len() as u64 >= opts.max_intervals {
            return Err(QuadError::BudgetExhausted {
                intervals: heap.len() as u64,
                error_bound: total.to_f64().unwrap_or(f64::NAN),
            });
        }
        let top = heap.pop().expect("heap is never empty");
        if top.cell.depth >= MAX_DEPTH {
            return Err(QuadError::Overflow {
                depth: top.cell.depth,
            });
        }
        let (c0, c1) = top.cell.children().ok_or(QuadError::Overflow {
            depth: top.cell.depth,
        })?;
        let (e0, e1) = (entry(c0), entry(c1));
        total = total - top.weight + e0.weight + e1.weight;
        heap.push(e0);
        heap.push(e1);
    }
    let mut leaves: Vec<Cell> = heap.into_iter().map(|e| e.cell).collect();
    leaves.sort_by(Cell::cmp_position);
    let mut value = CompensatedSum::default();
    let mut bound = CompensatedSum::default();
    for cell in &leaves {
        let m = cell.mass::<F>();
        value.add(m * opts.rule.eval(&f, cell));
        bound.add(m * osc(cell));
    }
    Ok(QuadratureResult {
        value: value.value(),
        error_bound: bound.value(),
        intervals_used: leaves.len() as u64,
    })
}

#[derive(Clone, Copy)]
struct SweepSums<F> {
    value: CompensatedSum<F>,
    bound: CompensatedSum<F>,
    leaves: u64,
}

impl<F: Real> SweepSums<F> {
    fn new() -> Self {
        Self {
            value: CompensatedSum::default(),
            bound: CompensatedSum::default(),
            leaves: 0,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.value.merge(&other.value);
        self.bound.merge(&other.bound);
        self.leaves += other.leaves;
    }
}

/// Depth-first sweep: a cell is a leaf once `mass·osc < tau`.
#[allow(clippy::too_many_arguments)]
fn sweep_from<F, G, O>(
    start: Cell,
    stop_depth: Option<u32>,
    tau: F,
    f: &G,
    osc: &O,
    rule: Option<&LeafRule<F>>,
    budget: u64,
    frontier: &mut Vec<Cell>,
) -> Result<SweepSums<F>, QuadError>
where
    F: Real,
    G: Fn(F) -> F,
    O: Fn(&Cell) -> F,
{
    let mut sums = SweepSums::new();
    let mut stack = vec![start];
    while let Some(cell) = stack.pop() {
        let m = cell.mass::<F>();
        let w = m * osc(&cell);
        if w < tau {
            sums.bound.add(w);
            if let Some(rule) = rule {
                sums.value.add(m * rule.eval(f, &cell));
            }
            sums.leaves += 1;
            if sums.leaves > budget {
                return Err(QuadError::BudgetExhausted {
                    intervals: sums.leaves,
                    error_bound: f64::NAN,
                });
            }
            continue;
        }
        if stop_depth == Some(cell.depth) {
            frontier.push(cell);
            continue;
        }
        if cell.depth >= MAX_DEPTH {
            return Err(QuadError::Overflow { depth: cell.depth });
        }
        let (c0, c1) = cell
            .children()
            .ok_or(QuadError::Overflow { depth: cell.depth })?;
        stack.push(c1);
        stack.push(c0);
    }
    Ok(sums)
}

fn threshold_sweep<F, G, O>(
    tau: F,
    f: &G,
    osc: &O,
    rule: Option<&LeafRule<F>>,
    budget: u64,
) -> Result<SweepSums<F>, QuadError>
where
    F: Real,
    G: Fn(F) -> F + Sync,
    O: Fn(&Cell) -> F + Sync,
{
    let mut frontier = Vec::new();
    let mut sums = sweep_from(
        Cell::ROOT,
        Some(FRONTIER_DEPTH),
        tau,
        f,
        osc,
        rule,
        budget,
        &mut frontier,
    )?;
    // Frontier cells are in left-to-right order and partial sums are merged
    // in that order, so the result does not depend on the thread count.
    let parts: Vec<Result<SweepSums<F>, QuadError>> = frontier
        .par_iter()
        .map(|&cell| sweep_from(cell, None, tau, f, osc, rule, budget, &mut Vec::new()))
        .collect();
    for part in parts {
        sums.merge(&part?);
        if sums.leaves > budget {
            return Err(QuadError::BudgetExhausted {
                intervals: sums.leaves,
                error_bound: sums.bound.value().to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(sums)
}

/// Bulk-synchronous variant of [`integrate`] for tight tolerances: each
/// round sweeps the tree with a fixed leaf threshold `τ` using `O(depth)`
/// memory and lowers `τ` until the summed bound is below `eps`. The value
/// is accumulated only in the final sweep.
pub fn integrate_rounds<F, G, O>(
    f: G,
    osc: O,
    eps: F,
    opts: &QuadOptions<F>,
) -> Result<QuadratureResult<F>, QuadError>
where
    F: Real,
    G: Fn(F) -> F + Sync,
    O: Fn(&Cell) -> F + Sync,
{
    check_eps(eps)?;
    let mut tau = eps;
    loop {
        let probe = threshold_sweep(tau, &f, &osc, None, opts.max_intervals)?;
        let bound = probe.bound.value();
        if bound < eps {
            let fin = threshold_sweep(tau, &f, &osc, Some(&opts.rule), opts.max_intervals)?;
            return Ok(QuadratureResult {
                value: fin.value.value(),
                error_bound: fin.bound.value(),
                intervals_used: fin.leaves,
            });
        }
        let ratio = eps / bound;
        let factor = (ratio * ratio * F::lit(0.5))
            .max(F::lit(1e-6))
            .min(F::lit(0.25));
        tau = tau * factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::level_intervals;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn lipschitz(c: f64) -> impl Fn(&Cell) -> f64 {
        move |cell: &Cell| c * cell.length::<f64>()
    }

    fn midpoint_opts() -> QuadOptions<f64> {
        QuadOptions {
            rule: LeafRule::Midpoint,
            max_intervals: 1 << 22,
        }
    }

    /// `Σ_σ 2^{−20} g(x_σ, x_σ̂)` over level 20.
    fn level_sum(g: impl Fn(f64, f64) -> f64) -> f64 {
        let mut s = CompensatedSum::default();
        let mut stack = vec![Cell::ROOT];
        while let Some(c) = stack.pop() {
            if c.depth == 20 {
                s.add(c.mass::<f64>() * g(c.left(), c.right()));
                continue;
            }
            let (a, b) = c.children().unwrap();
            stack.push(a);
            stack.push(b);
        }
        s.value()
    }

    #[test]
    fn constant_integrand() {
        for integrate_fn in [integrate::<f64, _, _>, integrate_rounds::<f64, _, _>] {
            let r = integrate_fn(|_| 1.0, |_: &Cell| 0.0, 1e-12, &midpoint_opts()).unwrap();
            assert_eq!(r.value, 1.0);
            assert_eq!(r.error_bound, 0.0);
        }
    }

    #[test]
    fn identity_integrand_has_mean_one_half() {
        let eps = 1e-6;
        let r = integrate(|x| x, lipschitz(1.0), eps, &midpoint_opts()).unwrap();
        assert!(r.error_bound < eps);
        assert!((r.value - 0.5).abs() <= r.error_bound);
        // the level-20 oracle brackets the same mean
        let lo = level_sum(|l, _| l);
        let hi = level_sum(|_, r| r);
        assert!(lo <= 0.5 && 0.5 <= hi && hi - lo < 1e-4);
        let rr = integrate_rounds(|x| x, lipschitz(1.0), eps, &midpoint_opts()).unwrap();
        assert!((rr.value - 0.5).abs() <= rr.error_bound && rr.error_bound < eps);
    }

    #[test]
    fn bound_is_sound_against_level_sums() {
        // for increasing f the level-20 left and right sums bracket the
        // integral, so the certified interval must meet the bracket
        type Case = (fn(f64) -> f64, f64);
        let cases: Vec<Case> = vec![
            (|x| x * x, 2.0),
            (|x| (1.0 + x).ln(), 1.0),
            (|x| x.sqrt() + x, 1e6),
        ];
        for (f, lip) in cases {
            let lo = level_sum(|l, _| f(l));
            let hi = level_sum(|_, r| f(r));
            for rule in [LeafRule::Midpoint, LeafRule::LeftEndpoint] {
                let opts = QuadOptions {
                    rule,
                    max_intervals: 1 << 22,
                };
                let osc = |c: &Cell| (f(c.right()) - f(c.left())).min(lip * c.length::<f64>());
                let r = integrate(f, osc, 1e-5, &opts).unwrap();
                assert!(r.value - r.error_bound <= hi && lo <= r.value + r.error_bound);
            }
        }
    }

    #[test]
    fn rules_agree_within_summed_bounds() {
        let f = |x: f64| (1.0 + x).log2();
        let osc = |c: &Cell| f(c.right()) - f(c.left());
        let mid = integrate(f, osc, 1e-6, &midpoint_opts()).unwrap();
        let left = integrate(
            f,
            osc,
            1e-6,
            &QuadOptions {
                rule: LeafRule::LeftEndpoint,
                max_intervals: 1 << 22,
            },
        )
        .unwrap();
        assert!((mid.value - left.value).abs() <= mid.error_bound + left.error_bound);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions {
            rule: LeafRule::Midpoint,
            max_intervals: 100,
        };
        assert!(matches!(
            integrate(|x| x, lipschitz(1.0), 1e-9, &opts),
            Err(QuadError::BudgetExhausted { .. })
        ));
        assert!(matches!(
            integrate_rounds(|x| x, lipschitz(1.0), 1e-9, &opts),
            Err(QuadError::BudgetExhausted { .. })
        ));
        assert!(matches!(
            integrate(|x| x, lipschitz(1.0), -1.0, &opts),
            Err(QuadError::BadTolerance)
        ));
    }

    #[test]
    fn cells_match_exact_intervals() {
        let mut cells = vec![];
        let mut stack = vec![Cell::ROOT];
        while let Some(c) = stack.pop() {
            if c.depth == 8 {
                cells.push(c);
                continue;
            }
            let (a, b) = c.children().unwrap();
            stack.push(b);
            stack.push(a);
        }
        let exact = level_intervals::<BigInt>(8);
        for (c, iv) in cells.iter().zip(&exact) {
            assert_eq!(c.p.to_string(), iv.left.numer().to_string());
            assert_eq!(c.qh.to_string(), iv.right.denom().to_string());
            assert_eq!(c.map(0.0), iv.left.to_f64());
            assert_eq!(c.map(1.0), iv.right.to_f64());
        }
        assert!(cells
            .windows(2)
            .all(|w| w[0].cmp_position(&w[1]) == Ordering::Less));
    }

    #[test]
    fn f32_path() {
        let r = integrate(
            |x: f32| x,
            |c: &Cell| c.length::<f32>(),
            1e-3f32,
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - 0.5).abs() <= r.error_bound + 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bound_non_increasing_as_eps_shrinks(e1 in 1e-5f64..1e-2, shrink in 1.0f64..50.0) {
            let f = |x: f64| (3.0 * x).sin();
            let e2 = e1 / shrink;
            let r1 = integrate(f, lipschitz(3.0), e1, &midpoint_opts()).unwrap();
            let r2 = integrate(f, lipschitz(3.0), e2, &midpoint_opts()).unwrap();
            prop_assert!(r2.error_bound <= r1.error_bound + 1e-18);
            prop_assert!((r1.value - r2.value).abs() <= r1.error_bound + r2.error_bound);
        }
    }
}
