//! Hausdorff dimension of μ: `dim = 1/(2∫log₂(1+x) dμ)`.

use serde::Serialize;

use crate::spectral::gauss::mu_gauss_rule;
use crate::spectral::quadrature::{
    integrate_rounds, max_intervals_from_env, Cell, LeafRule, QuadError, QuadOptions,
    QuadratureResult,
};

/// Published enclosure of the dimension, as an ordered pair.
pub const KINNEY_BRACKET: (f64, f64) = (0.874716305108207, 0.874716305108213);

/// Order of the μ-Gauss rule used on each leaf.
pub const LEAF_RULE_ORDER: usize = 4;

/// Relative inflation of the computed oscillation, covering the rounding
/// of `ln_1p` and of the denominators.
const OSC_INFLATION: f64 = 1.0 + 1e-12;

pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// `log₂(1 + x_σ̂) − log₂(1 + x_σ) = log₂(1 + 1/((p + q) q̂))`, using the
/// unit determinant of the endpoints.
pub fn kinney_osc(cell: &Cell) -> f64 {
    let denom = (cell.p as f64 + cell.q as f64) * cell.qh as f64;
    log2_1p(1.0 / denom) * OSC_INFLATION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub integral: QuadratureResult<f64>,
}

impl DimensionEstimate {
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        lo <= self.value && self.value <= hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinneyOptions {
    pub rule: LeafRule<f64>,
    pub max_intervals: u64,
}

impl Default for KinneyOptions {
    fn default() -> Self {
        Self {
            rule: mu_gauss_rule(LEAF_RULE_ORDER).leaf_rule(),
            max_intervals: max_intervals_from_env(),
        }
    }
}

/// `|1/(2v) − 1/(2v̂)| ≤ e/(2v̂(v̂ − e))` for `|v − v̂| ≤ e < v̂`.
fn propagate(integral: &QuadratureResult<f64>) -> DimensionEstimate {
    let v = integral.value;
    // rounding of the compensated leaf sums
    let e = integral.error_bound + 8.0 * f64::EPSILON * v;
    let error_bound = if e < v {
        e / (2.0 * v * (v - e))
    } else {
        f64::INFINITY
    };
    DimensionEstimate {
        value: 1.0 / (2.0 * v),
        error_bound,
        integral: *integral,
    }
}

/// Dimension with a certified bound at most `eps`.
pub fn kinney_dimension(eps: f64, opts: &KinneyOptions) -> Result<DimensionEstimate, QuadError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(QuadError::BadTolerance);
    }
    let quad = QuadOptions {
        rule: opts.rule.clone(),
        max_intervals: opts.max_intervals,
    };
    // 2v(v − e) ≈ 0.65 for v ≈ 0.5716
    let mut target = 0.6 * eps;
    loop {
        let integral = integrate_rounds(log2_1p, kinney_osc, target, &quad)?;
        let est = propagate(&integral);
        if est.error_bound <= eps {
            return Ok(est);
        }
        target *= 0.5;
    }
}
