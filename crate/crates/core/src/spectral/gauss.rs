//! Gauss rules from recurrence coefficients, and a Gauss rule for μ itself.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::scalar::Real;
use crate::spectral::jacobi::{recurrence_coeffs, MeasureAtoms, RecurrenceCoeffs};
use crate::spectral::quadrature::{Cell, LeafRule};

/// Positive nodes and weights on `[0, 1]`, weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule<F> {
    pub nodes: Vec<F>,
    pub weights: Vec<F>,
}

impl GaussRule<f64> {
    pub fn cast<F: Real>(&self) -> GaussRule<F> {
        GaussRule {
            nodes: self.nodes.iter().map(|&x| F::lit(x)).collect(),
            weights: self.weights.iter().map(|&w| F::lit(w)).collect(),
        }
    }
}

impl<F: Real> GaussRule<F> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_rule(&self) -> LeafRule<F> {
        LeafRule::Pushforward {
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// Golub–Welsch: eigenvalues of the `k × k` Jacobi matrix built from
/// `a_1..a_k` and `b_1..b_{k−1}` are the nodes; the squared first components
/// of the eigenvectors are the weights of a probability measure.
pub fn gauss_rule(coeffs: &RecurrenceCoeffs<f64>, k: usize) -> GaussRule<f64> {
    assert!(k >= 1 && k <= coeffs.len(), "rule order out of range");
    let j = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            coeffs.a[r]
        } else if r + 1 == c {
            coeffs.b[r]
        } else if c + 1 == r {
            coeffs.b[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    GaussRule {
        nodes: pairs.iter().map(|p| p.0.clamp(0.0, 1.0)).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

const BOOTSTRAP_LEVEL: usize = 13;
const BOOTSTRAP_ORDER: usize = 16;
const BOOTSTRAP_ROUNDS: usize = 3;

/// Pushforward of `rule` onto every level-`level` interval, weighted by
/// `2^{−level}`.
fn pushforward_atoms(level: usize, rule: &GaussRule<f64>) -> MeasureAtoms<f64> {
    let m = 0.5f64.powi(level as i32);
    let mut points = Vec::with_capacity(rule.len() << level);
    let mut weights = Vec::with_capacity(rule.len() << level);
    let mut stack = vec![Cell::ROOT];
    while let Some(c) = stack.pop() {
        if c.depth as usize == level {
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                points.push(c.map(x));
                weights.push(m * w);
            }
            continue;
        }
        let (c0, c1) = c.children().expect("bootstrap level is shallow");
        stack.push(c1);
        stack.push(c0);
    }
    MeasureAtoms { points, weights }
}

/// Coefficients of μ obtained by self-similar bootstrapping: a rule for μ
/// pushed forward onto the level-13 intervals discretises μ, whose Gauss
/// rule seeds the next round.
pub fn mu_coefficients() -> RecurrenceCoeffs<f64> {
    let mut rule = GaussRule {
        nodes: vec![0.5],
        weights: vec![1.0],
    };
    let mut coeffs = None;
    for _ in 0..BOOTSTRAP_ROUNDS {
        let atoms = pushforward_atoms(BOOTSTRAP_LEVEL, &rule);
        let c = recurrence_coeffs(&atoms, BOOTSTRAP_ORDER).expect("enough atoms");
        rule = gauss_rule(&c, BOOTSTRAP_ORDER);
        coeffs = Some(c);
    }
    coeffs.expect("at least one round")
}

/// `k`-point Gauss rule for μ, `1 ≤ k ≤ 16`.
pub fn mu_gauss_rule(k: usize) -> GaussRule<f64> {
    gauss_rule(&mu_coefficients(), k)
}
