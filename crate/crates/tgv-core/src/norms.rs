//! The row-wise mixed norm, its proximal map, and the dual-ball projection.
//!
//! Rows are pixels: a row collects one pixel's coefficients across all
//! columns. The mixed norm sums the Euclidean lengths of those rows, the
//! proximal map shrinks each row toward zero, and the ball projection caps
//! each row's length. The two maps split any input additively, which is the
//! standard duality identity and is used by the tests as a cross-check.

use crate::error::{Result, TgvError};
use crate::grid::Coeffs;

/// Per-pixel Euclidean row lengths of a coefficient stack.
fn row_norms(a: &Coeffs) -> Vec<f64> {
    let n = a.n_pixels();
    let mut sq = vec![0.0; n];
    for j in 0..a.n_cols() {
        for (s, v) in sq.iter_mut().zip(a.col(j)) {
            *s += v * v;
        }
    }
    for s in sq.iter_mut() {
        *s = s.sqrt();
    }
    sq
}

fn scale_rows(a: &Coeffs, factors: &[f64]) -> Coeffs {
    let mut out = a.clone();
    for j in 0..out.n_cols() {
        for (v, f) in out.col_mut(j).iter_mut().zip(factors) {
            *v *= f;
        }
    }
    out
}

/// Sum over pixels of the Euclidean length of each coefficient row.
pub fn mixed_norm(a: &Coeffs) -> f64 {
    row_norms(a).iter().sum()
}

/// Proximal map of `lambda` times the mixed norm: every row keeps its
/// direction and loses `lambda` of its length, vanishing when it was shorter
/// than `lambda`. `lambda` must be finite and nonnegative.
pub fn prox_mixed_norm(a: &Coeffs, lambda: f64) -> Result<Coeffs> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(TgvError::InvalidArgument(format!(
            "shrinkage weight must be finite and nonnegative, got {lambda}"
        )));
    }
    let factors: Vec<f64> = row_norms(a)
        .iter()
        .map(|&n| if n > lambda { 1.0 - lambda / n } else { 0.0 })
        .collect();
    Ok(scale_rows(a, &factors))
}

/// Projects every row onto the Euclidean ball of radius `alpha`. `alpha`
/// must be finite and positive.
pub fn project_rows_l2_ball(a: &Coeffs, alpha: f64) -> Result<Coeffs> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(TgvError::InvalidArgument(format!(
            "ball radius must be finite and positive, got {alpha}"
        )));
    }
    let factors: Vec<f64> = row_norms(a)
        .iter()
        .map(|&n| if n > alpha { alpha / n } else { 1.0 })
        .collect();
    Ok(scale_rows(a, &factors))
}
