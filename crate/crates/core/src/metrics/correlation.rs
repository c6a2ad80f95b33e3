//! Rank correlation between similarity matrices.

use thiserror::Error;

use crate::semantic::SimilarityMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("matrices have different sizes ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("need at least two off-diagonal entries")]
    TooSmall,
    #[error("one of the inputs is constant; correlation undefined")]
    Constant,
    #[error("input contains NaN")]
    NotANumber,
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::DimensionMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooSmall);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ over the strictly upper triangles of two matrices.
pub fn spearman_rho(a: &SimilarityMatrix, b: &SimilarityMatrix) -> Result<f64, CorrelationError> {
    if a.len() != b.len() {
        return Err(CorrelationError::DimensionMismatch(a.len(), b.len()));
    }
    let (x, y) = (a.upper_triangle(), b.upper_triangle());
    if x.iter().chain(&y).any(|v| v.is_nan()) {
        return Err(CorrelationError::NotANumber);
    }
    pearson(&average_ranks(&x), &average_ranks(&y))
}
