//! Small descriptive statistics shared by the metrics and the harness.

/// Median-unbiased sample quantile (Hyndman & Fan type 8) of `values`.
/// Returns NaN for an empty slice.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut x: Vec<f64> = values.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&x, p)
}

/// [`quantile`] over data already sorted ascending.
pub fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let n = x.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n as f64 + 1.0 / 3.0) * p + 1.0 / 3.0;
    if h <= 1.0 {
        return x[0];
    }
    if h >= n as f64 {
        return x[n - 1];
    }
    let lo = h.floor();
    let i = lo as usize - 1;
    x[i] + (h - lo) * (x[i + 1] - x[i])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
