//! Small order-statistics helpers for campaign summaries.

/// Linear-interpolation quantile (the same convention as numpy's default).
/// `q` is clamped to `[0, 1]`; the input need not be sorted.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Freedman-Diaconis bin count, capped at 30 bins and floored at 1.
pub fn freedman_diaconis_bins(values: &[f64]) -> usize {
    if values.len() < 2 {
        return 1;
    }
    let iqr = quantile(values, 0.75) - quantile(values, 0.25);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !(range > 0.0) || !(iqr > 0.0) {
        return 1;
    }
    let width = 2.0 * iqr / (values.len() as f64).cbrt();
    ((range / width).ceil() as usize).clamp(1, 30)
}
