//! Small summary-statistic helpers shared by the estimators.

/// Sample mean and its standard error `sd / √n`, summed in input order.
pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    // Shifted by the first value, so a constant sample has zero spread exactly.
    let k = values[0];
    let s1: f64 = values.iter().map(|v| v - k).sum();
    let s2: f64 = values.iter().map(|v| (v - k) * (v - k)).sum();
    let var = ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
