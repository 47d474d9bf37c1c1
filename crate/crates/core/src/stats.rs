//! Small summary statistics for Monte Carlo aggregation.

use rand::Rng;

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// One-sided percentile-bootstrap lower confidence bound on the mean.
pub fn bootstrap_mean_lower_bound<R: Rng + ?Sized>(
    values: &[f64],
    confidence: f64,
    resamples: usize,
    rng: &mut R,
) -> f64 {
    let n = values.len();
    if n == 0 || resamples == 0 {
        return f64::NAN;
    }
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let rank = ((1.0 - confidence) * resamples as f64).floor() as usize;
    means[rank.min(resamples - 1)]
}
