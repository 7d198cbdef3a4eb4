//! Small statistics helpers shared by the Monte Carlo layers.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// `NaN` when fewer than two samples are available.
    pub stderr: f64,
    pub count: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Plain mean and `sd / sqrt(n)`.
pub fn summarize(xs: &[f64]) -> Summary {
    let count = xs.len();
    let stderr = (sample_variance(xs) / count as f64).sqrt();
    Summary { mean: mean(xs), stderr, count }
}

/// Batch-means estimate with `floor(sqrt(n))` contiguous batches. The
/// batches follow replica order, so the result is reproducible.
pub fn batch_means(xs: &[f64]) -> Summary {
    batch_means_with(xs, (xs.len() as f64).sqrt().floor() as usize)
}

/// Batch means over `b` contiguous batches, the last one absorbing the
/// remainder.
pub fn batch_means_with(xs: &[f64], b: usize) -> Summary {
    let n = xs.len();
    let b = b.min(n);
    if b < 2 {
        return Summary { mean: mean(xs), stderr: f64::NAN, count: n };
    }
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|j| {
            let end = if j + 1 == b { n } else { (j + 1) * size };
            mean(&xs[j * size..end])
        })
        .collect();
    // unequal last batch: weight by length for the mean
    let m = mean(xs);
    let var = means
        .iter()
        .enumerate()
        .map(|(j, &bm)| {
            let len = if j + 1 == b { n - j * size } else { size } as f64;
            len * (bm - m) * (bm - m)
        })
        .sum::<f64>()
        / (b - 1) as f64;
    Summary { mean: m, stderr: (var / n as f64).sqrt(), count: n }
}

/// Delete-one jackknife for a statistic of the sample.
pub fn jackknife<F: Fn(&[f64]) -> f64>(xs: &[f64], stat: F) -> Summary {
    let n = xs.len();
    let full = stat(xs);
    if n < 2 {
        return Summary { mean: full, stderr: f64::NAN, count: n };
    }
    let mut buf = Vec::with_capacity(n - 1);
    let leave: Vec<f64> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&xs[..i]);
            buf.extend_from_slice(&xs[i + 1..]);
            stat(&buf)
        })
        .collect();
    let lm = mean(&leave);
    let var = leave.iter().map(|v| (v - lm) * (v - lm)).sum::<f64>() * (n - 1) as f64 / n as f64;
    Summary { mean: full, stderr: var.sqrt(), count: n }
}

/// Sample variance with its delete-one jackknife standard error, in O(n).
pub fn jackknife_variance(xs: &[f64]) -> Summary {
    let n = xs.len();
    let s2 = sample_variance(xs);
    if n < 3 {
        return Summary { mean: s2, stderr: f64::NAN, count: n };
    }
    let m = mean(xs);
    let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let q: f64 = c.iter().map(|v| v * v).sum();
    let nf = n as f64;
    // leaving out c_i: the centered sum becomes -c_i
    let leave: Vec<f64> = c.iter().map(|&ci| (q - ci * ci - ci * ci / (nf - 1.0)) / (nf - 2.0)).collect();
    let lm = mean(&leave);
    let var = leave.iter().map(|v| (v - lm) * (v - lm)).sum::<f64>() * (nf - 1.0) / nf;
    Summary { mean: s2, stderr: var.sqrt(), count: n }
}

/// Sample variance with a delta-method standard error
/// `sqrt((m4 - s^4) / n)`, which only needs the fourth central moment.
pub fn variance_summary(xs: &[f64]) -> Summary {
    let n = xs.len();
    let s2 = sample_variance(xs);
    if n < 4 {
        return Summary { mean: s2, stderr: f64::NAN, count: n };
    }
    let m = mean(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    Summary { mean: s2, stderr: ((m4 - s2 * s2).max(0.0) / n as f64).sqrt(), count: n }
}

/// Least-squares line through `(x, y)`: returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summaries() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let s = summarize(&xs);
        assert_eq!(s.mean, 2.5);
        assert!((s.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(summarize(&[1.0]).stderr.is_nan());
    }

    #[test]
    fn jackknife_of_mean_is_plain_stderr() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let a = jackknife(&xs, mean);
        let b = summarize(&xs);
        assert!((a.stderr - b.stderr).abs() < 1e-12);
    }

    #[test]
    fn fast_jackknife_variance() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 7919) % 23) as f64 * 0.37).collect();
        let a = jackknife_variance(&xs);
        let b = jackknife(&xs, sample_variance);
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.stderr - b.stderr).abs() < 1e-10);
    }

    #[test]
    fn batch_means_of_iid_is_close() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i as u64 * 2654435761) % 1000) as f64).collect();
        let a = batch_means(&xs);
        assert_eq!(a.mean, mean(&xs));
        assert!(a.stderr > 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| -1.5 * v + 0.25).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s + 1.5).abs() < 1e-14 && (c - 0.25).abs() < 1e-14);
    }
}
