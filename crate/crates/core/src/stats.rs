//! Batch-means confidence intervals and Kolmogorov-Smirnov distances.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Half-width of the 95% confidence interval for the mean of `batch_means`,
/// treating the batch means as i.i.d. normal.
pub fn ci_halfwidth(batch_means: &[f64]) -> f64 {
    let n = batch_means.len();
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = batch_means.iter().sum::<f64>() / nf;
    let var = batch_means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("degrees of freedom > 0")
        .inverse_cdf(0.975);
    t * (var / nf).sqrt()
}

/// Split `samples` into `n_batches` contiguous batches (the last one takes the
/// remainder) and return the batch means.
pub fn batch_means(samples: &[f64], n_batches: usize) -> Vec<f64> {
    assert!(n_batches > 0 && samples.len() >= n_batches);
    let size = samples.len() / n_batches;
    (0..n_batches)
        .map(|b| {
            let end = if b + 1 == n_batches {
                samples.len()
            } else {
                (b + 1) * size
            };
            let chunk = &samples[b * size..end];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect()
}

/// Sup distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
