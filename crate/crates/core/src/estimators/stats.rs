//! Sample summaries and Kolmogorov-Smirnov tests.

use statrs::distribution::{ContinuousCDF, Normal};

/// Sample mean and its standard error (`sd / sqrt(m)`, `sd` with `m - 1`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, f64::NAN);
    }
    (mean, (sample_variance(xs) / m as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 2 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64
}

/// `sup |F_m - F|` for a continuous reference CDF.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// `sup |F_a - F_b|` for two samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x: Vec<f64> = a.to_vec();
    let mut y: Vec<f64> = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// p-value of a KS statistic with effective sample size `m`, using the
/// small-sample correction `lambda = (sqrt(m) + 0.12 + 0.11/sqrt(m)) d`.
pub fn ks_p_value(d: f64, m: f64) -> f64 {
    let s = m.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

pub fn ks_p_value_two_sample(d: f64, n: usize, m: usize) -> f64 {
    ks_p_value(d, (n * m) as f64 / (n + m) as f64)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).map(|n| n.cdf(x)).unwrap_or(f64::NAN)
}

pub fn exponential_cdf(x: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-rate * x).exp_m1()
    }
}

/// `log(mean(exp(v)))` without overflow.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + (s / v.len() as f64).ln()
}

/// Kish effective sample size of weights `exp(v)`.
pub fn effective_sample_size(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = v.iter().fold((0.0, 0.0), |(a, b), x| {
        let w = (x - max).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// Least squares for a small dense design; returns the coefficients.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let rows = design.len();
    let cols = design.first()?.len();
    let a = nalgebra::DMatrix::from_fn(rows, cols, |i, j| design[i][j]);
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-14).ok()?;
    Some(x.iter().copied().collect())
}
