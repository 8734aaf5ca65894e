//! Small numerically stable scalar kernels.

/// Logistic sigmoid, evaluated without overflow for large |t|.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))`.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `log(sigmoid(t))`.
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

/// Inverse of [`sigmoid`].
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log Σ exp(a_i)` with max-shift. Returns `-inf` for an empty slice or all `-inf`.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + a.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `log((1/n) Σ exp(a_i))`.
pub fn log_mean_exp(a: &[f64]) -> f64 {
    log_sum_exp(a) - (a.len() as f64).ln()
}

/// Softmax probabilities written into `out`; returns the log normaliser.
pub fn softmax_into(scores: &[f64], out: &mut [f64]) -> f64 {
    let lse = log_sum_exp(scores);
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - lse).exp();
    }
    lse
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(a: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mean = a.iter().sum::<f64>() / n as f64;
    a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}
