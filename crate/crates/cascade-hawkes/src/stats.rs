//! One-sample Kolmogorov-Smirnov test against the unit exponential, used for
//! time-rescaling goodness-of-fit.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// KS distance between the empirical CDF of `samples` and a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(HawkesError::Usage("KS test needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let upper = (i + 1) as f64 / n - f;
        let lower = f - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    Ok(d)
}

/// Asymptotic p-value for the one-sample KS statistic with Stephens' small-n
/// correction on the effective sample size.
pub fn ks_p_value(statistic: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    if lambda < 1e-10 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// KS test of `samples` against Exp(1).
pub fn ks_test_exp1(samples: &[f64]) -> Result<KsResult> {
    let statistic = ks_statistic(samples, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })?;
    Ok(KsResult {
        statistic,
        p_value: ks_p_value(statistic, samples.len()),
        n: samples.len(),
    })
}
