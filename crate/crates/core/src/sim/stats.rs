//! Violation frequencies with honest confidence intervals.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Batches per replication for the batch-means variance estimate.
pub const BATCHES_PER_REPLICATION: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// Fraction of sampled slots above the threshold.
    pub frequency: f64,
    /// Wilson 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    /// Sample count after accounting for serial correlation.
    pub effective_samples: f64,
}

impl Violation {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// `frequency ≤ ε + half_width`.
    pub fn dominated_by(&self, epsilon: f64) -> bool {
        self.frequency <= epsilon + self.half_width()
    }
}

/// Wilson score interval for `p̂` observed on `n` (possibly fractional) trials.
pub fn wilson_interval(p_hat: f64, n: f64, z: f64) -> (f64, f64) {
    if !(n > 0.0) {
        return (0.0, 1.0);
    }
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Violation frequency of indicator series, one series per replication.
///
/// The effective sample size is `p̂(1−p̂)/Var(p̂)` with `Var(p̂)` estimated
/// from batch means, capped at the raw count.
pub fn violation_from_indicators<'a>(series: impl IntoIterator<Item = &'a [bool]>) -> Violation {
    let mut n = 0usize;
    let mut hits = 0usize;
    let mut batch_means = Vec::new();
    for s in series {
        n += s.len();
        hits += s.iter().filter(|&&b| b).count();
        let len = s.len() / BATCHES_PER_REPLICATION;
        if len == 0 {
            continue;
        }
        for chunk in s.chunks_exact(len).take(BATCHES_PER_REPLICATION) {
            batch_means.push(chunk.iter().filter(|&&b| b).count() as f64 / len as f64);
        }
    }
    if n == 0 {
        return Violation {
            frequency: 0.0,
            ci_low: 0.0,
            ci_high: 1.0,
            samples: 0,
            effective_samples: 0.0,
        };
    }
    let p = hits as f64 / n as f64;
    let effective = effective_sample_size(p, n, &batch_means);
    let (lo, hi) = wilson_interval(p, effective, Z95);
    Violation {
        frequency: p,
        ci_low: lo,
        ci_high: hi,
        samples: n,
        effective_samples: effective,
    }
}

fn effective_sample_size(p: f64, n: usize, batch_means: &[f64]) -> f64 {
    let k = batch_means.len();
    if p == 0.0 || p == 1.0 || k < 2 {
        return n as f64;
    }
    let mean = batch_means.iter().sum::<f64>() / k as f64;
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    if var == 0.0 {
        return n as f64;
    }
    (p * (1.0 - p) * k as f64 / var).clamp(1.0, n as f64)
}

/// Empirical quantiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub p999: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Quantiles {
            p50: at(0.5),
            p90: at(0.9),
            p99: at(0.99),
            p999: at(0.999),
            max: v[v.len() - 1],
        })
    }
}
