//! Small numeric helpers shared across modules.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Median; even-length input gives the mean of the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n - 1); zero for a single value.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Running count/mean/sum-of-squares that merges exactly across partitions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn from_values(values: &[f64]) -> Self {
        values.iter().fold(Moments::default(), |mut m, &v| {
            m.push(v);
            m
        })
    }

    /// Rebuilds moments from a count, mean and sample standard deviation.
    pub fn from_summary(n: u64, mean: f64, std: f64) -> Self {
        let m2 = if n > 1 { std * std * (n - 1) as f64 } else { 0.0 };
        Moments { n, mean, m2 }
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0).sqrt()
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Lognormal distribution parameterised on the log scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lognormal {
    pub mu: f64,
    pub sigma: f64,
}

impl Lognormal {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Lognormal { mu, sigma }
    }

    pub fn with_median(median: f64, sigma: f64) -> Self {
        Lognormal { mu: median.ln(), sigma }
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x.is_infinite() {
            1.0
        } else {
            normal_cdf((x.ln() - self.mu) / self.sigma)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.mu + self.sigma * normal_quantile(p)).exp()
    }

    /// CDF of the distribution truncated to `[lo, hi)`.
    pub fn truncated_cdf(&self, x: f64, lo: f64, hi: f64) -> f64 {
        let (a, b) = (self.cdf(lo), self.cdf(hi));
        if x <= lo {
            0.0
        } else if x >= hi {
            1.0
        } else if b - a <= 0.0 {
            // all mass sits beyond numerical resolution; fall back to uniform
            (x - lo) / (hi - lo)
        } else {
            (self.cdf(x) - a) / (b - a)
        }
    }

    /// Inverse-CDF sample from the distribution truncated to `[lo, hi)`.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, rng: &mut R, lo: f64, hi: f64) -> f64 {
        let (a, b) = (self.cdf(lo), self.cdf(hi));
        let u: f64 = rng.gen();
        if b - a <= 1e-12 {
            return if hi.is_finite() { lo + u * (hi - lo) } else { lo.max(self.median()) };
        }
        let p = (a + u * (b - a)).clamp(1e-15, 1.0 - 1e-15);
        self.quantile(p).clamp(lo, if hi.is_finite() { hi } else { f64::MAX })
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        let mut j = i;
        while j < v.len() && v[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((j as f64 / n - f).abs()).max((f - i as f64 / n).abs());
        i = j;
    }
    d
}
