//! Accuracy and comparison metrics.

use super::{Moments, SparsePce};
use crate::error::{Error, Result};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// `Σ(f − f̂)² / Σf²`.
pub fn relative_mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(predictions, truths, 1)?;
    let denom: f64 = truths.iter().map(|f| f * f).sum();
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "relative MSE is undefined for all-zero reference outputs".into(),
        ));
    }
    let num: f64 = predictions.iter().zip(truths).map(|(p, f)| (f - p).powi(2)).sum();
    Ok(num / denom)
}

/// Squared Euclidean distance between effective coefficient vectors. Both
/// expansions must share the same basis.
pub fn l2_distance(a: &SparsePce, b: &SparsePce) -> Result<f64> {
    if a.basis() != b.basis() {
        return Err(Error::SpecMismatch("expansions are built on different bases".into()));
    }
    Ok(a.effective_coefficients()
        .iter()
        .zip(&b.effective_coefficients())
        .map(|(x, y)| (x - y).powi(2))
        .sum())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r_squared(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(predictions, truths, 2)?;
    let mean = truths.iter().sum::<f64>() / truths.len() as f64;
    let ss_tot: f64 = truths.iter().map(|f| (f - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument(
            "R² is undefined for constant reference outputs".into(),
        ));
    }
    let ss_res: f64 = predictions.iter().zip(truths).map(|(p, f)| (f - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} reference values",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min {
        return Err(Error::InvalidArgument(format!(
            "need at least {min} points, got {}",
            a.len()
        )));
    }
    Ok(())
}

/// Percentile bootstrap interval `(q_{α/2}, q_{1−α/2})` of `statistic` over
/// `b` resamples with replacement.
pub fn bootstrap_ci<F>(samples: &[f64], b: usize, alpha: f64, seed: u64, statistic: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let [iv] = bootstrap_many(samples, b, alpha, seed, |x| [statistic(x)])?;
    Ok(iv)
}

fn bootstrap_many<const K: usize, F>(
    samples: &[f64],
    b: usize,
    alpha: f64,
    seed: u64,
    statistic: F,
) -> Result<[(f64, f64); K]>
where
    F: Fn(&[f64]) -> [f64; K],
{
    if samples.is_empty() {
        return Err(Error::InvalidArgument("bootstrap needs at least one sample".into()));
    }
    if b < 100 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least 100 resamples, got {b}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut rng = Rng::new(seed);
    let mut resample = vec![0.0; samples.len()];
    let mut stats: [Vec<f64>; K] = std::array::from_fn(|_| Vec::with_capacity(b));
    for _ in 0..b {
        for slot in resample.iter_mut() {
            *slot = samples[rng.below(samples.len())];
        }
        for (acc, v) in stats.iter_mut().zip(statistic(&resample)) {
            acc.push(v);
        }
    }
    Ok(stats.map(|mut s| {
        s.sort_by(f64::total_cmp);
        (percentile(&s, alpha / 2.0), percentile(&s, 1.0 - alpha / 2.0))
    }))
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap percentile intervals for all four moments at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIntervals {
    pub point: Moments,
    pub mean: (f64, f64),
    pub std: (f64, f64),
    pub skewness: (f64, f64),
    pub kurtosis: (f64, f64),
}

impl MomentIntervals {
    pub fn contains_mean_and_std(&self, m: &Moments) -> bool {
        (self.mean.0..=self.mean.1).contains(&m.mean) && (self.std.0..=self.std.1).contains(&m.std)
    }
}

pub fn bootstrap_moment_intervals(samples: &[f64], b: usize, alpha: f64, seed: u64) -> Result<MomentIntervals> {
    let [mean, std, skewness, kurtosis] = bootstrap_many(samples, b, alpha, seed, |x| {
        let m = Moments::from_samples(x);
        [m.mean, m.std, m.skewness, m.kurtosis]
    })?;
    Ok(MomentIntervals {
        point: Moments::from_samples(samples),
        mean,
        std,
        skewness,
        kurtosis,
    })
}
