//! Percentile bootstrap over pages.
//!
//! Resampling uses ChaCha8 seeded with `seed_from_u64`, and indices are drawn
//! as `u64`, so a given seed produces the same interval on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Unweighted mean of per-page scores.
    #[default]
    Macro,
    /// Mean weighted by ground-truth foreground pixel count.
    Pixel,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "macro" => Ok(Self::Macro),
            "pixel" | "pixel-weighted" => Ok(Self::Pixel),
            other => Err(format!("unknown aggregation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub aggregation: Aggregation,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            alpha: 0.05,
            seed: 0,
            aggregation: Aggregation::Macro,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub low: f64,
    pub high: f64,
}

/// `(score, pixel count)` pairs reduced by `aggregation`.
pub fn aggregate<'a>(scores: impl IntoIterator<Item = &'a (f64, u64)>, aggregation: Aggregation) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(s, w) in scores {
        let weight = match aggregation {
            Aggregation::Macro => 1.0,
            Aggregation::Pixel => w as f64,
        };
        num += s * weight;
        den += weight;
    }
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

/// Interval endpoints are order statistics `k` and `R - 1 - k` of the
/// replicate statistics, with `k = floor(R * alpha / 2)`. They are widened to
/// include the point estimate if needed.
pub fn bootstrap_ci(
    per_page: &[(f64, u64)],
    config: &BootstrapConfig,
) -> Result<ConfidenceInterval, MetricError> {
    if per_page.len() < 2 {
        return Err(MetricError::TooFewPages(per_page.len()));
    }
    if config.replicates == 0 {
        return Err(MetricError::NoReplicates);
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(MetricError::BadAlpha(config.alpha));
    }
    let point = aggregate(per_page, config.aggregation);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = per_page.len() as u64;
    let mut sample = Vec::with_capacity(per_page.len());
    let mut stats: Vec<f64> = (0..config.replicates)
        .map(|_| {
            sample.clear();
            sample.extend((0..n).map(|_| per_page[rng.random_range(0..n) as usize]));
            aggregate(&sample, config.aggregation)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let r = stats.len();
    let k = ((r as f64 * config.alpha / 2.0).floor() as usize).min((r - 1) / 2);
    Ok(ConfidenceInterval {
        point,
        low: stats[k].min(point),
        high: stats[r - 1 - k].max(point),
    })
}
