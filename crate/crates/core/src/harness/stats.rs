use serde::{Deserialize, Serialize};

use super::TrainRecord;
use crate::error::{Error, Result};

pub const ROLLING_WINDOW: usize = 100;

/// Summary of a set of episode scores. The standard deviation uses the
/// `n − 1` denominator and is reported as 0 when `n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    pub scores: Vec<f64>,
}

impl ScoreStats {
    pub fn from_scores(label: &str, scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Usage("statistics need at least one score".into()));
        }
        // Summing in sorted order makes the result independent of the
        // order in which scores (or merged parts) arrive.
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let stddev = if n > 1 {
            (sorted.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            label: label.to_string(),
            n,
            mean,
            stddev,
            min: sorted[0],
            max: sorted[n - 1],
            scores,
        })
    }

    /// False for a single score, where the sample deviation is undefined.
    pub fn stddev_defined(&self) -> bool {
        self.n > 1
    }

    pub fn median(&self) -> f64 {
        let mut s = self.scores.clone();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        }
    }

    pub fn merge(&self, other: &ScoreStats) -> Result<Self> {
        let mut scores = self.scores.clone();
        scores.extend(&other.scores);
        Self::from_scores(&self.label, scores)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    /// Trailing mean over up to [`ROLLING_WINDOW`] episodes, one per record.
    pub rolling: Vec<f64>,
    pub peak: f64,
    pub peak_episode: u64,
    /// `(threshold, first episode whose score reached it)`.
    pub thresholds: Vec<(f64, Option<u64>)>,
    pub final_rolling: f64,
}

pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn aggregate(records: &[TrainRecord], thresholds: &[f64]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::Usage("no training records to aggregate".into()));
    }
    let scores: Vec<f64> = records.iter().map(|r| r.score as f64).collect();
    let rolling = rolling_mean(&scores, ROLLING_WINDOW);
    let (mut peak, mut peak_episode) = (f64::NEG_INFINITY, 0);
    for r in records {
        if r.score as f64 > peak {
            peak = r.score as f64;
            peak_episode = r.episode;
        }
    }
    let thresholds = thresholds
        .iter()
        .map(|&t| (t, records.iter().find(|r| r.score as f64 >= t).map(|r| r.episode)))
        .collect();
    Ok(Summary {
        episodes: records.len(),
        final_rolling: *rolling.last().unwrap(),
        rolling,
        peak,
        peak_episode,
        thresholds,
    })
}
