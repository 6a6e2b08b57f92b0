//! Metrics: AUC via the Mann-Whitney rank statistic, TPR at a fixed FPR,
//! and percentile-bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores paired with binary labels.
#[derive(Debug, Clone)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Metric("scores and labels lengths differ".into()));
        }
        Ok(ScoredSet { scores, labels })
    }

    fn class_counts(&self) -> Result<(usize, usize)> {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        let neg = self.labels.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::Metric(
                "need at least one positive and one negative".into(),
            ));
        }
        Ok((pos, neg))
    }
}

/// Area under the ROC curve: (wins + 0.5 ties) / (positives * negatives),
/// computed through tie-averaged rank sums in O(n log n).
pub fn auc(set: &ScoredSet) -> Result<f64> {
    let (pos, neg) = set.class_counts()?;
    let n = set.scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        set.scores[a]
            .partial_cmp(&set.scores[b])
            .expect("non-finite score")
    });
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        // Average 1-based rank over the tie group [i, j].
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if set.labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// True-positive rate at the smallest score threshold whose empirical
/// false-positive rate does not exceed `target_fpr`. No interpolation:
/// the returned operating point is always realizable as a decision rule
/// "predict positive when score >= threshold".
pub fn tpr_at_fpr(set: &ScoredSet, target_fpr: f64) -> Result<f64> {
    if !(0.0 < target_fpr && target_fpr < 1.0) {
        return Err(Error::Metric(format!(
            "target_fpr {target_fpr} outside (0,1)"
        )));
    }
    let (pos, neg) = set.class_counts()?;
    let n = set.scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        set.scores[b]
            .partial_cmp(&set.scores[a])
            .expect("non-finite score")
    });
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut best_tpr = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            if set.labels[k] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        // Threshold = this score; everything seen so far is predicted
        // positive. Lower admissible thresholds only increase TPR, so keep
        // scanning while the FPR constraint holds.
        if fp as f64 / neg as f64 <= target_fpr {
            best_tpr = tp as f64 / pos as f64;
        }
        i = j + 1;
    }
    Ok(best_tpr)
}

/// Mean with a bootstrap confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_runs: usize,
}

/// Percentile bootstrap over the values' mean. Deterministic given the seed.
pub fn bootstrap_ci(
    values: &[f64],
    confidence: f64,
    resamples: usize,
    seed: u64,
) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::Metric("bootstrap of an empty sample".into()));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::Metric(format!(
            "confidence {confidence} outside (0,1)"
        )));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if resamples == 0 || n == 1 {
        return Ok(MetricSummary {
            mean,
            ci_low: mean,
            ci_high: mean,
            n_runs: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..n {
                s += values[rng.gen_range(0..n)];
            }
            s / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - confidence) / 2.0;
    let lo = quantile_sorted(&means, alpha);
    let hi = quantile_sorted(&means, 1.0 - alpha);
    Ok(MetricSummary {
        mean,
        ci_low: lo.min(mean),
        ci_high: hi.max(mean),
        n_runs: n,
    })
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The resampler form of the bootstrap: draw scored nodes with replacement
/// and re-evaluate an arbitrary metric. The reported mean is the metric on
/// the full set; the interval is the percentile interval of the resampled
/// metric. Deterministic given the seed.
pub fn bootstrap_scored_set<F>(
    set: &ScoredSet,
    metric: F,
    confidence: f64,
    resamples: usize,
    seed: u64,
) -> Result<MetricSummary>
where
    F: Fn(&ScoredSet) -> Result<f64>,
{
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::Metric(format!(
            "confidence {confidence} outside (0,1)"
        )));
    }
    let mean = metric(set)?;
    let n = set.scores.len();
    if resamples == 0 || n == 1 {
        return Ok(MetricSummary {
            mean,
            ci_low: mean,
            ci_high: mean,
            n_runs: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.gen_range(0..n);
            scores.push(set.scores[k]);
            labels.push(set.labels[k]);
        }
        // Single-class resamples are skipped; the metric is undefined there.
        if let Ok(v) = ScoredSet::new(scores, labels).and_then(|s| metric(&s)) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::Metric("every bootstrap resample failed".into()));
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - confidence) / 2.0;
    Ok(MetricSummary {
        mean,
        ci_low: quantile_sorted(&values, alpha).min(mean),
        ci_high: quantile_sorted(&values, 1.0 - alpha).max(mean),
        n_runs: n,
    })
}

/// Aggregate one metric across runs: mean plus a bootstrap CI over runs.
/// Callers keep values in run order, so paired method comparisons stay
/// paired by index.
pub fn aggregate_runs(values: &[f64], confidence: f64) -> Result<MetricSummary> {
    bootstrap_ci(values, confidence, 1000, 0xA66_u64)
}
