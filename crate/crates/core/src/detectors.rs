//! PASAD subspace-departure detection, two-sided tabular CUSUM, and the
//! zero-false-positive threshold calibration rule.
//!
//! PASAD embeds the training series into lagged vectors, takes the leading
//! left singular vectors of the resulting Hankel matrix as a signal
//! subspace, and scores test windows by their squared distance from the
//! training centroid inside that subspace. CUSUM accumulates deviations of
//! each sample beyond a slack `k` from the training mean, separately for
//! positive and negative excursions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of streaming a detector over a monitored series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    /// First sample at or after the scan start whose statistic strictly
    /// exceeds the threshold.
    pub alarm: Option<usize>,
    /// Maximum statistic over samples at or after the scan start.
    pub max_stat: f64,
}

/// Trained PASAD detector: orthonormal signal-subspace basis plus the
/// projected training centroid.
#[derive(Debug, Clone)]
pub struct PasadModel {
    lag: usize,
    dimension: usize,
    basis: DMatrix<f64>,
    centroid: DVector<f64>,
    projected_centroid: DVector<f64>,
    threshold: Option<f64>,
    rank_deficient: bool,
}

impl PasadModel {
    /// Train on a series of length `N`: build the `N - lag + 1` lagged
    /// vectors, take the SVD of the Hankel matrix they form, and keep the
    /// `dimension` leading left singular vectors. A training matrix whose
    /// numerical rank falls below `dimension` is accepted with the missing
    /// directions zero-padded and the model flagged.
    pub fn train(series: &[f64], lag: usize, dimension: usize) -> Result<Self> {
        let n = series.len();
        if n < 2 {
            return Err(Error::InvalidDetectorParams(format!(
                "training series must have at least 2 samples, got {n}"
            )));
        }
        if lag == 0 || dimension == 0 {
            return Err(Error::InvalidDetectorParams(
                "lag and dimension must be positive".into(),
            ));
        }
        if dimension > lag {
            return Err(Error::InvalidDetectorParams(format!(
                "dimension {dimension} exceeds lag {lag}"
            )));
        }
        if n < lag + 1 {
            return Err(Error::InvalidDetectorParams(format!(
                "training series of length {n} is too short for lag {lag}"
            )));
        }
        let cols = n - lag + 1;
        let hankel =
            DMatrix::from_fn(lag, cols, |i, j| series[i + j]);
        let centroid = DVector::from_fn(lag, |i, _| {
            hankel.row(i).iter().sum::<f64>() / cols as f64
        });

        let svd = hankel.svd(true, false);
        let u = svd.u.as_ref().expect("left singular vectors requested");
        // Order directions by decreasing singular value; nalgebra does not
        // guarantee an ordering.
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap()
                .then(a.cmp(&b))
        });

        let tol = svd.singular_values[order[0]].max(0.0)
            * (lag.max(cols) as f64)
            * f64::EPSILON;
        let mut basis = DMatrix::zeros(lag, dimension);
        let mut rank_deficient = false;
        for (k, &idx) in order.iter().take(dimension).enumerate() {
            if svd.singular_values[idx] > tol {
                basis.set_column(k, &u.column(idx));
            } else {
                rank_deficient = true;
            }
        }
        if dimension > order.len() {
            rank_deficient = true;
        }

        let projected_centroid = basis.transpose() * &centroid;
        Ok(Self {
            lag,
            dimension,
            basis,
            centroid,
            projected_centroid,
            threshold: None,
            rank_deficient,
        })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn centroid(&self) -> &DVector<f64> {
        &self.centroid
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = Some(threshold);
    }

    /// Departure score of one window: squared distance between the
    /// projected window and the projected training centroid.
    pub fn score(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.lag {
            return Err(Error::InvalidDetectorParams(format!(
                "window length {} does not match lag {}",
                window.len(),
                self.lag
            )));
        }
        let x = DVector::from_column_slice(window);
        let projected = self.basis.transpose() * x;
        Ok((&self.projected_centroid - projected).norm_squared())
    }

    /// Score the sliding window ending at every sample. The first `lag - 1`
    /// entries are `None`.
    pub fn scores(&self, series: &[f64]) -> Vec<Option<f64>> {
        let mut out = vec![None; series.len()];
        if series.len() < self.lag {
            return out;
        }
        for t in self.lag - 1..series.len() {
            let window = &series[t + 1 - self.lag..=t];
            out[t] = Some(self.score(window).expect("window length fixed by loop"));
        }
        out
    }

    /// Stream the monitored series: alarm at the first sample at or after
    /// `start` whose score strictly exceeds the calibrated threshold.
    pub fn detect(&self, series: &[f64], start: usize) -> Result<Detection> {
        let threshold = self.threshold.ok_or(Error::ThresholdUnset)?;
        let scores = self.scores(series);
        let mut alarm = None;
        let mut max_stat = 0.0_f64;
        for (t, score) in scores.iter().enumerate().skip(start) {
            if let Some(s) = score {
                max_stat = max_stat.max(*s);
                if alarm.is_none() && *s > threshold {
                    alarm = Some(t);
                }
            }
        }
        Ok(Detection { alarm, max_stat })
    }
}

/// Serializable form of a trained PASAD model, basis stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PasadModelJson {
    #[serde(rename = "L")]
    pub lag: usize,
    pub r: usize,
    pub basis_row_major: Vec<f64>,
    pub centroid: Vec<f64>,
    pub projected_centroid: Vec<f64>,
    pub threshold: Option<f64>,
    pub rank_deficient: bool,
    pub calibration: serde_json::Value,
}

impl PasadModel {
    pub fn to_json(&self, calibration: serde_json::Value) -> PasadModelJson {
        let mut basis_row_major = Vec::with_capacity(self.lag * self.dimension);
        for i in 0..self.lag {
            for j in 0..self.dimension {
                basis_row_major.push(self.basis[(i, j)]);
            }
        }
        PasadModelJson {
            lag: self.lag,
            r: self.dimension,
            basis_row_major,
            centroid: self.centroid.iter().copied().collect(),
            projected_centroid: self.projected_centroid.iter().copied().collect(),
            threshold: self.threshold,
            rank_deficient: self.rank_deficient,
            calibration,
        }
    }
}

/// Two-sided tabular CUSUM detector state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CusumModel {
    pub mu0: f64,
    pub k: f64,
    pub s_pos: f64,
    pub s_neg: f64,
    pub threshold: Option<f64>,
}

impl CusumModel {
    /// Initialize from a training window: `mu0` is the sample mean and the
    /// slack is `k_factor` times the sample standard deviation (N - 1
    /// denominator).
    pub fn from_training(training: &[f64], k_factor: f64) -> Result<Self> {
        if training.len() < 2 {
            return Err(Error::InvalidDetectorParams(format!(
                "CUSUM training needs at least 2 samples, got {}",
                training.len()
            )));
        }
        if !(k_factor >= 0.0) {
            return Err(Error::InvalidDetectorParams(format!(
                "k factor must be nonnegative, got {k_factor}"
            )));
        }
        let n = training.len() as f64;
        let mu0 = training.iter().sum::<f64>() / n;
        let var = training.iter().map(|x| (x - mu0).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mu0,
            k: k_factor * var.sqrt(),
            s_pos: 0.0,
            s_neg: 0.0,
            threshold: None,
        })
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = Some(threshold);
    }

    pub fn reset_state(&mut self) {
        self.s_pos = 0.0;
        self.s_neg = 0.0;
    }

    /// Accumulate one sample and return the updated pair
    /// `(s_pos, s_neg)`.
    pub fn step(&mut self, x: f64) -> (f64, f64) {
        self.s_pos = (self.s_pos + (x - self.mu0 - self.k)).max(0.0);
        self.s_neg = (self.s_neg + (self.mu0 - x - self.k)).max(0.0);
        (self.s_pos, self.s_neg)
    }

    /// Per-sample statistics over a series, starting from zeroed
    /// accumulators and leaving `self` untouched.
    pub fn statistics(&self, series: &[f64]) -> Vec<(f64, f64)> {
        let mut fresh = self.clone();
        fresh.reset_state();
        series.iter().map(|&x| fresh.step(x)).collect()
    }

    /// Stream the monitored series: alarm at the first sample at or after
    /// `start` where either side strictly exceeds the threshold.
    pub fn detect(&self, series: &[f64], start: usize) -> Result<Detection> {
        let threshold = self.threshold.ok_or(Error::ThresholdUnset)?;
        let stats = self.statistics(series);
        let mut alarm = None;
        let mut max_stat = 0.0_f64;
        for (t, &(pos, neg)) in stats.iter().enumerate().skip(start) {
            let s = pos.max(neg);
            max_stat = max_stat.max(s);
            if alarm.is_none() && s > threshold {
                alarm = Some(t);
            }
        }
        Ok(Detection { alarm, max_stat })
    }
}

/// Threshold slightly above the maximum statistic observed on attack-free
/// runs: `(1 + margin) * max(stats)`. Guarantees zero false positives on
/// the calibration runs themselves. An all-zero statistic sequence yields
/// the degenerate threshold 0, which callers should surface as a warning.
pub fn calibrate_threshold(stats: &[f64], margin: f64) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::InvalidDetectorParams(
            "cannot calibrate a threshold from an empty statistic sequence".into(),
        ));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidDetectorParams(format!(
            "margin must be positive, got {margin}"
        )));
    }
    let max = stats.iter().cloned().fold(0.0_f64, f64::max);
    Ok((1.0 + margin) * max)
}
