//! Evaluation protocols: spatiotemporal precision, detection rate,
//! reconstruction-error curves and gaze/destination statistics.

pub mod benchmark;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::discovery::Detection;
use crate::error::{Error, Result};
use crate::trajectory::{fit_coefficients, learn_pca_basis, make_dct_basis, reconstruct, Trajectory, TrajectoryBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub epsilon: f64,
    /// Time windows `(start, end]` in seconds.
    pub windows: Vec<(f64, f64)>,
    pub k_values: Vec<usize>,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig { epsilon: 1.5, windows: vec![(0.0, 5.0), (5.0, 10.0), (10.0, 15.0)], k_values: vec![10, 30, 60] }
    }
}

impl PrecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.windows.is_empty() || self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidParameter("need windows and positive k values".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(a, b) in &self.windows {
            if !(a < b) || a < prev || a < 0.0 {
                return Err(Error::InvalidParameter("windows must be ordered and disjoint".into()));
            }
            prev = b;
        }
        Ok(())
    }
}

/// Sample indices (0-based, sample `i` at time `(i + 1) dt`) whose time
/// lies in `(start, end]`.
pub fn window_indices(window: (f64, f64), dt: f64, horizon: usize) -> Result<Range<usize>> {
    let (a, b) = window;
    // round-off guard so that 5.0 / 0.5 lands on 10
    let lo = ((a / dt) + 1e-9).floor().max(0.0) as usize;
    let hi = ((b / dt) + 1e-9).floor() as usize;
    if hi > horizon || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "window ({a}, {b}] s does not fit a {horizon}-sample horizon at dt = {dt}"
        )));
    }
    Ok(lo..hi)
}

/// True iff some prediction stays strictly within `epsilon` of the ground
/// truth at every index of the window (same-index comparison).
pub fn trajectory_hit(predictions: &[Trajectory], truth: &Trajectory, window: Range<usize>, epsilon: f64) -> Result<bool> {
    if window.end > truth.horizon() || window.is_empty() {
        return Err(Error::IndexOutOfRange { index: window.end, len: truth.horizon() });
    }
    for p in predictions {
        if p.horizon() != truth.horizon() {
            return Err(Error::DimensionMismatch { expected: truth.horizon(), got: p.horizon() });
        }
        if (p.dt - truth.dt).abs() > 1e-9 {
            return Err(Error::InvalidParameter("prediction and ground truth sample rates differ".into()));
        }
    }
    Ok(predictions.iter().any(|p| {
        window.clone().all(|i| {
            let (a, b) = (p.points[i], truth.points[i]);
            (a[0] - b[0]).hypot(a[1] - b[1]) < epsilon
        })
    }))
}

/// Precision table `[window][k]`: the fraction of frames hit by the top `k`
/// predictions of each frame. `frames` pairs a ranked prediction list with
/// the ground truth.
pub fn precision(frames: &[(Vec<Trajectory>, Trajectory)], config: &PrecisionConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let Some((_, first)) = frames.first() else {
        return Err(Error::EmptyInput("no test frames".into()));
    };
    let windows = config
        .windows
        .iter()
        .map(|w| window_indices(*w, first.dt, first.horizon()))
        .collect::<Result<Vec<_>>>()?;
    let mut table = vec![vec![0.0; config.k_values.len()]; windows.len()];
    for (preds, truth) in frames {
        for (wi, w) in windows.iter().enumerate() {
            for (ki, &k) in config.k_values.iter().enumerate() {
                let top = &preds[..k.min(preds.len())];
                if trajectory_hit(top, truth, w.clone(), config.epsilon)? {
                    table[wi][ki] += 1.0;
                }
            }
        }
    }
    let n = frames.len() as f64;
    table.iter_mut().flatten().for_each(|v| *v /= n);
    Ok(table)
}

/// Share of detections with at least half of their cells labelled true;
/// `None` without detections.
pub fn detection_rate(detections: &[Detection], labels: &[bool], cols: usize) -> Result<Option<f64>> {
    let tp = true_positives(detections, labels, cols)?;
    Ok((!detections.is_empty()).then(|| tp as f64 / detections.len() as f64))
}

pub fn true_positives(detections: &[Detection], labels: &[bool], cols: usize) -> Result<usize> {
    let mut tp = 0;
    for d in detections {
        let mut hits = 0;
        for &(r, c) in &d.cells {
            let i = r * cols + c;
            if c >= cols || i >= labels.len() {
                return Err(Error::IndexOutOfRange { index: i, len: labels.len() });
            }
            hits += labels[i] as usize;
        }
        if 2 * hits >= d.cells.len() {
            tp += 1;
        }
    }
    Ok(tp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisType {
    Pca,
    Dct,
}

/// Mean over trajectories of the per-point RMS reconstruction error.
pub fn mean_rms_error(trajectories: &[Trajectory], basis: &TrajectoryBasis) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("no trajectories".into()));
    }
    let mut total = 0.0;
    for t in trajectories {
        let r = reconstruct(&fit_coefficients(t, basis)?, basis)?;
        total += t.rms_error(&r);
    }
    Ok(total / trajectories.len() as f64)
}

/// Reconstruction error for each basis size.
pub fn reconstruction_curve(trajectories: &[Trajectory], basis: BasisType, k_values: &[usize]) -> Result<Vec<(usize, f64)>> {
    let first = trajectories.first().ok_or_else(|| Error::EmptyInput("no trajectories".into()))?;
    k_values
        .iter()
        .map(|&k| {
            let b = match basis {
                BasisType::Pca => learn_pca_basis(trajectories, k)?.basis,
                BasisType::Dct => make_dct_basis(first.horizon(), k, first.dt)?,
            };
            Ok((k, mean_rms_error(trajectories, &b)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeDestinationStats {
    pub bin_width_deg: f64,
    /// Left edge of yaw bin `j` is `-180 + j * bin_width_deg`.
    pub yaw_bins: usize,
    /// Left edge of pitch bin `i` is `pitch_min_deg + i * bin_width_deg`.
    pub pitch_min_deg: f64,
    pub joint: Vec<Vec<u64>>,
    /// Yaw histogram per database pitch bin.
    pub per_pitch_bin: Vec<Vec<u64>>,
    pub count: u64,
}

impl GazeDestinationStats {
    /// Center, in degrees, of the fullest yaw bin of a histogram.
    pub fn mode_deg(&self, hist: &[u64]) -> Option<f64> {
        let (j, n) = hist.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        (*n > 0).then(|| -180.0 + (j as f64 + 0.5) * self.bin_width_deg)
    }
}

/// Destination yaw `atan2(x, z)` of the trajectory point at
/// `horizon_seconds`, histogrammed against pitch. `items` holds
/// `(pitch, pitch bin, trajectory)` triples.
pub fn gaze_destination_stats(
    items: &[(f64, u8, Trajectory)],
    horizon_seconds: f64,
    bin_width_deg: f64,
) -> Result<GazeDestinationStats> {
    if !(bin_width_deg > 0.0) {
        return Err(Error::InvalidParameter("bin width must be positive".into()));
    }
    let yaw_bins = (360.0 / bin_width_deg).ceil() as usize;
    let pitches: Vec<f64> = items.iter().map(|i| i.0.to_degrees()).collect();
    let pitch_min = pitches.iter().copied().fold(f64::INFINITY, f64::min);
    let pitch_min_deg = if pitch_min.is_finite() { (pitch_min / bin_width_deg).floor() * bin_width_deg } else { 0.0 };
    let pitch_max = pitches.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pitch_bins = if pitch_max.is_finite() { ((pitch_max - pitch_min_deg) / bin_width_deg).floor() as usize + 1 } else { 0 };
    let mut joint = vec![vec![0u64; yaw_bins]; pitch_bins];
    let mut per_pitch_bin = vec![vec![0u64; yaw_bins]; 3];
    for (pitch, bin, traj) in items {
        let idx = ((horizon_seconds / traj.dt) + 1e-9).round() as usize;
        if idx == 0 || idx > traj.horizon() {
            return Err(Error::Horizon(format!("trajectory does not reach {horizon_seconds} s")));
        }
        let [x, z] = traj.points[idx - 1];
        let yaw = x.atan2(z).to_degrees();
        let j = (((yaw + 180.0) / bin_width_deg).floor() as usize).min(yaw_bins - 1);
        let i = (((pitch.to_degrees() - pitch_min_deg) / bin_width_deg).floor() as usize).min(pitch_bins - 1);
        joint[i][j] += 1;
        per_pitch_bin[(*bin as usize).min(2)][j] += 1;
    }
    Ok(GazeDestinationStats { bin_width_deg, yaw_bins, pitch_min_deg, joint, per_pitch_bin, count: items.len() as u64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(offset: f64, n: usize) -> Trajectory {
        Trajectory { dt: 0.5, points: (1..=n).map(|i| [offset, 0.6 * i as f64]).collect() }
    }

    #[test]
    fn default_windows_partition_the_horizon() {
        let cfg = PrecisionConfig::default();
        let idx: Vec<_> = cfg.windows.iter().map(|w| window_indices(*w, 0.5, 30).unwrap()).collect();
        assert_eq!(idx, vec![0..10, 10..20, 20..30]);
        assert!(window_indices((10.0, 16.0), 0.5, 30).is_err());
    }

    #[test]
    fn hit_is_strict() {
        let gt = line(0.0, 30);
        assert!(trajectory_hit(&[gt.clone()], &gt, 0..30, 1e-9).unwrap());
        assert!(!trajectory_hit(&[line(1.5, 30)], &gt, 0..30, 1.5).unwrap());
        assert!(trajectory_hit(&[line(1.5, 30), line(1.4, 30)], &gt, 0..30, 1.5).unwrap());
    }

    #[test]
    fn precision_oracle_and_far_method() {
        let cfg = PrecisionConfig::default();
        let frames: Vec<_> = (0..5).map(|i| (vec![line(i as f64, 30)], line(i as f64, 30))).collect();
        assert!(precision(&frames, &cfg).unwrap().iter().flatten().all(|v| *v == 1.0));
        let far: Vec<_> = (0..5).map(|_| (vec![line(100.0, 30)], line(0.0, 30))).collect();
        assert!(precision(&far, &cfg).unwrap().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn detection_rate_cases() {
        let det = |cells: Vec<(usize, usize)>| Detection { cells, peak: 1.0, centroid: (0.0, 0.0) };
        let labels = vec![true, true, false, false];
        assert_eq!(detection_rate(&[], &labels, 2).unwrap(), None);
        assert_eq!(detection_rate(&[det(vec![(0, 0), (0, 1)])], &labels, 2).unwrap(), Some(1.0));
        let mixed = [det(vec![(0, 0)]), det(vec![(1, 0), (1, 1)])];
        assert_eq!(detection_rate(&mixed, &labels, 2).unwrap(), Some(0.5));
    }

    #[test]
    fn straight_walks_point_forward() {
        let items: Vec<_> = (0..20).map(|i| (0.1 + 0.01 * i as f64, (i % 3) as u8, line(0.0, 30))).collect();
        let s = gaze_destination_stats(&items, 10.0, 5.0).unwrap();
        assert_eq!(s.joint.iter().flatten().sum::<u64>(), 20);
        for h in &s.per_pitch_bin {
            assert_eq!(s.mode_deg(h), Some(2.5));
        }
    }
}
