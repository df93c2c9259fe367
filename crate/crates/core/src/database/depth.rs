//! Subsampled depth images as retrieval features, for the 2D baselines.

use serde::{Deserialize, Serialize};

use super::kdtree::FeatureMatrix;
use super::{EntryId, FeatureIndex, SearchStrategy};
use crate::error::{Error, Result};
use crate::geometry::{DepthImage, Vec3};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthFeatureSpec {
    pub rows: usize,
    pub cols: usize,
    /// Value used for invalid pixels and clamp for far ones, meters.
    pub cap: f64,
}

impl Default for DepthFeatureSpec {
    fn default() -> Self {
        DepthFeatureSpec { rows: 16, cols: 24, cap: 30.0 }
    }
}

/// Nearest-pixel subsampling at cell centers, row-major.
pub fn depth_feature(depth: &DepthImage, spec: &DepthFeatureSpec) -> Vec<f32> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        let row = (((r as f64 + 0.5) * h as f64 / spec.rows as f64) as usize).min(h - 1);
        for c in 0..spec.cols {
            let col = (((c as f64 + 0.5) * w as f64 / spec.cols as f64) as usize).min(w - 1);
            let z = depth.get(row, col).map_or(spec.cap, |z| z.min(spec.cap));
            out.push(z as f32);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DepthEntry {
    pub scene_id: u32,
    pub frame_id: u32,
    pub feature: Vec<f32>,
    /// Future on the entry's own ground, ego coordinates.
    pub ego_trajectory: Trajectory,
    /// Future camera centers in the entry's camera frame.
    pub camera_trajectory: Vec<Vec3>,
}

/// Single-bin database keyed by depth features.
pub struct DepthDatabase {
    spec: DepthFeatureSpec,
    dt: f64,
    entries: Vec<DepthEntry>,
    index: FeatureIndex,
}

impl std::fmt::Debug for DepthDatabase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DepthDatabase").field("spec", &self.spec).field("len", &self.entries.len()).finish()
    }
}

impl DepthDatabase {
    pub fn new(spec: DepthFeatureSpec, mut entries: Vec<DepthEntry>, dt: f64, strategy: SearchStrategy) -> Result<Self> {
        let dim = spec.rows * spec.cols;
        if dim == 0 {
            return Err(Error::InvalidParameter("empty depth feature".into()));
        }
        for e in &entries {
            if e.feature.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: e.feature.len() });
            }
        }
        entries.sort_by_key(|e| EntryId { scene_id: e.scene_id, frame_id: e.frame_id });
        let mut features = FeatureMatrix::new(dim);
        for e in &entries {
            features.push(&e.feature);
        }
        Ok(DepthDatabase { spec, dt, entries, index: FeatureIndex::new(features, strategy) })
    }

    pub fn spec(&self) -> &DepthFeatureSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn entries(&self) -> &[DepthEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Up to `k` nearest entries with their distances.
    pub fn query(&self, depth: &DepthImage, k: usize) -> Result<Vec<(&DepthEntry, f64)>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyBin(0));
        }
        let q = depth_feature(depth, &self.spec);
        Ok(self.index.search(&q, k).into_iter().map(|h| (&self.entries[h.row], h.dist2.sqrt())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;

    #[test]
    fn subsample_picks_cell_centers_and_caps() {
        let k = CameraIntrinsics::new(10.0, 10.0, 1.5, 1.5, 4, 4).unwrap();
        let raw: Vec<f64> = (0..16).map(|i| if i == 5 { f64::NAN } else { i as f64 * 3.0 }).collect();
        let d = DepthImage::from_raw(k, raw).unwrap();
        let f = depth_feature(&d, &DepthFeatureSpec { rows: 2, cols: 2, cap: 30.0 });
        // centers land on pixels (1,1), (1,3), (3,1), (3,3)
        assert_eq!(f, vec![30.0, 21.0, 30.0, 30.0]);
    }
}
