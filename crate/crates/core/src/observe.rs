//! Depth image to (ego frame, EgoSpace map), the step shared by training
//! and prediction.

use serde::{Deserialize, Serialize};

use crate::egospace::{compute_egospace, EgoSpaceMap, EgoSpaceParams, GridSpec};
use crate::error::Result;
use crate::geometry::{
    backproject, build_ego_frame, fit_ground_plane, signed_pitch, CameraPose, DepthImage, EgoFrame, RansacConfig,
    Vec3,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserveConfig {
    pub ransac: RansacConfig,
    /// Expected plane normal direction in camera coordinates (either sign).
    pub gravity_prior: [f64; 3],
    pub height_prior: f64,
    pub egospace: EgoSpaceParams,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        ObserveConfig {
            ransac: RansacConfig::default(),
            gravity_prior: [0.0, -1.0, 0.0],
            height_prior: 1.6,
            egospace: EgoSpaceParams::default(),
        }
    }
}

impl ObserveConfig {
    /// Copy with the gravity prior set to the world down direction seen
    /// from `pose`, as an inertial sensor on the camera would report it.
    pub fn with_pose_gravity(&self, pose: &CameraPose) -> Self {
        let g = pose.rotation.inverse_transform_vector(&-Vec3::y());
        ObserveConfig { gravity_prior: [g.x, g.y, g.z], ..*self }
    }
}

#[derive(Debug, Clone)]
pub struct Observation {
    pub frame: EgoFrame,
    pub map: EgoSpaceMap,
    /// Signed pitch, positive looking down.
    pub pitch: f64,
}

pub fn observe(depth: &DepthImage, grid: &GridSpec, config: &ObserveConfig) -> Result<Observation> {
    let frame = estimate_frame(depth, config)?;
    let map = compute_egospace(depth, &frame, grid, &config.egospace)?;
    Ok(Observation { pitch: signed_pitch(&frame), frame, map })
}

/// Ground plane fit plus ego frame, gaze taken along the optical axis.
pub fn estimate_frame(depth: &DepthImage, config: &ObserveConfig) -> Result<EgoFrame> {
    let points = backproject(depth)?;
    let g = config.gravity_prior;
    let fit = fit_ground_plane(&points, &Vec3::new(g[0], g[1], g[2]), config.height_prior, &config.ransac)?;
    build_ego_frame(&fit.plane, &Vec3::z())
}
