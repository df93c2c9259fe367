//! Camera model, depth back-projection, ground-plane estimation and the
//! gaze-normalized egocentric frame.
//!
//! Camera coordinates follow the pinhole convention: x right, y down,
//! z along the optical axis. Depth is z-depth, not ray length.

mod camera;
pub mod egod;
mod frame;
mod plane;
mod pose;

pub use camera::{backproject, CameraIntrinsics, DepthImage};
pub use frame::{build_ego_frame, pitch_angle, signed_pitch, EgoFrame};
pub use plane::{fit_ground_plane, GroundPlane, PlaneFit, RansacConfig};
pub use pose::CameraPose;

pub type Vec3 = nalgebra::Vector3<f64>;
