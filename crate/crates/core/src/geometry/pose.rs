use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::Vec3;

/// Rigid camera pose in a world frame with +Y up.
///
/// `rotation` maps camera-frame directions to world directions, so a world
/// point `p` sits at `rotation^T (p - position)` in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub rotation: Rotation3<f64>,
}

impl CameraPose {
    /// Camera at `position` looking along heading `yaw` (0 = +Z, pi/2 = +X)
    /// pitched down by `pitch_down` radians, with no roll.
    pub fn from_yaw_pitch(position: Vec3, yaw: f64, pitch_down: f64) -> Self {
        let up = Vec3::y();
        let forward = Vec3::new(
            yaw.sin() * pitch_down.cos(),
            -pitch_down.sin(),
            yaw.cos() * pitch_down.cos(),
        );
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        CameraPose { position, rotation: Rotation3::from_matrix_unchecked(m) }
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&(p - self.position))
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.position
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn level_camera_axes() {
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.0, 0.0);
        assert_relative_eq!(pose.forward(), Vec3::z(), epsilon = 1e-12);
        // camera +y points down
        assert_relative_eq!(pose.rotation * Vec3::y(), -Vec3::y(), epsilon = 1e-12);
        assert_relative_eq!(pose.rotation.matrix().determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn round_trip() {
        let pose = CameraPose::from_yaw_pitch(Vec3::new(3.0, 1.5, -2.0), 0.7, 0.3);
        let p = Vec3::new(1.0, 0.2, 5.0);
        assert_relative_eq!(pose.camera_to_world(&pose.world_to_camera(&p)), p, epsilon = 1e-12);
        let f = pose.forward();
        assert_relative_eq!(f.y, -(0.3f64).sin(), epsilon = 1e-12);
        assert_relative_eq!(f.x.atan2(f.z), 0.7, epsilon = 1e-12);
    }
}
