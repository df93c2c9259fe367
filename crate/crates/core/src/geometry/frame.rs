use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::{GroundPlane, Vec3};
use crate::error::{Error, Result};

/// Gaze-normalized egocentric frame.
///
/// Origin at the feet (eye center projected onto the ground), +Y along the
/// ground normal, +Z along the ground projection of the gaze and
/// `X = Y x Z`, which makes +X point to the wearer's left. The eye sits at
/// `[0, h, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoFrame {
    pub eye_height: f64,
    /// Gaze in ego coordinates, `[0, v_y, v_z]`.
    pub gaze: Vec3,
    /// Camera-to-ego rotation.
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl EgoFrame {
    pub fn camera_to_ego(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn ego_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&(p - self.translation))
    }

    pub fn eye(&self) -> Vec3 {
        Vec3::new(0.0, self.eye_height, 0.0)
    }
}

/// Builds the ego frame from a ground plane in camera coordinates and the
/// gaze direction (taken to be the optical axis).
pub fn build_ego_frame(plane: &GroundPlane, optical_axis: &Vec3) -> Result<EgoFrame> {
    let axis = optical_axis.normalize();
    let y = plane.normal;
    let along = axis.dot(&y);
    let angle_deg = along.abs().min(1.0).acos().to_degrees();
    if angle_deg <= 1.0 {
        return Err(Error::DegenerateGaze { angle_deg });
    }
    let z = (axis - y * along).normalize();
    let x = y.cross(&z);
    let m = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    let rotation = Rotation3::from_matrix_unchecked(m);
    let gaze = Vec3::new(0.0, along, axis.dot(&z));
    Ok(EgoFrame {
        eye_height: plane.camera_height(),
        gaze,
        rotation,
        translation: Vec3::new(0.0, plane.camera_height(), 0.0),
    })
}

/// `acos(v_z)`: zero for a level gaze, blind to up versus down.
pub fn pitch_angle(frame: &EgoFrame) -> f64 {
    frame.gaze.z.clamp(-1.0, 1.0).acos()
}

/// Pitch with sign, positive when looking down at the ground. Equals
/// [`pitch_angle`] for downward gazes.
pub fn signed_pitch(frame: &EgoFrame) -> f64 {
    (-frame.gaze.y).atan2(frame.gaze.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraPose;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn plane_for(pose: &CameraPose) -> GroundPlane {
        // world ground y = 0 expressed in camera coordinates
        let n_cam = pose.rotation.inverse_transform_vector(&Vec3::y());
        GroundPlane::new(n_cam, pose.position.y).unwrap()
    }

    #[test]
    fn level_gaze() {
        let plane = GroundPlane::new(Vec3::new(0.0, -1.0, 0.0), 1.6).unwrap();
        let f = build_ego_frame(&plane, &Vec3::z()).unwrap();
        assert_relative_eq!(f.gaze, Vec3::z(), epsilon = 1e-12);
        assert_relative_eq!(f.eye_height, 1.6);
        assert_relative_eq!(pitch_angle(&f), 0.0);
    }

    #[test]
    fn pitched_down_thirty_degrees() {
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.4, PI / 6.0);
        let f = build_ego_frame(&plane_for(&pose), &Vec3::z()).unwrap();
        assert_relative_eq!(f.gaze, Vec3::new(0.0, -0.5, 3f64.sqrt() / 2.0), epsilon = 1e-9);
        assert_relative_eq!(pitch_angle(&f), PI / 6.0, epsilon = 1e-9);
        assert_relative_eq!(signed_pitch(&f), PI / 6.0, epsilon = 1e-9);
    }

    #[test]
    fn pitch_of_forty_five_degrees() {
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.0, PI / 4.0);
        let f = build_ego_frame(&plane_for(&pose), &Vec3::z()).unwrap();
        assert_relative_eq!(pitch_angle(&f), PI / 4.0, epsilon = 1e-9);
    }

    #[test]
    fn looking_straight_down_is_degenerate() {
        let plane = GroundPlane::new(Vec3::new(0.0, 0.0, -1.0), 1.6).unwrap();
        assert!(matches!(build_ego_frame(&plane, &Vec3::z()), Err(Error::DegenerateGaze { .. })));
    }

    #[test]
    fn upward_gaze_has_negative_signed_pitch() {
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.0, -0.2);
        let f = build_ego_frame(&plane_for(&pose), &Vec3::z()).unwrap();
        assert_relative_eq!(signed_pitch(&f), -0.2, epsilon = 1e-9);
        assert_relative_eq!(pitch_angle(&f), 0.2, epsilon = 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn random_pose_round_trip(
            yaw in -PI..PI,
            pitch in -1.2f64..1.2,
            h in 0.5f64..2.5,
        ) {
            let pose = CameraPose::from_yaw_pitch(Vec3::new(1.0, h, -4.0), yaw, pitch);
            let f = build_ego_frame(&plane_for(&pose), &Vec3::z()).unwrap();
            // camera center maps to the eye
            let c = f.camera_to_ego(&Vec3::zeros());
            proptest::prop_assert!((c - Vec3::new(0.0, h, 0.0)).norm() < 1e-9);
            // axes orthonormal and right-handed
            let m = f.rotation.matrix();
            proptest::prop_assert!((m * m.transpose() - Matrix3::identity()).norm() < 1e-9);
            proptest::prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
            proptest::prop_assert!(f.gaze.x.abs() < 1e-9);
            proptest::prop_assert!((f.gaze.norm() - 1.0).abs() < 1e-9);
        }
    }
}
