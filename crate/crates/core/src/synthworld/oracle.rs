use super::render::ray_box;
use super::world::World;
use crate::discovery::GroundGrid;
use crate::egospace::{fov_mask, CellState, EgoSpaceMap, GridSpec};
use crate::error::Result;
use crate::geometry::{build_ego_frame, CameraIntrinsics, CameraPose, EgoFrame, GroundPlane, Vec3};

/// The ego frame built from the true ground `y = 0` and the camera's
/// optical axis.
pub fn true_ego_frame(pose: &CameraPose) -> Result<EgoFrame> {
    let normal = pose.rotation.inverse_transform_vector(&Vec3::y());
    let plane = GroundPlane::new(normal, pose.position.y)?;
    build_ego_frame(&plane, &Vec3::z())
}

/// Ego coordinates to world coordinates.
pub fn ego_to_world(pose: &CameraPose, frame: &EgoFrame, p: &Vec3) -> Vec3 {
    pose.camera_to_world(&frame.ego_to_camera(p))
}

/// Smallest ray parameter in `[0, 1)` at which the segment from `eye` to
/// `ground` enters a box.
fn first_hit(world: &World, eye: &Vec3, ground: &Vec3) -> Option<f64> {
    let dir = ground - eye;
    world
        .boxes
        .iter()
        .filter_map(|b| ray_box(eye, &dir, b))
        .filter(|&(t0, t1)| t1 >= 0.0 && t0 < 1.0)
        .map(|(t0, _)| t0.max(0.0))
        .min_by(f64::total_cmp)
}

/// Exact map: per node, the height at which the eye-to-ground segment
/// first enters a box, 0 when it reaches the ground unobstructed.
pub fn oracle_egospace(
    world: &World,
    pose: &CameraPose,
    frame: &EgoFrame,
    spec: &GridSpec,
    intrinsics: &CameraIntrinsics,
) -> Result<EgoSpaceMap> {
    spec.validate()?;
    let mask = fov_mask(spec, frame, intrinsics);
    let eye = pose.position;
    let mut phi = vec![spec.phi_max; spec.cell_count()];
    for r in 0..spec.n_radius {
        for t in 0..spec.n_theta {
            let i = spec.index(r, t);
            if mask[i] == CellState::OutsideFov {
                continue;
            }
            let (x, z) = spec.ground_point(r, t);
            let g = ego_to_world(pose, frame, &Vec3::new(x, 0.0, z));
            phi[i] = match first_hit(world, &eye, &g) {
                Some(lambda) => eye.y + lambda * (g.y - eye.y),
                None => 0.0,
            };
        }
    }
    EgoSpaceMap::from_parts(*spec, phi, mask)
}

/// Per ground cell (row-major over `grid`): free space that the eye
/// cannot see because a box blocks the line of sight.
pub fn oracle_occluded_free(world: &World, pose: &CameraPose, frame: &EgoFrame, grid: &GroundGrid) -> Vec<bool> {
    let eye = pose.position;
    let mut out = Vec::with_capacity(grid.len());
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let (x, z) = grid.center(r, c);
            let g = ego_to_world(pose, frame, &Vec3::new(x, 0.0, z));
            let free = world.boxes.iter().all(|b| !b.contains_xz(g.x, g.z));
            out.push(free && first_hit(world, &eye, &g).is_some());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthworld::world::{generate_world, Aabb, Template, WorldParams};

    fn setup(boxes: Vec<Aabb>) -> (World, CameraPose, EgoFrame) {
        let mut w = generate_world(Template::Open, &WorldParams::default(), 0).unwrap();
        w.boxes = boxes;
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.0, 0.3);
        let frame = true_ego_frame(&pose).unwrap();
        (w, pose, frame)
    }

    #[test]
    fn true_frame_matches_pose() {
        let pose = CameraPose::from_yaw_pitch(Vec3::new(2.0, 1.55, -1.0), 1.1, 0.25);
        let f = true_ego_frame(&pose).unwrap();
        assert!((f.eye_height - 1.55).abs() < 1e-12);
        // ego +Z is the heading on the ground
        let ahead = ego_to_world(&pose, &f, &Vec3::new(0.0, 0.0, 1.0));
        assert!((ahead - Vec3::new(2.0 + 1.1f64.sin(), 0.0, -1.0 + 1.1f64.cos())).norm() < 1e-12);
    }

    #[test]
    fn empty_world_is_zero() {
        let (w, pose, frame) = setup(vec![]);
        let spec = GridSpec::default();
        let m = oracle_egospace(&w, &pose, &frame, &spec, &CameraIntrinsics::default_sim()).unwrap();
        for (v, s) in m.phi().iter().zip(m.mask()) {
            if *s == CellState::Observed {
                assert_eq!(*v, 0.0);
            }
        }
        let grid = GroundGrid::new(Default::default(), 0.5).unwrap();
        assert!(oracle_occluded_free(&w, &pose, &frame, &grid).iter().all(|v| !v));
    }

    #[test]
    fn shadow_of_a_box() {
        // 1 m tall wall 4 m ahead (world z), eye 1.6 m: the shadow on the
        // ground ends where the eye ray over the top edge lands,
        // z = 4.2 * 1.6 / 0.6 = 11.2 m behind the back face
        let (w, pose, frame) = setup(vec![Aabb::footprint(-3.0, 4.0, 3.0, 4.2, 1.0)]);
        let grid = GroundGrid::new(
            crate::discovery::Extent { x_min: -0.5, x_max: 0.5, z_min: 0.0, z_max: 14.0 },
            0.1,
        )
        .unwrap();
        let occ = oracle_occluded_free(&w, &pose, &frame, &grid);
        for r in 0..grid.rows {
            let (_, z) = grid.center(r, 5);
            let expect = z > 4.2 && z < 11.2;
            if (z - 4.2).abs() > 1e-6 && (z - 11.2).abs() > 1e-6 {
                assert_eq!(occ[r * grid.cols + 5], expect, "z = {z}");
            }
        }
        let spec = GridSpec::default();
        let m = oracle_egospace(&w, &pose, &frame, &spec, &CameraIntrinsics::default_sim()).unwrap();
        let mid = spec.n_theta / 2;
        for r in 0..spec.n_radius {
            let (x, z) = spec.ground_point(r, mid);
            if m.state(r, mid) != CellState::Observed || x.abs() > 2.5 {
                continue;
            }
            let v = m.at(r, mid);
            if z > 4.25 && z < 11.1 {
                assert!(v > 0.0 && v <= 1.0 + 1e-12, "z {z} phi {v}");
            }
            if z < 3.95 || z > 11.3 {
                assert_eq!(v, 0.0, "z {z}");
            }
        }
    }
}
