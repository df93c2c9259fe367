use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::substream;
use super::world::{Aabb, World};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraPose, DepthImage, Vec3};

/// Entry and exit parameters of `origin + t dir` through the box, or
/// `None` when the line misses it.
pub fn ray_box(origin: &Vec3, dir: &Vec3, b: &Aabb) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if dir[a].abs() < 1e-15 {
            if origin[a] < b.min[a] || origin[a] > b.max[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[a];
        let (mut near, mut far) = ((b.min[a] - origin[a]) * inv, (b.max[a] - origin[a]) * inv);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

/// First hit of the ray with the ground or a box, as a ray parameter.
pub fn cast(world: &World, origin: &Vec3, dir: &Vec3) -> Option<f64> {
    cast_boxes(&world.boxes, origin, dir)
}

fn cast_boxes<'a>(boxes: impl IntoIterator<Item = &'a Aabb>, origin: &Vec3, dir: &Vec3) -> Option<f64> {
    let mut best = if dir.y < 0.0 { Some(-origin.y / dir.y) } else { None };
    for b in boxes {
        if let Some((t0, t1)) = ray_box(origin, dir, b) {
            let t = if t0 >= 0.0 { t0 } else if t1 >= 0.0 { 0.0 } else { continue };
            if best.is_none_or(|cur| t < cur) {
                best = Some(t);
            }
        }
    }
    best
}

/// Z-depth image by analytic ray casting through pixel centers. Rays that
/// hit nothing (sky) are invalid; `noise_sigma > 0` adds seeded Gaussian
/// noise to valid depths.
pub fn render_depth(
    world: &World,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    noise_sigma: f64,
    seed: u64,
) -> Result<DepthImage> {
    intrinsics.validate()?;
    if !(pose.position.y > 0.0) {
        return Err(Error::InvalidParameter("camera must be above the ground".into()));
    }
    // every ray point has positive camera z, so boxes entirely behind the
    // camera cannot be hit
    let visible: Vec<&Aabb> = world
        .boxes
        .iter()
        .filter(|b| {
            (0..8).any(|c| {
                let corner = Vec3::new(
                    if c & 1 == 0 { b.min[0] } else { b.max[0] },
                    if c & 2 == 0 { b.min[1] } else { b.max[1] },
                    if c & 4 == 0 { b.min[2] } else { b.max[2] },
                );
                pose.world_to_camera(&corner).z > -1e-9
            })
        })
        .collect();
    let depth: Vec<f64> = (0..intrinsics.height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let visible = &visible;
            (0..intrinsics.width).map(move |col| {
                // camera ray with unit z, so the ray parameter is the z-depth
                let d = pose.rotation * intrinsics.ray(col as f64, row as f64);
                cast_boxes(visible.iter().copied(), &pose.position, &d).unwrap_or(f64::NAN)
            })
        })
        .collect();
    let mut depth = depth;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = substream(seed, "noise");
        for z in depth.iter_mut().filter(|z| z.is_finite()) {
            *z = (*z + normal.sample(&mut rng)).max(1e-3);
        }
    }
    DepthImage::from_raw(*intrinsics, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthworld::world::{generate_world, Template, WorldParams};
    use approx::assert_relative_eq;

    fn open() -> World {
        generate_world(Template::Open, &WorldParams::default(), 0).unwrap()
    }

    #[test]
    fn level_camera_over_floor() {
        let k = CameraIntrinsics::default_sim();
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.3, 0.0);
        let img = render_depth(&open(), &pose, &k, 0.0, 0).unwrap();
        for row in 0..k.height {
            for col in (0..k.width).step_by(17) {
                let ray_y = (row as f64 - k.cy) / k.fy;
                match img.get(row, col) {
                    Some(z) => {
                        assert!(ray_y > 0.0);
                        assert_relative_eq!(z, 1.6 / ray_y, max_relative = 1e-12);
                    }
                    None => assert!(ray_y <= 0.0),
                }
            }
        }
    }

    #[test]
    fn fronto_parallel_face() {
        let mut w = open();
        w.boxes.push(Aabb::footprint(-0.5, 3.0, 0.5, 4.0, 2.0));
        let k = CameraIntrinsics::default_sim();
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.0, 0.0), 0.0, 0.0);
        // principal point sits between pixels; the face covers the centre block
        let img = render_depth(&w, &pose, &k, 0.0, 0).unwrap();
        assert_eq!(img.get(59, 79), Some(3.0));
        assert_eq!(img.get(60, 80), Some(3.0));
    }

    #[test]
    fn noise_is_seeded() {
        let k = CameraIntrinsics::default_sim();
        let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.0, 0.2);
        let a = render_depth(&open(), &pose, &k, 0.05, 7).unwrap();
        let b = render_depth(&open(), &pose, &k, 0.05, 7).unwrap();
        let c = render_depth(&open(), &pose, &k, 0.0, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
