use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Plane `normal . p + offset = 0` in camera coordinates, with the normal
/// oriented so the camera center lies on the positive side (`offset > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub normal: Vec3,
    pub offset: f64,
}

impl GroundPlane {
    /// Normalizes and orients the normal toward the camera center.
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !(norm > 1e-12) || !offset.is_finite() {
            return Err(Error::InvalidParameter("degenerate plane normal".into()));
        }
        let (mut n, mut d) = (normal / norm, offset / norm);
        if d < 0.0 {
            n = -n;
            d = -d;
        }
        Ok(GroundPlane { normal: n, offset: d })
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    /// Height of the camera center above the plane.
    pub fn camera_height(&self) -> f64 {
        self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    pub inlier_threshold: f64,
    /// Maximum angle between candidate normal and the prior axis (radians).
    pub angle_tol: f64,
    pub height_tol: f64,
    /// Candidate planes are scored on at most this many points.
    pub max_score_points: usize,
    /// Stop early once a better plane is this unlikely to exist given the
    /// best inlier ratio so far; 1 always runs every iteration.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            iterations: 500,
            inlier_threshold: 0.05,
            angle_tol: 15f64.to_radians(),
            height_tol: 0.5,
            max_score_points: 4000,
            confidence: 0.999,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlaneFit {
    pub plane: GroundPlane,
    /// Indices into the input cloud.
    pub inliers: Vec<usize>,
}

/// RANSAC plane fit restricted to candidates consistent with a gravity
/// prior (compared as an axis, either sign) and a camera-height prior,
/// followed by a least-squares refit on the inliers.
pub fn fit_ground_plane(
    points: &[Vec3],
    gravity_prior: &Vec3,
    height_prior: f64,
    config: &RansacConfig,
) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::EmptyInput(format!("plane fit needs 3 points, got {}", points.len())));
    }
    let axis = gravity_prior.normalize();
    let cos_tol = config.angle_tol.cos();
    let admissible = |p: &GroundPlane| {
        p.normal.dot(&axis).abs() >= cos_tol && (p.offset - height_prior).abs() <= config.height_tol
    };

    let stride = points.len().div_ceil(config.max_score_points.max(1)).max(1);
    let scoring: Vec<&Vec3> = points.iter().step_by(stride).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(usize, GroundPlane)> = None;
    let n = points.len();
    let mut needed = config.iterations;
    for it in 0..config.iterations {
        if it >= needed {
            break;
        }
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let (a, b, c) = (&points[i], &points[j], &points[k]);
        let normal = (b - a).cross(&(c - a));
        let Ok(candidate) = GroundPlane::new(normal, -normal.dot(a)) else {
            continue;
        };
        if !admissible(&candidate) {
            continue;
        }
        let score = scoring
            .iter()
            .filter(|p| candidate.signed_distance(p).abs() < config.inlier_threshold)
            .count();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, candidate));
            if config.confidence < 1.0 {
                let w = score as f64 / scoring.len() as f64;
                let miss = 1.0 - w * w * w;
                if miss <= 0.0 {
                    needed = it + 1;
                } else if miss < 1.0 {
                    let k = (1.0 - config.confidence).ln() / miss.ln();
                    needed = needed.min(it + 1 + k.ceil() as usize);
                }
            }
        }
    }
    let Some((_, mut plane)) = best else {
        return Err(Error::PlaneNotFound("no candidate satisfied the gravity and height priors".into()));
    };

    let mut inliers = collect_inliers(points, &plane, config.inlier_threshold);
    for _ in 0..2 {
        if inliers.len() < 3 {
            break;
        }
        let refit = least_squares_plane(points, &inliers)?;
        if !admissible(&refit) {
            break;
        }
        plane = refit;
        inliers = collect_inliers(points, &plane, config.inlier_threshold);
    }
    Ok(PlaneFit { plane, inliers })
}

fn collect_inliers(points: &[Vec3], plane: &GroundPlane, threshold: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() < threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Total least squares: normal is the smallest-eigenvalue direction of the
/// inlier scatter matrix.
fn least_squares_plane(points: &[Vec3], idx: &[usize]) -> Result<GroundPlane> {
    let inv = 1.0 / idx.len() as f64;
    let centroid = idx.iter().fold(Vec3::zeros(), |acc, &i| acc + points[i]) * inv;
    let mut scatter = Matrix3::zeros();
    for &i in idx {
        let d = points[i] - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let (min_i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("3x3 eigen decomposition");
    let normal: Vec3 = eig.eigenvectors.column(min_i).into_owned();
    GroundPlane::new(normal, -normal.dot(&centroid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_on_y(y: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                pts.push(Vec3::new(-3.0 + 0.2 * i as f64, y, 1.0 + 0.3 * j as f64));
            }
        }
        pts
    }

    #[test]
    fn noise_free_plane() {
        // ground 1.6 m below a level camera (camera +y is down)
        let pts = grid_on_y(1.6);
        let fit = fit_ground_plane(&pts, &Vec3::new(0.0, -1.0, 0.0), 1.6, &RansacConfig::default())
            .unwrap();
        assert_relative_eq!(fit.plane.normal, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-9);
        assert_relative_eq!(fit.plane.camera_height(), 1.6, epsilon = 1e-6);
        assert_eq!(fit.inliers.len(), pts.len());
    }

    #[test]
    fn height_prior_picks_the_right_parallel_plane() {
        let mut pts = grid_on_y(1.6);
        // a larger parallel plane only 0.3 m below the camera (a table top)
        for i in 0..40 {
            for j in 0..40 {
                pts.push(Vec3::new(-2.0 + 0.1 * i as f64, 0.3, 1.0 + 0.1 * j as f64));
            }
        }
        let fit = fit_ground_plane(&pts, &Vec3::new(0.0, 1.0, 0.0), 1.6, &RansacConfig::default())
            .unwrap();
        assert_relative_eq!(fit.plane.camera_height(), 1.6, epsilon = 1e-6);
    }

    #[test]
    fn walls_are_rejected_by_the_gravity_prior() {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                pts.push(Vec3::new(-1.6, -1.0 + 0.1 * i as f64, 1.0 + 0.3 * j as f64));
            }
        }
        let err = fit_ground_plane(&pts, &Vec3::new(0.0, 1.0, 0.0), 1.6, &RansacConfig::default());
        assert!(matches!(err, Err(Error::PlaneNotFound(_))));
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Vec3::zeros(), Vec3::x()];
        assert!(fit_ground_plane(&pts, &Vec3::y(), 1.6, &RansacConfig::default()).is_err());
    }

    #[test]
    fn orientation_puts_camera_on_positive_side() {
        let p = GroundPlane::new(Vec3::new(0.0, 2.0, 0.0), -3.2).unwrap();
        assert_relative_eq!(p.normal, Vec3::new(0.0, -1.0, 0.0));
        assert_relative_eq!(p.offset, 1.6);
    }
}
