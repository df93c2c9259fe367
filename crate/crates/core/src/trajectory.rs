//! Ground-plane trajectories in the ego frame and their linear subspace
//! `X = B beta + mean`.
//!
//! A trajectory of `F` samples is flattened as `[x_1, z_1, ..., x_F, z_F]`.
//! Sample `i` (0-based here) is the position `(i + 1) * dt` seconds ahead.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraPose, EgoFrame, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn new(points: Vec<[f64; 2]>, dt: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("trajectory needs at least 2 samples".into()));
        }
        if !(dt > 0.0) || points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("trajectory has non-finite values".into()));
        }
        Ok(Trajectory { dt, points })
    }

    pub fn horizon(&self) -> usize {
        self.points.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.points.len() * 2, self.points.iter().flatten().copied())
    }

    pub fn from_vector(v: &DVector<f64>, dt: f64) -> Result<Self> {
        let points = v.as_slice().chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        Trajectory::new(points, dt)
    }

    /// Distance walked from the origin through every sample.
    pub fn path_length(&self) -> f64 {
        let mut prev = [0.0, 0.0];
        let mut total = 0.0;
        for p in &self.points {
            total += (p[0] - prev[0]).hypot(p[1] - prev[1]);
            prev = *p;
        }
        total
    }

    /// Largest per-sample distance to `other`.
    pub fn max_point_error(&self, other: &Trajectory) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max)
    }

    /// Root mean squared per-sample distance to `other`.
    pub fn rms_error(&self, other: &Trajectory) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            .sum();
        (s / self.points.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBasis {
    pub mean: DVector<f64>,
    /// `2F x K`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub dt: f64,
}

impl TrajectoryBasis {
    pub fn new(mean: DVector<f64>, basis: DMatrix<f64>, dt: f64) -> Result<Self> {
        if mean.len() != basis.nrows() {
            return Err(Error::DimensionMismatch { expected: basis.nrows(), got: mean.len() });
        }
        if mean.len() < 4 || mean.len() % 2 != 0 {
            return Err(Error::InvalidParameter("basis rows must be 2F with F >= 2".into()));
        }
        Ok(TrajectoryBasis { mean, basis, dt })
    }

    pub fn horizon(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Trajectory coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients(pub Vec<f64>);

impl Coefficients {
    pub fn zeros(k: usize) -> Self {
        Coefficients(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Future camera centers `f+1 ..= f+F` expressed in frame `f`'s ego
/// coordinates and dropped onto the ground.
pub fn ego_project_future(
    poses: &[CameraPose],
    f: usize,
    horizon: usize,
    frame: &EgoFrame,
    dt: f64,
) -> Result<Trajectory> {
    if f + horizon >= poses.len() {
        return Err(Error::Horizon(format!(
            "frame {f} needs {horizon} future poses, sequence has {}",
            poses.len()
        )));
    }
    let current = &poses[f];
    let points = poses[f + 1..=f + horizon]
        .iter()
        .map(|p| {
            let ego = frame.camera_to_ego(&current.world_to_camera(&p.position));
            [ego.x, ego.z]
        })
        .collect();
    Trajectory::new(points, dt)
}

/// Ego-frame future in camera coordinates of frame `f`, without dropping
/// onto the ground.
pub fn camera_future(poses: &[CameraPose], f: usize, horizon: usize) -> Result<Vec<Vec3>> {
    if f + horizon >= poses.len() {
        return Err(Error::Horizon(format!("frame {f} lacks {horizon} future poses")));
    }
    let current = &poses[f];
    Ok(poses[f + 1..=f + horizon].iter().map(|p| current.world_to_camera(&p.position)).collect())
}

#[derive(Debug, Clone)]
pub struct PcaFit {
    pub basis: TrajectoryBasis,
    /// Explained variance ratio of each retained column.
    pub explained_variance_ratio: Vec<f64>,
    /// Number of components with non-negligible variance (capped at K).
    pub effective_rank: usize,
}

impl PcaFit {
    /// Set when the data cannot support K independent directions; the
    /// trailing columns are an arbitrary orthonormal completion.
    pub fn rank_deficient(&self) -> bool {
        self.effective_rank < self.basis.dim()
    }
}

/// Principal component basis of a trajectory set.
///
/// With fewer than `K + 1` trajectories (or a degenerate set) the result is
/// flagged through [`PcaFit::rank_deficient`] instead of failing.
pub fn learn_pca_basis(trajectories: &[Trajectory], k: usize) -> Result<PcaFit> {
    let first = trajectories.first().ok_or_else(|| Error::EmptyInput("no trajectories".into()))?;
    let (f, dt) = (first.horizon(), first.dt);
    let dim = 2 * f;
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!("K = {k} outside 1..={dim}")));
    }
    if let Some(t) = trajectories.iter().find(|t| t.horizon() != f || t.dt != dt) {
        return Err(Error::DimensionMismatch { expected: f, got: t.horizon() });
    }
    let n = trajectories.len() as f64;
    let mut mean = DVector::zeros(dim);
    for t in trajectories {
        mean += t.to_vector();
    }
    mean /= n;
    let mut cov = DMatrix::zeros(dim, dim);
    for t in trajectories {
        let c = t.to_vector() - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= n;
    // symmetrize against round-off before the eigen solve
    let cov = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if total <= 1e-24 * (1.0 + mean.norm_squared()) {
        // round-off only: the set has no spread
        total = 0.0;
    }
    let tol = 1e-12 * total;

    let mut basis = DMatrix::zeros(dim, k);
    let mut ratio = Vec::with_capacity(k);
    let mut effective_rank = 0;
    for (c, &i) in order.iter().take(k).enumerate() {
        let mut col: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        // deterministic sign: largest-magnitude entry positive
        let (imax, _) = col.iter().enumerate().fold((0, 0.0f64), |best, (j, v)| {
            if v.abs() > best.1 + 1e-12 { (j, v.abs()) } else { best }
        });
        if col[imax] < 0.0 {
            col = -col;
        }
        basis.set_column(c, &col);
        let lambda = eig.eigenvalues[i].max(0.0);
        ratio.push(if total > 0.0 { lambda / total } else { 0.0 });
        if total > 0.0 && lambda > tol {
            effective_rank += 1;
        }
    }
    Ok(PcaFit { basis: TrajectoryBasis::new(mean, basis, dt)?, explained_variance_ratio: ratio, effective_rank })
}

/// Block DCT-II basis, zero mean: the first `K` columns of the sequence
/// `(x_0, z_0, x_1, z_1, ...)` where `x_j` / `z_j` is frequency `j` on the
/// x / z channel.
pub fn make_dct_basis(horizon: usize, k: usize, dt: f64) -> Result<TrajectoryBasis> {
    if k == 0 {
        return Err(Error::InvalidParameter("DCT basis needs at least one column".into()));
    }
    if k > 2 * horizon {
        return Err(Error::InvalidParameter(format!("K = {k} exceeds 2F = {}", 2 * horizon)));
    }
    let f = horizon as f64;
    let mut basis = DMatrix::zeros(2 * horizon, k);
    for col in 0..k {
        let (freq, channel) = (col / 2, col % 2);
        let scale = if freq == 0 { (1.0 / f).sqrt() } else { (2.0 / f).sqrt() };
        for n in 0..horizon {
            basis[(2 * n + channel, col)] = scale * (std::f64::consts::PI * (n as f64 + 0.5) * freq as f64 / f).cos();
        }
    }
    TrajectoryBasis::new(DVector::zeros(2 * horizon), basis, dt)
}

/// `beta = B^T (X - mean)`.
pub fn fit_coefficients(traj: &Trajectory, basis: &TrajectoryBasis) -> Result<Coefficients> {
    if traj.horizon() != basis.horizon() {
        return Err(Error::DimensionMismatch { expected: basis.horizon(), got: traj.horizon() });
    }
    let centered = traj.to_vector() - &basis.mean;
    Ok(Coefficients(basis.basis.tr_mul(&centered).iter().copied().collect()))
}

/// `X = B beta + mean`.
pub fn reconstruct(beta: &Coefficients, basis: &TrajectoryBasis) -> Result<Trajectory> {
    check_dim(beta, basis)?;
    let b = DVector::from_column_slice(&beta.0);
    Trajectory::from_vector(&(&basis.basis * b + &basis.mean), basis.dt)
}

/// Sample `index` (0-based) of `B beta + mean`.
pub fn point_at(beta: &Coefficients, basis: &TrajectoryBasis, index: usize) -> Result<[f64; 2]> {
    check_dim(beta, basis)?;
    if index >= basis.horizon() {
        return Err(Error::IndexOutOfRange { index, len: basis.horizon() });
    }
    Ok(point_unchecked(&beta.0, basis, index))
}

pub(crate) fn point_unchecked(beta: &[f64], basis: &TrajectoryBasis, index: usize) -> [f64; 2] {
    let (rx, rz) = (2 * index, 2 * index + 1);
    let mut x = basis.mean[rx];
    let mut z = basis.mean[rz];
    for (c, b) in beta.iter().enumerate() {
        x += basis.basis[(rx, c)] * b;
        z += basis.basis[(rz, c)] * b;
    }
    [x, z]
}

fn check_dim(beta: &Coefficients, basis: &TrajectoryBasis) -> Result<()> {
    if beta.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: beta.len() });
    }
    Ok(())
}

/// Fraction of trajectories whose worst reconstructed sample stays within
/// `tolerance` times the trajectory's path length.
pub fn reconstruction_accuracy(trajectories: &[Trajectory], basis: &TrajectoryBasis, tolerance: f64) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("no trajectories".into()));
    }
    let mut ok = 0usize;
    for t in trajectories {
        let rec = reconstruct(&fit_coefficients(t, basis)?, basis)?;
        if rec.max_point_error(t) <= tolerance * t.path_length() {
            ok += 1;
        }
    }
    Ok(ok as f64 / trajectories.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_ego_frame, GroundPlane};
    use approx::assert_relative_eq;

    fn level_frame() -> EgoFrame {
        build_ego_frame(&GroundPlane::new(Vec3::new(0.0, -1.0, 0.0), 1.6).unwrap(), &Vec3::z()).unwrap()
    }

    fn line_family(n: usize) -> Vec<Trajectory> {
        // mean + t * d with t spread over [-1, 1]
        (0..n)
            .map(|j| {
                let t = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
                let pts = (0..10).map(|i| [0.3 * i as f64 * t, 0.6 * (i + 1) as f64]).collect();
                Trajectory::new(pts, 0.5).unwrap()
            })
            .collect()
    }

    #[test]
    fn stationary_camera_projects_to_origin() {
        let pose = CameraPose::from_yaw_pitch(Vec3::new(2.0, 1.6, 3.0), 0.3, 0.0);
        let poses = vec![pose; 6];
        let t = ego_project_future(&poses, 0, 5, &level_frame(), 0.5).unwrap();
        assert!(t.points.iter().all(|p| p[0].abs() < 1e-12 && p[1].abs() < 1e-12));
    }

    #[test]
    fn straight_walk_along_gaze() {
        let yaw = 0.9f64;
        let poses: Vec<_> = (0..8)
            .map(|i| {
                let s = 0.5 * i as f64;
                CameraPose::from_yaw_pitch(Vec3::new(s * yaw.sin(), 1.6, s * yaw.cos()), yaw, 0.0)
            })
            .collect();
        let t = ego_project_future(&poses, 0, 7, &level_frame(), 0.5).unwrap();
        for (i, p) in t.points.iter().enumerate() {
            assert_relative_eq!(p[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(p[1], 0.5 * (i + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn horizon_error() {
        let poses = vec![CameraPose::from_yaw_pitch(Vec3::zeros(), 0.0, 0.0); 4];
        assert!(matches!(ego_project_future(&poses, 1, 3, &level_frame(), 0.5), Err(Error::Horizon(_))));
    }

    #[test]
    fn pca_on_identical_trajectories() {
        let t = line_family(5)[2].clone();
        let fit = learn_pca_basis(&vec![t.clone(); 6], 3).unwrap();
        assert_relative_eq!(fit.basis.mean, t.to_vector(), epsilon = 1e-12);
        assert!(fit.explained_variance_ratio.iter().all(|r| *r == 0.0));
        assert_eq!(fit.effective_rank, 0);
        assert!(fit.rank_deficient());
        let g = fit.basis.basis.tr_mul(&fit.basis.basis);
        assert_relative_eq!(g, DMatrix::identity(3, 3), epsilon = 1e-9);
    }

    #[test]
    fn pca_on_line_family_finds_the_direction() {
        let trajs = line_family(9);
        let fit = learn_pca_basis(&trajs, 1).unwrap();
        assert_relative_eq!(fit.explained_variance_ratio[0], 1.0, epsilon = 1e-9);
        let d = (trajs[8].to_vector() - trajs[0].to_vector()).normalize();
        let col = fit.basis.basis.column(0);
        assert_relative_eq!(col.dot(&d).abs(), 1.0, epsilon = 1e-9);
        assert_eq!(fit.effective_rank, 1);
    }

    #[test]
    fn pca_with_too_few_samples_is_rank_deficient() {
        let fit = learn_pca_basis(&line_family(3), 3).unwrap();
        assert_eq!(fit.effective_rank, 1);
        assert!(fit.rank_deficient());
        assert!(learn_pca_basis(&[], 3).is_err());
    }

    #[test]
    fn dct_dc_terms() {
        let b = make_dct_basis(4, 2, 0.5).unwrap();
        for n in 0..4 {
            assert_relative_eq!(b.basis[(2 * n, 0)], 0.5);
            assert_relative_eq!(b.basis[(2 * n + 1, 0)], 0.0);
            assert_relative_eq!(b.basis[(2 * n + 1, 1)], 0.5);
        }
        assert!(make_dct_basis(4, 0, 0.5).is_err());
        // an odd size keeps the leading columns of the next even one
        assert_eq!(make_dct_basis(4, 3, 0.5).unwrap().basis.column(2), make_dct_basis(4, 4, 0.5).unwrap().basis.column(2));
        assert!(make_dct_basis(4, 10, 0.5).is_err());
    }

    #[test]
    fn complete_dct_reconstructs_exactly() {
        let b = make_dct_basis(10, 20, 0.5).unwrap();
        let g = b.basis.tr_mul(&b.basis);
        assert_relative_eq!(g, DMatrix::identity(20, 20), epsilon = 1e-12);
        let t = Trajectory::new((0..10).map(|i| [(i as f64).sin(), (i * i) as f64 * 0.1]).collect(), 0.5).unwrap();
        let rec = reconstruct(&fit_coefficients(&t, &b).unwrap(), &b).unwrap();
        assert!(rec.max_point_error(&t) < 1e-12);
    }

    #[test]
    fn mean_and_aligned_coefficients() {
        let fit = learn_pca_basis(&line_family(9), 1).unwrap();
        let b = &fit.basis;
        let mean = Trajectory::from_vector(&b.mean, 0.5).unwrap();
        assert_relative_eq!(fit_coefficients(&mean, b).unwrap().0[0], 0.0, epsilon = 1e-12);
        let shifted = Trajectory::from_vector(&(&b.mean + b.basis.column(0) * 2.0), 0.5).unwrap();
        assert_relative_eq!(fit_coefficients(&shifted, b).unwrap().0[0], 2.0, epsilon = 1e-12);
        let zero = reconstruct(&Coefficients::zeros(1), b).unwrap();
        assert_relative_eq!(zero.to_vector(), b.mean, epsilon = 1e-15);
    }

    #[test]
    fn point_at_agrees_with_reconstruct() {
        let b = make_dct_basis(6, 4, 0.5).unwrap();
        let beta = Coefficients(vec![0.3, -1.2, 2.0, 0.7]);
        let t = reconstruct(&beta, &b).unwrap();
        for i in 0..6 {
            assert_eq!(point_at(&beta, &b, i).unwrap(), t.points[i]);
        }
        assert!(matches!(point_at(&beta, &b, 6), Err(Error::IndexOutOfRange { .. })));
        assert!(point_at(&Coefficients::zeros(3), &b, 0).is_err());
    }

    #[test]
    fn point_at_jacobian_is_the_basis_rows() {
        let b = make_dct_basis(6, 4, 0.5).unwrap();
        let beta = Coefficients(vec![0.3, -1.2, 2.0, 0.7]);
        let h = 1e-6;
        for i in 0..6 {
            for c in 0..4 {
                let mut up = beta.clone();
                let mut dn = beta.clone();
                up.0[c] += h;
                dn.0[c] -= h;
                let pu = point_at(&up, &b, i).unwrap();
                let pd = point_at(&dn, &b, i).unwrap();
                assert_relative_eq!((pu[0] - pd[0]) / (2.0 * h), b.basis[(2 * i, c)], epsilon = 1e-8);
                assert_relative_eq!((pu[1] - pd[1]) / (2.0 * h), b.basis[(2 * i + 1, c)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn path_length_counts_from_origin() {
        let t = Trajectory::new(vec![[0.0, 1.0], [0.0, 2.0], [1.0, 2.0]], 0.5).unwrap();
        assert_relative_eq!(t.path_length(), 3.0);
    }
}
