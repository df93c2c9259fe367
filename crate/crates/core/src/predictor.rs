//! Trajectory prediction: retrieve neighbors by EgoSpace feature, then
//! bend each retrieved trajectory so it avoids space that is blocked in
//! the test scene but was free along the retrieved path.

use serde::{Deserialize, Serialize};

use crate::database::{knn_query, DepthDatabase, EntryId, TrainingDatabase, TrainingEntry};
use crate::egospace::{sample_phi, sample_phi_gradient, EgoSpaceMap};
use crate::error::{Error, Result};
use crate::geometry::{DepthImage, EgoFrame, Vec3};
use crate::observe::{observe, ObserveConfig, Observation};
use crate::trajectory::{point_unchecked, reconstruct, Coefficients, Trajectory, TrajectoryBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionConfig {
    pub k: usize,
    /// Zero disables refinement.
    pub max_iters: usize,
    pub cost_tol: f64,
    /// Initial line-search step, in coefficient units along the unit
    /// descent direction.
    pub step_init: f64,
    /// Weight of `||beta - beta_init||^2`.
    pub reg_lambda: f64,
    pub fd_step: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            k: 30,
            max_iters: 100,
            cost_tol: 1e-4,
            step_init: 0.5,
            reg_lambda: 0.0,
            fd_step: 1e-4,
            armijo: 1e-4,
            max_halvings: 30,
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k >= 1
            && self.cost_tol > 0.0
            && self.step_init > 0.0
            && self.reg_lambda >= 0.0
            && self.fd_step > 0.0
            && self.armijo > 0.0
            && self.armijo < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid prediction config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStatus {
    /// Cost decrease fell below tolerance.
    Converged,
    /// Zero cost or zero gradient at the current iterate.
    Plateau,
    /// No step satisfied the sufficient-decrease condition.
    LineSearchFailed,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTrajectory {
    pub beta: Coefficients,
    pub beta_init: Coefficients,
    pub source: EntryId,
    /// Position in the neighbor list, 0 = closest.
    pub knn_rank: usize,
    pub knn_distance: f64,
    pub init_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub status: RefineStatus,
    /// Objective after each accepted step, starting with the initial value.
    pub cost_history: Vec<f64>,
}

/// Sum of map values along the trajectory.
pub fn ground_cost(beta: &[f64], basis: &TrajectoryBasis, map: &EgoSpaceMap) -> Result<f64> {
    check(beta, basis)?;
    Ok((0..basis.horizon())
        .map(|i| {
            let p = point_unchecked(beta, basis, i);
            sample_phi(map, p[0], p[1])
        })
        .sum())
}

/// Sum over samples of how much more blocked the test map is than the
/// retrieved map was along the retrieved trajectory.
pub fn hinge_cost(beta: &[f64], basis: &TrajectoryBasis, map: &EgoSpaceMap, entry: &TrainingEntry) -> Result<f64> {
    check(beta, basis)?;
    check_entry(entry, basis)?;
    Ok(hinge_unchecked(beta, basis, map, &entry.traj_cost))
}

fn hinge_unchecked(beta: &[f64], basis: &TrajectoryBasis, map: &EgoSpaceMap, reference: &[f64]) -> f64 {
    reference
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = point_unchecked(beta, basis, i);
            (sample_phi(map, p[0], p[1]) - r).max(0.0)
        })
        .sum()
}

/// Analytic gradient of [`hinge_cost`] with respect to `beta`, valid
/// away from cell and hinge boundaries.
pub fn hinge_cost_gradient(
    beta: &[f64],
    basis: &TrajectoryBasis,
    map: &EgoSpaceMap,
    entry: &TrainingEntry,
) -> Result<Vec<f64>> {
    check(beta, basis)?;
    check_entry(entry, basis)?;
    let mut grad = vec![0.0; beta.len()];
    for (i, r) in entry.traj_cost.iter().enumerate() {
        let p = point_unchecked(beta, basis, i);
        let (v, [gx, gz]) = sample_phi_gradient(map, p[0], p[1]);
        if v > *r {
            for (c, g) in grad.iter_mut().enumerate() {
                *g += gx * basis.basis[(2 * i, c)] + gz * basis.basis[(2 * i + 1, c)];
            }
        }
    }
    Ok(grad)
}

fn check(beta: &[f64], basis: &TrajectoryBasis) -> Result<()> {
    if beta.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: beta.len() });
    }
    Ok(())
}

fn check_entry(entry: &TrainingEntry, basis: &TrajectoryBasis) -> Result<()> {
    if entry.traj_cost.len() != basis.horizon() {
        return Err(Error::DimensionMismatch { expected: basis.horizon(), got: entry.traj_cost.len() });
    }
    Ok(())
}

/// Local descent on the hinge cost from the entry's own coefficients.
pub fn refine(
    basis: &TrajectoryBasis,
    map: &EgoSpaceMap,
    entry: &TrainingEntry,
    config: &PredictionConfig,
) -> Result<PredictedTrajectory> {
    config.validate()?;
    check(&entry.beta.0, basis)?;
    check_entry(entry, basis)?;
    let init = entry.beta.0.clone();
    let objective = |b: &[f64]| {
        let reg: f64 = if config.reg_lambda > 0.0 {
            config.reg_lambda * b.iter().zip(&init).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        } else {
            0.0
        };
        hinge_unchecked(b, basis, map, &entry.traj_cost) + reg
    };

    let mut beta = init.clone();
    let mut cost = objective(&beta);
    let init_cost = hinge_unchecked(&beta, basis, map, &entry.traj_cost);
    let mut history = vec![cost];
    let mut status = RefineStatus::MaxIters;
    let mut iterations = 0;
    let mut probe = beta.clone();
    while iterations < config.max_iters {
        if cost <= 0.0 {
            status = RefineStatus::Plateau;
            break;
        }
        let mut grad = vec![0.0; beta.len()];
        for c in 0..beta.len() {
            probe.copy_from_slice(&beta);
            probe[c] = beta[c] + config.fd_step;
            let plus = objective(&probe);
            probe[c] = beta[c] - config.fd_step;
            let minus = objective(&probe);
            grad[c] = (plus - minus) / (2.0 * config.fd_step);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            status = RefineStatus::Plateau;
            break;
        }
        iterations += 1;
        let mut step = config.step_init;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            for c in 0..beta.len() {
                probe[c] = beta[c] - step * grad[c] / norm;
            }
            let trial = objective(&probe);
            if trial <= cost - config.armijo * step * norm {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(trial) = accepted else {
            status = RefineStatus::LineSearchFailed;
            break;
        };
        let decrease = cost - trial;
        beta.copy_from_slice(&probe);
        cost = trial;
        history.push(cost);
        if decrease < config.cost_tol {
            status = RefineStatus::Converged;
            break;
        }
    }
    if config.max_iters == 0 {
        status = RefineStatus::MaxIters;
    }
    let final_cost = hinge_unchecked(&beta, basis, map, &entry.traj_cost);
    Ok(PredictedTrajectory {
        beta: Coefficients(beta),
        beta_init: entry.beta.clone(),
        source: entry.id(),
        knn_rank: 0,
        knn_distance: 0.0,
        init_cost,
        final_cost,
        iterations,
        status,
        cost_history: history,
    })
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub observation: Observation,
    pub pitch_bin: u8,
    /// Fewer than `k` entries were available in the pitch bin.
    pub truncated: bool,
    /// Sorted by final cost, then neighbor rank.
    pub candidates: Vec<PredictedTrajectory>,
}

impl Prediction {
    pub fn trajectories(&self, basis: &TrajectoryBasis) -> Vec<Trajectory> {
        self.candidates.iter().map(|c| reconstruct(&c.beta, basis).expect("dimensions checked")).collect()
    }
}

pub fn predict(
    depth: &DepthImage,
    db: &TrainingDatabase,
    observe_config: &ObserveConfig,
    config: &PredictionConfig,
) -> Result<Prediction> {
    let observation = observe(depth, db.grid(), observe_config)?;
    predict_from_observation(observation, db, config)
}

pub fn predict_from_observation(
    observation: Observation,
    db: &TrainingDatabase,
    config: &PredictionConfig,
) -> Result<Prediction> {
    config.validate()?;
    if db.is_empty() {
        return Err(Error::EmptyInput("training database is empty".into()));
    }
    let knn = knn_query(db, &observation.map, observation.pitch, config.k)?;
    let mut candidates = knn
        .neighbors
        .iter()
        .map(|n| {
            let mut p = refine(db.basis(), &observation.map, n.entry, config)?;
            p.knn_rank = n.rank;
            p.knn_distance = n.distance;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| a.final_cost.total_cmp(&b.final_cost).then(a.knn_rank.cmp(&b.knn_rank)));
    Ok(Prediction { pitch_bin: knn.bin, truncated: knn.truncated, candidates, observation })
}

/// Straight walk along the gaze at the database's mean speed.
pub fn baseline_straight(db: &TrainingDatabase) -> Trajectory {
    straight_line(db.mean_speed(), db.basis().dt, db.basis().horizon())
}

pub fn straight_line(speed: f64, dt: f64, horizon: usize) -> Trajectory {
    let points = (1..=horizon).map(|i| [0.0, speed * dt * i as f64]).collect();
    Trajectory { dt, points }
}

/// A baseline trajectory in the test frame, on the ground (`ego`) and in
/// camera coordinates.
#[derive(Debug, Clone)]
pub struct BaselineTrajectory {
    pub source: EntryId,
    pub ego: Trajectory,
    pub camera: Vec<Vec3>,
}

/// Depth-feature retrieval; the retrieved camera-frame future is reused
/// verbatim in the test camera. `ego` holds its ground-plane footprint
/// in the test frame.
pub fn baseline_pure2d(depth: &DepthImage, db: &DepthDatabase, test_frame: &EgoFrame, k: usize) -> Result<Vec<BaselineTrajectory>> {
    Ok(db
        .query(depth, k)?
        .into_iter()
        .map(|(e, _)| {
            let points = e
                .camera_trajectory
                .iter()
                .map(|p| {
                    let q = test_frame.camera_to_ego(p);
                    [q.x, q.z]
                })
                .collect();
            BaselineTrajectory {
                source: EntryId { scene_id: e.scene_id, frame_id: e.frame_id },
                ego: Trajectory { dt: db.dt(), points },
                camera: e.camera_trajectory.clone(),
            }
        })
        .collect())
}

/// Depth-feature retrieval with the retrieved ground trajectory placed on
/// the test frame's ground plane.
pub fn baseline_groundplane2d(
    depth: &DepthImage,
    db: &DepthDatabase,
    test_frame: &EgoFrame,
    k: usize,
) -> Result<Vec<BaselineTrajectory>> {
    Ok(db
        .query(depth, k)?
        .into_iter()
        .map(|(e, _)| BaselineTrajectory {
            source: EntryId { scene_id: e.scene_id, frame_id: e.frame_id },
            ego: e.ego_trajectory.clone(),
            camera: e
                .ego_trajectory
                .points
                .iter()
                .map(|p| test_frame.ego_to_camera(&Vec3::new(p[0], 0.0, p[1])))
                .collect(),
        })
        .collect())
}

/// EgoSpace retrieval without refinement.
pub fn baseline_egospace_noopt(
    observation: Observation,
    db: &TrainingDatabase,
    config: &PredictionConfig,
) -> Result<Prediction> {
    predict_from_observation(observation, db, &PredictionConfig { max_iters: 0, ..*config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egospace::{CellState, GridSpec};
    use crate::trajectory::make_dct_basis;

    fn map_with(f: impl Fn(f64, f64) -> f64) -> EgoSpaceMap {
        let spec = GridSpec::default();
        let mut phi = vec![0.0; spec.cell_count()];
        for r in 0..spec.n_radius {
            for t in 0..spec.n_theta {
                let (x, z) = spec.ground_point(r, t);
                phi[spec.index(r, t)] = f(x, z);
            }
        }
        let n = phi.len();
        EgoSpaceMap::from_parts(spec, phi, vec![CellState::Observed; n]).unwrap()
    }

    fn entry(beta: Vec<f64>, traj_cost: Vec<f64>) -> TrainingEntry {
        TrainingEntry {
            scene_id: 0,
            frame_id: 0,
            pitch_bin: 0,
            pitch: 0.0,
            feature: vec![],
            beta: Coefficients(beta),
            traj_cost,
        }
    }

    fn basis() -> TrajectoryBasis {
        // straight walk at 1.2 m/s as the mean, DCT deviations
        let dct = make_dct_basis(30, 6, 0.5).unwrap();
        let mean = straight_line(1.2, 0.5, 30).to_vector();
        TrajectoryBasis::new(mean, dct.basis, 0.5).unwrap()
    }

    #[test]
    fn ground_cost_of_free_and_constant_maps() {
        let b = basis();
        let beta = vec![0.3, -0.2, 0.1, 0.0, 0.05, 0.0];
        assert_eq!(ground_cost(&beta, &b, &map_with(|_, _| 0.0)).unwrap(), 0.0);
        let one = map_with(|_, _| 1.0);
        let c = ground_cost(&vec![0.0; 6], &b, &one).unwrap();
        // every sample lies between r_min and r_max
        assert!((c - 30.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn hinge_reduces_and_saturates() {
        let b = basis();
        let map = map_with(|x, z| (0.3 * x + 0.05 * z).abs().min(2.0));
        let beta = vec![0.4, 0.2, -0.3, 0.1, 0.0, 0.2];
        let zero = entry(beta.clone(), vec![0.0; 30]);
        assert_eq!(hinge_cost(&beta, &b, &map, &zero).unwrap(), ground_cost(&beta, &b, &map).unwrap());
        let sat = entry(beta.clone(), vec![2.0; 30]);
        assert_eq!(hinge_cost(&beta, &b, &map, &sat).unwrap(), 0.0);
    }

    #[test]
    fn hinge_partial_overlap() {
        let b = basis();
        let map = map_with(|_, _| 1.0);
        let e = entry(vec![0.0; 6], vec![0.6; 30]);
        let c = hinge_cost(&e.beta.0, &b, &map, &e).unwrap();
        assert!((c - 30.0 * 0.4).abs() < 1e-9);
    }

    #[test]
    fn zero_cost_is_a_plateau() {
        let b = basis();
        let e = entry(vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0.0; 30]);
        let p = refine(&b, &map_with(|_, _| 0.0), &e, &PredictionConfig::default()).unwrap();
        assert_eq!(p.beta, e.beta);
        assert_eq!(p.status, RefineStatus::Plateau);
        assert_eq!(p.iterations, 0);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let b = basis();
        let map = map_with(|x, z| (0.5 + 0.4 * (0.7 * x).sin() * (0.3 * z).cos()).clamp(0.0, 2.0));
        let e = entry(vec![0.7, -0.4, 0.3, 0.2, -0.1, 0.15], vec![0.1; 30]);
        let g = hinge_cost_gradient(&e.beta.0, &b, &map, &e).unwrap();
        let h = 1e-6;
        for c in 0..6 {
            let mut p = e.beta.0.clone();
            p[c] += h;
            let plus = hinge_cost(&p, &b, &map, &e).unwrap();
            p[c] -= 2.0 * h;
            let minus = hinge_cost(&p, &b, &map, &e).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            assert!((fd - g[c]).abs() <= 1e-5 * g[c].abs().max(1e-2), "coef {c}: fd {fd} analytic {}", g[c]);
        }
    }

    #[test]
    fn refinement_moves_off_a_blocked_strip() {
        let b = basis();
        // blocked strip just right of the straight path, free to the left
        let map = map_with(|x, z| if z > 3.0 && x < 0.8 && x > -1.5 { 1.0 } else { 0.0 });
        let e = entry(vec![0.0; 6], vec![0.0; 30]);
        let p = refine(&b, &map, &e, &PredictionConfig::default()).unwrap();
        assert!(p.final_cost < p.init_cost);
        assert!(p.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn straight_baseline_arithmetic() {
        let t = straight_line(1.2, 0.5, 30);
        for (i, p) in t.points.iter().enumerate() {
            assert_eq!(p[0], 0.0);
            assert!((p[1] - 0.6 * (i + 1) as f64).abs() < 1e-12);
        }
    }
}
