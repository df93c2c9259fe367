//! Simulator benchmarks: precision of every method on held-out worlds, and
//! detection rate of occluded-space discovery.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{detection_rate, precision, true_positives, PrecisionConfig};
use crate::database::{DepthDatabase, FrameSource, TrainingDatabase};
use crate::dataset::{generate_scenes, sim_sequences, SimSequence, SynthConfig};
use crate::discovery::{discover, extract_detections, DiscoveryConfig, GroundGrid};
use crate::error::{Error, ErrorCategory, Result};
use crate::observe::{observe, ObserveConfig};
use crate::predictor::{
    baseline_groundplane2d, baseline_pure2d, baseline_straight, predict_from_observation, PredictionConfig,
};
use crate::geometry::{CameraIntrinsics, CameraPose, EgoFrame, Vec3};
use crate::synthworld::{
    ego_to_world, generate_world, oracle_egospace, oracle_occluded_free, render_depth, simulate_sequence,
    substream, true_ego_frame, Aabb, Bounds, Template, World,
};
use crate::trajectory::{ego_project_future, reconstruct, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Straight,
    #[serde(rename = "pure-2d")]
    Pure2d,
    #[serde(rename = "ground-plane-2d")]
    GroundPlane2d,
    #[serde(rename = "egospace-noopt")]
    EgoSpaceNoOpt,
    #[serde(rename = "egospace-opt")]
    EgoSpaceOpt,
    /// Returns the ground truth; a harness sanity check.
    Oracle,
}

impl Method {
    pub const BASELINES: [Method; 4] = [Method::Straight, Method::Pure2d, Method::GroundPlane2d, Method::EgoSpaceNoOpt];
    pub const ALL: [Method; 6] = [
        Method::Straight,
        Method::Pure2d,
        Method::GroundPlane2d,
        Method::EgoSpaceNoOpt,
        Method::EgoSpaceOpt,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Straight => "straight",
            Method::Pure2d => "pure-2d",
            Method::GroundPlane2d => "ground-plane-2d",
            Method::EgoSpaceNoOpt => "egospace-noopt",
            Method::EgoSpaceOpt => "egospace-opt",
            Method::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub methods: Vec<Method>,
    pub precision: PrecisionConfig,
    pub prediction: PredictionConfig,
    pub observe: ObserveConfig,
    /// Gravity prior of each test frame from its pose.
    pub gravity_from_pose: bool,
    /// Number of test frames, spread evenly over the eligible ones; all
    /// when `None`.
    pub test_frames: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            methods: Method::ALL.to_vec(),
            precision: PrecisionConfig::default(),
            prediction: PredictionConfig::default(),
            observe: ObserveConfig::default(),
            gravity_from_pose: true,
            test_frames: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPrecision {
    pub method: Method,
    /// `[window][k]`.
    pub precision: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineSummary {
    pub candidates: usize,
    /// Candidates whose final cost does not exceed the initial cost.
    pub non_increasing: usize,
    pub improved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDetection {
    pub scene: String,
    pub template: Template,
    pub frames: usize,
    pub detections: usize,
    pub true_positives: usize,
    /// `None` without detections.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision_config: PrecisionConfig,
    pub frames_evaluated: usize,
    /// Frames where the ground plane could not be recovered.
    pub frames_skipped: usize,
    pub methods: Vec<MethodPrecision>,
    pub refine: Option<RefineSummary>,
    pub detection: Vec<SceneDetection>,
}

impl EvalReport {
    pub fn method(&self, m: Method) -> Option<&MethodPrecision> {
        self.methods.iter().find(|p| p.method == m)
    }

    /// Table with one row per method and one column per (window, k).
    pub fn precision_csv(&self) -> String {
        let mut out = String::from("method");
        for &(a, b) in &self.precision_config.windows {
            for k in &self.precision_config.k_values {
                out.push_str(&format!(",{a}-{b}s k={k}"));
            }
        }
        out.push('\n');
        for m in &self.methods {
            out.push_str(m.method.name());
            for row in &m.precision {
                for v in row {
                    out.push_str(&format!(",{v:.4}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn detection_csv(&self) -> String {
        let mut out = String::from("scene,template,frames,detections,true_positives,rate\n");
        for d in &self.detection {
            let rate = d.rate.map(|r| format!("{r:.4}")).unwrap_or_else(|| "undefined".into());
            out.push_str(&format!(
                "{},{},{},{},{},{rate}\n",
                d.scene,
                d.template.name(),
                d.frames,
                d.detections,
                d.true_positives
            ));
        }
        out
    }
}

struct FrameResult {
    truth: Trajectory,
    /// Per requested method, predictions ordered by retrieval rank.
    predictions: Vec<Vec<Trajectory>>,
    refine: Option<(usize, usize, usize)>,
}

/// `(source index, frame)` pairs with a full future horizon, `count` of them
/// spread evenly in corpus order.
pub fn select_frames(sources: &[&dyn FrameSource], horizon: usize, count: Option<usize>) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = sources
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.len().saturating_sub(horizon)).map(move |f| (i, f)))
        .collect();
    match count {
        Some(n) if n < all.len() => (0..n).map(|j| all[j * all.len() / n]).collect(),
        _ => all,
    }
}

fn by_rank(mut items: Vec<(usize, Trajectory)>) -> Vec<Trajectory> {
    items.sort_by_key(|(r, _)| *r);
    items.into_iter().map(|(_, t)| t).collect()
}

fn evaluate_frame(
    src: &dyn FrameSource,
    f: usize,
    db: &TrainingDatabase,
    depth_db: Option<&DepthDatabase>,
    config: &EvalConfig,
    k_max: usize,
) -> Result<Option<FrameResult>> {
    let poses = src.poses();
    let depth = src.depth(f)?;
    let observe_cfg = if config.gravity_from_pose { config.observe.with_pose_gravity(&poses[f]) } else { config.observe };
    let obs = match observe(&depth, db.grid(), &observe_cfg) {
        Ok(o) => o,
        Err(e) if e.category() == ErrorCategory::Geometry => return Ok(None),
        Err(e) => return Err(e),
    };
    let basis = db.basis();
    let truth = ego_project_future(poses, f, basis.horizon(), &obs.frame, basis.dt)?;
    let mut predictions = Vec::with_capacity(config.methods.len());
    let mut refine = None;
    let pcfg = PredictionConfig { k: k_max, ..config.prediction };
    for m in &config.methods {
        let preds = match m {
            Method::Straight => vec![baseline_straight(db)],
            Method::Oracle => vec![truth.clone()],
            Method::Pure2d | Method::GroundPlane2d => {
                let ddb = depth_db.ok_or_else(|| Error::InvalidParameter("2D baselines need a depth database".into()))?;
                let out = if *m == Method::Pure2d {
                    baseline_pure2d(&depth, ddb, &obs.frame, k_max)?
                } else {
                    baseline_groundplane2d(&depth, ddb, &obs.frame, k_max)?
                };
                out.into_iter().map(|b| b.ego).collect()
            }
            Method::EgoSpaceNoOpt | Method::EgoSpaceOpt => {
                let cfg = if *m == Method::EgoSpaceNoOpt { PredictionConfig { max_iters: 0, ..pcfg } } else { pcfg };
                let p = predict_from_observation(obs.clone(), db, &cfg)?;
                if *m == Method::EgoSpaceOpt {
                    let ok = p.candidates.iter().filter(|c| c.final_cost <= c.init_cost).count();
                    let better = p.candidates.iter().filter(|c| c.final_cost < c.init_cost).count();
                    refine = Some((p.candidates.len(), ok, better));
                }
                let trajs = p.trajectories(basis);
                by_rank(p.candidates.iter().map(|c| c.knn_rank).zip(trajs).collect())
            }
        };
        predictions.push(preds);
    }
    Ok(Some(FrameResult { truth, predictions, refine }))
}

/// Precision of each configured method on `sources`. Predictions are
/// truncated by retrieval rank, so `k` counts neighbors for every method.
pub fn evaluate(
    db: &TrainingDatabase,
    depth_db: Option<&DepthDatabase>,
    sources: &[&dyn FrameSource],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.precision.validate()?;
    config.prediction.validate()?;
    if db.is_empty() {
        return Err(Error::EmptyInput("training database is empty".into()));
    }
    let k_max = *config.precision.k_values.iter().max().expect("validated");
    let frames = select_frames(sources, db.basis().horizon(), config.test_frames);
    if frames.is_empty() {
        return Err(Error::EmptyInput("no test frame has a full future horizon".into()));
    }
    let results = frames
        .par_iter()
        .map(|&(s, f)| evaluate_frame(sources[s], f, db, depth_db, config, k_max))
        .collect::<Result<Vec<_>>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let results: Vec<FrameResult> = results.into_iter().flatten().collect();
    if results.is_empty() {
        return Err(Error::EmptyInput("every test frame failed ground-plane estimation".into()));
    }
    let mut methods = Vec::with_capacity(config.methods.len());
    for (mi, m) in config.methods.iter().enumerate() {
        let pairs: Vec<(Vec<Trajectory>, Trajectory)> =
            results.iter().map(|r| (r.predictions[mi].clone(), r.truth.clone())).collect();
        methods.push(MethodPrecision { method: *m, precision: precision(&pairs, &config.precision)? });
    }
    let refine = config.methods.contains(&Method::EgoSpaceOpt).then(|| {
        let (mut n, mut ok, mut better) = (0, 0, 0);
        for (a, b, c) in results.iter().filter_map(|r| r.refine) {
            n += a;
            ok += b;
            better += c;
        }
        RefineSummary { candidates: n, non_increasing: ok, improved: better }
    });
    Ok(EvalReport {
        precision_config: config.precision.clone(),
        frames_evaluated: results.len(),
        frames_skipped: skipped,
        methods,
        refine,
        detection: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub templates: Vec<Template>,
    pub scenes_per_template: usize,
    /// Frames per scene, spread evenly over the walk's frames that show
    /// occluded free space.
    pub frames_per_scene: usize,
    /// Walk length considered, in frames (a full horizon follows).
    pub walk_frames: usize,
    /// Visible occluded free cells a frame needs to be used.
    pub min_occluded_cells: usize,
    pub discovery: DiscoveryConfig,
    pub prediction: PredictionConfig,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            templates: vec![Template::CornerTurn, Template::SingleBox],
            scenes_per_template: 5,
            frames_per_scene: 5,
            walk_frames: 30,
            min_occluded_cells: 8,
            discovery: DiscoveryConfig::default(),
            prediction: PredictionConfig::default(),
        }
    }
}

/// Per-frame discovery result against the oracle labels.
pub struct FrameDetection {
    pub detections: usize,
    pub true_positives: usize,
}

/// Discovers occluded space for one frame and scores it against
/// `oracle_occluded_free`, both in the estimated ego frame.
pub fn detect_frame(
    source: &dyn FrameSource,
    world: &World,
    f: usize,
    db: &TrainingDatabase,
    observe_cfg: &ObserveConfig,
    discovery: &DiscoveryConfig,
    prediction: &PredictionConfig,
) -> Result<Option<FrameDetection>> {
    let pose = source.poses().get(f).ok_or(Error::IndexOutOfRange { index: f, len: source.len() })?;
    let depth = source.depth(f)?;
    let obs = match observe(&depth, db.grid(), &observe_cfg.with_pose_gravity(pose)) {
        Ok(o) => o,
        Err(e) if e.category() == ErrorCategory::Geometry => return Ok(None),
        Err(e) => return Err(e),
    };
    let frame = obs.frame.clone();
    let p = predict_from_observation(obs, db, prediction)?;
    let betas: Vec<_> = p.candidates.iter().map(|c| &c.beta).collect();
    let psi = discover(&betas, db.basis(), &p.observation.map, discovery)?;
    let dets = extract_detections(&psi, discovery.threshold)?;
    let grid = GroundGrid::new(discovery.extent, discovery.resolution)?;
    let labels = oracle_occluded_free(world, pose, &frame, &grid);
    let tp = true_positives(&dets, &labels, grid.cols)?;
    debug_assert_eq!(detection_rate(&dets, &labels, grid.cols)?.is_some(), !dets.is_empty());
    Ok(Some(FrameDetection { detections: dets.len(), true_positives: tp }))
}

/// Frames among `frames` whose true view holds at least
/// `min_occluded_cells` visible occluded free cells.
pub fn frames_with_occlusion(
    world: &World,
    poses: &[CameraPose],
    frames: std::ops::Range<usize>,
    intrinsics: &CameraIntrinsics,
    db: &TrainingDatabase,
    config: &DetectionConfig,
) -> Result<Vec<usize>> {
    let grid = GroundGrid::new(config.discovery.extent, config.discovery.resolution)?;
    let mut out = Vec::new();
    for f in frames {
        let pose = &poses[f];
        let frame = true_ego_frame(pose)?;
        let map = oracle_egospace(world, pose, &frame, db.grid(), intrinsics)?;
        let labels = oracle_occluded_free(world, pose, &frame, &grid);
        let visible = (0..grid.len())
            .filter(|&i| {
                let (x, z) = grid.center(i / grid.cols, i % grid.cols);
                labels[i] && map.is_observed_at(x, z)
            })
            .count();
        if visible >= config.min_occluded_cells {
            out.push(f);
        }
    }
    Ok(out)
}

/// Detection rate of one sequence: up to `frames_per_scene` frames spread
/// over `candidates`, pooled.
pub fn scene_detection(
    scene: String,
    world: &World,
    source: &dyn FrameSource,
    candidates: &[usize],
    db: &TrainingDatabase,
    observe_cfg: &ObserveConfig,
    config: &DetectionConfig,
) -> Result<SceneDetection> {
    let n = config.frames_per_scene.min(candidates.len());
    let (mut used, mut dets, mut tp) = (0, 0, 0);
    for j in 0..n {
        let f = candidates[j * candidates.len() / n];
        if let Some(d) = detect_frame(source, world, f, db, observe_cfg, &config.discovery, &config.prediction)? {
            used += 1;
            dets += d.detections;
            tp += d.true_positives;
        }
    }
    Ok(SceneDetection {
        scene,
        template: world.template,
        frames: used,
        detections: dets,
        true_positives: tp,
        rate: (dets > 0).then(|| tp as f64 / dets as f64),
    })
}

/// Detection rate per scene on freshly generated worlds of the configured
/// templates.
pub fn detection_benchmark(
    db: &TrainingDatabase,
    synth: &SynthConfig,
    observe_cfg: &ObserveConfig,
    config: &DetectionConfig,
    seed: u64,
) -> Result<Vec<SceneDetection>> {
    let horizon = db.basis().horizon();
    let mut rng = substream(seed, "detection");
    let mut scenes = Vec::new();
    for t in &config.templates {
        for i in 0..config.scenes_per_template {
            let (world_seed, walk_seed, render_seed): (u64, u64, u64) = (rng.random(), rng.random(), rng.random());
            scenes.push((format!("{}-{i}", t.name()), *t, world_seed, walk_seed, render_seed));
        }
    }
    scenes
        .par_iter()
        .map(|(name, t, world_seed, walk_seed, render_seed)| {
            let world = generate_world(*t, &synth.world, *world_seed)?;
            let walk = simulate_sequence(&world, horizon + config.walk_frames, &synth.motion, *walk_seed)?;
            let seq = SimSequence::new(&world, 0, &walk, synth, *render_seed);
            let candidates = frames_with_occlusion(&world, &seq.poses, 0..config.walk_frames, &synth.intrinsics, db, config)?;
            scene_detection(name.clone(), &world, &seq, &candidates, db, observe_cfg, config)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetourConfig {
    pub trials: usize,
    /// Distance from the camera to the box's near face, meters.
    pub distance: (f64, f64),
    pub width: (f64, f64),
    pub depth: (f64, f64),
    pub height: (f64, f64),
    /// Largest lateral offset of the box center from the gaze line.
    pub lateral: f64,
    pub eye_height: f64,
    pub prediction: PredictionConfig,
}

impl Default for DetourConfig {
    fn default() -> Self {
        DetourConfig {
            trials: 100,
            distance: (3.0, 6.0),
            width: (0.8, 1.6),
            depth: (0.5, 1.2),
            height: (1.0, 2.0),
            lateral: 0.3,
            eye_height: 1.6,
            prediction: PredictionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetourTrial {
    /// The best retrieved path, unrefined, crosses the box.
    pub retrieved_collides: bool,
    /// Every sample of the top refined candidate lies outside the box.
    pub cleared: bool,
    /// The polyline through those samples also stays outside.
    pub cleared_segments: bool,
    pub init_cost: f64,
    pub final_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetourReport {
    pub trials: Vec<DetourTrial>,
    /// Trials whose geometry could not be observed.
    pub skipped: usize,
}

impl DetourReport {
    pub fn clear_rate(&self) -> f64 {
        self.trials.iter().filter(|t| t.cleared).count() as f64 / self.trials.len().max(1) as f64
    }
}

/// A box across the gaze line with free floor on both sides, and the
/// camera looking at it.
pub fn detour_scene(config: &DetourConfig, pitch: f64, seed: u64) -> (World, CameraPose) {
    let mut rng = substream(seed, "detour");
    let d = rng.random_range(config.distance.0..=config.distance.1);
    let w = rng.random_range(config.width.0..=config.width.1);
    let depth = rng.random_range(config.depth.0..=config.depth.1);
    let h = rng.random_range(config.height.0..=config.height.1);
    let x = rng.random_range(-config.lateral..=config.lateral);
    let b = Aabb::footprint(x - w / 2.0, d, x + w / 2.0, d + depth, h);
    let world = World {
        template: Template::SingleBox,
        seed,
        bounds: Bounds { x_min: -20.0, x_max: 20.0, z_min: -20.0, z_max: 20.0 },
        boxes: vec![b],
        routes: Vec::new(),
    };
    let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, config.eye_height, 0.0), 0.0, pitch);
    (world, pose)
}

/// Ego trajectory mapped to world ground points, starting at the wearer's
/// feet.
fn world_path(traj: &Trajectory, pose: &CameraPose, frame: &EgoFrame) -> Vec<[f64; 2]> {
    std::iter::once([0.0, 0.0])
        .chain(traj.points.iter().map(|p| [p[0], p[1]]))
        .map(|[x, z]| {
            let w = ego_to_world(pose, frame, &Vec3::new(x, 0.0, z));
            [w.x, w.z]
        })
        .collect()
}

fn outside_boxes(world: &World, p: [f64; 2]) -> bool {
    world.boxes.iter().all(|b| !b.contains_xz(p[0], p[1]))
}

fn points_clear(world: &World, path: &[[f64; 2]]) -> bool {
    path.iter().all(|p| outside_boxes(world, *p))
}

/// Polyline check at 5 cm spacing.
fn path_clear(world: &World, path: &[[f64; 2]]) -> bool {
    path.windows(2).all(|s| {
        let n = ((s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1]) / 0.05).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let t = i as f64 / n as f64;
            outside_boxes(world, [s[0][0] + t * (s[1][0] - s[0][0]), s[0][1] + t * (s[1][1] - s[0][1])])
        })
    })
}

/// Refinement on constructed detour scenes: does the top refined candidate
/// avoid a box placed across the gaze line?
pub fn detour_benchmark(
    db: &TrainingDatabase,
    synth: &SynthConfig,
    observe_cfg: &ObserveConfig,
    config: &DetourConfig,
    seed: u64,
) -> Result<DetourReport> {
    let mut rng = substream(seed, "detour-trials");
    let bands = &synth.motion.pitch_bands;
    if bands.is_empty() {
        return Err(Error::InvalidParameter("need at least one pitch band".into()));
    }
    let trials: Vec<(u64, f64)> = (0..config.trials)
        .map(|i| {
            let (c, hw) = bands[i % bands.len()];
            (rng.random(), rng.random_range(c - hw..=c + hw))
        })
        .collect();
    let results = trials
        .par_iter()
        .map(|&(trial_seed, pitch)| {
            let (world, pose) = detour_scene(config, pitch, trial_seed);
            let depth = render_depth(&world, &pose, &synth.intrinsics, 0.0, trial_seed)?;
            let obs = match observe(&depth, db.grid(), &observe_cfg.with_pose_gravity(&pose)) {
                Ok(o) => o,
                Err(e) if e.category() == ErrorCategory::Geometry => return Ok(None),
                Err(e) => return Err(e),
            };
            let frame = obs.frame.clone();
            let p = predict_from_observation(obs, db, &config.prediction)?;
            let top = &p.candidates[0];
            let first = p.candidates.iter().min_by_key(|c| c.knn_rank).expect("k >= 1");
            let refined = world_path(&reconstruct(&top.beta, db.basis())?, &pose, &frame);
            let retrieved = world_path(&reconstruct(&first.beta_init, db.basis())?, &pose, &frame);
            Ok(Some(DetourTrial {
                retrieved_collides: !points_clear(&world, &retrieved),
                cleared: points_clear(&world, &refined),
                cleared_segments: path_clear(&world, &refined),
                init_cost: top.init_cost,
                final_cost: top.final_cost,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    Ok(DetourReport { trials: results.into_iter().flatten().collect(), skipped })
}

/// The standard simulator benchmark: a training corpus and a held-out test
/// corpus from disjoint worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub train: SynthConfig,
    pub test: SynthConfig,
    pub eval: EvalConfig,
    pub detection: DetectionConfig,
}

impl BenchmarkConfig {
    pub fn standard(seed: u64) -> Self {
        let mut rng = substream(seed, "benchmark");
        let train = SynthConfig { worlds: 30, sequences_per_world: 2, frames: 150, seed: rng.random(), ..SynthConfig::default() };
        let test = SynthConfig { worlds: 10, sequences_per_world: 3, frames: 90, seed: rng.random(), ..SynthConfig::default() };
        BenchmarkConfig {
            seed,
            train,
            test,
            eval: EvalConfig { test_frames: Some(1500), ..EvalConfig::default() },
            detection: DetectionConfig::default(),
        }
    }
}

pub fn run_benchmark(
    config: &BenchmarkConfig,
    db: &TrainingDatabase,
    depth_db: Option<&DepthDatabase>,
) -> Result<EvalReport> {
    let scenes = generate_scenes(&config.test)?;
    let seqs = sim_sequences(&scenes, &config.test);
    let sources: Vec<&dyn FrameSource> = seqs.iter().map(|s| s as &dyn FrameSource).collect();
    let mut report = evaluate(db, depth_db, &sources, &config.eval)?;
    report.detection = detection_benchmark(db, &config.test, &config.eval.observe, &config.detection, config.seed)?;
    Ok(report)
}

/// Trajectories stored in a database, reconstructed from their
/// coefficients, with pitch and pitch bin.
pub fn database_trajectories(db: &TrainingDatabase) -> Vec<(f64, u8, Trajectory)> {
    db.entries()
        .into_iter()
        .map(|e| (e.pitch, e.pitch_bin, reconstruct(&e.beta, db.basis()).expect("database dimensions are consistent")))
        .collect()
}
