//! Browser demo. A small database is trained in the page on simulated
//! walks; the user aims a camera in another simulated world and sees the
//! depth image, its EgoSpace map, the predicted trajectories and the
//! discovered occluded space.
//!
//! [`Session`] holds the logic and is plain Rust; [`Demo`] is the
//! JavaScript-facing wrapper.

use egoloc::database::{build_database, DatabaseConfig, FrameSource, TrainingDatabase};
use egoloc::dataset::{generate_scenes, sim_sequences, SynthConfig};
use egoloc::discovery::{discover, extract_detections, DiscoveryConfig, OccludedSpaceMap};
use egoloc::egospace::sample_phi;
use egoloc::geometry::{CameraIntrinsics, CameraPose, DepthImage, Vec3};
use egoloc::observe::{observe, ObserveConfig, Observation};
use egoloc::predictor::{predict_from_observation, PredictionConfig};
use egoloc::synthworld::{ego_to_world, generate_world, render_depth, simulate_sequence, MotionParams, Template, World, WorldParams};
use egoloc::trajectory::reconstruct;
use egoloc::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Side length of the square ego-frame window shown by the raster views, m.
const VIEW_EXTENT: f64 = 20.0;

#[derive(Debug, Clone, Serialize)]
pub struct PoseView {
    pub x: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
    /// Estimated gaze pitch; absent when no ground plane was found.
    pub estimated_pitch: Option<f64>,
    pub observed_cells: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateView {
    /// World ground points `[x, z]`.
    pub points: Vec<[f64; 2]>,
    pub init_cost: f64,
    pub final_cost: f64,
    pub knn_rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionView {
    /// Centroid on the world ground plane.
    pub x: f64,
    pub z: f64,
    pub peak: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionView {
    pub pitch_bin: u8,
    pub truncated: bool,
    pub candidates: Vec<CandidateView>,
    pub detections: Vec<DetectionView>,
}

pub struct Session {
    world: World,
    intrinsics: CameraIntrinsics,
    observe: ObserveConfig,
    discovery: DiscoveryConfig,
    db: TrainingDatabase,
    pose: CameraPose,
    depth: DepthImage,
    observation: Option<Observation>,
    psi: Option<OccludedSpaceMap>,
}

impl Session {
    /// Trains on `train_worlds` simulated worlds, then opens a `template`
    /// world for viewing.
    pub fn new(template: Template, seed: u64, train_worlds: usize, train_frames: usize) -> Result<Self> {
        let synth = SynthConfig { worlds: train_worlds, frames: train_frames, seed, ..SynthConfig::default() };
        let scenes = generate_scenes(&synth)?;
        let seqs = sim_sequences(&scenes, &synth);
        let sources: Vec<&dyn FrameSource> = seqs.iter().map(|s| s as &dyn FrameSource).collect();
        let db = build_database(&sources, &DatabaseConfig::default())?.database;

        let world = generate_world(template, &WorldParams::default(), seed ^ 0x5eed)?;
        let start = simulate_sequence(&world, 1, &MotionParams::default(), seed)?.poses()[0];
        let intrinsics = synth.intrinsics;
        let depth = render_depth(&world, &start, &intrinsics, 0.0, 0)?;
        let mut s = Session {
            world,
            intrinsics,
            observe: ObserveConfig::default(),
            discovery: DiscoveryConfig::default(),
            db,
            pose: start,
            depth,
            observation: None,
            psi: None,
        };
        let f = start.forward();
        s.set_pose(start.position.x, start.position.z, f.x.atan2(f.z), (-f.y).asin())?;
        Ok(s)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn database(&self) -> &TrainingDatabase {
        &self.db
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    /// Renders the view from a camera at eye height above `(x, z)` and
    /// observes it. A frame without a usable ground plane is reported in
    /// the view rather than as an error.
    pub fn set_pose(&mut self, x: f64, z: f64, yaw: f64, pitch: f64) -> Result<PoseView> {
        if !(x.is_finite() && z.is_finite() && yaw.is_finite() && pitch.is_finite()) {
            return Err(Error::InvalidParameter("pose values must be finite".into()));
        }
        self.pose = CameraPose::from_yaw_pitch(Vec3::new(x, 1.6, z), yaw, pitch);
        self.depth = render_depth(&self.world, &self.pose, &self.intrinsics, 0.0, 0)?;
        self.psi = None;
        let mut view = PoseView { x, z, yaw, pitch, estimated_pitch: None, observed_cells: 0, error: None };
        match observe(&self.depth, self.db.grid(), &self.observe.with_pose_gravity(&self.pose)) {
            Ok(obs) => {
                view.estimated_pitch = Some(obs.pitch);
                view.observed_cells = obs.map.observed_count();
                self.observation = Some(obs);
            }
            Err(e) => {
                view.error = Some(e.to_string());
                self.observation = None;
            }
        }
        Ok(view)
    }

    /// Depth as RGBA, near bright and far dark; invalid pixels dark blue.
    pub fn depth_rgba(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.depth.depths().len() * 4);
        for (d, ok) in self.depth.depths().iter().zip(self.depth.validity()) {
            if *ok {
                let v = (255.0 * (1.0 - (d / 20.0).min(1.0))).round() as u8;
                out.extend_from_slice(&[v, v, v, 255]);
            } else {
                out.extend_from_slice(&[10, 20, 60, 255]);
            }
        }
        out
    }

    /// `size` x `size` top-down raster of the EgoSpace map over
    /// `x in [-10, 10]`, `z in [0, 20]`, far rows first, left of the wearer
    /// on the left. Unobserved cells are gray; none when unobserved.
    pub fn egospace_rgba(&self, size: usize) -> Option<Vec<u8>> {
        let obs = self.observation.as_ref()?;
        let phi_max = self.db.grid().phi_max;
        let mut out = Vec::with_capacity(size * size * 4);
        for (x, z) in raster(size) {
            if obs.map.is_observed_at(x, z) {
                let v = (sample_phi(&obs.map, x, z) / phi_max).clamp(0.0, 1.0);
                out.extend_from_slice(&heat(v));
            } else {
                out.extend_from_slice(&[90, 90, 90, 255]);
            }
        }
        Some(out)
    }

    /// Retrieves `k` trajectories, refines them for at most `max_iters`
    /// steps and discovers occluded space from them.
    pub fn predict(&mut self, k: usize, max_iters: usize) -> Result<PredictionView> {
        let obs = self
            .observation
            .clone()
            .ok_or_else(|| Error::InvalidParameter("no ground plane in the current view".into()))?;
        let frame = obs.frame.clone();
        let cfg = PredictionConfig { k, max_iters, ..PredictionConfig::default() };
        let p = predict_from_observation(obs, &self.db, &cfg)?;
        let basis = self.db.basis();
        let to_world = |x: f64, z: f64| {
            let w = ego_to_world(&self.pose, &frame, &Vec3::new(x, 0.0, z));
            [w.x, w.z]
        };
        let mut candidates = Vec::with_capacity(p.candidates.len());
        for c in &p.candidates {
            let t = reconstruct(&c.beta, basis)?;
            let mut points = vec![to_world(0.0, 0.0)];
            points.extend(t.points.iter().map(|q| to_world(q[0], q[1])));
            candidates.push(CandidateView { points, init_cost: c.init_cost, final_cost: c.final_cost, knn_rank: c.knn_rank });
        }
        let betas: Vec<_> = p.candidates.iter().map(|c| &c.beta).collect();
        let psi = discover(&betas, basis, &p.observation.map, &self.discovery)?;
        let detections = extract_detections(&psi, self.discovery.threshold)?
            .into_iter()
            .map(|d| {
                let [x, z] = to_world(d.centroid.0, d.centroid.1);
                DetectionView { x, z, peak: d.peak, cells: d.cells.len() }
            })
            .collect();
        self.psi = Some(psi);
        Ok(PredictionView { pitch_bin: p.pitch_bin, truncated: p.truncated, candidates, detections })
    }

    /// Occluded-space map of the last prediction over the same window as
    /// [`Session::egospace_rgba`]; undefined cells gray.
    pub fn psi_rgba(&self, size: usize) -> Option<Vec<u8>> {
        let psi = self.psi.as_ref()?;
        let g = &psi.grid;
        let mut out = Vec::with_capacity(size * size * 4);
        for (x, z) in raster(size) {
            let col = ((x - g.extent.x_min) / g.resolution).floor();
            let row = ((z - g.extent.z_min) / g.resolution).floor();
            let inside = col >= 0.0 && row >= 0.0 && (col as usize) < g.cols && (row as usize) < g.rows;
            let i = row as usize * g.cols + col as usize;
            if inside && psi.defined[i] {
                out.extend_from_slice(&heat((psi.psi[i] / psi.phi_max).clamp(0.0, 1.0)));
            } else {
                out.extend_from_slice(&[90, 90, 90, 255]);
            }
        }
        Some(out)
    }
}

/// Ego ground coordinates of raster pixel centers, row-major from the far
/// edge. Ego x points left, so pixel columns run from +x to -x.
fn raster(size: usize) -> impl Iterator<Item = (f64, f64)> {
    let step = VIEW_EXTENT / size as f64;
    (0..size).flat_map(move |r| {
        (0..size).map(move |c| (VIEW_EXTENT / 2.0 - (c as f64 + 0.5) * step, VIEW_EXTENT - (r as f64 + 0.5) * step))
    })
}

/// Black through red to yellow.
fn heat(v: f64) -> [u8; 4] {
    let r = (2.0 * v).min(1.0);
    let g = (2.0 * v - 1.0).max(0.0);
    [(r * 255.0) as u8, (g * 255.0) as u8, 0, 255]
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("view types serialize")
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    /// `template` is one of open, single-box, corridor, y-junction,
    /// corner-turn, random.
    #[wasm_bindgen(constructor)]
    pub fn new(template: &str, seed: u32) -> std::result::Result<Demo, JsError> {
        let t: Template = template.parse().map_err(js)?;
        Ok(Demo { inner: Session::new(t, seed as u64, 4, 50).map_err(js)? })
    }

    /// World bounds and boxes as JSON.
    #[wasm_bindgen(js_name = worldJson)]
    pub fn world_json(&self) -> String {
        json(self.inner.world())
    }

    #[wasm_bindgen(js_name = databaseSize)]
    pub fn database_size(&self) -> usize {
        self.inner.database().len()
    }

    #[wasm_bindgen(js_name = depthWidth)]
    pub fn depth_width(&self) -> usize {
        self.inner.intrinsics().width
    }

    #[wasm_bindgen(js_name = depthHeight)]
    pub fn depth_height(&self) -> usize {
        self.inner.intrinsics().height
    }

    /// Angles in radians; returns the pose view as JSON.
    #[wasm_bindgen(js_name = setPose)]
    pub fn set_pose(&mut self, x: f64, z: f64, yaw: f64, pitch: f64) -> std::result::Result<String, JsError> {
        Ok(json(&self.inner.set_pose(x, z, yaw, pitch).map_err(js)?))
    }

    #[wasm_bindgen(js_name = depthRgba)]
    pub fn depth_rgba(&self) -> Vec<u8> {
        self.inner.depth_rgba()
    }

    /// Empty when the current view has no ground plane.
    #[wasm_bindgen(js_name = egospaceRgba)]
    pub fn egospace_rgba(&self, size: usize) -> Vec<u8> {
        self.inner.egospace_rgba(size).unwrap_or_default()
    }

    /// Prediction view as JSON.
    pub fn predict(&mut self, k: usize, max_iters: usize) -> std::result::Result<String, JsError> {
        Ok(json(&self.inner.predict(k, max_iters).map_err(js)?))
    }

    /// Empty before the first prediction of the current view.
    #[wasm_bindgen(js_name = psiRgba)]
    pub fn psi_rgba(&self, size: usize) -> Vec<u8> {
        self.inner.psi_rgba(size).unwrap_or_default()
    }
}
