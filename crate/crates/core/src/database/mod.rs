//! Pitch-binned training database of (EgoSpace map, trajectory
//! coefficients) pairs with exact k-nearest-neighbor retrieval.

mod depth;
pub mod egdb;
pub mod kdtree;

use std::fmt;

use rayon::prelude::*;

use crate::egospace::{sample_phi, EgoSpaceMap, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::{CameraPose, DepthImage};
use crate::observe::{observe, ObserveConfig};
use crate::trajectory::{
    camera_future, ego_project_future, fit_coefficients, learn_pca_basis, make_dct_basis, point_unchecked,
    Coefficients, Trajectory, TrajectoryBasis,
};

pub use depth::{depth_feature, DepthDatabase, DepthEntry, DepthFeatureSpec};
use kdtree::{linear_scan, FeatureMatrix, Hit, KdTree};

/// Depth frames with camera poses, read lazily.
pub trait FrameSource: Sync {
    fn scene_id(&self) -> u32;
    fn poses(&self) -> &[CameraPose];
    fn depth(&self, frame: usize) -> Result<DepthImage>;

    fn len(&self) -> usize {
        self.poses().len()
    }

    fn is_empty(&self) -> bool {
        self.poses().is_empty()
    }
}

/// Frames already in memory.
pub struct InMemorySequence {
    pub scene_id: u32,
    pub poses: Vec<CameraPose>,
    pub frames: Vec<DepthImage>,
}

impl FrameSource for InMemorySequence {
    fn scene_id(&self) -> u32 {
        self.scene_id
    }

    fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    fn depth(&self, frame: usize) -> Result<DepthImage> {
        self.frames
            .get(frame)
            .cloned()
            .ok_or(Error::IndexOutOfRange { index: frame, len: self.frames.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingEntry {
    pub scene_id: u32,
    pub frame_id: u32,
    pub pitch_bin: u8,
    /// Signed pitch of the frame, radians.
    pub pitch: f64,
    pub feature: Vec<f32>,
    pub beta: Coefficients,
    /// Map value along the entry's own reconstructed trajectory.
    pub traj_cost: Vec<f64>,
}

impl TrainingEntry {
    pub fn id(&self) -> EntryId {
        EntryId { scene_id: self.scene_id, frame_id: self.frame_id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct EntryId {
    pub scene_id: u32,
    pub frame_id: u32,
}

impl fmt::Display for EntryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.scene_id, self.frame_id)
    }
}

/// How neighbor queries are answered. Both strategies are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Linear scan below [`KD_TREE_THRESHOLD`] entries per bin, tree above.
    #[default]
    Auto,
    Linear,
    KdTree,
}

pub const KD_TREE_THRESHOLD: usize = 50_000;

/// Feature rows plus an optional k-d tree.
pub(crate) struct FeatureIndex {
    features: FeatureMatrix,
    tree: Option<KdTree>,
}

impl FeatureIndex {
    pub(crate) fn new(features: FeatureMatrix, strategy: SearchStrategy) -> Self {
        let use_tree = match strategy {
            SearchStrategy::Auto => features.rows() >= KD_TREE_THRESHOLD,
            SearchStrategy::Linear => false,
            SearchStrategy::KdTree => true,
        };
        let tree = use_tree.then(|| KdTree::build(&features));
        FeatureIndex { features, tree }
    }

    pub(crate) fn search(&self, query: &[f32], k: usize) -> Vec<Hit> {
        match &self.tree {
            Some(tree) => tree.search(&self.features, query, k),
            None => linear_scan(&self.features, query, k),
        }
    }

    pub(crate) fn rows(&self) -> usize {
        self.features.rows()
    }
}

struct PitchBin {
    entries: Vec<TrainingEntry>,
    index: FeatureIndex,
}

pub struct TrainingDatabase {
    grid: GridSpec,
    basis: TrajectoryBasis,
    pitch_edges: [f64; 2],
    bins: [PitchBin; 3],
    strategy: SearchStrategy,
}

impl fmt::Debug for TrainingDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrainingDatabase")
            .field("grid", &self.grid)
            .field("horizon", &self.basis.horizon())
            .field("dim", &self.basis.dim())
            .field("pitch_edges", &self.pitch_edges)
            .field("bin_sizes", &self.bin_sizes())
            .finish()
    }
}

/// Half-open bins `(-inf, e0)`, `[e0, e1)`, `[e1, inf)`.
pub fn assign_pitch_bin(pitch: f64, edges: &[f64; 2]) -> u8 {
    if pitch < edges[0] {
        0
    } else if pitch < edges[1] {
        1
    } else {
        2
    }
}

/// Tercile edges of a pitch sample.
pub fn tercile_edges(pitches: &[f64]) -> Result<[f64; 2]> {
    if pitches.is_empty() {
        return Err(Error::EmptyInput("no pitches".into()));
    }
    let mut sorted = pitches.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok([sorted[n / 3], sorted[(2 * n) / 3]])
}

#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a> {
    pub entry: &'a TrainingEntry,
    pub distance: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct KnnResult<'a> {
    pub bin: u8,
    pub neighbors: Vec<Neighbor<'a>>,
    /// The bin held fewer than `k` entries; all of them were returned.
    pub truncated: bool,
}

impl TrainingDatabase {
    /// Assembles a database, checking every entry against the grid, the
    /// basis and the pitch edges. Entries are stored sorted by
    /// `(scene_id, frame_id)`.
    pub fn from_parts(
        grid: GridSpec,
        basis: TrajectoryBasis,
        pitch_edges: [f64; 2],
        mut entries: Vec<TrainingEntry>,
        strategy: SearchStrategy,
    ) -> Result<Self> {
        grid.validate()?;
        if !(pitch_edges[0] <= pitch_edges[1]) {
            return Err(Error::InvalidParameter("pitch edges must be sorted".into()));
        }
        let (cells, f, k) = (grid.cell_count(), basis.horizon(), basis.dim());
        for e in &entries {
            if e.feature.len() != cells {
                return Err(Error::DimensionMismatch { expected: cells, got: e.feature.len() });
            }
            if e.beta.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: e.beta.len() });
            }
            if e.traj_cost.len() != f {
                return Err(Error::DimensionMismatch { expected: f, got: e.traj_cost.len() });
            }
            if assign_pitch_bin(e.pitch, &pitch_edges) != e.pitch_bin {
                return Err(Error::InvalidParameter(format!(
                    "entry {} has pitch bin {} inconsistent with edges",
                    e.id(),
                    e.pitch_bin
                )));
            }
        }
        entries.sort_by_key(|e| e.id());
        let mut grouped: [Vec<TrainingEntry>; 3] = Default::default();
        for e in entries {
            grouped[e.pitch_bin as usize].push(e);
        }
        let bins = grouped.map(|entries| {
            let mut features = FeatureMatrix::new(cells);
            for e in &entries {
                features.push(&e.feature);
            }
            PitchBin { entries, index: FeatureIndex::new(features, strategy) }
        });
        Ok(TrainingDatabase { grid, basis, pitch_edges, bins, strategy })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn basis(&self) -> &TrajectoryBasis {
        &self.basis
    }

    pub fn pitch_edges(&self) -> [f64; 2] {
        self.pitch_edges
    }

    pub fn strategy(&self) -> SearchStrategy {
        self.strategy
    }

    pub fn bin_sizes(&self) -> [usize; 3] {
        [0, 1, 2].map(|b| self.bins[b].entries.len())
    }

    pub fn len(&self) -> usize {
        self.bin_sizes().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bin_entries(&self, bin: u8) -> &[TrainingEntry] {
        &self.bins[bin as usize].entries
    }

    /// All entries in `(scene_id, frame_id)` order.
    pub fn entries(&self) -> Vec<&TrainingEntry> {
        let mut all: Vec<&TrainingEntry> = self.bins.iter().flat_map(|b| b.entries.iter()).collect();
        all.sort_by_key(|e| e.id());
        all
    }

    /// Rebuilds the search structures with another strategy.
    pub fn with_strategy(self, strategy: SearchStrategy) -> Self {
        let TrainingDatabase { grid, basis, pitch_edges, bins, .. } = self;
        let entries = bins.into_iter().flat_map(|b| b.entries).collect();
        TrainingDatabase::from_parts(grid, basis, pitch_edges, entries, strategy)
            .expect("entries were already validated")
    }

    /// Mean walking speed over the stored (reconstructed) trajectories.
    pub fn mean_speed(&self) -> f64 {
        let entries = self.entries();
        if entries.is_empty() {
            return 0.0;
        }
        let horizon_s = self.basis.horizon() as f64 * self.basis.dt;
        let total: f64 = entries
            .iter()
            .map(|e| {
                let pts: Vec<[f64; 2]> =
                    (0..self.basis.horizon()).map(|i| point_unchecked(&e.beta.0, &self.basis, i)).collect();
                Trajectory { dt: self.basis.dt, points: pts }.path_length() / horizon_s
            })
            .sum();
        total / entries.len() as f64
    }
}

/// The `k` entries of the query's pitch bin closest to `query` in Euclidean
/// distance, ties broken by `(scene_id, frame_id)`.
pub fn knn_query<'a>(db: &'a TrainingDatabase, query: &EgoSpaceMap, pitch: f64, k: usize) -> Result<KnnResult<'a>> {
    knn_query_feature(db, &query.feature(), pitch, k)
}

pub fn knn_query_feature<'a>(db: &'a TrainingDatabase, query: &[f32], pitch: f64, k: usize) -> Result<KnnResult<'a>> {
    if query.len() != db.grid.cell_count() {
        return Err(Error::DimensionMismatch { expected: db.grid.cell_count(), got: query.len() });
    }
    // stored pitches and edges carry f32 precision
    let bin = assign_pitch_bin(to_f32_precision(pitch), &db.pitch_edges);
    let b = &db.bins[bin as usize];
    if b.entries.is_empty() {
        return Err(Error::EmptyBin(bin));
    }
    let hits = b.index.search(query, k);
    let neighbors = hits
        .iter()
        .enumerate()
        .map(|(rank, h)| Neighbor { entry: &b.entries[h.row], distance: h.dist2.sqrt(), rank })
        .collect();
    Ok(KnnResult { bin, neighbors, truncated: b.index.rows() < k })
}

/// Where the trajectory basis comes from.
#[derive(Debug, Clone)]
pub enum BasisSource {
    Pca { k: usize },
    Dct { k: usize },
    Given(TrajectoryBasis),
}

#[derive(Debug, Clone)]
pub struct DatabaseConfig {
    pub grid: GridSpec,
    pub basis: BasisSource,
    pub horizon: usize,
    pub dt: f64,
    pub observe: ObserveConfig,
    /// Take each frame's gravity prior from its pose instead of
    /// `observe.gravity_prior`.
    pub gravity_from_pose: bool,
    /// Fixed pitch bin edges; training terciles when `None`.
    pub pitch_edges: Option<[f64; 2]>,
    pub strategy: SearchStrategy,
    /// Also collect the subsampled-depth database used by the 2D baselines.
    pub depth_feature: Option<DepthFeatureSpec>,
}

impl Default for DatabaseConfig {
    fn default() -> Self {
        DatabaseConfig {
            grid: GridSpec::default(),
            basis: BasisSource::Pca { k: 6 },
            horizon: 30,
            dt: 0.5,
            observe: ObserveConfig::default(),
            gravity_from_pose: true,
            pitch_edges: None,
            strategy: SearchStrategy::Auto,
            depth_feature: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub trajectories: usize,
    pub explained_variance_ratio: Vec<f64>,
    pub effective_rank: usize,
    pub rank_deficient: bool,
    pub bin_sizes: [usize; 3],
}

pub struct BuildOutput {
    pub database: TrainingDatabase,
    pub depth_database: Option<DepthDatabase>,
    pub report: BuildReport,
}

struct Sample {
    scene_id: u32,
    frame_id: u32,
    pitch: f64,
    map: EgoSpaceMap,
    trajectory: Trajectory,
}

fn to_f32_precision(v: f64) -> f64 {
    v as f32 as f64
}

/// Builds the training database: observe every frame that has a full
/// future horizon, learn (or take) the basis from all projected
/// trajectories, then fit coefficients and precompute their map cost.
///
/// Stored values are rounded to `f32` precision so that a database read
/// back from disk is identical to the one built in memory.
pub fn build_database(sources: &[&dyn FrameSource], config: &DatabaseConfig) -> Result<BuildOutput> {
    config.grid.validate()?;
    let horizon = config.horizon;
    let jobs: Vec<(&dyn FrameSource, usize)> =
        sources.iter().flat_map(|s| (0..s.len().saturating_sub(horizon)).map(move |f| (*s, f))).collect();
    let observed = jobs
        .par_iter()
        .map(|&(src, f)| {
            let poses = src.poses();
            let depth = src.depth(f)?;
            let cfg = if config.gravity_from_pose { config.observe.with_pose_gravity(&poses[f]) } else { config.observe };
            let obs = observe(&depth, &config.grid, &cfg)?;
            let trajectory = ego_project_future(poses, f, horizon, &obs.frame, config.dt)?;
            let depth_entry = match &config.depth_feature {
                Some(spec) => Some(DepthEntry {
                    scene_id: src.scene_id(),
                    frame_id: f as u32,
                    feature: depth_feature(&depth, spec),
                    ego_trajectory: trajectory.clone(),
                    camera_trajectory: camera_future(poses, f, horizon)?,
                }),
                None => None,
            };
            let sample = Sample {
                scene_id: src.scene_id(),
                frame_id: f as u32,
                pitch: to_f32_precision(obs.pitch),
                map: obs.map,
                trajectory,
            };
            Ok((sample, depth_entry))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(observed.len());
    let mut depth_entries = Vec::new();
    for (s, d) in observed {
        samples.push(s);
        depth_entries.extend(d);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput(format!("no frame has {horizon} future poses")));
    }

    let trajectories: Vec<Trajectory> = samples.iter().map(|s| s.trajectory.clone()).collect();
    let (raw_basis, ratio, rank) = match &config.basis {
        BasisSource::Pca { k } => {
            let fit = learn_pca_basis(&trajectories, *k)?;
            let rank = fit.effective_rank;
            (fit.basis, fit.explained_variance_ratio, rank)
        }
        BasisSource::Dct { k } => {
            let b = make_dct_basis(horizon, *k, config.dt)?;
            let k = b.dim();
            (b, Vec::new(), k)
        }
        BasisSource::Given(b) => {
            if b.horizon() != horizon {
                return Err(Error::DimensionMismatch { expected: horizon, got: b.horizon() });
            }
            (b.clone(), Vec::new(), b.dim())
        }
    };
    let basis = TrajectoryBasis::new(
        raw_basis.mean.map(to_f32_precision),
        raw_basis.basis.map(to_f32_precision),
        to_f32_precision(config.dt),
    )?;

    let pitches: Vec<f64> = samples.iter().map(|s| s.pitch).collect();
    let edges = match config.pitch_edges {
        Some(e) => e.map(to_f32_precision),
        None => tercile_edges(&pitches)?,
    };

    let mut entries = Vec::with_capacity(samples.len());
    for s in &samples {
        let beta = Coefficients(fit_coefficients(&s.trajectory, &basis)?.0.into_iter().map(to_f32_precision).collect());
        let traj_cost = (0..horizon)
            .map(|i| {
                let p = point_unchecked(&beta.0, &basis, i);
                to_f32_precision(sample_phi(&s.map, p[0], p[1]))
            })
            .collect();
        entries.push(TrainingEntry {
            scene_id: s.scene_id,
            frame_id: s.frame_id,
            pitch_bin: assign_pitch_bin(s.pitch, &edges),
            pitch: s.pitch,
            feature: s.map.feature(),
            beta,
            traj_cost,
        });
    }
    let k = basis.dim();
    let database = TrainingDatabase::from_parts(config.grid, basis, edges, entries, config.strategy)?;
    let report = BuildReport {
        trajectories: samples.len(),
        explained_variance_ratio: ratio,
        effective_rank: rank,
        rank_deficient: rank < k,
        bin_sizes: database.bin_sizes(),
    };
    let depth_database = match &config.depth_feature {
        Some(spec) => Some(DepthDatabase::new(*spec, depth_entries, config.dt, config.strategy)?),
        None => None,
    };
    Ok(BuildOutput { database, depth_database, report })
}
