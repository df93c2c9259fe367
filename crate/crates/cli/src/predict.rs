use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use egoloc::database::{egdb, SearchStrategy};
use egoloc::dataset::{PoseRecord, PosesFile};
use egoloc::discovery::{discover, extract_detections, Detection, DiscoveryConfig};
use egoloc::geometry::egod;
use egoloc::observe::{observe, ObserveConfig};
use egoloc::predictor::{predict_from_observation, PredictionConfig, RefineStatus};
use egoloc::trajectory::reconstruct;
use serde::{Deserialize, Serialize};

use crate::config::{invalid, parse_list, resolve};
use crate::manifest::Recorder;

pub const FORMAT: &str = "egoloc-prediction";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PredictSettings {
    pub prediction: PredictionConfig,
    pub observe: ObserveConfig,
    pub discovery: DiscoveryConfig,
}

#[derive(clap::Args)]
pub struct Args {
    /// Training database (EGDB).
    #[arg(long)]
    db: PathBuf,
    /// Query depth frame (EGOD).
    #[arg(long)]
    depth: PathBuf,
    /// Neighbors to retrieve and refine.
    #[arg(long)]
    k: Option<usize>,
    /// Refinement iterations; 0 keeps the retrieved trajectories.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Gravity direction in camera coordinates, `gx,gy,gz`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "poses")]
    gravity: Option<String>,
    /// Poses file; the gravity prior is taken from pose `--frame`.
    #[arg(long, requires = "frame")]
    poses: Option<PathBuf>,
    /// Frame index into `--poses`.
    #[arg(long, requires = "poses")]
    frame: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceEntry {
    pub scene_id: u32,
    pub frame_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub beta: Vec<f64>,
    /// Ego-frame ground points `[x, z]`, one per future step.
    pub points: Vec<[f64; 2]>,
    pub init_cost: f64,
    pub final_cost: f64,
    pub source_entry: SourceEntry,
    pub knn_rank: usize,
    pub knn_distance: f64,
    pub iterations: usize,
    pub status: RefineStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictionOutput {
    pub format: String,
    pub version: u32,
    pub dt: f64,
    pub horizon: usize,
    /// Signed gaze pitch of the query, radians, positive looking down.
    pub pitch: f64,
    pub pitch_bin: u8,
    /// The pitch bin held fewer than `k` entries.
    pub truncated: bool,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionsOutput {
    pub threshold: f64,
    pub resolution: f64,
    pub extent: egoloc::discovery::Extent,
    pub detections: Vec<Detection>,
}

fn gravity_prior(args: &Args) -> Result<Option<[f64; 3]>> {
    if let Some(g) = &args.gravity {
        let v: Vec<f64> = parse_list(g)?;
        let arr: [f64; 3] = v.try_into().map_err(|_| invalid("--gravity needs three components".into()))?;
        return Ok(Some(arr));
    }
    if let (Some(path), Some(f)) = (&args.poses, args.frame) {
        let poses: PosesFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let rec: &PoseRecord = poses
            .poses
            .get(f)
            .ok_or(egoloc::Error::IndexOutOfRange { index: f, len: poses.poses.len() })?;
        let cfg = ObserveConfig::default().with_pose_gravity(&rec.to_pose()?);
        return Ok(Some(cfg.gravity_prior));
    }
    Ok(None)
}

pub fn run(args: Args, file: Option<&Path>) -> Result<()> {
    let mut s: PredictSettings = resolve(file, "predict")?;
    s.prediction.k = args.k.unwrap_or(s.prediction.k);
    s.prediction.max_iters = args.max_iters.unwrap_or(s.prediction.max_iters);
    if let Some(g) = gravity_prior(&args)? {
        s.observe.gravity_prior = g;
    }

    let mut rec = Recorder::new("predict", &s)?;
    rec.input("db", &args.db);
    rec.input("depth", &args.depth);
    if let Some(p) = &args.poses {
        rec.input("poses", p);
    }
    let db = egdb::load(&args.db, SearchStrategy::Auto)?;
    let depth = egod::load(&args.depth)?;
    let obs = observe(&depth, db.grid(), &s.observe)?;
    let prediction = predict_from_observation(obs, &db, &s.prediction)?;
    let basis = db.basis();

    let candidates = prediction
        .candidates
        .iter()
        .map(|c| {
            let t = reconstruct(&c.beta, basis)?;
            Ok(Candidate {
                beta: c.beta.0.clone(),
                points: t.points.clone(),
                init_cost: c.init_cost,
                final_cost: c.final_cost,
                source_entry: SourceEntry { scene_id: c.source.scene_id, frame_id: c.source.frame_id },
                knn_rank: c.knn_rank,
                knn_distance: c.knn_distance,
                iterations: c.iterations,
                status: c.status,
            })
        })
        .collect::<Result<Vec<_>, egoloc::Error>>()?;
    let out = PredictionOutput {
        format: FORMAT.into(),
        version: 1,
        dt: basis.dt,
        horizon: basis.horizon(),
        pitch: prediction.observation.pitch,
        pitch_bin: prediction.pitch_bin,
        truncated: prediction.truncated,
        candidates,
    };

    let betas: Vec<_> = prediction.candidates.iter().map(|c| &c.beta).collect();
    let psi = discover(&betas, basis, &prediction.observation.map, &s.discovery)?;
    let detections = DetectionsOutput {
        threshold: s.discovery.threshold,
        resolution: s.discovery.resolution,
        extent: s.discovery.extent,
        detections: extract_detections(&psi, s.discovery.threshold)?,
    };

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let pred_path = args.out.join("prediction.json");
    std::fs::write(&pred_path, serde_json::to_string_pretty(&out)? + "\n")?;
    let back: PredictionOutput = serde_json::from_str(&std::fs::read_to_string(&pred_path)?)?;
    if back.candidates.len() != out.candidates.len() {
        anyhow::bail!("prediction.json failed to read back");
    }
    rec.output("prediction", &pred_path);

    let csv = args.out.join("psi.csv");
    psi.write_csv(BufWriter::new(File::create(&csv)?))?;
    rec.output("psi_csv", &csv);
    let pgm = args.out.join("psi.pgm");
    psi.write_pgm(BufWriter::new(File::create(&pgm)?))?;
    rec.output("psi_pgm", &pgm);
    let map_csv = args.out.join("egospace.csv");
    prediction.observation.map.write_phi_csv(BufWriter::new(File::create(&map_csv)?))?;
    rec.output("egospace_csv", &map_csv);
    let mask_csv = args.out.join("egospace_mask.csv");
    prediction.observation.map.write_mask_csv(BufWriter::new(File::create(&mask_csv)?))?;
    rec.output("egospace_mask_csv", &mask_csv);
    let det = args.out.join("detections.json");
    std::fs::write(&det, serde_json::to_string_pretty(&detections)? + "\n")?;
    rec.output("detections", &det);

    rec.summary(serde_json::json!({
        "candidates": out.candidates.len(),
        "pitch_bin": out.pitch_bin,
        "truncated": out.truncated,
        "detections": detections.detections.len(),
    }))?;
    rec.finish(&args.out.join("manifest.json"))?;
    println!(
        "{} candidates (pitch bin {}), {} detections, written to {}",
        out.candidates.len(),
        out.pitch_bin,
        detections.detections.len(),
        args.out.display()
    );
    Ok(())
}
