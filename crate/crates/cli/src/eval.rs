use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use egoloc::database::{build_database, egdb, BasisSource, DatabaseConfig, DepthFeatureSpec, SearchStrategy};
use egoloc::dataset::Dataset;
use egoloc::evalharness::benchmark::{
    evaluate, frames_with_occlusion, scene_detection, DetectionConfig, EvalConfig, Method,
};
use serde::{Deserialize, Serialize};

use crate::config::{invalid, parse_list, resolve};
use crate::manifest::Recorder;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSettings {
    pub eval: EvalConfig,
    /// Discovery settings for the detection table; templates not listed
    /// are skipped.
    pub detection: DetectionConfig,
    pub depth_feature: DepthFeatureSpec,
}

impl Default for EvalSettings {
    fn default() -> Self {
        let mut methods = Method::BASELINES.to_vec();
        methods.push(Method::EgoSpaceOpt);
        EvalSettings {
            eval: EvalConfig { methods, ..EvalConfig::default() },
            detection: DetectionConfig::default(),
            depth_feature: DepthFeatureSpec::default(),
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Training database (EGDB).
    #[arg(long)]
    db: PathBuf,
    /// Held-out dataset directory.
    #[arg(long)]
    test_data: PathBuf,
    /// Training dataset; needed for the depth-image baselines.
    #[arg(long)]
    train_data: Option<PathBuf>,
    /// Comma-separated methods (straight, pure-2d, ground-plane-2d,
    /// egospace-noopt, egospace-opt, oracle).
    #[arg(long)]
    methods: Option<String>,
    /// Add the ground-truth method as a harness check.
    #[arg(long)]
    oracle: bool,
    /// Comma-separated k values.
    #[arg(long)]
    k_values: Option<String>,
    /// Hit radius, meters.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of test frames, spread evenly.
    #[arg(long)]
    test_frames: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Skip the detection table.
    #[arg(long)]
    no_detection: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args, file: Option<&Path>) -> Result<()> {
    let mut s: EvalSettings = resolve(file, "eval")?;
    if let Some(m) = &args.methods {
        s.eval.methods = parse_list::<Method>(m)?;
    }
    if args.oracle && !s.eval.methods.contains(&Method::Oracle) {
        s.eval.methods.push(Method::Oracle);
    }
    if let Some(k) = &args.k_values {
        s.eval.precision.k_values = parse_list(k)?;
    }
    s.eval.precision.epsilon = args.epsilon.unwrap_or(s.eval.precision.epsilon);
    if args.test_frames.is_some() {
        s.eval.test_frames = args.test_frames;
    }
    s.eval.prediction.max_iters = args.max_iters.unwrap_or(s.eval.prediction.max_iters);
    s.detection.prediction = s.eval.prediction;
    if args.no_detection {
        s.detection.templates.clear();
    }

    let mut rec = Recorder::new("eval", &s)?;
    rec.input("db", &args.db);
    rec.input("test_data", &args.test_data);
    let db = egdb::load(&args.db, SearchStrategy::Auto)?;
    let test = Dataset::load(&args.test_data)?;
    if let Some(c) = &test.index.config {
        rec.seed("test_dataset", c.seed);
    }

    let needs_depth = s.eval.methods.iter().any(|m| matches!(m, Method::Pure2d | Method::GroundPlane2d));
    let depth_db = match (&args.train_data, needs_depth) {
        (Some(path), true) => {
            rec.input("train_data", path);
            let train = Dataset::load(path)?;
            if let Some(c) = &train.index.config {
                rec.seed("train_dataset", c.seed);
            }
            let config = DatabaseConfig {
                grid: *db.grid(),
                basis: BasisSource::Given(db.basis().clone()),
                horizon: db.basis().horizon(),
                dt: db.basis().dt,
                observe: s.eval.observe,
                gravity_from_pose: s.eval.gravity_from_pose,
                pitch_edges: Some(db.pitch_edges()),
                strategy: SearchStrategy::Auto,
                depth_feature: Some(s.depth_feature),
            };
            build_database(&train.sources(), &config)?.depth_database
        }
        (None, true) => {
            return Err(invalid("pure-2d and ground-plane-2d need --train-data (or leave them out with --methods)".into()))
        }
        _ => None,
    };

    let mut report = evaluate(&db, depth_db.as_ref(), &test.sources(), &s.eval)?;
    let horizon = db.basis().horizon();
    for (entry, seq) in test.index.sequences.iter().zip(&test.sequences) {
        let world = test.world(entry)?;
        if !s.detection.templates.contains(&world.template) {
            continue;
        }
        let frames = 0..seq.poses.len().saturating_sub(horizon);
        let candidates = frames_with_occlusion(&world, &seq.poses, frames, &test.index.intrinsics, &db, &s.detection)?;
        let name = format!("seq-{:04}", entry.scene_id);
        report.detection.push(scene_detection(name, &world, seq, &candidates, &db, &s.eval.observe, &s.detection)?);
    }

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let json = args.out.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(&report)? + "\n")?;
    rec.output("report", &json);
    let pcsv = args.out.join("precision.csv");
    std::fs::write(&pcsv, report.precision_csv())?;
    rec.output("precision_csv", &pcsv);
    let dcsv = args.out.join("detection.csv");
    std::fs::write(&dcsv, report.detection_csv())?;
    rec.output("detection_csv", &dcsv);
    rec.summary(serde_json::json!({
        "frames_evaluated": report.frames_evaluated,
        "frames_skipped": report.frames_skipped,
        "detection_scenes": report.detection.len(),
    }))?;
    rec.finish(&args.out.join("manifest.json"))?;

    print!("{}", report.precision_csv());
    if !report.detection.is_empty() {
        print!("{}", report.detection_csv());
    }
    Ok(())
}
