use std::path::{Path, PathBuf};

use anyhow::Result;
use egoloc::database::{build_database, egdb, BasisSource, DatabaseConfig, SearchStrategy};
use egoloc::dataset::Dataset;
use egoloc::egospace::GridSpec;
use egoloc::evalharness::BasisType;
use egoloc::observe::ObserveConfig;
use serde::{Deserialize, Serialize};

use crate::config::resolve;
use crate::manifest::Recorder;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSettings {
    pub k: usize,
    pub basis: BasisType,
    pub horizon: usize,
    pub grid: GridSpec,
    pub observe: ObserveConfig,
    pub gravity_from_pose: bool,
    /// Fixed pitch bin edges in radians; training terciles when absent.
    pub pitch_edges: Option<[f64; 2]>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = DatabaseConfig::default();
        TrainSettings {
            k: 6,
            basis: BasisType::Pca,
            horizon: d.horizon,
            grid: d.grid,
            observe: d.observe,
            gravity_from_pose: d.gravity_from_pose,
            pitch_edges: d.pitch_edges,
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    data: PathBuf,
    /// Output database file.
    #[arg(long)]
    out: PathBuf,
    /// Basis size.
    #[arg(long = "K", alias = "basis-k")]
    k: Option<usize>,
    #[arg(long, value_parser = parse_basis)]
    basis: Option<BasisType>,
    /// Future samples per trajectory.
    #[arg(long)]
    horizon: Option<usize>,
}

fn parse_basis(s: &str) -> Result<BasisType, String> {
    match s {
        "pca" => Ok(BasisType::Pca),
        "dct" => Ok(BasisType::Dct),
        _ => Err(format!("expected pca or dct, got {s:?}")),
    }
}

pub fn manifest_path(db: &Path) -> PathBuf {
    let mut name = db.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    db.with_file_name(name)
}

pub fn run(args: Args, file: Option<&Path>) -> Result<()> {
    let mut s: TrainSettings = resolve(file, "train")?;
    s.k = args.k.unwrap_or(s.k);
    s.basis = args.basis.unwrap_or(s.basis);
    s.horizon = args.horizon.unwrap_or(s.horizon);

    let mut rec = Recorder::new("train", &s)?;
    let data = Dataset::load(&args.data)?;
    rec.input("data", &args.data);
    if let Some(c) = &data.index.config {
        rec.seed("dataset", c.seed);
    }
    let config = DatabaseConfig {
        grid: s.grid,
        basis: match s.basis {
            BasisType::Pca => BasisSource::Pca { k: s.k },
            BasisType::Dct => BasisSource::Dct { k: s.k },
        },
        horizon: s.horizon,
        dt: data.index.dt,
        observe: s.observe,
        gravity_from_pose: s.gravity_from_pose,
        pitch_edges: s.pitch_edges,
        strategy: SearchStrategy::Auto,
        depth_feature: None,
    };
    let built = build_database(&data.sources(), &config)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    egdb::save(&args.out, &built.database)?;
    rec.output("database", &args.out);
    let r = &built.report;
    rec.summary(serde_json::json!({
        "entries": built.database.len(),
        "trajectories": r.trajectories,
        "explained_variance_ratio": r.explained_variance_ratio,
        "effective_rank": r.effective_rank,
        "rank_deficient": r.rank_deficient,
        "bin_sizes": r.bin_sizes,
        "pitch_edges": built.database.pitch_edges(),
    }))?;
    rec.finish(&manifest_path(&args.out))?;

    println!("database: {} entries, bins {:?}", built.database.len(), r.bin_sizes);
    if !r.explained_variance_ratio.is_empty() {
        let total: f64 = r.explained_variance_ratio.iter().sum();
        println!("explained variance: {:.4} (per component {:?})", total, r.explained_variance_ratio);
    }
    if r.rank_deficient {
        eprintln!("warning: trajectories span only {} of {} basis directions", r.effective_rank, built.database.basis().dim());
    }
    Ok(())
}
