use std::path::{Path, PathBuf};

use anyhow::Result;
use egoloc::dataset::Dataset;
use egoloc::evalharness::{reconstruction_curve, BasisType};
use egoloc::synthworld::true_ego_frame;
use egoloc::trajectory::{ego_project_future, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{invalid, resolve};
use crate::manifest::Recorder;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasesSettings {
    pub k_min: usize,
    pub k_max: usize,
    pub horizon: usize,
    /// Cap on the trajectory count, spread evenly; all when absent.
    pub max_trajectories: Option<usize>,
}

impl Default for BasesSettings {
    fn default() -> Self {
        BasesSettings { k_min: 1, k_max: 12, horizon: 30, max_trajectories: None }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    max_trajectories: Option<usize>,
    /// Output CSV with columns K, pca, dct.
    #[arg(long)]
    out: PathBuf,
}

/// Ground-truth future of every frame with a full horizon, in the frame's
/// true ego frame.
fn trajectories(data: &Dataset, horizon: usize) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for seq in &data.sequences {
        for f in 0..seq.poses.len().saturating_sub(horizon) {
            let frame = true_ego_frame(&seq.poses[f])?;
            out.push(ego_project_future(&seq.poses, f, horizon, &frame, data.index.dt)?);
        }
    }
    Ok(out)
}

pub fn run(args: Args, file: Option<&Path>) -> Result<()> {
    let mut s: BasesSettings = resolve(file, "bases")?;
    s.k_min = args.k_min.unwrap_or(s.k_min);
    s.k_max = args.k_max.unwrap_or(s.k_max);
    s.horizon = args.horizon.unwrap_or(s.horizon);
    if args.max_trajectories.is_some() {
        s.max_trajectories = args.max_trajectories;
    }
    if s.k_min == 0 || s.k_min > s.k_max {
        return Err(invalid(format!("bad K range {}..={}", s.k_min, s.k_max)));
    }

    let mut rec = Recorder::new("bases", &s)?;
    rec.input("data", &args.data);
    let data = Dataset::load(&args.data)?;
    if let Some(c) = &data.index.config {
        rec.seed("dataset", c.seed);
    }
    let mut trajs = trajectories(&data, s.horizon)?;
    if let Some(n) = s.max_trajectories.filter(|&n| n < trajs.len()) {
        trajs = (0..n).map(|j| trajs[j * trajs.len() / n].clone()).collect();
    }
    let ks: Vec<usize> = (s.k_min..=s.k_max).collect();
    let pca = reconstruction_curve(&trajs, BasisType::Pca, &ks)?;
    let dct = reconstruction_curve(&trajs, BasisType::Dct, &ks)?;

    let mut csv = String::from("K,pca,dct\n");
    for ((k, p), (_, d)) in pca.iter().zip(&dct) {
        csv.push_str(&format!("{k},{p:.6},{d:.6}\n"));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, &csv)?;
    rec.output("curve", &args.out);
    rec.summary(serde_json::json!({ "trajectories": trajs.len() }))?;
    let mut name = args.out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    rec.finish(&args.out.with_file_name(name))?;
    print!("{csv}");
    Ok(())
}
