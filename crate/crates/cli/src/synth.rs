use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use egoloc::dataset::{write_dataset, SynthConfig};
use egoloc::synthworld::Template;

use crate::config::resolve;
use crate::manifest::Recorder;

#[derive(clap::Args)]
pub struct Args {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// World template; templates rotate when omitted.
    #[arg(long)]
    template: Option<Template>,
    #[arg(long)]
    worlds: Option<usize>,
    /// Walks per world.
    #[arg(long)]
    sequences: Option<usize>,
    /// Frames per walk.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Gaussian depth noise, meters.
    #[arg(long)]
    depth_noise_sigma: Option<f64>,
}

pub fn run(args: Args, file: Option<&Path>) -> Result<()> {
    let mut cfg: SynthConfig = resolve(file, "synth")?;
    if args.template.is_some() {
        cfg.template = args.template;
    }
    cfg.worlds = args.worlds.unwrap_or(cfg.worlds);
    cfg.sequences_per_world = args.sequences.unwrap_or(cfg.sequences_per_world);
    cfg.frames = args.frames.unwrap_or(cfg.frames);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.depth_noise_sigma = args.depth_noise_sigma.unwrap_or(cfg.depth_noise_sigma);

    let mut rec = Recorder::new("synth", &cfg)?;
    rec.seed("seed", cfg.seed);
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let index = write_dataset(&args.out, &cfg)?;
    rec.output("dataset", &args.out.join("dataset.json"));
    let frames: usize = index.sequences.iter().map(|s| s.frames).sum();
    rec.summary(serde_json::json!({ "sequences": index.sequences.len(), "frames": frames }))?;
    rec.finish(&args.out.join("manifest.json"))?;
    println!("wrote {} sequences, {frames} frames to {}", index.sequences.len(), args.out.display());
    Ok(())
}
