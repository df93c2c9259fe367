//! Synthetic corpora in memory and on disk.
//!
//! On-disk layout:
//!
//! ```text
//! dataset.json              index: seed, dt, intrinsics, sequences
//! world_0000.json           one per world
//! seq_0000/poses.json       camera poses of the sequence
//! seq_0000/depth_00000.egod one depth file per frame
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::database::FrameSource;
use crate::error::{Error, Result};
use crate::geometry::{egod, CameraIntrinsics, CameraPose, DepthImage, Vec3};
use crate::synthworld::{
    generate_worlds, render_depth, simulate_sequence, substream, AgentPath, MotionParams, Template, World, WorldParams,
};

pub const FORMAT: &str = "egoloc-dataset";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub worlds: usize,
    /// Every world uses this template; templates rotate when `None`.
    pub template: Option<Template>,
    pub sequences_per_world: usize,
    pub frames: usize,
    pub seed: u64,
    pub depth_noise_sigma: f64,
    pub intrinsics: CameraIntrinsics,
    pub world: WorldParams,
    pub motion: MotionParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            worlds: 6,
            template: None,
            sequences_per_world: 2,
            frames: 60,
            seed: 0,
            depth_noise_sigma: 0.0,
            intrinsics: CameraIntrinsics::default_sim(),
            world: WorldParams::default(),
            motion: MotionParams::default(),
        }
    }
}

/// A world and the walks simulated in it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub world_id: u32,
    pub world: World,
    /// `(scene id, render seed, walk)`.
    pub walks: Vec<(u32, u64, AgentPath)>,
}

/// Worlds and walks for a corpus; deterministic in the config.
pub fn generate_scenes(cfg: &SynthConfig) -> Result<Vec<Scene>> {
    if cfg.frames == 0 || cfg.sequences_per_world == 0 {
        return Err(Error::InvalidParameter("need at least one sequence and one frame".into()));
    }
    let worlds = generate_worlds(cfg.worlds, cfg.template, &cfg.world, cfg.seed)?;
    let mut seq_rng = substream(cfg.seed, "sequences");
    let mut next_id = 0u32;
    let mut scenes = Vec::with_capacity(worlds.len());
    for (wi, world) in worlds.into_iter().enumerate() {
        let mut walks = Vec::with_capacity(cfg.sequences_per_world);
        for _ in 0..cfg.sequences_per_world {
            let agent_seed: u64 = seq_rng.random();
            let render_seed: u64 = seq_rng.random();
            walks.push((next_id, render_seed, simulate_sequence(&world, cfg.frames, &cfg.motion, agent_seed)?));
            next_id += 1;
        }
        scenes.push(Scene { world_id: wi as u32, world, walks });
    }
    Ok(scenes)
}

/// Depth rendered on demand, rounded to the `f32` precision of EGOD files
/// so in-memory and on-disk corpora agree.
pub struct SimSequence<'a> {
    pub world: &'a World,
    pub scene_id: u32,
    pub poses: Vec<CameraPose>,
    pub intrinsics: CameraIntrinsics,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl<'a> SimSequence<'a> {
    pub fn new(world: &'a World, scene_id: u32, walk: &AgentPath, cfg: &SynthConfig, seed: u64) -> Self {
        SimSequence {
            world,
            scene_id,
            poses: walk.poses(),
            intrinsics: cfg.intrinsics,
            noise_sigma: cfg.depth_noise_sigma,
            seed,
        }
    }
}

impl FrameSource for SimSequence<'_> {
    fn scene_id(&self) -> u32 {
        self.scene_id
    }

    fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    fn depth(&self, frame: usize) -> Result<DepthImage> {
        let pose = self.poses.get(frame).ok_or(Error::IndexOutOfRange { index: frame, len: self.poses.len() })?;
        let img = render_depth(self.world, pose, &self.intrinsics, self.noise_sigma, self.seed.wrapping_add(frame as u64))?;
        let rounded = img.depths().iter().zip(img.validity()).map(|(z, ok)| if *ok { *z as f32 as f64 } else { 0.0 }).collect();
        DepthImage::from_raw(self.intrinsics, rounded)
    }
}

/// All sequences of a set of scenes as frame sources.
pub fn sim_sequences<'a>(scenes: &'a [Scene], cfg: &SynthConfig) -> Vec<SimSequence<'a>> {
    scenes
        .iter()
        .flat_map(|s| s.walks.iter().map(move |(id, seed, walk)| SimSequence::new(&s.world, *id, walk, cfg, *seed)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub scene_id: u32,
    pub world_id: u32,
    pub world: String,
    pub dir: String,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub format: String,
    pub version: u32,
    pub dt: f64,
    pub intrinsics: CameraIntrinsics,
    pub config: Option<SynthConfig>,
    pub sequences: Vec<SequenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub position: [f64; 3],
    /// Camera-to-world rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    pub yaw: Option<f64>,
    pub pitch: Option<f64>,
}

impl PoseRecord {
    pub fn from_pose(pose: &CameraPose, yaw: Option<f64>, pitch: Option<f64>) -> Self {
        let m = pose.rotation.matrix();
        PoseRecord {
            position: [pose.position.x, pose.position.y, pose.position.z],
            rotation: [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]]),
            yaw,
            pitch,
        }
    }

    pub fn to_pose(&self) -> Result<CameraPose> {
        let r = self.rotation;
        let m = Matrix3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]);
        let orth = (m.transpose() * m - Matrix3::identity()).norm();
        if !(orth < 1e-6) || !(m.determinant() > 0.0) {
            return Err(Error::Format("pose rotation is not a proper rotation".into()));
        }
        let [x, y, z] = self.position;
        Ok(CameraPose { position: Vec3::new(x, y, z), rotation: Rotation3::from_matrix_unchecked(m) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosesFile {
    pub scene_id: u32,
    pub dt: f64,
    pub eye_height: Option<f64>,
    pub speed: Option<f64>,
    pub poses: Vec<PoseRecord>,
}

pub fn depth_file_name(frame: usize) -> String {
    format!("depth_{frame:05}.egod")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Generates a corpus and writes it under `dir`.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig) -> Result<DatasetIndex> {
    let scenes = generate_scenes(cfg)?;
    fs::create_dir_all(dir)?;
    let mut sequences = Vec::new();
    for scene in &scenes {
        let world_file = format!("world_{:04}.json", scene.world_id);
        write_json(&dir.join(&world_file), &scene.world)?;
        for (scene_id, seed, walk) in &scene.walks {
            let seq_dir = format!("seq_{scene_id:04}");
            let path = dir.join(&seq_dir);
            fs::create_dir_all(&path)?;
            let source = SimSequence::new(&scene.world, *scene_id, walk, cfg, *seed);
            for f in 0..source.len() {
                egod::save(&path.join(depth_file_name(f)), &source.depth(f)?)?;
            }
            let poses = source
                .poses
                .iter()
                .zip(&walk.samples)
                .map(|(p, s)| PoseRecord::from_pose(p, Some(s.yaw), Some(s.pitch)))
                .collect();
            write_json(
                &path.join("poses.json"),
                &PosesFile { scene_id: *scene_id, dt: walk.dt, eye_height: Some(walk.eye_height), speed: Some(walk.speed), poses },
            )?;
            sequences.push(SequenceEntry {
                scene_id: *scene_id,
                world_id: scene.world_id,
                world: world_file.clone(),
                dir: seq_dir,
                frames: source.len(),
            });
        }
    }
    let index = DatasetIndex {
        format: FORMAT.into(),
        version: VERSION,
        dt: cfg.motion.dt,
        intrinsics: cfg.intrinsics,
        config: Some(cfg.clone()),
        sequences,
    };
    write_json(&dir.join("dataset.json"), &index)?;
    Ok(index)
}

/// Sequence read lazily from disk.
pub struct DiskSequence {
    pub scene_id: u32,
    pub world_id: u32,
    pub dir: PathBuf,
    pub poses: Vec<CameraPose>,
}

impl FrameSource for DiskSequence {
    fn scene_id(&self) -> u32 {
        self.scene_id
    }

    fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    fn depth(&self, frame: usize) -> Result<DepthImage> {
        egod::load(&self.dir.join(depth_file_name(frame)))
    }
}

pub struct Dataset {
    pub root: PathBuf,
    pub index: DatasetIndex,
    pub sequences: Vec<DiskSequence>,
}

impl Dataset {
    pub fn load(root: &Path) -> Result<Self> {
        let index: DatasetIndex = serde_json::from_str(&fs::read_to_string(root.join("dataset.json"))?)?;
        if index.format != FORMAT || index.version != VERSION {
            return Err(Error::Format(format!("unsupported dataset {} v{}", index.format, index.version)));
        }
        let mut sequences = Vec::with_capacity(index.sequences.len());
        for s in &index.sequences {
            let dir = root.join(&s.dir);
            let poses: PosesFile = serde_json::from_str(&fs::read_to_string(dir.join("poses.json"))?)?;
            if poses.poses.len() != s.frames {
                return Err(Error::Format(format!("{} lists {} frames, poses has {}", s.dir, s.frames, poses.poses.len())));
            }
            if (poses.dt - index.dt).abs() > 1e-12 {
                return Err(Error::Format(format!("{} has dt {} but the dataset uses {}", s.dir, poses.dt, index.dt)));
            }
            let poses = poses.poses.iter().map(PoseRecord::to_pose).collect::<Result<Vec<_>>>()?;
            sequences.push(DiskSequence { scene_id: s.scene_id, world_id: s.world_id, dir, poses });
        }
        Ok(Dataset { root: root.to_path_buf(), index, sequences })
    }

    pub fn world(&self, entry: &SequenceEntry) -> Result<World> {
        Ok(serde_json::from_str(&fs::read_to_string(self.root.join(&entry.world))?)?)
    }

    pub fn sources(&self) -> Vec<&dyn FrameSource> {
        self.sequences.iter().map(|s| s as &dyn FrameSource).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_record_round_trip() {
        let p = CameraPose::from_yaw_pitch(Vec3::new(1.0, 1.6, -2.0), 0.7, 0.3);
        let back = PoseRecord::from_pose(&p, None, None).to_pose().unwrap();
        assert!((back.rotation.matrix() - p.rotation.matrix()).norm() < 1e-15);
        assert_eq!(back.position, p.position);
        let mut bad = PoseRecord::from_pose(&p, None, None);
        bad.rotation[0][0] = 3.0;
        assert!(bad.to_pose().is_err());
    }

    #[test]
    fn scenes_are_deterministic() {
        let cfg = SynthConfig { worlds: 2, frames: 35, ..SynthConfig::default() };
        let a = generate_scenes(&cfg).unwrap();
        let b = generate_scenes(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.world, y.world);
            assert_eq!(x.walks, y.walks);
        }
        let ids: Vec<u32> = a.iter().flat_map(|s| s.walks.iter().map(|w| w.0)).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }
}
