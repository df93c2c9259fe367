use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::substream;
use crate::error::{Error, Result};

/// Ground-anchored axis-aligned box, `min[1] == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    /// Box spanning `[x0, x1] x [0, height] x [z0, z1]`, corners in any order.
    pub fn footprint(x0: f64, z0: f64, x1: f64, z1: f64, height: f64) -> Self {
        Aabb { min: [x0.min(x1), 0.0, z0.min(z1)], max: [x0.max(x1), height, z0.max(z1)] }
    }

    pub fn height(&self) -> f64 {
        self.max[1]
    }

    /// Horizontal distance from `(x, z)` to the footprint, 0 inside.
    pub fn distance_xz(&self, x: f64, z: f64) -> f64 {
        let dx = (self.min[0] - x).max(0.0).max(x - self.max[0]);
        let dz = (self.min[2] - z).max(0.0).max(z - self.max[2]);
        dx.hypot(dz)
    }

    pub fn contains_xz(&self, x: f64, z: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && z >= self.min[2] && z <= self.max[2]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    fn overlaps_xz(&self, other: &Aabb, gap: f64) -> bool {
        self.min[0] - gap < other.max[0]
            && other.min[0] - gap < self.max[0]
            && self.min[2] - gap < other.max[2]
            && other.min[2] - gap < self.max[2]
    }
}

/// Walkable rectangle on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Bounds {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x_min && x <= self.x_max && z >= self.z_min && z <= self.z_max
    }

    /// Distance from `(x, z)` to the nearest edge, negative outside.
    pub fn inset(&self, x: f64, z: f64) -> f64 {
        (x - self.x_min).min(self.x_max - x).min(z - self.z_min).min(self.z_max - z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    Open,
    SingleBox,
    Corridor,
    YJunction,
    CornerTurn,
    Random,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::Open,
        Template::SingleBox,
        Template::Corridor,
        Template::YJunction,
        Template::CornerTurn,
        Template::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Template::Open => "open",
            Template::SingleBox => "single-box",
            Template::Corridor => "corridor",
            Template::YJunction => "y-junction",
            Template::CornerTurn => "corner-turn",
            Template::Random => "random",
        }
    }
}

impl std::str::FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown template '{s}'")))
    }
}

/// A designated route through a template, used to seed agent goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub start: [f64; 2],
    pub goals: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub template: Template,
    pub seed: u64,
    pub bounds: Bounds,
    pub boxes: Vec<Aabb>,
    /// Template-specific start and goal candidates; empty routes mean
    /// endpoints are drawn at random.
    pub routes: Vec<Route>,
}

impl World {
    /// Horizontal clearance from `(x, z)` to the nearest box, infinite in
    /// an empty world.
    pub fn clearance(&self, x: f64, z: f64) -> f64 {
        self.boxes.iter().map(|b| b.distance_xz(x, z)).fold(f64::INFINITY, f64::min)
    }

    pub fn is_free(&self, x: f64, z: f64, radius: f64) -> bool {
        self.bounds.contains(x, z) && self.clearance(x, z) >= radius
    }

    /// Inside any box (3D).
    pub fn occupied(&self, p: [f64; 3]) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if !(b.x_max > b.x_min && b.z_max > b.z_min) {
            return Err(Error::Generation("degenerate bounds".into()));
        }
        for bx in &self.boxes {
            if bx.min[1] != 0.0 || (0..3).any(|a| !(bx.max[a] > bx.min[a])) {
                return Err(Error::Generation(format!("invalid box {bx:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    pub half_size: f64,
    /// Box count range for the random template.
    pub box_count: (usize, usize),
    /// Footprint side range.
    pub box_size: (f64, f64),
    pub box_height: (f64, f64),
    pub wall_height: (f64, f64),
    pub max_retries: usize,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            half_size: 20.0,
            box_count: (3, 8),
            box_size: (0.8, 3.0),
            box_height: (0.6, 2.5),
            wall_height: (2.2, 3.0),
            max_retries: 200,
        }
    }
}

const WALL: f64 = 0.3;

pub fn generate_world(template: Template, params: &WorldParams, seed: u64) -> Result<World> {
    let mut rng = substream(seed, "world");
    let s = params.half_size;
    if !(s > 8.0) {
        return Err(Error::InvalidParameter("world half size must exceed 8 m".into()));
    }
    let bounds = Bounds { x_min: -s, x_max: s, z_min: -s, z_max: s };
    let wall_h = rng.random_range(params.wall_height.0..=params.wall_height.1);
    let (boxes, routes) = match template {
        Template::Open => (Vec::new(), Vec::new()),
        Template::SingleBox => single_box(&mut rng, s),
        Template::Corridor => corridor(&mut rng, s, wall_h),
        Template::YJunction => y_junction(&mut rng, s, wall_h),
        Template::CornerTurn => corner_turn(&mut rng, s, wall_h),
        Template::Random => (random_boxes(&mut rng, params, s)?, Vec::new()),
    };
    let world = World { template, seed, bounds, boxes, routes };
    world.validate()?;
    Ok(world)
}

fn single_box(rng: &mut ChaCha8Rng, s: f64) -> (Vec<Aabb>, Vec<Route>) {
    let cx = rng.random_range(-1.0..1.0);
    let cz = rng.random_range(-2.0..2.0);
    let w = rng.random_range(1.0..2.5);
    let d = rng.random_range(0.8..2.0);
    let h = rng.random_range(0.8..2.0);
    let b = Aabb::footprint(cx - w / 2.0, cz - d / 2.0, cx + w / 2.0, cz + d / 2.0, h);
    let start = [rng.random_range(-1.5..1.5), -s + 3.0];
    let routes = vec![
        Route { start, goals: vec![[cx - w / 2.0 - 1.2, cz + d / 2.0 + 1.0], [rng.random_range(-4.0..0.0), s - 3.0]] },
        Route { start, goals: vec![[cx + w / 2.0 + 1.2, cz + d / 2.0 + 1.0], [rng.random_range(0.0..4.0), s - 3.0]] },
    ];
    (vec![b], routes)
}

fn corridor(rng: &mut ChaCha8Rng, s: f64, h: f64) -> (Vec<Aabb>, Vec<Route>) {
    let w = rng.random_range(3.0..5.0);
    let len = rng.random_range(10.0..14.0);
    let boxes = vec![
        Aabb::footprint(-w / 2.0 - WALL, -len, -w / 2.0, len, h),
        Aabb::footprint(w / 2.0, -len, w / 2.0 + WALL, len, h),
    ];
    let routes = vec![Route { start: [0.0, -s + 2.0], goals: vec![[0.0, len + 1.0], [rng.random_range(-6.0..6.0), s - 2.0]] }];
    (boxes, routes)
}

/// Boxes of side `2 half` every `step` along the segment `a-b`, standing
/// in for a slanted wall.
fn staircase(a: [f64; 2], b: [f64; 2], half: f64, height: f64) -> Vec<Aabb> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let n = (len / (0.8 * half)).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let (x, z) = (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t);
            Aabb::footprint(x - half, z - half, x + half, z + half, height)
        })
        .collect()
}

/// Stem corridor along +Z splitting into two corridors that leave at
/// `+-angle` from the stem axis.
fn y_junction(rng: &mut ChaCha8Rng, s: f64, h: f64) -> (Vec<Aabb>, Vec<Route>) {
    let w = rng.random_range(3.5..5.0);
    let angle = rng.random_range(25f64.to_radians()..40f64.to_radians());
    let stem = -rng.random_range(9.0..12.0);
    let branch = rng.random_range(10.0..13.0);
    let half = 0.3;
    let mut boxes = vec![
        Aabb::footprint(-w / 2.0 - WALL, stem, -w / 2.0, 0.0, h),
        Aabb::footprint(w / 2.0, stem, w / 2.0 + WALL, 0.0, h),
    ];
    let mut routes = Vec::new();
    for side in [-1.0, 1.0] {
        // branch axis and its normal pointing away from the other branch
        let d = [side * angle.sin(), angle.cos()];
        let out = [side * angle.cos(), -angle.sin()];
        let along = |t: f64, offset: f64| [t * d[0] + offset * out[0], t * d[1] + offset * out[1]];
        // outer wall from the stem corner
        let o0 = [side * (w / 2.0 + half), 0.0];
        let o1 = [o0[0] + branch * d[0], o0[1] + branch * d[1]];
        boxes.extend(staircase(o0, o1, half, h));
        // inner walls meet on the stem axis
        let apex = (w / 2.0 + half) / angle.tan();
        boxes.extend(staircase(along(apex, -(w / 2.0 + half)), along(branch, -(w / 2.0 + half)), half, h));
        let exit = along(branch + 2.0, 0.0);
        let beyond = along(branch + 8.0, 0.0);
        routes.push(Route {
            start: [0.0, stem - 3.0],
            goals: vec![[0.0, -1.0], exit, [beyond[0].clamp(-s + 2.0, s - 2.0), beyond[1].min(s - 2.0)]],
        });
    }
    (boxes, routes)
}

fn corner_turn(rng: &mut ChaCha8Rng, s: f64, h: f64) -> (Vec<Aabb>, Vec<Route>) {
    let w = rng.random_range(4.0..6.0);
    let l = rng.random_range(0.0..4.0);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let far = s - 4.0;
    let leg = -far;
    // south leg x in [0, w] (mirrored by sign), east leg z in [l, l + w];
    // thin walls, so there is free space behind the inner corner
    let raw = [
        (-WALL, leg, 0.0, l + w + WALL),
        (w, leg, w + WALL, l),
        (w, l - WALL, far, l),
        (-WALL, l + w, far, l + w + WALL),
    ];
    let boxes = raw
        .iter()
        .map(|&(x0, z0, x1, z1)| Aabb::footprint(sign * x0, z0, sign * x1, z1, h))
        .collect();
    let routes = vec![Route {
        start: [sign * w / 2.0, leg - 2.0],
        goals: vec![[sign * w / 2.0, l + w / 2.0], [sign * (far + 2.0), l + w / 2.0]],
    }];
    (boxes, routes)
}

fn random_boxes(rng: &mut ChaCha8Rng, params: &WorldParams, s: f64) -> Result<Vec<Aabb>> {
    let (lo, hi) = params.box_count;
    if lo > hi {
        return Err(Error::InvalidParameter("box count range is inverted".into()));
    }
    let n = rng.random_range(lo..=hi);
    let mut boxes: Vec<Aabb> = Vec::with_capacity(n);
    let mut tries = 0;
    while boxes.len() < n {
        tries += 1;
        if tries > params.max_retries * n.max(1) {
            return Err(Error::Generation(format!("placed {} of {n} boxes", boxes.len())));
        }
        let w = rng.random_range(params.box_size.0..=params.box_size.1);
        let d = rng.random_range(params.box_size.0..=params.box_size.1);
        let h = rng.random_range(params.box_height.0..=params.box_height.1);
        let x = rng.random_range(-s + 3.0..s - 3.0 - w);
        let z = rng.random_range(-s + 3.0..s - 3.0 - d);
        let b = Aabb::footprint(x, z, x + w, z + d, h);
        if boxes.iter().all(|o| !o.overlaps_xz(&b, 2.0)) {
            boxes.push(b);
        }
    }
    Ok(boxes)
}

/// Seeded world mix for corpora: template `i % 6` unless a template is
/// forced.
pub fn generate_worlds(count: usize, template: Option<Template>, params: &WorldParams, seed: u64) -> Result<Vec<World>> {
    let mut rng = ChaCha8Rng::from_rng(&mut substream(seed, "worlds"));
    (0..count)
        .map(|i| {
            let t = template.unwrap_or(Template::ALL[i % Template::ALL.len()]);
            generate_world(t, params, rng.random())
        })
        .collect()
}
