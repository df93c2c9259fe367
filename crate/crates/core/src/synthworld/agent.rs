use pathfinding::prelude::astar;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::substream;
use super::world::World;
use crate::error::{Error, Result};
use crate::geometry::{CameraPose, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub agent_radius: f64,
    pub grid_resolution: f64,
    pub speed: (f64, f64),
    pub dt: f64,
    pub eye_height: (f64, f64),
    /// Downward pitch bands `(center, half width)`, radians; one band is
    /// drawn per sequence, then pitch is uniform inside it per frame.
    pub pitch_bands: Vec<(f64, f64)>,
    pub smoothing_passes: usize,
    /// Pure-pursuit lookahead along the plan, meters.
    pub lookahead: f64,
    /// Steering gain on heading error, 1/s.
    pub steer_gain: f64,
    /// Turn-rate limit, rad/s.
    pub max_turn_rate: f64,
    /// Low-pass time constant of the turn rate, seconds.
    pub turn_time_constant: f64,
    /// Range of distances to follow-up goals and their angular spread
    /// around the current heading.
    pub goal_distance: (f64, f64),
    pub goal_spread: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            agent_radius: 0.35,
            grid_resolution: 0.25,
            speed: (1.0, 1.4),
            dt: 0.5,
            eye_height: (1.5, 1.7),
            pitch_bands: vec![
                (8f64.to_radians(), 5f64.to_radians()),
                (18f64.to_radians(), 5f64.to_radians()),
                (30f64.to_radians(), 5f64.to_radians()),
            ],
            smoothing_passes: 5,
            lookahead: 8.0,
            steer_gain: 0.6,
            max_turn_rate: 12f64.to_radians(),
            turn_time_constant: 3.0,
            goal_distance: (12.0, 25.0),
            goal_spread: 45f64.to_radians(),
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.agent_radius > 0.0
            && self.grid_resolution > 0.0
            && self.speed.0 > 0.0
            && self.speed.1 >= self.speed.0
            && self.dt > 0.0
            && self.eye_height.0 > 0.0
            && self.eye_height.1 >= self.eye_height.0
            && !self.pitch_bands.is_empty()
            && self.goal_distance.0 > 0.0
            && self.goal_distance.1 >= self.goal_distance.0
            && self.lookahead > 0.0
            && self.steer_gain > 0.0
            && self.max_turn_rate > 0.0
            && self.turn_time_constant > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid motion parameters".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub position: [f64; 2],
    /// Heading, 0 = +Z, pi/2 = +X.
    pub yaw: f64,
    /// Downward pitch, radians.
    pub pitch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPath {
    /// Smoothed polyline the samples follow.
    pub waypoints: Vec<[f64; 2]>,
    pub samples: Vec<PathSample>,
    pub speed: f64,
    pub eye_height: f64,
    pub dt: f64,
}

impl AgentPath {
    pub fn poses(&self) -> Vec<CameraPose> {
        self.samples
            .iter()
            .map(|s| {
                CameraPose::from_yaw_pitch(Vec3::new(s.position[0], self.eye_height, s.position[1]), s.yaw, s.pitch)
            })
            .collect()
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.samples.iter().map(|s| s.position).collect::<Vec<_>>())
    }
}

fn polyline_length(p: &[[f64; 2]]) -> f64 {
    p.windows(2).map(|w| dist(w[0], w[1])).sum()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Every point of segment `a-b` keeps `radius` clearance and stays inside
/// the bounds.
pub fn segment_clear(world: &World, a: [f64; 2], b: [f64; 2], radius: f64) -> bool {
    let n = (dist(a, b) / 0.05).ceil().max(1.0) as usize;
    (0..=n).all(|i| {
        let p = lerp(a, b, i as f64 / n as f64);
        world.is_free(p[0], p[1], radius)
    })
}

struct Grid<'a> {
    world: &'a World,
    res: f64,
    cols: i64,
    rows: i64,
    free: Vec<bool>,
    clearance: Vec<f64>,
}

impl<'a> Grid<'a> {
    fn new(world: &'a World, res: f64, inflate: f64) -> Self {
        let b = world.bounds;
        let cols = ((b.x_max - b.x_min) / res).floor() as i64;
        let rows = ((b.z_max - b.z_min) / res).floor() as i64;
        let mut g = Grid { world, res, cols, rows, free: Vec::new(), clearance: Vec::new() };
        g.clearance = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| {
                let [x, z] = g.center((c, r));
                world.clearance(x, z)
            })
            .collect();
        g.free = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| {
                let [x, z] = g.center((c, r));
                world.bounds.contains(x, z) && g.clearance[(r * cols + c) as usize] >= inflate
            })
            .collect();
        g
    }

    fn center(&self, (c, r): (i64, i64)) -> [f64; 2] {
        let b = self.world.bounds;
        [b.x_min + (c as f64 + 0.5) * self.res, b.z_min + (r as f64 + 0.5) * self.res]
    }

    /// Extra step cost for hugging obstacles.
    fn proximity_cost(&self, (c, r): (i64, i64), comfort: f64) -> i64 {
        let d = self.clearance[(r * self.cols + c) as usize];
        (40.0 * (comfort - d).max(0.0)).round() as i64
    }

    fn is_free(&self, (c, r): (i64, i64)) -> bool {
        c >= 0 && r >= 0 && c < self.cols && r < self.rows && self.free[(r * self.cols + c) as usize]
    }

    /// Nearest free cell to a point, searching outward a few rings.
    fn snap(&self, p: [f64; 2]) -> Option<(i64, i64)> {
        let b = self.world.bounds;
        let c0 = ((p[0] - b.x_min) / self.res).floor() as i64;
        let r0 = ((p[1] - b.z_min) / self.res).floor() as i64;
        (0..4i64)
            .flat_map(|ring| {
                (-ring..=ring).flat_map(move |dr| (-ring..=ring).map(move |dc| (c0 + dc, r0 + dr)))
            })
            .find(|cell| self.is_free(*cell))
    }
}

/// Shortest 8-connected grid path from `start` to `goal`, both of which
/// must be free.
pub fn astar_path(world: &World, start: [f64; 2], goal: [f64; 2], params: &MotionParams) -> Result<Vec<[f64; 2]>> {
    let inflate = params.agent_radius + 0.75 * params.grid_resolution;
    for p in [start, goal] {
        if !world.is_free(p[0], p[1], params.agent_radius) {
            return Err(Error::InvalidParameter(format!("endpoint {p:?} is not in free space")));
        }
    }
    let grid = Grid::new(world, params.grid_resolution, inflate);
    let comfort = params.agent_radius + 1.2;
    let s = grid.snap(start).ok_or(Error::Unreachable)?;
    let g = grid.snap(goal).ok_or(Error::Unreachable)?;
    let octile = |a: &(i64, i64)| {
        let dx = (a.0 - g.0).abs();
        let dy = (a.1 - g.1).abs();
        10 * dx.max(dy) + 4 * dx.min(dy)
    };
    let (cells, _) = astar(
        &s,
        |&(c, r)| {
            let mut next = Vec::with_capacity(8);
            for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let n = (c + dc, r + dr);
                if !grid.is_free(n) {
                    continue;
                }
                let extra = grid.proximity_cost(n, comfort);
                if dc != 0 && dr != 0 {
                    if !grid.is_free((c + dc, r)) || !grid.is_free((c, r + dr)) {
                        continue;
                    }
                    next.push((n, 14 + extra));
                } else {
                    next.push((n, 10 + extra));
                }
            }
            next
        },
        octile,
        |n| *n == g,
    )
    .ok_or(Error::Unreachable)?;
    let mut path = vec![start];
    path.extend(cells.iter().skip(1).take(cells.len().saturating_sub(2)).map(|c| grid.center(*c)));
    path.push(goal);
    Ok(path)
}

/// Greedy line-of-sight shortcutting.
fn string_pull(world: &World, path: &[[f64; 2]], radius: f64) -> Vec<[f64; 2]> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    let mut i = 0;
    while i < path.len() - 1 {
        let mut j = path.len() - 1;
        while j > i + 1 && !segment_clear(world, path[i], path[j], radius) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

/// Chaikin corner cutting; a corner is only cut when the new chord keeps
/// clearance.
fn smooth(world: &World, path: &[[f64; 2]], radius: f64, passes: usize) -> Vec<[f64; 2]> {
    let mut cur = path.to_vec();
    for _ in 0..passes {
        if cur.len() < 3 {
            break;
        }
        let mut next = vec![cur[0]];
        for i in 1..cur.len() - 1 {
            let (a, b, c) = (cur[i - 1], cur[i], cur[i + 1]);
            let r = lerp(b, a, 0.25);
            let q = lerp(b, c, 0.25);
            if segment_clear(world, r, q, radius) {
                next.push(r);
                next.push(q);
            } else {
                next.push(b);
            }
        }
        next.push(*cur.last().unwrap());
        next.dedup_by(|x, y| dist(*x, *y) < 1e-9);
        cur = next;
    }
    cur
}

fn plan(world: &World, start: [f64; 2], goal: [f64; 2], params: &MotionParams) -> Result<Vec<[f64; 2]>> {
    let raw = astar_path(world, start, goal, params)?;
    Ok(string_pull(world, &raw, params.agent_radius + 0.6))
}

/// Points at arc lengths `0, step, 2 step, ...` along a polyline.
fn resample(path: &[[f64; 2]], step: f64, count: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(count);
    if path.len() < 2 {
        out.resize(count, path[0]);
        return out;
    }
    let mut seg = 0;
    let mut seg_start = 0.0;
    for i in 0..count {
        let s = i as f64 * step;
        while seg + 1 < path.len() - 1 && seg_start + dist(path[seg], path[seg + 1]) < s {
            seg_start += dist(path[seg], path[seg + 1]);
            seg += 1;
        }
        let len = dist(path[seg], path[seg + 1]);
        let t = if len > 0.0 { ((s - seg_start) / len).min(1.0) } else { 0.0 };
        out.push(lerp(path[seg], path[seg + 1], t));
    }
    out
}

fn headings(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let a = points[i.saturating_sub(1)];
            let b = points[(i + 1).min(n - 1)];
            (b[0] - a[0]).atan2(b[1] - a[1])
        })
        .collect()
}

/// Arc-length parametrized polyline.
struct Polyline<'a> {
    points: &'a [[f64; 2]],
    cumulative: Vec<f64>,
}

impl<'a> Polyline<'a> {
    fn new(points: &'a [[f64; 2]]) -> Self {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            cumulative.push(cumulative.last().unwrap() + dist(w[0], w[1]));
        }
        Polyline { points, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn at(&self, s: f64) -> [f64; 2] {
        if self.points.len() < 2 {
            return self.points[0];
        }
        let s = s.clamp(0.0, self.length());
        let i = self.cumulative.partition_point(|c| *c <= s).clamp(1, self.points.len() - 1);
        let len = self.cumulative[i] - self.cumulative[i - 1];
        let t = if len > 0.0 { (s - self.cumulative[i - 1]) / len } else { 0.0 };
        lerp(self.points[i - 1], self.points[i], t)
    }

    /// Arc length of the point nearest to `p` with arc length in
    /// `[lo, hi]`.
    fn project(&self, p: [f64; 2], lo: f64, hi: f64) -> f64 {
        let mut best = (f64::INFINITY, lo);
        for i in 1..self.points.len() {
            let (s0, s1) = (self.cumulative[i - 1], self.cumulative[i]);
            if s1 < lo || s0 > hi {
                continue;
            }
            let (a, b) = (self.points[i - 1], self.points[i]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let s = (s0 + t * (s1 - s0)).clamp(lo, hi);
            let q = self.at(s);
            let e = dist(p, q);
            if e < best.0 {
                best = (e, s);
            }
        }
        best.1
    }
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Pure-pursuit walker with a rate-limited, low-passed turn rate. Returns
/// `(position, heading)` every `dt`, or `None` when it strays closer than
/// `radius` to a box.
fn track(
    world: &World,
    path: &[[f64; 2]],
    frames: usize,
    speed: f64,
    lookahead: f64,
    params: &MotionParams,
) -> Option<Vec<([f64; 2], f64)>> {
    const SUBSTEPS: usize = 10;
    let line = Polyline::new(path);
    let h = params.dt / SUBSTEPS as f64;
    let mut p = path[0];
    let first = line.at(lookahead.min(line.length()));
    let mut psi = if dist(first, p) > 1e-9 { (first[0] - p[0]).atan2(first[1] - p[1]) } else { 0.0 };
    let mut omega = 0.0;
    let mut s = 0.0;
    let mut out = vec![(p, psi)];
    let unbounded = frames == 0;
    while unbounded || out.len() < frames {
        for _ in 0..SUBSTEPS {
            let target = line.at(s + lookahead);
            let desired = if dist(target, p) > 1e-9 { (target[0] - p[0]).atan2(target[1] - p[1]) } else { psi };
            let command = (params.steer_gain * wrap_angle(desired - psi)).clamp(-params.max_turn_rate, params.max_turn_rate);
            omega += (command - omega) * (h / params.turn_time_constant).min(1.0);
            psi = wrap_angle(psi + omega * h);
            p = [p[0] + speed * h * psi.sin(), p[1] + speed * h * psi.cos()];
            s = line.project(p, s, s + 2.0 * speed * h + 0.5);
            // the floor extends past the planning bounds; only boxes matter
            if world.clearance(p[0], p[1]) < params.agent_radius {
                return None;
            }
        }
        out.push((p, psi));
        if unbounded && (dist(p, line.at(line.length())) < speed * params.dt || out.len() > 100_000) {
            break;
        }
        if !unbounded && s >= line.length() - 1e-9 && out.len() < frames {
            // ran off the end of the plan
            return None;
        }
    }
    Some(out)
}

fn finish(
    world: &World,
    polyline: Vec<[f64; 2]>,
    frames: usize,
    params: &MotionParams,
    rng: &mut ChaCha8Rng,
    speed: f64,
) -> AgentPath {
    let waypoints = smooth(world, &polyline, params.agent_radius + 0.4, params.smoothing_passes);
    // progressively more agile walkers when the relaxed one clips a box
    let mut tracked = None;
    for agility in [1.0, 1.6, 2.5, 4.0, 6.0] {
        let tuned = MotionParams {
            lookahead: params.lookahead / agility,
            max_turn_rate: params.max_turn_rate * agility,
            turn_time_constant: params.turn_time_constant / agility,
            steer_gain: params.steer_gain * agility,
            ..params.clone()
        };
        tracked = track(world, &waypoints, frames, speed, tuned.lookahead, &tuned);
        if tracked.is_some() {
            break;
        }
    }
    let tracked = tracked.unwrap_or_else(|| {
        // follow the plan exactly
        let step = speed * params.dt;
        let count = if frames == 0 { (polyline_length(&waypoints) / step).floor() as usize + 1 } else { frames };
        let points = resample(&waypoints, step, count);
        let yaws = headings(&points);
        points.into_iter().zip(yaws).collect()
    });
    let eye_height = rng.random_range(params.eye_height.0..=params.eye_height.1);
    let (center, half) = params.pitch_bands[rng.random_range(0..params.pitch_bands.len())];
    let samples = tracked
        .into_iter()
        .map(|(p, yaw)| PathSample { position: p, yaw, pitch: center + rng.random_range(-half..=half) })
        .collect();
    AgentPath { waypoints, samples, speed, eye_height, dt: params.dt }
}

/// Walk from `start` to `goal` at a constant speed drawn from the motion
/// parameters.
pub fn simulate_agent(
    world: &World,
    start: [f64; 2],
    goal: [f64; 2],
    params: &MotionParams,
    seed: u64,
) -> Result<AgentPath> {
    params.validate()?;
    let mut rng = substream(seed, "agent");
    let speed = rng.random_range(params.speed.0..=params.speed.1);
    let polyline = plan(world, start, goal, params)?;
    Ok(finish(world, polyline, 0, params, &mut rng, speed))
}

fn random_free(world: &World, radius: f64, rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
    let b = world.bounds;
    for _ in 0..1000 {
        let p = [rng.random_range(b.x_min + 1.0..b.x_max - 1.0), rng.random_range(b.z_min + 1.0..b.z_max - 1.0)];
        if world.is_free(p[0], p[1], radius) {
            return Ok(p);
        }
    }
    Err(Error::Generation("no free point found".into()))
}

/// A goal roughly ahead of `from` that the agent can reach.
fn forward_goal(
    world: &World,
    from: [f64; 2],
    heading: f64,
    params: &MotionParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 2]>> {
    let clearance = params.agent_radius + 1.0;
    for attempt in 0..200 {
        // widen the cone when boxed in
        let spread = if attempt < 100 { params.goal_spread } else { std::f64::consts::PI };
        let a = heading + rng.random_range(-spread..=spread);
        let d = rng.random_range(params.goal_distance.0..=params.goal_distance.1);
        let p = [from[0] + d * a.sin(), from[1] + d * a.cos()];
        if world.bounds.inset(p[0], p[1]) < 1.0 || !world.is_free(p[0], p[1], clearance) {
            continue;
        }
        if let Ok(path) = plan(world, from, p, params) {
            // prefer goals reachable without a long detour
            if attempt >= 100 || polyline_length(&path) <= 1.2 * d {
                return Ok(path);
            }
        }
    }
    let p = random_free(world, clearance, rng)?;
    plan(world, from, p, params)
}

/// A `frames`-long walk: the template route when the world has one (or a
/// random start), continued with goals drawn ahead of the walker.
pub fn simulate_sequence(world: &World, frames: usize, params: &MotionParams, seed: u64) -> Result<AgentPath> {
    params.validate()?;
    if frames == 0 {
        return Err(Error::InvalidParameter("sequence needs at least one frame".into()));
    }
    let mut rng = substream(seed, "agent");
    let speed = rng.random_range(params.speed.0..=params.speed.1);
    let needed = (frames - 1) as f64 * speed * params.dt + 1.0;
    let mut polyline: Vec<[f64; 2]>;
    if world.routes.is_empty() {
        let start = random_free(world, params.agent_radius + 1.0, &mut rng)?;
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        polyline = forward_goal(world, start, heading, params, &mut rng)?;
    } else {
        let route = &world.routes[rng.random_range(0..world.routes.len())];
        let mut start = route.start;
        let jittered = [start[0] + rng.random_range(-0.5..=0.5), start[1] + rng.random_range(-0.5..=0.5)];
        if world.is_free(jittered[0], jittered[1], params.agent_radius) {
            start = jittered;
        }
        polyline = vec![start];
        for g in &route.goals {
            let leg = plan(world, *polyline.last().unwrap(), *g, params)?;
            polyline.extend_from_slice(&leg[1..]);
        }
    }
    let mut guard = 0;
    while polyline_length(&polyline) < needed + 10.0 {
        guard += 1;
        if guard > 50 {
            return Err(Error::Generation("could not extend walk".into()));
        }
        let n = polyline.len();
        let last = polyline[n - 1];
        let prev = polyline[n.saturating_sub(2)];
        let heading = (last[0] - prev[0]).atan2(last[1] - prev[1]);
        let leg = forward_goal(world, last, heading, params, &mut rng)?;
        polyline.extend_from_slice(&leg[1..]);
    }
    Ok(finish(world, polyline, frames, params, &mut rng, speed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthworld::world::{generate_world, Aabb, Template, WorldParams};

    fn open() -> World {
        generate_world(Template::Open, &WorldParams::default(), 0).unwrap()
    }

    #[test]
    fn open_world_walk_is_straight() {
        let w = open();
        let p = simulate_agent(&w, [0.0, -10.0], [3.0, 10.0], &MotionParams::default(), 1).unwrap();
        let d = [3.0f64, 20.0];
        let n = d[0].hypot(d[1]);
        for s in &p.samples {
            let rel = [s.position[0], s.position[1] + 10.0];
            let cross = (rel[0] * d[1] - rel[1] * d[0]) / n;
            assert!(cross.abs() < 1e-9);
        }
        assert_eq!(p.waypoints.len(), 2);
    }

    #[test]
    fn detour_keeps_clearance() {
        let mut w = open();
        w.boxes.push(Aabb::footprint(-1.5, -1.0, 1.5, 1.0, 1.0));
        let params = MotionParams::default();
        let p = simulate_agent(&w, [0.0, -8.0], [0.0, 8.0], &params, 3).unwrap();
        for win in p.waypoints.windows(2) {
            assert!(segment_clear(&w, win[0], win[1], params.agent_radius));
        }
        for s in &p.samples {
            assert!(w.clearance(s.position[0], s.position[1]) >= params.agent_radius);
        }
        assert!(p.length() >= 16.0);
    }

    #[test]
    fn constant_speed_steps() {
        let w = generate_world(Template::Random, &WorldParams::default(), 4).unwrap();
        let params = MotionParams::default();
        let p = simulate_sequence(&w, 120, &params, 9).unwrap();
        assert_eq!(p.samples.len(), 120);
        let step = p.speed * params.dt;
        for win in p.samples.windows(2) {
            assert!(dist(win[0].position, win[1].position) <= step + 1e-9);
        }
    }

    #[test]
    fn blocked_goal_is_unreachable() {
        let mut w = open();
        // wall the goal in
        w.boxes.push(Aabb::footprint(4.0, 4.0, 10.0, 4.3, 2.0));
        w.boxes.push(Aabb::footprint(4.0, 9.7, 10.0, 10.0, 2.0));
        w.boxes.push(Aabb::footprint(4.0, 4.0, 4.3, 10.0, 2.0));
        w.boxes.push(Aabb::footprint(9.7, 4.0, 10.0, 10.0, 2.0));
        let r = simulate_agent(&w, [0.0, 0.0], [7.0, 7.0], &MotionParams::default(), 0);
        assert!(matches!(r, Err(Error::Unreachable)));
    }
}
