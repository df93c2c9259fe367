//! EgoSpace occlusion map: a log-polar grid on the ground plane that stores,
//! per node, the height of the first surface hit by the ray from the eye to
//! that ground point.
//!
//! Nodes are uniform in angle (theta measured from ego +X, so pi/2 is
//! straight ahead) and uniform in inverse radius. Node `(0, _)` sits at
//! `r_min`, node `(n_radius - 1, _)` at `r_max`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{backproject, DepthImage, EgoFrame, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_radius: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub phi_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_theta: 24,
            n_radius: 16,
            theta_min: PI / 6.0,
            theta_max: 5.0 * PI / 6.0,
            r_min: 0.5,
            r_max: 20.0,
            phi_max: 2.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_theta >= 2
            && self.n_radius >= 2
            && self.theta_min < self.theta_max
            && self.r_min > 0.0
            && self.r_min < self.r_max
            && self.phi_max > 0.0
            && [self.theta_min, self.theta_max, self.r_max, self.phi_max].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid grid spec {self:?}")))
        }
    }

    pub fn cell_count(&self) -> usize {
        self.n_theta * self.n_radius
    }

    pub fn index(&self, i_r: usize, i_theta: usize) -> usize {
        i_r * self.n_theta + i_theta
    }

    pub fn theta(&self, i_theta: usize) -> f64 {
        self.theta_min + (self.theta_max - self.theta_min) * i_theta as f64 / (self.n_theta - 1) as f64
    }

    pub fn radius(&self, i_r: usize) -> f64 {
        if i_r == 0 {
            return self.r_min;
        }
        if i_r == self.n_radius - 1 {
            return self.r_max;
        }
        let (a, b) = (1.0 / self.r_min, 1.0 / self.r_max);
        1.0 / (a + (b - a) * i_r as f64 / (self.n_radius - 1) as f64)
    }

    /// Ground position `(x, z)` of node `(i_r, i_theta)`.
    pub fn ground_point(&self, i_r: usize, i_theta: usize) -> (f64, f64) {
        let (r, t) = (self.radius(i_r), self.theta(i_theta));
        (r * t.cos(), r * t.sin())
    }

    /// Fractional node coordinates `(i_r, i_theta)` of a ground point.
    /// Not range checked.
    pub fn fractional_index(&self, x: f64, z: f64) -> (f64, f64) {
        let r = x.hypot(z);
        let theta = z.atan2(x);
        let (a, b) = (1.0 / self.r_min, 1.0 / self.r_max);
        let fr = (a - 1.0 / r) / (a - b) * (self.n_radius - 1) as f64;
        let ft = (theta - self.theta_min) / (self.theta_max - self.theta_min) * (self.n_theta - 1) as f64;
        (fr, ft)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    OutsideFov,
    Observed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoSpaceMap {
    spec: GridSpec,
    phi: Vec<f64>,
    mask: Vec<CellState>,
}

impl EgoSpaceMap {
    /// Builds a map from raw values, clamping into `[0, phi_max]` and forcing
    /// outside-FOV cells to `phi_max`.
    pub fn from_parts(spec: GridSpec, mut phi: Vec<f64>, mask: Vec<CellState>) -> Result<Self> {
        spec.validate()?;
        let n = spec.cell_count();
        if phi.len() != n || mask.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: phi.len().min(mask.len()) });
        }
        for (v, m) in phi.iter_mut().zip(&mask) {
            *v = match m {
                CellState::OutsideFov => spec.phi_max,
                CellState::Observed if v.is_nan() => spec.phi_max,
                CellState::Observed => v.clamp(0.0, spec.phi_max),
            };
        }
        Ok(EgoSpaceMap { spec, phi, mask })
    }

    /// Every cell observed with the same value.
    pub fn constant(spec: GridSpec, value: f64) -> Result<Self> {
        let n = spec.cell_count();
        Self::from_parts(spec, vec![value; n], vec![CellState::Observed; n])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn mask(&self) -> &[CellState] {
        &self.mask
    }

    pub fn at(&self, i_r: usize, i_theta: usize) -> f64 {
        self.phi[self.spec.index(i_r, i_theta)]
    }

    pub fn state(&self, i_r: usize, i_theta: usize) -> CellState {
        self.mask[self.spec.index(i_r, i_theta)]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m == CellState::Observed).count()
    }

    /// Flattened phi as `f32`, the retrieval feature layout.
    pub fn feature(&self) -> Vec<f32> {
        self.phi.iter().map(|v| *v as f32).collect()
    }

    /// True when the four nodes around `(x, z)` are all observed.
    pub fn is_observed_at(&self, x: f64, z: f64) -> bool {
        match self.bracket(x, z) {
            Bracket::Inside { r0, t0, .. } => {
                let s = &self.spec;
                let r1 = (r0 + 1).min(s.n_radius - 1);
                let t1 = (t0 + 1).min(s.n_theta - 1);
                [(r0, t0), (r0, t1), (r1, t0), (r1, t1)]
                    .iter()
                    .all(|&(r, t)| self.state(r, t) == CellState::Observed)
            }
            _ => false,
        }
    }

    fn bracket(&self, x: f64, z: f64) -> Bracket {
        let s = &self.spec;
        let r = x.hypot(z);
        // relative slack keeps nodes on the boundary inside despite round-off
        if r < s.r_min * (1.0 - 1e-12) {
            return Bracket::Near;
        }
        if r > s.r_max * (1.0 + 1e-12) {
            return Bracket::Far;
        }
        let theta = z.atan2(x);
        if theta < s.theta_min - 1e-12 || theta > s.theta_max + 1e-12 {
            return Bracket::Far;
        }
        let (fr, ft) = s.fractional_index(x, z);
        let fr = fr.clamp(0.0, (s.n_radius - 1) as f64);
        let ft = ft.clamp(0.0, (s.n_theta - 1) as f64);
        let r0 = (fr.floor() as usize).min(s.n_radius - 2);
        let t0 = (ft.floor() as usize).min(s.n_theta - 2);
        Bracket::Inside { r0, t0, wr: fr - r0 as f64, wt: ft - t0 as f64 }
    }

    /// Writes phi as CSV: a header of theta values (radians), then one row
    /// per radius starting with the radius in meters.
    pub fn write_phi_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_grid_csv(w, |i| format!("{}", self.phi[i]))
    }

    /// Parallel CSV of the mask, 1 = observed, 0 = outside the field of view.
    pub fn write_mask_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_grid_csv(w, |i| if self.mask[i] == CellState::Observed { "1".into() } else { "0".into() })
    }

    fn write_grid_csv<W: Write>(&self, mut w: W, cell: impl Fn(usize) -> String) -> Result<()> {
        let s = &self.spec;
        write!(w, "r")?;
        for t in 0..s.n_theta {
            write!(w, ",{}", s.theta(t))?;
        }
        writeln!(w)?;
        for r in 0..s.n_radius {
            write!(w, "{}", s.radius(r))?;
            for t in 0..s.n_theta {
                write!(w, ",{}", cell(s.index(r, t)))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

enum Bracket {
    Near,
    Far,
    Inside { r0: usize, t0: usize, wr: f64, wt: f64 },
}

/// Cartesian lookup of the map with bilinear interpolation in
/// `(1/r, theta)`. Inside `r_min` the ground is treated as free (0); beyond
/// `r_max` or outside the angular range the value is `phi_max`.
pub fn sample_phi(map: &EgoSpaceMap, x: f64, z: f64) -> f64 {
    match map.bracket(x, z) {
        Bracket::Near => 0.0,
        Bracket::Far => map.spec.phi_max,
        Bracket::Inside { r0, t0, wr, wt } => {
            let v00 = map.at(r0, t0);
            let v01 = map.at(r0, t0 + 1);
            let v10 = map.at(r0 + 1, t0);
            let v11 = map.at(r0 + 1, t0 + 1);
            (1.0 - wr) * ((1.0 - wt) * v00 + wt * v01) + wr * ((1.0 - wt) * v10 + wt * v11)
        }
    }
}

/// Value and Cartesian gradient `(d/dx, d/dz)` of [`sample_phi`]. The
/// gradient is zero outside the interpolated region.
pub fn sample_phi_gradient(map: &EgoSpaceMap, x: f64, z: f64) -> (f64, [f64; 2]) {
    match map.bracket(x, z) {
        Bracket::Near => (0.0, [0.0; 2]),
        Bracket::Far => (map.spec.phi_max, [0.0; 2]),
        Bracket::Inside { r0, t0, wr, wt } => {
            let s = &map.spec;
            let v00 = map.at(r0, t0);
            let v01 = map.at(r0, t0 + 1);
            let v10 = map.at(r0 + 1, t0);
            let v11 = map.at(r0 + 1, t0 + 1);
            let value = (1.0 - wr) * ((1.0 - wt) * v00 + wt * v01) + wr * ((1.0 - wt) * v10 + wt * v11);
            let d_wr = (1.0 - wt) * (v10 - v00) + wt * (v11 - v01);
            let d_wt = (1.0 - wr) * (v01 - v00) + wr * (v11 - v10);
            // wr = (1/r_min - 1/r) / (1/r_min - 1/r_max) * (n_r - 1)
            // wt = (theta - theta_min) / (theta_max - theta_min) * (n_t - 1)
            let r2 = x * x + z * z;
            let r = r2.sqrt();
            let kr = (s.n_radius - 1) as f64 / (1.0 / s.r_min - 1.0 / s.r_max);
            let kt = (s.n_theta - 1) as f64 / (s.theta_max - s.theta_min);
            // d(1/r)/dx = -x/r^3 ; dtheta/dx = -z/r^2 ; dtheta/dz = x/r^2
            let dwr_dx = kr * x / (r2 * r);
            let dwr_dz = kr * z / (r2 * r);
            let dwt_dx = -kt * z / r2;
            let dwt_dz = kt * x / r2;
            (value, [d_wr * dwr_dx + d_wt * dwt_dx, d_wr * dwr_dz + d_wt * dwt_dz])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSpaceParams {
    /// Points within this distance of the ground plane count as ground.
    pub ground_tol: f64,
    /// Half-width, in node units, of the window around each node inside
    /// which the nearest occluder (minimal ray parameter) wins. Outside the
    /// window the splat closest to the node is used.
    pub catchment: f64,
}

impl Default for EgoSpaceParams {
    fn default() -> Self {
        EgoSpaceParams { ground_tol: 0.1, catchment: 0.05 }
    }
}

#[derive(Clone, Copy)]
struct Splat {
    lambda: f64,
    height: f64,
    dist2: f64,
}

/// FOV mask: a node is observed iff its ground point projects inside the
/// image in front of the camera.
pub fn fov_mask(spec: &GridSpec, frame: &EgoFrame, intrinsics: &crate::geometry::CameraIntrinsics) -> Vec<CellState> {
    let mut mask = Vec::with_capacity(spec.cell_count());
    for r in 0..spec.n_radius {
        for t in 0..spec.n_theta {
            let (x, z) = spec.ground_point(r, t);
            let p = frame.ego_to_camera(&Vec3::new(x, 0.0, z));
            let inside = intrinsics.project(&p).is_some_and(|(u, v)| intrinsics.contains(u, v));
            mask.push(if inside { CellState::Observed } else { CellState::OutsideFov });
        }
    }
    mask
}

/// Builds the EgoSpace map of a depth image by shadow splatting.
///
/// Every back-projected point is pushed along its eye ray to the ground and
/// assigned to the nearest node. Per node, among points landing inside the
/// catchment window the nearest occluder (smallest ray parameter, ties to
/// the taller point) wins; nodes without such a point take the splat that
/// landed closest. Observed nodes that received nothing copy the nearest
/// observed neighbor, or `phi_max` when there is none.
pub fn compute_egospace(
    depth: &DepthImage,
    frame: &EgoFrame,
    spec: &GridSpec,
    params: &EgoSpaceParams,
) -> Result<EgoSpaceMap> {
    spec.validate()?;
    let points = backproject(depth)?;
    let mask = fov_mask(spec, frame, depth.intrinsics());
    let h = frame.eye_height;
    let n = spec.cell_count();
    let mut inner: Vec<Option<Splat>> = vec![None; n];
    let mut nearest: Vec<Option<Splat>> = vec![None; n];

    for p_cam in &points {
        let p = frame.camera_to_ego(p_cam);
        let drop = h - p.y;
        if drop <= 1e-9 {
            // at or above eye level: the eye ray never reaches the ground
            continue;
        }
        let s = h / drop;
        let (gx, gz) = (s * p.x, s * p.z);
        let (fr, ft) = spec.fractional_index(gx, gz);
        let (ir, it) = (fr.round(), ft.round());
        if ir < 0.0 || it < 0.0 || ir > (spec.n_radius - 1) as f64 || it > (spec.n_theta - 1) as f64 {
            continue;
        }
        let idx = spec.index(ir as usize, it as usize);
        let height = if p.y.abs() <= params.ground_tol { 0.0 } else { p.y.clamp(0.0, spec.phi_max) };
        let (dr, dt) = (fr - ir, ft - it);
        let splat = Splat { lambda: 1.0 / s, height, dist2: dr * dr + dt * dt };
        if dr.abs() <= params.catchment && dt.abs() <= params.catchment {
            let better = match &inner[idx] {
                None => true,
                Some(b) => splat.lambda < b.lambda || (splat.lambda == b.lambda && splat.height > b.height),
            };
            if better {
                inner[idx] = Some(splat);
            }
        }
        let closer = match &nearest[idx] {
            None => true,
            Some(b) => splat.dist2 < b.dist2 || (splat.dist2 == b.dist2 && splat.lambda < b.lambda),
        };
        if closer {
            nearest[idx] = Some(splat);
        }
    }

    let raw: Vec<Option<f64>> = (0..n)
        .map(|i| match mask[i] {
            CellState::OutsideFov => None,
            CellState::Observed => inner[i].or(nearest[i]).map(|s| s.height),
        })
        .collect();
    let phi = fill_missing(spec, &mask, &raw);
    EgoSpaceMap::from_parts(*spec, phi, mask)
}

/// Observed nodes without data copy the nearest observed node that has
/// data (grid distance, ties in index order).
fn fill_missing(spec: &GridSpec, mask: &[CellState], raw: &[Option<f64>]) -> Vec<f64> {
    let mut out = vec![spec.phi_max; raw.len()];
    let sources: Vec<(usize, usize, f64)> = (0..spec.n_radius)
        .flat_map(|r| (0..spec.n_theta).map(move |t| (r, t)))
        .filter_map(|(r, t)| raw[spec.index(r, t)].map(|v| (r, t, v)))
        .collect();
    for r in 0..spec.n_radius {
        for t in 0..spec.n_theta {
            let i = spec.index(r, t);
            if mask[i] == CellState::OutsideFov {
                continue;
            }
            out[i] = match raw[i] {
                Some(v) => v,
                None => sources
                    .iter()
                    .min_by_key(|(sr, st, _)| {
                        let dr = *sr as i64 - r as i64;
                        let dt = *st as i64 - t as i64;
                        dr * dr + dt * dt
                    })
                    .map(|s| s.2)
                    .unwrap_or(spec.phi_max),
            };
        }
    }
    out
}
