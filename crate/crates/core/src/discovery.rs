//! Occluded-space likelihood: kernel-weighted average of map values along
//! the predicted trajectories, and thresholded connected regions of it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::egospace::{sample_phi, EgoSpaceMap};
use crate::error::{Error, Result};
use crate::trajectory::{point_unchecked, Coefficients, TrajectoryBasis};

/// Axis-aligned window on the ground, ego coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for Extent {
    fn default() -> Self {
        Extent { x_min: -10.0, x_max: 10.0, z_min: 0.0, z_max: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub extent: Extent,
    pub resolution: f64,
    pub sigma: f64,
    /// Kernel support in units of sigma.
    pub truncation: f64,
    /// Leave cells outside the test camera's field of view undefined.
    pub visible_only: bool,
    pub threshold: f64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            extent: Extent::default(),
            resolution: 0.25,
            sigma: 0.5,
            truncation: 4.0,
            visible_only: true,
            threshold: 0.3,
        }
    }
}

/// Regular ground grid, row `r` at `z_min + (r + 0.5) res`, column `c` at
/// `x_min + (c + 0.5) res`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundGrid {
    pub extent: Extent,
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GroundGrid {
    pub fn new(extent: Extent, resolution: f64) -> Result<Self> {
        let w = extent.x_max - extent.x_min;
        let h = extent.z_max - extent.z_min;
        if !(resolution > 0.0 && w > 0.0 && h > 0.0) {
            return Err(Error::InvalidParameter("degenerate discovery grid".into()));
        }
        let cols = (w / resolution).round().max(1.0) as usize;
        let rows = (h / resolution).round().max(1.0) as usize;
        Ok(GroundGrid { extent, resolution, rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.extent.x_min + (col as f64 + 0.5) * self.resolution,
            self.extent.z_min + (row as f64 + 0.5) * self.resolution,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccludedSpaceMap {
    pub grid: GroundGrid,
    pub sigma: f64,
    pub phi_max: f64,
    /// Row-major; 0 where undefined.
    pub psi: Vec<f64>,
    pub defined: Vec<bool>,
}

impl OccludedSpaceMap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.psi[row * self.grid.cols + col]
    }

    /// Rows from far to near so the image reads like a top-down view.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in (0..self.grid.rows).rev() {
            let line: Vec<String> = (0..self.grid.cols).map(|c| format!("{:.6}", self.at(row, c))).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// 8-bit grayscale, 0..phi_max mapped linearly to 0..255, far rows first.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.grid.cols, self.grid.rows)?;
        let mut bytes = Vec::with_capacity(self.grid.len());
        for row in (0..self.grid.rows).rev() {
            for c in 0..self.grid.cols {
                let v = (self.at(row, c) / self.phi_max).clamp(0.0, 1.0);
                bytes.push((v * 255.0).round() as u8);
            }
        }
        w.write_all(&bytes)?;
        Ok(())
    }
}

/// Predicted points with their map value; with `visible_only`, points the
/// camera could not see are left out.
fn weighted_samples(
    betas: &[&Coefficients],
    basis: &TrajectoryBasis,
    map: &EgoSpaceMap,
    visible_only: bool,
) -> Vec<([f64; 2], f64)> {
    let mut out = Vec::with_capacity(betas.len() * basis.horizon());
    for b in betas {
        for i in 0..basis.horizon() {
            let p = point_unchecked(&b.0, basis, i);
            if visible_only && !map.is_observed_at(p[0], p[1]) {
                continue;
            }
            out.push((p, sample_phi(map, p[0], p[1])));
        }
    }
    out
}

pub fn discover(
    betas: &[&Coefficients],
    basis: &TrajectoryBasis,
    map: &EgoSpaceMap,
    config: &DiscoveryConfig,
) -> Result<OccludedSpaceMap> {
    if betas.is_empty() {
        return Err(Error::EmptyInput("no predicted trajectories".into()));
    }
    if let Some(b) = betas.iter().find(|b| b.len() != basis.dim()) {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: b.len() });
    }
    if !(config.sigma > 0.0 && config.truncation > 0.0) {
        return Err(Error::InvalidParameter("sigma and truncation must be positive".into()));
    }
    let grid = GroundGrid::new(config.extent, config.resolution)?;
    let samples = weighted_samples(betas, basis, map, config.visible_only);
    let mut num = vec![0.0; grid.len()];
    let mut den = vec![0.0; grid.len()];
    let reach = config.truncation * config.sigma;
    let inv = 1.0 / (2.0 * config.sigma * config.sigma);
    let res = grid.resolution;
    let ext = grid.extent;
    let span = |lo: f64, origin: f64, n: usize| -> usize {
        (((lo - origin) / res - 0.5).ceil().max(0.0) as usize).min(n)
    };
    for ([px, pz], phi) in &samples {
        let c0 = span(px - reach, ext.x_min, grid.cols);
        let c1 = span(px + reach, ext.x_min, grid.cols);
        let r0 = span(pz - reach, ext.z_min, grid.rows);
        let r1 = span(pz + reach, ext.z_min, grid.rows);
        for r in r0..=r1.min(grid.rows.saturating_sub(1)) {
            for c in c0..=c1.min(grid.cols.saturating_sub(1)) {
                let (x, z) = grid.center(r, c);
                let d2 = (x - px) * (x - px) + (z - pz) * (z - pz);
                if d2 > reach * reach {
                    continue;
                }
                let w = (-d2 * inv).exp();
                let i = r * grid.cols + c;
                num[i] += w * phi;
                den[i] += w;
            }
        }
    }
    let mut psi = vec![0.0; grid.len()];
    let mut defined = vec![false; grid.len()];
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let i = r * grid.cols + c;
            if den[i] < 1e-12 {
                continue;
            }
            if config.visible_only {
                let (x, z) = grid.center(r, c);
                if !map.is_observed_at(x, z) {
                    continue;
                }
            }
            psi[i] = num[i] / den[i];
            defined[i] = true;
        }
    }
    Ok(OccludedSpaceMap { grid, sigma: config.sigma, phi_max: map.spec().phi_max, psi, defined })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// `(row, col)` cells, row-major order.
    pub cells: Vec<(usize, usize)>,
    pub peak: f64,
    /// Mean cell center `(x, z)`.
    pub centroid: (f64, f64),
}

/// 4-connected regions of `psi >= threshold`, strongest first.
pub fn extract_detections(map: &OccludedSpaceMap, threshold: f64) -> Result<Vec<Detection>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    let (rows, cols) = (map.grid.rows, map.grid.cols);
    let hot = |r: usize, c: usize| map.defined[r * cols + c] && map.psi[r * cols + c] >= threshold;
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if seen[r * cols + c] || !hot(r, c) {
                continue;
            }
            let mut cells = Vec::new();
            let mut stack = vec![(r, c)];
            seen[r * cols + c] = true;
            while let Some((y, x)) = stack.pop() {
                cells.push((y, x));
                let mut visit = |ny: usize, nx: usize| {
                    if !seen[ny * cols + nx] && hot(ny, nx) {
                        seen[ny * cols + nx] = true;
                        stack.push((ny, nx));
                    }
                };
                if y > 0 {
                    visit(y - 1, x);
                }
                if y + 1 < rows {
                    visit(y + 1, x);
                }
                if x > 0 {
                    visit(y, x - 1);
                }
                if x + 1 < cols {
                    visit(y, x + 1);
                }
            }
            cells.sort_unstable();
            let peak = cells.iter().map(|&(y, x)| map.at(y, x)).fold(f64::MIN, f64::max);
            let n = cells.len() as f64;
            let (sx, sz) = cells.iter().fold((0.0, 0.0), |(ax, az), &(y, x)| {
                let (cx, cz) = map.grid.center(y, x);
                (ax + cx, az + cz)
            });
            out.push(Detection { cells, peak, centroid: (sx / n, sz / n) });
        }
    }
    out.sort_by(|a, b| b.peak.total_cmp(&a.peak).then(a.cells[0].cmp(&b.cells[0])));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egospace::{CellState, GridSpec};
    use crate::trajectory::make_dct_basis;

    fn open_map(value: f64) -> EgoSpaceMap {
        let spec = GridSpec::default();
        let n = spec.cell_count();
        EgoSpaceMap::from_parts(spec, vec![value; n], vec![CellState::Observed; n]).unwrap()
    }

    fn blank(rows: usize, cols: usize) -> OccludedSpaceMap {
        let grid = GroundGrid::new(
            Extent { x_min: 0.0, x_max: cols as f64, z_min: 0.0, z_max: rows as f64 },
            1.0,
        )
        .unwrap();
        OccludedSpaceMap { grid, sigma: 1.0, phi_max: 2.0, psi: vec![0.0; rows * cols], defined: vec![true; rows * cols] }
    }

    #[test]
    fn free_paths_give_zero_psi() {
        let basis = make_dct_basis(30, 6, 0.5).unwrap();
        let beta = Coefficients(vec![0.0, 3.0, 0.5, 0.0, 0.0, 0.0]);
        let psi = discover(&[&beta], &basis, &open_map(0.0), &DiscoveryConfig::default()).unwrap();
        assert!(psi.psi.iter().all(|v| *v == 0.0));
        assert!(psi.defined.iter().any(|d| *d));
    }

    #[test]
    fn constant_phi_gives_constant_psi() {
        let basis = make_dct_basis(30, 6, 0.5).unwrap();
        let beta = Coefficients(vec![0.0, 20.0, 0.0, 0.0, 0.0, 0.0]);
        let psi = discover(&[&beta, &beta], &basis, &open_map(1.0), &DiscoveryConfig::default()).unwrap();
        for (v, d) in psi.psi.iter().zip(&psi.defined) {
            if *d {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_set_is_an_error() {
        let basis = make_dct_basis(30, 6, 0.5).unwrap();
        assert!(discover(&[], &basis, &open_map(0.0), &DiscoveryConfig::default()).is_err());
    }

    #[test]
    fn block_detection_centroid() {
        let mut m = blank(10, 10);
        for r in 2..5 {
            for c in 3..7 {
                m.psi[r * 10 + c] = 0.8;
            }
        }
        m.psi[3 * 10 + 4] = 1.2;
        let d = extract_detections(&m, 0.3).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].cells.len(), 12);
        assert_eq!(d[0].peak, 1.2);
        assert!((d[0].centroid.0 - 5.0).abs() < 1e-12 && (d[0].centroid.1 - 3.5).abs() < 1e-12);
        assert!(extract_detections(&blank(4, 4), 0.3).unwrap().is_empty());
    }

    #[test]
    fn diagonal_neighbors_are_separate() {
        let mut m = blank(3, 3);
        m.psi[0] = 1.0;
        m.psi[4] = 0.5;
        let d = extract_detections(&m, 0.3).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].peak, 1.0);
    }

    #[test]
    fn pgm_header_and_size() {
        let m = blank(3, 5);
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n5 3\n255\n"));
        assert_eq!(buf.len(), b"P5\n5 3\n255\n".len() + 15);
    }
}
