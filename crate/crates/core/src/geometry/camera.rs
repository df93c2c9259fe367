use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = CameraIntrinsics { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// 160x120 with a 100 px focal length (about 77 x 62 degrees field of view).
    pub fn default_sim() -> Self {
        CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 79.5, cy: 59.5, width: 160, height: 120 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Pixel coordinates of a camera-frame point, `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        if p.z <= 1e-12 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Pixel centers sit on integer coordinates, so the image covers
    /// `[-0.5, width - 0.5) x [-0.5, height - 0.5)`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && u < self.width as f64 - 0.5 && v >= -0.5 && v < self.height as f64 - 0.5
    }

    /// Ray through pixel `(u, v)` scaled to unit z.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Metric z-depth image with per-pixel validity.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    intrinsics: CameraIntrinsics,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthImage {
    /// Builds an image from raw row-major depths. Non-finite or
    /// non-positive values are marked invalid.
    pub fn from_raw(intrinsics: CameraIntrinsics, depth: Vec<f64>) -> Result<Self> {
        intrinsics.validate()?;
        let n = intrinsics.width * intrinsics.height;
        if depth.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: depth.len() });
        }
        let valid: Vec<bool> = depth.iter().map(|z| z.is_finite() && *z > 0.0).collect();
        let depth = depth.iter().zip(&valid).map(|(z, ok)| if *ok { *z } else { 0.0 }).collect();
        Ok(DepthImage { intrinsics, depth, valid })
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Depth at `(row, col)`, `None` if invalid.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.intrinsics.width + col;
        self.valid[i].then(|| self.depth[i])
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// One camera-frame point per valid pixel, in row-major pixel order.
pub fn backproject(depth: &DepthImage) -> Result<Vec<Vec3>> {
    let k = depth.intrinsics();
    let mut points = Vec::with_capacity(depth.valid_count());
    for row in 0..k.height {
        for col in 0..k.width {
            if let Some(z) = depth.get(row, col) {
                let x = (col as f64 - k.cx) * z / k.fx;
                let y = (row as f64 - k.cy) * z / k.fy;
                points.push(Vec3::new(x, y, z));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("depth image has no valid pixels".into()));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 120.0, 4.0, 3.0, 8, 6).unwrap()
    }

    fn single_pixel(row: usize, col: usize, z: f64) -> DepthImage {
        let k = intr();
        let mut d = vec![0.0; k.width * k.height];
        d[row * k.width + col] = z;
        DepthImage::from_raw(k, d).unwrap()
    }

    #[test]
    fn principal_ray_backprojects_onto_axis() {
        let pts = backproject(&single_pixel(3, 4, 2.0)).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0], Vec3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn unit_tangent_pixel() {
        // pixel (cx + fx, cy) needs a wide image
        let k = CameraIntrinsics::new(2.0, 2.0, 1.0, 1.0, 4, 3).unwrap();
        let mut d = vec![0.0; 12];
        d[4 + 3] = 1.0;
        let pts = backproject(&DepthImage::from_raw(k, d).unwrap()).unwrap();
        assert_eq!(pts[0], Vec3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn invalid_values_are_dropped() {
        let k = intr();
        let mut d = vec![1.0; 48];
        d[0] = f64::NAN;
        d[1] = -1.0;
        d[2] = 0.0;
        d[3] = f64::INFINITY;
        let img = DepthImage::from_raw(k, d).unwrap();
        assert_eq!(img.valid_count(), 44);
        assert_eq!(backproject(&img).unwrap().len(), 44);
    }

    #[test]
    fn empty_image_is_an_error() {
        let img = DepthImage::from_raw(intr(), vec![0.0; 48]).unwrap();
        assert!(matches!(backproject(&img), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn backprojection_then_projection_is_identity() {
        let k = intr();
        let d: Vec<f64> = (0..48).map(|i| 0.5 + i as f64 * 0.37).collect();
        let img = DepthImage::from_raw(k, d).unwrap();
        let pts = backproject(&img).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let (u, v) = k.project(p).unwrap();
            let (col, row) = ((i % k.width) as f64, (i / k.width) as f64);
            assert!((u - col).abs() <= 1e-6 * col.abs().max(1.0));
            assert!((v - row).abs() <= 1e-6 * row.abs().max(1.0));
        }
    }
}
