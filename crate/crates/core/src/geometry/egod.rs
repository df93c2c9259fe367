//! `EGOD` depth files: little-endian, `b"EGOD"`, `u32` version (1),
//! `u32` width, `u32` height, `f32` fx, fy, cx, cy, then `width * height`
//! `f32` row-major depths. Non-positive or non-finite depths are invalid.

use std::io::{Read, Write};
use std::path::Path;

use super::{CameraIntrinsics, DepthImage};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EGOD";
pub const VERSION: u32 = 1;

pub fn write<W: Write>(mut w: W, depth: &DepthImage) -> Result<()> {
    let k = depth.intrinsics();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(k.width as u32).to_le_bytes())?;
    w.write_all(&(k.height as u32).to_le_bytes())?;
    for v in [k.fx, k.fy, k.cx, k.cy] {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(depth.depths().len() * 4);
    for (z, ok) in depth.depths().iter().zip(depth.validity()) {
        let v = if *ok { *z as f32 } else { 0.0 };
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read<R: Read>(mut r: R) -> Result<DepthImage> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated EGOD header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad EGOD magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported EGOD version {version}")));
    }
    let width = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let fx = read_f32(&mut r)? as f64;
    let fy = read_f32(&mut r)? as f64;
    let cx = read_f32(&mut r)? as f64;
    let cy = read_f32(&mut r)? as f64;
    let intrinsics = CameraIntrinsics::new(fx, fy, cx, cy, width, height)
        .map_err(|e| Error::Format(format!("EGOD intrinsics: {e}")))?;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("EGOD size overflow".into()))?;
    let mut raw = vec![0u8; n * 4];
    r.read_exact(&mut raw).map_err(|_| Error::Format("truncated EGOD payload".into()))?;
    let depth = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    DepthImage::from_raw(intrinsics, depth)
}

pub fn save(path: &Path, depth: &DepthImage) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf, depth)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<DepthImage> {
    let bytes = std::fs::read(path)?;
    read(bytes.as_slice())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated EGOD header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    Ok(f32::from_bits(read_u32(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DepthImage {
        let k = CameraIntrinsics::new(50.0, 50.0, 1.5, 1.0, 4, 3).unwrap();
        let d = vec![1.0, 2.5, 0.0, -1.0, f64::NAN, 3.25, 4.0, 5.0, 6.0, 7.0, 8.0, 9.5];
        DepthImage::from_raw(k, d).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[0..4], b"EGOD");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        assert_eq!(f32::from_le_bytes(buf[16..20].try_into().unwrap()), 50.0);
        assert_eq!(buf.len(), 32 + 12 * 4);
        // second depth sample
        assert_eq!(f32::from_le_bytes(buf[36..40].try_into().unwrap()), 2.5);
    }

    #[test]
    fn round_trip_preserves_validity() {
        let img = sample();
        let mut buf = Vec::new();
        write(&mut buf, &img).unwrap();
        let back = read(buf.as_slice()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.valid_count(), 9);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut buf = Vec::new();
        write(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read(bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(read(v2.as_slice()), Err(Error::Format(_))));
    }
}
