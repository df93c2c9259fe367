//! EGDB binary format, little-endian:
//!
//! ```text
//! "EGDB" u32 version=1
//! u32 nTheta u32 nR f64 thetaMin thetaMax rMin rMax phiMax
//! u32 F u32 K f32 dt f32[2F] mean f32[2F*K] basis (column-major)
//! f32 edge0 f32 edge1 u32 count
//! count x { u32 scene u32 frame u8 bin f32 pitch
//!           f32[nTheta*nR] feature f32[K] beta f32[F] trajCost }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{SearchStrategy, TrainingDatabase, TrainingEntry};
use crate::egospace::GridSpec;
use crate::error::{Error, Result};
use crate::trajectory::{Coefficients, TrajectoryBasis};

const MAGIC: &[u8; 4] = b"EGDB";
const VERSION: u32 = 1;
const MAX_DIM: usize = 1 << 24;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }

    fn f32(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&(v as f32).to_le_bytes())?)
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }

    fn count(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        self.u32(v)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated EGDB: {e}")))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u32()? as usize;
        if v > MAX_DIM {
            return Err(Error::Format(format!("{what} = {v} is implausibly large")));
        }
        Ok(v)
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.bytes()?) as f64)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f32()).collect()
    }
}

pub fn write<W: Write>(w: W, db: &TrainingDatabase) -> Result<()> {
    let mut w = Writer(w);
    w.0.write_all(MAGIC)?;
    w.u32(VERSION)?;
    let g = db.grid();
    w.count(g.n_theta)?;
    w.count(g.n_radius)?;
    for v in [g.theta_min, g.theta_max, g.r_min, g.r_max, g.phi_max] {
        w.f64(v)?;
    }
    let b = db.basis();
    w.count(b.horizon())?;
    w.count(b.dim())?;
    w.f32(b.dt)?;
    for v in b.mean.iter() {
        w.f32(*v)?;
    }
    for v in b.basis.iter() {
        w.f32(*v)?;
    }
    let edges = db.pitch_edges();
    w.f32(edges[0])?;
    w.f32(edges[1])?;
    let entries = db.entries();
    w.count(entries.len())?;
    for e in entries {
        w.u32(e.scene_id)?;
        w.u32(e.frame_id)?;
        w.0.write_all(&[e.pitch_bin])?;
        w.f32(e.pitch)?;
        for v in &e.feature {
            w.0.write_all(&v.to_le_bytes())?;
        }
        for v in &e.beta.0 {
            w.f32(*v)?;
        }
        for v in &e.traj_cost {
            w.f32(*v)?;
        }
    }
    Ok(w.0.flush()?)
}

pub fn read<R: Read>(r: R, strategy: SearchStrategy) -> Result<TrainingDatabase> {
    let mut r = Reader(r);
    if &r.bytes::<4>()? != MAGIC {
        return Err(Error::Format("not an EGDB file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported EGDB version {version}")));
    }
    let n_theta = r.dim("nTheta")?;
    let n_radius = r.dim("nR")?;
    let grid = GridSpec {
        n_theta,
        n_radius,
        theta_min: r.f64()?,
        theta_max: r.f64()?,
        r_min: r.f64()?,
        r_max: r.f64()?,
        phi_max: r.f64()?,
    };
    grid.validate()?;
    let f = r.dim("F")?;
    let k = r.dim("K")?;
    let dt = r.f32()?;
    let mean = DVector::from_vec(r.f32s(2 * f)?);
    let basis = DMatrix::from_vec(2 * f, k, r.f32s(2 * f * k)?);
    let basis = TrajectoryBasis::new(mean, basis, dt)?;
    let edges = [r.f32()?, r.f32()?];
    let count = r.dim("count")?;
    let cells = grid.cell_count();
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let scene_id = r.u32()?;
        let frame_id = r.u32()?;
        let [pitch_bin] = r.bytes::<1>()?;
        if pitch_bin > 2 {
            return Err(Error::Format(format!("pitch bin {pitch_bin} out of range")));
        }
        let pitch = r.f32()?;
        let feature = (0..cells).map(|_| r.bytes::<4>().map(f32::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        let beta = Coefficients(r.f32s(k)?);
        let traj_cost = r.f32s(f)?;
        entries.push(TrainingEntry { scene_id, frame_id, pitch_bin, pitch, feature, beta, traj_cost });
    }
    let mut trailing = [0u8; 1];
    if r.0.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after EGDB entries".into()));
    }
    TrainingDatabase::from_parts(grid, basis, edges, entries, strategy).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::Format(m),
        other => other,
    })
}

pub fn save(path: &Path, db: &TrainingDatabase) -> Result<()> {
    write(BufWriter::new(File::create(path)?), db)
}

pub fn load(path: &Path, strategy: SearchStrategy) -> Result<TrainingDatabase> {
    read(BufReader::new(File::open(path)?), strategy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::database::assign_pitch_bin;
    use crate::trajectory::make_dct_basis;

    fn db() -> TrainingDatabase {
        let grid = GridSpec { n_theta: 3, n_radius: 2, ..GridSpec::default() };
        let basis = make_dct_basis(4, 4, 0.5).unwrap();
        let basis = TrajectoryBasis::new(basis.mean, basis.basis.map(|v| v as f32 as f64), 0.5).unwrap();
        let edges = [0.25, 0.5];
        let entries = (0..5u32)
            .map(|i| {
                let pitch = (0.15 * i as f64) as f32 as f64;
                TrainingEntry {
                    scene_id: 4 - i,
                    frame_id: i * 7,
                    pitch_bin: assign_pitch_bin(pitch, &edges),
                    pitch,
                    feature: (0..6).map(|c| (c + i) as f32 * 0.25).collect(),
                    beta: Coefficients(vec![i as f64, -0.5, 0.125, 2.0]),
                    traj_cost: vec![0.0, 0.5, 1.0, 2.0],
                }
            })
            .collect();
        TrainingDatabase::from_parts(grid, basis, edges, entries, SearchStrategy::Linear).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let a = db();
        let mut buf = Vec::new();
        write(&mut buf, &a).unwrap();
        let b = read(buf.as_slice(), SearchStrategy::Linear).unwrap();
        assert_eq!(a.grid(), b.grid());
        assert_eq!(a.basis().mean, b.basis().mean);
        assert_eq!(a.basis().basis, b.basis().basis);
        assert_eq!(a.pitch_edges(), b.pitch_edges());
        assert_eq!(a.entries(), b.entries());
        let mut again = Vec::new();
        write(&mut again, &b).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write(&mut buf, &db()).unwrap();
        assert!(read(&buf[..buf.len() - 1], SearchStrategy::Linear).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read(extra.as_slice(), SearchStrategy::Linear).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read(bad.as_slice(), SearchStrategy::Linear).is_err());
    }
}
