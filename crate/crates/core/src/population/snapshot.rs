//! Binary pool snapshots with a JSON metadata sidecar.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  "BTPOOL\0\x01" (last byte is the format version)
//! branching  u32
//! dist_kind  u32      0 uniform, 1 gaussian, 2 bounded-user table
//! n_params   u32
//! reserved   u32
//! zeta       2 x f64  (E, eta)
//! params     n_params x f64
//!                     uniform: [width]; gaussian: [sigma];
//!                     table: [edges (m+1) ..., densities (m) ...]
//! seed       u64
//! sweeps     u64
//! size       u64
//! payload    size x (f64 re, f64 im)
//! ```

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GreenPool;
use crate::disorder::PotentialDistribution;
use crate::error::{Error, Result};
use crate::green::ComplexEnergy;

pub const MAGIC: [u8; 8] = *b"BTPOOL\0\x01";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub format_version: u8,
    pub branching: usize,
    pub zeta: ComplexEnergy,
    pub distribution: PotentialDistribution,
    pub seed: u64,
    pub sweeps_done: usize,
    pub pool_size: usize,
}

impl SnapshotMeta {
    pub fn of(pool: &GreenPool) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            branching: pool.branching(),
            zeta: pool.zeta(),
            distribution: pool.distribution().clone(),
            seed: pool.seed(),
            sweeps_done: pool.sweeps_done(),
            pool_size: pool.len(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn dist_params(dist: &PotentialDistribution) -> (u32, Vec<f64>) {
    match dist {
        PotentialDistribution::Uniform { width } => (0, vec![*width]),
        PotentialDistribution::Gaussian { sigma } => (1, vec![*sigma]),
        PotentialDistribution::Table { edges, density } => {
            (2, edges.iter().chain(density.iter()).copied().collect())
        }
    }
}

fn dist_from_params(kind: u32, params: Vec<f64>) -> Result<PotentialDistribution> {
    match (kind, params.len()) {
        (0, 1) => PotentialDistribution::uniform(params[0]),
        (1, 1) => PotentialDistribution::gaussian(params[0]),
        (2, n) if n >= 3 && n % 2 == 1 => {
            let bins = (n - 1) / 2;
            let edges = params[..=bins].to_vec();
            let density = params[bins + 1..].to_vec();
            let d = PotentialDistribution::Table { edges, density };
            d.validate()?;
            Ok(d)
        }
        _ => Err(Error::Format(format!(
            "unknown distribution kind {kind} with {} parameters",
            params.len()
        ))),
    }
}

pub fn encode(pool: &GreenPool) -> Vec<u8> {
    let (kind, params) = dist_params(pool.distribution());
    let mut buf = Vec::with_capacity(64 + 8 * params.len() + 16 * pool.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&(pool.branching() as u32).to_le_bytes());
    buf.extend_from_slice(&kind.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&pool.zeta().energy().to_le_bytes());
    buf.extend_from_slice(&pool.zeta().eta().to_le_bytes());
    for p in &params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf.extend_from_slice(&pool.seed().to_le_bytes());
    buf.extend_from_slice(&(pool.sweeps_done() as u64).to_le_bytes());
    buf.extend_from_slice(&(pool.len() as u64).to_le_bytes());
    for g in pool.entries() {
        buf.extend_from_slice(&g.re.to_le_bytes());
        buf.extend_from_slice(&g.im.to_le_bytes());
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("truncated snapshot at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode(bytes: &[u8]) -> Result<GreenPool> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic: [u8; 8] = c.take()?;
    if magic[..7] != MAGIC[..7] {
        return Err(Error::Format("not a pool snapshot".into()));
    }
    if magic[7] != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {}", magic[7])));
    }
    let branching = c.u32()? as usize;
    let kind = c.u32()?;
    let n_params = c.u32()? as usize;
    let _reserved = c.u32()?;
    let zeta = ComplexEnergy::new(c.f64()?, c.f64()?)?;
    let params = (0..n_params).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let dist = dist_from_params(kind, params)?;
    let seed = c.u64()?;
    let sweeps_done = c.u64()? as usize;
    let size = c.u64()? as usize;
    if bytes.len() != c.pos + 16 * size {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header announces {size} entries",
            bytes.len().saturating_sub(c.pos)
        )));
    }
    let mut entries = Vec::with_capacity(size);
    for _ in 0..size {
        entries.push(Complex64::new(c.f64()?, c.f64()?));
    }
    if branching < 2 {
        return Err(Error::Format("branching number below 2".into()));
    }
    Ok(GreenPool::from_parts(entries, zeta, dist, branching, sweeps_done, seed))
}

/// Writes the binary snapshot and its `<path>.json` sidecar.
pub fn save(pool: &GreenPool, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode(pool))?;
    w.flush()?;
    let meta = serde_json::to_string_pretty(&SnapshotMeta::of(pool))?;
    fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GreenPool> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
