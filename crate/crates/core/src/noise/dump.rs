//! Debug dump of a [`CoupledNoisePath`]. Not a stable format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    b"LSPD"            4 bytes
//! version  u32                currently 1
//! n_ref    u64
//! nodes    u64                micro-grid node count
//! jumps    u64                jump count
//! seed     u64                global seed
//! sample   u64                sample index
//! dt_ref   f64
//! steps    u64                number of dt_ref steps
//! node times      nodes x f64
//! node kinds      nodes x u8  (0 deterministic, 1 jump, 2 both)
//! jump events     jumps x (time f64, xi f64)
//! wiener          (nodes - 1) x n_ref x f64, interval-major
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::noise::path::{CoupledNoisePath, JumpEvent, JumpSkeleton, MicroGrid, NodeKind};
use crate::rng::SeedRecord;

const MAGIC: &[u8; 4] = b"LSPD";
const VERSION: u32 = 1;

pub fn write_dump<W: Write>(path: &CoupledNoisePath, mut w: W) -> Result<()> {
    let grid = path.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [
        path.n_ref() as u64,
        grid.nodes().len() as u64,
        path.jumps().len() as u64,
        path.seed().seed,
        path.seed().sample,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&grid.dt_ref().to_le_bytes())?;
    w.write_all(&(grid.steps() as u64).to_le_bytes())?;
    for t in grid.nodes() {
        w.write_all(&t.to_le_bytes())?;
    }
    let kinds: Vec<u8> = grid.kinds().iter().map(|k| k.code()).collect();
    w.write_all(&kinds)?;
    for e in path.jumps().events() {
        w.write_all(&e.time.to_le_bytes())?;
        w.write_all(&e.xi.to_le_bytes())?;
    }
    for x in path.wiener() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn u64_from<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn f64_from<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_dump<R: Read>(mut r: R) -> Result<CoupledNoisePath> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidGrid("not a path dump".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    if u32::from_le_bytes(v) != VERSION {
        return Err(Error::InvalidGrid("unsupported dump version".into()));
    }
    let n_ref = u64_from(&mut r)? as usize;
    let n_nodes = u64_from(&mut r)? as usize;
    let n_jumps = u64_from(&mut r)? as usize;
    let seed = SeedRecord::new(u64_from(&mut r)?, u64_from(&mut r)?);
    let dt_ref = f64_from(&mut r)?;
    let steps = u64_from(&mut r)? as usize;
    let nodes = (0..n_nodes).map(|_| f64_from(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut codes = vec![0u8; n_nodes];
    r.read_exact(&mut codes)?;
    let kinds = codes
        .into_iter()
        .map(|c| NodeKind::from_code(c).ok_or_else(|| Error::InvalidGrid(format!("bad node kind {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let events = (0..n_jumps)
        .map(|_| {
            Ok(JumpEvent {
                time: f64_from(&mut r)?,
                xi: f64_from(&mut r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = n_nodes.saturating_sub(1) * n_ref;
    let wiener = (0..count).map(|_| f64_from(&mut r)).collect::<Result<Vec<_>>>()?;
    let horizon = *nodes.last().ok_or_else(|| Error::InvalidGrid("empty grid".into()))?;
    let grid = MicroGrid::from_parts(dt_ref, steps, nodes, kinds);
    CoupledNoisePath::from_parts(grid, n_ref, wiener, JumpSkeleton::new(horizon, events)?, seed)
}
