//! Binary state snapshots.
//!
//! Layout, all little-endian: magic `BIWV`, version `u32 = 1`, `n: u32`,
//! `l: u32`, `n` axis sizes as `u64`, `n` axis lengths as `f64`, `t: f64`,
//! `epsilon: f64`, then `u` and `v` as `f64` arrays in field layout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::field::{Field, GridSpec};

pub const MAGIC: &[u8; 4] = b"BIWV";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut w: W, state: &State, epsilon: f64) -> Result<()> {
    let grid = state.u.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&((state.u.components() - 1) as u32).to_le_bytes())?;
    for &n in grid.points() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &l in grid.lengths() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&epsilon.to_le_bytes())?;
    for x in state.u.values().iter().chain(state.v.values()) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Snapshot("truncated file".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

/// Reads a snapshot, returning the state and the stored `epsilon`.
pub fn read_snapshot<R: Read>(mut r: R) -> Result<(State, f64)> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let l = read_u32(&mut r)? as usize;
    if !(1..=2).contains(&n) {
        return Err(Error::Snapshot(format!("unsupported spatial dimension {n}")));
    }
    let points = (0..n).map(|_| read_u64(&mut r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
    let lengths = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let t = read_f64(&mut r)?;
    let epsilon = read_f64(&mut r)?;
    let grid = GridSpec::new(points, lengths).map_err(|e| Error::Snapshot(e.to_string()))?;
    let len = grid.num_points() * (l + 1);
    let read_field = |r: &mut R| -> Result<Field> {
        let vals = (0..len).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        Field::new(grid.clone(), l + 1, vals)
    };
    let u = read_field(&mut r)?;
    let v = read_field(&mut r)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Snapshot("trailing bytes after payload".into()));
    }
    Ok((State::new(u, v, t)?, epsilon))
}

pub fn save(path: &Path, state: &State, epsilon: f64) -> Result<()> {
    write_snapshot(BufWriter::new(File::create(path)?), state, epsilon)
}

pub fn load(path: &Path) -> Result<(State, f64)> {
    read_snapshot(BufReader::new(File::open(path)?))
}
