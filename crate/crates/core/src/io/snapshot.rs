//! Binary field snapshots.
//!
//! Layout: magic `NLCH1\0`, then little-endian `u8` dim, `u32` points per
//! axis, `f64` edge length, `f64` time, and the `n^dim` values as `f64` in
//! row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dynamics::{Observer, SimState};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &[u8; 6] = b"NLCH1\0";
pub const HEADER_LEN: usize = 6 + 1 + 4 + 8 + 8;
pub const EXTENSION: &str = "nlch";

pub fn encode_snapshot(field: &Field, t: f64) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
    out.extend_from_slice(MAGIC);
    out.push(grid.dim() as u8);
    out.extend_from_slice(&(grid.n_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&grid.edge_length().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<(Field, f64)> {
    let fail = |reason: String| Error::Snapshot {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() >= 5 && &bytes[..4] == b"NLCH" && bytes[4] != MAGIC[4] {
        return Err(fail(format!(
            "format version mismatch: found `{}`, expected `NLCH1`",
            String::from_utf8_lossy(&bytes[..5])
        )));
    }
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(fail("bad magic bytes (not an NLCH1 snapshot)".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!(
            "truncated header: expected at least {HEADER_LEN} bytes, found {}",
            bytes.len()
        )));
    }
    let dim = bytes[6] as usize;
    let n = u32::from_le_bytes(bytes[7..11].try_into().expect("4-byte slice")) as usize;
    let edge = f64_at(bytes, 11);
    let t = f64_at(bytes, 19);
    let grid = Grid::new(dim, n, edge).map_err(|e| fail(e.to_string()))?;
    let expected = HEADER_LEN + 8 * grid.len();
    if bytes.len() != expected {
        let what = if bytes.len() < expected {
            "truncated payload"
        } else {
            "trailing bytes"
        };
        return Err(fail(format!(
            "{what}: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let field = Field::new(grid, values.collect()).map_err(|e| fail(e.to_string()))?;
    Ok((field, t))
}

pub fn write_snapshot(field: &Field, t: f64, path: &Path) -> Result<()> {
    fs::write(path, encode_snapshot(field, t)).map_err(|e| Error::Snapshot {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
    let bytes = fs::read(path).map_err(|e| Error::Snapshot {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_snapshot(&bytes, path)
}

/// Reads a snapshot and requires it to live on `expected`.
pub fn read_snapshot_on(path: &Path, expected: &Grid) -> Result<(Field, f64)> {
    let (field, t) = read_snapshot(path)?;
    if field.grid() != *expected {
        return Err(Error::Snapshot {
            path: path.to_path_buf(),
            reason: format!("grid mismatch: expected {expected}, found {}", field.grid()),
        });
    }
    Ok((field, t))
}

/// File name used for the snapshot taken after `step` steps.
pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step:08}.{EXTENSION}")
}

/// Loads every `*.nlch` file in `dir`, sorted by stored time.
pub fn read_snapshot_dir(dir: &Path) -> Result<Vec<(f64, Field)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Snapshot {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .collect();
    paths.sort();
    let mut snaps = paths
        .iter()
        .map(|p| read_snapshot(p).map(|(f, t)| (t, f)))
        .collect::<Result<Vec<_>>>()?;
    snaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((_, first)) = snaps.first() {
        let grid = first.grid();
        if let Some((i, _)) = snaps.iter().enumerate().find(|(_, (_, f))| f.grid() != grid) {
            return Err(Error::Snapshot {
                path: paths[i].clone(),
                reason: format!("grid differs from the rest of {}", dir.display()),
            });
        }
    }
    Ok(snaps)
}

/// Observer writing each snapshot to `directory`.
#[derive(Debug)]
pub struct SnapshotWriter {
    pub directory: PathBuf,
    pub written: usize,
}

impl SnapshotWriter {
    pub fn new(directory: impl Into<PathBuf>) -> Result<Self> {
        let directory = directory.into();
        fs::create_dir_all(&directory)?;
        Ok(Self { directory, written: 0 })
    }
}

impl Observer for SnapshotWriter {
    fn on_snapshot(&mut self, state: &SimState) -> Result<()> {
        write_snapshot(
            &state.phi,
            state.t,
            &self.directory.join(snapshot_name(state.step_count)),
        )?;
        self.written += 1;
        Ok(())
    }
}
