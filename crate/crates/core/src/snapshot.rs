//! Binary snapshot files.
//!
//! Layout (little-endian): `"NSRL"`, `u32` version, `u32 n`, `f64` domain
//! length, `f64 ν`, `f64` time, then `3·n³` `f64` physical samples,
//! component-major and x-fastest within a component.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::field::{Field, GridSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NSRL";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 8;

/// Largest `n` accepted when reading; keeps `3n³` allocations sane.
pub const MAX_N: u32 = 1024;

pub fn store_snapshot(field: &Field, time: f64, path: &Path) -> Result<()> {
    let g = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.domain_length().to_le_bytes())?;
    w.write_all(&g.nu().to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for comp in field.physical() {
        for v in comp {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot; returns the field and its time stamp.
pub fn load_snapshot(path: &Path) -> Result<(Field, f64)> {
    let fmt = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_LEN];
    read_exact(&mut r, &mut header)
        .map_err(|e| e.unwrap_or_else(|| fmt("truncated header".into())))?;
    if &header[0..4] != MAGIC {
        return Err(fmt(format!("bad magic {:?}", &header[0..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            supported: VERSION,
        });
    }
    let n = u32_at(8);
    if n > MAX_N {
        return Err(fmt(format!(
            "grid size {n} exceeds the supported maximum {MAX_N}"
        )));
    }
    let grid = GridSpec::new(n as usize, f64_at(12), f64_at(20)).map_err(|e| fmt(e.to_string()))?;
    let time = f64_at(28);

    let len = grid.len();
    let mut bytes = vec![0u8; 3 * len * 8];
    read_exact(&mut r, &mut bytes).map_err(|e| {
        e.unwrap_or_else(|| fmt(format!("truncated payload: expected {} samples", 3 * len)))
    })?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(fmt("trailing bytes after payload".into()));
    }
    let mut comps: [Vec<f64>; 3] = Default::default();
    for (c, comp) in comps.iter_mut().enumerate() {
        *comp = bytes[c * len * 8..(c + 1) * len * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
    }
    Ok((Field::from_physical(grid, comps)?, time))
}

/// `Err(None)` on EOF, `Err(Some(io))` on other failures.
fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> std::result::Result<(), Option<Error>> {
    match r.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(None),
        Err(e) => Err(Some(e.into())),
    }
}
