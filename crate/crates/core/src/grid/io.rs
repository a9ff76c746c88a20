//! Grid dumps.
//!
//! NLPG1 layout (little-endian): magic `b"NLPG1"`, `u8` dimension, `u8`
//! mode (0 free, 1 periodic), `u32` cells per side, `f64` spacing, then
//! `n^N` `f64` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::{Field, GridSpec, Mode};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"NLPG1";

pub fn write_nlpg1<W: Write>(field: &Field, mut w: W) -> Result<()> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&[g.dim() as u8])?;
    w.write_all(&[match g.mode() {
        Mode::Free => 0,
        Mode::Periodic => 1,
    }])?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.h().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_nlpg1<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    let dim = byte[0] as usize;
    r.read_exact(&mut byte)?;
    let mode = match byte[0] {
        0 => Mode::Free,
        1 => Mode::Periodic,
        m => return Err(Error::Format(format!("unknown mode byte {m}"))),
    };
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut dword = [0u8; 8];
    r.read_exact(&mut dword)?;
    let h = f64::from_le_bytes(dword);
    let grid = GridSpec::new(dim, n, h, mode).map_err(|e| Error::Format(e.to_string()))?;

    let mut values = Vec::with_capacity(grid.cells());
    for _ in 0..grid.cells() {
        r.read_exact(&mut dword).map_err(|_| {
            Error::Format(format!("truncated dump: expected {} values", grid.cells()))
        })?;
        values.push(f64::from_le_bytes(dword));
    }
    if r.read(&mut byte)? != 0 {
        return Err(Error::Format("trailing bytes after values".into()));
    }
    Field::new(grid, values)
}

pub fn save_nlpg1(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_nlpg1(field, std::io::BufWriter::new(file))
}

pub fn load_nlpg1(path: impl AsRef<Path>) -> Result<Field> {
    let file = std::fs::File::open(path)?;
    read_nlpg1(std::io::BufReader::new(file))
}

/// One line per cell: center coordinates, then the value, 17 significant digits.
pub fn write_csv<W: Write>(field: &Field, mut w: W) -> Result<()> {
    let g = field.grid();
    for (i, v) in field.values().iter().enumerate() {
        let c = g.center(i);
        for x in &c[..g.dim()] {
            write!(w, "{x:.16e},")?;
        }
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}
