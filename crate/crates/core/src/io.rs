//! Field dumps and restart-exact checkpoints.
//!
//! Binary layout (little endian): magic `CHSF`, format version `u32`,
//! `nx: u64`, `ny: u64`, view byte (0 physical, 1 spectral), then `nx·ny`
//! values (`f64`) or coefficients (`re, im` pairs), row-major with y outer.
//! A checkpoint is magic `CHSK`, version, `t`, `step_index`, `dt_current`,
//! `accept_streak`, followed by a spectral field block.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrators::SimState;
use crate::spectral::{Field, TorusGrid, View};

const FIELD_MAGIC: &[u8; 4] = b"CHSF";
const CHECKPOINT_MAGIC: &[u8; 4] = b"CHSK";
const VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(b)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get(r)?))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(get(r)?))
}

pub fn write_field_binary(w: &mut impl Write, f: &Field) -> Result<()> {
    let g = f.grid();
    w.write_all(FIELD_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u64(w, g.nx() as u64)?;
    put_u64(w, g.ny() as u64)?;
    match f.view() {
        View::Physical => {
            w.write_all(&[0])?;
            for &v in f.values().iter() {
                put_f64(w, v)?;
            }
        }
        View::Spectral => {
            w.write_all(&[1])?;
            for c in f.coeffs().iter() {
                put_f64(w, c.re)?;
                put_f64(w, c.im)?;
            }
        }
    }
    Ok(())
}

/// Reads a field block. When `grid` is given the header must match it.
pub fn read_field_binary(r: &mut impl Read, grid: Option<&Arc<TorusGrid>>) -> Result<Field> {
    if &get::<4>(r)? != FIELD_MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported field version {version}")));
    }
    let nx = get_u64(r)? as usize;
    let ny = get_u64(r)? as usize;
    let grid = match grid {
        Some(g) if g.nx() == nx && g.ny() == ny => Arc::clone(g),
        Some(g) => {
            return Err(Error::GridMismatch(format!(
                "file holds {nx}x{ny}, expected {}x{}",
                g.nx(),
                g.ny()
            )))
        }
        None => TorusGrid::new(nx, ny)?,
    };
    let n = nx * ny;
    match get::<1>(r)?[0] {
        0 => {
            let vals = (0..n).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
            Field::from_physical(&grid, vals)
        }
        1 => {
            let coeffs = (0..n)
                .map(|_| Ok(Complex64::new(get_f64(r)?, get_f64(r)?)))
                .collect::<Result<Vec<_>>>()?;
            Field::from_spectral(&grid, coeffs)
        }
        v => Err(Error::Format(format!("unknown view byte {v}"))),
    }
}

/// Physical values as CSV: a `# nx=.. ny=.. view=physical` header, then
/// `ny` rows of `nx` values.
pub fn write_field_csv(w: &mut impl Write, f: &Field) -> Result<()> {
    let g = f.grid();
    writeln!(w, "# nx={} ny={} view=physical", g.nx(), g.ny())?;
    let vals = f.values();
    for row in vals.chunks_exact(g.nx()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_field_csv(r: impl BufRead) -> Result<Field> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty field file".into()))??;
    let mut nx = None;
    let mut ny = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        match tok.split_once('=') {
            Some(("nx", v)) => nx = v.parse::<usize>().ok(),
            Some(("ny", v)) => ny = v.parse::<usize>().ok(),
            Some(("view", "physical")) => {}
            Some(("view", v)) => {
                return Err(Error::Format(format!("CSV fields must be physical, got {v}")))
            }
            _ => {}
        }
    }
    let (Some(nx), Some(ny)) = (nx, ny) else {
        return Err(Error::Format(format!("bad field header {header:?}")));
    };
    let grid = TorusGrid::new(nx, ny)?;
    let mut vals = Vec::with_capacity(nx * ny);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split(',') {
            vals.push(
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?,
            );
        }
    }
    Field::from_physical(&grid, vals)
}

pub fn save_checkpoint(path: &Path, state: &SimState) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_f64(&mut w, state.t)?;
    put_u64(&mut w, state.step_index)?;
    put_f64(&mut w, state.dt_current)?;
    put_u32(&mut w, state.accept_streak)?;
    write_field_binary(&mut w, &state.u.to_spectral())?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SimState> {
    let mut r = BufReader::new(fs::File::open(path)?);
    if &get::<4>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{} is not a checkpoint", path.display())));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let t = get_f64(&mut r)?;
    let step_index = get_u64(&mut r)?;
    let dt_current = get_f64(&mut r)?;
    let accept_streak = get_u32(&mut r)?;
    let u = read_field_binary(&mut r, None)?.into_spectral();
    Ok(SimState {
        t,
        u,
        step_index,
        dt_current,
        accept_streak,
    })
}
