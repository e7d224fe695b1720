//! Per-record scalar diagnostics and their CSV form.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the diagnostics CSV.
pub const CSV_HEADER: &str = "t,l2,h2,mean,mean_part_l2,fluct_l2,free_energy,dissipation,fluct_dissipation,nonlinear_work,dt";

/// Scalars recorded at one output time.
///
/// `mean_part_l2` is `‖∫u dx‖_{L²_y}`, i.e. the x-integral rather than the
/// x-average, so `l2² = mean_part_l2² / 2π + fluct_l2²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l2: f64,
    /// `‖Δu‖_{L²}`
    pub h2: f64,
    pub mean: f64,
    pub mean_part_l2: f64,
    pub fluct_l2: f64,
    pub free_energy: f64,
    /// `2εw ∫₀ᵗ ‖Δu‖²`
    pub dissipation: f64,
    /// `εw ∫₀ᵗ ‖Δu_∦‖²`
    pub fluct_dissipation: f64,
    /// `2w ∫₀ᵗ ∫ u Δ(a u³ + b u² + c u)`
    pub nonlinear_work: f64,
    pub dt: f64,
}

impl DiagnosticsRecord {
    fn fields(&self) -> [f64; 11] {
        [
            self.t,
            self.l2,
            self.h2,
            self.mean,
            self.mean_part_l2,
            self.fluct_l2,
            self.free_energy,
            self.dissipation,
            self.fluct_dissipation,
            self.nonlinear_work,
            self.dt,
        ]
    }

    fn from_fields(v: &[f64]) -> Self {
        Self {
            t: v[0],
            l2: v[1],
            h2: v[2],
            mean: v[3],
            mean_part_l2: v[4],
            fluct_l2: v[5],
            free_energy: v[6],
            dissipation: v[7],
            fluct_dissipation: v[8],
            nonlinear_work: v[9],
            dt: v[10],
        }
    }

    /// One CSV line without the trailing newline. Uses the shortest
    /// round-trip representation, so parsing gives back identical bits.
    pub fn csv_line(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.fields().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{v:e}").unwrap();
        }
        s
    }
}

pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_line())?;
    }
    w.flush()
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty diagnostics file".into()))??;
    if header.trim() != CSV_HEADER {
        return Err(Error::Format(format!(
            "unexpected diagnostics header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
        if vals.len() != 11 {
            return Err(Error::Format(format!(
                "line {}: expected 11 columns, got {}",
                i + 2,
                vals.len()
            )));
        }
        out.push(DiagnosticsRecord::from_fields(&vals));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_exact() {
        let r = DiagnosticsRecord {
            t: 0.1,
            l2: 1.0 / 3.0,
            h2: 2.5e-300,
            mean: -0.0,
            mean_part_l2: 1e20,
            fluct_l2: f64::MIN_POSITIVE,
            free_energy: -7.25,
            dissipation: 0.0,
            fluct_dissipation: 3.0,
            nonlinear_work: -1e-5,
            dt: 1e-3,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r, r]).unwrap();
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back, vec![r, r]);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_csv(&b"t,l2\n1,2\n"[..]).is_err());
    }
}
