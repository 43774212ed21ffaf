//! Plain-text signal and measurement files. Lines starting with `#` are
//! comments; numbers use Rust's shortest round-trip formatting.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurement::{MeasurementSet, ModulationKind, ModulationParams};
use crate::signal::SparseSignal;

fn data_lines(r: impl BufRead) -> impl Iterator<Item = Result<(usize, String)>> {
    r.lines().enumerate().filter_map(|(i, l)| match l {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(s) => {
            let t = s.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok((i + 1, t.to_string())))
        }
    })
}

fn fields<T: std::str::FromStr>(line: usize, s: &str, want: usize) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| Error::Parse { line, msg: format!("bad number {t:?}") }))
        .collect::<Result<_>>()?;
    if v.len() != want {
        return Err(Error::Parse { line, msg: format!("expected {want} fields, found {}", v.len()) });
    }
    Ok(v)
}

/// Header `n K`, then K lines `index re im`.
pub fn write_signal(mut w: impl Write, s: &SparseSignal) -> Result<()> {
    writeln!(w, "{} {}", s.n(), s.k())?;
    for (i, v) in s.support() {
        writeln!(w, "{} {} {}", i, v.re, v.im)?;
    }
    Ok(())
}

pub fn read_signal(r: impl BufRead) -> Result<SparseSignal> {
    let mut lines = data_lines(r);
    let (ln, head) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })??;
    let h: Vec<u64> = fields(ln, &head, 2)?;
    let mut support = Vec::with_capacity(h[1] as usize);
    for item in lines {
        let (ln, s) = item?;
        let mut it = s.split_whitespace();
        let idx = it
            .next()
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or(Error::Parse { line: ln, msg: "bad index".into() })?;
        let rest: Vec<f64> = fields(ln, &it.collect::<Vec<_>>().join(" "), 2)?;
        support.push((idx, Complex64::new(rest[0], rest[1])));
    }
    if support.len() as u64 != h[1] {
        return Err(Error::Parse { line: ln, msg: format!("header promises {} entries, found {}", h[1], support.len()) });
    }
    SparseSignal::new(h[0], support)
}

/// Header `M n L`, then M lines `y1 y2 y3 y4`.
pub fn write_measurements(mut w: impl Write, m: &MeasurementSet) -> Result<()> {
    writeln!(w, "{} {} {}", m.bins.len(), m.params.n(), m.params.check_shift())?;
    for b in &m.bins {
        writeln!(w, "{} {} {} {}", b[0], b[1], b[2], b[3])?;
    }
    Ok(())
}

pub fn read_measurements(r: impl BufRead, kind: ModulationKind) -> Result<MeasurementSet> {
    let mut lines = data_lines(r);
    let (ln, head) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })??;
    let h: Vec<u64> = fields(ln, &head, 3)?;
    let params = ModulationParams::new(h[1], kind, h[2])?;
    let mut bins = Vec::with_capacity(h[0] as usize);
    for item in lines {
        let (ln, s) = item?;
        let v: Vec<f64> = fields(ln, &s, 4)?;
        if v.iter().any(|y| !(*y >= 0.0)) {
            return Err(Error::Parse { line: ln, msg: "magnitudes must be nonnegative".into() });
        }
        bins.push([v[0], v[1], v[2], v[3]]);
    }
    if bins.len() as u64 != h[0] {
        return Err(Error::Parse { line: ln, msg: format!("header promises {} bins, found {}", h[0], bins.len()) });
    }
    Ok(MeasurementSet { params, bins })
}
