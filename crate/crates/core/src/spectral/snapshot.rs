//! Plain-text field snapshots: a header `n L time`, then `n` lines `x value`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{RealField, Result, SpectralError, SpectralGrid};

fn err(msg: impl Into<String>) -> SpectralError {
    SpectralError::Snapshot(msg.into())
}

pub fn to_string(field: &RealField, time: f64) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(48 * (g.n() + 1));
    let _ = writeln!(out, "{} {:.17e} {:.17e}", g.n(), g.length(), time);
    for (j, v) in field.values().iter().enumerate() {
        let _ = writeln!(out, "{:.17e} {:.17e}", g.x(j), v);
    }
    out
}

pub fn write(path: &Path, field: &RealField, time: f64) -> Result<()> {
    fs::write(path, to_string(field, time)).map_err(|e| err(format!("{}: {e}", path.display())))
}

/// Parses a snapshot, building a fresh grid from its header.
pub fn from_str(text: &str) -> Result<(RealField, f64)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| err("empty snapshot"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(err(format!("bad header {header:?}")));
    }
    let n: usize = parts[0].parse().map_err(|_| err("bad point count"))?;
    let length: f64 = parts[1].parse().map_err(|_| err("bad length"))?;
    let time: f64 = parts[2].parse().map_err(|_| err("bad time"))?;
    let grid = SpectralGrid::new(n, length)?;
    read_values(&grid, lines, n).map(|f| (f, time))
}

/// Parses a snapshot onto an existing grid, which must match the header.
pub fn from_str_on(grid: &Arc<SpectralGrid>, text: &str) -> Result<(RealField, f64)> {
    let (f, t) = from_str(text)?;
    if !f.grid().same_as(grid) {
        return Err(SpectralError::GridMismatch);
    }
    Ok((RealField::new(Arc::clone(grid), f.into_values())?, t))
}

fn read_values<'a>(
    grid: &Arc<SpectralGrid>,
    lines: impl Iterator<Item = &'a str>,
    n: usize,
) -> Result<RealField> {
    let mut values = Vec::with_capacity(n);
    for (j, line) in lines.enumerate() {
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(format!("line {}: bad x", j + 2)))?;
        let v: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(format!("line {}: bad value", j + 2)))?;
        if j < n && (x - grid.x(j)).abs() > 1e-9 * grid.length() {
            return Err(err(format!("line {}: x = {x} off grid", j + 2)));
        }
        values.push(v);
    }
    RealField::new(Arc::clone(grid), values)
}

pub fn read(path: &Path) -> Result<(RealField, f64)> {
    let text = fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    from_str(&text)
}
