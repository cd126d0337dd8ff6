//! fvecs and CSV fixture readers.
//!
//! fvecs records are a little-endian `i32` dimension followed by that many
//! little-endian `f32` values.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use coded_mrpt::{Dataset, Error, Result};

pub fn parse_fvecs(bytes: &[u8]) -> Result<Vec<Vec<f32>>> {
    if bytes.is_empty() {
        return Err(Error::Format("fvecs file is empty".into()));
    }
    let mut out = Vec::new();
    let mut pos = 0;
    let mut dim = None;
    while pos < bytes.len() {
        let Some(head) = bytes.get(pos..pos + 4) else {
            return Err(Error::Format(format!("truncated header at byte {pos}")));
        };
        let d = i32::from_le_bytes(head.try_into().unwrap());
        if d <= 0 {
            return Err(Error::Format(format!("record {} has dimension {d}", out.len())));
        }
        let d = d as usize;
        if *dim.get_or_insert(d) != d {
            return Err(Error::Format(format!(
                "record {} has dimension {d}, expected {}",
                out.len(),
                dim.unwrap()
            )));
        }
        pos += 4;
        let Some(body) = bytes.get(pos..pos + 4 * d) else {
            return Err(Error::Format(format!("record {} truncated", out.len())));
        };
        out.push(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
        pos += 4 * d;
    }
    Ok(out)
}

pub fn read_fvecs(path: &Path) -> Result<Vec<Vec<f32>>> {
    parse_fvecs(&fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}

/// Loads an fvecs file, widening to `f64`.
pub fn load_fvecs(path: &Path) -> Result<Dataset<f64>> {
    let rows = read_fvecs(path)?;
    let wide: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    Dataset::from_points(&wide)
}

/// Writes points as fvecs, narrowing to `f32`.
pub fn write_fvecs<R: AsRef<[f64]>>(path: &Path, points: &[R]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    for p in points {
        let p = p.as_ref();
        w.write_all(&(p.len() as i32).to_le_bytes())?;
        for &x in p {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fixture format: a `d=<int>` line, then one comma-separated point per line.
/// Blank lines and `#` comments are skipped.
pub fn parse_csv(text: &str) -> Result<Dataset<f64>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty CSV fixture".into()))?;
    let d: usize = header
        .strip_prefix("d=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("expected `d=<int>` header, got `{header}`")))?;
    let mut points = Vec::new();
    for (no, line) in lines {
        let p = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", no + 1)))?;
        if p.len() != d {
            return Err(Error::Format(format!("line {}: {} values, expected {d}", no + 1, p.len())));
        }
        points.push(p);
    }
    Dataset::from_points(&points)
}

pub fn load_csv(path: &Path) -> Result<Dataset<f64>> {
    parse_csv(&fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}
