//! EFD series CSV files and the key=value metadata sidecar.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{EfdError, EfdSeries, NormStats};
use crate::geometry::VideoIoError;

/// Sidecar metadata recorded next to a series CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    pub d: usize,
    pub t_len: usize,
    pub n_points: usize,
    pub phase_anchored: bool,
    pub stats: Option<NormStats>,
}

/// Writes `t,a1,b1,c1,d1,...` rows with 16 significant digits.
pub fn write_series_csv(series: &EfdSeries, path: &Path) -> Result<(), VideoIoError> {
    let d = series.order();
    let mut out = String::new();
    out.push('t');
    for n in 1..=d {
        out.push_str(&format!(",a{n},b{n},c{n},d{n}"));
    }
    out.push('\n');
    for t in 0..series.len() {
        out.push_str(&t.to_string());
        for ch in 0..series.channel_count() {
            out.push_str(&format!(",{:.15e}", series.value(ch, t)));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<EfdSeries, VideoIoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| VideoIoError::MalformedManifest("empty series csv".into()))?;
    let channels = header.split(',').count() - 1;
    if channels == 0 || channels % 4 != 0 {
        return Err(VideoIoError::MalformedManifest(format!(
            "series csv must have 4d value columns, found {channels}"
        )));
    }
    let d = channels / 4;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != channels + 1 {
            return Err(VideoIoError::MalformedManifest(format!(
                "row {i}: expected {} fields, found {}",
                channels + 1,
                fields.len()
            )));
        }
        let values = fields[1..]
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| VideoIoError::MalformedManifest(format!("row {i}: {e}")))?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(VideoIoError::MalformedManifest("series csv has no rows".into()));
    }
    let t_len = rows.len();
    let mut flat = vec![0.0; channels * t_len];
    for (t, row) in rows.iter().enumerate() {
        for ch in 0..channels {
            flat[ch * t_len + t] = row[ch];
        }
    }
    EfdSeries::from_flat(d, t_len, &flat)
        .map_err(|e| VideoIoError::MalformedManifest(e.to_string()))
}

pub fn write_series_meta(meta: &SeriesMeta, path: &Path) -> Result<(), VideoIoError> {
    let mut out = Vec::new();
    writeln!(out, "d={}", meta.d)?;
    writeln!(out, "t={}", meta.t_len)?;
    writeln!(out, "n_points={}", meta.n_points)?;
    writeln!(out, "phase_anchored={}", meta.phase_anchored)?;
    if let Some(stats) = &meta.stats {
        for (i, (lo, hi)) in stats.mins().iter().zip(stats.maxs()).enumerate() {
            writeln!(out, "min.{i}={lo:.17e}")?;
            writeln!(out, "max.{i}={hi:.17e}")?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_series_meta(path: &Path) -> Result<SeriesMeta, VideoIoError> {
    let text = fs::read_to_string(path)?;
    let mut d = None;
    let mut t_len = None;
    let mut n_points = None;
    let mut phase_anchored = false;
    let mut mins: Vec<(usize, f64)> = Vec::new();
    let mut maxs: Vec<(usize, f64)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| VideoIoError::MalformedManifest(format!("bad meta line: {line}")))?;
        let bad = |e: String| VideoIoError::MalformedManifest(format!("{key}: {e}"));
        match key {
            "d" => d = Some(value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
            "t" => t_len = Some(value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
            "n_points" => {
                n_points = Some(value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?)
            }
            "phase_anchored" => {
                phase_anchored = value.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?
            }
            _ => {
                if let Some(idx) = key.strip_prefix("min.") {
                    let i: usize = idx.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                    mins.push((i, value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?));
                } else if let Some(idx) = key.strip_prefix("max.") {
                    let i: usize = idx.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                    maxs.push((i, value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?));
                }
            }
        }
    }
    let d = d.ok_or_else(|| VideoIoError::MalformedManifest("missing d".into()))?;
    let t_len = t_len.ok_or_else(|| VideoIoError::MalformedManifest("missing t".into()))?;
    let n_points = n_points.ok_or_else(|| VideoIoError::MalformedManifest("missing n_points".into()))?;
    let stats = if mins.is_empty() && maxs.is_empty() {
        None
    } else {
        mins.sort_by_key(|&(i, _)| i);
        maxs.sort_by_key(|&(i, _)| i);
        let stats = NormStats::new(
            mins.into_iter().map(|(_, v)| v).collect(),
            maxs.into_iter().map(|(_, v)| v).collect(),
        )
        .map_err(|e: EfdError| VideoIoError::MalformedManifest(e.to_string()))?;
        Some(stats)
    };
    Ok(SeriesMeta { d, t_len, n_points, phase_anchored, stats })
}
