//! File adapters: cell-tracking-challenge style label directories and MVB
//! video directories.

use std::fs;
use std::path::{Path, PathBuf};

use super::{DatasetError, LabelFrame, LabeledVideo, TrackRecord};
use crate::geometry::{load_mvb1, MaskVideo};

/// Numbered 16-bit label images (png/tif) plus a 4-column whitespace-separated
/// lineage file (`track start end parent`, one row per track), conventionally
/// `man_track.txt`. Unknown files are ignored.
pub fn ingest_ctc(dir: &Path) -> Result<LabeledVideo, DatasetError> {
    let mut images: Vec<(u64, PathBuf)> = Vec::new();
    let mut texts: Vec<PathBuf> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "png" | "tif" | "tiff" => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let digits: String = stem.chars().filter(|c| c.is_ascii_digit()).collect();
                let number = digits.parse::<u64>().map_err(|_| {
                    DatasetError::MalformedManifest(format!(
                        "label image {} has no frame number in its name",
                        path.display()
                    ))
                })?;
                images.push((number, path));
            }
            "txt" => texts.push(path),
            _ => eprintln!("warning: ignoring {}", path.display()),
        }
    }
    if images.is_empty() {
        return Err(DatasetError::MalformedManifest(format!(
            "{}: no label images found",
            dir.display()
        )));
    }
    images.sort();

    let frames = images
        .into_iter()
        .map(|(_, path)| load_label_image(&path))
        .collect::<Result<Vec<_>, _>>()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    if let Some(bad) = frames.iter().find(|f| f.width() != w || f.height() != h) {
        return Err(DatasetError::InconsistentDimensions(format!(
            "label frames mix {w}x{h} and {}x{}",
            bad.width(),
            bad.height()
        )));
    }

    let lineage_path = texts
        .iter()
        .find(|p| p.file_name().and_then(|n| n.to_str()) == Some("man_track.txt"))
        .or_else(|| texts.first())
        .ok_or_else(|| {
            DatasetError::MalformedManifest(format!("{}: no lineage text file", dir.display()))
        })?;
    let tracks = parse_lineage(&fs::read_to_string(lineage_path)?)?;

    Ok(LabeledVideo { frames, tracks })
}

fn load_label_image(path: &Path) -> Result<LabelFrame, DatasetError> {
    let img = image::open(path).map_err(|e| DatasetError::Image(format!("{}: {e}", path.display())))?;
    let luma = img.into_luma16();
    let (w, h) = luma.dimensions();
    LabelFrame::new(w, h, luma.into_raw())
}

/// Parses `track start end parent` rows.
pub fn parse_lineage(text: &str) -> Result<Vec<TrackRecord>, DatasetError> {
    let mut tracks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(DatasetError::MalformedManifest(format!(
                "lineage row {i}: expected 4 columns, found {}",
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<u64, DatasetError> {
            s.parse()
                .map_err(|e| DatasetError::MalformedManifest(format!("lineage row {i}: {e}")))
        };
        let id = parse(fields[0])? as u16;
        let start = parse(fields[1])? as usize;
        let end = parse(fields[2])? as usize;
        let parent = parse(fields[3])? as u16;
        if end < start {
            return Err(DatasetError::MalformedManifest(format!(
                "lineage row {i}: end {end} before start {start}"
            )));
        }
        tracks.push(TrackRecord { id, start, end, parent });
    }
    if tracks.is_empty() {
        return Err(DatasetError::MalformedManifest("lineage file has no rows".into()));
    }
    Ok(tracks)
}

/// Loads every `*.mvb` file in a directory, sorted by file name.
pub fn ingest_mvb(dir: &Path) -> Result<Vec<MaskVideo>, DatasetError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("mvb"))
        .collect();
    if paths.is_empty() {
        return Err(DatasetError::MalformedManifest(format!(
            "{}: no .mvb files found",
            dir.display()
        )));
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| load_mvb1(&p).map_err(DatasetError::from))
        .collect()
}
