//! Dataset preparation: carving per-cell phantom videos out of labeled
//! cell-tracking videos, filtering incomplete instances (border contact,
//! solidity, overlap), extracting fixed-length sliding windows, and
//! splitting by lineage without leakage.

mod ctc;

pub use ctc::{ingest_ctc, ingest_mvb};

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{GeometryError, MaskFrame, MaskVideo, VideoIoError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image error: {0}")]
    Image(String),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("cannot split a single lineage")]
    SingleLineage,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Video(#[from] VideoIoError),
}

/// One frame of 16-bit instance labels; 0 is background.
#[derive(Debug, Clone)]
pub struct LabelFrame {
    width: u32,
    height: u32,
    labels: Vec<u16>,
}

impl LabelFrame {
    pub fn new(width: u32, height: u32, labels: Vec<u16>) -> Result<Self, DatasetError> {
        if labels.len() != (width * height) as usize {
            return Err(DatasetError::InconsistentDimensions(format!(
                "label buffer holds {} values for a {width}x{height} frame",
                labels.len()
            )));
        }
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn label(&self, x: u32, y: u32) -> u16 {
        self.labels[(y * self.width + x) as usize]
    }

    /// Sorted distinct nonzero ids present in this frame.
    pub fn ids(&self) -> Vec<u16> {
        let mut ids: Vec<u16> = self.labels.iter().copied().filter(|&v| v != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Binary mask of one instance on the full frame canvas.
    pub fn instance_mask(&self, id: u16) -> MaskFrame {
        let bits: Vec<u8> = self.labels.iter().map(|&v| u8::from(v == id)).collect();
        MaskFrame::from_bits(self.width, self.height, &bits)
    }
}

/// One row of the lineage table: a track alive on frames [start, end] with
/// `parent` 0 meaning no parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackRecord {
    pub id: u16,
    pub start: usize,
    pub end: usize,
    pub parent: u16,
}

/// Labeled video plus its lineage forest.
#[derive(Debug, Clone)]
pub struct LabeledVideo {
    pub frames: Vec<LabelFrame>,
    pub tracks: Vec<TrackRecord>,
}

/// Per-cell crops on a fixed canvas with per-frame validity flags.
#[derive(Debug, Clone)]
pub struct PhantomTrack {
    pub track_id: u16,
    pub start_frame: usize,
    pub frames: Vec<MaskFrame>,
    pub valid: Vec<bool>,
}

/// Lineage roots assigned to each split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub train: Vec<u16>,
    pub test: Vec<u16>,
}

/// Foreground area divided by convex hull area (both pixel counts), in (0, 1].
pub fn solidity(frame: &MaskFrame) -> Result<f64, GeometryError> {
    let area = frame.foreground_count();
    if area == 0 {
        return Err(GeometryError::NoForeground);
    }
    Ok(area as f64 / frame.convex_hull_pixel_count()? as f64)
}

/// |ConvHull(a) intersect b| / |ConvHull(a)|, both measured on the hull
/// pixel set so full coverage yields exactly 1.
pub fn overlap_ratio(a: &MaskFrame, b: &MaskFrame) -> Result<f64, GeometryError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(GeometryError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    let region = a.convex_hull_region()?;
    let mut hull_px = 0usize;
    let mut both = 0usize;
    for y in 0..a.height() as i64 {
        for x in 0..a.width() as i64 {
            if region.get(x, y) {
                hull_px += 1;
                if b.get(x, y) {
                    both += 1;
                }
            }
        }
    }
    if hull_px == 0 {
        return Err(GeometryError::NoForeground);
    }
    Ok(both as f64 / hull_px as f64)
}

/// Default instance filter thresholds.
pub const DEFAULT_S_MIN: f64 = 0.969;
pub const DEFAULT_O_MAX: f64 = 0.017;
pub const DEFAULT_BORDER_PX: usize = 10;

/// Per-frame validity of every instance. A cell-frame is invalid iff it
/// touches the image border with more than `border_px` pixels, or it is both
/// low-solidity (< s_min) and highly overlapped (max neighbor overlap >
/// o_max) — the two overlap conditions combine with AND.
pub fn filter_instances(
    video: &LabeledVideo,
    s_min: f64,
    o_max: f64,
    border_px: usize,
) -> Vec<HashMap<u16, bool>> {
    video
        .frames
        .par_iter()
        .map(|frame| {
            let ids = frame.ids();
            let masks: HashMap<u16, MaskFrame> =
                ids.iter().map(|&id| (id, frame.instance_mask(id))).collect();
            ids.iter()
                .map(|&id| {
                    let mask = &masks[&id];
                    if mask.border_contact_count() > border_px {
                        return (id, false);
                    }
                    let s = solidity(mask).unwrap_or(0.0);
                    if s < s_min {
                        let max_overlap = ids
                            .iter()
                            .filter(|&&other| other != id)
                            .map(|other| overlap_ratio(mask, &masks[other]).unwrap_or(0.0))
                            .fold(0.0, f64::max);
                        if max_overlap > o_max {
                            return (id, false);
                        }
                    }
                    (id, true)
                })
                .collect()
        })
        .collect()
}

/// Carves per-track crops centered on the instance centroid. A frame is
/// valid when the filter passed, the crop fits the canvas, and the crop is a
/// valid phantom (one component, no holes).
pub fn carve_tracks(
    video: &LabeledVideo,
    validity: &[HashMap<u16, bool>],
    canvas: (u32, u32),
) -> Vec<PhantomTrack> {
    let (cw, ch) = canvas;
    video
        .tracks
        .par_iter()
        .map(|track| {
            let mut frames = Vec::new();
            let mut valid = Vec::new();
            for t in track.start..=track.end.min(video.frames.len().saturating_sub(1)) {
                let frame = &video.frames[t];
                let mask = frame.instance_mask(track.id);
                let mut crop = MaskFrame::new(cw, ch);
                let mut ok = validity
                    .get(t)
                    .and_then(|m| m.get(&track.id))
                    .copied()
                    .unwrap_or(false)
                    && !mask.is_empty();
                if ok {
                    let (cx, cy) = mask.centroid().expect("non-empty mask");
                    let dx = (f64::from(cw) / 2.0 - cx).round() as i64;
                    let dy = (f64::from(ch) / 2.0 - cy).round() as i64;
                    let mut clipped = false;
                    for y in 0..frame.height() as i64 {
                        for x in 0..frame.width() as i64 {
                            if mask.get(x, y) {
                                let (nx, ny) = (x + dx, y + dy);
                                if nx < 0 || ny < 0 || nx >= i64::from(cw) || ny >= i64::from(ch) {
                                    clipped = true;
                                } else {
                                    crop.set(nx as u32, ny as u32, true);
                                }
                            }
                        }
                    }
                    // Cells larger than the canvas are discarded.
                    ok = !clipped && crop.is_valid_phantom();
                }
                frames.push(crop);
                valid.push(ok);
            }
            PhantomTrack { track_id: track.id, start_frame: track.start, frames, valid }
        })
        .collect()
}

/// Window start offsets within maximal runs of `true` flags: each run yields
/// starts run_start + k*stride while start + t_win <= run_end + 1.
pub fn window_starts(valid: &[bool], t_win: usize, stride: usize) -> Vec<usize> {
    assert!(t_win >= 2 && stride >= 1, "t_win >= 2 and stride >= 1");
    let mut starts = Vec::new();
    let mut i = 0;
    while i < valid.len() {
        if !valid[i] {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < valid.len() && valid[i] {
            i += 1;
        }
        let run_end = i; // exclusive
        let mut s = run_start;
        while s + t_win <= run_end {
            starts.push(s);
            s += stride;
        }
    }
    starts
}

/// Fixed-length windows over the maximal valid runs of a track.
pub fn sliding_windows(track: &PhantomTrack, t_win: usize, stride: usize) -> Vec<MaskVideo> {
    window_starts(&track.valid, t_win, stride)
        .into_iter()
        .map(|s| MaskVideo::new(track.frames[s..s + t_win].to_vec()).expect("t_win >= 2"))
        .collect()
}

/// Maps every track to its lineage root by following parent links.
pub fn lineage_roots(tracks: &[TrackRecord]) -> HashMap<u16, u16> {
    let parents: HashMap<u16, u16> = tracks.iter().map(|t| (t.id, t.parent)).collect();
    let mut roots = HashMap::new();
    for track in tracks {
        let mut cur = track.id;
        let mut hops = 0;
        while let Some(&p) = parents.get(&cur) {
            if p == 0 || hops > tracks.len() {
                break;
            }
            cur = p;
            hops += 1;
        }
        roots.insert(track.id, cur);
    }
    roots
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Assigns whole lineages greedily, largest window count first (ties broken
/// by a seeded hash), to the test side until it reaches `test_fraction` of
/// all windows; the remainder trains.
pub fn lineage_split(
    lineages: &[(u16, usize)],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitManifest, DatasetError> {
    if lineages.len() < 2 {
        return Err(DatasetError::SingleLineage);
    }
    assert!(test_fraction > 0.0 && test_fraction < 1.0, "test fraction in (0, 1)");
    let total: usize = lineages.iter().map(|&(_, w)| w).sum();
    let target = test_fraction * total as f64;
    let mut order: Vec<(u16, usize)> = lineages.to_vec();
    order.sort_by_key(|&(id, w)| (std::cmp::Reverse(w), splitmix64(seed ^ u64::from(id)), id));

    let mut manifest = SplitManifest { train: Vec::new(), test: Vec::new() };
    let mut test_weight = 0usize;
    for (id, w) in order {
        if (test_weight as f64) < target {
            manifest.test.push(id);
            test_weight += w;
        } else {
            manifest.train.push(id);
        }
    }
    if manifest.train.is_empty() {
        // Never leave the training side empty.
        let id = manifest.test.pop().expect("at least two lineages");
        manifest.train.push(id);
    }
    manifest.train.sort_unstable();
    manifest.test.sort_unstable();
    Ok(manifest)
}

/// Prep configuration; canvas comes from the dataset (96x96 or 128x128).
#[derive(Debug, Clone)]
pub struct PrepConfig {
    pub s_min: f64,
    pub o_max: f64,
    pub border_px: usize,
    pub t_win: usize,
    pub stride: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub canvas: (u32, u32),
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            s_min: DEFAULT_S_MIN,
            o_max: DEFAULT_O_MAX,
            border_px: DEFAULT_BORDER_PX,
            t_win: 50,
            stride: 10,
            test_fraction: 0.1,
            seed: 0,
            canvas: (128, 128),
        }
    }
}

/// One extracted window with its provenance.
#[derive(Debug, Clone)]
pub struct PrepWindow {
    pub track_id: u16,
    pub root_id: u16,
    pub start_frame: usize,
    pub video: MaskVideo,
}

/// Full prep result: windows per split plus the lineage assignment.
#[derive(Debug)]
pub struct PrepOutput {
    pub train: Vec<PrepWindow>,
    pub test: Vec<PrepWindow>,
    pub manifest: SplitManifest,
}

/// Filter, carve, window, and split a labeled video.
pub fn prep_dataset(video: &LabeledVideo, cfg: &PrepConfig) -> Result<PrepOutput, DatasetError> {
    let validity = filter_instances(video, cfg.s_min, cfg.o_max, cfg.border_px);
    let tracks = carve_tracks(video, &validity, cfg.canvas);
    let roots = lineage_roots(&video.tracks);

    let mut windows: Vec<PrepWindow> = Vec::new();
    let mut weights: HashMap<u16, usize> = HashMap::new();
    for track in &tracks {
        let root = roots.get(&track.track_id).copied().unwrap_or(track.track_id);
        for start in window_starts(&track.valid, cfg.t_win, cfg.stride) {
            let video = MaskVideo::new(track.frames[start..start + cfg.t_win].to_vec())?;
            windows.push(PrepWindow {
                track_id: track.track_id,
                root_id: root,
                start_frame: track.start_frame + start,
                video,
            });
            *weights.entry(root).or_default() += 1;
        }
    }

    let mut lineages: Vec<(u16, usize)> = weights.into_iter().collect();
    lineages.sort_unstable();
    let manifest = lineage_split(&lineages, cfg.test_fraction, cfg.seed)?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for w in windows {
        if manifest.test.contains(&w.root_id) {
            test.push(w);
        } else {
            train.push(w);
        }
    }
    Ok(PrepOutput { train, test, manifest })
}
