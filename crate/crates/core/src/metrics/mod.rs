//! Morphological feature time series over phantom videos and dataset-level
//! comparison (Diff and DTW on population-mean curves).

mod dtw;
mod report;

pub use dtw::dtw_distance;
pub use report::{
    ablation_csv, ablation_sweep, curves_csv, curves_svg, evaluate, mean_curve, report_csv,
    report_table, AblationRow, CurveBand, EvalReport, FeatureStats,
};

use thiserror::Error;

use crate::geometry::{extract_contour, resample_arclength, MaskVideo};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dataset contains no videos")]
    EmptyDataset,
    #[error("curve is empty")]
    EmptyCurve,
    #[error("curves have no overlapping frames")]
    NoOverlap,
}

/// The four reported morphological features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Area,
    Roundness,
    Elongation,
    Convexity,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Area, Feature::Roundness, Feature::Elongation, Feature::Convexity];

    pub fn name(&self) -> &'static str {
        match self {
            Feature::Area => "area",
            Feature::Roundness => "roundness",
            Feature::Elongation => "elongation",
            Feature::Convexity => "convexity",
        }
    }
}

/// One feature's per-frame values; invalid frames are flagged gaps.
#[derive(Debug, Clone)]
pub struct FeatureCurve {
    pub feature: Feature,
    pub values: Vec<Option<f64>>,
}

impl FeatureCurve {
    /// Values with gaps dropped.
    pub fn dense(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

/// Per-frame morphological features of one video:
/// area = foreground pixel count, roundness = 4*pi*area/perimeter^2 clamped
/// to [0, 1] (perimeter from the traced contour), elongation = major/minor
/// moment axes, convexity = area / hull pixel count. Frames that fail the
/// valid-phantom predicate yield gaps.
pub fn feature_curves(video: &MaskVideo) -> [FeatureCurve; 4] {
    use rayon::prelude::*;

    let rows: Vec<Option<[f64; 4]>> = video
        .frames()
        .par_iter()
        .map(|frame| {
            if !frame.is_valid_phantom() {
                return None;
            }
            let area = frame.foreground_count() as f64;
            let traced = extract_contour(frame).ok()?;
            let perimeter = smoothed_perimeter(&traced);
            let roundness = (4.0 * std::f64::consts::PI * area / perimeter.powi(2)).clamp(0.0, 1.0);
            let (major, minor) = frame.moments_axes().ok()?;
            let hull = frame.convex_hull_pixel_count().ok()? as f64;
            Some([area, roundness, major / minor, area / hull])
        })
        .collect();

    let mut curves = Feature::ALL.map(|feature| FeatureCurve { feature, values: Vec::new() });
    for row in rows {
        for (i, curve) in curves.iter_mut().enumerate() {
            curve.values.push(row.map(|r| r[i]));
        }
    }
    curves
}

/// Perimeter of a traced contour with the marching-squares staircase removed:
/// arc-length resampling cuts across the jags and two (1,2,1)/4 smoothing
/// passes take the residual inflation from ~3.5% to below 0.5% on disks.
fn smoothed_perimeter(traced: &crate::geometry::Contour) -> f64 {
    let Ok(resampled) = resample_arclength(traced, 128) else {
        return traced.perimeter();
    };
    let mut pts = resampled.points().to_vec();
    let m = pts.len();
    for _ in 0..2 {
        pts = (0..m)
            .map(|i| {
                let a = pts[(i + m - 1) % m];
                let b = pts[i];
                let c = pts[(i + 1) % m];
                [(a[0] + 2.0 * b[0] + c[0]) / 4.0, (a[1] + 2.0 * b[1] + c[1]) / 4.0]
            })
            .collect();
    }
    crate::geometry::Contour::new(pts).perimeter()
}

#[cfg(test)]
mod tests;
