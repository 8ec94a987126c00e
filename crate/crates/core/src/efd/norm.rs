//! Per-channel min-max normalization of EFD series to [0, 1].

use super::{EfdError, EfdSeries};

/// Per-channel training ranges. Fit on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl NormStats {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self, EfdError> {
        if mins.len() != maxs.len() {
            return Err(EfdError::StatsMismatch { expected: mins.len(), got: maxs.len() });
        }
        if let Some(i) = (0..mins.len()).find(|&i| maxs[i] < mins[i]) {
            return Err(EfdError::InvalidArgument(format!("channel {i}: max < min")));
        }
        Ok(Self { mins, maxs })
    }

    pub fn channel_count(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }
}

/// Out-of-range accounting from [`apply_norm`]; test-split values outside the
/// training range are clamped rather than extrapolated.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClampReport {
    pub clamped: usize,
    pub total: usize,
}

impl ClampReport {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clamped as f64 / self.total as f64
        }
    }
}

pub fn fit_norm(training: &[EfdSeries]) -> Result<NormStats, EfdError> {
    let first = training.first().ok_or(EfdError::EmptyDataset)?;
    let channels = first.channel_count();
    let mut mins = vec![f64::INFINITY; channels];
    let mut maxs = vec![f64::NEG_INFINITY; channels];
    for series in training {
        if series.channel_count() != channels {
            return Err(EfdError::StatsMismatch { expected: channels, got: series.channel_count() });
        }
        for ch in 0..channels {
            for t in 0..series.len() {
                let v = series.value(ch, t);
                mins[ch] = mins[ch].min(v);
                maxs[ch] = maxs[ch].max(v);
            }
        }
    }
    NormStats::new(mins, maxs)
}

/// Affine map of each channel onto [0, 1] over the training range, clamping
/// out-of-range values. Constant channels map to 0.5.
pub fn apply_norm(series: &EfdSeries, stats: &NormStats) -> Result<(EfdSeries, ClampReport), EfdError> {
    if series.channel_count() != stats.channel_count() {
        return Err(EfdError::StatsMismatch {
            expected: stats.channel_count(),
            got: series.channel_count(),
        });
    }
    let mut out = series.clone();
    let mut report = ClampReport::default();
    for ch in 0..series.channel_count() {
        let (lo, hi) = (stats.mins[ch], stats.maxs[ch]);
        let span = hi - lo;
        for t in 0..series.len() {
            let v = series.value(ch, t);
            report.total += 1;
            let mapped = if span == 0.0 {
                0.5
            } else {
                let u = (v - lo) / span;
                if !(0.0..=1.0).contains(&u) {
                    report.clamped += 1;
                }
                u.clamp(0.0, 1.0)
            };
            out.set_value(ch, t, mapped);
        }
    }
    Ok((out, report))
}

/// Inverse of [`apply_norm`] for in-range values; constant channels recover
/// their training value.
pub fn invert_norm(series: &EfdSeries, stats: &NormStats) -> Result<EfdSeries, EfdError> {
    if series.channel_count() != stats.channel_count() {
        return Err(EfdError::StatsMismatch {
            expected: stats.channel_count(),
            got: series.channel_count(),
        });
    }
    let mut out = series.clone();
    for ch in 0..series.channel_count() {
        let (lo, hi) = (stats.mins[ch], stats.maxs[ch]);
        let span = hi - lo;
        for t in 0..series.len() {
            let v = series.value(ch, t);
            out.set_value(ch, t, if span == 0.0 { lo } else { lo + v * span });
        }
    }
    Ok(out)
}
