//! Elliptical Fourier descriptors: forward/inverse transform between
//! resampled contours and harmonic coefficient vectors, harmonic-order
//! selection by cumulative power, and per-channel normalization.
//!
//! A frame's contour (x_j, y_j), sampled at N uniform arc-length positions
//! s_j = 2*pi*j/N, is encoded as a centroid (A0, C0) plus d harmonic
//! quadruples (a_n, b_n, c_n, d_n) via discrete Fourier sums, and decoded by
//!
//!   x(s) = A0 + sum_n a_n cos(n s) + b_n sin(n s)
//!   y(s) = C0 + sum_n c_n cos(n s) + d_n sin(n s)

mod io;
mod norm;

pub use io::{read_series_csv, read_series_meta, write_series_csv, write_series_meta, SeriesMeta};
pub use norm::{apply_norm, fit_norm, invert_norm, ClampReport, NormStats};

use std::f64::consts::TAU;

use thiserror::Error;

use crate::geometry::{extract_contour, resample_arclength, Contour, ContourVideo, GeometryError, MaskVideo};

/// Relative standard deviation of point gaps above which a contour is
/// rejected as non-uniformly sampled. Raw marching-squares traces sit near
/// 0.17; arc-length resampled contours stay well below 0.1 even on corners.
pub const UNIFORMITY_TOLERANCE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum EfdError {
    #[error("{harmonics} harmonics need at least {} points, got {points}", 2 * harmonics + 2)]
    NyquistViolation { points: usize, harmonics: usize },
    #[error("contour sampling is not uniform (relative gap deviation {rel_dev:.4})")]
    NonUniformSampling { rel_dev: f64 },
    #[error("dataset contains no frames")]
    EmptyDataset,
    #[error("channel count mismatch: expected {expected}, got {got}")]
    StatsMismatch { expected: usize, got: usize },
    #[error("series mixes harmonic orders: expected {expected}, got {got}")]
    MixedOrder { expected: usize, got: usize },
    #[error("frame {index}: {source}")]
    Frame { index: usize, source: Box<EfdError> },
    #[error("frame {index}: {source}")]
    Geometry { index: usize, source: GeometryError },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One frame's EFD coefficients: centroid plus `d` harmonic quadruples
/// (a_n, b_n, c_n, d_n) in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct EfdFrame {
    pub centroid: [f64; 2],
    pub harmonics: Vec<[f64; 4]>,
}

impl EfdFrame {
    pub fn zero(d: usize) -> Self {
        Self { centroid: [0.0, 0.0], harmonics: vec![[0.0; 4]; d] }
    }

    pub fn order(&self) -> usize {
        self.harmonics.len()
    }

    /// Power carried by harmonic `n` (1-based): (a^2 + b^2 + c^2 + d^2) / 2.
    pub fn harmonic_power(&self, n: usize) -> f64 {
        let [a, b, c, d] = self.harmonics[n - 1];
        (a * a + b * b + c * c + d * d) / 2.0
    }

    /// Truncates or zero-pads to `d` harmonics.
    pub fn with_order(&self, d: usize) -> EfdFrame {
        let mut harmonics = self.harmonics.clone();
        harmonics.resize(d, [0.0; 4]);
        EfdFrame { centroid: self.centroid, harmonics }
    }

    /// Rotates the contour start point by `delta` radians of arc-length
    /// parameter. Harmonic magnitudes are preserved exactly.
    pub fn rotate_start(&self, delta: f64) -> EfdFrame {
        let harmonics = self
            .harmonics
            .iter()
            .enumerate()
            .map(|(i, &[a, b, c, d])| {
                let (sin, cos) = ((i + 1) as f64 * delta).sin_cos();
                [
                    a * cos + b * sin,
                    b * cos - a * sin,
                    c * cos + d * sin,
                    d * cos - c * sin,
                ]
            })
            .collect();
        EfdFrame { centroid: self.centroid, harmonics }
    }
}

/// T frames of common harmonic order. The flattened channel layout is
/// [a1, b1, c1, d1, ..., a_d, b_d, c_d, d_d] per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct EfdSeries {
    frames: Vec<EfdFrame>,
}

impl EfdSeries {
    pub fn new(frames: Vec<EfdFrame>) -> Result<Self, EfdError> {
        let first = frames.first().ok_or(EfdError::EmptyDataset)?;
        let d = first.order();
        for f in &frames {
            if f.order() != d {
                return Err(EfdError::MixedOrder { expected: d, got: f.order() });
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[EfdFrame] {
        &self.frames
    }

    pub fn order(&self) -> usize {
        self.frames[0].order()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        4 * self.order()
    }

    #[inline]
    pub fn value(&self, channel: usize, t: usize) -> f64 {
        self.frames[t].harmonics[channel / 4][channel % 4]
    }

    #[inline]
    pub fn set_value(&mut self, channel: usize, t: usize, v: f64) {
        self.frames[t].harmonics[channel / 4][channel % 4] = v;
    }

    /// Row-major channels x T matrix of the flattened coefficients.
    pub fn to_flat(&self) -> Vec<f64> {
        let (c, t_len) = (self.channel_count(), self.len());
        let mut out = vec![0.0; c * t_len];
        for ch in 0..c {
            for t in 0..t_len {
                out[ch * t_len + t] = self.value(ch, t);
            }
        }
        out
    }

    /// Rebuilds a series (zero centroids) from a channels x T matrix.
    pub fn from_flat(d: usize, t_len: usize, data: &[f64]) -> Result<Self, EfdError> {
        if data.len() != 4 * d * t_len {
            return Err(EfdError::StatsMismatch { expected: 4 * d * t_len, got: data.len() });
        }
        let mut frames = vec![EfdFrame::zero(d); t_len];
        for ch in 0..4 * d {
            for t in 0..t_len {
                frames[t].harmonics[ch / 4][ch % 4] = data[ch * t_len + t];
            }
        }
        Ok(Self { frames })
    }
}

/// Rejects contours whose consecutive gaps deviate too strongly from uniform.
pub fn check_uniform_sampling(contour: &Contour) -> Result<(), EfdError> {
    let pts = contour.points();
    let n = pts.len();
    let gaps: Vec<f64> = (0..n)
        .map(|i| {
            let [x1, y1] = pts[i];
            let [x2, y2] = pts[(i + 1) % n];
            ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt()
        })
        .collect();
    let mean = gaps.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 {
        return Err(EfdError::NonUniformSampling { rel_dev: f64::INFINITY });
    }
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n as f64;
    let rel_dev = var.sqrt() / mean;
    if rel_dev > UNIFORMITY_TOLERANCE {
        return Err(EfdError::NonUniformSampling { rel_dev });
    }
    Ok(())
}

/// Discrete Fourier coefficients of a uniformly sampled closed contour:
/// A0 = mean(x), C0 = mean(y), and for n = 1..d with s_j = 2*pi*j/N,
/// a_n = (2/N) sum_j x_j cos(n s_j), b_n = (2/N) sum_j x_j sin(n s_j)
/// (c_n, d_n analogously for y). The result is not yet centered.
pub fn efd_encode(contour: &Contour, d: usize) -> Result<EfdFrame, EfdError> {
    let pts = contour.points();
    let n = pts.len();
    if d < 1 {
        return Err(EfdError::InvalidArgument("harmonic order must be >= 1".into()));
    }
    if 2 * d + 2 > n {
        return Err(EfdError::NyquistViolation { points: n, harmonics: d });
    }

    let inv_n = 1.0 / n as f64;
    let mut a0 = 0.0;
    let mut c0 = 0.0;
    for &[x, y] in pts {
        a0 += x;
        c0 += y;
    }
    a0 *= inv_n;
    c0 *= inv_n;

    let mut harmonics = vec![[0.0; 4]; d];
    for (j, &[x, y]) in pts.iter().enumerate() {
        let base = TAU * j as f64 * inv_n;
        for (h, quad) in harmonics.iter_mut().enumerate() {
            let (sin, cos) = ((h + 1) as f64 * base).sin_cos();
            quad[0] += x * cos;
            quad[1] += x * sin;
            quad[2] += y * cos;
            quad[3] += y * sin;
        }
    }
    for quad in &mut harmonics {
        for v in quad.iter_mut() {
            *v *= 2.0 * inv_n;
        }
    }
    Ok(EfdFrame { centroid: [a0, c0], harmonics })
}

/// Evaluates the truncated Fourier series at `n` uniform parameter values
/// s_j = 2*pi*j/n. Total over any valid frame; the output closes implicitly.
pub fn efd_decode(frame: &EfdFrame, n: usize) -> Contour {
    let mut points = Vec::with_capacity(n);
    for j in 0..n {
        let s = TAU * j as f64 / n as f64;
        let mut x = frame.centroid[0];
        let mut y = frame.centroid[1];
        for (h, &[a, b, c, d]) in frame.harmonics.iter().enumerate() {
            let (sin, cos) = ((h + 1) as f64 * s).sin_cos();
            x += a * cos + b * sin;
            y += c * cos + d * sin;
        }
        points.push([x, y]);
    }
    Contour::new(points)
}

/// Zeroes the centroid, keeping harmonics untouched (position invariance).
pub fn center_frame(frame: &EfdFrame) -> EfdFrame {
    EfdFrame { centroid: [0.0, 0.0], harmonics: frame.harmonics.clone() }
}

/// Encodes a contour video frame-by-frame, centering every frame and
/// aligning contour start phases across frames: the first frame is rotated
/// so its start point sits on the +x axis of the traversal (zeroing c1),
/// and every later frame maximizes coefficient correlation with its
/// predecessor. Tracer-dependent start points would otherwise inject
/// artificial oscillation into the b/c channels.
pub fn encode_contour_video(video: &ContourVideo, d: usize) -> Result<EfdSeries, EfdError> {
    let mut frames: Vec<EfdFrame> = Vec::with_capacity(video.len());
    for (index, contour) in video.contours().iter().enumerate() {
        check_uniform_sampling(contour)
            .and_then(|()| efd_encode(contour, d))
            .map(|f| frames.push(center_frame(&f)))
            .map_err(|source| EfdError::Frame { index, source: Box::new(source) })?;
    }
    frames[0] = anchor_first_frame(&frames[0]);
    for i in 1..frames.len() {
        frames[i] = align_to_previous(&frames[i - 1], &frames[i]);
    }
    EfdSeries::new(frames)
}

/// Full per-frame mask pipeline: trace, resample to `n` points, encode at
/// order `d`, center, and phase-align across frames.
pub fn encode_video(video: &MaskVideo, d: usize, n: usize) -> Result<EfdSeries, EfdError> {
    use rayon::prelude::*;

    let contours: Vec<Contour> = video
        .frames()
        .par_iter()
        .enumerate()
        .map(|(index, frame)| {
            extract_contour(frame)
                .and_then(|c| resample_arclength(&c, n))
                .map_err(|source| EfdError::Geometry { index, source })
        })
        .collect::<Result<_, _>>()?;
    let video = ContourVideo::new(contours)
        .map_err(|source| EfdError::Geometry { index: 0, source })?;
    encode_contour_video(&video, d)
}

/// Rotates the start point so the first harmonic begins on its +x axis
/// (c1 = 0, a1 >= 0). Circles and near-circles then encode as
/// (r, 0, 0, r) regardless of where the tracer happened to start.
fn anchor_first_frame(frame: &EfdFrame) -> EfdFrame {
    let [a, _, c, d] = frame.harmonics[0];
    let mut delta = (-c).atan2(d);
    if a * delta.cos() + frame.harmonics[0][1] * delta.sin() < 0.0 {
        delta += std::f64::consts::PI;
    }
    frame.rotate_start(delta)
}

/// Rotates `cur`'s start phase so its first harmonic correlates maximally
/// with the previous frame's. The first-harmonic correlation is
/// P cos(delta) + Q sin(delta), maximized in closed form at
/// delta = atan2(Q, P); identical frames align exactly (delta carries over).
fn align_to_previous(prev: &EfdFrame, cur: &EfdFrame) -> EfdFrame {
    let [a, b, c, d] = cur.harmonics[0];
    let [ap, bp, cp, dp] = prev.harmonics[0];
    let p = a * ap + b * bp + c * cp + d * dp;
    let q = b * ap - a * bp + d * cp - c * dp;
    if p == 0.0 && q == 0.0 {
        return cur.clone();
    }
    cur.rotate_start(q.atan2(p))
}

/// Mean per-harmonic power over every frame of every series, used for
/// order selection. All series must share the same (maximal) order.
pub fn harmonic_power_profile(training: &[EfdSeries]) -> Result<Vec<f64>, EfdError> {
    let first = training.first().ok_or(EfdError::EmptyDataset)?;
    let d_max = first.order();
    let mut power = vec![0.0; d_max];
    let mut frames = 0usize;
    for series in training {
        if series.order() != d_max {
            return Err(EfdError::MixedOrder { expected: d_max, got: series.order() });
        }
        for frame in series.frames() {
            for n in 1..=d_max {
                power[n - 1] += frame.harmonic_power(n);
            }
            frames += 1;
        }
    }
    if frames == 0 {
        return Err(EfdError::EmptyDataset);
    }
    for p in &mut power {
        *p /= frames as f64;
    }
    Ok(power)
}

/// Smallest harmonic order whose cumulative power reaches `fraction` of the
/// total power present in the training encoding. Evaluated through suffix
/// sums (tail power <= (1 - fraction) * total) so that strictly positive
/// tails are never lost to rounding, even at fraction = 1.
pub fn select_harmonics(training: &[EfdSeries], fraction: f64) -> Result<usize, EfdError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EfdError::InvalidArgument(format!("fraction {fraction} not in (0, 1]")));
    }
    let power = harmonic_power_profile(training)?;
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return Err(EfdError::EmptyDataset);
    }
    let mut tail = 0.0;
    let mut tails = vec![0.0; power.len()]; // tails[i] = power beyond order i+1
    for i in (0..power.len()).rev() {
        tails[i] = tail;
        tail += power[i];
    }
    let budget = (1.0 - fraction) * total;
    for (i, &t) in tails.iter().enumerate() {
        if t <= budget {
            return Ok(i + 1);
        }
    }
    Ok(power.len())
}

#[cfg(test)]
mod tests;
