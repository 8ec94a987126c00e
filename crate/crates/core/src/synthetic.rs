//! Bundled synthetic fixtures: analytic test contours and seeded toy
//! datasets (pulsating/rotating ellipses with a mid-video area drop and
//! recovery, plus a corner-rich square variant). Everything here is
//! deterministic under its seed so pipelines and tests run offline.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::efd::{efd_decode, EfdFrame, EfdSeries};
use crate::geometry::{rasterize_contour, Contour, MaskFrame, MaskVideo};

/// One radial perturbation term of a star-shaped contour.
#[derive(Debug, Clone, Copy)]
pub struct StarHarmonic {
    pub order: usize,
    pub amp: f64,
    pub phase: f64,
}

/// Samples r(theta) = radius * (1 + sum amp*cos(order*theta + phase)) at `n`
/// exactly uniform arc-length positions, starting at theta = 0. Arc length is
/// inverted on a dense table so the returned points lie on the analytic curve.
pub fn star_contour(radius: f64, terms: &[StarHarmonic], center: [f64; 2], n: usize) -> Contour {
    let r = |theta: f64| -> f64 {
        radius
            * (1.0
                + terms
                    .iter()
                    .map(|t| t.amp * (t.order as f64 * theta + t.phase).cos())
                    .sum::<f64>())
    };
    let dr = |theta: f64| -> f64 {
        -radius
            * terms
                .iter()
                .map(|t| t.amp * t.order as f64 * (t.order as f64 * theta + t.phase).sin())
                .sum::<f64>()
    };
    // Arc-length speed |dp/dtheta| = sqrt(r^2 + r'^2); integrate on a dense
    // grid with the trapezoid rule, then invert by interpolation.
    const M: usize = 1 << 17;
    let speed: Vec<f64> = (0..=M)
        .map(|i| {
            let th = TAU * i as f64 / M as f64;
            (r(th).powi(2) + dr(th).powi(2)).sqrt()
        })
        .collect();
    let mut cum = vec![0.0; M + 1];
    let h = TAU / M as f64;
    for i in 0..M {
        cum[i + 1] = cum[i] + 0.5 * h * (speed[i] + speed[i + 1]);
    }
    let total = cum[M];

    let mut points = Vec::with_capacity(n);
    let mut seg = 0usize;
    for j in 0..n {
        let target = total * j as f64 / n as f64;
        while seg + 1 < M && cum[seg + 1] <= target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        let theta = h * (seg as f64 + t);
        let rv = r(theta);
        points.push([center[0] + rv * theta.cos(), center[1] + rv * theta.sin()]);
    }
    Contour::new(points)
}

/// Random smooth star shape for round-trip property tests. Amplitudes decay
/// with order so the curve stays analytic and simple.
pub fn random_star(rng: &mut impl Rng, radius: f64, max_order: usize, center: [f64; 2], n: usize) -> Contour {
    let terms: Vec<StarHarmonic> = (2..=max_order)
        .map(|order| StarHarmonic {
            order,
            amp: rng.gen_range(0.0..0.10) / order as f64,
            phase: rng.gen_range(0.0..TAU),
        })
        .collect();
    star_contour(radius, &terms, center, n)
}

/// Single-harmonic ellipse traversed at uniform parameter speed:
/// p(s) = center + R(theta) * (a cos s, b sin s).
pub fn ellipse_contour(a: f64, b: f64, theta: f64, center: [f64; 2], n: usize) -> Contour {
    let frame = ellipse_frame(a, b, theta);
    efd_decode(&frame, n).translate(center[0], center[1])
}

/// EFD frame of the rotated ellipse (pure first harmonic, zero centroid).
pub fn ellipse_frame(a: f64, b: f64, theta: f64) -> EfdFrame {
    let (sin, cos) = theta.sin_cos();
    EfdFrame {
        centroid: [0.0, 0.0],
        harmonics: vec![[a * cos, -b * sin, a * sin, b * cos]],
    }
}

/// Scale evolution shared by the toy datasets: pulsation plus a mid-video
/// drop-and-recover dip and a mild linear trend.
#[derive(Debug, Clone)]
struct ScaleTrack {
    pulse_amp: f64,
    pulse_cycles: f64,
    pulse_phase: f64,
    dip_depth: f64,
    dip_center: f64,
    dip_width: f64,
    slope: f64,
}

impl ScaleTrack {
    fn sample(rng: &mut impl Rng, t_len: usize) -> Self {
        let t = t_len as f64;
        Self {
            pulse_amp: rng.gen_range(0.04..0.12),
            pulse_cycles: rng.gen_range(1..=3) as f64,
            pulse_phase: rng.gen_range(0.0..TAU),
            dip_depth: rng.gen_range(0.18..0.32),
            dip_center: rng.gen_range(0.25 * t..0.6 * t),
            dip_width: rng.gen_range(t / 14.0..t / 8.0),
            slope: rng.gen_range(-0.08..0.08),
        }
    }

    fn at(&self, t: usize, t_len: usize) -> f64 {
        let tf = t as f64;
        let u = tf / t_len as f64;
        let pulse = 1.0 + self.pulse_amp * (TAU * self.pulse_cycles * u + self.pulse_phase).sin();
        let dip = 1.0 - self.dip_depth * (-((tf - self.dip_center) / self.dip_width).powi(2)).exp();
        pulse * dip + self.slope * (u - 0.5)
    }
}

/// Exact EFD series of one pulsating/rotating ellipse video.
pub fn pulsating_ellipse_series(rng: &mut impl Rng, t_len: usize, d: usize) -> EfdSeries {
    let a0 = rng.gen_range(10.0..15.0);
    let q = rng.gen_range(1.15..1.9);
    let b0 = a0 / q;
    let theta0 = rng.gen_range(0.0..TAU);
    let omega = rng.gen_range(-0.04..0.04);
    let track = ScaleTrack::sample(rng, t_len);

    let frames = (0..t_len)
        .map(|t| {
            let s = track.at(t, t_len).max(0.35);
            ellipse_frame(a0 * s, b0 * s, theta0 + omega * t as f64).with_order(d)
        })
        .collect();
    EfdSeries::new(frames).expect("non-empty series")
}

/// Dataset of exact pulsating-ellipse EFD series (no rasterization).
pub fn ellipse_series_dataset(count: usize, t_len: usize, d: usize, seed: u64) -> Vec<EfdSeries> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count).map(|_| pulsating_ellipse_series(&mut rng, t_len, d)).collect()
}

/// Rasterizes an EFD series onto a canvas, centering each decoded frame.
pub fn rasterize_series(series: &EfdSeries, canvas: (u32, u32), n_points: usize) -> MaskVideo {
    let (w, h) = canvas;
    let frames: Vec<MaskFrame> = series
        .frames()
        .iter()
        .map(|frame| {
            let contour = efd_decode(frame, n_points)
                .translate(f64::from(w) / 2.0 - frame.centroid[0], f64::from(h) / 2.0 - frame.centroid[1]);
            rasterize_contour(&contour, h, w)
                .expect("fixture contour must fit its canvas")
                .frame
        })
        .collect();
    MaskVideo::new(frames).expect("fixture video is non-empty")
}

/// Mask-video dataset of pulsating/rotating ellipses.
pub fn ellipse_video_dataset(
    count: usize,
    t_len: usize,
    canvas: (u32, u32),
    n_points: usize,
    seed: u64,
) -> Vec<MaskVideo> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let series = pulsating_ellipse_series(&mut rng, t_len, 1);
            rasterize_series(&series, canvas, n_points)
        })
        .collect()
}

/// Corner-rich dataset: rotating, pulsating near-squares (superellipse-like
/// profile) whose traced spectra keep power in high harmonics.
pub fn square_video_dataset(
    count: usize,
    t_len: usize,
    canvas: (u32, u32),
    seed: u64,
) -> Vec<MaskVideo> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (w, h) = canvas;
    (0..count)
        .map(|_| {
            let half = rng.gen_range(9.0..13.0);
            let theta0 = rng.gen_range(0.0..TAU);
            let omega = rng.gen_range(-0.05..0.05);
            let track = ScaleTrack::sample(&mut rng, t_len);
            let frames: Vec<MaskFrame> = (0..t_len)
                .map(|t| {
                    let s = track.at(t, t_len).max(0.35);
                    let theta = theta0 + omega * t as f64;
                    let (sin, cos) = theta.sin_cos();
                    let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
                    let pts: Vec<[f64; 2]> = corners
                        .iter()
                        .map(|&[x, y]| {
                            let (x, y) = (x * half * s, y * half * s);
                            [
                                f64::from(w) / 2.0 + x * cos - y * sin,
                                f64::from(h) / 2.0 + x * sin + y * cos,
                            ]
                        })
                        .collect();
                    rasterize_contour(&Contour::new(pts), h, w)
                        .expect("square fits canvas")
                        .frame
                })
                .collect();
            MaskVideo::new(frames).expect("non-empty")
        })
        .collect()
}
