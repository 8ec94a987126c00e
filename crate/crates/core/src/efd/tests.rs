use std::f64::consts::TAU;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::*;
use crate::geometry::{resample_arclength, Contour, ContourVideo, MaskVideo};
use crate::synthetic::{
    ellipse_frame, ellipse_series_dataset, random_star, rasterize_series, square_video_dataset,
    star_contour, StarHarmonic,
};

fn circle_contour(r: f64, n: usize) -> Contour {
    Contour::new(
        (0..n)
            .map(|j| {
                let s = TAU * j as f64 / n as f64;
                [r * s.cos(), r * s.sin()]
            })
            .collect(),
    )
}

fn unit_square() -> Contour {
    Contour::new(vec![[0.5, -0.5], [0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5]])
}

/// Closed-form arc-length parametrization of the unit square starting at
/// (0.5, -0.5) and walking counterclockwise. Perimeter 4.
fn square_point(s: f64) -> [f64; 2] {
    let s = s.rem_euclid(4.0);
    if s < 1.0 {
        [0.5, -0.5 + s]
    } else if s < 2.0 {
        [0.5 - (s - 1.0), 0.5]
    } else if s < 3.0 {
        [-0.5, 0.5 - (s - 2.0)]
    } else {
        [-0.5 + (s - 3.0), -0.5]
    }
}

/// Independent discrete-sum oracle: evaluates the exact square parametrization
/// at the sample positions and forms the Fourier sums directly.
fn square_discrete_oracle(n: usize, d: usize) -> Vec<[f64; 4]> {
    let mut out = vec![[0.0; 4]; d];
    for j in 0..n {
        let [x, y] = square_point(4.0 * j as f64 / n as f64);
        for (h, quad) in out.iter_mut().enumerate() {
            let arg = (h + 1) as f64 * TAU * j as f64 / n as f64;
            quad[0] += 2.0 * x * arg.cos() / n as f64;
            quad[1] += 2.0 * x * arg.sin() / n as f64;
            quad[2] += 2.0 * y * arg.cos() / n as f64;
            quad[3] += 2.0 * y * arg.sin() / n as f64;
        }
    }
    out
}

/// Continuous-integral oracle via composite Simpson quadrature of the exact
/// polygon parametrization.
fn square_quadrature_oracle(d: usize) -> Vec<[f64; 4]> {
    let m = 1 << 16; // even interval count
    let h = 4.0 / m as f64;
    let mut out = vec![[0.0; 4]; d];
    for (idx, quad) in out.iter_mut().enumerate() {
        let n = (idx + 1) as f64;
        let mut acc = [0.0f64; 4];
        for i in 0..=m {
            let s = h * i as f64;
            let [x, y] = square_point(s);
            let arg = n * TAU * s / 4.0;
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc[0] += w * x * arg.cos();
            acc[1] += w * x * arg.sin();
            acc[2] += w * y * arg.cos();
            acc[3] += w * y * arg.sin();
        }
        for (o, a) in quad.iter_mut().zip(acc) {
            *o = (2.0 / 4.0) * a * h / 3.0;
        }
    }
    out
}

#[test]
fn circle_coefficients_exact() {
    let frame = efd_encode(&circle_contour(10.0, 128), 3).unwrap();
    assert!(frame.centroid[0].abs() < 1e-12 && frame.centroid[1].abs() < 1e-12);
    let [a, b, c, d] = frame.harmonics[0];
    assert!((a - 10.0).abs() < 1e-9 && b.abs() < 1e-9 && c.abs() < 1e-9 && (d - 10.0).abs() < 1e-9);
    for h in 1..3 {
        for v in frame.harmonics[h] {
            assert!(v.abs() < 1e-9, "harmonic {} leaks {v}", h + 1);
        }
    }
}

#[test]
fn ellipse_coefficients_exact() {
    let pts: Vec<[f64; 2]> = (0..128)
        .map(|j| {
            let s = TAU * j as f64 / 128.0;
            [10.0 * s.cos(), 5.0 * s.sin()]
        })
        .collect();
    let frame = efd_encode(&Contour::new(pts), 4).unwrap();
    let [a, b, c, d] = frame.harmonics[0];
    assert!((a - 10.0).abs() < 1e-9 && b.abs() < 1e-9 && c.abs() < 1e-9 && (d - 5.0).abs() < 1e-9);
    for h in 1..4 {
        for v in frame.harmonics[h] {
            assert!(v.abs() < 1e-9);
        }
    }
}

#[test]
fn square_matches_discrete_oracle() {
    let resampled = resample_arclength(&unit_square(), 128).unwrap();
    let frame = efd_encode(&resampled, 9).unwrap();
    let oracle = square_discrete_oracle(128, 9);
    for (h, (got, want)) in frame.harmonics.iter().zip(&oracle).enumerate() {
        for k in 0..4 {
            assert!(
                (got[k] - want[k]).abs() < 1e-6,
                "harmonic {} coeff {k}: {} vs {}",
                h + 1,
                got[k],
                want[k]
            );
        }
    }
}

#[test]
fn square_discrete_close_to_continuous() {
    // The documented gap between discrete sums at N = 128 and the closed-form
    // integrals stays below 0.1% of the first-harmonic magnitude.
    let resampled = resample_arclength(&unit_square(), 128).unwrap();
    let frame = efd_encode(&resampled, 9).unwrap();
    let cont = square_quadrature_oracle(9);
    let scale = cont[0].iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (got, want) in frame.harmonics.iter().zip(&cont) {
        for k in 0..4 {
            assert!(
                (got[k] - want[k]).abs() <= 1e-3 * scale,
                "{} vs {} (scale {scale})",
                got[k],
                want[k]
            );
        }
    }
}

#[test]
fn nyquist_violation_detected() {
    let c = circle_contour(5.0, 16);
    assert!(matches!(efd_encode(&c, 8), Err(EfdError::NyquistViolation { .. })));
    assert!(efd_encode(&c, 7).is_ok());
}

#[test]
fn non_uniform_sampling_detected() {
    // Uniform-parameter sampling of an elongated ellipse has strongly varying
    // arc gaps.
    let pts: Vec<[f64; 2]> = (0..128)
        .map(|j| {
            let s = TAU * j as f64 / 128.0;
            [12.0 * s.cos(), 3.0 * s.sin()]
        })
        .collect();
    let err = check_uniform_sampling(&Contour::new(pts)).unwrap_err();
    assert!(matches!(err, EfdError::NonUniformSampling { .. }));
    let ok = resample_arclength(&unit_square(), 128).unwrap();
    check_uniform_sampling(&ok).unwrap();
}

#[test]
fn decode_single_harmonic_circle() {
    let frame = EfdFrame { centroid: [0.0, 0.0], harmonics: vec![[10.0, 0.0, 0.0, 10.0]] };
    let c = efd_decode(&frame, 256);
    for p in c.points() {
        let r = (p[0].powi(2) + p[1].powi(2)).sqrt();
        assert!((r - 10.0).abs() < 1e-9);
    }
}

#[test]
fn decode_zero_frame_collapses_to_centroid() {
    let frame = EfdFrame { centroid: [3.0, -2.0], harmonics: vec![[0.0; 4]; 2] };
    let c = efd_decode(&frame, 16);
    assert_eq!(c.len(), 16);
    for p in c.points() {
        assert_eq!(*p, [3.0, -2.0]);
    }
}

#[test]
fn circle_roundtrip_exact() {
    let c = circle_contour(10.0, 128);
    let frame = efd_encode(&c, 1).unwrap();
    let back = efd_decode(&frame, 128);
    for (p, q) in c.points().iter().zip(back.points()) {
        assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
    }
}

#[test]
fn centering_translation_oracle() {
    let star = star_contour(
        15.0,
        &[StarHarmonic { order: 3, amp: 0.1, phase: 0.7 }],
        [40.0, 25.0],
        128,
    );
    let frame = efd_encode(&star, 12).unwrap();
    let centered = center_frame(&frame);
    assert_eq!(centered.centroid, [0.0, 0.0]);
    assert_eq!(centered.harmonics, frame.harmonics);
    let plain = efd_decode(&frame, 64);
    let moved = efd_decode(&centered, 64);
    for (p, q) in plain.points().iter().zip(moved.points()) {
        assert!((p[0] - frame.centroid[0] - q[0]).abs() < 1e-9);
        assert!((p[1] - frame.centroid[1] - q[1]).abs() < 1e-9);
    }
    // Idempotent on an already-centered frame.
    assert_eq!(center_frame(&centered), centered);
}

#[test]
fn nyquist_completeness_on_smooth_stars() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for _ in 0..10 {
        let c = random_star(&mut rng, 20.0, 6, [0.0, 0.0], 128);
        let frame = efd_encode(&c, 63).unwrap();
        let back = efd_decode(&frame, 128);
        let mut max_err = 0.0f64;
        for (p, q) in c.points().iter().zip(back.points()) {
            max_err = max_err.max((p[0] - q[0]).hypot(p[1] - q[1]));
        }
        assert!(max_err < 1e-6, "max pointwise error {max_err}");
    }
}

#[test]
fn parseval_identity_on_smooth_stars() {
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    for _ in 0..5 {
        let c = random_star(&mut rng, 18.0, 5, [4.0, -2.0], 128);
        let frame = efd_encode(&c, 63).unwrap();
        let lhs: f64 = frame.centroid[0].powi(2)
            + frame.centroid[1].powi(2)
            + (1..=63).map(|n| frame.harmonic_power(n)).sum::<f64>();
        let rhs = c.points().iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / 128.0;
        assert!((lhs - rhs).abs() / rhs < 1e-6, "{lhs} vs {rhs}");
    }
}

#[test]
fn reconstruction_error_non_increasing_in_order() {
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let c = random_star(&mut rng, 20.0, 6, [0.0, 0.0], 128);
    let full = efd_encode(&c, 63).unwrap();
    let mut prev = f64::MAX;
    for d in 1..=30 {
        let back = efd_decode(&full.with_order(d), 128);
        let err: f64 = c
            .points()
            .iter()
            .zip(back.points())
            .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .sum::<f64>()
            / 128.0;
        assert!(err <= prev + 1e-12, "order {d}: {err} > {prev}");
        prev = err;
    }
}

#[test]
fn decoded_contours_close_exactly() {
    let frame = ellipse_frame(9.0, 5.0, 0.3);
    let c = efd_decode(&frame, 64);
    // s = 0 and s = 2*pi coincide by periodicity of the basis.
    let first = c.points()[0];
    let wrapped = efd_decode(&frame, 1).points()[0];
    assert_eq!(first, wrapped);
}

#[test]
fn static_circle_contour_video_constant() {
    let contours: Vec<Contour> = (0..5).map(|_| circle_contour(10.0, 128)).collect();
    let series = encode_contour_video(&ContourVideo::new(contours).unwrap(), 3).unwrap();
    assert_eq!(series.len(), 5);
    for t in 0..5 {
        let f = &series.frames()[t];
        let [a, b, c, d] = f.harmonics[0];
        assert!((a - 10.0).abs() < 1e-9 && b.abs() < 1e-9 && c.abs() < 1e-9 && (d - 10.0).abs() < 1e-9);
        for h in 1..3 {
            for v in f.harmonics[h] {
                assert!(v.abs() < 1e-9);
            }
        }
    }
}

#[test]
fn static_mask_video_constant_channels() {
    let series_src = EfdSeries::new(vec![ellipse_frame(12.0, 8.0, 0.5).with_order(1); 6]).unwrap();
    let video = rasterize_series(&series_src, (48, 48), 128);
    let series = encode_video(&video, 9, 128).unwrap();
    assert_eq!(series.channel_count(), 36);
    for t in 1..series.len() {
        for ch in 0..series.channel_count() {
            assert!(
                (series.value(ch, t) - series.value(ch, 0)).abs() < 1e-9,
                "channel {ch} drifts at t={t}"
            );
        }
    }
}

#[test]
fn pulsating_circle_tracks_radius_exactly_at_contour_level() {
    let t_len = 12;
    let contours: Vec<Contour> = (0..t_len)
        .map(|t| {
            let r = 10.0 + 2.0 * (TAU * t as f64 / t_len as f64).sin();
            circle_contour(r, 128)
        })
        .collect();
    let series = encode_contour_video(&ContourVideo::new(contours).unwrap(), 3).unwrap();
    for t in 0..t_len {
        let r = 10.0 + 2.0 * (TAU * t as f64 / t_len as f64).sin();
        assert!((series.value(0, t) - r).abs() < 1e-9);
        assert!((series.value(3, t) - r).abs() < 1e-9);
    }
}

#[test]
fn pulsating_circle_tracks_radius_through_masks() {
    // Analytic radius oracle. Binary masks quantize each frame's radius by
    // up to ~0.25 px (3% at r = 8), so the per-frame envelope is 3% while
    // the oracle agreement over the whole video stays within 1%.
    let t_len = 12;
    let frames: Vec<_> = (0..t_len)
        .map(|t| {
            let r = 10.0 + 2.0 * (TAU * t as f64 / t_len as f64).sin();
            ellipse_frame(r, r, 0.0)
        })
        .collect();
    let video = rasterize_series(&EfdSeries::new(frames).unwrap(), (48, 48), 256);
    let series = encode_video(&video, 3, 128).unwrap();
    let mut rel = Vec::new();
    for t in 0..t_len {
        let r = 10.0 + 2.0 * (TAU * t as f64 / t_len as f64).sin();
        for ch in [0, 3] {
            let v = series.value(ch, t);
            let e = (v - r) / r;
            assert!(e.abs() < 0.03, "t={t} ch={ch}: {v} vs r {r}");
            rel.push(e);
        }
    }
    let mean = rel.iter().sum::<f64>() / rel.len() as f64;
    assert!(mean.abs() < 0.01, "mean relative deviation {mean}");
}

#[test]
fn translation_invariance_after_centering() {
    let base = ellipse_series_dataset(1, 8, 1, 5).remove(0);
    let video = rasterize_series(&base, (64, 64), 128);
    let shifted = MaskVideo::new(
        video
            .frames()
            .iter()
            .map(|f| {
                let mut out = crate::geometry::MaskFrame::new(64, 64);
                for y in 0..64u32 {
                    for x in 0..64u32 {
                        if f.get(i64::from(x), i64::from(y)) && x + 5 < 64 && y + 3 < 64 {
                            out.set(x + 5, y + 3, true);
                        }
                    }
                }
                out
            })
            .collect(),
    )
    .unwrap();
    let a = encode_video(&video, 6, 128).unwrap();
    let b = encode_video(&shifted, 6, 128).unwrap();
    for t in 0..a.len() {
        for ch in 0..a.channel_count() {
            assert!((a.value(ch, t) - b.value(ch, t)).abs() < 1e-9);
        }
    }
}

#[test]
fn video_shape_for_paper_dimensions() {
    let series = ellipse_series_dataset(1, 50, 9, 2).remove(0);
    assert_eq!(series.channel_count(), 36);
    assert_eq!(series.len(), 50);
}

#[test]
fn frame_errors_carry_index() {
    let mut frames = Vec::new();
    for _ in 0..3 {
        let mut f = crate::geometry::MaskFrame::new(32, 32);
        for y in 10..20 {
            for x in 10..20 {
                f.set(x, y, true);
            }
        }
        frames.push(f);
    }
    frames[2] = crate::geometry::MaskFrame::new(32, 32); // empty frame
    let err = encode_video(&MaskVideo::new(frames).unwrap(), 3, 128).unwrap_err();
    assert!(matches!(err, EfdError::Geometry { index: 2, .. }), "{err:?}");
}

#[test]
fn select_harmonics_pure_ellipses() {
    let data = ellipse_series_dataset(10, 20, 12, 23);
    assert_eq!(select_harmonics(&data, 0.9999).unwrap(), 1);
}

#[test]
fn select_harmonics_squares_never_converges() {
    // Corner spectra keep strictly positive power in every harmonic, so a
    // fraction of exactly 1.0 only closes at d_max. Oracle: independent
    // cumulative-power scan over the power profile.
    let videos = square_video_dataset(3, 6, (64, 64), 31);
    let series: Vec<EfdSeries> =
        videos.iter().map(|v| encode_video(v, 30, 128).unwrap()).collect();
    let d = select_harmonics(&series, 1.0).unwrap();
    assert_eq!(d, 30);
    let profile = harmonic_power_profile(&series).unwrap();
    assert!(profile[29] > 0.0, "top harmonic carries no power");
    assert!(select_harmonics(&series, 0.9999).unwrap() > 1);
}

#[test]
fn select_harmonics_empty_dataset() {
    assert_eq!(select_harmonics(&[], 0.9999), Err(EfdError::EmptyDataset));
}

#[test]
fn norm_midpoint_and_roundtrip() {
    // Channel range [-3, 5]: value 1 sits at the midpoint.
    let mut series = EfdSeries::from_flat(1, 3, &[-3.0, 1.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.0, 7.0, 7.0]).unwrap();
    let stats = fit_norm(std::slice::from_ref(&series)).unwrap();
    let (normed, report) = apply_norm(&series, &stats).unwrap();
    assert_eq!(report.clamped, 0);
    assert!((normed.value(0, 1) - 0.5).abs() < 1e-15);
    // Constant channel maps to 0.5.
    assert!((normed.value(3, 0) - 0.5).abs() < 1e-15);
    let back = invert_norm(&normed, &stats).unwrap();
    for ch in 0..4 {
        for t in 0..3 {
            assert!((back.value(ch, t) - series.value(ch, t)).abs() < 1e-12);
        }
    }
    // Mutating a value outside the training range must clamp and count.
    series.set_value(0, 0, 9.0);
    let (clamped, report) = apply_norm(&series, &stats).unwrap();
    assert_eq!(report.clamped, 1);
    assert!((clamped.value(0, 0) - 1.0).abs() < 1e-15);
}

#[test]
fn norm_roundtrip_random_series() {
    let data = ellipse_series_dataset(4, 16, 3, 77);
    let stats = fit_norm(&data[..3]).unwrap();
    for series in &data[..3] {
        let (normed, _) = apply_norm(series, &stats).unwrap();
        let back = invert_norm(&normed, &stats).unwrap();
        let mut max_err = 0.0f64;
        for ch in 0..series.channel_count() {
            for t in 0..series.len() {
                max_err = max_err.max((back.value(ch, t) - series.value(ch, t)).abs());
            }
        }
        assert!(max_err < 1e-12, "max {max_err}");
    }
    // Held-out series may clamp; the rate is reported.
    let (_, report) = apply_norm(&data[3], &stats).unwrap();
    assert!(report.rate() <= 1.0);
}

#[test]
fn norm_stats_mismatch() {
    let a = ellipse_series_dataset(1, 8, 2, 1).remove(0);
    let stats = fit_norm(&[a]).unwrap();
    let b = ellipse_series_dataset(1, 8, 3, 1).remove(0);
    assert!(matches!(apply_norm(&b, &stats), Err(EfdError::StatsMismatch { .. })));
}

#[test]
fn series_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let series = ellipse_series_dataset(1, 12, 4, 9).remove(0);
    let path = dir.path().join("s.csv");
    write_series_csv(&series, &path).unwrap();
    let loaded = read_series_csv(&path).unwrap();
    assert_eq!(loaded.order(), 4);
    assert_eq!(loaded.len(), 12);
    for ch in 0..16 {
        for t in 0..12 {
            assert!((loaded.value(ch, t) - series.value(ch, t)).abs() < 1e-12);
        }
    }

    let stats = fit_norm(std::slice::from_ref(&series)).unwrap();
    let meta = SeriesMeta { d: 4, t_len: 12, n_points: 128, phase_anchored: true, stats: Some(stats) };
    let mpath = dir.path().join("s.meta.txt");
    write_series_meta(&meta, &mpath).unwrap();
    let loaded_meta = read_series_meta(&mpath).unwrap();
    assert_eq!(loaded_meta, meta);
}
