use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::dtw::oracle::dtw_bruteforce;
use super::report::diff_metric;
use super::*;
use crate::efd::EfdSeries;
use crate::geometry::{rasterize_contour, Contour, MaskFrame, MaskVideo};
use crate::synthetic::{ellipse_frame, rasterize_series};

fn disk_video(r: f64, t: usize) -> MaskVideo {
    let series = EfdSeries::new(vec![ellipse_frame(r, r, 0.0); t]).unwrap();
    rasterize_series(&series, (64, 64), 256)
}

#[test]
fn features_of_static_disk() {
    let video = disk_video(20.0, 5);
    let curves = feature_curves(&video);
    for t in 0..5 {
        let area = curves[0].values[t].unwrap();
        let roundness = curves[1].values[t].unwrap();
        let elongation = curves[2].values[t].unwrap();
        let convexity = curves[3].values[t].unwrap();
        assert!((area - std::f64::consts::PI * 400.0).abs() < 40.0, "area {area}");
        assert!(roundness >= 0.95 && roundness <= 1.0, "roundness {roundness}");
        assert!(elongation >= 1.0 && elongation <= 1.05, "elongation {elongation}");
        assert!(convexity >= 0.98, "convexity {convexity}");
    }
}

#[test]
fn roundness_of_square_near_pi_over_4() {
    // 4*pi*L^2 / (4L)^2 = pi/4 for an ideal square.
    let sq = Contour::new(vec![[10.0, 10.0], [50.0, 10.0], [50.0, 50.0], [10.0, 50.0]]);
    let frame = rasterize_contour(&sq, 64, 64).unwrap().frame;
    let video = MaskVideo::new(vec![frame]).unwrap();
    let curves = feature_curves(&video);
    let roundness = curves[1].values[0].unwrap();
    assert!(
        (roundness - std::f64::consts::FRAC_PI_4).abs() < 0.05,
        "roundness {roundness}"
    );
}

#[test]
fn elongation_of_ellipse() {
    let series = EfdSeries::new(vec![ellipse_frame(20.0, 10.0, 0.4)]).unwrap();
    let video = rasterize_series(&series, (64, 64), 256);
    let curves = feature_curves(&video);
    let elongation = curves[2].values[0].unwrap();
    assert!((elongation - 2.0).abs() < 0.1, "elongation {elongation}");
}

#[test]
fn invalid_frames_become_gaps() {
    let mut frames = disk_video(10.0, 3).frames().to_vec();
    frames[1] = MaskFrame::new(64, 64); // empty -> invalid
    let video = MaskVideo::new(frames).unwrap();
    let curves = feature_curves(&video);
    assert!(curves[0].values[0].is_some());
    assert!(curves[0].values[1].is_none());
    assert!(curves[0].values[2].is_some());
}

#[test]
fn dtw_trivials() {
    assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    // Repeats align freely.
    assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
    // Constant gap of 1 after max-length normalization.
    assert_eq!(dtw_distance(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(), 1.0);
    assert_eq!(dtw_distance(&[], &[1.0]), Err(MetricsError::EmptyCurve));
}

#[test]
fn dtw_matches_bruteforce_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8usize);
        let m = rng.gen_range(1..=8usize);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fast = dtw_distance(&x, &y).unwrap();
        let slow = dtw_bruteforce(&x, &y);
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }
}

proptest! {
    #[test]
    fn dtw_symmetric_and_bounded_by_aligned_mean(seed in 0u64..300) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..30usize);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let xy = dtw_distance(&x, &y).unwrap();
        let yx = dtw_distance(&y, &x).unwrap();
        prop_assert!((xy - yx).abs() < 1e-12);
        // The diagonal path is one admissible alignment.
        let aligned: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
        prop_assert!(xy <= aligned + 1e-12);
        prop_assert!(dtw_distance(&x, &x).unwrap() == 0.0);
    }
}

#[test]
fn diff_metric_examples() {
    let a: Vec<Option<f64>> = vec![Some(1.0), Some(2.0), Some(3.0)];
    assert_eq!(diff_metric(&a, &a).unwrap(), 0.0);
    // Constant offset c on every video shifts the mean curve by c.
    let b: Vec<Option<f64>> = vec![Some(1.5), Some(2.5), Some(3.5)];
    assert_eq!(diff_metric(&a, &b).unwrap(), 0.5);
}

#[test]
fn diff_metric_hand_computed_dataset() {
    // Two 3-video toy datasets with hand-listed area curves; the oracle is a
    // spreadsheet-style computation of per-frame means.
    let a = [[10.0, 12.0, 14.0], [20.0, 22.0, 24.0], [30.0, 32.0, 34.0]];
    let b = [[11.0, 13.0, 12.0], [19.0, 23.0, 25.0], [33.0, 30.0, 35.0]];
    let mean = |d: &[[f64; 3]; 3], t: usize| (d[0][t] + d[1][t] + d[2][t]) / 3.0;
    // Hand computation: means a = (20, 22, 24); means b = (21, 22, 24);
    // |deltas| = (1, 0, 0) -> Diff = 1/3.
    let ma: Vec<Option<f64>> = (0..3).map(|t| Some(mean(&a, t))).collect();
    let mb: Vec<Option<f64>> = (0..3).map(|t| Some(mean(&b, t))).collect();
    let d = diff_metric(&ma, &mb).unwrap();
    assert!((d - 1.0 / 3.0).abs() < 1e-12, "diff {d}");
}

#[test]
fn evaluate_identical_datasets_zero() {
    let videos: Vec<MaskVideo> = (0..3).map(|i| disk_video(10.0 + i as f64, 4)).collect();
    let report = evaluate(&videos, |_| videos.clone(), 1).unwrap();
    for row in &report.rows {
        assert_eq!(row.diff_mean, 0.0, "{}", row.feature.name());
        assert_eq!(row.dtw_mean, 0.0);
        assert_eq!(row.diff_std, 0.0);
    }
    assert_eq!(report.curves.len(), 8, "real + synthetic bands for 4 features");
}

#[test]
fn evaluate_replications_deterministic() {
    let real: Vec<MaskVideo> = (0..2).map(|i| disk_video(12.0 + i as f64, 4)).collect();
    let gen = |rep: usize| -> Vec<MaskVideo> {
        // Seeded pseudo-generator: radius depends deterministically on rep.
        vec![disk_video(10.0 + (rep % 3) as f64, 4)]
    };
    let a = evaluate(&real, gen, 10).unwrap();
    let b = evaluate(&real, gen, 10).unwrap();
    assert_eq!(a.rows.len(), 4);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.diff_mean, y.diff_mean);
        assert_eq!(x.diff_std, y.diff_std);
    }
    // Area varies across replications, so its std is strictly positive.
    assert!(a.stats(Feature::Area).diff_std > 0.0);
}

#[test]
fn report_formats() {
    let videos: Vec<MaskVideo> = (0..2).map(|i| disk_video(9.0 + i as f64, 3)).collect();
    let report = evaluate(&videos, |_| videos.clone(), 2).unwrap();
    let table = report_table(&report);
    for f in Feature::ALL {
        assert!(table.contains(f.name()), "table missing {}", f.name());
    }
    assert!(table.contains("Diff") && table.contains("DTW"));
    let csv = report_csv(&report);
    assert_eq!(csv.lines().count(), 9, "header + 4 features x 2 metrics");
    let curves = curves_csv(&report.curves);
    assert!(curves.starts_with("t,feature,mean,q25,q75,dataset\n"));
    assert!(curves.contains(",real\n") && curves.contains(",synthetic\n"));
    let svg = curves_svg(&report.curves);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("polyline"));
}

#[test]
fn ablation_rows_shape() {
    let videos: Vec<MaskVideo> = (0..2).map(|i| disk_video(9.0 + i as f64, 3)).collect();
    let sweep = ablation_sweep(&videos, &[1, 3], 2, |_d, _rep| videos.clone()).unwrap();
    let csv = ablation_csv(&sweep);
    assert!(csv.starts_with("d,feature,metric,mean,std\n"));
    // 2 d-values x 4 features x 2 metrics + header.
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn feature_scale_and_translation_invariance() {
    // Translation leaves all four features unchanged; doubling scale
    // multiplies area by ~4 and leaves the dimensionless features within 5%.
    let base = EfdSeries::new(vec![ellipse_frame(10.0, 7.0, 0.3)]).unwrap();
    let small = rasterize_series(&base, (96, 96), 256);
    let big = rasterize_series(
        &EfdSeries::new(vec![ellipse_frame(20.0, 14.0, 0.3)]).unwrap(),
        (96, 96),
        256,
    );
    let fs = feature_curves(&small);
    let fb = feature_curves(&big);
    let area_ratio = fb[0].values[0].unwrap() / fs[0].values[0].unwrap();
    assert!((area_ratio - 4.0).abs() < 0.2, "area ratio {area_ratio}");
    for i in 1..4 {
        let rel = (fb[i].values[0].unwrap() - fs[i].values[0].unwrap()).abs()
            / fs[i].values[0].unwrap();
        assert!(rel < 0.05, "feature {i} drifts {rel}");
    }

    // Translation: shift the decoded contour before rasterizing.
    let contour = crate::efd::efd_decode(&ellipse_frame(10.0, 7.0, 0.3), 256);
    let a = rasterize_contour(&contour.translate(40.0, 40.0), 96, 96).unwrap().frame;
    let b = rasterize_contour(&contour.translate(53.0, 47.0), 96, 96).unwrap().frame;
    let fa = feature_curves(&MaskVideo::new(vec![a]).unwrap());
    let fb = feature_curves(&MaskVideo::new(vec![b]).unwrap());
    for i in 0..4 {
        let (x, y) = (fa[i].values[0].unwrap(), fb[i].values[0].unwrap());
        assert!((x - y).abs() < 1e-9, "feature {i}: {x} vs {y}");
    }
}
