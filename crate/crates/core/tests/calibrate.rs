//! Temporary calibration harness (removed before release).

use std::time::Instant;

use phantomgen::diffusion::{ModelConfig, Tensor, TrainConfig};
use phantomgen::efd::{apply_norm, encode_video, fit_norm, invert_norm, EfdSeries};
use phantomgen::metrics::{evaluate, Feature};
use phantomgen::synthetic::ellipse_video_dataset;

#[test]
#[ignore]
fn calibrate_smoke() {
    let t_len = 40;
    let canvas = (64, 64);
    let start = Instant::now();
    let train_videos = ellipse_video_dataset(500, t_len, canvas, 128, 1000);
    let held_out = ellipse_video_dataset(120, t_len, canvas, 128, 2000);
    println!("fixtures: {:?}", start.elapsed());

    let start = Instant::now();
    let series: Vec<EfdSeries> =
        train_videos.iter().map(|v| encode_video(v, 9, 128).unwrap()).collect();
    println!("encode: {:?}", start.elapsed());

    let stats = fit_norm(&series).unwrap();
    let dataset: Vec<Tensor> = series
        .iter()
        .map(|s| {
            let (n, _) = apply_norm(s, &stats).unwrap();
            Tensor::from_vec(36, t_len, n.to_flat())
        })
        .collect();

    for (steps, batch) in [(2400usize, 16usize), (1200, 32)] {
        let seed = 11u64;
        let cfg = ModelConfig::reference(36, t_len);
        let tc = TrainConfig { steps, batch, lr: 1e-3, seed, k_steps: 200, ..Default::default() };
        let start = Instant::now();
        let out = phantomgen::diffusion::train(&dataset, cfg, &tc).unwrap();
        let train_time = start.elapsed();

        let start = Instant::now();
        let sched = out.schedule.clone();
        let tensors =
            phantomgen::diffusion::sample_many(&out.model, &sched, t_len, 36, 100, seed).unwrap();
        let mut synth = Vec::new();
        let mut out_of_range = 0usize;
        let mut total = 0usize;
        for z in &tensors {
            total += z.data.len();
            out_of_range += z.data.iter().filter(|v| **v < -0.1 || **v > 1.1).count();
            let normed = EfdSeries::from_flat(9, t_len, &z.data).unwrap();
            let series = invert_norm(&normed, &stats).unwrap();
            let (video, _) = phantomgen::cli::series_to_video(&series, canvas, 128).unwrap();
            synth.push(video);
        }
        let gen_time = start.elapsed();

        let mut synth_raw = Vec::new();
        for z in
            phantomgen::diffusion::sample_many(&out.raw, &sched, t_len, 36, 100, seed).unwrap()
        {
            let normed = EfdSeries::from_flat(9, t_len, &z.data).unwrap();
            let series = invert_norm(&normed, &stats).unwrap();
            synth_raw.push(phantomgen::cli::series_to_video(&series, canvas, 128).unwrap().0);
        }
        let report_raw = evaluate(&held_out, |_| synth_raw.clone(), 1).unwrap();
        let report = evaluate(&held_out, |_| synth.clone(), 1).unwrap();
        let mean_area = {
            let c = phantomgen::metrics::mean_curve(&held_out, Feature::Area).unwrap();
            let vals: Vec<f64> = c.into_iter().flatten().collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        println!(
            "steps={steps} batch={batch} train={train_time:?} gen={gen_time:?} out_of_range={:.4}% mean_area={mean_area:.1}",
            100.0 * out_of_range as f64 / total as f64
        );
        for f in Feature::ALL {
            let e = report.stats(f);
            let r = report_raw.stats(f);
            println!("  {}: ema diff={:.4} dtw={:.4} | raw diff={:.4} dtw={:.4}", f.name(), e.diff_mean, e.dtw_mean, r.diff_mean, r.dtw_mean);
        }
    }
}
