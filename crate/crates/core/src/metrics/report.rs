//! Dataset-level comparison: Diff and DTW over population-mean feature
//! curves, replication statistics, curve bands, and report emitters.

use super::dtw::dtw_distance;
use super::{feature_curves, Feature, MetricsError};
use crate::geometry::MaskVideo;

/// Per-feature replication statistics (mean +- std over runs).
#[derive(Debug, Clone)]
pub struct FeatureStats {
    pub feature: Feature,
    pub diff_mean: f64,
    pub diff_std: f64,
    pub dtw_mean: f64,
    pub dtw_std: f64,
}

/// Population mean and interquartile band of one feature in one dataset.
#[derive(Debug, Clone)]
pub struct CurveBand {
    pub feature: Feature,
    pub dataset: String,
    pub mean: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<FeatureStats>,
    pub curves: Vec<CurveBand>,
    pub replications: usize,
}

impl EvalReport {
    pub fn stats(&self, feature: Feature) -> &FeatureStats {
        self.rows.iter().find(|r| r.feature == feature).expect("all four features reported")
    }
}

/// Population-mean curve of one feature over a dataset, with per-frame
/// available-sample means; frames where every video gaps yield None.
pub fn mean_curve(videos: &[MaskVideo], feature: Feature) -> Result<Vec<Option<f64>>, MetricsError> {
    if videos.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let idx = Feature::ALL.iter().position(|f| *f == feature).unwrap();
    let t_max = videos.iter().map(|v| v.len()).max().unwrap();
    let mut sums = vec![0.0; t_max];
    let mut counts = vec![0usize; t_max];
    for video in videos {
        let curves = feature_curves(video);
        for (t, v) in curves[idx].values.iter().enumerate() {
            if let Some(v) = v {
                sums[t] += v;
                counts[t] += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Mean plus interquartile band for every feature of one dataset.
pub fn curve_bands(videos: &[MaskVideo], dataset: &str) -> Result<Vec<CurveBand>, MetricsError> {
    if videos.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let t_max = videos.iter().map(|v| v.len()).max().unwrap();
    let all: Vec<[super::FeatureCurve; 4]> = videos.iter().map(feature_curves).collect();
    let mut bands = Vec::with_capacity(4);
    for (idx, feature) in Feature::ALL.into_iter().enumerate() {
        let mut mean = Vec::with_capacity(t_max);
        let mut q25 = Vec::with_capacity(t_max);
        let mut q75 = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let mut samples: Vec<f64> =
                all.iter().filter_map(|c| c[idx].values.get(t).copied().flatten()).collect();
            if samples.is_empty() {
                continue;
            }
            samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
            mean.push(samples.iter().sum::<f64>() / samples.len() as f64);
            q25.push(quantile(&samples, 0.25));
            q75.push(quantile(&samples, 0.75));
        }
        bands.push(CurveBand { feature, dataset: dataset.to_string(), mean, q25, q75 });
    }
    Ok(bands)
}

/// Diff between two mean curves: mean absolute difference over the common
/// (truncated) frame range, skipping frames where either side has no samples.
pub fn diff_metric(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64, MetricsError> {
    let t = a.len().min(b.len());
    let pairs: Vec<(f64, f64)> = (0..t)
        .filter_map(|i| match (a[i], b[i]) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        })
        .collect();
    if pairs.is_empty() {
        return Err(MetricsError::NoOverlap);
    }
    Ok(pairs.iter().map(|(x, y)| (x - y).abs()).sum::<f64>() / pairs.len() as f64)
}

fn dense(curve: &[Option<f64>]) -> Vec<f64> {
    curve.iter().flatten().copied().collect()
}

/// Compares a real dataset against `replications` regenerated synthetic
/// datasets (the closure receives the replication index and must fold any
/// seeding into it). Diff and DTW run on population-mean curves; the report
/// aggregates mean +- std and carries curve bands of the real set and the
/// last synthetic set.
pub fn evaluate<F>(
    real: &[MaskVideo],
    mut generate: F,
    replications: usize,
) -> Result<EvalReport, MetricsError>
where
    F: FnMut(usize) -> Vec<MaskVideo>,
{
    if real.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    assert!(replications >= 1, "need at least one replication");

    let real_means: Vec<Vec<Option<f64>>> = Feature::ALL
        .iter()
        .map(|&f| mean_curve(real, f))
        .collect::<Result<_, _>>()?;

    let mut diffs = vec![Vec::with_capacity(replications); 4];
    let mut dtws = vec![Vec::with_capacity(replications); 4];
    let mut last_synth: Option<Vec<MaskVideo>> = None;
    for rep in 0..replications {
        let synth = generate(rep);
        if synth.is_empty() {
            return Err(MetricsError::EmptyDataset);
        }
        for (i, &feature) in Feature::ALL.iter().enumerate() {
            let synth_mean = mean_curve(&synth, feature)?;
            diffs[i].push(diff_metric(&real_means[i], &synth_mean)?);
            let t = real_means[i].len().min(synth_mean.len());
            let x = dense(&real_means[i][..t]);
            let y = dense(&synth_mean[..t]);
            dtws[i].push(dtw_distance(&x, &y).map_err(|_| MetricsError::NoOverlap)?);
        }
        last_synth = Some(synth);
    }

    let stat = |xs: &[f64]| -> (f64, f64) {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        (mean, var.sqrt())
    };
    let rows = Feature::ALL
        .iter()
        .enumerate()
        .map(|(i, &feature)| {
            let (diff_mean, diff_std) = stat(&diffs[i]);
            let (dtw_mean, dtw_std) = stat(&dtws[i]);
            FeatureStats { feature, diff_mean, diff_std, dtw_mean, dtw_std }
        })
        .collect();

    let mut curves = curve_bands(real, "real")?;
    curves.extend(curve_bands(&last_synth.expect("replications >= 1"), "synthetic")?);
    Ok(EvalReport { rows, curves, replications })
}

/// One ablation measurement row.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub d: usize,
    pub feature: Feature,
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
}

/// Re-encode / retrain / regenerate for every harmonic order in `d_values`
/// (the runner closure hides the pipeline) and evaluate each against the
/// real dataset.
pub fn ablation_sweep<F>(
    real: &[MaskVideo],
    d_values: &[usize],
    replications: usize,
    mut runner: F,
) -> Result<Vec<(usize, EvalReport)>, MetricsError>
where
    F: FnMut(usize, usize) -> Vec<MaskVideo>,
{
    d_values
        .iter()
        .map(|&d| Ok((d, evaluate(real, |rep| runner(d, rep), replications)?)))
        .collect()
}

pub fn ablation_rows(sweep: &[(usize, EvalReport)]) -> Vec<AblationRow> {
    let mut rows = Vec::new();
    for (d, report) in sweep {
        for stats in &report.rows {
            rows.push(AblationRow {
                d: *d,
                feature: stats.feature,
                metric: "diff",
                mean: stats.diff_mean,
                std: stats.diff_std,
            });
            rows.push(AblationRow {
                d: *d,
                feature: stats.feature,
                metric: "dtw",
                mean: stats.dtw_mean,
                std: stats.dtw_std,
            });
        }
    }
    rows
}

/// `d,feature,metric,mean,std` CSV.
pub fn ablation_csv(sweep: &[(usize, EvalReport)]) -> String {
    let mut out = String::from("d,feature,metric,mean,std\n");
    for row in ablation_rows(sweep) {
        out.push_str(&format!(
            "{},{},{},{:.12e},{:.12e}\n",
            row.d,
            row.feature.name(),
            row.metric,
            row.mean,
            row.std
        ));
    }
    out
}

/// Table mirroring the feature x {Diff, DTW} layout.
pub fn report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<8} {:>14} {:>14}\n",
        "Feature", "Metric", "Mean", "Std"
    ));
    out.push_str(&format!("{}\n", "-".repeat(52)));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<12} {:<8} {:>14.4} {:>14.4}\n",
            row.feature.name(),
            "Diff",
            row.diff_mean,
            row.diff_std
        ));
        out.push_str(&format!(
            "{:<12} {:<8} {:>14.4} {:>14.4}\n",
            "",
            "DTW",
            row.dtw_mean,
            row.dtw_std
        ));
    }
    out.push_str(&format!("replications: {}\n", report.replications));
    out
}

/// `feature,metric,mean,std` CSV.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("feature,metric,mean,std\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},diff,{:.12e},{:.12e}\n",
            row.feature.name(),
            row.diff_mean,
            row.diff_std
        ));
        out.push_str(&format!(
            "{},dtw,{:.12e},{:.12e}\n",
            row.feature.name(),
            row.dtw_mean,
            row.dtw_std
        ));
    }
    out
}

/// `t,feature,mean,q25,q75,dataset` CSV of the curve bands.
pub fn curves_csv(bands: &[CurveBand]) -> String {
    let mut out = String::from("t,feature,mean,q25,q75,dataset\n");
    for band in bands {
        for t in 0..band.mean.len() {
            out.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{}\n",
                t,
                band.feature.name(),
                band.mean[t],
                band.q25[t],
                band.q75[t],
                band.dataset
            ));
        }
    }
    out
}

/// Minimal SVG line plot: one panel per feature, mean lines plus translucent
/// interquartile bands, one color per dataset.
pub fn curves_svg(bands: &[CurveBand]) -> String {
    const PANEL_W: f64 = 360.0;
    const PANEL_H: f64 = 240.0;
    const MARGIN: f64 = 40.0;
    let colors = ["#2a7fff", "#ff7f2a", "#2aa05a", "#a02a86"];

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"12\">\n",
        2.0 * PANEL_W + 3.0 * MARGIN,
        2.0 * PANEL_H + 3.0 * MARGIN
    );
    for (fi, feature) in Feature::ALL.into_iter().enumerate() {
        let x0 = MARGIN + (fi % 2) as f64 * (PANEL_W + MARGIN);
        let y0 = MARGIN + (fi / 2) as f64 * (PANEL_H + MARGIN);
        let panel: Vec<&CurveBand> = bands.iter().filter(|b| b.feature == feature).collect();
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        let mut t_max = 1usize;
        for b in &panel {
            t_max = t_max.max(b.mean.len());
            for v in b.q25.iter().chain(&b.q75).chain(&b.mean) {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            continue;
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        let sx = |t: usize| x0 + PANEL_W * t as f64 / (t_max.max(2) - 1) as f64;
        let sy = |v: f64| y0 + PANEL_H * (1.0 - (v - lo) / (hi - lo));
        svg.push_str(&format!(
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" fill=\"none\" stroke=\"#999\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            x0,
            y0 - 8.0,
            feature.name()
        ));
        for (di, band) in panel.iter().enumerate() {
            let color = colors[di % colors.len()];
            let mut area = String::new();
            for (t, v) in band.q75.iter().enumerate() {
                area.push_str(&format!("{:.1},{:.1} ", sx(t), sy(*v)));
            }
            for (t, v) in band.q25.iter().enumerate().rev() {
                area.push_str(&format!("{:.1},{:.1} ", sx(t), sy(*v)));
            }
            svg.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{}\" opacity=\"0.2\" stroke=\"none\"/>\n",
                area.trim_end(),
                color
            ));
            let line: Vec<String> =
                band.mean.iter().enumerate().map(|(t, v)| format!("{:.1},{:.1}", sx(t), sy(*v))).collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                line.join(" "),
                color
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n",
                x0 + 6.0,
                y0 + 16.0 + 14.0 * di as f64,
                color,
                band.dataset
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
