//! Command implementations behind the `phantomgen` binary: prep, encode,
//! select-d, train, generate, decode, evaluate, ablate, fixture. Every
//! command writes a run manifest (config hash, seed, timings, artifact
//! checksums), succeeding or not.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use crate::dataset::{ingest_ctc, ingest_mvb, prep_dataset, PrepConfig};
use crate::diffusion::{
    cosine_schedule, load_checkpoint, sample_many, save_checkpoint, train, write_training_log,
    DenoiserModel, ModelConfig, Tensor, TrainConfig,
};
use crate::efd::{
    apply_norm, efd_decode, encode_video, fit_norm, invert_norm, read_series_csv, read_series_meta,
    select_harmonics, write_series_csv, write_series_meta, EfdSeries, NormStats, SeriesMeta,
};
use crate::geometry::{rasterize_contour, sanitize_phantom, save_mvb1, save_pgm_dir, MaskVideo};
use crate::metrics::{ablation_csv, ablation_sweep, curves_csv, curves_svg, evaluate, report_csv, report_table};
use crate::pipeline::{validation, ConfigFile, PipelineError, RunManifest};
use crate::synthetic;

pub const DEFAULT_N_POINTS: usize = 128;
pub const DEFAULT_D: usize = 9;
pub const DEFAULT_K_STEPS: usize = 200;
pub const DEFAULT_FRACTION: f64 = 0.9999;
pub const DEFAULT_D_MAX: usize = 60;

fn runtime<E: std::error::Error + Send + Sync + 'static>(e: E) -> PipelineError {
    PipelineError::Runtime(anyhow::Error::new(e))
}

/// Wraps a command body so the run manifest lands on disk even on failure.
fn with_manifest(
    name: &str,
    out_dir: &Path,
    body: impl FnOnce(&mut RunManifest) -> Result<(), PipelineError>,
) -> Result<(), PipelineError> {
    fs::create_dir_all(out_dir).map_err(|e| validation(format!("out dir {}: {e}", out_dir.display())))?;
    let mut manifest = RunManifest::new(name, out_dir);
    let result = body(&mut manifest);
    manifest
        .finish(result.as_ref().map_err(|e| e).map(|_| ()))
        .map_err(|e| PipelineError::Runtime(anyhow!("writing manifest: {e}")))?;
    result
}

fn parse_canvas(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH, e.g. 96x96")?;
    let w = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    if w < 8 || h < 8 {
        return Err("canvas must be at least 8x8".into());
    }
    Ok((w, h))
}

pub fn canvas_from(flag: Option<String>, cfg: &ConfigFile, default: (u32, u32)) -> Result<(u32, u32), PipelineError> {
    let raw = match flag.or(cfg.get::<String>("canvas")?) {
        Some(raw) => raw,
        None => return Ok(default),
    };
    parse_canvas(&raw).map_err(validation)
}

fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, PipelineError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| validation(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(validation(format!("{}: no .{ext} files", dir.display())));
    }
    Ok(paths)
}

/// Decode + placement + rasterization of one series. Decoded contours are
/// centered at (W/2, H/2); the cleanup policy keeps the largest component
/// and fills holes, counting how often it fired.
#[derive(Debug, Default, Clone, Copy)]
pub struct RasterStats {
    pub frames: usize,
    pub degenerate: usize,
    pub cleaned: usize,
    pub clipped: usize,
}

pub fn series_to_video(
    series: &EfdSeries,
    canvas: (u32, u32),
    n_points: usize,
) -> anyhow::Result<(MaskVideo, RasterStats)> {
    let (w, h) = canvas;
    let mut stats = RasterStats::default();
    let mut frames = Vec::with_capacity(series.len());
    for frame in series.frames() {
        let contour = efd_decode(frame, n_points).translate(
            f64::from(w) / 2.0 - frame.centroid[0],
            f64::from(h) / 2.0 - frame.centroid[1],
        );
        // Clamp stray vertices onto the canvas rather than abort a whole
        // generated video; the clip count is reported.
        let mut clipped = false;
        let pts: Vec<[f64; 2]> = contour
            .points()
            .iter()
            .map(|&[x, y]| {
                let cx = x.clamp(0.0, f64::from(w) - 1e-6);
                let cy = y.clamp(0.0, f64::from(h) - 1e-6);
                if cx != x || cy != y {
                    clipped = true;
                }
                [cx, cy]
            })
            .collect();
        if clipped {
            stats.clipped += 1;
        }
        let out = rasterize_contour(&crate::geometry::Contour::new(pts), h, w)?;
        if out.degenerate {
            stats.degenerate += 1;
        }
        let (clean, changed) = sanitize_phantom(&out.frame);
        if changed {
            stats.cleaned += 1;
        }
        stats.frames += 1;
        frames.push(clean);
    }
    Ok((MaskVideo::new(frames)?, stats))
}

// ---- fixture ----

pub struct FixtureArgs {
    pub kind: String,
    pub count: usize,
    pub test_count: usize,
    pub t_len: usize,
    pub canvas: (u32, u32),
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_fixture(args: &FixtureArgs) -> Result<(), PipelineError> {
    with_manifest("fixture", &args.out, |manifest| {
        manifest.config("kind", &args.kind);
        manifest.config("count", args.count);
        manifest.config("test_count", args.test_count);
        manifest.config("t_len", args.t_len);
        manifest.config("canvas", format!("{}x{}", args.canvas.0, args.canvas.1));
        manifest.config("seed", args.seed);
        if args.count == 0 || args.t_len < 2 {
            return Err(validation("fixture needs count >= 1 and t-len >= 2"));
        }
        let total = args.count + args.test_count;
        match args.kind.as_str() {
            "ellipse-videos" | "square-videos" => {
                let videos = if args.kind == "ellipse-videos" {
                    synthetic::ellipse_video_dataset(total, args.t_len, args.canvas, DEFAULT_N_POINTS, args.seed)
                } else {
                    synthetic::square_video_dataset(total, args.t_len, args.canvas, args.seed)
                };
                for (split, range) in
                    [("train", 0..args.count), ("test", args.count..total)]
                {
                    let dir = args.out.join(split);
                    fs::create_dir_all(&dir).map_err(|e| PipelineError::Runtime(e.into()))?;
                    for i in range.clone() {
                        let path = dir.join(format!("{:04}.mvb", i - range.start));
                        save_mvb1(&videos[i], &path).map_err(runtime)?;
                        manifest.artifact(&path);
                    }
                }
            }
            "ellipse-series" => {
                let series = synthetic::ellipse_series_dataset(total, args.t_len, 1, args.seed);
                let dir = args.out.join("series");
                fs::create_dir_all(&dir).map_err(|e| PipelineError::Runtime(e.into()))?;
                for (i, s) in series.iter().enumerate() {
                    let path = dir.join(format!("{i:04}.csv"));
                    write_series_csv(s, &path).map_err(runtime)?;
                    let meta = SeriesMeta {
                        d: 1,
                        t_len: args.t_len,
                        n_points: DEFAULT_N_POINTS,
                        phase_anchored: false,
                        stats: None,
                    };
                    let meta_path = dir.join(format!("{i:04}.meta.txt"));
                    write_series_meta(&meta, &meta_path).map_err(runtime)?;
                    manifest.artifact(&path);
                }
            }
            other => return Err(validation(format!("unknown fixture kind `{other}`"))),
        }
        Ok(())
    })
}

// ---- prep ----

pub struct PrepArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub cfg: PrepConfig,
}

pub fn cmd_prep(args: &PrepArgs) -> Result<(), PipelineError> {
    with_manifest("prep", &args.out, |manifest| {
        let c = &args.cfg;
        manifest.config("input", args.input.display());
        manifest.config("s_min", c.s_min);
        manifest.config("o_max", c.o_max);
        manifest.config("border_px", c.border_px);
        manifest.config("t_win", c.t_win);
        manifest.config("stride", c.stride);
        manifest.config("test_fraction", c.test_fraction);
        manifest.config("seed", c.seed);
        manifest.config("canvas", format!("{}x{}", c.canvas.0, c.canvas.1));
        if !args.input.is_dir() {
            return Err(validation(format!("input {} is not a directory", args.input.display())));
        }
        if c.t_win < 2 || c.stride < 1 || !(0.0..1.0).contains(&c.test_fraction) || c.test_fraction <= 0.0 {
            return Err(validation("need t-win >= 2, stride >= 1, test-fraction in (0,1)"));
        }
        let video = ingest_ctc(&args.input).map_err(runtime)?;
        let out = prep_dataset(&video, c).map_err(runtime)?;

        let mut lines = String::new();
        for (split, windows) in [("train", &out.train), ("test", &out.test)] {
            let dir = args.out.join("windows").join(split);
            fs::create_dir_all(&dir).map_err(|e| PipelineError::Runtime(e.into()))?;
            for w in windows.iter() {
                let name = format!("t{:04}_f{:04}.mvb", w.track_id, w.start_frame);
                let path = dir.join(&name);
                save_mvb1(&w.video, &path).map_err(runtime)?;
                manifest.artifact(&path);
                lines.push_str(&format!("{split}/{name} root={} track={}\n", w.root_id, w.track_id));
            }
        }
        let split_path = args.out.join("split_manifest.txt");
        fs::write(&split_path, lines).map_err(|e| PipelineError::Runtime(e.into()))?;
        manifest.artifact(&split_path);
        manifest.note("train_windows", out.train.len());
        manifest.note("test_windows", out.test.len());
        println!(
            "prep: {} train windows, {} test windows, {} lineages in test",
            out.train.len(),
            out.test.len(),
            out.manifest.test.len()
        );
        Ok(())
    })
}

// ---- encode ----

pub struct EncodeArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub d: usize,
    pub n_points: usize,
}

pub fn cmd_encode(args: &EncodeArgs) -> Result<(), PipelineError> {
    with_manifest("encode", &args.out, |manifest| {
        manifest.config("input", args.input.display());
        manifest.config("d", args.d);
        manifest.config("n_points", args.n_points);
        if args.d < 1 || args.n_points < 2 * args.d + 2 {
            return Err(validation("need d >= 1 and n-points >= 2d + 2"));
        }
        let files = list_files(&args.input, "mvb")?;
        fs::create_dir_all(&args.out).map_err(|e| PipelineError::Runtime(e.into()))?;
        for path in files {
            let video = crate::geometry::load_mvb1(&path).map_err(runtime)?;
            let series = encode_video(&video, args.d, args.n_points)
                .with_context(|| format!("encoding {}", path.display()))
                .map_err(PipelineError::Runtime)?;
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            let csv = args.out.join(format!("{stem}.csv"));
            write_series_csv(&series, &csv).map_err(runtime)?;
            let meta = SeriesMeta {
                d: args.d,
                t_len: series.len(),
                n_points: args.n_points,
                phase_anchored: true,
                stats: None,
            };
            let meta_path = args.out.join(format!("{stem}.meta.txt"));
            write_series_meta(&meta, &meta_path).map_err(runtime)?;
            manifest.artifact(&csv);
            manifest.artifact(&meta_path);
        }
        Ok(())
    })
}

// ---- select-d ----

pub struct SelectDArgs {
    pub input: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub out: PathBuf,
    pub fraction: f64,
    pub d_max: usize,
    pub n_points: usize,
}

pub fn cmd_select_d(args: &SelectDArgs) -> Result<(), PipelineError> {
    with_manifest("select-d", &args.out, |manifest| {
        manifest.config("fraction", args.fraction);
        manifest.config("d_max", args.d_max);
        manifest.config("n_points", args.n_points);
        if !(args.fraction > 0.0 && args.fraction <= 1.0) {
            return Err(validation("fraction must be in (0, 1]"));
        }
        let series: Vec<EfdSeries> = match (&args.input, &args.series) {
            (Some(dir), None) => {
                manifest.config("input", dir.display());
                let videos = ingest_mvb(dir).map_err(runtime)?;
                videos
                    .iter()
                    .map(|v| encode_video(v, args.d_max, args.n_points))
                    .collect::<Result<_, _>>()
                    .map_err(runtime)?
            }
            (None, Some(dir)) => {
                manifest.config("series", dir.display());
                list_files(dir, "csv")?
                    .iter()
                    .map(|p| read_series_csv(p))
                    .collect::<Result<_, _>>()
                    .map_err(runtime)?
            }
            _ => return Err(validation("pass exactly one of --input (mvb dir) or --series (csv dir)")),
        };
        let d = select_harmonics(&series, args.fraction).map_err(runtime)?;
        println!("d = {d}");
        let path = args.out.join("select_d.txt");
        fs::write(&path, format!("d={d}\nfraction={}\nd_max={}\n", args.fraction, args.d_max))
            .map_err(|e| PipelineError::Runtime(e.into()))?;
        manifest.artifact(&path);
        Ok(())
    })
}

// ---- train ----

pub struct TrainArgs {
    pub series: PathBuf,
    pub out: PathBuf,
    pub train_cfg: TrainConfig,
    pub width: usize,
    pub blocks: usize,
    pub heads: usize,
    pub canvas: (u32, u32),
}

/// Loads a series directory (common d and T enforced) plus the first
/// sidecar's sample count.
fn load_series_dir(dir: &Path) -> Result<(Vec<EfdSeries>, usize), PipelineError> {
    let files = list_files(dir, "csv")?;
    let mut out = Vec::with_capacity(files.len());
    for path in &files {
        out.push(read_series_csv(path).map_err(runtime)?);
    }
    let meta_path = files[0].with_extension("meta.txt");
    let n_points = read_series_meta(&meta_path).map(|m| m.n_points).unwrap_or(DEFAULT_N_POINTS);
    let (d, t) = (out[0].order(), out[0].len());
    for (s, path) in out.iter().zip(&files) {
        if s.order() != d || s.len() != t {
            return Err(validation(format!(
                "{}: series is {}x{} but the directory starts with {}x{}",
                path.display(),
                4 * s.order(),
                s.len(),
                4 * d,
                t
            )));
        }
    }
    Ok((out, n_points))
}

fn norm_extras(stats: &NormStats) -> BTreeMap<String, String> {
    let mut extras = BTreeMap::new();
    for (i, (lo, hi)) in stats.mins().iter().zip(stats.maxs()).enumerate() {
        extras.insert(format!("norm.min.{i}"), format!("{lo:.17e}"));
        extras.insert(format!("norm.max.{i}"), format!("{hi:.17e}"));
    }
    extras
}

fn norm_from_extras(extras: &BTreeMap<String, String>, channels: usize) -> anyhow::Result<NormStats> {
    let mut mins = Vec::with_capacity(channels);
    let mut maxs = Vec::with_capacity(channels);
    for i in 0..channels {
        mins.push(
            extras
                .get(&format!("norm.min.{i}"))
                .ok_or_else(|| anyhow!("checkpoint missing norm.min.{i}"))?
                .parse::<f64>()?,
        );
        maxs.push(
            extras
                .get(&format!("norm.max.{i}"))
                .ok_or_else(|| anyhow!("checkpoint missing norm.max.{i}"))?
                .parse::<f64>()?,
        );
    }
    Ok(NormStats::new(mins, maxs)?)
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), PipelineError> {
    with_manifest("train", &args.out, |manifest| {
        let tc = &args.train_cfg;
        manifest.config("series", args.series.display());
        manifest.config("steps", tc.steps);
        manifest.config("batch", tc.batch);
        manifest.config("lr", tc.lr);
        manifest.config("lambda1", tc.lambda1);
        manifest.config("lambda2", tc.lambda2);
        manifest.config("k_steps", tc.k_steps);
        manifest.config("seed", tc.seed);
        manifest.config("ema_decay", tc.ema_decay);
        manifest.config("width", args.width);
        manifest.config("blocks", args.blocks);
        manifest.config("canvas", format!("{}x{}", args.canvas.0, args.canvas.1));
        tc.validate().map_err(|e| validation(e.to_string()))?;

        let (series, n_points) = load_series_dir(&args.series)?;
        let d = series[0].order();
        let t_len = series[0].len();
        let stats = fit_norm(&series).map_err(runtime)?;
        let dataset: Vec<Tensor> = series
            .iter()
            .map(|s| {
                let (normed, _) = apply_norm(s, &stats)?;
                Ok(Tensor::from_vec(4 * d, t_len, normed.to_flat()))
            })
            .collect::<Result<_, crate::efd::EfdError>>()
            .map_err(runtime)?;

        let model_cfg = ModelConfig {
            width: args.width,
            blocks: args.blocks,
            heads: args.heads,
            ..ModelConfig::reference(4 * d, t_len)
        };
        let out = train(&dataset, model_cfg, tc).map_err(runtime)?;

        let mut extras = norm_extras(&stats);
        extras.insert("d".into(), d.to_string());
        extras.insert("n_points".into(), n_points.to_string());
        extras.insert("k_steps".into(), tc.k_steps.to_string());
        extras.insert("canvas_w".into(), args.canvas.0.to_string());
        extras.insert("canvas_h".into(), args.canvas.1.to_string());
        extras.insert("seed".into(), tc.seed.to_string());
        extras.insert("phase_anchored".into(), "true".into());

        fs::create_dir_all(&args.out).map_err(|e| PipelineError::Runtime(e.into()))?;
        let ckpt = args.out.join("model.efdm");
        save_checkpoint(&ckpt, &out.model, &extras).map_err(runtime)?;
        let log_path = args.out.join("training_log.csv");
        write_training_log(&out.log, &log_path).map_err(|e| PipelineError::Runtime(e.into()))?;
        manifest.artifact(&ckpt);
        manifest.artifact(&log_path);
        manifest.note("series_count", series.len());
        manifest.note("params", out.model.param_count());
        let last = out.log.last().expect("training logged at least one row");
        manifest.note("final_loss", format!("{:.6e}", last.loss));
        println!(
            "train: {} series of {}x{}, {} params, final loss {:.4e}",
            series.len(),
            4 * d,
            t_len,
            out.model.param_count(),
            last.loss
        );
        Ok(())
    })
}

// ---- generate ----

pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub count: usize,
    pub seed: u64,
    pub t_len: Option<usize>,
    pub pgm: bool,
}

struct LoadedModel {
    model: DenoiserModel,
    stats: NormStats,
    d: usize,
    n_points: usize,
    k_steps: usize,
    canvas: (u32, u32),
}

fn load_model(path: &Path) -> Result<LoadedModel, PipelineError> {
    let (model, extras) = load_checkpoint(path).map_err(runtime)?;
    let channels = model.cfg.channels;
    let stats = norm_from_extras(&extras, channels).map_err(PipelineError::Runtime)?;
    let parse = |key: &str, default: usize| -> usize {
        extras.get(key).and_then(|v| v.parse().ok()).unwrap_or(default)
    };
    Ok(LoadedModel {
        stats,
        d: parse("d", channels / 4),
        n_points: parse("n_points", DEFAULT_N_POINTS),
        k_steps: parse("k_steps", DEFAULT_K_STEPS),
        canvas: (parse("canvas_w", 96) as u32, parse("canvas_h", 96) as u32),
        model,
    })
}

/// Samples `count` videos from a loaded checkpoint: sample, invert the
/// normalization, decode, center on the canvas, rasterize, clean up.
fn generate_videos(
    lm: &LoadedModel,
    count: usize,
    t_len: usize,
    seed: u64,
) -> Result<(Vec<MaskVideo>, RasterStats), PipelineError> {
    let sched = cosine_schedule(lm.k_steps);
    let tensors =
        sample_many(&lm.model, &sched, t_len, lm.model.cfg.channels, count, seed).map_err(runtime)?;
    let mut videos = Vec::with_capacity(count);
    let mut stats = RasterStats::default();
    for z in tensors {
        let normed = EfdSeries::from_flat(lm.d, t_len, &z.data).map_err(runtime)?;
        let series = invert_norm(&normed, &lm.stats).map_err(runtime)?;
        let (video, s) = series_to_video(&series, lm.canvas, lm.n_points).map_err(PipelineError::Runtime)?;
        stats.frames += s.frames;
        stats.degenerate += s.degenerate;
        stats.cleaned += s.cleaned;
        stats.clipped += s.clipped;
        videos.push(video);
    }
    Ok((videos, stats))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), PipelineError> {
    with_manifest("generate", &args.out, |manifest| {
        manifest.config("checkpoint", args.checkpoint.display());
        manifest.config("count", args.count);
        manifest.config("seed", args.seed);
        if args.count == 0 {
            return Err(validation("count must be >= 1"));
        }
        let lm = load_model(&args.checkpoint)?;
        let t_len = args.t_len.unwrap_or(lm.model.cfg.seq_len);
        manifest.config("t_len", t_len);
        let (videos, stats) = generate_videos(&lm, args.count, t_len, args.seed)?;
        fs::create_dir_all(&args.out).map_err(|e| PipelineError::Runtime(e.into()))?;
        for (i, video) in videos.iter().enumerate() {
            let path = args.out.join(format!("gen_{i:04}.mvb"));
            save_mvb1(video, &path).map_err(runtime)?;
            manifest.artifact(&path);
            if args.pgm {
                save_pgm_dir(video, &args.out.join(format!("gen_{i:04}"))).map_err(runtime)?;
            }
        }
        manifest.note("frames", stats.frames);
        manifest.note("cleaned_frames", stats.cleaned);
        manifest.note("degenerate_frames", stats.degenerate);
        manifest.note("clipped_frames", stats.clipped);
        println!(
            "generate: {} videos of {} frames ({} cleaned, {} degenerate, {} clipped)",
            videos.len(),
            t_len,
            stats.cleaned,
            stats.degenerate,
            stats.clipped
        );
        Ok(())
    })
}

// ---- decode ----

pub struct DecodeArgs {
    pub series: PathBuf,
    pub out: PathBuf,
    pub canvas: (u32, u32),
    pub n_points: Option<usize>,
    pub pgm: bool,
}

pub fn cmd_decode(args: &DecodeArgs) -> Result<(), PipelineError> {
    let out_dir = args.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    with_manifest("decode", &out_dir, |manifest| {
        manifest.config("series", args.series.display());
        manifest.config("canvas", format!("{}x{}", args.canvas.0, args.canvas.1));
        let series = read_series_csv(&args.series).map_err(runtime)?;
        let meta = read_series_meta(&args.series.with_extension("meta.txt")).ok();
        let n_points = args
            .n_points
            .or(meta.map(|m| m.n_points))
            .unwrap_or(DEFAULT_N_POINTS);
        manifest.config("n_points", n_points);
        let (video, stats) = series_to_video(&series, args.canvas, n_points).map_err(PipelineError::Runtime)?;
        save_mvb1(&video, &args.out).map_err(runtime)?;
        manifest.artifact(&args.out);
        if args.pgm {
            let dir = args.out.with_extension("");
            save_pgm_dir(&video, &dir).map_err(runtime)?;
        }
        manifest.note("cleaned_frames", stats.cleaned);
        Ok(())
    })
}

// ---- evaluate ----

pub struct EvaluateArgs {
    pub real: PathBuf,
    pub synth: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub count: usize,
    pub replications: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), PipelineError> {
    with_manifest("evaluate", &args.out, |manifest| {
        manifest.config("real", args.real.display());
        manifest.config("replications", args.replications);
        manifest.config("seed", args.seed);
        if args.replications == 0 {
            return Err(validation("replications must be >= 1"));
        }
        let real = ingest_mvb(&args.real).map_err(runtime)?;

        let report = match (&args.synth, &args.checkpoint) {
            (Some(dir), None) => {
                manifest.config("synth", dir.display());
                let synth = ingest_mvb(dir).map_err(runtime)?;
                evaluate(&real, |_| synth.clone(), args.replications).map_err(runtime)?
            }
            (None, Some(ckpt)) => {
                manifest.config("checkpoint", ckpt.display());
                manifest.config("count", args.count);
                let lm = load_model(ckpt)?;
                let t_len = lm.model.cfg.seq_len;
                let mut failure: Option<PipelineError> = None;
                let report = evaluate(
                    &real,
                    |rep| match generate_videos(&lm, args.count, t_len, splitmix64(args.seed ^ rep as u64)) {
                        Ok((videos, _)) => videos,
                        Err(e) => {
                            failure.get_or_insert(e);
                            Vec::new()
                        }
                    },
                    args.replications,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                report.map_err(runtime)?
            }
            _ => return Err(validation("pass exactly one of --synth (mvb dir) or --checkpoint")),
        };

        fs::create_dir_all(&args.out).map_err(|e| PipelineError::Runtime(e.into()))?;
        let table = report_table(&report);
        print!("{table}");
        let writes = [
            ("report.txt", table),
            ("report.csv", report_csv(&report)),
            ("curves.csv", curves_csv(&report.curves)),
            ("curves.svg", curves_svg(&report.curves)),
        ];
        for (name, text) in writes {
            let path = args.out.join(name);
            fs::write(&path, text).map_err(|e| PipelineError::Runtime(e.into()))?;
            manifest.artifact(&path);
        }
        Ok(())
    })
}

// ---- ablate ----

pub struct AblateArgs {
    pub input: PathBuf,
    pub real: PathBuf,
    pub d_values: Vec<usize>,
    pub replications: usize,
    pub count: usize,
    pub n_points: usize,
    pub canvas: (u32, u32),
    pub train_cfg: TrainConfig,
    pub width: usize,
    pub blocks: usize,
    pub heads: usize,
    pub out: PathBuf,
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<(), PipelineError> {
    with_manifest("ablate", &args.out, |manifest| {
        manifest.config("input", args.input.display());
        manifest.config("real", args.real.display());
        manifest.config(
            "d_values",
            args.d_values.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
        );
        manifest.config("replications", args.replications);
        manifest.config("count", args.count);
        manifest.config("steps", args.train_cfg.steps);
        manifest.config("seed", args.train_cfg.seed);
        if args.d_values.is_empty() {
            return Err(validation("pass at least one d value"));
        }
        args.train_cfg.validate().map_err(|e| validation(e.to_string()))?;
        let train_videos = ingest_mvb(&args.input).map_err(runtime)?;
        let real = ingest_mvb(&args.real).map_err(runtime)?;
        manifest.note("reduced_step_budget", args.train_cfg.steps);

        let mut failure: Option<PipelineError> = None;
        let sweep = ablation_sweep(&real, &args.d_values, args.replications, |d, rep| {
            let run = || -> Result<Vec<MaskVideo>, PipelineError> {
                let series: Vec<EfdSeries> = train_videos
                    .iter()
                    .map(|v| encode_video(v, d, args.n_points))
                    .collect::<Result<_, _>>()
                    .map_err(runtime)?;
                let stats = fit_norm(&series).map_err(runtime)?;
                let t_len = series[0].len();
                let dataset: Vec<Tensor> = series
                    .iter()
                    .map(|s| {
                        let (normed, _) = apply_norm(s, &stats)?;
                        Ok(Tensor::from_vec(4 * d, t_len, normed.to_flat()))
                    })
                    .collect::<Result<_, crate::efd::EfdError>>()
                    .map_err(runtime)?;
                let model_cfg = ModelConfig {
                    width: args.width,
                    blocks: args.blocks,
                    heads: args.heads,
                    ..ModelConfig::reference(4 * d, t_len)
                };
                let tc = TrainConfig {
                    seed: splitmix64(args.train_cfg.seed ^ (d as u64) << 16 ^ rep as u64),
                    ..args.train_cfg.clone()
                };
                let trained = train(&dataset, model_cfg, &tc).map_err(runtime)?;
                let lm = LoadedModel {
                    model: trained.model,
                    stats,
                    d,
                    n_points: args.n_points,
                    k_steps: tc.k_steps,
                    canvas: args.canvas,
                };
                Ok(generate_videos(&lm, args.count, t_len, tc.seed)?.0)
            };
            match run() {
                Ok(videos) => videos,
                Err(e) => {
                    failure.get_or_insert(e);
                    Vec::new()
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let sweep = sweep.map_err(runtime)?;

        fs::create_dir_all(&args.out).map_err(|e| PipelineError::Runtime(e.into()))?;
        let csv_path = args.out.join("ablation.csv");
        fs::write(&csv_path, ablation_csv(&sweep)).map_err(|e| PipelineError::Runtime(e.into()))?;
        manifest.artifact(&csv_path);
        for (d, report) in &sweep {
            let path = args.out.join(format!("report_d{d}.txt"));
            fs::write(&path, report_table(report)).map_err(|e| PipelineError::Runtime(e.into()))?;
            manifest.artifact(&path);
        }
        Ok(())
    })
}
