use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phantomgen::cli::{self, canvas_from};
use phantomgen::dataset::{PrepConfig, DEFAULT_BORDER_PX, DEFAULT_O_MAX, DEFAULT_S_MIN};
use phantomgen::diffusion::TrainConfig;
use phantomgen::pipeline::{resolve, ConfigFile, PipelineError};

#[derive(Parser)]
#[command(
    name = "phantomgen",
    version,
    about = "Cell phantom video generation: EFD encoding, time-series diffusion, morphological evaluation"
)]
struct Cli {
    /// key=value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate bundled synthetic fixture datasets (offline toy data).
    Fixture {
        /// ellipse-videos | square-videos | ellipse-series
        #[arg(long, default_value = "ellipse-videos")]
        kind: String,
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Extra held-out videos written to <out>/test.
        #[arg(long, default_value_t = 10)]
        test_count: usize,
        #[arg(long, default_value_t = 40)]
        t_len: usize,
        /// Canvas as WxH.
        #[arg(long)]
        canvas: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a labeled cell-tracking directory, filter, window, and split.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        s_min: Option<f64>,
        #[arg(long)]
        o_max: Option<f64>,
        #[arg(long)]
        border_px: Option<usize>,
        #[arg(long)]
        t_win: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        canvas: Option<String>,
    },
    /// Encode mask videos into EFD series CSVs.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Pick the harmonic order keeping a fraction of the cumulative power.
    SelectD {
        /// Directory of .mvb videos (encoded at --d-max first).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Directory of already-encoded series CSVs.
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        d_max: Option<usize>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Train the diffusion model on a directory of series CSVs.
    Train {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        lambda1: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        k_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ema_decay: Option<f64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        heads: Option<usize>,
        /// Canvas recorded in the checkpoint for generation, as WxH.
        #[arg(long)]
        canvas: Option<String>,
    },
    /// Sample new phantom videos from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        t_len: Option<usize>,
        /// Also write PGM frame directories.
        #[arg(long, default_value_t = false)]
        pgm: bool,
    },
    /// Decode one EFD series CSV back into a mask video.
    Decode {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        canvas: Option<String>,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long, default_value_t = false)]
        pgm: bool,
    },
    /// Compare two datasets with Diff and DTW over feature curves.
    Evaluate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-encode, retrain, and evaluate over a list of harmonic orders.
    Ablate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        real: PathBuf,
        /// Comma-separated harmonic orders, e.g. 1,3,9.
        #[arg(long, value_delimiter = ',')]
        d_values: Vec<usize>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        canvas: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        k_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        heads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[allow(clippy::too_many_arguments)]
fn train_config(
    cfg: &ConfigFile,
    steps: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    k_steps: Option<usize>,
    seed: Option<u64>,
    ema_decay: Option<f64>,
) -> Result<TrainConfig, PipelineError> {
    let defaults = TrainConfig::default();
    Ok(TrainConfig {
        lambda1: resolve(lambda1, cfg, "lambda1", defaults.lambda1)?,
        lambda2: resolve(lambda2, cfg, "lambda2", defaults.lambda2)?,
        batch: resolve(batch, cfg, "batch", defaults.batch)?,
        steps: resolve(steps, cfg, "steps", defaults.steps)?,
        lr: resolve(lr, cfg, "lr", defaults.lr)?,
        seed: resolve(seed, cfg, "seed", defaults.seed)?,
        ema_decay: resolve(ema_decay, cfg, "ema_decay", defaults.ema_decay)?,
        k_steps: resolve(k_steps, cfg, "k_steps", defaults.k_steps)?,
        log_every: defaults.log_every,
    })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }

    match cli.command {
        Command::Fixture { kind, count, test_count, t_len, canvas, seed, out } => {
            cli::cmd_fixture(&cli::FixtureArgs {
                kind,
                count,
                test_count,
                t_len,
                canvas: canvas_from(canvas, &cfg, (64, 64))?,
                seed: resolve(seed, &cfg, "seed", 0)?,
                out,
            })
        }
        Command::Prep { input, out, s_min, o_max, border_px, t_win, stride, test_fraction, seed, canvas } => {
            let prep = PrepConfig {
                s_min: resolve(s_min, &cfg, "s_min", DEFAULT_S_MIN)?,
                o_max: resolve(o_max, &cfg, "o_max", DEFAULT_O_MAX)?,
                border_px: resolve(border_px, &cfg, "border_px", DEFAULT_BORDER_PX)?,
                t_win: resolve(t_win, &cfg, "t_win", 50)?,
                stride: resolve(stride, &cfg, "stride", 10)?,
                test_fraction: resolve(test_fraction, &cfg, "test_fraction", 0.1)?,
                seed: resolve(seed, &cfg, "seed", 0)?,
                canvas: canvas_from(canvas, &cfg, (128, 128))?,
            };
            cli::cmd_prep(&cli::PrepArgs { input, out, cfg: prep })
        }
        Command::Encode { input, out, d, n_points } => cli::cmd_encode(&cli::EncodeArgs {
            input,
            out,
            d: resolve(d, &cfg, "d", cli::DEFAULT_D)?,
            n_points: resolve(n_points, &cfg, "n_points", cli::DEFAULT_N_POINTS)?,
        }),
        Command::SelectD { input, series, out, fraction, d_max, n_points } => {
            cli::cmd_select_d(&cli::SelectDArgs {
                input,
                series,
                out,
                fraction: resolve(fraction, &cfg, "fraction", cli::DEFAULT_FRACTION)?,
                d_max: resolve(d_max, &cfg, "d_max", cli::DEFAULT_D_MAX)?,
                n_points: resolve(n_points, &cfg, "n_points", cli::DEFAULT_N_POINTS)?,
            })
        }
        Command::Train {
            series,
            out,
            steps,
            batch,
            lr,
            lambda1,
            lambda2,
            k_steps,
            seed,
            ema_decay,
            width,
            blocks,
            heads,
            canvas,
        } => {
            let tc = train_config(&cfg, steps, batch, lr, lambda1, lambda2, k_steps, seed, ema_decay)?;
            cli::cmd_train(&cli::TrainArgs {
                series,
                out,
                train_cfg: tc,
                width: resolve(width, &cfg, "width", 96)?,
                blocks: resolve(blocks, &cfg, "blocks", 4)?,
                heads: resolve(heads, &cfg, "heads", 4)?,
                canvas: canvas_from(canvas, &cfg, (96, 96))?,
            })
        }
        Command::Generate { checkpoint, out, count, seed, t_len, pgm } => {
            cli::cmd_generate(&cli::GenerateArgs {
                checkpoint,
                out,
                count,
                seed: resolve(seed, &cfg, "seed", 0)?,
                t_len,
                pgm,
            })
        }
        Command::Decode { series, out, canvas, n_points, pgm } => cli::cmd_decode(&cli::DecodeArgs {
            series,
            out,
            canvas: canvas_from(canvas, &cfg, (96, 96))?,
            n_points,
            pgm,
        }),
        Command::Evaluate { real, synth, checkpoint, count, replications, seed, out } => {
            cli::cmd_evaluate(&cli::EvaluateArgs {
                real,
                synth,
                checkpoint,
                count,
                replications: resolve(replications, &cfg, "replications", 1)?,
                seed: resolve(seed, &cfg, "seed", 0)?,
                out,
            })
        }
        Command::Ablate {
            input,
            real,
            d_values,
            replications,
            count,
            n_points,
            canvas,
            steps,
            batch,
            lr,
            k_steps,
            seed,
            width,
            blocks,
            heads,
            out,
        } => {
            let tc = train_config(&cfg, steps.or(Some(400)), batch, lr, None, None, k_steps, seed, None)?;
            cli::cmd_ablate(&cli::AblateArgs {
                input,
                real,
                d_values,
                replications: resolve(replications, &cfg, "replications", 2)?,
                count,
                n_points: resolve(n_points, &cfg, "n_points", cli::DEFAULT_N_POINTS)?,
                canvas: canvas_from(canvas, &cfg, (64, 64))?,
                train_cfg: tc,
                width: resolve(width, &cfg, "width", 64)?,
                blocks: resolve(blocks, &cfg, "blocks", 2)?,
                heads: resolve(heads, &cfg, "heads", 4)?,
                out,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
