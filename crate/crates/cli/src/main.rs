//! `gaze`: batch tools around the gaze engine.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal failure.

mod error;
mod train;
mod tools;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gaze_core::geometry::{ScreenGeometry, Space};
use gaze_core::model::Profile;
use gaze_server::ServerConfig;

use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "gaze", version, about = "Webcam gaze estimation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputSpace {
    Camera,
    Normalized,
}

impl From<OutputSpace> for Space {
    fn from(s: OutputSpace) -> Space {
        match s {
            OutputSpace::Camera => Space::CameraCm,
            OutputSpace::Normalized => Space::NormalizedScreen,
        }
    }
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: gaze_core::GazeError| e.to_string())
}

fn parse_screen(s: &str) -> Result<ScreenGeometry, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w: f32 = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: f32 = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    ScreenGeometry::new(w, h).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated training: per-fold weights, loss.csv and metrics.csv.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "tiny", value_parser = parse_profile)]
        profile: Profile,
        /// Smooth-L1 transition point.
        #[arg(long, default_value_t = 0.8)]
        beta: f64,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pixel metrics of a weights file, or of a `train` output directory fold by fold.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "tiny", value_parser = parse_profile)]
        profile: Profile,
        /// Fold count used by `train` (directory mode).
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metrics CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smooth-L1 beta search by fold-averaged validation loss.
    Gridsearch {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "tiny", value_parser = parse_profile)]
        profile: Profile,
        /// Comma-separated candidates.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2,0.5,1.0")]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Curves CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune base weights on a recorded calibration directory.
    Calibrate {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        means: Option<PathBuf>,
        /// Directory with screen.txt, targets.csv and target_<i>.png frames.
        #[arg(long)]
        replay: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        /// Report JSON path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the fine-tuned weights.
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
    /// Agreement, ROI accuracy and jitter for a Dot-Probe session.
    Analyze {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        gaze_a: PathBuf,
        #[arg(long)]
        gaze_b: Option<PathBuf>,
        #[arg(long, default_value = "1920x1080", value_parser = parse_screen)]
        screen: ScreenGeometry,
        /// Report JSON path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every layer kind and parameter tensor.
    Gradcheck {
        #[arg(long, default_value = "tiny", value_parser = parse_profile)]
        profile: Profile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampled entries per parameter tensor.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        /// Corrupt one backward pass (self-test of the checker).
        #[arg(long)]
        inject_fault: bool,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        /// TOML config file; EYETHEIA_* environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        means: Option<PathBuf>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Write a synthetic dataset, or a calibration replay directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        subjects: usize,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write a 13-target calibration replay instead of a dataset.
        #[arg(long)]
        replay: bool,
    },
    /// Write fresh (or synthetically pretrained) weights plus uniform means.
    InitWeights {
        #[arg(long, default_value = "tiny", value_parser = parse_profile)]
        profile: Profile,
        #[arg(long, value_enum, default_value = "normalized")]
        space: OutputSpace,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pretrain on synthetic subjects first.
        #[arg(long)]
        pretrained: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn serve(
    config: Option<PathBuf>,
    weights: Option<PathBuf>,
    means: Option<PathBuf>,
    host: Option<String>,
    port: Option<u16>,
) -> CliResult {
    let mut cfg = match &config {
        Some(p) => ServerConfig::from_file(p)?,
        None => ServerConfig::default(),
    }
    .with_process_env()?;
    cfg.weights = weights.or(cfg.weights);
    cfg.means = means.or(cfg.means);
    cfg.host = host.unwrap_or(cfg.host);
    cfg.port = port.unwrap_or(cfg.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(gaze_server::serve(
        cfg,
        |addr| {
            use std::io::Write;
            println!("listening on http://{addr}");
            std::io::stdout().flush().ok();
        },
        async {
            tokio::signal::ctrl_c().await.ok();
        },
    ))?;
    println!("shut down");
    Ok(())
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Train {
            dataset,
            profile,
            beta,
            lr,
            epochs,
            batch_size,
            folds,
            seed,
            out,
        } => train::train(&train::TrainArgs {
            dataset,
            profile,
            beta,
            lr,
            epochs,
            batch_size,
            folds,
            seed,
            out,
        }),
        Command::Eval {
            weights,
            dataset,
            profile,
            folds,
            seed,
            out,
        } => train::eval(&train::EvalArgs {
            weights,
            dataset,
            profile,
            folds,
            seed,
            out,
        }),
        Command::Gridsearch {
            dataset,
            profile,
            betas,
            lr,
            epochs,
            batch_size,
            folds,
            seed,
            out,
        } => train::gridsearch(&train::GridArgs {
            dataset,
            profile,
            betas,
            lr,
            epochs,
            batch_size,
            folds,
            seed,
            out,
        }),
        Command::Calibrate {
            weights,
            means,
            replay,
            lr,
            epochs,
            out,
            weights_out,
        } => tools::calibrate(&tools::CalibrateArgs {
            weights,
            means,
            replay,
            lr,
            epochs,
            out,
            weights_out,
        }),
        Command::Analyze {
            trials,
            gaze_a,
            gaze_b,
            screen,
            out,
        } => tools::analyze(&tools::AnalyzeArgs {
            trials,
            gaze_a,
            gaze_b,
            screen,
            out,
        }),
        Command::Gradcheck {
            profile,
            seed,
            samples,
            tolerance,
            inject_fault,
        } => tools::gradcheck(&tools::GradcheckArgs {
            profile,
            seed,
            samples,
            tolerance,
            inject_fault,
        }),
        Command::Serve {
            config,
            weights,
            means,
            host,
            port,
        } => serve(config, weights, means, host, port),
        Command::Synth {
            out,
            subjects,
            frames,
            seed,
            replay,
        } => {
            let kind = if replay {
                tools::SynthKind::Replay
            } else {
                tools::SynthKind::Dataset { subjects, frames }
            };
            tools::synth(kind, seed, &out)
        }
        Command::InitWeights {
            profile,
            space,
            seed,
            pretrained,
            out,
        } => tools::init_weights(profile, space.into(), seed, pretrained, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaze: {e}");
            e.exit_code()
        }
    }
}
