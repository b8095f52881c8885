use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use push2seg::commands::{self, PredKind};
use push2seg::episode_dir;
use push2seg::fsio::write_json;
use push2seg::{CliError, Result};
use push2seg_core::grasp::SegmenterMode;
use push2seg_core::{FlowMode, PipelineConfig};

#[derive(Parser)]
#[command(name = "push2seg", version, about = "Segmentation labels from simulated pushing")]
struct Cli {
    /// Pipeline config (JSON); defaults are used for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Flow {
    Oracle,
    Blockmatch,
}

impl From<Flow> for FlowMode {
    fn from(f: Flow) -> Self {
        match f {
            Flow::Oracle => FlowMode::Oracle,
            Flow::Blockmatch => FlowMode::Blockmatch,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Baseline,
    Refined,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate pushing episodes and write one directory per episode.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Base seed; episode i uses seed + i. Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Label an episode directory, or every episode_* directory below it.
    Label {
        episode: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        flow: Option<Flow>,
    },
    /// Compare predicted labels against an episode's ground truth.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        /// Boundary tolerance in pixels; defaults to the config value or the
        /// image-diagonal rule.
        #[arg(long)]
        tol: Option<usize>,
        #[arg(long, value_enum, default_value_t = PredKind::Auto)]
        pred_kind: PredKind,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Table-clearing benchmark over every clutter level.
    GraspBench {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2)]
        scenes_per_level: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Baseline, Mode::Refined])]
        modes: Vec<Mode>,
        #[arg(long, value_enum)]
        flow: Option<Flow>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PUSH2SEG_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Option<PipelineConfig>> {
    path.map(episode_dir::read_config).transpose()
}

fn emit<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{s}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    commands::with_jobs(cli.jobs, move || match cli.command {
        Command::Generate { out, episodes, seed } => {
            let cfg = config.unwrap_or_default();
            let dirs = commands::generate(&cfg, &out, episodes, seed.unwrap_or(cfg.seed))?;
            log::info!("wrote {} episodes", dirs.len());
            Ok(())
        }
        Command::Label { episode, out, flow } => {
            let flow = flow.map(FlowMode::from);
            if episode.join("config.json").exists() {
                commands::label(&episode, &out, config.as_ref(), flow)?;
                return Ok(());
            }
            let mut dirs: Vec<PathBuf> = std::fs::read_dir(&episode)
                .map_err(|e| CliError::io(&episode, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("episode_")))
                .collect();
            if dirs.is_empty() {
                return Err(CliError::io(&episode.join("config.json"), std::io::ErrorKind::NotFound.into()));
            }
            dirs.sort();
            use rayon::prelude::*;
            dirs.par_iter()
                .map(|d| commands::label(d, &out.join(d.file_name().expect("named dir")), config.as_ref(), flow).map(drop))
                .collect()
        }
        Command::Eval { pred, gt, tol, pred_kind, out } => {
            let tol = tol.or(config.as_ref().and_then(|c| c.boundary_tol));
            let report = commands::eval(&pred, &gt, tol, pred_kind)?;
            emit(out.as_deref(), &report)
        }
        Command::GraspBench {
            seed,
            scenes_per_level,
            modes,
            flow,
            out,
        } => {
            let mut cfg = config.unwrap_or_default();
            if let Some(f) = flow {
                cfg.flow = f.into();
            }
            let modes: Vec<SegmenterMode> = modes
                .into_iter()
                .map(|m| match m {
                    Mode::Baseline => SegmenterMode::Baseline,
                    Mode::Refined => SegmenterMode::Refined,
                })
                .collect();
            let report = commands::grasp_bench(&cfg, seed.unwrap_or(cfg.seed), scenes_per_level, &modes)?;
            emit(out.as_deref(), &report)
        }
    })
}
