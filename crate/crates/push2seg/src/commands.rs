//! The four subcommands as library functions.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use push2seg_core::eval::{default_tol, evaluate_counts, macro_average, micro_average, MetricCounts, MetricsReport};
use push2seg_core::grasp::{bench_scene, bench_seed, BenchReport, SegmenterMode, CLUTTER_LEVELS};
use push2seg_core::percept::{blockmatch_flows, InitialSegmentation};
use push2seg_core::propagate::{label_sequence, segment_frames, LabelOutput, LabelReport};
use push2seg_core::sim::{run_episode, Episode};
use push2seg_core::{FlowMode, LabelImage, PipelineConfig};

use crate::episode_dir::{self, EpisodeFiles};
use crate::error::{CliError, Result};
use crate::fsio::write_json;
use crate::pgm;

/// Run `f` on a pool of `jobs` threads; 0 means one per core.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(f)
}

/// Episode for `seed`; the RNG is ChaCha8 seeded with `seed`.
pub fn generate_episode(cfg: &PipelineConfig, seed: u64) -> Result<Episode> {
    Ok(run_episode(&cfg.sim, &cfg.segmenter, &mut ChaCha8Rng::seed_from_u64(seed))?)
}

/// Write `episodes` episodes under `out`, episode `i` seeded with
/// `base_seed + i`.
pub fn generate(cfg: &PipelineConfig, out: &Path, episodes: usize, base_seed: u64) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let ep = generate_episode(cfg, seed)?;
            let dir = out.join(episode_dir::episode_name(i));
            let ep_cfg = PipelineConfig { seed, ..cfg.clone() };
            episode_dir::write_episode(&dir, &ep, &ep_cfg)?;
            log::info!("episode {i} (seed {seed}) -> {}", dir.display());
            Ok(dir)
        })
        .collect()
}

/// Segment every frame and run the labeling pipeline. The segmenter RNG is
/// ChaCha8 seeded with `cfg.seed`.
pub fn label_files(ep: &EpisodeFiles, cfg: &PipelineConfig) -> Result<(InitialSegmentation, LabelOutput)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let segs = segment_frames(&ep.labels, &cfg.segmenter, &mut rng);
    let out = match cfg.flow {
        FlowMode::Oracle => label_sequence(&segs, &ep.flows, &cfg.label)?,
        FlowMode::Blockmatch => label_sequence(&segs, &blockmatch_flows(&ep.appearance, &cfg.blockmatch)?, &cfg.label)?,
    };
    Ok((segs, out))
}

/// Label the episode in `ep_dir` and write final and initial labels, the
/// report and the tracklets to `out`. `config` replaces the episode's own
/// config except for its seed.
pub fn label(ep_dir: &Path, out: &Path, config: Option<&PipelineConfig>, flow: Option<FlowMode>) -> Result<LabelReport> {
    let ep = episode_dir::read_episode(ep_dir)?;
    let mut cfg = match config {
        Some(c) => PipelineConfig {
            seed: ep.config.seed,
            ..c.clone()
        },
        None => ep.config.clone(),
    };
    if let Some(f) = flow {
        cfg.flow = f;
    }
    let (segs, result) = label_files(&ep, &cfg)?;
    let (w, h) = ep.labels[0].dims();
    for (t, l) in result.labels.iter().enumerate() {
        pgm::write_label(&episode_dir::final_label(out, t), l)?;
    }
    for (t, masks) in segs.frames.iter().enumerate() {
        pgm::write_label(&episode_dir::init_label(out, t), &LabelImage::from_masks(w, h, masks)?)?;
    }
    write_json(&out.join("label_report.json"), &result.report)?;
    write_json(&out.join("tracklets.json"), &result.tracklets)?;
    log::info!(
        "{}: {} tracklets, frame-0 masks {} -> {}",
        ep_dir.display(),
        result.report.n_tracklets,
        result.report.initial_counts[0],
        result.report.final_counts[0]
    );
    Ok(result.report)
}

/// Which label files in a prediction directory to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PredKind {
    /// `final_*` if present, otherwise `frame_*`.
    Auto,
    Final,
    Init,
    Frame,
}

impl PredKind {
    fn prefix(self, dir: &Path) -> &'static str {
        match self {
            PredKind::Auto if episode_dir::final_label(dir, 0).exists() => "final",
            PredKind::Auto | PredKind::Frame => "frame",
            PredKind::Final => "final",
            PredKind::Init => "init",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tol: usize,
    pub n_frames: usize,
    pub frames: Vec<MetricsReport>,
    /// Mean of the per-frame metrics.
    pub mean: MetricsReport,
    /// Metrics from counts pooled over all frames.
    pub pooled: MetricsReport,
}

pub fn eval_series(preds: &[LabelImage], gts: &[LabelImage], tol: Option<usize>) -> Result<EvalReport> {
    if gts.is_empty() {
        return Err(CliError::Mismatch("no ground-truth frames to evaluate".into()));
    }
    if preds.len() != gts.len() {
        return Err(CliError::Mismatch(format!("{} predicted frames but {} ground-truth frames", preds.len(), gts.len())));
    }
    let (w, h) = gts[0].dims();
    let tol = tol.unwrap_or_else(|| default_tol(w, h));
    let counts: Vec<MetricCounts> = preds.iter().zip(gts).map(|(p, g)| evaluate_counts(p, g, tol)).collect::<Result<_, push2seg_core::Error>>()?;
    let frames: Vec<MetricsReport> = counts.iter().map(MetricCounts::report).collect();
    Ok(EvalReport {
        tol,
        n_frames: frames.len(),
        mean: macro_average(&frames).expect("at least one frame"),
        pooled: micro_average(&counts),
        frames,
    })
}

pub fn eval(pred_dir: &Path, gt_dir: &Path, tol: Option<usize>, kind: PredKind) -> Result<EvalReport> {
    let preds = episode_dir::read_label_series(pred_dir, kind.prefix(pred_dir))?;
    let gts = episode_dir::read_label_series(gt_dir, "frame")?;
    eval_series(&preds, &gts, tol)
}

/// Benchmark every clutter level with `scenes_per_level` scenes in each of
/// `modes`; scenes run in parallel.
pub fn grasp_bench(cfg: &PipelineConfig, base_seed: u64, scenes_per_level: usize, modes: &[SegmenterMode]) -> Result<BenchReport> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for (li, level) in CLUTTER_LEVELS.iter().enumerate() {
        for k in 0..scenes_per_level {
            for &mode in modes {
                jobs.push((level, bench_seed(base_seed, li, scenes_per_level, k), mode));
            }
        }
    }
    let scenes = jobs
        .into_par_iter()
        .map(|(level, seed, mode)| {
            let s = bench_scene(cfg, level, seed, mode)?;
            log::info!("{} seed {seed} {mode:?}: {}/{}", level.name, s.record.successes, s.record.n_objects);
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport::from_scenes(scenes))
}
