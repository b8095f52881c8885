//! On-disk episode layout.
//!
//! ```text
//! frame_000_label.pgm   ground-truth labels, 16-bit
//! frame_000_app.pgm     appearance, 8-bit
//! flow_000_fwd.flo      flow from frame 0 to frame 1
//! flow_000_bwd.flo      flow from frame 1 to frame 0
//! actions.json          one record per push
//! config.json           pipeline config; `seed` is this episode's seed
//! ```

use std::path::{Path, PathBuf};

use push2seg_core::sim::{Episode, PushRecord};
use push2seg_core::{Flows, GrayImage, LabelImage, PipelineConfig};

use crate::error::{CliError, Result};
use crate::fsio::{read_json, write_json};
use crate::{flo, pgm};

pub fn frame_label(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("frame_{t:03}_label.pgm"))
}

pub fn frame_app(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("frame_{t:03}_app.pgm"))
}

pub fn flow_fwd(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("flow_{t:03}_fwd.flo"))
}

pub fn flow_bwd(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("flow_{t:03}_bwd.flo"))
}

pub fn final_label(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("final_{t:03}_label.pgm"))
}

pub fn init_label(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("init_{t:03}_label.pgm"))
}

/// Directory name of episode `index` under a generate output root.
pub fn episode_name(index: usize) -> String {
    format!("episode_{index:03}")
}

/// An episode as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeFiles {
    pub config: PipelineConfig,
    pub labels: Vec<LabelImage>,
    pub appearance: Vec<GrayImage>,
    pub flows: Flows,
    pub actions: Vec<PushRecord>,
}

impl EpisodeFiles {
    pub fn n_frames(&self) -> usize {
        self.labels.len()
    }
}

pub fn write_episode(dir: &Path, ep: &Episode, config: &PipelineConfig) -> Result<()> {
    for t in 0..ep.n_frames() {
        pgm::write_label(&frame_label(dir, t), &ep.labels[t])?;
        pgm::write_gray(&frame_app(dir, t), &ep.appearance[t])?;
    }
    for t in 0..ep.flows.forward.len() {
        flo::write(&flow_fwd(dir, t), &ep.flows.forward[t])?;
        flo::write(&flow_bwd(dir, t), &ep.flows.backward[t])?;
    }
    write_json(&dir.join("actions.json"), &ep.actions)?;
    write_json(&dir.join("config.json"), config)
}

pub fn read_config(path: &Path) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = read_json(path).map_err(|e| match e {
        CliError::Format { path, reason } => CliError::Config { path, reason },
        other => other,
    })?;
    cfg.validate().map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(cfg)
}

/// Read every file of an episode. The frame count comes from `actions.json`
/// (one more frame than pushes); a missing file is reported by name.
pub fn read_episode(dir: &Path) -> Result<EpisodeFiles> {
    let config = read_config(&dir.join("config.json"))?;
    let actions: Vec<PushRecord> = read_json(&dir.join("actions.json"))?;
    let n = actions.len() + 1;
    let mut labels = Vec::with_capacity(n);
    let mut appearance = Vec::with_capacity(n);
    for t in 0..n {
        labels.push(pgm::read_label(&frame_label(dir, t))?);
        appearance.push(pgm::read_gray(&frame_app(dir, t))?);
    }
    let mut flows = Flows::default();
    for t in 0..n - 1 {
        flows.forward.push(flo::read(&flow_fwd(dir, t))?);
        flows.backward.push(flo::read(&flow_bwd(dir, t))?);
    }
    let dims = labels[0].dims();
    for (t, (l, a)) in labels.iter().zip(&appearance).enumerate() {
        if l.dims() != dims || a.dims() != dims {
            return Err(CliError::format(&frame_label(dir, t), "frame size differs from frame 0"));
        }
    }
    for t in 0..n - 1 {
        if flows.forward[t].dims() != dims || flows.backward[t].dims() != dims {
            return Err(CliError::format(&flow_fwd(dir, t), "flow size differs from the frames"));
        }
    }
    Ok(EpisodeFiles {
        config,
        labels,
        appearance,
        flows,
        actions,
    })
}

/// Labels `<prefix>_000_label.pgm`, `<prefix>_001_label.pgm`, ... up to the
/// first missing index.
pub fn read_label_series(dir: &Path, prefix: &str) -> Result<Vec<LabelImage>> {
    let mut out = Vec::new();
    loop {
        let p = dir.join(format!("{prefix}_{:03}_label.pgm", out.len()));
        if !p.exists() {
            break;
        }
        out.push(pgm::read_label(&p)?);
    }
    Ok(out)
}
