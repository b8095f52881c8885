use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::push::{PushAction, apply_push, select_push};
use super::sample::sample_scene;
use super::scene::{Scene, oracle_flow};
use crate::config::{SegmenterConfig, SimConfig};
use crate::error::Result;
use crate::maskcore::{Flows, GrayImage, LabelImage};
use crate::percept::undersegment;

/// One executed push and what it did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushRecord {
    pub action: PushAction,
    /// Object the targeted mask resolved to.
    pub target_object_id: u16,
    /// Objects whose pose changed, ascending.
    pub moved: Vec<u16>,
    pub jammed: bool,
}

/// A recorded pushing sequence. Frame `t + 1` is the scene after push `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub sim: SimConfig,
    pub segmenter: SegmenterConfig,
    pub scenes: Vec<Scene>,
    pub labels: Vec<LabelImage>,
    pub appearance: Vec<GrayImage>,
    pub flows: Flows,
    pub actions: Vec<PushRecord>,
}

impl Episode {
    pub fn n_frames(&self) -> usize {
        self.labels.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.sim.width, self.sim.height)
    }
}

/// Sample a cluttered scene and push it `n_pushes` times.
pub fn run_episode<R: Rng + ?Sized>(
    sim: &SimConfig,
    segmenter: &SegmenterConfig,
    rng: &mut R,
) -> Result<Episode> {
    let scene = sample_scene(sim, rng)?;
    run_episode_from_scene(scene, sim, segmenter, rng)
}

/// Push an existing scene `n_pushes` times. Each push targets a mask of the
/// under-segmented current frame.
pub fn run_episode_from_scene<R: Rng + ?Sized>(
    scene: Scene,
    sim: &SimConfig,
    segmenter: &SegmenterConfig,
    rng: &mut R,
) -> Result<Episode> {
    sim.validate()?;
    segmenter.validate()?;
    let (labels0, app0) = scene.render();
    let mut ep = Episode {
        sim: sim.clone(),
        segmenter: segmenter.clone(),
        scenes: Vec::with_capacity(sim.n_pushes + 1),
        labels: Vec::with_capacity(sim.n_pushes + 1),
        appearance: Vec::with_capacity(sim.n_pushes + 1),
        flows: Flows::default(),
        actions: Vec::with_capacity(sim.n_pushes),
    };
    ep.scenes.push(scene);
    ep.labels.push(labels0);
    ep.appearance.push(app0);
    for t in 0..sim.n_pushes {
        let masks = undersegment(&ep.labels[t], segmenter, rng);
        let current = &ep.scenes[t];
        let action = select_push(&masks, (current.width, current.height), sim.push_distance, rng)?;
        let outcome = apply_push(current, &action, &masks, sim, rng)?;
        let (fwd, bwd) = oracle_flow(current, &outcome.scene)?;
        let (labels, app) = outcome.scene.render();
        ep.flows.forward.push(fwd);
        ep.flows.backward.push(bwd);
        ep.actions.push(PushRecord {
            action,
            target_object_id: outcome.target_id,
            moved: outcome.moved,
            jammed: outcome.jammed,
        });
        ep.scenes.push(outcome.scene);
        ep.labels.push(labels);
        ep.appearance.push(app);
    }
    Ok(ep)
}
