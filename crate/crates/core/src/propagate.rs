//! Seed selection, warp-then-snap propagation and fusion into final labels.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{LabelParams, SegmenterConfig};
use crate::error::{Error, Result};
use crate::maskcore::{BinaryMask, Flows, LabelImage};
use crate::percept::{InitialSegmentation, undersegment};
use crate::sim::Episode;
use crate::track::{DetectionId, Tracklet, associate_greedy};

/// How a propagated mask was obtained in a given frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Snapped,
    Warped,
}

/// The detection chosen to start propagation for one tracklet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedChoice {
    pub detection: DetectionId,
    /// `min(predecessor link, successor link)`, 1.0 for a missing side.
    pub score: f64,
    /// The detection moved in the push that followed it.
    pub pushed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatedObject {
    pub id: u16,
    pub seed: SeedChoice,
    pub masks: Vec<BinaryMask>,
    pub provenance: Vec<Provenance>,
}

impl PropagatedObject {
    pub fn seed_frame(&self) -> usize {
        self.seed.detection.frame_index
    }

    pub fn seed_mask(&self) -> &BinaryMask {
        &self.masks[self.seed_frame()]
    }
}

/// Pick the seed detection of a tracklet.
///
/// A detection counts as pushed when the mean forward-flow magnitude over
/// its pixels is at least `delta_move`; detections in the last frame have no
/// forward flow and never count. Among pushed detections the highest seed
/// score wins, ties going to the latest frame. Without any pushed detection
/// the same rule runs over all detections.
pub fn select_seed(tracklet: &Tracklet, segs: &InitialSegmentation, flows: &Flows, delta_move: f64) -> Result<SeedChoice> {
    if tracklet.is_empty() {
        return Err(Error::invalid("tracklet", "must not be empty"));
    }
    let mut choices = Vec::with_capacity(tracklet.len());
    for (i, &det) in tracklet.detections.iter().enumerate() {
        let (pred, succ) = tracklet.neighbour_scores(i);
        let score = pred.unwrap_or(1.0).min(succ.unwrap_or(1.0));
        let pushed = if det.frame_index + 1 < segs.len() {
            let mask = segs.mask(det.frame_index, det.mask_index);
            flows.forward(det.frame_index)?.mean_magnitude(mask)? >= delta_move
        } else {
            false
        };
        choices.push(SeedChoice {
            detection: det,
            score,
            pushed,
        });
    }
    let any_pushed = choices.iter().any(|c| c.pushed);
    let best = choices
        .into_iter()
        .filter(|c| c.pushed || !any_pushed)
        .fold(None, |best: Option<SeedChoice>, c| match best {
            // detections arrive in increasing frame order, so >= prefers later
            Some(b) if b.score > c.score => Some(b),
            _ => Some(c),
        });
    Ok(best.expect("nonempty tracklet"))
}

/// Carry the seed mask to every frame. Each step warps the previous frame's
/// mask with the adjacent flow, then adopts the best-matching initial mask of
/// the new frame when its IoU with the warped mask reaches `tau_refine`.
pub fn propagate_bidirectional(
    id: u16,
    seed: SeedChoice,
    segs: &InitialSegmentation,
    flows: &Flows,
    tau_refine: f64,
) -> Result<PropagatedObject> {
    let n = segs.len();
    let s = seed.detection.frame_index;
    if s >= n {
        return Err(Error::MaskIndex { index: s, len: n });
    }
    let seed_mask = segs
        .frames[s]
        .get(seed.detection.mask_index)
        .ok_or(Error::MaskIndex {
            index: seed.detection.mask_index,
            len: segs.frames[s].len(),
        })?
        .clone();
    let mut masks = vec![BinaryMask::new(seed_mask.width(), seed_mask.height()); n];
    let mut provenance = vec![Provenance::Warped; n];
    masks[s] = seed_mask;
    provenance[s] = Provenance::Seed;
    for t in (0..s).rev() {
        let warped = masks[t + 1].warp_consistent(flows.backward(t)?, flows.forward(t)?)?;
        (masks[t], provenance[t]) = refine(warped, &segs.frames[t], tau_refine)?;
    }
    for t in s + 1..n {
        let warped = masks[t - 1].warp_consistent(flows.forward(t - 1)?, flows.backward(t - 1)?)?;
        (masks[t], provenance[t]) = refine(warped, &segs.frames[t], tau_refine)?;
    }
    Ok(PropagatedObject {
        id,
        seed,
        masks,
        provenance,
    })
}

fn refine(warped: BinaryMask, detections: &[BinaryMask], tau: f64) -> Result<(BinaryMask, Provenance)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in detections.iter().enumerate() {
        let v = warped.iou(d)?;
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    match best {
        Some((i, v)) if v >= tau => Ok((detections[i].clone(), Provenance::Snapped)),
        _ => Ok((warped, Provenance::Warped)),
    }
}

/// Rasterise propagated objects frame by frame. A pixel claimed by several
/// objects goes to the one whose seed frame is nearest in time, then to the
/// better provenance (seed, snapped, warped), then to the smaller id.
pub fn fuse(objs: &[PropagatedObject], dims: (usize, usize), n_frames: usize) -> Result<Vec<LabelImage>> {
    for o in objs {
        if o.masks.len() != n_frames {
            return Err(Error::invalid("objects", "must cover every frame"));
        }
        if let Some(m) = o.masks.iter().find(|m| m.dims() != dims) {
            return Err(Error::dims(m.dims(), dims));
        }
    }
    let mut out = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let mut order: Vec<&PropagatedObject> = objs.iter().collect();
        order.sort_by_key(|o| (o.seed_frame().abs_diff(t), o.provenance[t], o.id));
        let mut img = LabelImage::new(dims.0, dims.1);
        // paint lowest priority first so the winner is painted last
        for o in order.into_iter().rev() {
            img.paint(&o.masks[t], o.id)?;
        }
        out.push(img);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceCounts {
    pub seed: usize,
    pub snapped: usize,
    pub warped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: u16,
    pub seed_frame: usize,
    pub seed_mask_index: usize,
    pub seed_score: f64,
    pub seed_pushed: bool,
    pub provenance: ProvenanceCounts,
}

/// Summary written next to the final labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub n_frames: usize,
    pub n_tracklets: usize,
    /// Objects dropped because another object covered the same seed mask.
    pub duplicates_removed: usize,
    /// Objects dropped because they covered several distinct objects.
    pub supersets_removed: usize,
    pub initial_counts: Vec<usize>,
    pub final_counts: Vec<usize>,
    pub provenance: ProvenanceCounts,
    pub objects: Vec<ObjectSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelOutput {
    pub labels: Vec<LabelImage>,
    pub tracklets: Vec<Tracklet>,
    pub objects: Vec<PropagatedObject>,
    pub report: LabelReport,
}

/// Run the whole labeling pipeline on an episode with its recorded flows,
/// re-running the episode's segmenter on every frame.
pub fn label_episode<R: Rng + ?Sized>(ep: &Episode, params: &LabelParams, rng: &mut R) -> Result<LabelOutput> {
    let segs = segment_frames(&ep.labels, &ep.segmenter, rng);
    label_sequence(&segs, &ep.flows, params)
}

/// Initial segmentation of every frame.
pub fn segment_frames<R: Rng + ?Sized>(labels: &[LabelImage], cfg: &SegmenterConfig, rng: &mut R) -> InitialSegmentation {
    InitialSegmentation::new(labels.iter().map(|l| undersegment(l, cfg, rng)).collect())
}

/// Associate, seed, propagate, deduplicate and fuse.
///
/// Two objects are duplicates when either one's mask at the other's seed
/// frame matches that seed with IoU of at least `dedupe_iou`; the higher
/// seed score survives. An object is a superset when, in some frame, it
/// contains at least two other objects that are seed or snapped there,
/// mutually distinct (IoU below 0.5), and each covered to at least
/// `containment` of its area. Supersets are the footprints of merged
/// detections and are dropped.
pub fn label_sequence(segs: &InitialSegmentation, flows: &Flows, params: &LabelParams) -> Result<LabelOutput> {
    params.validate()?;
    let n = segs.len();
    if n == 0 {
        return Err(Error::invalid("segmentation", "needs at least one frame"));
    }
    let dims = segs
        .frames
        .iter()
        .flatten()
        .next()
        .map(BinaryMask::dims)
        .or_else(|| flows.forward.first().map(|f| f.dims()))
        .unwrap_or((0, 0));
    let tracklets = associate_greedy(segs, flows, params.tau_assoc)?;
    let mut objects = Vec::with_capacity(tracklets.len());
    for t in &tracklets {
        let seed = select_seed(t, segs, flows, params.delta_move)?;
        objects.push(propagate_bidirectional(0, seed, segs, flows, params.tau_refine)?);
    }

    let before = objects.len();
    let objects = dedupe(objects, params.dedupe_iou)?;
    let duplicates_removed = before - objects.len();
    let before = objects.len();
    let mut objects = drop_supersets(objects, params.containment)?;
    let supersets_removed = before - objects.len();
    for (i, o) in objects.iter_mut().enumerate() {
        o.id = (i + 1) as u16;
    }

    let labels = fuse(&objects, dims, n)?;
    let mut total = ProvenanceCounts::default();
    let summaries = objects
        .iter()
        .map(|o| {
            let mut c = ProvenanceCounts::default();
            for p in &o.provenance {
                match p {
                    Provenance::Seed => c.seed += 1,
                    Provenance::Snapped => c.snapped += 1,
                    Provenance::Warped => c.warped += 1,
                }
            }
            total.seed += c.seed;
            total.snapped += c.snapped;
            total.warped += c.warped;
            ObjectSummary {
                id: o.id,
                seed_frame: o.seed_frame(),
                seed_mask_index: o.seed.detection.mask_index,
                seed_score: o.seed.score,
                seed_pushed: o.seed.pushed,
                provenance: c,
            }
        })
        .collect();
    let report = LabelReport {
        n_frames: n,
        n_tracklets: tracklets.len(),
        duplicates_removed,
        supersets_removed,
        initial_counts: segs.frames.iter().map(Vec::len).collect(),
        final_counts: labels.iter().map(|l| l.ids().len()).collect(),
        provenance: total,
        objects: summaries,
    };
    Ok(LabelOutput {
        labels,
        tracklets,
        objects,
        report,
    })
}

fn dedupe(objects: Vec<PropagatedObject>, threshold: f64) -> Result<Vec<PropagatedObject>> {
    // stable: higher seed score first, original order otherwise
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by(|&a, &b| objects[b].seed.score.total_cmp(&objects[a].seed.score));
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        let o = &objects[i];
        let mut duplicate = false;
        for &k in &keep {
            let p = &objects[k];
            if o.masks[p.seed_frame()].iou(p.seed_mask())? >= threshold
                || p.masks[o.seed_frame()].iou(o.seed_mask())? >= threshold
            {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            keep.push(i);
        }
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<PropagatedObject>> = objects.into_iter().map(Some).collect();
    Ok(keep.into_iter().map(|i| slots[i].take().expect("kept once")).collect())
}

fn drop_supersets(objects: Vec<PropagatedObject>, containment: f64) -> Result<Vec<PropagatedObject>> {
    let n_frames = objects.first().map_or(0, |o| o.masks.len());
    let mut superset = vec![false; objects.len()];
    for (x, big) in objects.iter().enumerate() {
        'frames: for t in 0..n_frames {
            let outer = &big.masks[t];
            if outer.is_empty() {
                continue;
            }
            let mut inside: Vec<&BinaryMask> = Vec::new();
            for (y, small) in objects.iter().enumerate() {
                if y == x {
                    continue;
                }
                let m = &small.masks[t];
                if m.is_empty() || (m.intersection_area(outer)? as f64) < containment * m.area() as f64 {
                    continue;
                }
                if m.iou(outer)? >= 0.8 {
                    continue;
                }
                let mut distinct = true;
                for other in &inside {
                    if other.iou(m)? >= 0.5 {
                        distinct = false;
                        break;
                    }
                }
                if distinct {
                    inside.push(m);
                    if inside.len() >= 2 {
                        superset[x] = true;
                        break 'frames;
                    }
                }
            }
        }
    }
    Ok(objects
        .into_iter()
        .zip(superset)
        .filter_map(|(o, s)| (!s).then_some(o))
        .collect())
}
