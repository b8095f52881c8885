//! Flow-based similarity between detections in adjacent frames and greedy
//! backward association into tracklets.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskcore::{BinaryMask, FlowField, Flows};
use crate::percept::InitialSegmentation;

/// Address of one initial mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectionId {
    pub frame_index: usize,
    pub mask_index: usize,
}

impl DetectionId {
    pub fn new(frame_index: usize, mask_index: usize) -> Self {
        DetectionId {
            frame_index,
            mask_index,
        }
    }
}

/// An initial mask together with its address.
#[derive(Clone, Copy, Debug)]
pub struct Detection<'a> {
    pub frame_index: usize,
    pub mask_index: usize,
    pub mask: &'a BinaryMask,
}

impl<'a> Detection<'a> {
    pub fn new(frame_index: usize, mask_index: usize, mask: &'a BinaryMask) -> Self {
        Detection {
            frame_index,
            mask_index,
            mask,
        }
    }

    pub fn of(segs: &'a InitialSegmentation, id: DetectionId) -> Self {
        Detection::new(id.frame_index, id.mask_index, segs.mask(id.frame_index, id.mask_index))
    }

    pub fn id(&self) -> DetectionId {
        DetectionId::new(self.frame_index, self.mask_index)
    }
}

/// Detections believed to be one object, in increasing adjacent frames.
/// `link_scores[i]` is the score between `detections[i]` and
/// `detections[i + 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub detections: Vec<DetectionId>,
    pub link_scores: Vec<f64>,
}

impl Tracklet {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn first_frame(&self) -> usize {
        self.detections[0].frame_index
    }

    pub fn last_frame(&self) -> usize {
        self.detections[self.detections.len() - 1].frame_index
    }

    /// Score to the previous and next detection of position `i`, if any.
    pub fn neighbour_scores(&self, i: usize) -> (Option<f64>, Option<f64>) {
        let pred = i.checked_sub(1).map(|j| self.link_scores[j]);
        let succ = self.link_scores.get(i).copied();
        (pred, succ)
    }
}

/// Similarity of a detection at `t` and one at `t + 1`: the smaller of the
/// forward-warp IoU and the backward-warp IoU.
pub fn pairwise_score(
    a: &Detection<'_>,
    b: &Detection<'_>,
    fwd: &FlowField,
    bwd: &FlowField,
) -> Result<f64> {
    if b.frame_index != a.frame_index + 1 {
        return Err(Error::NonAdjacentFrames {
            a: a.frame_index,
            b: b.frame_index,
        });
    }
    mask_score(a.mask, b.mask, fwd, bwd)
}

/// [`pairwise_score`] without the frame bookkeeping.
pub fn mask_score(a: &BinaryMask, b: &BinaryMask, fwd: &FlowField, bwd: &FlowField) -> Result<f64> {
    let ab = a.warp(fwd)?.iou(b)?;
    let ba = b.warp(bwd)?.iou(a)?;
    Ok(ab.min(ba))
}

/// Scores between every mask of frame `t` (rows) and frame `t + 1`
/// (columns). Each mask is warped once.
pub fn score_matrix(
    prev: &[BinaryMask],
    next: &[BinaryMask],
    fwd: &FlowField,
    bwd: &FlowField,
) -> Result<Vec<Vec<f64>>> {
    let prev_w = prev.iter().map(|m| m.warp(fwd)).collect::<Result<Vec<_>>>()?;
    let next_w = next.iter().map(|m| m.warp(bwd)).collect::<Result<Vec<_>>>()?;
    let mut out = vec![vec![0.0; next.len()]; prev.len()];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = prev_w[i].iou(&next[j])?.min(next_w[j].iou(&prev[i])?);
        }
    }
    Ok(out)
}

/// Greedy backward association.
///
/// Frames are swept from last to first. Within a frame, unclaimed masks seed
/// tracklets in descending area order (ties by smaller index); a tracklet
/// then repeatedly links to the unclaimed previous-frame mask with the
/// highest score (ties by smaller index) while that score exceeds `tau`.
/// Every mask ends up in exactly one tracklet.
pub fn associate_greedy(segs: &InitialSegmentation, flows: &Flows, tau: f64) -> Result<Vec<Tracklet>> {
    let n = segs.len();
    let mut scores = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        scores.push(score_matrix(
            &segs.frames[t],
            &segs.frames[t + 1],
            flows.forward(t)?,
            flows.backward(t)?,
        )?);
    }
    let mut claimed: Vec<Vec<bool>> = segs.frames.iter().map(|f| vec![false; f.len()]).collect();
    let mut tracklets = Vec::new();
    for t in (0..n).rev() {
        let mut order: Vec<usize> = (0..segs.frames[t].len()).collect();
        order.sort_by_key(|&i| (core::cmp::Reverse(segs.frames[t][i].area()), i));
        for seed in order {
            if claimed[t][seed] {
                continue;
            }
            claimed[t][seed] = true;
            let mut dets = vec![DetectionId::new(t, seed)];
            let mut links = Vec::new();
            let (mut frame, mut idx) = (t, seed);
            while frame > 0 {
                let prev = frame - 1;
                let mut best: Option<(usize, f64)> = None;
                for (j, &taken) in claimed[prev].iter().enumerate() {
                    let s = scores[prev][j][idx];
                    if !taken && best.is_none_or(|(_, bs)| s > bs) {
                        best = Some((j, s));
                    }
                }
                match best {
                    Some((j, s)) if s > tau => {
                        claimed[prev][j] = true;
                        dets.push(DetectionId::new(prev, j));
                        links.push(s);
                        frame = prev;
                        idx = j;
                    }
                    _ => break,
                }
            }
            dets.reverse();
            links.reverse();
            tracklets.push(Tracklet {
                detections: dets,
                link_scores: links,
            });
        }
    }
    Ok(tracklets)
}
