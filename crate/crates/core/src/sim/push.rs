use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::object::ObjectState;
use super::scene::Scene;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::maskcore::BinaryMask;

/// Upper bound on separation moves while resolving contacts of one sub-step.
const MAX_SEPARATIONS: usize = 4096;

/// Contact directions tried on each side of the push direction.
const CONTACT_FAN: usize = 31;
/// Extra travel of a shoved object past the point of contact, in pixels.
const SLIDE: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    /// Index into the current frame's initial segmentation.
    pub target_mask_index: usize,
    pub direction: Vec2,
    pub distance: f64,
}

impl PushAction {
    pub fn new(target_mask_index: usize, direction: Vec2, distance: f64) -> Result<Self> {
        if libm::fabs(direction.norm() - 1.0) > 1e-9 {
            return Err(Error::invalid("direction", "must be a unit vector"));
        }
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::invalid("distance", "must be positive"));
        }
        Ok(PushAction {
            target_mask_index,
            direction,
            distance,
        })
    }
}

/// Result of executing a push.
#[derive(Clone, Debug, PartialEq)]
pub struct PushOutcome {
    pub scene: Scene,
    /// Object the targeted mask was resolved to.
    pub target_id: u16,
    /// Every object that changed pose, ascending.
    pub moved: Vec<u16>,
    /// The push stopped early because the pile was wedged against the
    /// workspace border.
    pub jammed: bool,
}

/// Pick a segmented object uniformly at random and push it toward the
/// workspace centre.
pub fn select_push<R: Rng + ?Sized>(
    masks: &[BinaryMask],
    workspace: (usize, usize),
    distance: f64,
    rng: &mut R,
) -> Result<PushAction> {
    let candidates: Vec<usize> = (0..masks.len()).filter(|&i| !masks[i].is_empty()).collect();
    if candidates.is_empty() {
        return Err(Error::NoTargets);
    }
    let target = candidates[rng.gen_range(0..candidates.len())];
    let bbox = masks[target].bounding_box().expect("nonempty");
    let (cx, cy) = bbox.center();
    let center = Vec2::new(workspace.0 as f64 / 2.0, workspace.1 as f64 / 2.0);
    let to_center = center - Vec2::new(cx, cy);
    let direction = if to_center.norm() < 1.0 {
        Vec2::from_angle(rng.gen_range(0.0..core::f64::consts::TAU))
    } else {
        to_center.normalized().expect("nonzero")
    };
    PushAction::new(target, direction, distance)
}

/// Execute a quasi-static push. The object best covered by the targeted mask
/// slides along the push direction in sub-steps; anything it touches is
/// displaced along the same direction until separated, recursively. Moved
/// objects then receive a small random rotation when it fits.
pub fn apply_push<R: Rng + ?Sized>(
    scene: &Scene,
    action: &PushAction,
    masks: &[BinaryMask],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<PushOutcome> {
    let target_mask = masks.get(action.target_mask_index).ok_or(Error::MaskIndex {
        index: action.target_mask_index,
        len: masks.len(),
    })?;
    let target_id = resolve_target(scene, target_mask)?;
    let dir = action.direction;
    let (w, h) = (scene.width, scene.height);

    let n_steps = libm::ceil(action.distance / cfg.push_step).max(1.0) as usize;
    let step = dir * (action.distance / n_steps as f64);

    let mut current = scene.clone();
    let mut moved = BTreeSet::new();
    let mut jammed = false;
    for _ in 0..n_steps {
        let mut next = current.clone();
        let mut touched = BTreeSet::new();
        let ti = index_of(&next, target_id);
        next.objects[ti].position += step;
        next.objects[ti].clamp_inside(w, h);
        touched.insert(target_id);
        if !resolve_contacts(&mut next, ti, dir, &mut touched)? {
            jammed = true;
            break;
        }
        moved.extend(touched);
        current = next;
    }

    for &id in &moved {
        let angle = if cfg.rotation_noise > 0.0 {
            rng.gen_range(-cfg.rotation_noise..=cfg.rotation_noise)
        } else {
            0.0
        };
        let i = index_of(&current, id);
        let mut trial = current.objects[i];
        trial.rotation += angle;
        let fits = trial.inside(w, h)
            && current
                .objects
                .iter()
                .all(|o| o.id == id || !o.overlaps(&trial));
        if fits {
            current.objects[i] = trial;
        }
    }

    let moved = moved
        .into_iter()
        .filter(|&id| scene.object(id) != current.object(id))
        .collect();
    Ok(PushOutcome {
        scene: current,
        target_id,
        moved,
        jammed,
    })
}

/// Object with the largest pixel overlap with `mask`; ties go to the smaller
/// id.
pub(crate) fn resolve_target(scene: &Scene, mask: &BinaryMask) -> Result<u16> {
    let labels = scene.render_labels();
    let mut counts = alloc::collections::BTreeMap::new();
    for (x, y) in mask.iter() {
        if x < labels.width() && y < labels.height() {
            let l = labels.get(x, y);
            if l != 0 {
                *counts.entry(l).or_insert(0usize) += 1;
            }
        }
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(u16, usize)>, (id, n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((id, n)),
        })
        .map(|(id, _)| id)
        .ok_or(Error::NoTargets)
}

fn index_of(scene: &Scene, id: u16) -> usize {
    scene
        .objects
        .iter()
        .position(|o| o.id == id)
        .expect("object present")
}

/// Pushes every object overlapping a moved one along `dir` until the scene
/// is overlap-free. Returns `Ok(false)` when an object pinned against the
/// border cannot make room.
fn resolve_contacts(
    scene: &mut Scene,
    start: usize,
    dir: Vec2,
    touched: &mut BTreeSet<u16>,
) -> Result<bool> {
    let (w, h) = (scene.width, scene.height);
    let mut queue = VecDeque::from([start]);
    let mut moves = 0;
    while let Some(a) = queue.pop_front() {
        for b in 0..scene.objects.len() {
            if b == a || !scene.objects[a].overlaps(&scene.objects[b]) {
                continue;
            }
            moves += 1;
            if moves > MAX_SEPARATIONS {
                return Err(Error::UnresolvableOverlap(moves));
            }
            let shove = contact_shove(&scene.objects[b], &scene.objects[a], dir);
            scene.objects[b].position += shove;
            scene.objects[b].clamp_inside(w, h);
            if scene.objects[b].overlaps(&scene.objects[a]) {
                return Ok(false);
            }
            touched.insert(scene.objects[b].id);
            queue.push_back(b);
        }
    }
    Ok(true)
}

/// Smallest displacement of `free` that clears `fixed`, searched over
/// directions within 87 degrees of the push direction. Ties prefer the
/// direction closest to `dir`.
fn contact_shove(free: &ObjectState, fixed: &ObjectState, dir: Vec2) -> Vec2 {
    let mut best = (f64::INFINITY, Vec2::ZERO);
    for k in 0..=2 * CONTACT_FAN {
        let off = if k % 2 == 1 { -(k as i64).div_euclid(2) - 1 } else { k as i64 / 2 };
        let d = dir.rotated(off as f64 * core::f64::consts::PI / (2 * CONTACT_FAN + 2) as f64);
        let t = free.separation_along(fixed, d);
        if t < best.0 {
            best = (t, d * (t + SLIDE));
        }
    }
    best.1
}
