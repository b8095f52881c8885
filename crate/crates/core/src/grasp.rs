//! Top-down parallel-jaw grasps planned from a single mask, and a
//! table-clearing benchmark that compares segmentation sources.
//!
//! A grasp closes along the minor principal axis of the mask, through its
//! centroid. Success is judged against ground truth in the simulator: the
//! opening has to fit, the closing stroke has to hit the target, and the
//! finger pads must not touch any other object on their way in.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{FlowMode, GraspParams, PipelineConfig};
use crate::error::{Error, Result};
use crate::geom::wrap_half_turn;
use crate::maskcore::{BinaryMask, LabelImage};
use crate::percept::{blockmatch_flows, undersegment};
use crate::propagate::{label_sequence, segment_frames};
use crate::sim::{resolve_target, run_episode_from_scene, sample_scene, Scene};

/// Eigenvalue spread below which the covariance counts as isotropic.
const ISOTROPIC_GAP: f64 = 1e-9;

/// Planar grasp: centre in pixels, closing-axis angle in `[0, π)` and the
/// opening width in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub center: (f64, f64),
    pub theta: f64,
    pub width: f64,
}

impl GraspPose {
    /// Unit vector along the closing axis.
    pub fn axis(&self) -> (f64, f64) {
        (libm::cos(self.theta), libm::sin(self.theta))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    WidthExceeded,
    FingerCollision,
    TargetMissed,
    HardFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
}

impl GraspOutcome {
    pub const SUCCESS: GraspOutcome = GraspOutcome {
        success: true,
        failure_reason: None,
    };

    pub fn failed(reason: FailureReason) -> Self {
        GraspOutcome {
            success: false,
            failure_reason: Some(reason),
        }
    }
}

/// Grasp for a mask: centroid, minor principal axis and the pixel extent
/// along it.
pub fn plan_grasp(m: &BinaryMask) -> Result<GraspPose> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    let pts: Vec<(f64, f64)> = m.iter().map(|(x, y)| (x as f64, y as f64)).collect();
    plan_grasp_points(&pts)
}

/// [`plan_grasp`] on an arbitrary point set.
pub fn plan_grasp_points(pts: &[(f64, f64)]) -> Result<GraspPose> {
    if pts.is_empty() {
        return Err(Error::EmptyMask);
    }
    if pts.len() < 3 {
        return Err(Error::DegenerateMask { area: pts.len() });
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let (dx, dy) = (x - cx, y - cy);
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    a /= n;
    b /= n;
    c /= n;
    let gap = libm::sqrt((a - c) * (a - c) + 4.0 * b * b);
    let theta = if gap < ISOTROPIC_GAP {
        0.0
    } else {
        wrap_half_turn(0.5 * libm::atan2(2.0 * b, a - c) + core::f64::consts::FRAC_PI_2)
    };
    let (ux, uy) = (libm::cos(theta), libm::sin(theta));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        let s = (x - cx) * ux + (y - cy) * uy;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok(GraspPose {
        center: (cx, cy),
        theta,
        width: hi - lo + 1.0,
    })
}

/// Execute `g` on `target_id` against ground truth. A successful grasp
/// removes the target from the scene; a failed one leaves it untouched.
///
/// In grasp coordinates (`a` along the closing axis, `b` across it) the
/// closing stroke is the one-pixel band `|a| <= w/2 + δ`, `|b| <= 0.5`, and
/// the pads sit at `w/2 + δ <= |a| <= w/2 + δ + t`, `|b| <= L/2`. The stroke
/// has to hit the target. No other object may touch the pads or the region
/// they sweep while closing, `|a| <= w/2 + δ + t`, `|b| <= L/2`.
pub fn attempt_grasp(scene: &mut Scene, target_id: u16, g: &GraspPose, params: &GraspParams) -> Result<GraspOutcome> {
    if scene.object(target_id).is_none() {
        return Err(Error::UnknownObject(target_id));
    }
    let outcome = judge(&scene.render_labels(), target_id, g, params);
    if outcome.success {
        scene.remove(target_id);
    }
    Ok(outcome)
}

fn judge(labels: &LabelImage, target_id: u16, g: &GraspPose, params: &GraspParams) -> GraspOutcome {
    if g.width > params.max_width {
        return GraspOutcome::failed(FailureReason::WidthExceeded);
    }
    let inner = g.width / 2.0 + params.clearance;
    let outer = inner + params.finger_thickness;
    let half_len = params.finger_length / 2.0;
    let reach = libm::ceil(libm::sqrt(outer * outer + half_len * half_len)) as i64 + 1;
    let (ux, uy) = g.axis();
    let (cx, cy) = g.center;
    let x0 = (libm::floor(cx) as i64 - reach).max(0);
    let x1 = (libm::ceil(cx) as i64 + reach).min(labels.width() as i64 - 1);
    let y0 = (libm::floor(cy) as i64 - reach).max(0);
    let y1 = (libm::ceil(cy) as i64 + reach).min(labels.height() as i64 - 1);

    let mut hit = false;
    let mut collision = false;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let id = labels.get(x as usize, y as usize);
            if id == 0 {
                continue;
            }
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let a = libm::fabs(dx * ux + dy * uy);
            let b = libm::fabs(-dx * uy + dy * ux);
            if id == target_id {
                hit |= a <= inner && b <= 0.5;
            } else if a <= outer && b <= half_len {
                collision = true;
            }
        }
    }
    if !hit {
        GraspOutcome::failed(FailureReason::TargetMissed)
    } else if collision {
        GraspOutcome::failed(FailureReason::FingerCollision)
    } else {
        GraspOutcome::SUCCESS
    }
}

/// Source of the masks the grasp planner sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmenterMode {
    /// The under-segmenting segmenter applied to the current scene.
    Baseline,
    /// Frame-0 labels from a pushing episode of the current scene run through
    /// the full labeling pipeline.
    Refined,
}

/// Masks for the current scene under `mode`. Refined mode pushes a copy of
/// the scene; the scene itself is not changed.
pub fn perceive<R: Rng + ?Sized>(scene: &Scene, mode: SegmenterMode, cfg: &PipelineConfig, rng: &mut R) -> Result<Vec<BinaryMask>> {
    let labels = scene.render_labels();
    match mode {
        SegmenterMode::Baseline => Ok(undersegment(&labels, &cfg.segmenter, rng)),
        SegmenterMode::Refined => {
            if scene.objects.is_empty() {
                return Ok(Vec::new());
            }
            let ep = run_episode_from_scene(scene.clone(), &cfg.sim, &cfg.segmenter, rng)?;
            let segs = segment_frames(&ep.labels, &cfg.segmenter, rng);
            let out = match cfg.flow {
                FlowMode::Oracle => label_sequence(&segs, &ep.flows, &cfg.label)?,
                FlowMode::Blockmatch => label_sequence(&segs, &blockmatch_flows(&ep.appearance, &cfg.blockmatch)?, &cfg.label)?,
            };
            let fg = labels.foreground();
            let mut masks = Vec::new();
            for (_, m) in out.labels[0].masks() {
                let m = m.intersection(&fg)?;
                if m.area() >= 3 {
                    masks.push(m);
                }
            }
            Ok(masks)
        }
    }
}

/// One grasp attempt inside a pick trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub target_id: u16,
    pub mask_area: usize,
    pub pose: GraspPose,
    pub outcome: GraspOutcome,
}

/// One pick-and-place trial: up to `1 + retry_budget` attempts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickTrial {
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
    pub attempts: Vec<AttemptRecord>,
}

/// Outcome of clearing one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub mode: SegmenterMode,
    pub n_objects: usize,
    pub hard_failure: bool,
    pub successes: usize,
    pub trials: Vec<PickTrial>,
}

struct Plan {
    target_id: u16,
    mask_area: usize,
    pose: GraspPose,
}

fn plan_all(scene: &Scene, masks: &[BinaryMask]) -> Result<Vec<Plan>> {
    let mut order: Vec<usize> = (0..masks.len()).filter(|&i| masks[i].area() >= 3).collect();
    order.sort_by(|&a, &b| masks[b].area().cmp(&masks[a].area()).then(a.cmp(&b)));
    order
        .into_iter()
        .map(|i| {
            Ok(Plan {
                target_id: resolve_target(scene, &masks[i])?,
                mask_area: masks[i].area(),
                pose: plan_grasp(&masks[i])?,
            })
        })
        .collect()
}

/// Clear a table one object per trial.
///
/// Each trial perceives the current scene, plans a grasp per mask and tries
/// them in descending mask-area order until one succeeds or the retry budget
/// runs out. Targets that failed are skipped until a pick changes the scene.
/// If no mask of the initial scene admits a successful grasp the
/// scene is a hard failure and every trial scores zero.
pub fn clear_table<R: Rng + ?Sized>(scene: &Scene, mode: SegmenterMode, cfg: &PipelineConfig, rng: &mut R) -> Result<TrialRecord> {
    cfg.validate()?;
    let n = scene.objects.len();
    let mut scene = scene.clone();
    let mut record = TrialRecord {
        mode,
        n_objects: n,
        hard_failure: false,
        successes: 0,
        trials: Vec::with_capacity(n),
    };
    if n == 0 {
        return Ok(record);
    }

    let masks = perceive(&scene, mode, cfg, rng)?;
    let mut plans = plan_all(&scene, &masks)?;
    let labels = scene.render_labels();
    if !plans.iter().any(|p| judge(&labels, p.target_id, &p.pose, &cfg.grasp).success) {
        record.hard_failure = true;
        record.trials = (0..n)
            .map(|_| PickTrial {
                success: false,
                failure_reason: Some(FailureReason::HardFailure),
                attempts: Vec::new(),
            })
            .collect();
        return Ok(record);
    }

    // targets whose grasp already failed since the scene last changed
    let mut failed: Vec<u16> = Vec::new();
    for trial in 0..n {
        if trial > 0 {
            let masks = perceive(&scene, mode, cfg, rng)?;
            plans = plan_all(&scene, &masks)?;
        }
        let mut pick = PickTrial {
            success: false,
            failure_reason: Some(FailureReason::TargetMissed),
            attempts: Vec::new(),
        };
        let candidates: Vec<&Plan> = plans.iter().filter(|p| !failed.contains(&p.target_id)).take(1 + cfg.grasp.retry_budget).collect();
        for p in candidates {
            let outcome = attempt_grasp(&mut scene, p.target_id, &p.pose, &cfg.grasp)?;
            pick.attempts.push(AttemptRecord {
                target_id: p.target_id,
                mask_area: p.mask_area,
                pose: p.pose,
                outcome,
            });
            pick.success = outcome.success;
            pick.failure_reason = outcome.failure_reason;
            if outcome.success {
                failed.clear();
                break;
            }
            failed.push(p.target_id);
        }
        record.successes += pick.success as usize;
        record.trials.push(pick);
    }
    Ok(record)
}

/// Packing density of a benchmark scene: surface gaps drawn from
/// `[gap_min, gap_max]` pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClutterLevel {
    pub name: &'static str,
    pub gap_min: f64,
    pub gap_max: f64,
}

/// Benchmark levels, most cluttered first.
pub const CLUTTER_LEVELS: [ClutterLevel; 4] = [
    ClutterLevel {
        name: "packed",
        gap_min: 1.0,
        gap_max: 3.0,
    },
    ClutterLevel {
        name: "tight",
        gap_min: 2.0,
        gap_max: 4.0,
    },
    ClutterLevel {
        name: "loose",
        gap_min: 4.0,
        gap_max: 8.0,
    },
    ClutterLevel {
        name: "separated",
        gap_min: 15.0,
        gap_max: 25.0,
    },
];

/// Scene seeds for the benchmark: `base_seed + level * scenes_per_level + k`.
pub fn bench_seed(base_seed: u64, level: usize, scenes_per_level: usize, k: usize) -> u64 {
    base_seed.wrapping_add((level * scenes_per_level + k) as u64)
}

/// One benchmark scene cleared in one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchScene {
    pub level: String,
    pub seed: u64,
    pub record: TrialRecord,
}

/// Sample the scene for `seed` at `level` and clear it. Both modes see the
/// same scene and the same random stream for a given seed.
pub fn bench_scene(cfg: &PipelineConfig, level: &ClutterLevel, seed: u64, mode: SegmenterMode) -> Result<BenchScene> {
    let mut sim = cfg.sim.clone();
    sim.init_gap_min = level.gap_min;
    sim.init_gap_max = level.gap_max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = sample_scene(&sim, &mut rng)?;
    let record = clear_table(&scene, mode, cfg, &mut rng)?;
    Ok(BenchScene {
        level: level.name.into(),
        seed,
        record,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTotal {
    pub level: Option<String>,
    pub mode: SegmenterMode,
    pub scenes: usize,
    pub trials: usize,
    pub successes: usize,
    pub hard_failures: usize,
}

/// Benchmark results with totals per mode and per (level, mode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenes: Vec<BenchScene>,
    pub totals: Vec<BenchTotal>,
    pub levels: Vec<BenchTotal>,
}

impl BenchReport {
    pub fn from_scenes(scenes: Vec<BenchScene>) -> Self {
        let mut totals: Vec<BenchTotal> = Vec::new();
        let mut levels: Vec<BenchTotal> = Vec::new();
        for s in &scenes {
            for (bucket, level) in [(&mut totals, None), (&mut levels, Some(&s.level))] {
                let i = match bucket.iter().position(|t| t.mode == s.record.mode && t.level.as_ref() == level) {
                    Some(i) => i,
                    None => {
                        bucket.push(BenchTotal {
                            level: level.cloned(),
                            mode: s.record.mode,
                            scenes: 0,
                            trials: 0,
                            successes: 0,
                            hard_failures: 0,
                        });
                        bucket.len() - 1
                    }
                };
                let t = &mut bucket[i];
                t.scenes += 1;
                t.trials += s.record.n_objects;
                t.successes += s.record.successes;
                t.hard_failures += s.record.hard_failure as usize;
            }
        }
        BenchReport { scenes, totals, levels }
    }

    pub fn total(&self, mode: SegmenterMode) -> Option<&BenchTotal> {
        self.totals.iter().find(|t| t.mode == mode)
    }

    pub fn level_total(&self, level: &str, mode: SegmenterMode) -> Option<&BenchTotal> {
        self.levels.iter().find(|t| t.mode == mode && t.level.as_deref() == Some(level))
    }
}

/// Every level, `scenes_per_level` scenes each, both modes on paired seeds.
pub fn grasp_bench(cfg: &PipelineConfig, base_seed: u64, scenes_per_level: usize) -> Result<BenchReport> {
    let mut scenes = Vec::new();
    for (li, level) in CLUTTER_LEVELS.iter().enumerate() {
        for k in 0..scenes_per_level {
            let seed = bench_seed(base_seed, li, scenes_per_level, k);
            for mode in [SegmenterMode::Baseline, SegmenterMode::Refined] {
                scenes.push(bench_scene(cfg, level, seed, mode)?);
            }
        }
    }
    Ok(BenchReport::from_scenes(scenes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::sim::{ObjectShape, ObjectState};
    use core::f64::consts::{FRAC_PI_2, PI};

    fn angle_diff(a: f64, b: f64) -> f64 {
        let d = wrap_half_turn(a - b);
        d.min(PI - d)
    }

    fn rect_scene(objs: &[(f64, f64, f64, f64)]) -> Scene {
        let mut s = Scene::new(128, 128);
        for (i, &(x, y, hx, hy)) in objs.iter().enumerate() {
            s.objects.push(ObjectState::new((i + 1) as u16, ObjectShape::Rectangle { hx, hy }, Vec2::new(x, y), 0.0));
        }
        s
    }

    #[test]
    fn long_rectangle_closes_across_its_short_side() {
        let g = plan_grasp(&BinaryMask::rect(64, 64, 10, 20, 40, 10)).unwrap();
        assert!((g.theta - FRAC_PI_2).abs() < 1e-6);
        assert!((g.width - 10.0).abs() < 0.5);
        assert_eq!(g.center, (29.5, 24.5));
    }

    #[test]
    fn disc_uses_the_isotropic_tie_break() {
        let m = BinaryMask::from_fn(32, 32, |x, y| {
            let (dx, dy) = (x as f64 - 16.0, y as f64 - 16.0);
            dx * dx + dy * dy <= 5.5 * 5.5
        });
        let g = plan_grasp(&m).unwrap();
        assert_eq!(g.theta, 0.0);
        assert!((g.width - 11.0).abs() < 0.5);
    }

    /// Minor eigenvector of the covariance, from `(A - λI)v = 0` with raw
    /// moments rather than centred sums.
    fn oracle_minor_axis(pts: &[(f64, f64)]) -> (f64, f64, f64) {
        let n = pts.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in pts {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
        }
        let a = sxx / n - (sx / n) * (sx / n);
        let b = sxy / n - (sx / n) * (sy / n);
        let c = syy / n - (sy / n) * (sy / n);
        let mid = (a + c) / 2.0;
        let r = (((a - c) / 2.0).powi(2) + b * b).sqrt();
        let (lo, hi) = (mid - r, mid + r);
        let v = if a - lo > c - lo { (lo - c, b) } else { (b, lo - a) };
        (v.1.atan2(v.0), lo, hi)
    }

    #[test]
    fn l_shape_matches_covariance_oracle() {
        let mut m = BinaryMask::rect(64, 64, 10, 10, 30, 6);
        m.union_with(&BinaryMask::rect(64, 64, 10, 10, 6, 18)).unwrap();
        let pts: Vec<(f64, f64)> = m.iter().map(|(x, y)| (x as f64, y as f64)).collect();
        let (angle, lo, hi) = oracle_minor_axis(&pts);
        assert!(lo < hi);
        let g = plan_grasp(&m).unwrap();
        assert!(angle_diff(g.theta, angle) < 1e-6, "{} vs {}", g.theta, angle);
        // variance along the closing axis is the smaller eigenvalue
        let var = |t: f64| {
            let (u, v) = (t.cos(), t.sin());
            let n = pts.len() as f64;
            let mean = pts.iter().map(|p| p.0 * u + p.1 * v).sum::<f64>() / n;
            pts.iter().map(|p| (p.0 * u + p.1 * v - mean).powi(2)).sum::<f64>() / n
        };
        assert!((var(g.theta) - lo).abs() < 1e-9);
        assert!((var(g.theta + FRAC_PI_2) - hi).abs() < 1e-9);
    }

    #[test]
    fn tiny_masks_are_rejected() {
        assert_eq!(plan_grasp(&BinaryMask::new(8, 8)), Err(Error::EmptyMask));
        assert_eq!(plan_grasp(&BinaryMask::rect(8, 8, 1, 1, 2, 1)), Err(Error::DegenerateMask { area: 2 }));
        let line = plan_grasp(&BinaryMask::rect(8, 8, 1, 1, 5, 1)).unwrap();
        assert!((line.theta - FRAC_PI_2).abs() < 1e-12);
        assert!((line.width - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isolated_rectangle_is_picked() {
        let mut s = rect_scene(&[(40.0, 40.0, 15.0, 5.0), (90.0, 90.0, 6.0, 6.0)]);
        let m = s.render_labels().mask(1);
        let g = plan_grasp(&m).unwrap();
        let out = attempt_grasp(&mut s, 1, &g, &GraspParams::default()).unwrap();
        assert_eq!(out, GraspOutcome::SUCCESS);
        assert_eq!(s.ids(), [2]);
    }

    #[test]
    fn wide_object_exceeds_the_opening() {
        let mut s = rect_scene(&[(64.0, 64.0, 35.0, 35.0)]);
        let g = plan_grasp(&s.render_labels().mask(1)).unwrap();
        assert!(g.width > 60.0);
        let out = attempt_grasp(&mut s, 1, &g, &GraspParams::default()).unwrap();
        assert_eq!(out.failure_reason, Some(FailureReason::WidthExceeded));
        assert_eq!(s.ids(), [1]);
    }

    #[test]
    fn unknown_target_is_an_error() {
        let mut s = rect_scene(&[(40.0, 40.0, 5.0, 5.0)]);
        let g = GraspPose {
            center: (40.0, 40.0),
            theta: 0.0,
            width: 10.0,
        };
        assert_eq!(attempt_grasp(&mut s, 7, &g, &GraspParams::default()), Err(Error::UnknownObject(7)));
    }

    #[test]
    fn merged_mask_grasp_fails_on_abutting_pair() {
        // two 10x20 rectangles side by side with a one pixel gap
        let s = rect_scene(&[(40.0, 60.0, 4.5, 9.5), (51.0, 60.0, 4.5, 9.5)]);
        let labels = s.render_labels();
        let merged = labels.foreground();
        let g = plan_grasp(&merged).unwrap();
        let params = GraspParams::default();
        for target in [1u16, 2] {
            let mut s2 = s.clone();
            let out = attempt_grasp(&mut s2, target, &g, &params).unwrap();
            // brute force over the whole raster
            let inner = g.width / 2.0 + params.clearance;
            let outer = inner + params.finger_thickness;
            let (u, v) = g.axis();
            let other = if target == 1 { 2 } else { 1 };
            let mut touches_other = false;
            let mut hits_target = false;
            for y in 0..128usize {
                for x in 0..128usize {
                    let (dx, dy) = (x as f64 - g.center.0, y as f64 - g.center.1);
                    let a = (dx * u + dy * v).abs();
                    let b = (-dx * v + dy * u).abs();
                    let id = labels.get(x, y);
                    touches_other |= id == other && a <= outer && b <= params.finger_length / 2.0;
                    hits_target |= id == target && a <= inner && b <= 0.5;
                }
            }
            assert!(touches_other || !hits_target);
            assert!(!out.success);
            assert!(matches!(out.failure_reason, Some(FailureReason::FingerCollision | FailureReason::TargetMissed)));
        }
    }

    #[test]
    fn separated_scene_clears_in_both_modes() {
        let s = rect_scene(&[(20.0, 20.0, 8.0, 5.0), (100.0, 20.0, 6.0, 10.0), (20.0, 100.0, 7.0, 7.0), (100.0, 100.0, 12.0, 5.0), (60.0, 60.0, 9.0, 6.0)]);
        let mut cfg = PipelineConfig::default();
        cfg.sim.width = 128;
        cfg.sim.height = 128;
        cfg.sim.n_pushes = 3;
        for mode in [SegmenterMode::Baseline, SegmenterMode::Refined] {
            let r = clear_table(&s, mode, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert!(!r.hard_failure);
            assert_eq!(r.successes, 5, "{mode:?}");
            assert_eq!(r.trials.len(), 5);
        }
    }

    #[test]
    fn packed_chain_is_a_baseline_hard_failure() {
        // five bars two pixels apart merge into one block; its grasp centre
        // lies on the middle bar, not on the resolved target
        let s = rect_scene(&[(40.0, 60.0, 5.5, 19.5), (53.0, 60.0, 5.5, 19.5), (66.0, 60.0, 5.5, 19.5), (79.0, 60.0, 5.5, 19.5), (92.0, 60.0, 5.5, 19.5)]);
        let mut cfg = PipelineConfig::default();
        cfg.sim.width = 128;
        cfg.sim.height = 128;
        let r = clear_table(&s, SegmenterMode::Baseline, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(r.hard_failure);
        assert_eq!(r.successes, 0);
        assert!(r.trials.iter().all(|t| t.failure_reason == Some(FailureReason::HardFailure)));
    }

    #[test]
    fn attempts_stay_within_budget() {
        let mut cfg = PipelineConfig::default();
        cfg.sim.n_pushes = 4;
        for seed in 0..4 {
            let r = bench_scene(&cfg, &CLUTTER_LEVELS[1], seed, SegmenterMode::Baseline).unwrap();
            let attempts: usize = r.record.trials.iter().map(|t| t.attempts.len()).sum();
            assert!(attempts <= r.record.n_objects * (1 + cfg.grasp.retry_budget));
            assert!(r.record.successes <= r.record.n_objects);
            assert_eq!(r.record.trials.len(), r.record.n_objects);
        }
    }

    #[test]
    fn report_totals_add_up() {
        let mk = |level: &str, mode, successes, hard| BenchScene {
            level: level.into(),
            seed: 0,
            record: TrialRecord {
                mode,
                n_objects: 5,
                hard_failure: hard,
                successes,
                trials: Vec::new(),
            },
        };
        let r = BenchReport::from_scenes(alloc::vec![
            mk("a", SegmenterMode::Baseline, 0, true),
            mk("a", SegmenterMode::Refined, 3, false),
            mk("b", SegmenterMode::Baseline, 5, false),
            mk("b", SegmenterMode::Refined, 4, false),
        ]);
        let b = r.total(SegmenterMode::Baseline).unwrap();
        assert_eq!((b.scenes, b.trials, b.successes, b.hard_failures), (2, 10, 5, 1));
        assert_eq!(r.level_total("a", SegmenterMode::Refined).unwrap().successes, 3);
        assert_eq!(r.levels.len(), 4);
    }

    fn blob_strategy() -> impl proptest::strategy::Strategy<Value = Vec<(f64, f64)>> {
        use proptest::strategy::Strategy;
        proptest::collection::vec((0usize..20, 0usize..20, 1usize..12, 1usize..12), 1..4).prop_map(|rects| {
            let mut m = BinaryMask::new(40, 40);
            for (x, y, w, h) in rects {
                m.union_with(&BinaryMask::rect(40, 40, x, y, w, h)).unwrap();
            }
            m.iter().map(|(x, y)| (x as f64, y as f64)).collect()
        })
    }

    proptest::proptest! {
        #[test]
        fn rotation_equivariance(pts in blob_strategy(), phi in 0.0..core::f64::consts::TAU) {
            proptest::prop_assume!(pts.len() >= 3);
            let g = plan_grasp_points(&pts).unwrap();
            let (_, lo, hi) = oracle_minor_axis(&pts);
            proptest::prop_assume!(hi - lo > 1e-3 * (hi + lo));
            let (s, c) = phi.sin_cos();
            let rot: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (c * x - s * y, s * x + c * y)).collect();
            let r = plan_grasp_points(&rot).unwrap();
            proptest::prop_assert!(angle_diff(r.theta, g.theta + phi) < 1e-6);
            proptest::prop_assert!((r.width - g.width).abs() <= 1.0);
        }

        #[test]
        fn translation_equivariance(pts in blob_strategy(), dx in 0i64..20, dy in 0i64..20) {
            proptest::prop_assume!(pts.len() >= 3);
            let m = BinaryMask::from_pixels(40, 40, pts.iter().map(|p| (p.0 as usize, p.1 as usize))).unwrap();
            let big = BinaryMask::from_pixels(64, 64, m.iter()).unwrap();
            let g = plan_grasp(&big).unwrap();
            let t = plan_grasp(&big.translated(dx, dy)).unwrap();
            proptest::prop_assert!((t.center.0 - g.center.0 - dx as f64).abs() < 1e-9);
            proptest::prop_assert!((t.center.1 - g.center.1 - dy as f64).abs() < 1e-9);
            proptest::prop_assert!(angle_diff(t.theta, g.theta) < 1e-9);
            proptest::prop_assert!((t.width - g.width).abs() < 1e-9);
        }
    }
}
