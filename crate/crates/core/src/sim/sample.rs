use rand::Rng;

use super::object::{ObjectShape, ObjectState};
use super::scene::Scene;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geom::Vec2;

const PLACEMENT_ATTEMPTS: usize = 500;
const SHAPE_ATTEMPTS: usize = 64;

/// Draw a footprint whose extents and area fall in the configured ranges.
pub fn sample_shape<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> ObjectShape {
    let pi = core::f64::consts::PI;
    let r_lo = (cfg.min_extent / 2.0).max(libm::sqrt(cfg.min_area / pi));
    let r_hi = (cfg.max_extent / 2.0).min(libm::sqrt(cfg.max_area / pi));
    if rng.gen_bool(0.5) && r_lo <= r_hi {
        let area = rng.gen_range(pi * r_lo * r_lo..=pi * r_hi * r_hi);
        return ObjectShape::Disc {
            radius: libm::sqrt(area / pi),
        };
    }
    for _ in 0..SHAPE_ATTEMPTS {
        let sx = rng.gen_range(cfg.min_extent..=cfg.max_extent);
        let area = rng.gen_range(cfg.min_area..=cfg.max_area);
        let sy = area / sx;
        if (cfg.min_extent..=cfg.max_extent).contains(&sy) {
            return ObjectShape::Rectangle {
                hx: sx / 2.0,
                hy: sy / 2.0,
            };
        }
    }
    // Square of the geometric mean area; always satisfies validated ranges.
    let side = libm::sqrt(libm::sqrt(cfg.min_area * cfg.max_area)).clamp(cfg.min_extent, cfg.max_extent);
    ObjectShape::Rectangle {
        hx: side / 2.0,
        hy: side / 2.0,
    }
}

/// Build a cluttered scene: the first object sits at the workspace centre and
/// every further object is dropped next to a random member of the cluster,
/// leaving a surface gap drawn from `[init_gap_min, init_gap_max]` along the
/// placement ray.
pub fn sample_scene<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Scene> {
    cfg.validate()?;
    let mut scene = Scene::new(cfg.width, cfg.height);
    let first = ObjectState::new(
        1,
        sample_shape(cfg, rng),
        cfg.center(),
        rng.gen_range(0.0..core::f64::consts::PI),
    );
    if !first.inside(cfg.width, cfg.height) {
        return Err(Error::PlacementFailed {
            index: 0,
            attempts: 1,
        });
    }
    scene.objects.push(first);

    for index in 1..cfg.n_objects {
        let id = (index + 1) as u16;
        let shape = sample_shape(cfg, rng);
        let rotation = rng.gen_range(0.0..core::f64::consts::PI);
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let anchor = scene.objects[rng.gen_range(0..scene.objects.len())];
            let dir = Vec2::from_angle(rng.gen_range(0.0..core::f64::consts::TAU));
            let gap = rng.gen_range(cfg.init_gap_min..=cfg.init_gap_max);
            let mut cand = ObjectState::new(id, shape, anchor.position, rotation);
            let touch = cand.separation_along(&anchor, dir);
            cand.position += dir * (touch + gap);
            if cand.inside(cfg.width, cfg.height)
                && scene.objects.iter().all(|o| !o.overlaps(&cand))
            {
                scene.objects.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementFailed {
                index,
                attempts: PLACEMENT_ATTEMPTS,
            });
        }
    }
    Ok(scene)
}
