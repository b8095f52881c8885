use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::object::ObjectState;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::maskcore::{FlowField, GrayImage, LabelImage};

/// A tabletop state: workspace size plus the objects on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<ObjectState>,
}

impl Scene {
    pub fn new(width: usize, height: usize) -> Self {
        Scene {
            width,
            height,
            objects: Vec::new(),
        }
    }

    pub fn object(&self, id: u16) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: u16) -> Option<&mut ObjectState> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn remove(&mut self, id: u16) -> Option<ObjectState> {
        let i = self.objects.iter().position(|o| o.id == id)?;
        Some(self.objects.remove(i))
    }

    pub fn ids(&self) -> Vec<u16> {
        let mut ids: Vec<u16> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        ids
    }

    /// First overlapping pair, if any.
    pub fn find_overlap(&self) -> Option<(u16, u16)> {
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                if a.overlaps(b) {
                    return Some((a.id, b.id));
                }
            }
        }
        None
    }

    pub fn all_inside(&self) -> bool {
        self.objects.iter().all(|o| o.inside(self.width, self.height))
    }

    /// Ground-truth labels and the textured appearance image.
    pub fn render(&self) -> (LabelImage, GrayImage) {
        let mut labels = LabelImage::new(self.width, self.height);
        let mut app = GrayImage::new(self.width, self.height);
        for obj in &self.objects {
            for (x, y) in footprint_pixels(obj, self.width, self.height) {
                let p = Vec2::new(x as f64, y as f64);
                labels.set(x, y, obj.id);
                app.set(x, y, appearance(obj.id, obj.to_local(p)));
            }
        }
        (labels, app)
    }

    pub fn render_labels(&self) -> LabelImage {
        self.render().0
    }
}

/// Pixels whose centre lies inside the object's footprint.
pub fn footprint_pixels(
    obj: &ObjectState,
    width: usize,
    height: usize,
) -> impl Iterator<Item = (usize, usize)> + '_ {
    let b = obj.aabb();
    let x0 = libm::ceil(b.min.x).max(0.0) as usize;
    let y0 = libm::ceil(b.min.y).max(0.0) as usize;
    let x1 = (libm::floor(b.max.x).min((width - 1) as f64)).max(-1.0) as i64;
    let y1 = (libm::floor(b.max.y).min((height - 1) as f64)).max(-1.0) as i64;
    (y0 as i64..=y1).flat_map(move |y| {
        (x0 as i64..=x1).filter_map(move |x| {
            obj.contains(Vec2::new(x as f64, y as f64))
                .then_some((x as usize, y as usize))
        })
    })
}

/// Intensity of an object-frame point: an id-specific base level plus a
/// texture fixed to the object so that block matching has something to lock
/// onto inside the footprint. Never 0, which is reserved for background.
pub fn appearance(id: u16, local: Vec2) -> u8 {
    let base = 32 + ((id as u32).wrapping_sub(1) % 9) * 24;
    let tx = libm::floor(local.x / 2.0) as i64;
    let ty = libm::floor(local.y / 2.0) as i64;
    let h = mix(id as u64 ^ (tx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (ty as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
    (base as i64 + (h % 17) as i64 - 8) as u8
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ground-truth forward (`from` to `to`) and backward flow for a rigid pose
/// change of every object. Background pixels carry zero flow.
pub fn oracle_flow(from: &Scene, to: &Scene) -> Result<(FlowField, FlowField)> {
    if from.ids() != to.ids() {
        return Err(Error::IdMismatch);
    }
    if (from.width, from.height) != (to.width, to.height) {
        return Err(Error::dims((from.width, from.height), (to.width, to.height)));
    }
    Ok((rigid_flow(from, to), rigid_flow(to, from)))
}

fn rigid_flow(src: &Scene, dst: &Scene) -> FlowField {
    let labels = src.render_labels();
    let mut flow = FlowField::zeros(src.width, src.height);
    for a in &src.objects {
        let b = dst.object(a.id).expect("id sets checked");
        for (x, y) in footprint_pixels(a, src.width, src.height) {
            if labels.get(x, y) != a.id {
                continue;
            }
            let p = Vec2::new(x as f64, y as f64);
            let q = b.to_world(a.to_local(p));
            flow.set(x, y, (q.x - p.x) as f32, (q.y - p.y) as f32);
        }
    }
    flow
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::object::ObjectShape;

    fn disc_scene(r: f64) -> Scene {
        let mut s = Scene::new(64, 64);
        s.objects.push(ObjectState::new(
            1,
            ObjectShape::Disc { radius: r },
            Vec2::new(32.0, 32.0),
            0.0,
        ));
        s
    }

    #[test]
    fn empty_scene_renders_background() {
        let (l, a) = Scene::new(16, 16).render();
        assert!(l.ids().is_empty());
        assert!(a.as_slice().iter().all(|&v| v == 0));
    }

    #[test]
    fn disc_area_matches_lattice_count() {
        // oracle: count integer points with x^2 + y^2 <= 25
        let oracle = (-5i32..=5)
            .flat_map(|x| (-5i32..=5).map(move |y| (x, y)))
            .filter(|(x, y)| x * x + y * y <= 25)
            .count();
        assert_eq!(oracle, 81);
        let (labels, app) = disc_scene(5.0).render();
        let m = labels.mask(1);
        assert_eq!(m.area(), oracle);
        assert_eq!(m.connected_components().len(), 1);
        assert!((69..=89).contains(&m.area()));
        assert!(m.iter().all(|(x, y)| app.get(x, y) != 0));
    }

    #[test]
    fn two_rectangles_two_ids() {
        let mut s = Scene::new(64, 64);
        for (id, x) in [(1u16, 15.0), (2, 45.0)] {
            s.objects.push(ObjectState::new(
                id,
                ObjectShape::Rectangle { hx: 5.0, hy: 3.0 },
                Vec2::new(x, 30.0),
                0.2,
            ));
        }
        assert_eq!(s.render_labels().ids(), vec![1, 2]);
    }

    #[test]
    fn appearance_distinct_bases() {
        let bases: Vec<u32> = (1u32..=9).map(|id| 32 + ((id - 1) % 9) * 24).collect();
        for (i, a) in bases.iter().enumerate() {
            for b in &bases[i + 1..] {
                assert!(a.abs_diff(*b) > 16);
            }
        }
        for id in 1..20u16 {
            for k in 0..50 {
                let v = appearance(id, Vec2::new(k as f64 * 1.3 - 30.0, k as f64 * 0.7));
                assert!(v > 0);
            }
        }
    }

    #[test]
    fn oracle_flow_identity_and_translation() {
        let s = disc_scene(6.0);
        let (f, b) = oracle_flow(&s, &s).unwrap();
        assert!(f.as_slice().iter().all(|uv| *uv == [0.0, 0.0]));
        assert_eq!(f, b);

        let mut t = s.clone();
        t.objects[0].position.x += 4.0;
        let (f, _) = oracle_flow(&s, &t).unwrap();
        let m = s.render_labels().mask(1);
        for y in 0..64 {
            for x in 0..64 {
                let expect = if m.contains(x, y) { (4.0, 0.0) } else { (0.0, 0.0) };
                assert_eq!(f.get(x, y), expect);
            }
        }
    }

    #[test]
    fn oracle_flow_rotation_quarter_turn() {
        let mut s = Scene::new(64, 64);
        s.objects.push(ObjectState::new(
            1,
            ObjectShape::Rectangle { hx: 9.0, hy: 3.5 },
            Vec2::new(30.3, 31.6),
            0.1,
        ));
        let mut t = s.clone();
        t.objects[0].rotation += core::f64::consts::FRAC_PI_2;
        let (f, _) = oracle_flow(&s, &t).unwrap();
        let c = s.objects[0].position;
        for (x, y) in s.render_labels().mask(1).iter() {
            let p = Vec2::new(x as f64, y as f64);
            // direct pose transform: rotate about the centre by +90 degrees
            let d = p - c;
            let q = Vec2::new(c.x - d.y, c.y + d.x);
            let (u, v) = f.get(x, y);
            let landed = Vec2::new(x as f64 + u as f64, y as f64 + v as f64);
            assert!((landed - q).norm() < 0.5, "{x},{y}");
        }
    }

    #[test]
    fn oracle_flow_rejects_id_mismatch() {
        let s = disc_scene(5.0);
        let mut t = s.clone();
        t.objects[0].id = 2;
        assert_eq!(oracle_flow(&s, &t), Err(Error::IdMismatch));
    }
}
