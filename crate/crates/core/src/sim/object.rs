use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// Footprint of a rigid tabletop object. Dimensions are in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectShape {
    Disc { radius: f64 },
    Rectangle { hx: f64, hy: f64 },
}

impl ObjectShape {
    pub fn area(&self) -> f64 {
        match *self {
            ObjectShape::Disc { radius } => core::f64::consts::PI * radius * radius,
            ObjectShape::Rectangle { hx, hy } => 4.0 * hx * hy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: u16,
    pub shape: ObjectShape,
    pub position: Vec2,
    pub rotation: f64,
}

/// Axis-aligned bounds in continuous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl ObjectState {
    pub fn new(id: u16, shape: ObjectShape, position: Vec2, rotation: f64) -> Self {
        ObjectState {
            id,
            shape,
            position,
            rotation,
        }
    }

    /// World point expressed in the object frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.position).rotated(-self.rotation)
    }

    /// Object-frame point expressed in world coordinates.
    pub fn to_world(&self, local: Vec2) -> Vec2 {
        local.rotated(self.rotation) + self.position
    }

    /// Closed-footprint membership of a point (pixel centres are integer
    /// coordinates).
    pub fn contains(&self, p: Vec2) -> bool {
        match self.shape {
            ObjectShape::Disc { radius } => {
                let d = p - self.position;
                d.dot(d) <= radius * radius
            }
            ObjectShape::Rectangle { hx, hy } => {
                let l = self.to_local(p);
                libm::fabs(l.x) <= hx && libm::fabs(l.y) <= hy
            }
        }
    }

    pub fn aabb(&self) -> Aabb {
        let (ex, ey) = match self.shape {
            ObjectShape::Disc { radius } => (radius, radius),
            ObjectShape::Rectangle { hx, hy } => {
                let (c, s) = (
                    libm::fabs(libm::cos(self.rotation)),
                    libm::fabs(libm::sin(self.rotation)),
                );
                (hx * c + hy * s, hx * s + hy * c)
            }
        };
        Aabb {
            min: Vec2::new(self.position.x - ex, self.position.y - ey),
            max: Vec2::new(self.position.x + ex, self.position.y + ey),
        }
    }

    /// Whether the footprint lies within the pixel-centre range of a
    /// `width` x `height` workspace.
    pub fn inside(&self, width: usize, height: usize) -> bool {
        const EPS: f64 = 1e-9;
        let b = self.aabb();
        b.min.x >= -EPS
            && b.min.y >= -EPS
            && b.max.x <= (width - 1) as f64 + EPS
            && b.max.y <= (height - 1) as f64 + EPS
    }

    /// Shift the object the minimal amount that brings its footprint inside
    /// the workspace.
    pub fn clamp_inside(&mut self, width: usize, height: usize) {
        let b = self.aabb();
        let (wx, wy) = ((width - 1) as f64, (height - 1) as f64);
        if b.min.x < 0.0 {
            self.position.x -= b.min.x;
        } else if b.max.x > wx {
            self.position.x -= b.max.x - wx;
        }
        if b.min.y < 0.0 {
            self.position.y -= b.min.y;
        } else if b.max.y > wy {
            self.position.y -= b.max.y - wy;
        }
    }

    /// Closed-set intersection test; touching footprints overlap.
    pub fn overlaps(&self, other: &ObjectState) -> bool {
        use ObjectShape::*;
        match (self.shape, other.shape) {
            (Disc { radius: r1 }, Disc { radius: r2 }) => {
                let d = self.position - other.position;
                d.dot(d) <= (r1 + r2) * (r1 + r2)
            }
            (Disc { radius }, Rectangle { hx, hy }) => disc_rect(self.position, radius, other, hx, hy),
            (Rectangle { hx, hy }, Disc { radius }) => disc_rect(other.position, radius, self, hx, hy),
            (Rectangle { .. }, Rectangle { .. }) => rect_rect(self, other),
        }
    }

    /// Smallest `t >= 0` such that `self` translated by `t * dir` no longer
    /// overlaps `fixed`.
    pub fn separation_along(&self, fixed: &ObjectState, dir: Vec2) -> f64 {
        if !self.overlaps(fixed) {
            return 0.0;
        }
        let at = |t: f64| {
            let mut m = *self;
            m.position += dir * t;
            m.overlaps(fixed)
        };
        let mut lo = 0.0;
        let mut hi = 0.5;
        while at(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1.0e6 {
                return hi;
            }
        }
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn disc_rect(center: Vec2, radius: f64, rect: &ObjectState, hx: f64, hy: f64) -> bool {
    let l = rect.to_local(center);
    let cx = l.x.clamp(-hx, hx);
    let cy = l.y.clamp(-hy, hy);
    let (dx, dy) = (l.x - cx, l.y - cy);
    dx * dx + dy * dy <= radius * radius
}

fn rect_axes(o: &ObjectState) -> [Vec2; 2] {
    let u = Vec2::from_angle(o.rotation);
    [u, u.perp()]
}

fn rect_radius(o: &ObjectState, axis: Vec2) -> f64 {
    let ObjectShape::Rectangle { hx, hy } = o.shape else {
        unreachable!()
    };
    let [u, v] = rect_axes(o);
    hx * libm::fabs(u.dot(axis)) + hy * libm::fabs(v.dot(axis))
}

fn rect_rect(a: &ObjectState, b: &ObjectState) -> bool {
    let d = b.position - a.position;
    let [a0, a1] = rect_axes(a);
    let [b0, b1] = rect_axes(b);
    [a0, a1, b0, b1]
        .iter()
        .all(|&axis| libm::fabs(d.dot(axis)) <= rect_radius(a, axis) + rect_radius(b, axis))
}
