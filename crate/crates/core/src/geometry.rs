//! Segment/box blockage, reflecting faces, and vertical edges of prisms.

use crate::math::{Vec3, abs};
use crate::scene::Prism;

/// Tolerance for "strictly inside" tests, meters.
pub const EPS: f64 = 1e-7;

/// True when the open segment `a → b` passes through the interior of `prism`.
///
/// The box is shrunk by [`EPS`] on every side, so segments that run along a
/// face or touch an edge do not count.
pub fn segment_hits_interior(a: Vec3, b: Vec3, prism: &Prism) -> bool {
    segment_hits_box(a, b, prism, -EPS)
}

/// Closed-box test with the box grown by `inflate` meters on every side.
pub fn segment_hits_box(a: Vec3, b: Vec3, prism: &Prism, inflate: f64) -> bool {
    let d = b - a;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for axis in 0..3 {
        let lo = prism.min.component(axis) - inflate;
        let hi = prism.max.component(axis) + inflate;
        if lo > hi {
            return false;
        }
        let o = a.component(axis);
        let v = d.component(axis);
        if v == 0.0 {
            if o < lo || o > hi {
                return false;
            }
            continue;
        }
        let inv = 1.0 / v;
        let (mut ta, mut tb) = ((lo - o) * inv, (hi - o) * inv);
        if ta > tb {
            core::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

pub fn segment_blocked(a: Vec3, b: Vec3, prisms: &[Prism]) -> bool {
    prisms.iter().any(|p| segment_hits_interior(a, b, p))
}

/// `true` when the polyline through `points` is clear of every prism.
pub fn polyline_clear(points: &[Vec3], prisms: &[Prism]) -> bool {
    points
        .windows(2)
        .all(|w| !segment_blocked(w[0], w[1], prisms))
}

/// Vertical wall of a prism, lying in the plane `axis = coord`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub building: usize,
    /// 0 for a plane of constant x, 1 for constant y.
    pub axis: usize,
    pub coord: f64,
    /// Sign of the outward normal along `axis`.
    pub outward: f64,
    /// Extent along the other horizontal axis.
    pub span: [f64; 2],
    pub z: [f64; 2],
}

impl Face {
    pub fn normal(&self) -> Vec3 {
        Vec3::ZERO.with_component(self.axis, self.outward)
    }

    pub fn mirror(&self, p: Vec3) -> Vec3 {
        p.with_component(self.axis, 2.0 * self.coord - p.component(self.axis))
    }

    /// Signed distance along the outward normal.
    pub fn front_distance(&self, p: Vec3) -> f64 {
        (p.component(self.axis) - self.coord) * self.outward
    }

    pub fn in_front(&self, p: Vec3) -> bool {
        self.front_distance(p) > EPS
    }

    /// Whether a point on the plane lies strictly inside the wall rectangle.
    pub fn contains_strict(&self, p: Vec3) -> bool {
        let s = p.component(1 - self.axis);
        s > self.span[0] + EPS && s < self.span[1] - EPS && p.z > self.z[0] + EPS && p.z < self.z[1] - EPS
    }

    /// Point where the segment `from → to` crosses this face's plane, if the
    /// crossing is strictly between the endpoints.
    pub fn plane_crossing(&self, from: Vec3, to: Vec3) -> Option<Vec3> {
        let fa = from.component(self.axis);
        let ta = to.component(self.axis);
        let denom = ta - fa;
        if abs(denom) < 1e-15 {
            return None;
        }
        let t = (self.coord - fa) / denom;
        if t <= 0.0 || t >= 1.0 {
            return None;
        }
        let p = from + (to - from) * t;
        Some(p.with_component(self.axis, self.coord))
    }
}

pub fn prism_faces(index: usize, p: &Prism) -> [Face; 4] {
    let z = [p.min.z, p.max.z];
    [
        Face { building: index, axis: 0, coord: p.min.x, outward: -1.0, span: [p.min.y, p.max.y], z },
        Face { building: index, axis: 0, coord: p.max.x, outward: 1.0, span: [p.min.y, p.max.y], z },
        Face { building: index, axis: 1, coord: p.min.y, outward: -1.0, span: [p.min.x, p.max.x], z },
        Face { building: index, axis: 1, coord: p.max.y, outward: 1.0, span: [p.min.x, p.max.x], z },
    ]
}

/// Vertical corner edge of a prism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub building: usize,
    pub x: f64,
    pub y: f64,
    pub z: [f64; 2],
}

pub fn prism_edges(index: usize, p: &Prism) -> [Edge; 4] {
    let z = [p.min.z, p.max.z];
    [
        Edge { building: index, x: p.min.x, y: p.min.y, z },
        Edge { building: index, x: p.max.x, y: p.min.y, z },
        Edge { building: index, x: p.max.x, y: p.max.y, z },
        Edge { building: index, x: p.min.x, y: p.max.y, z },
    ]
}

/// z-component of the 2D cross product of the horizontal parts of `a`, `b`.
pub fn cross2(a: Vec3, b: Vec3) -> f64 {
    a.x * b.y - a.y * b.x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Prism {
        Prism::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn through_box_is_blocked() {
        let b = unit_box();
        assert!(segment_hits_interior(Vec3::new(-1.0, 0.5, 0.5), Vec3::new(2.0, 0.5, 0.5), &b));
        assert!(!segment_hits_interior(Vec3::new(-1.0, 0.5, 0.5), Vec3::new(-0.1, 0.5, 0.5), &b));
    }

    #[test]
    fn grazing_face_and_edge_is_clear() {
        let b = unit_box();
        // along the x = 1 face
        assert!(!segment_hits_interior(Vec3::new(1.0, -1.0, 0.5), Vec3::new(1.0, 2.0, 0.5), &b));
        // touching the corner edge
        assert!(!segment_hits_interior(Vec3::new(2.0, 0.0, 0.5), Vec3::new(0.0, 2.0, 0.5), &b));
        // ending on a face
        assert!(!segment_hits_interior(Vec3::new(2.0, 0.5, 0.5), Vec3::new(1.0, 0.5, 0.5), &b));
        assert!(segment_hits_box(Vec3::new(2.0, 0.0, 0.5), Vec3::new(0.0, 2.0, 0.5), &b, EPS));
    }

    #[test]
    fn face_mirror_and_crossing() {
        let f = prism_faces(0, &unit_box())[1];
        assert_eq!(f.mirror(Vec3::new(3.0, 0.2, 0.3)), Vec3::new(-1.0, 0.2, 0.3));
        assert!(f.in_front(Vec3::new(1.5, 0.0, 0.0)));
        assert!(!f.in_front(Vec3::new(0.5, 0.0, 0.0)));
        let c = f.plane_crossing(Vec3::new(3.0, 0.5, 0.5), Vec3::new(-1.0, 0.5, 0.5)).unwrap();
        assert_eq!(c, Vec3::new(1.0, 0.5, 0.5));
        assert!(f.contains_strict(c));
        assert!(f.plane_crossing(Vec3::new(3.0, 0.5, 0.5), Vec3::new(2.0, 0.5, 0.5)).is_none());
    }
}
