//! Floor-plane and box geometry shared by every stage.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

pub fn unit(yaw: f64) -> Vec2 {
    Vec2::new(yaw.cos(), yaw.sin())
}

pub fn rotate(v: Vec2, yaw: f64) -> Vec2 {
    let (s, c) = yaw.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// A 2D segment on the floor plane. Serialized as `[[x1,y1],[x2,y2]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        (p - self.closest_point(p)).norm()
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let d = self.b - self.a;
        let len2 = d.norm_squared();
        if len2 == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(&d) / len2).clamp(0.0, 1.0);
        self.a + d * t
    }
}

impl From<[[f64; 2]; 2]> for Segment {
    fn from(v: [[f64; 2]; 2]) -> Self {
        Segment::new(Vec2::new(v[0][0], v[0][1]), Vec2::new(v[1][0], v[1][1]))
    }
}

impl From<Segment> for [[f64; 2]; 2] {
    fn from(s: Segment) -> Self {
        [[s.a.x, s.a.y], [s.b.x, s.b.y]]
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test. Touching endpoints and collinear
/// overlaps count as intersecting.
pub fn segments_intersect(s: &Segment, t: &Segment) -> bool {
    let d1 = orient(t.a, t.b, s.a);
    let d2 = orient(t.a, t.b, s.b);
    let d3 = orient(s.a, s.b, t.a);
    let d4 = orient(s.a, s.b, t.b);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(t.a, t.b, s.a))
        || (d2 == 0.0 && on_segment(t.a, t.b, s.b))
        || (d3 == 0.0 && on_segment(s.a, s.b, t.a))
        || (d4 == 0.0 && on_segment(s.a, s.b, t.b))
}

/// Axis-aligned floor rectangle. Serialized as `[xmin, ymin, xmax, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            min: Vec2::new(xmin, ymin),
            max: Vec2::new(xmax, ymax),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersection(&self, other: &Rect) -> Rect {
        Rect {
            min: Vec2::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y)),
            max: Vec2::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y)),
        }
    }

    pub fn bounding(points: impl IntoIterator<Item = Vec2>) -> Rect {
        let mut r = Rect {
            min: Vec2::repeat(f64::INFINITY),
            max: Vec2::repeat(f64::NEG_INFINITY),
        };
        for p in points {
            r.min = r.min.inf(&p);
            r.max = r.max.sup(&p);
        }
        r
    }
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.min.x, r.min.y, r.max.x, r.max.y]
    }
}

/// Oriented rectangle on the floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub center: Vec2,
    pub yaw: f64,
    pub half_extents: Vec2,
}

impl Footprint {
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        rotate(p - self.center, -self.yaw)
    }

    pub fn to_world(&self, local: Vec2) -> Vec2 {
        self.center + rotate(local, self.yaw)
    }

    /// Corners in counter-clockwise order starting at local (-x, -y).
    pub fn corners(&self) -> [Vec2; 4] {
        let h = self.half_extents;
        [
            self.to_world(Vec2::new(-h.x, -h.y)),
            self.to_world(Vec2::new(h.x, -h.y)),
            self.to_world(Vec2::new(h.x, h.y)),
            self.to_world(Vec2::new(-h.x, h.y)),
        ]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let c = self.corners();
        [
            Segment::new(c[0], c[1]),
            Segment::new(c[1], c[2]),
            Segment::new(c[2], c[3]),
            Segment::new(c[3], c[0]),
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_extents.x && l.y.abs() <= self.half_extents.y
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let l = self.to_local(p);
        let h = self.half_extents;
        self.to_world(Vec2::new(l.x.clamp(-h.x, h.x), l.y.clamp(-h.y, h.y)))
    }

    /// Euclidean distance from `p` to the rectangle; zero inside.
    pub fn distance(&self, p: Vec2) -> f64 {
        (p - self.closest_point(p)).norm()
    }

    /// Square (Minkowski-by-box) inflation.
    pub fn inflated(&self, r: f64) -> Footprint {
        Footprint {
            half_extents: self.half_extents.add_scalar(r),
            ..*self
        }
    }

    pub fn bounds(&self) -> Rect {
        Rect::bounding(self.corners())
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_extents.x * self.half_extents.y
    }

    /// True if the segment touches the closed rectangle.
    pub fn intersects_segment(&self, s: &Segment) -> bool {
        self.contains(s.a) || self.contains(s.b) || self.edges().iter().any(|e| segments_intersect(e, s))
    }
}

/// A yaw-only oriented 3D box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub yaw: f64,
    pub half_extents: Vec3,
}

impl OrientedBox {
    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::zeros(); 8];
        let h = self.half_extents;
        let mut i = 0;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let xy = rotate(Vec2::new(sx * h.x, sy * h.y), self.yaw);
                    out[i] = self.center + Vec3::new(xy.x, xy.y, sz * h.z);
                    i += 1;
                }
            }
        }
        out
    }

    /// Entry parameter `t ∈ [0, 1]` where the segment `from → to` first
    /// meets the box, if it does (slab test in box-local coordinates).
    pub fn segment_hit(&self, from: Vec3, to: Vec3) -> Option<f64> {
        let to_local = |p: Vec3| {
            let xy = rotate(Vec2::new(p.x - self.center.x, p.y - self.center.y), -self.yaw);
            Vec3::new(xy.x, xy.y, p.z - self.center.z)
        };
        let o = to_local(from);
        let d = to_local(to) - o;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for k in 0..3 {
            let h = self.half_extents[k];
            if d[k].abs() < 1e-15 {
                if o[k].abs() > h {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[k];
            let (mut a, mut b) = ((-h - o[k]) * inv, (h - o[k]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}
