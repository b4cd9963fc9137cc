//! 2-D geometry used by scenario construction and the rule-based checks:
//! polylines with arclength queries, point-in-polygon, oriented-rectangle
//! overlap via the separating axis theorem, and segment intersection.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[allow(clippy::should_implement_trait)]
impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n < 1e-12 {
            Vec2::new(1.0, 0.0)
        } else {
            self.scale(1.0 / n)
        }
    }

    /// Left-hand normal.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }
}

/// Open polyline with cached cumulative arclength.
#[derive(Debug, Clone)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut s = 0.0;
        cum.push(0.0);
        for i in 1..points.len() {
            s += points[i].dist(points[i - 1]);
            cum.push(s);
        }
        Self { points, cum }
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    /// Point at arclength s, clamped to the ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let i = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= self.points.len() {
            return *self.points.last().unwrap();
        }
        let seg_len = self.cum[i + 1] - self.cum[i];
        let t = if seg_len > 1e-12 {
            (s - self.cum[i]) / seg_len
        } else {
            0.0
        };
        self.points[i].add(self.points[i + 1].sub(self.points[i]).scale(t))
    }

    /// Unit tangent at arclength s (direction of the containing segment).
    pub fn direction_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let mut i = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= self.points.len() {
            i = self.points.len() - 2;
        }
        self.points[i + 1].sub(self.points[i]).normalized()
    }

    /// Project a point onto the polyline: returns (arclength, signed lateral
    /// offset). Positive offset is to the left of travel direction.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY, 0.0); // (s, |d|, signed d)
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let ab = b.sub(a);
            let len2 = ab.dot(ab);
            let t = if len2 > 1e-12 {
                (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = a.add(ab.scale(t));
            let d = p.dist(q);
            if d < best.1 {
                let signed = ab.normalized().cross(p.sub(q));
                // cross(dir, offset) > 0 when p is left of the segment
                let sign = if signed >= 0.0 { 1.0 } else { -1.0 };
                best = (self.cum[i] + t * len2.sqrt(), d, sign * d);
            }
        }
        (best.0, best.2)
    }

    /// Evenly spaced samples by arclength, endpoints included.
    pub fn resample(&self, count: usize) -> Vec<Vec2> {
        assert!(count >= 2);
        let total = self.length();
        (0..count)
            .map(|i| self.point_at(total * i as f64 / (count - 1) as f64))
            .collect()
    }

    /// Offset to the left by `d` along the local normal at every vertex.
    pub fn offset(&self, d: f64) -> Polyline {
        let n = self.points.len();
        let mut pts = Vec::with_capacity(n);
        for i in 0..n {
            let dir = if i == 0 {
                self.points[1].sub(self.points[0])
            } else if i == n - 1 {
                self.points[n - 1].sub(self.points[n - 2])
            } else {
                // average of adjacent segment directions
                let a = self.points[i].sub(self.points[i - 1]).normalized();
                let b = self.points[i + 1].sub(self.points[i]).normalized();
                a.add(b)
            };
            pts.push(self.points[i].add(dir.normalized().perp().scale(d)));
        }
        Polyline::new(pts)
    }
}

/// Simple polygon (implicitly closed, vertices in order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    /// Even-odd ray casting; boundary points count as inside within epsilon.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            // on-edge check keeps the boundary inside
            if point_on_segment(p, a, b, 1e-9) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                if p.x < a.x + t * (b.x - a.x) {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

fn point_on_segment(p: Vec2, a: Vec2, b: Vec2, eps: f64) -> bool {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let t = if len2 > 1e-18 {
        (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(a.add(ab.scale(t))) <= eps
}

/// Oriented rectangle: center, half extents along its local axes, heading.
#[derive(Debug, Clone, Copy)]
pub struct OrientedRect {
    pub center: Vec2,
    pub half_len: f64,
    pub half_wid: f64,
    pub heading: f64,
}

impl OrientedRect {
    pub fn corners(&self) -> [Vec2; 4] {
        let (s, c) = self.heading.sin_cos();
        let fwd = Vec2::new(c, s);
        let left = Vec2::new(-s, c);
        let f = fwd.scale(self.half_len);
        let l = left.scale(self.half_wid);
        [
            self.center.add(f).add(l),
            self.center.add(f).sub(l),
            self.center.sub(f).sub(l),
            self.center.sub(f).add(l),
        ]
    }

    fn axes(&self) -> [Vec2; 2] {
        let (s, c) = self.heading.sin_cos();
        [Vec2::new(c, s), Vec2::new(-s, c)]
    }
}

/// Separating axis test for two oriented rectangles. True when they overlap.
pub fn rects_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for axis in a.axes().iter().chain(b.axes().iter()) {
        let pa = project_corners(&ca, *axis);
        let pb = project_corners(&cb, *axis);
        if pa.1 < pb.0 || pb.1 < pa.0 {
            return false;
        }
    }
    true
}

fn project_corners(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in corners {
        let p = c.dot(axis);
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

/// Proper or touching intersection of segments ab and cd.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = b.sub(a).cross(c.sub(a));
    let d2 = b.sub(a).cross(d.sub(a));
    let d3 = d.sub(c).cross(a.sub(c));
    let d4 = d.sub(c).cross(b.sub(c));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // collinear/touching cases
    (d1 == 0.0 && point_on_segment(c, a, b, 1e-12))
        || (d2 == 0.0 && point_on_segment(d, a, b, 1e-12))
        || (d3 == 0.0 && point_on_segment(a, c, d, 1e-12))
        || (d4 == 0.0 && point_on_segment(b, c, d, 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_arclength_and_sampling() {
        let pl = Polyline::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(3.0, 4.0),
        ]);
        assert!((pl.length() - 7.0).abs() < 1e-12);
        let p = pl.point_at(4.0);
        assert!((p.x - 3.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12);
        let d = pl.direction_at(5.0);
        assert!((d.x).abs() < 1e-12 && (d.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_gives_signed_lateral_offset() {
        let pl = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]);
        let (s, lat) = pl.project(Vec2::new(4.0, 2.0));
        assert!((s - 4.0).abs() < 1e-12);
        assert!((lat - 2.0).abs() < 1e-12, "left of travel is positive");
        let (_, lat) = pl.project(Vec2::new(4.0, -1.5));
        assert!((lat + 1.5).abs() < 1e-12);
    }

    #[test]
    fn polygon_contains_rectangle_interior_only() {
        let poly = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 5.0),
            Vec2::new(0.0, 5.0),
        ]);
        assert!(poly.contains(Vec2::new(5.0, 2.5)));
        assert!(poly.contains(Vec2::new(0.0, 2.5))); // boundary
        assert!(!poly.contains(Vec2::new(-0.01, 2.5)));
        assert!(!poly.contains(Vec2::new(5.0, 5.01)));
    }

    #[test]
    fn sat_detects_grazing_contact_correctly() {
        let a = OrientedRect {
            center: Vec2::new(0.0, 0.0),
            half_len: 2.0,
            half_wid: 1.0,
            heading: 0.0,
        };
        let separated = OrientedRect {
            center: Vec2::new(0.0, 2.01),
            ..a
        };
        let touching = OrientedRect {
            center: Vec2::new(0.0, 1.99),
            ..a
        };
        assert!(!rects_overlap(&a, &separated));
        assert!(rects_overlap(&a, &touching));
    }

    #[test]
    fn sat_is_symmetric() {
        let a = OrientedRect {
            center: Vec2::new(0.0, 0.0),
            half_len: 2.3,
            half_wid: 0.95,
            heading: 0.4,
        };
        let b = OrientedRect {
            center: Vec2::new(2.5, 1.2),
            half_len: 2.0,
            half_wid: 0.9,
            heading: -1.1,
        };
        assert_eq!(rects_overlap(&a, &b), rects_overlap(&b, &a));
    }

    #[test]
    fn segment_intersection_basics() {
        let o = Vec2::new(0.0, 0.0);
        assert!(segments_intersect(
            o,
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(2.0, 0.0)
        ));
        assert!(!segments_intersect(
            o,
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0)
        ));
    }
}
