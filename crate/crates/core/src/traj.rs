//! Trajectory and pose primitives shared by every other module.
//!
//! A trajectory is a fixed-horizon sequence of future ego poses at a constant
//! waypoint interval. The learning side works on the flattened (x, y)
//! coordinates only; headings are derived from consecutive waypoint
//! differences whenever coordinates change, which keeps the noised state
//! Euclidean (no angular wrap-around in the diffusion space).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default horizon: 8 waypoints at 0.5 s, a 4 s plan.
pub const DEFAULT_HORIZON: usize = 8;
pub const DEFAULT_DT: f64 = 0.5;

/// Normalize an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(std::f64::consts::TAU);
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    /// Heading is normalized into (-pi, pi] at construction.
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub waypoints: Vec<Pose2D>,
}

impl Trajectory {
    pub fn new(dt: f64, waypoints: Vec<Pose2D>) -> Self {
        Self { dt, waypoints }
    }

    pub fn horizon(&self) -> usize {
        self.waypoints.len()
    }

    pub fn validate(&self) -> Result<()> {
        for w in &self.waypoints {
            if !(w.x.is_finite() && w.y.is_finite() && w.heading.is_finite()) {
                return Err(Error::NonFinite {
                    context: "trajectory waypoint",
                });
            }
        }
        Ok(())
    }
}

/// The (x1, y1, ..., xH, yH) vector a trajectory flattens to; the state that
/// gets noised, denoised, clustered, and averaged. Headings are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTrajectory(pub Vec<f64>);

impl FlatTrajectory {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::OddFlatLength { len: values.len() });
        }
        Ok(Self(values))
    }

    pub fn zeros(horizon: usize) -> Self {
        Self(vec![0.0; 2 * horizon])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn horizon(&self) -> usize {
        self.0.len() / 2
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.0[2 * i], self.0[2 * i + 1])
    }

    /// Mean per-waypoint Euclidean distance to another flat trajectory.
    pub fn ade(&self, other: &FlatTrajectory) -> Result<f64> {
        if self.0.len() != other.0.len() {
            return Err(Error::HorizonMismatch {
                a: self.horizon(),
                b: other.horizon(),
            });
        }
        let h = self.horizon();
        let mut sum = 0.0;
        for i in 0..h {
            let (ax, ay) = self.point(i);
            let (bx, by) = other.point(i);
            sum += (ax - bx).hypot(ay - by);
        }
        Ok(sum / h as f64)
    }
}

/// Drop headings, keeping the (x, y) sequence.
pub fn flatten(t: &Trajectory) -> FlatTrajectory {
    let mut v = Vec::with_capacity(2 * t.horizon());
    for w in &t.waypoints {
        v.push(w.x);
        v.push(w.y);
    }
    FlatTrajectory(v)
}

/// Rebuild a trajectory from flat coordinates, deriving headings from the
/// waypoint differences (see `recompute_headings`).
pub fn unflatten(flat: &FlatTrajectory, dt: f64, initial_heading: f64) -> Trajectory {
    let h = flat.horizon();
    let mut waypoints = Vec::with_capacity(h);
    for i in 0..h {
        let (x, y) = flat.point(i);
        waypoints.push(Pose2D::new(x, y, 0.0));
    }
    recompute_headings(&Trajectory::new(dt, waypoints), initial_heading)
}

/// Average displacement error: mean Euclidean distance over corresponding
/// waypoints.
pub fn ade(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.horizon() != b.horizon() {
        return Err(Error::HorizonMismatch {
            a: a.horizon(),
            b: b.horizon(),
        });
    }
    let sum: f64 = a
        .waypoints
        .iter()
        .zip(&b.waypoints)
        .map(|(p, q)| p.distance(q))
        .sum();
    Ok(sum / a.horizon() as f64)
}

/// Heading of each waypoint is the direction of the segment leaving it; the
/// last waypoint copies the previous heading, and zero-length segments
/// inherit the prior heading (`initial_heading` before the first segment).
pub fn recompute_headings(t: &Trajectory, initial_heading: f64) -> Trajectory {
    const DEGENERATE: f64 = 1e-9;
    let h = t.horizon();
    let mut out = t.clone();
    let mut prev = normalize_angle(initial_heading);
    for i in 0..h {
        let heading = if i + 1 < h {
            let dx = t.waypoints[i + 1].x - t.waypoints[i].x;
            let dy = t.waypoints[i + 1].y - t.waypoints[i].y;
            if dx.hypot(dy) < DEGENERATE {
                prev
            } else {
                dy.atan2(dx)
            }
        } else {
            prev
        };
        out.waypoints[i].heading = normalize_angle(heading);
        prev = out.waypoints[i].heading;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn straight(h: usize, step: f64) -> Trajectory {
        let waypoints = (0..h)
            .map(|i| Pose2D::new((i + 1) as f64 * step, 0.0, 0.0))
            .collect();
        Trajectory::new(DEFAULT_DT, waypoints)
    }

    #[test]
    fn flatten_zero_trajectory() {
        let t = Trajectory::new(
            DEFAULT_DT,
            vec![Pose2D::new(0.0, 0.0, 0.0); DEFAULT_HORIZON],
        );
        assert_eq!(flatten(&t).values(), &[0.0; 16]);
    }

    #[test]
    fn flatten_is_coordinate_interleave() {
        let t = Trajectory::new(
            1.0,
            vec![Pose2D::new(1.0, 2.0, 0.3), Pose2D::new(3.0, 4.0, -0.7)],
        );
        assert_eq!(flatten(&t).values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn unflatten_flatten_roundtrip_up_to_headings() {
        let t = straight(6, 2.0);
        let rt = unflatten(&flatten(&t), t.dt, 0.0);
        assert_eq!(rt, t);
    }

    #[test]
    fn ade_identity_and_shift() {
        let t = straight(8, 1.5);
        assert_eq!(ade(&t, &t).unwrap(), 0.0);
        let mut shifted = t.clone();
        for w in &mut shifted.waypoints {
            w.x += 3.0;
            w.y += 4.0;
        }
        assert!((ade(&t, &shifted).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ade_matches_scalar_loop_oracle() {
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift is plenty for test data
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state as f64 / u64::MAX as f64) * 40.0 - 20.0
        };
        let mk = |next: &mut dyn FnMut() -> f64| {
            Trajectory::new(
                DEFAULT_DT,
                (0..8).map(|_| Pose2D::new(next(), next(), 0.0)).collect(),
            )
        };
        for _ in 0..50 {
            let a = mk(&mut next);
            let b = mk(&mut next);
            let mut acc = 0.0;
            for (p, q) in a.waypoints.iter().zip(&b.waypoints) {
                let dx = p.x - q.x;
                let dy = p.y - q.y;
                acc += (dx * dx + dy * dy).sqrt();
            }
            let oracle = acc / 8.0;
            assert!((ade(&a, &b).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn ade_rejects_horizon_mismatch() {
        assert!(ade(&straight(8, 1.0), &straight(7, 1.0)).is_err());
    }

    #[test]
    fn headings_straight_line_are_zero() {
        let t = recompute_headings(&straight(8, 2.0), 1.0);
        for w in &t.waypoints {
            assert_eq!(w.heading, 0.0);
        }
    }

    #[test]
    fn headings_of_identical_waypoints_inherit_initial() {
        let t = Trajectory::new(DEFAULT_DT, vec![Pose2D::new(5.0, -2.0, 0.0); 8]);
        let t = recompute_headings(&t, 0.9);
        for w in &t.waypoints {
            assert!((w.heading - 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn headings_on_quarter_circle_match_analytic_tangents() {
        // CCW quarter arc of radius 10; the segment leaving sample i points
        // along the tangent at the chord midpoint angle.
        let r = 10.0;
        let n = 9;
        let delta = std::f64::consts::FRAC_PI_2 / (n - 1) as f64;
        let waypoints: Vec<Pose2D> = (0..n)
            .map(|i| {
                let th = i as f64 * delta;
                Pose2D::new(r * th.cos(), r * th.sin(), 0.0)
            })
            .collect();
        let t = recompute_headings(&Trajectory::new(DEFAULT_DT, waypoints), 0.0);
        for i in 0..n - 1 {
            let mid = (i as f64 + 0.5) * delta;
            let expected = normalize_angle(mid + std::f64::consts::FRAC_PI_2);
            assert!(
                (t.waypoints[i].heading - expected).abs() < 1e-9,
                "waypoint {i}: {} vs {expected}",
                t.waypoints[i].heading
            );
        }
        assert_eq!(t.waypoints[n - 1].heading, t.waypoints[n - 2].heading);
    }

    #[test]
    fn serialization_uses_declared_field_names() {
        let t = Trajectory::new(0.5, vec![Pose2D::new(1.0, 2.0, 0.25)]);
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["dt"], 0.5);
        assert_eq!(json["waypoints"][0]["x"], 1.0);
        assert_eq!(json["waypoints"][0]["heading"], 0.25);
    }

    proptest! {
        #[test]
        fn flatten_unflatten_bijection(values in proptest::collection::vec(-1e6f64..1e6, 16)) {
            let flat = FlatTrajectory::new(values).unwrap();
            let rt = flatten(&unflatten(&flat, DEFAULT_DT, 0.3));
            prop_assert!(flat.values().iter().zip(rt.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        #[test]
        fn trajectory_json_roundtrips_bitexactly(
            coords in proptest::collection::vec(-1e5f64..1e5, 24)
        ) {
            let waypoints: Vec<Pose2D> = coords
                .chunks(3)
                .map(|c| Pose2D::new(c[0], c[1], c[2] * 1e-5))
                .collect();
            let t = Trajectory::new(DEFAULT_DT, waypoints);
            let json = serde_json::to_string(&t).unwrap();
            let back: Trajectory = serde_json::from_str(&json).unwrap();
            for (a, b) in t.waypoints.iter().zip(&back.waypoints) {
                prop_assert!(a.x.to_bits() == b.x.to_bits());
                prop_assert!(a.y.to_bits() == b.y.to_bits());
                prop_assert!(a.heading.to_bits() == b.heading.to_bits());
            }
        }

        #[test]
        fn ade_metric_axioms(values in proptest::collection::vec(-50f64..50.0, 48)) {
            let mk = |chunk: &[f64]| Trajectory::new(
                DEFAULT_DT,
                chunk.chunks(2).map(|c| Pose2D::new(c[0], c[1], 0.0)).collect(),
            );
            let a = mk(&values[0..16]);
            let b = mk(&values[16..32]);
            let c = mk(&values[32..48]);
            let dab = ade(&a, &b).unwrap();
            let dba = ade(&b, &a).unwrap();
            let dac = ade(&a, &c).unwrap();
            let dcb = ade(&c, &b).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert_eq!(ade(&a, &a).unwrap(), 0.0);
            prop_assert!(dab <= dac + dcb + 1e-9);
        }

        #[test]
        fn angle_normalization_is_idempotent(a in -100.0f64..100.0) {
            let once = normalize_angle(a);
            prop_assert!(once > -std::f64::consts::PI && once <= std::f64::consts::PI);
            prop_assert!((normalize_angle(once) - once).abs() < 1e-15);
        }
    }
}
