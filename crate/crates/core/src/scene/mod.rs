//! Synthetic driving worlds: lane geometry, obstacles, traffic lights, a
//! rule-based expert that supplies reference trajectories, ground-truth
//! perception rasters/tokens, and the geometric queries (collision, drivable
//! area) the scoring side is built on.

pub mod expert;
pub mod geom;
pub mod perception;
pub mod templates;

use serde::{Deserialize, Serialize};

use crate::traj::{Pose2D, Trajectory};
use crate::{Error, Result};
use geom::{rects_overlap, OrientedRect, Polygon, Polyline, Vec2};

pub use perception::{extract_perception, PerceptionBundle, PerceptionConfig};
pub use templates::Template;

/// Fixed world parameters shared by generation, checks, and perception.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WorldConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Ego footprint (typical sedan).
    pub ego_length: f64,
    pub ego_width: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            horizon: crate::traj::DEFAULT_HORIZON,
            dt: crate::traj::DEFAULT_DT,
            ego_length: 4.6,
            ego_width: 1.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaneElement {
    pub id: u32,
    pub centerline: Vec<Vec2>,
    pub left_boundary: Vec<Vec2>,
    pub right_boundary: Vec<Vec2>,
    pub width: f64,
    pub successors: Vec<u32>,
}

impl LaneElement {
    /// Build a lane from its centerline; boundaries are normal offsets at
    /// half width.
    pub fn from_centerline(id: u32, centerline: Vec<Vec2>, width: f64) -> Self {
        let pl = Polyline::new(centerline.clone());
        let left_boundary = pl.offset(width / 2.0).points;
        let right_boundary = pl.offset(-width / 2.0).points;
        Self {
            id,
            centerline,
            left_boundary,
            right_boundary,
            width,
            successors: Vec::new(),
        }
    }

    pub fn center_polyline(&self) -> Polyline {
        Polyline::new(self.centerline.clone())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    /// (length, width) in meters.
    pub extent: (f64, f64),
    pub heading: f64,
    pub velocity: Vec2,
}

impl Obstacle {
    /// Footprint after propagating the center at constant velocity for `t`
    /// seconds.
    pub fn footprint_at(&self, t: f64) -> OrientedRect {
        OrientedRect {
            center: self.center.add(self.velocity.scale(t)),
            half_len: self.extent.0 / 2.0,
            half_wid: self.extent.1 / 2.0,
            heading: self.heading,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LightState {
    Red,
    Green,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficLightState {
    pub stop_line: (Vec2, Vec2),
    pub state: LightState,
    pub lane_id: u32,
}

/// High-level navigation command; stands in for an upstream language model's
/// discrete instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    TurnLeft,
    TurnRight,
    GoStraight,
    Stop,
}

impl Command {
    /// One-hot encoding in the declared order (Left, Right, Straight, Stop).
    pub fn one_hot(&self) -> [f64; 4] {
        let mut v = [0.0; 4];
        let idx = match self {
            Command::TurnLeft => 0,
            Command::TurnRight => 1,
            Command::GoStraight => 2,
            Command::Stop => 3,
        };
        v[idx] = 1.0;
        v
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub template: Template,
    pub lanes: Vec<LaneElement>,
    pub drivable_area: Polygon,
    pub obstacles: Vec<Obstacle>,
    pub traffic_light: Option<TrafficLightState>,
    pub command: Command,
    pub ego_start: Pose2D,
    pub ego_speed: f64,
    /// Lane ids in travel order.
    pub route: Vec<u32>,
    pub expert: Trajectory,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn lane(&self, id: u32) -> Option<&LaneElement> {
        self.lanes.iter().find(|l| l.id == id)
    }

    /// Concatenated centerline of the route lanes.
    pub fn route_path(&self) -> Polyline {
        let mut pts: Vec<Vec2> = Vec::new();
        for id in &self.route {
            let lane = self.lane(*id).expect("route references existing lane");
            for p in &lane.centerline {
                if pts.last().is_none_or(|q| q.dist(*p) > 1e-9) {
                    pts.push(*p);
                }
            }
        }
        Polyline::new(pts)
    }

    /// Structural and behavioral invariants; run at construction and by the
    /// dataset schema validator.
    pub fn validate(&self, world: &WorldConfig) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidScenario {
                id: self.id.clone(),
                reason,
            })
        };
        if self.lanes.is_empty() || self.route.is_empty() {
            return fail("missing lanes or route".into());
        }
        for lane in &self.lanes {
            if lane.centerline.len() < 2 {
                return fail(format!("lane {} centerline too short", lane.id));
            }
            for w in lane.centerline.windows(2) {
                if w[0].dist(w[1]) <= 1e-9 {
                    return fail(format!("lane {} has zero-length segment", lane.id));
                }
            }
            if lane.left_boundary.len() != lane.centerline.len()
                || lane.right_boundary.len() != lane.centerline.len()
            {
                return fail(format!("lane {} boundary sampling mismatch", lane.id));
            }
            for ((c, l), r) in lane
                .centerline
                .iter()
                .zip(&lane.left_boundary)
                .zip(&lane.right_boundary)
            {
                if (c.dist(*l) - lane.width / 2.0).abs() > 1e-6
                    || (c.dist(*r) - lane.width / 2.0).abs() > 1e-6
                {
                    return fail(format!("lane {} boundary offset not width/2", lane.id));
                }
            }
        }
        for id in &self.route {
            if self.lane(*id).is_none() {
                return fail(format!("route lane {id} missing"));
            }
        }
        if let Some(light) = &self.traffic_light {
            let lane = match self.lane(light.lane_id) {
                Some(l) => l,
                None => return fail("traffic light lane missing".into()),
            };
            let on_left = polyline_distance(&lane.left_boundary, light.stop_line.0) < 1e-6
                || polyline_distance(&lane.left_boundary, light.stop_line.1) < 1e-6;
            let on_right = polyline_distance(&lane.right_boundary, light.stop_line.0) < 1e-6
                || polyline_distance(&lane.right_boundary, light.stop_line.1) < 1e-6;
            if !(on_left && on_right) {
                return fail("stop line endpoints not on lane boundaries".into());
            }
        }
        for o in &self.obstacles {
            if !(o.extent.0 > 0.0 && o.extent.1 > 0.0) {
                return fail("obstacle extent must be positive".into());
            }
            let finite = o.center.x.is_finite()
                && o.center.y.is_finite()
                && o.heading.is_finite()
                && o.velocity.x.is_finite()
                && o.velocity.y.is_finite();
            if !finite {
                return fail("obstacle has non-finite fields".into());
            }
        }
        if self.expert.horizon() != world.horizon {
            return fail(format!(
                "expert horizon {} != {}",
                self.expert.horizon(),
                world.horizon
            ));
        }
        self.expert.validate()?;
        if inside_drivable(&self.expert, self, world) < 1.0 {
            return fail("expert leaves drivable area".into());
        }
        if let Some(idx) = collides(&self.expert, self, world) {
            return fail(format!("expert collides at waypoint {idx}"));
        }
        Ok(())
    }
}

fn polyline_distance(points: &[Vec2], p: Vec2) -> f64 {
    let pl = Polyline::new(points.to_vec());
    let (s, _) = pl.project(p);
    pl.point_at(s).dist(p)
}

/// Ego footprint rectangle at a waypoint.
pub fn ego_footprint(pose: &Pose2D, world: &WorldConfig) -> OrientedRect {
    OrientedRect {
        center: Vec2::new(pose.x, pose.y),
        half_len: world.ego_length / 2.0,
        half_wid: world.ego_width / 2.0,
        heading: pose.heading,
    }
}

/// First waypoint index where the ego footprint overlaps any obstacle
/// propagated at constant velocity, on the shared time base where waypoint i
/// sits at t = (i + 1) * dt.
pub fn collides(t: &Trajectory, s: &Scenario, world: &WorldConfig) -> Option<usize> {
    for (i, w) in t.waypoints.iter().enumerate() {
        let time = (i + 1) as f64 * t.dt;
        let ego = ego_footprint(w, world);
        for o in &s.obstacles {
            if rects_overlap(&ego, &o.footprint_at(time)) {
                return Some(i);
            }
        }
    }
    None
}

/// Fraction of waypoints whose full ego footprint (all four corners) lies
/// inside the drivable polygon.
pub fn inside_drivable(t: &Trajectory, s: &Scenario, world: &WorldConfig) -> f64 {
    if t.waypoints.is_empty() {
        return 1.0;
    }
    let inside = t
        .waypoints
        .iter()
        .filter(|w| {
            ego_footprint(w, world)
                .corners()
                .iter()
                .all(|c| s.drivable_area.contains(*c))
        })
        .count();
    inside as f64 / t.waypoints.len() as f64
}

/// Deterministic scenario synthesis. The template fixes road topology and
/// command; sampled parameters that produce an invalid world are retried with
/// derived sub-seeds up to a bounded count.
pub fn generate_scenario(seed: u64, template: Template, world: &WorldConfig) -> Result<Scenario> {
    const MAX_ATTEMPTS: usize = 24;
    for attempt in 0..MAX_ATTEMPTS {
        let sub_seed = mix_seed(seed, attempt as u64);
        match templates::build(sub_seed, seed, template, world) {
            Ok(scenario) => {
                scenario.validate(world)?;
                return Ok(scenario);
            }
            Err(_) if attempt + 1 < MAX_ATTEMPTS => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::TemplateInfeasible {
        template: template.name(),
        attempts: MAX_ATTEMPTS,
    })
}

/// splitmix64-style mixing for derived seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
