//! Six scenario archetypes. Each fixes a road topology and command, samples
//! free parameters from the derived seed, runs the rule-based expert, and
//! hands back a fully populated scenario for validation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expert;
use super::geom::{Polygon, Polyline, Vec2};
use super::{Command, LaneElement, LightState, Obstacle, Scenario, TrafficLightState, WorldConfig};
use crate::traj::Pose2D;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    StraightCruise,
    LeadVehicle,
    LeftTurn,
    RightTurn,
    RedLight,
    LaneBlockedSwerve,
}

impl Template {
    pub fn all() -> [Template; 6] {
        [
            Template::StraightCruise,
            Template::LeadVehicle,
            Template::LeftTurn,
            Template::RightTurn,
            Template::RedLight,
            Template::LaneBlockedSwerve,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Template::StraightCruise => "straight_cruise",
            Template::LeadVehicle => "lead_vehicle",
            Template::LeftTurn => "left_turn",
            Template::RightTurn => "right_turn",
            Template::RedLight => "red_light",
            Template::LaneBlockedSwerve => "lane_blocked_swerve",
        }
    }

    pub fn parse(name: &str) -> Option<Template> {
        Template::all().into_iter().find(|t| t.name() == name)
    }
}

const LANE_WIDTH: f64 = 3.5;
const STRAIGHT_STEP: f64 = 2.0;
const ARC_STEP: f64 = 1.2;

pub(super) fn build(
    sub_seed: u64,
    scenario_seed: u64,
    template: Template,
    world: &WorldConfig,
) -> Result<Scenario> {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(sub_seed);
    let mut scenario = match template {
        Template::StraightCruise => straight_cruise(&mut rng),
        Template::LeadVehicle => lead_vehicle(&mut rng),
        Template::LeftTurn => turn(&mut rng, true),
        Template::RightTurn => turn(&mut rng, false),
        Template::RedLight => red_light(&mut rng),
        Template::LaneBlockedSwerve => lane_blocked_swerve(&mut rng),
    };
    scenario.id = format!("{}-{scenario_seed:016x}", template.name());
    scenario.template = template;
    scenario.rng_seed = scenario_seed;
    scenario.expert = expert::plan(&scenario, world)?;
    Ok(scenario)
}

fn straight_centerline(from_x: f64, to_x: f64, y: f64) -> Vec<Vec2> {
    let n = ((to_x - from_x) / STRAIGHT_STEP).ceil() as usize + 1;
    (0..n)
        .map(|i| {
            let x = from_x + (to_x - from_x) * i as f64 / (n - 1) as f64;
            Vec2::new(x, y)
        })
        .collect()
}

/// Corridor polygon of a path: left boundary forward, right boundary back.
fn corridor(path: &Polyline, half_width: f64) -> Polygon {
    let left = path.offset(half_width);
    let right = path.offset(-half_width);
    let mut vertices = left.points;
    vertices.extend(right.points.into_iter().rev());
    Polygon::new(vertices)
}

fn skeleton(
    lanes: Vec<LaneElement>,
    route: Vec<u32>,
    drivable_area: Polygon,
    command: Command,
    ego_speed: f64,
) -> Scenario {
    Scenario {
        id: String::new(),
        template: Template::StraightCruise,
        lanes,
        drivable_area,
        obstacles: Vec::new(),
        traffic_light: None,
        command,
        ego_start: Pose2D::new(0.0, 0.0, 0.0),
        ego_speed,
        route,
        expert: crate::traj::Trajectory::new(crate::traj::DEFAULT_DT, Vec::new()),
        rng_seed: 0,
    }
}

/// Parked car beside the road, clear of the drivable corridor.
fn parked_car(rng: &mut ChaCha8Rng, road_half_width: f64) -> Obstacle {
    let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Obstacle {
        center: Vec2::new(
            rng.gen_range(12.0..60.0),
            side * (road_half_width + 1.3 + rng.gen_range(0.0..1.0) + 1.0),
        ),
        extent: (rng.gen_range(4.0..4.8), rng.gen_range(1.7..2.0)),
        heading: 0.0,
        velocity: Vec2::new(0.0, 0.0),
    }
}

fn straight_cruise(rng: &mut ChaCha8Rng) -> Scenario {
    let center = straight_centerline(-10.0, 100.0, 0.0);
    let lane = LaneElement::from_centerline(0, center.clone(), LANE_WIDTH);
    let path = Polyline::new(center);
    let drivable = corridor(&path, LANE_WIDTH / 2.0);
    let speed = rng.gen_range(6.0..12.0);
    let mut s = skeleton(vec![lane], vec![0], drivable, Command::GoStraight, speed);
    let n_parked = rng.gen_range(0..3);
    for _ in 0..n_parked {
        s.obstacles.push(parked_car(rng, LANE_WIDTH / 2.0));
    }
    // occasionally a green light the ego simply drives through
    if rng.gen_bool(0.3) {
        let idx = rng.gen_range(15..25); // centerline sample index
        s.traffic_light = Some(light_at_sample(&s.lanes[0], idx, LightState::Green));
    }
    s
}

fn light_at_sample(lane: &LaneElement, idx: usize, state: LightState) -> TrafficLightState {
    TrafficLightState {
        stop_line: (lane.left_boundary[idx], lane.right_boundary[idx]),
        state,
        lane_id: lane.id,
    }
}

fn lead_vehicle(rng: &mut ChaCha8Rng) -> Scenario {
    let center = straight_centerline(-10.0, 100.0, 0.0);
    let lane = LaneElement::from_centerline(0, center.clone(), LANE_WIDTH);
    let path = Polyline::new(center);
    let drivable = corridor(&path, LANE_WIDTH / 2.0);
    let ego_speed: f64 = rng.gen_range(6.0..10.0);
    let lead_speed: f64 = rng.gen_range(1.0..5.0);
    let closing = (ego_speed - lead_speed).max(0.0);
    let lead_len = rng.gen_range(4.2..4.8);
    let min_gap = (12.0f64).max(5.0 + 1.4 * closing);
    let bumper_gap = rng.gen_range(min_gap..min_gap + 10.0);
    let mut s = skeleton(vec![lane], vec![0], drivable, Command::GoStraight, ego_speed);
    s.obstacles.push(Obstacle {
        center: Vec2::new(bumper_gap + 2.3 + lead_len / 2.0, 0.0),
        extent: (lead_len, rng.gen_range(1.7..2.0)),
        heading: 0.0,
        velocity: Vec2::new(lead_speed, 0.0),
    });
    if rng.gen_bool(0.4) {
        s.obstacles.push(parked_car(rng, LANE_WIDTH / 2.0));
    }
    s
}

fn turn(rng: &mut ChaCha8Rng, left: bool) -> Scenario {
    let approach_len = rng.gen_range(8.0..14.0);
    let radius = rng.gen_range(12.0..18.0);
    let exit_len = 45.0;
    let cont_end = 100.0;
    let sign = if left { 1.0 } else { -1.0 };

    let approach = straight_centerline(-8.0, approach_len, 0.0);
    let arc_center = Vec2::new(approach_len, sign * radius);
    let n_arc = (std::f64::consts::FRAC_PI_2 * radius / ARC_STEP).ceil() as usize + 1;
    let arc: Vec<Vec2> = (0..n_arc)
        .map(|i| {
            let phi = std::f64::consts::FRAC_PI_2 * i as f64 / (n_arc - 1) as f64;
            // sweep from the approach tangent point around the arc center
            let angle = -sign * std::f64::consts::FRAC_PI_2 + sign * phi;
            arc_center.add(Vec2::new(angle.cos(), angle.sin()).scale(radius))
        })
        .collect();
    let exit_start = *arc.last().unwrap();
    let n_exit = (exit_len / STRAIGHT_STEP).ceil() as usize + 1;
    let exit: Vec<Vec2> = (0..n_exit)
        .map(|i| {
            let d = exit_len * i as f64 / (n_exit - 1) as f64;
            Vec2::new(exit_start.x, exit_start.y + sign * d)
        })
        .collect();
    // the road also continues straight past the junction; only the command
    // says which branch the route takes
    let continuation = straight_centerline(approach_len, cont_end, 0.0);

    let mut lane0 = LaneElement::from_centerline(0, approach, LANE_WIDTH);
    let mut lane1 = LaneElement::from_centerline(1, arc, LANE_WIDTH);
    let lane2 = LaneElement::from_centerline(2, exit, LANE_WIDTH);
    let lane3 = LaneElement::from_centerline(3, continuation, LANE_WIDTH);
    lane0.successors = vec![1, 3];
    lane1.successors = vec![2];

    let drivable = fork_polygon(approach_len, radius, sign, exit_len, cont_end);

    let speed = rng.gen_range(4.0..6.5);
    let command = if left {
        Command::TurnLeft
    } else {
        Command::TurnRight
    };
    let mut s = skeleton(
        vec![lane0, lane1, lane2, lane3],
        vec![0, 1, 2],
        drivable,
        command,
        speed,
    );
    if rng.gen_bool(0.4) {
        // parked car across from the corner
        s.obstacles.push(Obstacle {
            center: Vec2::new(
                approach_len + rng.gen_range(2.0..8.0),
                -sign * (LANE_WIDTH / 2.0 + 2.6 + rng.gen_range(0.0..1.5)),
            ),
            extent: (4.5, 1.9),
            heading: 0.0,
            velocity: Vec2::new(0.0, 0.0),
        });
    }
    s
}

/// Outline of a junction where the corridor forks: a straight branch along
/// +x and a quarter-circle branch turning toward `sign` * +y. Built for a
/// left fork and mirrored when `sign` is negative.
fn fork_polygon(d: f64, r: f64, sign: f64, exit_len: f64, cont_end: f64) -> Polygon {
    let hw = LANE_WIDTH / 2.0;
    let mut pts: Vec<Vec2> = Vec::new();
    // straight branch, outer (right) edge and far end
    pts.push(Vec2::new(-10.0, -hw));
    pts.push(Vec2::new(cont_end, -hw));
    pts.push(Vec2::new(cont_end, hw));
    // back along the straight branch's inner edge to where the turn's outer
    // boundary peels off
    let x_peel = d + 2.0 * (r * hw).sqrt();
    pts.push(Vec2::new(x_peel, hw));
    // outer arc boundary up to the exit mouth
    let outer = r + hw;
    let phi_start = ((hw - r) / outer).asin();
    let n = 24;
    for i in 0..=n {
        let phi = phi_start + (0.0 - phi_start) * i as f64 / n as f64;
        pts.push(Vec2::new(d + outer * phi.cos(), r + outer * phi.sin()));
    }
    // exit branch far end
    pts.push(Vec2::new(d + r + hw, r + exit_len));
    pts.push(Vec2::new(d + r - hw, r + exit_len));
    // inner arc boundary back down to the approach edge
    let inner = r - hw;
    for i in 0..=n {
        let phi = -std::f64::consts::FRAC_PI_2 * i as f64 / n as f64;
        pts.push(Vec2::new(d + inner * phi.cos(), r + inner * phi.sin()));
    }
    pts.push(Vec2::new(-10.0, hw));
    if sign < 0.0 {
        for p in &mut pts {
            p.y = -p.y;
        }
        pts.reverse();
    }
    Polygon::new(pts)
}

fn red_light(rng: &mut ChaCha8Rng) -> Scenario {
    let center = straight_centerline(-10.0, 100.0, 0.0);
    let lane = LaneElement::from_centerline(0, center.clone(), LANE_WIDTH);
    let path = Polyline::new(center);
    let drivable = corridor(&path, LANE_WIDTH / 2.0);
    let speed: f64 = rng.gen_range(5.0..8.0);
    // stop line placed on a centerline sample; far enough for a comfortable stop
    let min_x = (speed * speed / 6.0 + 5.0).max(14.0);
    let idx_min = ((min_x + 10.0) / STRAIGHT_STEP).ceil() as usize;
    let idx_max = ((24.0f64.max(min_x + 4.0) + 10.0) / STRAIGHT_STEP).floor() as usize;
    let idx = rng.gen_range(idx_min..=idx_max);
    let mut s = skeleton(vec![lane], vec![0], drivable, Command::Stop, speed);
    s.traffic_light = Some(light_at_sample(&s.lanes[0], idx, LightState::Red));
    if rng.gen_bool(0.3) {
        s.obstacles.push(parked_car(rng, LANE_WIDTH / 2.0));
    }
    s
}

fn lane_blocked_swerve(rng: &mut ChaCha8Rng) -> Scenario {
    let switch_x = rng.gen_range(8.0..14.0);
    let connector_len = rng.gen_range(18.0..22.0);
    let ego_speed = rng.gen_range(6.0..8.5);
    let offset = LANE_WIDTH; // adjacent lane to the left

    let start = straight_centerline(-10.0, switch_x, 0.0);
    let n_conn = (connector_len / ARC_STEP).ceil() as usize + 1;
    let connector: Vec<Vec2> = (0..n_conn)
        .map(|i| {
            let u = i as f64 / (n_conn - 1) as f64;
            let y = offset * (1.0 - (std::f64::consts::PI * u).cos()) / 2.0;
            Vec2::new(switch_x + connector_len * u, y)
        })
        .collect();
    let target = straight_centerline(switch_x + connector_len, 100.0, offset);
    let blocked = straight_centerline(switch_x, 100.0, 0.0);

    let mut lane0 = LaneElement::from_centerline(0, start, LANE_WIDTH);
    let mut lane1 = LaneElement::from_centerline(1, connector, LANE_WIDTH);
    let lane2 = LaneElement::from_centerline(2, target, LANE_WIDTH);
    let lane3 = LaneElement::from_centerline(3, blocked, LANE_WIDTH);
    lane0.successors = vec![1, 3];
    lane1.successors = vec![2];

    // drivable spans both lanes
    let drivable = Polygon::new(vec![
        Vec2::new(-10.0, -LANE_WIDTH / 2.0),
        Vec2::new(100.0, -LANE_WIDTH / 2.0),
        Vec2::new(100.0, offset + LANE_WIDTH / 2.0),
        Vec2::new(-10.0, offset + LANE_WIDTH / 2.0),
    ]);

    let mut s = skeleton(
        vec![lane0, lane1, lane2, lane3],
        vec![0, 1, 2],
        drivable,
        Command::GoStraight,
        ego_speed,
    );
    let block_x = switch_x + connector_len + rng.gen_range(5.0..10.0);
    s.obstacles.push(Obstacle {
        center: Vec2::new(block_x, 0.0),
        extent: (rng.gen_range(4.2..4.8), rng.gen_range(1.7..2.0)),
        heading: 0.0,
        velocity: Vec2::new(0.0, 0.0),
    });
    s
}
