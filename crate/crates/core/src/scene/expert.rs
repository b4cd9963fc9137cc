//! Rule-based reference driver: pure pursuit steering along the route
//! centerline with a clamped longitudinal rule (cruise, curve slowdown,
//! car-following, red-light stop). Deterministic; integrates at a finer
//! substep than the waypoint interval and records every dt.

use super::geom::{Polyline, Vec2};
use super::{LightState, Scenario, WorldConfig};
use crate::traj::{recompute_headings, Pose2D, Trajectory};
use crate::Result;

const SUBSTEPS: usize = 5;
const MAX_ACCEL: f64 = 2.0;
const MAX_DECEL: f64 = -3.5;
/// Accel slew bound, m/s^2 per second.
const ACCEL_RATE: f64 = 6.0;
const LAT_ACCEL_MAX: f64 = 2.2;
const TIME_HEADWAY: f64 = 1.4;
/// Bumper-to-bumper distance held at standstill.
pub const STANDSTILL_GAP: f64 = 3.0;
/// Distance from ego center to a red stop line when halted.
const STOP_MARGIN: f64 = 3.2;
const LOOKAHEAD_GAIN: f64 = 0.7;
const LOOKAHEAD_MIN: f64 = 2.5;
const LOOKAHEAD_MAX: f64 = 7.0;

pub fn plan(s: &Scenario, world: &WorldConfig) -> Result<Trajectory> {
    let path = s.route_path();
    let sub_dt = world.dt / SUBSTEPS as f64;

    let mut pos = Vec2::new(s.ego_start.x, s.ego_start.y);
    let mut heading = s.ego_start.heading;
    let mut speed = s.ego_speed;
    let mut accel = 0.0;
    let mut time = 0.0;
    let mut waypoints = Vec::with_capacity(world.horizon);

    let stop_s = red_stop_arclength(s, &path);

    for step in 0..world.horizon * SUBSTEPS {
        let (s_ego, _) = path.project(pos);

        let mut target_accel = cruise_accel(&path, s_ego, speed, s.ego_speed);
        if let Some(a) = follow_accel(s, &path, s_ego, speed, time, world) {
            target_accel = target_accel.min(a);
        }
        if let Some(line_s) = stop_s {
            target_accel = target_accel.min(stop_accel(line_s, s_ego, speed));
        }

        let slew = ACCEL_RATE * sub_dt;
        accel = target_accel
            .clamp(MAX_DECEL, MAX_ACCEL)
            .clamp(accel - slew, accel + slew);
        speed = (speed + accel * sub_dt).max(0.0);

        // settle to a full stop just short of the line
        if let Some(line_s) = stop_s {
            if speed < 0.2 && line_s - s_ego < STOP_MARGIN + 1.0 {
                speed = 0.0;
            }
        }

        if speed > 1e-9 {
            let lookahead = (LOOKAHEAD_GAIN * speed).clamp(LOOKAHEAD_MIN, LOOKAHEAD_MAX);
            let target = path.point_at(s_ego + lookahead);
            let to_target = target.sub(pos);
            let alpha = to_target.y.atan2(to_target.x) - heading;
            let curvature = 2.0 * alpha.sin() / to_target.norm().max(0.5);
            heading += speed * curvature * sub_dt;
            pos = pos.add(Vec2::new(heading.cos(), heading.sin()).scale(speed * sub_dt));
        }
        time += sub_dt;

        if (step + 1) % SUBSTEPS == 0 {
            waypoints.push(Pose2D::new(pos.x, pos.y, 0.0));
        }
    }

    let t = Trajectory::new(world.dt, waypoints);
    Ok(recompute_headings(&t, s.ego_start.heading))
}

fn cruise_accel(path: &Polyline, s_ego: f64, speed: f64, cruise: f64) -> f64 {
    // slow for curvature ahead of the current position
    let window = (speed * 1.8 + 6.0).min(path.length() - s_ego);
    let mut kappa_max: f64 = 0.0;
    let mut d = 0.0;
    while d < window {
        let a = path.direction_at(s_ego + d);
        let b = path.direction_at(s_ego + d + 1.0);
        let dtheta = a.cross(b).asin().abs();
        kappa_max = kappa_max.max(dtheta);
        d += 1.0;
    }
    let curve_limit = if kappa_max > 1e-6 {
        (LAT_ACCEL_MAX / kappa_max).sqrt()
    } else {
        f64::INFINITY
    };
    let target = cruise.min(curve_limit);
    0.9 * (target - speed)
}

fn follow_accel(
    s: &Scenario,
    path: &Polyline,
    s_ego: f64,
    speed: f64,
    time: f64,
    world: &WorldConfig,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for o in &s.obstacles {
        let center = o.center.add(o.velocity.scale(time));
        let (s_obs, lat) = path.project(center);
        if lat.abs() > 2.0 || s_obs <= s_ego {
            continue;
        }
        let gap = s_obs - s_ego - o.extent.0 / 2.0 - world.ego_length / 2.0;
        let lead_speed = o.velocity.dot(path.direction_at(s_obs)).max(0.0);
        let desired_gap = STANDSTILL_GAP + TIME_HEADWAY * speed;
        let a = 0.35 * (gap - desired_gap) + 0.9 * (lead_speed - speed);
        best = Some(best.map_or(a, |b: f64| b.min(a)));
    }
    best
}

fn stop_accel(line_s: f64, s_ego: f64, speed: f64) -> f64 {
    let d = line_s - STOP_MARGIN - s_ego;
    if d <= 0.05 {
        return MAX_DECEL;
    }
    // constant-decel profile to rest at the target point
    -speed * speed / (2.0 * d)
}

fn red_stop_arclength(s: &Scenario, path: &Polyline) -> Option<f64> {
    let light = s.traffic_light.as_ref()?;
    if light.state != LightState::Red {
        return None;
    }
    let mid = light.stop_line.0.add(light.stop_line.1).scale(0.5);
    let (line_s, _) = path.project(mid);
    Some(line_s)
}
