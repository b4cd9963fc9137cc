//! Ground-truth perception features: an ego-centered multi-channel BEV
//! raster plus per-entity token vectors. These stand in for learned
//! perception and form the conditioning input of the planner.

use serde::{Deserialize, Serialize};

use super::geom::{Polyline, Vec2};
use super::{LightState, Scenario};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerceptionConfig {
    /// Raster is `grid` x `grid` cells.
    pub grid: usize,
    /// Side length in meters of the ego-centered square the raster covers.
    pub span: f64,
    /// Centerline samples per map token.
    pub map_points: usize,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            grid: 32,
            span: 64.0,
            map_points: 8,
        }
    }
}

pub const BEV_CHANNELS: usize = 4;
pub const OBJECT_TOKEN_WIDTH: usize = 8;
pub const EGO_TOKEN_WIDTH: usize = 3;

/// Raster channel order.
pub const CH_DRIVABLE: usize = 0;
pub const CH_LANE_PROXIMITY: usize = 1;
pub const CH_OBSTACLE: usize = 2;
pub const CH_STOP_LINE: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerceptionBundle {
    /// Channel-major raster, `BEV_CHANNELS * grid * grid` values in [0, 1].
    pub bev: Vec<f64>,
    pub grid: usize,
    /// Ego kinematic state (speed, heading cos/sin); rides with the sparse
    /// instance stream. Without it the reference speed profile would be
    /// unobservable to the planner.
    pub ego_token: [f64; EGO_TOKEN_WIDTH],
    pub object_tokens: Vec<Vec<f64>>,
    pub map_tokens: Vec<Vec<f64>>,
    pub command_token: [f64; 4],
}

impl PerceptionBundle {
    pub fn channel(&self, ch: usize) -> &[f64] {
        let cells = self.grid * self.grid;
        &self.bev[ch * cells..(ch + 1) * cells]
    }
}

pub fn extract_perception(s: &Scenario, cfg: &PerceptionConfig) -> PerceptionBundle {
    let g = cfg.grid;
    let cell = cfg.span / g as f64;
    let ego = Vec2::new(s.ego_start.x, s.ego_start.y);
    let origin = ego.sub(Vec2::new(cfg.span / 2.0, cfg.span / 2.0));
    let mut bev = vec![0.0; BEV_CHANNELS * g * g];

    let centerlines: Vec<Polyline> = s.lanes.iter().map(|l| l.center_polyline()).collect();
    let sigma = 2.0;

    for row in 0..g {
        for col in 0..g {
            let p = origin.add(Vec2::new(
                (col as f64 + 0.5) * cell,
                (row as f64 + 0.5) * cell,
            ));
            let idx = row * g + col;
            if s.drivable_area.contains(p) {
                bev[CH_DRIVABLE * g * g + idx] = 1.0;
            }
            let mut min_d = f64::INFINITY;
            for pl in &centerlines {
                let (proj_s, _) = pl.project(p);
                min_d = min_d.min(pl.point_at(proj_s).dist(p));
            }
            if min_d.is_finite() {
                bev[CH_LANE_PROXIMITY * g * g + idx] =
                    (-min_d * min_d / (2.0 * sigma * sigma)).exp();
            }
            for o in &s.obstacles {
                if point_in_rect(p, o) {
                    bev[CH_OBSTACLE * g * g + idx] = 1.0;
                    break;
                }
            }
            if let Some(light) = &s.traffic_light {
                let d = point_segment_distance(p, light.stop_line.0, light.stop_line.1);
                if d <= 0.75 * cell {
                    bev[CH_STOP_LINE * g * g + idx] = match light.state {
                        LightState::Red => 1.0,
                        LightState::Green => 0.5,
                    };
                }
            }
        }
    }

    let object_tokens = s
        .obstacles
        .iter()
        .map(|o| {
            vec![
                o.center.x - ego.x,
                o.center.y - ego.y,
                o.extent.0,
                o.extent.1,
                o.heading.sin(),
                o.heading.cos(),
                o.velocity.x,
                o.velocity.y,
            ]
        })
        .collect();

    let map_tokens = s
        .lanes
        .iter()
        .map(|l| {
            let samples = l.center_polyline().resample(cfg.map_points);
            let mut token = Vec::with_capacity(2 * cfg.map_points);
            for p in samples {
                token.push(p.x - ego.x);
                token.push(p.y - ego.y);
            }
            token
        })
        .collect();

    PerceptionBundle {
        bev,
        grid: g,
        ego_token: [
            s.ego_speed,
            s.ego_start.heading.cos(),
            s.ego_start.heading.sin(),
        ],
        object_tokens,
        map_tokens,
        command_token: s.command.one_hot(),
    }
}

fn point_in_rect(p: Vec2, o: &super::Obstacle) -> bool {
    let rel = p.sub(o.center);
    let (sin, cos) = o.heading.sin_cos();
    let local_x = rel.x * cos + rel.y * sin;
    let local_y = -rel.x * sin + rel.y * cos;
    local_x.abs() <= o.extent.0 / 2.0 && local_y.abs() <= o.extent.1 / 2.0
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let t = if len2 > 1e-12 {
        (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(a.add(ab.scale(t)))
}
