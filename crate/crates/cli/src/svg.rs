//! SVG scene rendering: map geometry, obstacles, the anchor set, the
//! reference trajectory (green), and the selected plan (purple).

use anchorplan_core::anchors::{AnchorProvenance, AnchorSet};
use anchorplan_core::diffusion::PlanResult;
use anchorplan_core::scene::geom::Vec2;
use anchorplan_core::scene::{LightState, Scenario, WorldConfig};
use anchorplan_core::traj::Trajectory;
use std::fmt::Write as _;

/// Affine world-to-viewport map: uniform scale, y flipped.
#[derive(Debug, Clone, Copy)]
pub struct ViewTransform {
    pub scale: f64,
    pub min_x: f64,
    pub max_y: f64,
    pub pad: f64,
}

impl ViewTransform {
    pub fn fit(scenario: &Scenario, scale: f64, pad: f64) -> Self {
        let mut min_x = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for v in &scenario.drivable_area.vertices {
            min_x = min_x.min(v.x);
            max_y = max_y.max(v.y);
        }
        for o in &scenario.obstacles {
            min_x = min_x.min(o.center.x - 6.0);
            max_y = max_y.max(o.center.y + 6.0);
        }
        Self {
            scale,
            min_x,
            max_y,
            pad,
        }
    }

    pub fn to_svg(&self, p: Vec2) -> (f64, f64) {
        (
            self.pad + (p.x - self.min_x) * self.scale,
            self.pad + (self.max_y - p.y) * self.scale,
        )
    }

    pub fn from_svg(&self, x: f64, y: f64) -> Vec2 {
        Vec2::new(
            (x - self.pad) / self.scale + self.min_x,
            self.max_y - (y - self.pad) / self.scale,
        )
    }

    fn extent(&self, scenario: &Scenario) -> (f64, f64) {
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        for v in &scenario.drivable_area.vertices {
            max_x = max_x.max(v.x);
            min_y = min_y.min(v.y);
        }
        for o in &scenario.obstacles {
            max_x = max_x.max(o.center.x + 6.0);
            min_y = min_y.min(o.center.y - 6.0);
        }
        (
            (max_x - self.min_x) * self.scale + 2.0 * self.pad,
            (self.max_y - min_y) * self.scale + 2.0 * self.pad,
        )
    }
}

const DYNAMIC_COLORS: [&str; 4] = ["#1f77b4", "#17becf", "#2ca02c", "#d62728"];

pub fn render_scene(
    scenario: &Scenario,
    anchors: &AnchorSet,
    plan: &PlanResult,
    world: &WorldConfig,
) -> String {
    let vt = ViewTransform::fit(scenario, 8.0, 20.0);
    let (w, h) = vt.extent(scenario);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w:.1} {h:.1}\" width=\"{w:.1}\" height=\"{h:.1}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"#fcfcfc\"/>");

    // drivable surface
    let _ = writeln!(
        svg,
        "<polygon class=\"drivable\" points=\"{}\" fill=\"#ececec\" stroke=\"#c4c4c4\" stroke-width=\"1\"/>",
        points_attr(&vt, scenario.drivable_area.vertices.iter().copied())
    );

    // lane geometry
    for lane in &scenario.lanes {
        let _ = writeln!(
            svg,
            "<polyline class=\"lane-center\" points=\"{}\" fill=\"none\" stroke=\"#bdbdbd\" stroke-width=\"1\" stroke-dasharray=\"6 6\"/>",
            points_attr(&vt, lane.centerline.iter().copied())
        );
        for boundary in [&lane.left_boundary, &lane.right_boundary] {
            let _ = writeln!(
                svg,
                "<polyline class=\"lane-boundary\" points=\"{}\" fill=\"none\" stroke=\"#9a9a9a\" stroke-width=\"1.2\"/>",
                points_attr(&vt, boundary.iter().copied())
            );
        }
    }

    if let Some(light) = &scenario.traffic_light {
        let color = match light.state {
            LightState::Red => "#cc2222",
            LightState::Green => "#2a9d2a",
        };
        let (x1, y1) = vt.to_svg(light.stop_line.0);
        let (x2, y2) = vt.to_svg(light.stop_line.1);
        let _ = writeln!(
            svg,
            "<line class=\"stop-line\" x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{color}\" stroke-width=\"3\"/>"
        );
    }

    for o in &scenario.obstacles {
        let corners = o.footprint_at(0.0).corners();
        let _ = writeln!(
            svg,
            "<polygon class=\"obstacle\" points=\"{}\" fill=\"#e8933a\" stroke=\"#b06a1d\" stroke-width=\"1\"/>",
            points_attr(&vt, corners.iter().copied())
        );
    }

    // anchor set: static in gray, dynamic in distinct colors
    for (anchor, provenance) in anchors.anchors.iter().zip(&anchors.provenance) {
        let pts = points_attr(
            &vt,
            (0..anchor.horizon()).map(|i| {
                let (x, y) = anchor.point(i);
                Vec2::new(x, y)
            }),
        );
        match provenance {
            AnchorProvenance::Static(_) => {
                let _ = writeln!(
                    svg,
                    "<polyline class=\"anchor anchor-static\" points=\"{pts}\" fill=\"none\" stroke=\"#8a8a8a\" stroke-width=\"1\" opacity=\"0.6\"/>"
                );
            }
            AnchorProvenance::Dynamic(i) => {
                let color = DYNAMIC_COLORS[i % DYNAMIC_COLORS.len()];
                let _ = writeln!(
                    svg,
                    "<polyline class=\"anchor anchor-dynamic\" points=\"{pts}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" opacity=\"0.9\"/>"
                );
            }
        }
    }

    // reference trajectory in green, selected plan in purple
    let _ = writeln!(
        svg,
        "<polyline class=\"expert\" points=\"{}\" fill=\"none\" stroke=\"#1f9d2f\" stroke-width=\"2.2\"/>",
        traj_points(&vt, &scenario.expert)
    );
    let _ = writeln!(
        svg,
        "<polyline class=\"selected\" points=\"{}\" fill=\"none\" stroke=\"#7d2fa0\" stroke-width=\"2.6\"/>",
        traj_points(&vt, plan.selected_trajectory())
    );

    // ego footprint at the start pose
    let ego = anchorplan_core::scene::ego_footprint(&scenario.ego_start, world);
    let _ = writeln!(
        svg,
        "<polygon class=\"ego\" points=\"{}\" fill=\"#3b4d61\" stroke=\"#22303f\" stroke-width=\"1\"/>",
        points_attr(&vt, ego.corners().iter().copied())
    );

    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"16\" font-family=\"monospace\" font-size=\"12\" fill=\"#333\">{}</text>",
        vt.pad,
        scenario.id
    );
    svg.push_str("</svg>\n");
    svg
}

fn points_attr(vt: &ViewTransform, points: impl Iterator<Item = Vec2>) -> String {
    let mut out = String::new();
    for p in points {
        let (x, y) = vt.to_svg(p);
        if !out.is_empty() {
            out.push(' ');
        }
        let _ = write!(out, "{x:.3},{y:.3}");
    }
    out
}

fn traj_points(vt: &ViewTransform, t: &Trajectory) -> String {
    points_attr(vt, t.waypoints.iter().map(|w| Vec2::new(w.x, w.y)))
}
