//! Closed-loop driving score: nine rule-based sub-scores combined as a
//! product of penalty terms times a weighted mean of quality terms, with a
//! human-reference filter that neutralizes rules the reference driver itself
//! violates.

use serde::{Deserialize, Serialize};

use crate::scene::geom::{rects_overlap, segments_intersect, Polyline, Vec2};
use crate::scene::{collides, ego_footprint, inside_drivable, LightState, Scenario, WorldConfig};
use crate::traj::Trajectory;
use crate::{Error, Result};

/// Sub-score identifiers. The first four are multiplicative penalties; the
/// rest enter a weighted average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubScoreId {
    /// No at-fault collisions.
    Nc,
    /// Drivable-area compliance.
    Dac,
    /// Driving-direction compliance.
    Ddc,
    /// Traffic-light compliance.
    Tlc,
    /// Time-to-collision above threshold.
    Ttc,
    /// Ego progress along the route.
    Ep,
    /// History comfort (acceleration bound).
    Hc,
    /// Lane keeping (lateral offset bound).
    Lk,
    /// Extended comfort (jerk bound).
    Ec,
}

impl SubScoreId {
    pub const ALL: [SubScoreId; 9] = [
        SubScoreId::Nc,
        SubScoreId::Dac,
        SubScoreId::Ddc,
        SubScoreId::Tlc,
        SubScoreId::Ttc,
        SubScoreId::Ep,
        SubScoreId::Hc,
        SubScoreId::Lk,
        SubScoreId::Ec,
    ];

    pub const PENALTIES: [SubScoreId; 4] = [
        SubScoreId::Nc,
        SubScoreId::Dac,
        SubScoreId::Ddc,
        SubScoreId::Tlc,
    ];

    pub const WEIGHTED: [SubScoreId; 5] = [
        SubScoreId::Ttc,
        SubScoreId::Ep,
        SubScoreId::Hc,
        SubScoreId::Lk,
        SubScoreId::Ec,
    ];

    pub fn index(&self) -> usize {
        SubScoreId::ALL.iter().position(|s| s == self).unwrap()
    }

    pub fn label(&self) -> &'static str {
        match self {
            SubScoreId::Nc => "NC",
            SubScoreId::Dac => "DAC",
            SubScoreId::Ddc => "DDC",
            SubScoreId::Tlc => "TL",
            SubScoreId::Ttc => "TTC",
            SubScoreId::Ep => "EP",
            SubScoreId::Hc => "HC",
            SubScoreId::Lk => "LK",
            SubScoreId::Ec => "EC",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpdmsConfig {
    pub weight_ttc: f64,
    pub weight_ep: f64,
    pub weight_hc: f64,
    pub weight_lk: f64,
    pub weight_ec: f64,
    /// Seconds of constant-velocity lookahead below which TTC fails.
    pub ttc_threshold: f64,
    /// Longitudinal acceleration bound, m/s^2.
    pub accel_bound: f64,
    /// Lateral offset bound from the associated centerline, m.
    pub lateral_bound: f64,
    /// Jerk bound, m/s^3.
    pub jerk_bound: f64,
    /// Reference progress below which ego progress scores full marks.
    pub min_expert_progress: f64,
}

impl Default for EpdmsConfig {
    fn default() -> Self {
        Self {
            weight_ttc: 5.0,
            weight_ep: 5.0,
            weight_hc: 2.0,
            weight_lk: 2.0,
            weight_ec: 2.0,
            ttc_threshold: 1.0,
            accel_bound: 4.0,
            lateral_bound: 0.75,
            jerk_bound: 8.0,
            min_expert_progress: 0.5,
        }
    }
}

impl EpdmsConfig {
    pub fn weight(&self, id: SubScoreId) -> f64 {
        match id {
            SubScoreId::Ttc => self.weight_ttc,
            SubScoreId::Ep => self.weight_ep,
            SubScoreId::Hc => self.weight_hc,
            SubScoreId::Lk => self.weight_lk,
            SubScoreId::Ec => self.weight_ec,
            _ => 0.0,
        }
    }
}

/// All nine sub-scores for one trajectory, indexed by `SubScoreId`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubScores(pub [f64; 9]);

impl SubScores {
    pub fn get(&self, id: SubScoreId) -> f64 {
        self.0[id.index()]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpdmsReport {
    pub scenario_id: String,
    pub agent: SubScores,
    pub human: SubScores,
    pub filtered: SubScores,
    pub epdms: f64,
}

/// Reference filter: when the human reference itself scores zero on a rule,
/// the rule is neutralized (returns 1) instead of dividing by zero; otherwise
/// the agent's score passes through.
pub fn filter(m_agent: f64, m_human: f64) -> Result<f64> {
    for (v, context) in [(m_agent, "filter agent score"), (m_human, "filter human score")] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ScoreOutOfRange { value: v, context });
        }
    }
    if m_human == 0.0 {
        Ok(1.0)
    } else {
        Ok(m_agent)
    }
}

/// Aggregate filtered sub-scores: product of penalties times the weighted
/// mean of the quality terms.
pub fn epdms(agent: &SubScores, human: &SubScores, cfg: &EpdmsConfig) -> Result<f64> {
    let mut product = 1.0;
    for id in SubScoreId::PENALTIES {
        product *= filter(agent.get(id), human.get(id))?;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for id in SubScoreId::WEIGHTED {
        let w = cfg.weight(id);
        num += w * filter(agent.get(id), human.get(id))?;
        den += w;
    }
    Ok(product * num / den)
}

impl EpdmsReport {
    pub fn new(
        scenario_id: String,
        agent: SubScores,
        human: SubScores,
        cfg: &EpdmsConfig,
    ) -> Result<Self> {
        let mut filtered = [0.0; 9];
        for id in SubScoreId::ALL {
            filtered[id.index()] = filter(agent.get(id), human.get(id))?;
        }
        let score = epdms(&agent, &human, cfg)?;
        Ok(Self {
            scenario_id,
            agent,
            human,
            filtered: SubScores(filtered),
            epdms: score,
        })
    }
}

/// Score one trajectory against its scenario. The speed sequence is derived
/// from waypoint differences (the segment from the start pose to the first
/// waypoint included), so comfort terms depend only on the trajectory shape.
pub fn score_all(
    t: &Trajectory,
    s: &Scenario,
    cfg: &EpdmsConfig,
    world: &WorldConfig,
) -> Result<SubScores> {
    if t.horizon() != world.horizon {
        return Err(Error::HorizonMismatch {
            a: t.horizon(),
            b: world.horizon,
        });
    }
    let mut scores = [0.0; 9];
    scores[SubScoreId::Nc.index()] = if collides(t, s, world).is_none() {
        1.0
    } else {
        0.0
    };
    scores[SubScoreId::Dac.index()] = if inside_drivable(t, s, world) == 1.0 {
        1.0
    } else {
        0.0
    };

    let centerlines: Vec<Polyline> = s.lanes.iter().map(|l| l.center_polyline()).collect();
    scores[SubScoreId::Ddc.index()] = direction_compliance(t, &centerlines);
    scores[SubScoreId::Tlc.index()] = traffic_light_compliance(t, s);
    scores[SubScoreId::Ttc.index()] = time_to_collision_ok(t, s, cfg, world);
    scores[SubScoreId::Ep.index()] = ego_progress(t, s, cfg);

    let speeds = segment_speeds(t, s);
    let accels: Vec<f64> = speeds.windows(2).map(|w| (w[1] - w[0]) / t.dt).collect();
    let jerks: Vec<f64> = accels.windows(2).map(|w| (w[1] - w[0]) / t.dt).collect();
    let max_accel = accels.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let max_jerk = jerks.iter().fold(0.0f64, |m, j| m.max(j.abs()));
    scores[SubScoreId::Hc.index()] = if max_accel <= cfg.accel_bound { 1.0 } else { 0.0 };
    scores[SubScoreId::Ec.index()] = if max_jerk <= cfg.jerk_bound { 1.0 } else { 0.0 };
    scores[SubScoreId::Lk.index()] = lane_keeping(t, &centerlines, cfg);

    Ok(SubScores(scores))
}

/// One sub-score on its own.
pub fn subscore(
    id: SubScoreId,
    t: &Trajectory,
    s: &Scenario,
    cfg: &EpdmsConfig,
    world: &WorldConfig,
) -> Result<f64> {
    Ok(score_all(t, s, cfg, world)?.get(id))
}

fn segment_speeds(t: &Trajectory, s: &Scenario) -> Vec<f64> {
    let mut speeds = Vec::with_capacity(t.horizon());
    let mut prev = Vec2::new(s.ego_start.x, s.ego_start.y);
    for w in &t.waypoints {
        let p = Vec2::new(w.x, w.y);
        speeds.push(p.dist(prev) / t.dt);
        prev = p;
    }
    speeds
}

fn direction_compliance(t: &Trajectory, centerlines: &[Polyline]) -> f64 {
    let mut acc = 0.0;
    for w in &t.waypoints {
        let p = Vec2::new(w.x, w.y);
        let dir = nearest_centerline(p, centerlines)
            .map(|(pl, proj_s, _)| pl.direction_at(proj_s))
            .unwrap_or(Vec2::new(1.0, 0.0));
        let heading = Vec2::new(w.heading.cos(), w.heading.sin());
        acc += heading.dot(dir);
    }
    if acc / t.horizon() as f64 >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn nearest_centerline(p: Vec2, centerlines: &[Polyline]) -> Option<(&Polyline, f64, f64)> {
    let mut best: Option<(&Polyline, f64, f64)> = None;
    for pl in centerlines {
        let (proj_s, _) = pl.project(p);
        let d = pl.point_at(proj_s).dist(p);
        if best.is_none_or(|(_, _, bd)| d < bd) {
            best = Some((pl, proj_s, d));
        }
    }
    best
}

fn traffic_light_compliance(t: &Trajectory, s: &Scenario) -> f64 {
    let light = match &s.traffic_light {
        Some(l) if l.state == LightState::Red => l,
        _ => return 1.0,
    };
    let mut prev = Vec2::new(s.ego_start.x, s.ego_start.y);
    for w in &t.waypoints {
        let p = Vec2::new(w.x, w.y);
        if segments_intersect(prev, p, light.stop_line.0, light.stop_line.1) {
            return 0.0;
        }
        prev = p;
    }
    1.0
}

fn time_to_collision_ok(
    t: &Trajectory,
    s: &Scenario,
    cfg: &EpdmsConfig,
    world: &WorldConfig,
) -> f64 {
    const TAU_STEP: f64 = 0.1;
    let mut prev = Vec2::new(s.ego_start.x, s.ego_start.y);
    for (i, w) in t.waypoints.iter().enumerate() {
        let time = (i + 1) as f64 * t.dt;
        let p = Vec2::new(w.x, w.y);
        let vel = p.sub(prev).scale(1.0 / t.dt);
        let mut tau = TAU_STEP;
        while tau < cfg.ttc_threshold + 1e-9 {
            let future = crate::traj::Pose2D::new(p.x + vel.x * tau, p.y + vel.y * tau, w.heading);
            let ego = ego_footprint(&future, world);
            for o in &s.obstacles {
                if rects_overlap(&ego, &o.footprint_at(time + tau)) {
                    return 0.0;
                }
            }
            tau += TAU_STEP;
        }
        prev = p;
    }
    1.0
}

fn ego_progress(t: &Trajectory, s: &Scenario, cfg: &EpdmsConfig) -> f64 {
    let path = s.route_path();
    let progress = |traj: &Trajectory| -> f64 {
        let start = path.project(Vec2::new(s.ego_start.x, s.ego_start.y)).0;
        let last = traj.waypoints.last().expect("non-empty trajectory");
        let end = path.project(Vec2::new(last.x, last.y)).0;
        (end - start).max(0.0)
    };
    let expert_progress = progress(&s.expert);
    if expert_progress < cfg.min_expert_progress {
        return 1.0;
    }
    (progress(t) / expert_progress).clamp(0.0, 1.0)
}

fn lane_keeping(t: &Trajectory, centerlines: &[Polyline], cfg: &EpdmsConfig) -> f64 {
    for w in &t.waypoints {
        let p = Vec2::new(w.x, w.y);
        let d = nearest_centerline(p, centerlines)
            .map(|(_, _, d)| d)
            .unwrap_or(f64::INFINITY);
        if d > cfg.lateral_bound {
            return 0.0;
        }
    }
    1.0
}

/// Corpus aggregate: arithmetic means of the final score and of every
/// sub-score column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub count: usize,
    pub mean_epdms: f64,
    pub mean_agent: SubScores,
}

pub fn corpus_epdms(reports: &[EpdmsReport]) -> Result<CorpusSummary> {
    if reports.is_empty() {
        return Err(Error::EmptyInput {
            context: "corpus_epdms",
        });
    }
    let n = reports.len() as f64;
    let mean_epdms = reports.iter().map(|r| r.epdms).sum::<f64>() / n;
    let mut mean = [0.0; 9];
    for r in reports {
        for (m, v) in mean.iter_mut().zip(&r.agent.0) {
            *m += v / n;
        }
    }
    Ok(CorpusSummary {
        count: reports.len(),
        mean_epdms,
        mean_agent: SubScores(mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: f64) -> SubScores {
        SubScores([v; 9])
    }

    #[test]
    fn filter_matches_reference_semantics_exhaustively() {
        let grid = [0.0, 0.25, 0.5, 1.0];
        for &agent in &grid {
            for &human in &grid {
                let expected = if human == 0.0 { 1.0 } else { agent };
                assert_eq!(filter(agent, human).unwrap(), expected);
            }
        }
        assert!(filter(1.5, 0.5).is_err());
        assert!(filter(0.5, -0.1).is_err());
    }

    #[test]
    fn epdms_perfect_scores_give_one() {
        let cfg = EpdmsConfig::default();
        assert_eq!(epdms(&uniform(1.0), &uniform(1.0), &cfg).unwrap(), 1.0);
    }

    #[test]
    fn any_zero_penalty_forces_zero() {
        let cfg = EpdmsConfig::default();
        for id in SubScoreId::PENALTIES {
            let mut agent = uniform(1.0);
            agent.0[id.index()] = 0.0;
            assert_eq!(epdms(&agent, &uniform(1.0), &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn hand_computed_weighted_mean_reproduces() {
        // penalties all 1; weighted terms (1, 0.5, 1, 1, 1) with weights
        // (5, 5, 2, 2, 2) -> (5 + 2.5 + 2 + 2 + 2) / 16 = 0.84375
        let cfg = EpdmsConfig::default();
        let mut agent = uniform(1.0);
        agent.0[SubScoreId::Ep.index()] = 0.5;
        let got = epdms(&agent, &uniform(1.0), &cfg).unwrap();
        assert!((got - 0.84375).abs() < 1e-12, "{got}");
    }

    #[test]
    fn human_zero_neutralizes_agent_failure() {
        let cfg = EpdmsConfig::default();
        let mut agent = uniform(1.0);
        let mut human = uniform(1.0);
        agent.0[SubScoreId::Lk.index()] = 0.0;
        human.0[SubScoreId::Lk.index()] = 0.0;
        assert_eq!(epdms(&agent, &human, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn corpus_mean_is_stable_under_duplication() {
        let cfg = EpdmsConfig::default();
        let mut agent = uniform(1.0);
        agent.0[SubScoreId::Ep.index()] = 0.25;
        let r = EpdmsReport::new("a".into(), agent, uniform(1.0), &cfg).unwrap();
        let single = corpus_epdms(&[r.clone()]).unwrap();
        assert_eq!(single.mean_epdms, r.epdms);
        let pair = [r.clone(), r.clone()];
        let doubled = corpus_epdms(&pair).unwrap();
        assert!((doubled.mean_epdms - single.mean_epdms).abs() < 1e-15);
        assert!(corpus_epdms(&[]).is_err());
    }

    #[test]
    fn corpus_mean_matches_scalar_loop_oracle() {
        let cfg = EpdmsConfig::default();
        let mut reports = Vec::new();
        let mut state = 0x1234_5678u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64 / 2.0) % 1.0
        };
        for i in 0..100 {
            let mut agent = [0.0; 9];
            for a in &mut agent {
                *a = rand01().clamp(0.0, 1.0);
            }
            reports.push(
                EpdmsReport::new(format!("s{i}"), SubScores(agent), uniform(1.0), &cfg).unwrap(),
            );
        }
        let summary = corpus_epdms(&reports).unwrap();
        let mut acc = 0.0;
        for r in &reports {
            acc += r.epdms;
        }
        assert!((summary.mean_epdms - acc / 100.0).abs() < 1e-12);
        for id in SubScoreId::ALL {
            let mut col = 0.0;
            for r in &reports {
                col += r.agent.get(id);
            }
            assert!((summary.mean_agent.get(id) - col / 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn epdms_is_monotone_in_every_filtered_subscore() {
        let cfg = EpdmsConfig::default();
        let mut state = 99u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 40) & 0xffff) as f64 / 65535.0
        };
        for _ in 0..200 {
            let mut base = [0.0; 9];
            for b in &mut base {
                *b = rand01();
            }
            let human = uniform(1.0);
            let s0 = epdms(&SubScores(base), &human, &cfg).unwrap();
            assert!((0.0..=1.0).contains(&s0));
            for id in SubScoreId::ALL {
                let mut bumped = base;
                bumped[id.index()] = (bumped[id.index()] + 0.3).min(1.0);
                let s1 = epdms(&SubScores(bumped), &human, &cfg).unwrap();
                assert!(s1 >= s0 - 1e-12, "raising {id:?} lowered the score");
            }
        }
    }
}
