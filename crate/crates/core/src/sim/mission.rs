//! UAV mission rollout: each UAV cycles the waypoints of its task circle,
//! spends energy per leg under per-leg wind gusts, and diverts to the
//! nearest road node to recharge whenever the next leg would push the
//! state of charge below the recharge threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::energy::{edge_energy, EnergyParams};
use super::graph::RoadGraph;
use super::wind::{weibull_sample, WindField};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::submodular::{GroundSet, NodeId, Selection};

/// One UAV: a task circle plus flight and battery parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UavSpecRepr", into = "UavSpecRepr")]
pub struct UavSpec {
    pub center: (f64, f64),
    pub radius: f64,
    pub waypoint_count: usize,
    pub speed: f64,
    pub battery_capacity: f64,
    pub recharge_threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct UavSpecRepr {
    center: (f64, f64),
    radius: f64,
    waypoint_count: usize,
    speed: f64,
    battery_capacity: f64,
    recharge_threshold: f64,
}

impl From<UavSpec> for UavSpecRepr {
    fn from(s: UavSpec) -> Self {
        UavSpecRepr {
            center: s.center,
            radius: s.radius,
            waypoint_count: s.waypoint_count,
            speed: s.speed,
            battery_capacity: s.battery_capacity,
            recharge_threshold: s.recharge_threshold,
        }
    }
}

impl TryFrom<UavSpecRepr> for UavSpec {
    type Error = Error;
    fn try_from(r: UavSpecRepr) -> Result<Self> {
        UavSpec::new(
            r.center,
            r.radius,
            r.waypoint_count,
            r.speed,
            r.battery_capacity,
            r.recharge_threshold,
        )
    }
}

impl UavSpec {
    pub fn new(
        center: (f64, f64),
        radius: f64,
        waypoint_count: usize,
        speed: f64,
        battery_capacity: f64,
        recharge_threshold: f64,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if waypoint_count < 2 {
            return Err(Error::invalid("waypoint count must be >= 2"));
        }
        if !(speed > 0.0) {
            return Err(Error::invalid(format!("speed must be positive, got {speed}")));
        }
        if !(battery_capacity > 0.0) {
            return Err(Error::invalid("battery capacity must be positive"));
        }
        if !(recharge_threshold > 0.0 && recharge_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "recharge threshold {recharge_threshold} outside (0, 1)"
            )));
        }
        Ok(UavSpec { center, radius, waypoint_count, speed, battery_capacity, recharge_threshold })
    }
}

/// Ordered waypoints evenly spaced on the task circle.
pub fn waypoints(spec: &UavSpec) -> Vec<(f64, f64)> {
    (0..spec.waypoint_count)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / spec.waypoint_count as f64;
            (spec.center.0 + spec.radius * angle.cos(), spec.center.1 + spec.radius * angle.sin())
        })
        .collect()
}

/// One recharge stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandingEvent {
    pub node: NodeId,
    /// The divert leg itself exceeded the remaining charge.
    pub forced: bool,
}

/// Rollout record for one UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavMissionLog {
    pub landings: Vec<LandingEvent>,
    /// Wind speeds sampled per traversed leg, in traversal order.
    pub wind_speeds: Vec<f64>,
}

/// Rollout record for a whole fleet under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionOutcome {
    pub uav_logs: Vec<UavMissionLog>,
    pub seed: u64,
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Simulates one UAV for `step_budget` leg attempts.
///
/// Per attempted task leg one wind speed is sampled. If completing the leg
/// would leave the state of charge below the threshold, the UAV instead
/// diverts straight-line to the nearest road node (its own wind draw and
/// energy), lands, recharges to full, and resumes toward the same
/// waypoint. A divert whose leg alone exceeds the remaining charge is
/// recorded as a forced landing at the same node.
pub fn simulate_uav_mission(
    spec: &UavSpec,
    field: &WindField,
    graph: &RoadGraph,
    energy: &EnergyParams,
    step_budget: usize,
    rng: &mut impl Rng,
) -> Result<UavMissionLog> {
    energy.validate()?;
    let wps = waypoints(spec);
    let mut pos = wps[0];
    let mut next_wp = 1 % wps.len();
    let mut charge = spec.battery_capacity;
    let floor = spec.recharge_threshold * spec.battery_capacity;
    let mut log = UavMissionLog { landings: Vec::new(), wind_speeds: Vec::new() };

    for _ in 0..step_budget {
        let target = wps[next_wp];
        if euclid(pos, target) < 1e-12 {
            next_wp = (next_wp + 1) % wps.len();
            continue;
        }
        let gust = weibull_sample(field, rng);
        log.wind_speeds.push(gust);
        let leg_cost = edge_energy(pos, target, gust, field.omega_o, spec.speed, energy)?;

        if charge - leg_cost < floor {
            let node = graph.nearest_node(pos);
            let node_pos = graph.coords(node);
            let divert_cost = if euclid(pos, node_pos) < 1e-12 {
                0.0
            } else {
                let divert_gust = weibull_sample(field, rng);
                log.wind_speeds.push(divert_gust);
                edge_energy(pos, node_pos, divert_gust, field.omega_o, spec.speed, energy)?
            };
            log.landings.push(LandingEvent { node, forced: divert_cost > charge });
            pos = node_pos;
            charge = spec.battery_capacity;
        } else {
            charge -= leg_cost;
            pos = target;
            next_wp = (next_wp + 1) % wps.len();
        }
    }
    Ok(log)
}

/// Simulates every UAV on its own rng stream derived from `seed`.
pub fn simulate_fleet(
    specs: &[UavSpec],
    field: &WindField,
    graph: &RoadGraph,
    energy: &EnergyParams,
    step_budget: usize,
    seed: u64,
) -> Result<MissionOutcome> {
    let uav_logs = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut rng = crate::seeded_rng(derive_seed(seed, i as u64), 0);
            simulate_uav_mission(spec, field, graph, energy, step_budget, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MissionOutcome { uav_logs, seed })
}

/// Number of UAVs recharged by a route selection: a UAV counts (once) iff
/// at least one of its landing nodes lies on a selected route.
pub fn evaluate_selection(
    selection: &Selection,
    outcome: &MissionOutcome,
    ground: &GroundSet,
) -> Result<usize> {
    let mut covered = std::collections::BTreeSet::new();
    for id in selection.ids() {
        let route = ground.route(*id)?;
        covered.extend(route.nodes.iter().copied());
    }
    Ok(outcome
        .uav_logs
        .iter()
        .filter(|log| log.landings.iter().any(|l| covered.contains(&l.node)))
        .count())
}
