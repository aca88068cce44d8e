//! Synthetic world for the recharge-routing case study: a road graph, a
//! Weibull wind field, UAVs flying circular monitoring missions under a
//! physical energy model, candidate UGV route generation, and selection
//! scoring by the number of UAVs recharged.

mod energy;
mod graph;
mod mission;
mod partition;
mod routegen;
mod wind;

pub use energy::{
    airspeed, edge_direction, edge_energy, energy_per_distance, induced_velocity,
    relative_wind_direction, EnergyParams,
};
pub use graph::RoadGraph;
pub use mission::{
    evaluate_selection, simulate_fleet, simulate_uav_mission, waypoints, LandingEvent,
    MissionOutcome, UavMissionLog, UavSpec,
};
pub use partition::partition_graph;
pub use routegen::generate_candidate_routes;
pub use wind::{weibull_pdf, weibull_sample, WindField};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::greedy::IndependenceSystem;
use crate::submodular::{BasisFamily, CoverageObjective, GroundSet, NodePartition};

/// A UAV task circle: ordered waypoints are sampled evenly from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub center: (f64, f64),
    pub radius: f64,
}

/// Fleet-wide UAV parameters; the per-UAV circle comes from the context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavDefaults {
    pub waypoint_count: usize,
    pub speed: f64,
    pub battery_capacity: f64,
    pub recharge_threshold: f64,
}

impl Default for UavDefaults {
    fn default() -> Self {
        UavDefaults {
            waypoint_count: 8,
            speed: 10.0,
            battery_capacity: 5.0e4,
            recharge_threshold: 0.30,
        }
    }
}

/// Everything that stays fixed across contexts: the map, the candidate
/// routes, the partition/basis structure, and fleet defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub graph: RoadGraph,
    pub ground: GroundSet,
    pub partition: NodePartition,
    pub basis: BasisFamily,
    pub energy: EnergyParams,
    pub uav_defaults: UavDefaults,
    pub n_ugvs: usize,
    pub step_budget: usize,
}

impl ScenarioTemplate {
    pub fn validate(&self) -> Result<()> {
        self.ground.validate_nodes(self.graph.n_nodes())?;
        for set in self.partition.sets() {
            for node in set {
                if node.0 >= self.graph.n_nodes() {
                    return Err(crate::Error::invalid(format!(
                        "partition references node {node} outside the graph"
                    )));
                }
            }
        }
        if self.n_ugvs == 0 {
            return Err(crate::Error::invalid("n_ugvs must be >= 1"));
        }
        Ok(())
    }

    /// Materializes a full scenario from per-context circles and wind.
    pub fn instantiate(&self, circles: &[CircleSpec], wind: &WindField) -> Result<Scenario> {
        let uavs = circles
            .iter()
            .map(|c| {
                UavSpec::new(
                    c.center,
                    c.radius,
                    self.uav_defaults.waypoint_count,
                    self.uav_defaults.speed,
                    self.uav_defaults.battery_capacity,
                    self.uav_defaults.recharge_threshold,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            graph: self.graph.clone(),
            wind: *wind,
            uavs,
            energy: self.energy,
            ground: self.ground.clone(),
            partition: self.partition.clone(),
            basis: self.basis.clone(),
            n_ugvs: self.n_ugvs,
            step_budget: self.step_budget,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn objective(&self) -> CoverageObjective {
        CoverageObjective::new(self.ground.clone(), self.partition.clone(), self.basis.clone())
    }

    pub fn system(&self) -> Result<IndependenceSystem> {
        IndependenceSystem::cardinality(self.n_ugvs)
    }
}

/// One fully specified episode: template structure plus wind and fleet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub graph: RoadGraph,
    pub wind: WindField,
    pub uavs: Vec<UavSpec>,
    pub energy: EnergyParams,
    pub ground: GroundSet,
    pub partition: NodePartition,
    pub basis: BasisFamily,
    pub n_ugvs: usize,
    pub step_budget: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.ground.validate_nodes(self.graph.n_nodes())?;
        if self.n_ugvs == 0 {
            return Err(crate::Error::invalid("n_ugvs must be >= 1"));
        }
        Ok(())
    }

    /// Rolls out all UAV missions for this scenario under one seed.
    pub fn roll_out(&self, seed: u64) -> Result<MissionOutcome> {
        simulate_fleet(&self.uavs, &self.wind, &self.graph, &self.energy, self.step_budget, seed)
    }
}

/// Knobs for the bundled default map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefaultMapParams {
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub spacing: f64,
    pub n_routes: usize,
    pub removal_fraction: f64,
    pub n_partitions: usize,
    pub gammas: Vec<f64>,
    pub n_ugvs: usize,
    pub step_budget: usize,
    pub route_seed: u64,
    pub partition_seed: u64,
    pub uav_defaults: UavDefaults,
    pub energy: EnergyParams,
}

impl Default for DefaultMapParams {
    fn default() -> Self {
        DefaultMapParams {
            grid_nx: 9,
            grid_ny: 9,
            spacing: 100.0,
            n_routes: 15,
            removal_fraction: 0.7,
            n_partitions: 9,
            gammas: vec![0.001, 0.5, 1.0],
            n_ugvs: 3,
            step_budget: 60,
            route_seed: 71,
            partition_seed: 72,
            uav_defaults: UavDefaults::default(),
            energy: EnergyParams::default(),
        }
    }
}

/// Builds the bundled grid-map template: a grid road network with candidate
/// depot tours and a balanced node partition.
pub fn default_template(params: &DefaultMapParams) -> Result<ScenarioTemplate> {
    let graph = RoadGraph::grid(params.grid_nx, params.grid_ny, params.spacing, 0)?;
    let ground = generate_candidate_routes(
        &graph,
        params.n_routes,
        params.removal_fraction,
        &mut crate::seeded_rng(params.route_seed, 0),
    )?;
    let partition = partition_graph(&graph, params.n_partitions, params.partition_seed)?;
    let basis = BasisFamily::new(params.gammas.clone())?;
    let template = ScenarioTemplate {
        graph,
        ground,
        partition,
        basis,
        energy: params.energy,
        uav_defaults: params.uav_defaults,
        n_ugvs: params.n_ugvs,
        step_budget: params.step_budget,
    };
    template.validate()?;
    Ok(template)
}
