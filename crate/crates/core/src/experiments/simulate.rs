//! Plain trajectory runs with summary statistics.

use serde::{Deserialize, Serialize};

use super::{steps_for, ExperimentReport, GridSpec, InitialSpec};
use crate::coefficients::{BurgersTerm, CoefficientSet, DiffusionArgument, ScalarFn};
use crate::integrator::{simulate_path, SimConfig, Trajectory};
use crate::noise::SeedSpec;
use crate::statistics::Estimate;
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub grid: GridSpec,
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub diffusion_argument: DiffusionArgument,
    pub burgers: Option<BurgersTerm>,
    pub x: InitialSpec,
    pub dt: f64,
    pub horizon: f64,
    pub damping: f64,
    /// Store every `stride`-th state for dumping; 0 keeps the endpoints only.
    pub stride: usize,
    pub paths: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            grid: GridSpec::default(),
            drift: ScalarFn::zero(),
            diffusion: ScalarFn::constant(1.0),
            diffusion_argument: DiffusionArgument::Pointwise,
            burgers: None,
            x: InitialSpec::Mode { k: 1, amplitude: 1.0 },
            dt: 1e-4,
            horizon: 0.1,
            damping: 0.0,
            stride: 10,
            paths: 4,
        }
    }
}

impl SimulateConfig {
    pub fn sim_config(&self) -> Result<SimConfig> {
        let grid = self.grid.build()?;
        let mut cs = CoefficientSet::new(self.drift.clone(), self.diffusion.clone());
        cs.diffusion_argument = self.diffusion_argument;
        cs.burgers = self.burgers.clone();
        let cfg = SimConfig::new(self.x.build(&grid)?, cs, self.dt, self.horizon)
            .with_damping(self.damping)
            .with_stride(self.stride)
            .with_sup_norm(true);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// All trajectories of a run, in path order.
pub fn simulate_trajectories(cfg: &SimulateConfig, seed: u64) -> Result<Vec<Trajectory>> {
    if cfg.paths == 0 {
        return Err(Error::invalid("paths", "need at least one path"));
    }
    steps_for(cfg.horizon, cfg.dt)?;
    let sim = cfg.sim_config()?;
    par::map(cfg.paths, |i| {
        simulate_path(&sim, &SeedSpec::new(seed, i as u64, "simulate"))
    })
    .into_iter()
    .collect()
}

pub fn run_simulate(cfg: &SimulateConfig, seed: u64) -> Result<ExperimentReport> {
    let trajectories = simulate_trajectories(cfg, seed)?;
    Ok(summarize(cfg, seed, &trajectories))
}

/// Report over already simulated trajectories.
pub fn summarize(cfg: &SimulateConfig, seed: u64, trajectories: &[Trajectory]) -> ExperimentReport {
    let mut report = ExperimentReport::new("simulate", cfg, seed);
    let finals: Vec<f64> = trajectories.iter().map(|t| t.final_state.h_norm()).collect();
    let sup_h: Vec<f64> = trajectories.iter().map(|t| t.running_sup_h).collect();
    let sup_nodal: Vec<f64> = trajectories.iter().map(|t| t.running_sup_nodal).collect();
    report.metric("|X_T|_H", Estimate::mean(&finals));
    report.metric("sup_t |X_t|_H", Estimate::mean(&sup_h));
    report.metric("sup_t |X_t|_sup", Estimate::mean(&sup_nodal));
    let blown = trajectories.iter().filter(|t| t.blew_up()).count();
    report.value(
        "exits",
        trajectories.iter().filter(|t| t.exit_time.is_some()).count() as f64,
    );
    report.check_le("no_blow_up", "paths flagged as blown up = 0", blown as f64, 0.0, 0.0);
    report.finish()
}
