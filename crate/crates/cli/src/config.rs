//! Run configuration: one optional section per experiment plus a global seed.
//!
//! The file format is TOML; JSON is accepted interchangeably and detected
//! from the `.json` extension or a leading `{`.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use spde_lab::coefficients::CoefficientSet;
use spde_lab::coupling::{select_coupling_exponents, BurgersExponents};
use spde_lab::experiments::{
    BurgersBoundConfig, BurgersSimConfig, ContractionConfig, ErgodicConfig, MaxIneqConfig, RdExperimentConfig,
    SimulateConfig, SmallSetConfig, WContractConfig,
};

use crate::Experiment;

pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub couple: ContractionConfig,
    pub maxineq: MaxIneqConfig,
    pub wcontract: WContractConfig,
    pub smallset: SmallSetConfig,
    pub ergodic: ErgodicConfig,
    pub burgers: BurgersSection,
    pub rd: RdExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            simulate: SimulateConfig::default(),
            couple: ContractionConfig::default(),
            maxineq: MaxIneqConfig::default(),
            wcontract: WContractConfig::default(),
            smallset: SmallSetConfig::default(),
            ergodic: ErgodicConfig::default(),
            burgers: BurgersSection::default(),
            rd: RdExperimentConfig::default(),
        }
    }
}

/// The deterministic operator bound and the stochastic Burgers simulation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurgersSection {
    pub bound: BurgersBoundConfig,
    pub sim: BurgersSimConfig,
}

fn looks_like_json(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{')
}

impl RunConfig {
    pub fn from_str_auto(text: &str, path: &Path) -> Result<Self> {
        if looks_like_json(path, text) {
            serde_json::from_str(text).with_context(|| format!("parsing JSON config {}", path.display()))
        } else {
            toml::from_str(text).with_context(|| format!("parsing TOML config {}", path.display()))
        }
    }

    /// Reads and parses a config file; semantic checks are separate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_str_auto(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Replaces every Monte Carlo sample count of `experiment`.
    pub fn override_paths(&mut self, experiment: Experiment, paths: usize) {
        match experiment {
            Experiment::Simulate => self.simulate.paths = paths,
            Experiment::Couple => self.couple.paths = paths,
            Experiment::Maxineq => self.maxineq.paths = paths,
            Experiment::Wcontract => self.wcontract.samples = paths,
            Experiment::Smallset => self.smallset.paths = paths,
            Experiment::Ergodic => self.ergodic.samples = paths,
            Experiment::Burgers => {
                self.burgers.sim.paths = paths;
                if let Some(p) = self.burgers.sim.probe.as_mut() {
                    p.paths = paths;
                }
            }
            Experiment::Rd => self.rd.paths = paths,
            Experiment::Selftest => {}
        }
    }

    /// Eager checks that would otherwise surface deep inside a run.
    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        match experiment {
            Experiment::Couple => {
                let c = &self.couple;
                let cs = CoefficientSet::new(c.drift.clone(), c.diffusion.clone());
                cs.validate().context("[couple] coefficients")?;
                select_coupling_exponents(cs.alpha(), cs.beta(), c.grid.kind.eta0(), None)
                    .context("[couple] coupling plan")?;
            }
            Experiment::Burgers => {
                let s = &self.burgers.sim;
                let cs = CoefficientSet::new(s.drift.clone(), s.diffusion.clone());
                cs.validate().context("[burgers.sim] coefficients")?;
                if let Some(probe) = &s.probe {
                    let b = BurgersExponents {
                        theta: s.theta,
                        zeta: s.zeta,
                    };
                    select_coupling_exponents(cs.alpha(), cs.beta(), probe.grid.kind.eta0(), Some(b))
                        .context("[burgers.sim.probe] coupling plan")?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}
