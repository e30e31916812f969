//! Seeded experiment recipes. Each runner is a deterministic function of its
//! config and base seed and returns an [`ExperimentReport`] whose checks
//! carry the inequality tested, both sides and the slack used.

mod burgers;
mod contraction;
mod ergodic;
mod maxineq;
mod reaction;
mod report;
mod selftest;
mod simulate;
mod smallset;
mod wcontract;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::noise::NoiseStream;
use crate::spectral::{Field, SpectralGrid, SpectrumKind};
use crate::{Error, Result};

pub use burgers::{run_burgers_bound, run_burgers_sim, BurgersBoundConfig, BurgersSimConfig};
pub use contraction::{run_contraction_probe, ContractionConfig};
pub use ergodic::{run_ergodicity, ErgodicConfig};
pub use maxineq::{run_maximal_inequality, MaxIneqConfig, Phi};
pub use reaction::{run_reaction_diffusion, RdExperimentConfig};
pub use report::{Check, ExperimentReport, MetricRow};
pub use selftest::run_selftest;
pub use simulate::{run_simulate, simulate_trajectories, summarize, SimulateConfig};
pub use smallset::{run_small_set_visit, SmallSetConfig};
pub use wcontract::{run_wasserstein_contraction, WContractConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub n_modes: usize,
    pub kind: SpectrumKind,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_modes: 128,
            kind: SpectrumKind::Laplacian,
        }
    }
}

impl GridSpec {
    pub fn new(n_modes: usize, kind: SpectrumKind) -> Self {
        GridSpec { n_modes, kind }
    }

    pub fn build(&self) -> Result<Arc<SpectralGrid>> {
        SpectralGrid::new(self.n_modes, self.kind)
    }
}

/// Initial condition descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum InitialSpec {
    #[default]
    Zero,
    /// `amplitude · e_k`
    Mode {
        k: usize,
        amplitude: f64,
    },
    /// Nodal values all equal to `value`.
    Constant {
        value: f64,
    },
    Coefficients {
        values: Vec<f64>,
    },
}

impl InitialSpec {
    pub fn build(&self, grid: &Arc<SpectralGrid>) -> Result<Field> {
        match self {
            InitialSpec::Zero => Ok(Field::zeros(grid)),
            InitialSpec::Mode { k, amplitude } => Field::mode(grid, *k, *amplitude),
            InitialSpec::Constant { value } => Field::from_values(grid, vec![*value; grid.n_modes()]),
            InitialSpec::Coefficients { values } => Field::from_coeffs(grid, values.clone()),
        }
    }
}

/// `T / dt` as an integer, refusing horizons that are not multiples of `dt`.
pub(crate) fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    let ratio = horizon / dt;
    if !(dt > 0.0) || (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) || ratio.round() < 1.0 {
        return Err(Error::invalid(
            "dt",
            format!("horizon {horizon} is not a positive multiple of dt {dt}"),
        ));
    }
    Ok(ratio.round() as usize)
}

/// Unit vector in coefficient space drawn from the direction stream.
pub(crate) fn random_direction(stream: &NoiseStream, index: u64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    stream.standard_normals(index, &mut v);
    let norm = crate::spectral::l2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn default_seed() -> u64 {
    20240601
}

pub(crate) fn default_bootstrap() -> usize {
    crate::statistics::DEFAULT_BOOTSTRAP
}

/// Global settings shared by every experiment section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { seed: default_seed() }
    }
}
