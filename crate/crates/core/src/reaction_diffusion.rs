//! `r`-component reaction-diffusion systems
//!
//! ```text
//! dX_i = [A X_i + Σ_j H_ij X_j + k_i(X_i)] dt + g_i(X_i) dW_i
//! ```
//!
//! on a shared spectral grid, one independent noise stream per component.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{dissipativity_constant, CoefficientSet, Dissipativity};
use crate::integrator::{Stepper, BLOW_UP_THRESHOLD};
use crate::noise::{NoiseStream, SeedSpec};
use crate::spectral::{Field, SpectralGrid};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RdConfig {
    pub grid: Arc<SpectralGrid>,
    /// Per-component reaction `k_i` (as drift) and noise amplitude `g_i`.
    pub components: Vec<CoefficientSet>,
    /// Linear cross-coupling `H`, `r × r`; empty means none.
    pub coupling: Vec<Vec<f64>>,
    pub dt: f64,
    pub horizon: f64,
    pub initial: Vec<Field>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdSummary {
    /// `max_t max_i |X_i(t)|_{H₀}` on the nodes.
    pub running_sup: f64,
    pub blow_up: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RdRun {
    pub summary: RdSummary,
    pub final_states: Vec<Field>,
}

/// Seeds `label/i` for components `0..r`.
pub fn component_seeds(seed: &SeedSpec, r: usize) -> Vec<SeedSpec> {
    (0..r)
        .map(|i| seed.with_label(format!("{}/{i}", seed.stream_label)))
        .collect()
}

impl RdConfig {
    pub fn r(&self) -> usize {
        self.components.len()
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.r();
        if r == 0 {
            return Err(Error::invalid("components", "need at least one component"));
        }
        if self.initial.len() != r {
            return Err(Error::LengthMismatch {
                expected: r,
                found: self.initial.len(),
            });
        }
        if !self.coupling.is_empty() && (self.coupling.len() != r || self.coupling.iter().any(|row| row.len() != r)) {
            return Err(Error::invalid("coupling", format!("must be {r} × {r}")));
        }
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::invalid("dt", "time step and horizon must be positive"));
        }
        for (i, cs) in self.components.iter().enumerate() {
            cs.validate()?;
            if let Dissipativity::Unbounded = dissipativity_constant(&cs.drift) {
                return Err(Error::invalid(
                    "components",
                    format!("reaction term of component {i} is not dissipative"),
                ));
            }
            if !(cs.diffusion.floor() > 0.0) || cs.diffusion.sup_abs().is_none() {
                return Err(Error::invalid(
                    "components",
                    format!("noise amplitude of component {i} must satisfy 0 < C₁ ≤ g ≤ C₂"),
                ));
            }
        }
        if self.initial.iter().any(|f| f.grid().n_modes() != self.grid.n_modes()) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

pub fn simulate_rd(cfg: &RdConfig, seeds: &[SeedSpec]) -> Result<RdRun> {
    cfg.validate()?;
    let r = cfg.r();
    if seeds.len() != r {
        return Err(Error::LengthMismatch {
            expected: r,
            found: seeds.len(),
        });
    }
    let n = cfg.grid.n_modes();
    let streams: Vec<NoiseStream> = seeds.iter().map(NoiseStream::new).collect();
    let mut steppers: Vec<Stepper> = cfg
        .components
        .iter()
        .map(|cs| Stepper::from_parts(&cfg.grid, cs, cfg.dt, 0.0))
        .collect();
    let mut states: Vec<Vec<f64>> = cfg.initial.iter().map(|f| f.coeffs().to_vec()).collect();
    let mut dw = vec![0.0; n];
    let mut control = vec![vec![0.0; n]; r];
    let sqrt_dt = cfg.dt.sqrt();
    let mut running_sup = 0.0f64;
    let mut blow_up = None;
    let coupled = cfg.coupling.iter().flatten().any(|h| *h != 0.0);
    'outer: for m in 0..cfg.n_steps() {
        if coupled {
            for (i, ctrl) in control.iter_mut().enumerate() {
                for (k, c) in ctrl.iter_mut().enumerate() {
                    *c = (0..r).map(|j| cfg.coupling[i][j] * states[j][k]).sum();
                }
            }
        }
        for i in 0..r {
            streams[i].gaussians(m as u64, sqrt_dt, &mut dw);
            let ctrl = coupled.then_some(control[i].as_slice());
            let sup = steppers[i].step(&mut states[i], ctrl, &dw);
            if let Some(s) = sup {
                running_sup = running_sup.max(s);
                if !(s <= BLOW_UP_THRESHOLD) {
                    blow_up = Some(m as f64 * cfg.dt);
                    break 'outer;
                }
            }
            if states[i].iter().any(|a| !a.is_finite()) {
                blow_up = Some((m + 1) as f64 * cfg.dt);
                break 'outer;
            }
        }
    }
    let final_states: Vec<Field> = states
        .into_iter()
        .map(|a| Field::from_coeffs(&cfg.grid, a))
        .collect::<Result<_>>()?;
    if blow_up.is_none() {
        let end = final_states.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
        running_sup = running_sup.max(end);
        if !(end <= BLOW_UP_THRESHOLD) {
            blow_up = Some(cfg.horizon);
        }
    }
    Ok(RdRun {
        summary: RdSummary { running_sup, blow_up },
        final_states,
    })
}
