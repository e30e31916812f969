//! Convergence to the invariant law and the Lyapunov drift condition.
//! The invariant law is represented by long-run endpoints from `0`; every
//! such endpoint is then propagated alongside the chosen start on shared
//! noise, so the two clouds at time `t` differ only through the start.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{default_bootstrap, steps_for, ExperimentReport, GridSpec, InitialSpec};
use crate::coefficients::{CoefficientSet, ScalarFn};
use crate::integrator::{simulate_path, simulate_path_with, SimConfig};
use crate::noise::SeedSpec;
use crate::spectral::{Field, SpectralGrid};
use crate::statistics::{
    assignment_cost, bootstrap, decay_slope, lyapunov_drift_fit, mean, Cost, Estimate, FitScale, SlopeFit,
    MAX_ASSIGNMENT,
};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErgodicConfig {
    pub grid: GridSpec,
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub dt: f64,
    /// Steps from `0` used to sample the invariant law.
    pub burn_in_steps: usize,
    pub x: InitialSpec,
    /// Observation times for the distance to the invariant law.
    pub times: Vec<f64>,
    pub gamma: f64,
    /// Points with distance at or above this value are left out of the fit (the cost caps at 1).
    pub fit_cutoff: f64,
    /// Also run the `b = 0`, `σ = 1` baseline with known rate `γλ₁`.
    pub baseline: bool,
    /// Radii `|x|` for the Lyapunov fit, started along `e₁`.
    pub lyapunov_radii: Vec<f64>,
    pub lyapunov_time: f64,
    pub samples: usize,
    pub bootstrap: usize,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        ErgodicConfig {
            grid: GridSpec::new(32, crate::SpectrumKind::Laplacian),
            drift: ScalarFn::bounded_holder(0.0, 0.5, 0.6, 1.0),
            diffusion: ScalarFn::bounded_holder(0.5, 0.5, 0.8, 1.0),
            dt: 1e-4,
            burn_in_steps: 10_000,
            x: InitialSpec::Mode { k: 1, amplitude: 2.0 },
            times: (1..=10).map(|i| 0.05 * i as f64).collect(),
            gamma: 1.0,
            fit_cutoff: 0.9,
            baseline: true,
            lyapunov_radii: vec![0.0, 1.0, 3.0, 10.0, 30.0],
            lyapunov_time: 0.1,
            samples: 256,
            bootstrap: default_bootstrap(),
        }
    }
}

/// Distances `d_γ(Law(X_t^x), π̂_t)` per observation time.
fn distance_curve(
    grid: &Arc<SpectralGrid>,
    cs: &CoefficientSet,
    cfg: &ErgodicConfig,
    x: &Field,
    seed: u64,
    label: &str,
) -> Result<Vec<f64>> {
    let step_of: Vec<usize> = cfg.times.iter().map(|t| steps_for(*t, cfg.dt)).collect::<Result<_>>()?;
    let last = *step_of.iter().max().expect("times non-empty");
    let burn = SimConfig::new(
        Field::zeros(grid),
        cs.clone(),
        cfg.dt,
        cfg.burn_in_steps as f64 * cfg.dt,
    );
    let run = SimConfig::new(x.clone(), cs.clone(), cfg.dt, last as f64 * cfg.dt);
    let record = |cfg: &SimConfig, seed: &SeedSpec| -> Result<Vec<Vec<f64>>> {
        let mut out = vec![Vec::new(); step_of.len()];
        simulate_path_with(cfg, seed, |m, a| {
            for (slot, s) in out.iter_mut().zip(&step_of) {
                if *s == m {
                    *slot = a.to_vec();
                }
            }
        })?;
        Ok(out)
    };
    type Snapshots = Vec<Vec<f64>>;
    let pairs: Vec<Result<(Snapshots, Snapshots)>> = par::map(cfg.samples, |i| {
        let pi = simulate_path(&burn, &SeedSpec::new(seed, i as u64, format!("{label}/burn")))?.final_state;
        let shared = SeedSpec::new(seed, i as u64, format!("{label}/run"));
        let from_x = record(&run, &shared)?;
        let from_pi = record(&run.clone().with_initial(pi), &shared)?;
        Ok((from_x, from_pi))
    });
    let pairs: Vec<_> = pairs.into_iter().collect::<Result<_>>()?;
    let cost = Cost::d_gamma(cfg.gamma);
    (0..step_of.len())
        .map(|j| {
            let a: Vec<Vec<f64>> = pairs.iter().map(|p| p.0[j].clone()).collect();
            let b: Vec<Vec<f64>> = pairs.iter().map(|p| p.1[j].clone()).collect();
            assignment_cost(&a, &b, cost)
        })
        .collect()
}

fn rate_fit(
    report: &mut ExperimentReport,
    column: &str,
    cfg: &ErgodicConfig,
    curve: &[f64],
) -> Result<Option<SlopeFit>> {
    let mut pts = Vec::new();
    for (t, d) in cfg.times.iter().zip(curve) {
        report.value(format!("d_γ(X_t^x,π̂)[{column}, t={t:.4}]"), *d);
        if *d < cfg.fit_cutoff && *d > 0.0 {
            pts.push((*t, *d));
        }
    }
    if pts.len() < 3 {
        report.note(format!(
            "{column}: fewer than three distances below the cutoff; no rate fit"
        ));
        return Ok(None);
    }
    let fit = decay_slope(&pts, FitScale::SemiLog)?;
    report.metric(
        format!("xi[{column}]"),
        Estimate {
            value: -fit.slope,
            stderr: fit.slope_stderr,
            n_samples: pts.len(),
        },
    );
    report.value(format!("r2[{column}]"), fit.r2);
    Ok(Some(fit))
}

pub fn run_ergodicity(cfg: &ErgodicConfig, seed: u64) -> Result<ExperimentReport> {
    let grid = cfg.grid.build()?;
    if cfg.times.len() < 3 {
        return Err(Error::invalid("times", "need at least three observation times"));
    }
    if cfg.samples < 2 || cfg.samples > MAX_ASSIGNMENT {
        return Err(Error::invalid(
            "samples",
            format!("need 2 ≤ samples ≤ {MAX_ASSIGNMENT}"),
        ));
    }
    if cfg.burn_in_steps == 0 {
        return Err(Error::invalid("burn_in_steps", "must be positive"));
    }
    let cs = CoefficientSet::new(cfg.drift.clone(), cfg.diffusion.clone());
    cs.validate()?;
    if cs.drift.sup_abs().is_none() || cs.diffusion.sup_abs().is_none() {
        return Err(Error::invalid(
            "coefficients",
            "drift and noise amplitude must be bounded",
        ));
    }
    let x = cfg.x.build(&grid)?;
    let mut report = ExperimentReport::new("ergodic", cfg, seed);
    report.value("burn_in_time", cfg.burn_in_steps as f64 * cfg.dt);

    // Lyapunov drift condition for V = |x| + 1.
    let n_lyap = steps_for(cfg.lyapunov_time, cfg.dt)?;
    let mut expected = Vec::with_capacity(cfg.lyapunov_radii.len());
    for (i, r) in cfg.lyapunov_radii.iter().enumerate() {
        let start = Field::mode(&grid, 1, *r)?;
        let sim = SimConfig::new(start, cs.clone(), cfg.dt, n_lyap as f64 * cfg.dt);
        let v: Vec<f64> = par::map(cfg.samples, |p| {
            simulate_path(&sim, &SeedSpec::new(seed, p as u64, "ergodic/lyapunov"))
                .map(|t| t.final_state.h_norm() + 1.0)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let est = bootstrap(&v, cfg.bootstrap, seed ^ (i as u64 + 0x1f), mean);
        report.metric(format!("E V(X_t0)[|x|={r}]"), est);
        expected.push(est);
    }
    let fit = lyapunov_drift_fit(&cfg.lyapunov_radii, &expected)?;
    report.value("lyapunov_c", fit.c);
    report.value("lyapunov_C_V", fit.c_v);
    let ok = fit.satisfied && fit.c > 0.0 && fit.c < 1.0 && fit.c_v.is_finite();
    report.push_check(
        "lyapunov",
        "E V(X_t0) ≤ (1-c)V(x) + C_V (3·stderr slack) with c ∈ (0,1), C_V < ∞",
        fit.c,
        0.0,
        0.0,
        ok,
    );

    let curve = distance_curve(&grid, &cs, cfg, &x, seed, "ergodic/model")?;
    match rate_fit(&mut report, "model", cfg, &curve)? {
        Some(f) => {
            let xi = -f.slope;
            report.check_ge(
                "rate_positive[model]",
                "ξ̂ - 2·stderr > 0",
                xi - 2.0 * f.slope_stderr,
                0.0,
                0.0,
            );
            report.check_ge("r2[model]", "r² of the semilog fit ≥ 0.9", f.r2, 0.9, 0.0);
        }
        None => {
            report.push_check("rate_positive[model]", "ξ̂ - 2·stderr > 0", f64::NAN, 0.0, 0.0, false);
        }
    }

    if cfg.baseline {
        let base = CoefficientSet::additive(ScalarFn::zero(), 1.0);
        let curve = distance_curve(&grid, &base, cfg, &x, seed, "ergodic/baseline")?;
        let analytic = cfg.gamma * grid.lambda_min();
        report.value("xi_analytic[baseline]", analytic);
        let xi = rate_fit(&mut report, "baseline", cfg, &curve)?
            .map(|f| -f.slope)
            .unwrap_or(f64::NAN);
        report.check_le(
            "rate[baseline]",
            "|ξ̂ - γλ₁| ≤ 0.15·γλ₁",
            (xi - analytic).abs(),
            0.0,
            0.15 * analytic,
        );
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let cfg = ErgodicConfig {
            grid: GridSpec::new(16, crate::SpectrumKind::Laplacian),
            dt: 1e-3,
            burn_in_steps: 1000,
            samples: 96,
            bootstrap: 20,
            ..Default::default()
        };
        let r = run_ergodicity(&cfg, 8).unwrap();
        assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn unbounded_drift_rejected() {
        let cfg = ErgodicConfig {
            drift: ScalarFn::CubicDissipative,
            ..Default::default()
        };
        assert!(run_ergodicity(&cfg, 0).is_err());
    }
}
