//! Burgers-type drift `(-A)^ϑ F(X)`: the deterministic operator bound and
//! the stochastic runs.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::contraction::{run_probe_with, ContractionConfig};
use super::{default_bootstrap, steps_for, ExperimentReport, GridSpec, InitialSpec};
use crate::coefficients::{mollify, CoefficientSet, ScalarFn};
use crate::coupling::BurgersExponents;
use crate::integrator::{simulate_path, SimConfig};
use crate::noise::SeedSpec;
use crate::spectral::{d_theta, SpectralGrid, SpectrumKind};
use crate::statistics::{bootstrap, decay_slope, mean, sup_moment, Estimate, FitScale};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCase {
    pub theta: f64,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersBoundConfig {
    pub cases: Vec<BoundCase>,
    pub lambdas: Vec<f64>,
    pub horizon: f64,
    /// Quadrature nodes in `log s`.
    pub quadrature_points: usize,
}

impl Default for BurgersBoundConfig {
    fn default() -> Self {
        let lap = GridSpec::new(128, SpectrumKind::Laplacian);
        BurgersBoundConfig {
            cases: vec![
                BoundCase { theta: 0.25, grid: lap },
                BoundCase { theta: 0.5, grid: lap },
                BoundCase {
                    theta: 0.75,
                    grid: GridSpec::new(64, SpectrumKind::Bilaplacian),
                },
            ],
            lambdas: vec![1e2, 1e3, 1e4],
            horizon: 1.0,
            quadrature_points: 40_000,
        }
    }
}

/// `∫₀ᵀ e^{-λs} max_k λ_k^ϑ e^{-λ_k s} ds` by the trapezoid rule in
/// `u = log s` on `[s₀, T]`, plus `λ_max^ϑ s₀` for the piece below `s₀`,
/// where the integrand is at most `λ_max^ϑ`.
pub fn burgers_integral(grid: &SpectralGrid, theta: f64, lambda: f64, horizon: f64, points: usize) -> f64 {
    let eig = grid.eigenvalues();
    let weights: Vec<f64> = eig.iter().map(|l| l.powf(theta)).collect();
    let s0 = 1e-3 / (grid.lambda_max() * (1.0 + lambda));
    let (u0, u1) = (s0.ln(), horizon.ln());
    let h = (u1 - u0) / (points - 1) as f64;
    let f = |u: f64| {
        let s = u.exp();
        let norm = eig
            .iter()
            .zip(&weights)
            .map(|(l, w)| w * (-l * s).exp())
            .fold(0.0, f64::max);
        (-lambda * s).exp() * norm * s
    };
    let mut total = 0.5 * (f(u0) + f(u1));
    for i in 1..points - 1 {
        total += f(u0 + i as f64 * h);
    }
    total * h + grid.lambda_max().powf(theta) * s0
}

/// `Γ(1-ϑ) d_ϑ λ^{ϑ-1}`.
pub fn burgers_bound(theta: f64, lambda: f64) -> f64 {
    gamma(1.0 - theta) * d_theta(theta) * lambda.powf(theta - 1.0)
}

pub fn run_burgers_bound(cfg: &BurgersBoundConfig, seed: u64) -> Result<ExperimentReport> {
    if cfg.lambdas.len() < 3 || cfg.lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::invalid(
            "lambdas",
            "need at least three positive damping rates (λ = 0 makes the bound vacuous)",
        ));
    }
    if cfg.quadrature_points < 1000 {
        return Err(Error::invalid("quadrature_points", "need at least 1000 nodes"));
    }
    let mut report = ExperimentReport::new("burgers-bound", cfg, seed);
    for case in &cfg.cases {
        if !(case.theta > 0.0 && case.theta < 1.0) {
            return Err(Error::invalid(
                "theta",
                format!("must lie in (0, 1), got {}", case.theta),
            ));
        }
        let grid = case.grid.build()?;
        let th = case.theta;
        let values: Vec<(f64, f64)> = par::map(cfg.lambdas.len(), |i| {
            let lam = cfg.lambdas[i];
            (
                lam,
                burgers_integral(&grid, th, lam, cfg.horizon, cfg.quadrature_points),
            )
        });
        let mut worst = f64::NEG_INFINITY;
        for (lam, v) in &values {
            let bound = burgers_bound(th, *lam);
            report.value(format!("integral[ϑ={th}, λ={lam}]"), *v);
            report.value(format!("bound[ϑ={th}, λ={lam}]"), bound);
            worst = worst.max(v / bound);
        }
        report.check_le(
            format!("bound[ϑ={th}]"),
            "max_λ integral / (Γ(1-ϑ) d_ϑ λ^{ϑ-1}) ≤ 1 + 0.01",
            worst,
            1.0,
            0.01,
        );
        let fit = decay_slope(&values, FitScale::LogLog)?;
        report.value(format!("slope[ϑ={th}]"), fit.slope);
        report.check_le(
            format!("slope[ϑ={th}]"),
            "|fitted slope - (ϑ - 1)| ≤ 0.05",
            (fit.slope - (th - 1.0)).abs(),
            0.0,
            0.05,
        );

        // ϑ → 0: the operator norm is e^{-λ₁ s} and the integral is closed form.
        let l1 = grid.lambda_min();
        let mut rel = 0.0f64;
        for lam in &cfg.lambdas {
            let q = burgers_integral(&grid, 0.0, *lam, cfg.horizon, cfg.quadrature_points);
            let exact = -(-(lam + l1) * cfg.horizon).exp_m1() / (lam + l1);
            rel = rel.max((q - exact).abs() / exact);
        }
        report.check_le(
            format!("theta_zero_limit[{:?}]", grid.kind()),
            "max_λ |quadrature(ϑ=0) - (1-e^{-(λ+λ₁)T})/(λ+λ₁)| / closed form ≤ 1e-4",
            rel,
            0.0,
            1e-4,
        );
    }
    Ok(report.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersSimConfig {
    pub grid: GridSpec,
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub flux: ScalarFn,
    pub theta: f64,
    pub zeta: f64,
    pub x: InitialSpec,
    pub dt: f64,
    pub horizon: f64,
    pub p: f64,
    /// Mollification levels applied to the noise amplitude.
    pub mollification_levels: Vec<u32>,
    /// Slope `c` of the linear flux `F(u) = c u` in the mean-oracle run.
    pub linear_flux: f64,
    pub paths: usize,
    pub bootstrap: usize,
    /// Coupled-pair probe with the Burgers term; `None` skips it.
    pub probe: Option<ContractionConfig>,
}

impl Default for BurgersSimConfig {
    fn default() -> Self {
        BurgersSimConfig {
            grid: GridSpec::new(64, SpectrumKind::Laplacian),
            drift: ScalarFn::zero(),
            diffusion: ScalarFn::bounded_holder(0.5, 0.5, 0.8, 1.0),
            flux: ScalarFn::Sine { amplitude: 1.0 },
            theta: 0.4,
            zeta: 1.0,
            x: InitialSpec::Mode { k: 1, amplitude: 1.0 },
            dt: 2e-4,
            horizon: 0.5,
            p: 2.0,
            mollification_levels: vec![8, 32, 128],
            linear_flux: 0.5,
            paths: 256,
            bootstrap: default_bootstrap(),
            probe: Some(ContractionConfig {
                grid: GridSpec::new(64, SpectrumKind::Laplacian),
                paths: 1000,
                shift_paths: 0,
                ..ContractionConfig::default()
            }),
        }
    }
}

struct MomentRow {
    label: String,
    estimate: Estimate,
    blow_ups: usize,
}

fn sup_moments(cfg: &SimConfig, paths: usize, p: f64, resamples: usize, seed: u64) -> Result<(Estimate, usize)> {
    let runs: Vec<_> = par::map(paths, |i| {
        simulate_path(cfg, &SeedSpec::new(seed, i as u64, "burgers/moments"))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let blow = runs.iter().filter(|t| t.blew_up()).count();
    let sups: Vec<f64> = runs.iter().map(|t| t.running_sup_h).collect();
    Ok((sup_moment(&sups, p, resamples, seed)?, blow))
}

pub fn run_burgers_sim(cfg: &BurgersSimConfig, seed: u64) -> Result<ExperimentReport> {
    let grid = cfg.grid.build()?;
    steps_for(cfg.horizon, cfg.dt)?;
    if cfg.paths < 2 {
        return Err(Error::invalid("paths", "need at least two paths"));
    }
    let x = cfg.x.build(&grid)?;
    let cs = CoefficientSet::new(cfg.drift.clone(), cfg.diffusion.clone()).with_burgers(
        cfg.flux.clone(),
        cfg.theta,
        cfg.zeta,
    );
    cs.validate()?;
    let mut report = ExperimentReport::new("burgers-sim", cfg, seed);

    // F = 0 must reproduce the base equation bit for bit.
    let base = CoefficientSet::new(cfg.drift.clone(), cfg.diffusion.clone());
    let zero_flux = base.clone().with_burgers(ScalarFn::zero(), cfg.theta, cfg.zeta);
    let probe_paths = cfg.paths.min(16);
    let differing = par::map(probe_paths, |i| -> Result<bool> {
        let s = SeedSpec::new(seed, i as u64, "burgers/degenerate");
        let a = simulate_path(&SimConfig::new(x.clone(), base.clone(), cfg.dt, cfg.horizon), &s)?;
        let b = simulate_path(&SimConfig::new(x.clone(), zero_flux.clone(), cfg.dt, cfg.horizon), &s)?;
        Ok(a.final_state.coeffs() != b.final_state.coeffs())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .filter(|d| *d)
    .count();
    report.check_le(
        "zero_flux_bitwise",
        "#{paths where F = 0 differs from the base run} = 0",
        differing as f64,
        0.0,
        0.0,
    );

    // Moments across mollification levels and a dt halving.
    let mut rows = Vec::new();
    let sim = SimConfig::new(x.clone(), cs.clone(), cfg.dt, cfg.horizon);
    let (est, blow) = sup_moments(&sim, cfg.paths, cfg.p, cfg.bootstrap, seed)?;
    rows.push(MomentRow {
        label: "raw".into(),
        estimate: est,
        blow_ups: blow,
    });
    let halved = SimConfig::new(x.clone(), cs.clone(), cfg.dt / 2.0, cfg.horizon);
    let (est, blow) = sup_moments(&halved, cfg.paths, cfg.p, cfg.bootstrap, seed)?;
    rows.push(MomentRow {
        label: "dt/2".into(),
        estimate: est,
        blow_ups: blow,
    });
    for level in &cfg.mollification_levels {
        let mut m = cs.clone();
        m.diffusion = mollify(&cfg.diffusion, *level)?;
        let sim = SimConfig::new(x.clone(), m, cfg.dt, cfg.horizon);
        let (est, blow) = sup_moments(&sim, cfg.paths, cfg.p, cfg.bootstrap, seed)?;
        rows.push(MomentRow {
            label: format!("mollified n={level}"),
            estimate: est,
            blow_ups: blow,
        });
    }
    let mut lo_max = f64::NEG_INFINITY;
    let mut hi_min = f64::INFINITY;
    let mut blow_total = 0;
    for r in &rows {
        report.metric(format!("E sup|X|^p[{}]", r.label), r.estimate);
        let (lo, hi) = r.estimate.ci95();
        lo_max = lo_max.max(lo);
        hi_min = hi_min.min(hi);
        blow_total += r.blow_ups;
    }
    report.check_le(
        "no_blow_up",
        "blow-ups across all moment runs = 0",
        blow_total as f64,
        0.0,
        0.0,
    );
    report.check_le(
        "moments_stable",
        "95% CIs of E sup|X|^p overlap across mollification levels and dt halving: max lower ≤ min upper",
        lo_max,
        hi_min,
        0.0,
    );

    // Linear flux with additive noise: the mode-1 mean follows a scalar recursion.
    let c = cfg.linear_flux;
    let lin = CoefficientSet::additive(ScalarFn::zero(), 1.0).with_burgers(
        ScalarFn::Linear {
            slope: c,
            intercept: 0.0,
        },
        cfg.theta,
        1.0,
    );
    let lin_sim = SimConfig::new(x.clone(), lin, cfg.dt, cfg.horizon);
    let a1: Vec<f64> = par::map(cfg.paths, |i| {
        simulate_path(&lin_sim, &SeedSpec::new(seed, i as u64, "burgers/linear")).map(|t| t.final_state.coeffs()[0])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let l1 = grid.lambda_min();
    let decay = (-l1 * cfg.dt).exp();
    let phi1 = -(-l1 * cfg.dt).exp_m1() / l1;
    let factor = decay + phi1 * c * l1.powf(cfg.theta);
    let oracle = x.coeffs()[0] * factor.powi(steps_for(cfg.horizon, cfg.dt)? as i32);
    let est = bootstrap(&a1, cfg.bootstrap, seed ^ 0x11, mean);
    report.metric("mean_mode1[linear flux]", est);
    report.value("mean_mode1_oracle[linear flux]", oracle);
    report.value(
        "mean_mode1_continuous[linear flux]",
        x.coeffs()[0] * ((-l1 + c * l1.powf(cfg.theta)) * cfg.horizon).exp(),
    );
    report.check_le(
        "linear_flux_mean",
        "|E a₁(T) - a₁(0)(e^{-λ₁dt} + φ₁ c λ₁^ϑ)^{T/dt}| ≤ 3·stderr",
        (est.value - oracle).abs(),
        0.0,
        3.0 * est.stderr,
    );

    if let Some(probe) = &cfg.probe {
        let probe_cfg = ContractionConfig {
            drift: cfg.drift.clone(),
            diffusion: cfg.diffusion.clone(),
            ..probe.clone()
        };
        let b = BurgersExponents {
            theta: cfg.theta,
            zeta: cfg.zeta,
        };
        let sub = run_probe_with(&probe_cfg, Some((cfg.flux.clone(), b)), "burgers/probe", seed)?;
        let gamma = sub.metric_value("gamma").map(|m| m.value).unwrap_or(f64::NAN);
        let extra = (1.0 - gamma) * (1.0 - cfg.theta) + cfg.zeta;
        report.value("burgers_contraction_power", extra);
        report.check_ge("burgers_power", "(1-γ)(1-ϑ) + ζ > 1", extra, 1.0, 0.0);
        for m in sub.metrics {
            report.metrics.push(crate::experiments::MetricRow {
                estimator: format!("probe:{}", m.estimator),
                ..m
            });
        }
        for mut c in sub.checks {
            c.name = format!("probe:{}", c.name);
            report.checks.push(c);
        }
        report.notes.extend(sub.notes);
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_zero_quadrature_matches_closed_form() {
        let g = SpectralGrid::new(64, SpectrumKind::Laplacian).unwrap();
        for lam in [10.0, 1e3] {
            let q = burgers_integral(&g, 0.0, lam, 1.0, 20_000);
            let l1 = g.lambda_min();
            let exact = -(-(lam + l1)).exp_m1() / (lam + l1);
            assert!((q / exact - 1.0).abs() < 1e-5, "{q} vs {exact}");
        }
    }

    #[test]
    fn integral_respects_bound() {
        let g = SpectralGrid::new(64, SpectrumKind::Laplacian).unwrap();
        for th in [0.25, 0.5, 0.75] {
            for lam in [1e2, 1e3] {
                let q = burgers_integral(&g, th, lam, 1.0, 20_000);
                assert!(q <= burgers_bound(th, lam) * 1.01, "ϑ={th} λ={lam}: {q}");
            }
        }
    }

    #[test]
    fn default_bound_run_passes() {
        let cfg = BurgersBoundConfig {
            quadrature_points: 10_000,
            ..Default::default()
        };
        let r = run_burgers_bound(&cfg, 0).unwrap();
        assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn small_sim_passes() {
        let cfg = BurgersSimConfig {
            grid: GridSpec::new(16, SpectrumKind::Laplacian),
            dt: 1e-3,
            horizon: 0.2,
            paths: 64,
            bootstrap: 20,
            probe: Some(ContractionConfig {
                grid: GridSpec::new(16, SpectrumKind::Laplacian),
                dt: 1e-3,
                paths: 100,
                shift_paths: 0,
                control_sigma: None,
                bootstrap: 20,
                ..ContractionConfig::default()
            }),
            ..Default::default()
        };
        let r = run_burgers_sim(&cfg, 6).unwrap();
        assert!(r.check("zero_flux_bitwise").unwrap().passed);
        assert!(r.check("linear_flux_mean").unwrap().passed, "{}", r.summary());
        assert!(r.check("no_blow_up").unwrap().passed);
    }
}
