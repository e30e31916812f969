//! Coupled-pair exceedance probabilities and the Girsanov ledger per
//! starting distance `δ`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{default_bootstrap, steps_for, ExperimentReport, GridSpec};
use crate::coefficients::{CoefficientSet, ScalarFn};
use crate::coupling::{BurgersExponents, CouplingPlan, EntropyLedger};
use crate::integrator::{simulate_coupled_pair, Feedback, SimConfig, MAX_FEEDBACK_STEP};
use crate::noise::{NoiseStream, SeedSpec};
use crate::spectral::{Field, SpectralGrid};
use crate::statistics::{decay_slope, proportion, Estimate, FitScale};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractionConfig {
    pub grid: GridSpec,
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub dt: f64,
    pub horizon: f64,
    /// Starting distances `δ = |x - y|`, with `x = 0` and `y = δ e₁`.
    pub deltas: Vec<f64>,
    /// Feedback switches off once `|X - Ỹ| ≥ threshold · δ`.
    pub threshold: f64,
    /// Additive-noise control column with this constant `σ`.
    pub control_sigma: Option<f64>,
    /// Paths for the one-dimensional Gaussian-shift total-variation oracle; 0 skips it.
    pub shift_paths: usize,
    pub paths: usize,
    pub bootstrap: usize,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        ContractionConfig {
            grid: GridSpec::new(128, crate::SpectrumKind::Laplacian),
            drift: ScalarFn::zero(),
            diffusion: ScalarFn::bounded_holder(0.5, 0.5, 0.8, 1.0),
            dt: 2.5e-4,
            horizon: 0.04,
            deltas: vec![0.1, 0.05, 0.025],
            threshold: 2.0,
            control_sigma: Some(1.0),
            shift_paths: 40_000,
            paths: 4000,
            bootstrap: default_bootstrap(),
        }
    }
}

/// Per-`δ` outcome of a batch of coupled pairs.
#[derive(Debug, Clone)]
pub(crate) struct DeltaOutcome {
    pub delta: f64,
    pub gain: f64,
    pub final_exceed: usize,
    pub sup_exceed: usize,
    pub blow_ups: usize,
    pub energies: Vec<f64>,
    pub log_lr: Vec<f64>,
}

impl DeltaOutcome {
    pub fn paths(&self) -> usize {
        self.energies.len()
    }
}

/// `δ` values whose feedback gain satisfies `gain·dt ≤ 0.1`, in input order.
pub(crate) fn admissible_deltas(plan: &CouplingPlan, deltas: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    deltas.iter().partition(|d| plan.gain(**d) * dt <= MAX_FEEDBACK_STEP)
}

/// Runs `paths` coupled pairs for every `δ`; the noise label is shared
/// across `δ` so the columns are driven by common random numbers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn probe_deltas(
    grid: &Arc<SpectralGrid>,
    cs: &CoefficientSet,
    plan: &CouplingPlan,
    deltas: &[f64],
    dt: f64,
    horizon: f64,
    threshold: f64,
    paths: usize,
    seed: &SeedSpec,
) -> Result<Vec<DeltaOutcome>> {
    deltas
        .iter()
        .map(|&delta| {
            let gain = plan.gain(delta);
            let x = Field::zeros(grid);
            let y = Field::mode(grid, 1, delta)?;
            let cfg_x = SimConfig::new(x, cs.clone(), dt, horizon);
            let cfg_y = SimConfig::new(y, cs.clone(), dt, horizon).with_feedback(Feedback { gain, threshold });
            cfg_y.validate()?;
            let runs = par::map(paths, |p| {
                simulate_coupled_pair(&cfg_x, &cfg_y, &seed.with_path(p as u64))
            });
            let mut out = DeltaOutcome {
                delta,
                gain,
                final_exceed: 0,
                sup_exceed: 0,
                blow_ups: 0,
                energies: Vec::with_capacity(paths),
                log_lr: Vec::with_capacity(paths),
            };
            for run in runs {
                let run = run?;
                out.final_exceed += usize::from(run.final_distance >= delta / 2.0);
                out.sup_exceed += usize::from(run.sup_distance >= 2.0 * delta);
                out.blow_ups += usize::from(run.x.blew_up() || run.y.blew_up());
                out.energies.push(run.girsanov_energy);
                out.log_lr.push(run.log_likelihood_ratio);
            }
            Ok(out)
        })
        .collect()
}

/// Records probabilities, the entropy ledger and the monotonicity and
/// power-fit checks of one probe column.
pub(crate) fn record_probe(
    report: &mut ExperimentReport,
    column: &str,
    outcomes: &[DeltaOutcome],
    plan: &CouplingPlan,
    horizon: f64,
    resamples: usize,
    seed: u64,
) -> Result<()> {
    let gamma = plan.gamma();
    for (i, o) in outcomes.iter().enumerate() {
        let tag = format!("[{column}, δ={}]", o.delta);
        let n = o.paths();
        report.value(format!("gain{tag}"), o.gain);
        report.metric(format!("P(|X_T-Y_T|≥δ/2){tag}"), proportion(o.final_exceed, n));
        report.metric(format!("P(sup|X-Y|≥2δ){tag}"), proportion(o.sup_exceed, n));
        report.value(format!("blow_ups{tag}"), o.blow_ups as f64);
        let ledger = EntropyLedger::from_paths(&o.energies, &o.log_lr, resamples, seed ^ (i as u64 + 0x51))?;
        report.metric(format!("girsanov_energy{tag}"), Estimate::mean(&o.energies));
        report.value(format!("entropy{tag}"), ledger.entropy);
        report.value(format!("pinsker_bound{tag}"), ledger.pinsker_bound);
        report.value(format!("sqrt(T)·δ^γ{tag}"), horizon.sqrt() * o.delta.powf(gamma));
        report.metric(format!("tv_likelihood_ratio{tag}"), ledger.tv_estimate);
        report.check_le(
            format!("pinsker_consistency{tag}"),
            "½E|1-LR| ≤ min(1, √(2H)) + 3·stderr",
            ledger.tv_estimate.value,
            ledger.pinsker_bound,
            3.0 * ledger.tv_estimate.stderr,
        );
    }
    let mut by_delta: Vec<&DeltaOutcome> = outcomes.iter().collect();
    by_delta.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    for (label, count) in [
        (
            "final",
            (|o: &DeltaOutcome| o.final_exceed) as fn(&DeltaOutcome) -> usize,
        ),
        ("sup", |o: &DeltaOutcome| o.sup_exceed),
    ] {
        let probs: Vec<f64> = by_delta.iter().map(|o| count(o) as f64 / o.paths() as f64).collect();
        let worst_rise = probs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        report.check_le(
            format!("monotone_{label}[{column}]"),
            "P(δ) non-increasing as δ decreases: max_i (P(δ_{i+1}) - P(δ_i)) ≤ 0",
            if probs.len() < 2 { 0.0 } else { worst_rise.max(0.0) },
            0.0,
            0.0,
        );
        if by_delta.len() >= 3 {
            let pts: Vec<(f64, f64)> = by_delta
                .iter()
                .map(|o| (o.delta, (count(o) as f64 + 0.5) / (o.paths() as f64 + 1.0)))
                .collect();
            let fit = decay_slope(&pts, FitScale::LogLog)?;
            report.metric(
                format!("power_{label}[{column}]"),
                Estimate {
                    value: fit.slope,
                    stderr: fit.slope_stderr,
                    n_samples: pts.len(),
                },
            );
            report.check_ge(
                format!("power_{label}[{column}]"),
                "log-log slope of P in δ (pseudo-count (k+½)/(n+1)) ≥ 2γ - 0.25",
                fit.slope,
                2.0 * gamma - 0.25,
                0.0,
            );
        }
    }
    Ok(())
}

/// TV between `N(0, 1)` and `N(a, 1)` estimated as `½E|1 - LR|` with
/// `LR = exp(aW - a²/2)`, against `2Φ(a/2) - 1`.
pub fn gaussian_shift_tv(shift: f64, paths: usize, resamples: usize, seed: u64) -> Result<(Estimate, f64)> {
    let stream = NoiseStream::new(&SeedSpec::new(seed, 0, "couple/shift"));
    let lr: Vec<f64> = par::map(paths, |i| {
        let mut w = [0.0];
        stream.standard_normals(i as u64, &mut w);
        (shift * w[0] - 0.5 * shift * shift).exp()
    });
    let est = crate::coupling::tv_from_likelihood_ratio(&lr, resamples, seed)?;
    let normal = Normal::standard();
    Ok((est, 2.0 * normal.cdf(shift / 2.0) - 1.0))
}

pub fn run_contraction_probe(cfg: &ContractionConfig, seed: u64) -> Result<ExperimentReport> {
    run_probe_with(cfg, None, "couple", seed)
}

/// Shared body of the plain and Burgers contraction probes.
pub(crate) fn run_probe_with(
    cfg: &ContractionConfig,
    burgers: Option<(ScalarFn, BurgersExponents)>,
    id: &str,
    seed: u64,
) -> Result<ExperimentReport> {
    let grid = cfg.grid.build()?;
    steps_for(cfg.horizon, cfg.dt)?;
    if cfg.paths < 2 {
        return Err(Error::invalid("paths", "need at least two paths"));
    }
    let mut cs = CoefficientSet::new(cfg.drift.clone(), cfg.diffusion.clone());
    if let Some((flux, b)) = &burgers {
        cs = cs.with_burgers(flux.clone(), b.theta, b.zeta);
    }
    cs.validate()?;
    let plan = CouplingPlan::new(
        cs.alpha(),
        cs.beta(),
        grid.eta0(),
        burgers.as_ref().map(|b| b.1),
        cfg.horizon,
    )?;
    let mut report = ExperimentReport::new(id, cfg, seed);
    report.value("gamma", plan.exponents.gamma);
    report.value("eta", plan.exponents.eta);
    report.value("chi", plan.exponents.chi);
    let (deltas, dropped) = admissible_deltas(&plan, &cfg.deltas, cfg.dt);
    if !dropped.is_empty() {
        log::warn!("δ values {dropped:?} need gain·dt > {MAX_FEEDBACK_STEP}; dropped from the grid");
        report.note(format!(
            "δ grid truncated: {dropped:?} violate gain·dt ≤ {MAX_FEEDBACK_STEP}"
        ));
    }
    if deltas.is_empty() {
        return Err(Error::Refused("no δ satisfies gain·dt ≤ 0.1; reduce dt".into()));
    }
    let (l1, smallest) = (grid.lambda_min(), deltas.iter().cloned().fold(f64::INFINITY, f64::min));
    report.value("(λ₁+gain(δ_min))·T", (l1 + plan.gain(smallest)) * cfg.horizon);

    let base = SeedSpec::new(seed, 0, id);
    let outcomes = probe_deltas(
        &grid,
        &cs,
        &plan,
        &deltas,
        cfg.dt,
        cfg.horizon,
        cfg.threshold,
        cfg.paths,
        &base,
    )?;
    let blow = outcomes.iter().map(|o| o.blow_ups).sum::<usize>();
    report.check_le("no_blow_up", "blow-ups across all pairs = 0", blow as f64, 0.0, 0.0);
    record_probe(&mut report, "model", &outcomes, &plan, cfg.horizon, cfg.bootstrap, seed)?;

    if let Some(sigma) = cfg.control_sigma {
        let mut control = CoefficientSet::additive(cfg.drift.clone(), sigma);
        control.burgers = cs.burgers.clone();
        let ctrl = probe_deltas(
            &grid,
            &control,
            &plan,
            &deltas,
            cfg.dt,
            cfg.horizon,
            cfg.threshold,
            cfg.paths,
            &base.with_label(format!("{id}/control")),
        )?;
        for o in &ctrl {
            let tag = format!("[control, δ={}]", o.delta);
            report.metric(format!("P(|X_T-Y_T|≥δ/2){tag}"), proportion(o.final_exceed, o.paths()));
            report.check_le(
                format!("control_exceedance{tag}"),
                "additive σ: #{|X_T-Y_T| ≥ δ/2} = 0 exactly",
                o.final_exceed as f64,
                0.0,
                0.0,
            );
            let ledger = EntropyLedger::from_paths(&o.energies, &o.log_lr, cfg.bootstrap, seed ^ 0xc0)?;
            report.metric(format!("tv_likelihood_ratio{tag}"), ledger.tv_estimate);
            report.value(format!("pinsker_bound{tag}"), ledger.pinsker_bound);
            report.check_le(
                format!("pinsker_consistency{tag}"),
                "½E|1-LR| ≤ min(1, √(2H)) + 3·stderr",
                ledger.tv_estimate.value,
                ledger.pinsker_bound,
                3.0 * ledger.tv_estimate.stderr,
            );
        }
    }

    if cfg.shift_paths > 0 {
        let (est, oracle) = gaussian_shift_tv(1.0, cfg.shift_paths, cfg.bootstrap, seed)?;
        report.metric("tv_gaussian_shift", est);
        report.value("tv_gaussian_shift_oracle", oracle);
        report.check_le(
            "tv_gaussian_shift",
            "|½E|1-LR| - (2Φ(½) - 1)| ≤ 3·stderr for N(0,1) vs N(1,1)",
            (est.value - oracle).abs(),
            0.0,
            3.0 * est.stderr,
        );
    }
    Ok(report.finish())
}
