//! Fast oracle-backed checks drawn from every experiment, merged into one
//! report. Designed to finish well under a minute on one core.

use super::burgers::{run_burgers_bound, BurgersBoundConfig};
use super::contraction::{run_contraction_probe, ContractionConfig};
use super::maxineq::{run_maximal_inequality, MaxIneqConfig};
use super::smallset::{run_small_set_visit, SmallSetConfig};
use super::{ExperimentReport, GridSpec, MetricRow};
use crate::spectral::SpectrumKind;
use crate::Result;

fn merge(into: &mut ExperimentReport, from: ExperimentReport, keep: impl Fn(&str) -> bool) {
    let id = from.experiment.clone();
    for m in from.metrics {
        into.metrics.push(MetricRow {
            estimator: format!("{id}:{}", m.estimator),
            ..m
        });
    }
    for mut c in from.checks.into_iter().filter(|c| keep(&c.name)) {
        c.name = format!("{id}:{}", c.name);
        into.checks.push(c);
    }
}

fn csv_bytes(r: &ExperimentReport) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    r.write_metrics_csv(&mut out)?;
    Ok(out)
}

pub fn run_selftest(seed: u64) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("selftest", &serde_json::json!({ "seed": seed }), seed);
    let lap = |n| GridSpec::new(n, SpectrumKind::Laplacian);

    let maxineq = MaxIneqConfig {
        grid: lap(64),
        lambdas: vec![10.0, 100.0, 1000.0],
        dt: 1e-2,
        horizon: 0.5,
        paths: 400,
        bootstrap: 50,
        ..Default::default()
    };
    let first = run_maximal_inequality(&maxineq, seed)?;
    let again = run_maximal_inequality(&maxineq, seed)?;
    let identical = csv_bytes(&first)? == csv_bytes(&again)?;
    report.push_check(
        "determinism",
        "rerun with equal config and seed gives byte-identical metrics.csv",
        f64::from(u8::from(identical)),
        1.0,
        0.0,
        identical,
    );
    merge(&mut report, first, |n| n.starts_with("oracle_match"));

    let couple = ContractionConfig {
        grid: lap(16),
        dt: 1e-3,
        paths: 100,
        shift_paths: 20_000,
        bootstrap: 50,
        ..Default::default()
    };
    merge(&mut report, run_contraction_probe(&couple, seed)?, |n| {
        n.starts_with("control_exceedance") || n.starts_with("tv_gaussian_shift") || n.starts_with("pinsker")
    });

    let bound = BurgersBoundConfig {
        quadrature_points: 8_000,
        ..Default::default()
    };
    merge(&mut report, run_burgers_bound(&bound, seed)?, |_| true);

    let smallset = SmallSetConfig {
        grid: lap(31),
        directions: 2,
        paths: 16,
        ..Default::default()
    };
    merge(&mut report, run_small_set_visit(&smallset, seed)?, |n| {
        n == "noiseless_threshold"
    });

    Ok(report.finish())
}
