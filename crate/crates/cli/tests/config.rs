use std::path::Path;

use spde_lab::coefficients::ScalarFn;
use spde_lab_cli::config::DEFAULT_SEED;
use spde_lab_cli::{Experiment, RunConfig};

#[test]
fn empty_file_gives_defaults() {
    let cfg = RunConfig::from_str_auto("", Path::new("run.toml")).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.seed, DEFAULT_SEED);
    let json = RunConfig::from_str_auto("{}", Path::new("run.json")).unwrap();
    assert_eq!(json, RunConfig::default());
}

#[test]
fn toml_roundtrip_is_identity() {
    let mut cfg = RunConfig {
        seed: 7,
        ..Default::default()
    };
    cfg.couple.deltas = vec![0.2, 0.1];
    cfg.rd.diffusion = ScalarFn::Mollified {
        inner: Box::new(ScalarFn::bounded_holder(0.5, 1.0, 0.3, 1.0)),
        level: 16,
        window: 4.0,
    };
    let text = cfg.to_toml().unwrap();
    let back = RunConfig::from_str_auto(&text, Path::new("x.toml")).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml().unwrap(), text);
}

#[test]
fn json_roundtrip_is_identity() {
    let cfg = RunConfig::default();
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    let back = RunConfig::from_str_auto(&text, Path::new("x.json")).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn partial_section_keeps_other_defaults() {
    let text = "seed = 3\n[maxineq]\npaths = 10\nlambdas = [10.0, 100.0, 1000.0]\n";
    let cfg = RunConfig::from_str_auto(text, Path::new("x.toml")).unwrap();
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.maxineq.paths, 10);
    assert_eq!(cfg.maxineq.dt, RunConfig::default().maxineq.dt);
    assert_eq!(cfg.couple, RunConfig::default().couple);
}

#[test]
fn syntax_error_reports_line() {
    let text = "seed = 3\n[maxineq]\npaths = = 10\n";
    let err = RunConfig::from_str_auto(text, Path::new("x.toml")).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn unknown_key_is_rejected() {
    let err = RunConfig::from_str_auto("sede = 3\n", Path::new("x.toml")).unwrap_err();
    assert!(format!("{err:#}").contains("sede"));
}

#[test]
fn infeasible_diffusion_exponent_names_h3() {
    // β = 0.7 with the Laplacian's η₀ = 0.5: β ≤ 1 − η₀/2 = 0.75.
    let text = r#"
[couple.diffusion]
kind = "bounded_holder_power"
floor = 0.5
scale = 0.5
exponent = 0.7
cap = 1.0
"#;
    let cfg = RunConfig::from_str_auto(text, Path::new("x.toml")).unwrap();
    let msg = format!("{:#}", cfg.validate(Experiment::Couple).unwrap_err());
    assert!(msg.contains("H3"), "{msg}");
    assert!(msg.contains("β = 0.7"), "{msg}");
    assert!(cfg.validate(Experiment::Maxineq).is_ok());
}

#[test]
fn default_plans_are_feasible() {
    let cfg = RunConfig::default();
    cfg.validate(Experiment::Couple).unwrap();
    cfg.validate(Experiment::Burgers).unwrap();
}

#[test]
fn paths_override_reaches_the_selected_section() {
    let mut cfg = RunConfig::default();
    cfg.override_paths(Experiment::Wcontract, 17);
    assert_eq!(cfg.wcontract.samples, 17);
    assert_eq!(cfg.couple.paths, RunConfig::default().couple.paths);
    cfg.override_paths(Experiment::Burgers, 5);
    assert_eq!(cfg.burgers.sim.paths, 5);
    assert_eq!(cfg.burgers.sim.probe.as_ref().unwrap().paths, 5);
}
