use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::statistics::Estimate;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub estimator: String,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// One pass/fail decision: `value` compared with `bound` under `slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub inequality: String,
    pub value: f64,
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub metrics: Vec<MetricRow>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub wall_clock_secs: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(experiment: &str, config: &C, seed: u64) -> Self {
        let config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        let canonical = serde_json::to_string(&config).unwrap_or_default();
        let hash = Sha256::digest(canonical.as_bytes());
        ExperimentReport {
            experiment: experiment.to_string(),
            seed,
            config,
            config_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
            metrics: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            wall_clock_secs: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn metric(&mut self, estimator: impl Into<String>, est: Estimate) {
        let seed = self.seed;
        self.metrics.push(MetricRow {
            estimator: estimator.into(),
            value: est.value,
            stderr: est.stderr,
            n_samples: est.n_samples,
            seed,
        });
    }

    pub fn value(&mut self, estimator: impl Into<String>, value: f64) {
        self.metric(estimator, Estimate::exact(value));
    }

    /// Records `value ≤ bound + slack`.
    pub fn check_le(
        &mut self,
        name: impl Into<String>,
        inequality: impl Into<String>,
        value: f64,
        bound: f64,
        slack: f64,
    ) -> bool {
        let passed = value <= bound + slack;
        self.push_check(name, inequality, value, bound, slack, passed)
    }

    /// Records `value ≥ bound - slack`.
    pub fn check_ge(
        &mut self,
        name: impl Into<String>,
        inequality: impl Into<String>,
        value: f64,
        bound: f64,
        slack: f64,
    ) -> bool {
        let passed = value >= bound - slack;
        self.push_check(name, inequality, value, bound, slack, passed)
    }

    pub fn push_check(
        &mut self,
        name: impl Into<String>,
        inequality: impl Into<String>,
        value: f64,
        bound: f64,
        slack: f64,
        passed: bool,
    ) -> bool {
        self.checks.push(Check {
            name: name.into(),
            inequality: inequality.into(),
            value,
            bound,
            slack,
            passed,
        });
        passed
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric_value(&self, estimator: &str) -> Option<&MetricRow> {
        self.metrics.iter().find(|m| m.estimator == estimator)
    }

    pub fn finish(mut self) -> Self {
        if let Some(t) = self.started.take() {
            self.wall_clock_secs = t.elapsed().as_secs_f64();
        }
        self
    }

    /// Metric rows as CSV. Deterministic: excludes wall-clock time.
    pub fn write_metrics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| crate::Error::Io(std::io::Error::other(e));
        out.write_record(["experiment", "estimator", "value", "stderr", "n_samples", "seed"])
            .map_err(io)?;
        for m in &self.metrics {
            out.write_record([
                self.experiment.clone(),
                m.estimator.clone(),
                m.value.to_string(),
                m.stderr.to_string(),
                m.n_samples.to_string(),
                m.seed.to_string(),
            ])
            .map_err(io)?;
        }
        for c in &self.checks {
            out.write_record([
                self.experiment.clone(),
                format!("check:{}", c.name),
                c.value.to_string(),
                c.slack.to_string(),
                u8::from(c.passed).to_string(),
                self.seed.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// One line per check, for terminal summaries.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} (seed {}, {:.1}s): {}\n",
            self.experiment,
            self.seed,
            self.wall_clock_secs,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {}: {} (value {:.6e}, bound {:.6e}, slack {:.3e})\n",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.inequality,
                c.value,
                c.bound,
                c.slack
            ));
        }
        s
    }
}
