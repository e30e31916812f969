//! Monte Carlo estimators: exact empirical optimal transport, bootstrap
//! errors, sup moments, log-log and semilog regression, Lyapunov drift fits.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par;
use crate::spectral::{l2_distance, sup_distance, Field};
use crate::{Error, Result};

/// Largest sample count accepted by the exact assignment solver.
pub const MAX_ASSIGNMENT: usize = 512;
pub const DEFAULT_BOOTSTRAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            n_samples: 1,
        }
    }

    /// Sample mean with the classical standard error.
    pub fn mean(samples: &[f64]) -> Self {
        let n = samples.len();
        let m = mean(samples);
        let se = if n > 1 {
            let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            value: m,
            stderr: se,
            n_samples: n,
        }
    }

    /// Normal-approximation 95% interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.value - 1.96 * self.stderr, self.value + 1.96 * self.stderr)
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Proportion `k/n` with the Agresti-Coull standard error
/// `√(p̃(1-p̃)/(n+4))`, `p̃ = (k+2)/(n+4)`, which stays positive at `k = 0`
/// and `k = n`.
pub fn proportion(k: usize, n: usize) -> Estimate {
    let adjusted = (k as f64 + 2.0) / (n as f64 + 4.0);
    Estimate {
        value: k as f64 / n as f64,
        stderr: (adjusted * (1.0 - adjusted) / (n as f64 + 4.0)).sqrt(),
        n_samples: n,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Bootstrap standard error of `stat` over `resamples` resamples.
pub fn bootstrap_stderr<F>(samples: &[f64], resamples: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = samples.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    let m = mean(&stats);
    (stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

/// `stat(samples)` with a bootstrap standard error.
pub fn bootstrap<F>(samples: &[f64], resamples: usize, seed: u64, stat: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    Estimate {
        value: stat(samples),
        stderr: bootstrap_stderr(samples, resamples, seed, &stat),
        n_samples: samples.len(),
    }
}

/// `E[S^p]` for running sups `S` of each path, with bootstrap error.
pub fn sup_moment(running_sups: &[f64], p: f64, resamples: usize, seed: u64) -> Result<Estimate> {
    if !(p >= 1.0) {
        return Err(Error::invalid("p", format!("moment order must be at least 1, got {p}")));
    }
    if running_sups.is_empty() {
        return Err(Error::Data("no trajectories".into()));
    }
    let powered: Vec<f64> = running_sups.iter().map(|s| s.powf(p)).collect();
    Ok(bootstrap(&powered, resamples, seed, mean))
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix
/// (shortest augmenting paths with potentials, `O(n³)`). Returns the
/// column assigned to each row.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    H,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cost {
    /// `min(N |x - y|^γ, 1)`
    DnGamma { n: f64, gamma: f64, norm: Norm },
    /// `min(|x - y|^γ, 1)`
    DGamma { gamma: f64, norm: Norm },
}

impl Cost {
    pub fn dn_gamma(n: f64, gamma: f64) -> Self {
        Cost::DnGamma {
            n,
            gamma,
            norm: Norm::H,
        }
    }

    pub fn d_gamma(gamma: f64) -> Self {
        Cost::DGamma { gamma, norm: Norm::H }
    }

    pub fn norm(&self) -> Norm {
        match self {
            Cost::DnGamma { norm, .. } | Cost::DGamma { norm, .. } => *norm,
        }
    }

    pub fn of_distance(&self, r: f64) -> f64 {
        match *self {
            Cost::DnGamma { n, gamma, .. } => (n * r.powf(gamma)).min(1.0),
            Cost::DGamma { gamma, .. } => r.powf(gamma).min(1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let (n, gamma) = match *self {
            Cost::DnGamma { n, gamma, .. } => (n, gamma),
            Cost::DGamma { gamma, .. } => (1.0, gamma),
        };
        if !(n >= 1.0) {
            return Err(Error::invalid("N", format!("must be at least 1, got {n}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid("gamma", format!("must lie in (0, 1], got {gamma}")));
        }
        Ok(())
    }
}

/// Exact optimal-assignment transport cost between two equal-size point
/// clouds, divided by the count. Points are coefficient vectors for
/// [`Norm::H`] and nodal value vectors for [`Norm::Sup`].
pub fn assignment_cost(a: &[Vec<f64>], b: &[Vec<f64>], cost: Cost) -> Result<f64> {
    cost.validate()?;
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::Data("empty sample".into()));
    }
    if n > MAX_ASSIGNMENT {
        return Err(Error::invalid(
            "samples",
            format!("{n} samples exceed the exact-solver cap {MAX_ASSIGNMENT}; subsample first"),
        ));
    }
    let dist: fn(&[f64], &[f64]) -> f64 = match cost.norm() {
        Norm::H => l2_distance,
        Norm::Sup => sup_distance,
    };
    let rows = par::map(n, |i| {
        b.iter().map(|y| cost.of_distance(dist(&a[i], y))).collect::<Vec<f64>>()
    });
    let matrix: Vec<f64> = rows.into_iter().flatten().collect();
    let assignment = hungarian(&matrix, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| matrix[i * n + j]).sum();
    Ok(total / n as f64)
}

fn points(fields: &[Field], norm: Norm) -> Vec<Vec<f64>> {
    fields
        .iter()
        .map(|f| match norm {
            Norm::H => f.coeffs().to_vec(),
            Norm::Sup => f.values().into_owned(),
        })
        .collect()
}

/// Empirical Wasserstein distance between two equal-size samples of fields.
pub fn wasserstein_assignment(law_a: &[Field], law_b: &[Field], cost: Cost) -> Result<f64> {
    if let (Some(first), true) = (law_a.first(), law_a.len() == law_b.len()) {
        if law_a.iter().chain(law_b).any(|f| !f.same_grid(first)) {
            return Err(Error::GridMismatch);
        }
    }
    assignment_cost(&points(law_a, cost.norm()), &points(law_b, cost.norm()), cost)
}

/// A finite sample standing in for a law, with the seed that produced it.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw {
    pub samples: Vec<Field>,
    pub seed: Option<u64>,
}

impl EmpiricalLaw {
    pub fn new(samples: Vec<Field>, seed: Option<u64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Data(format!(
                "an empirical law needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|f| !f.same_grid(&samples[0])) {
            return Err(Error::GridMismatch);
        }
        Ok(EmpiricalLaw { samples, seed })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn distance(&self, other: &EmpiricalLaw, cost: Cost) -> Result<f64> {
        wasserstein_assignment(&self.samples, &other.samples, cost)
    }

    /// Seeded subsample of size `k` without replacement, order preserved.
    pub fn subsample(&self, k: usize, seed: u64) -> Result<EmpiricalLaw> {
        let idx = subsample_indices(self.len(), k, seed)?;
        EmpiricalLaw::new(idx.into_iter().map(|i| self.samples[i].clone()).collect(), Some(seed))
    }
}

pub fn subsample_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::invalid("k", format!("cannot draw {k} of {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Bootstrap standard error of an assignment distance: both samples are
/// resampled with replacement and the distance recomputed.
pub fn assignment_bootstrap(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    cost: Cost,
    resamples: usize,
    seed: u64,
) -> Result<Estimate> {
    let value = assignment_cost(a, b, cost)?;
    let n = a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let ra: Vec<Vec<f64>> = (0..n).map(|_| a[rng.random_range(0..n)].clone()).collect();
        let rb: Vec<Vec<f64>> = (0..n).map(|_| b[rng.random_range(0..n)].clone()).collect();
        stats.push(assignment_cost(&ra, &rb, cost)?);
    }
    let stderr = if resamples > 1 {
        let m = mean(&stats);
        (stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        value,
        stderr,
        n_samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScale {
    /// `log y` against `log x`
    LogLog,
    /// `log y` against `x`
    SemiLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares in the requested coordinates.
pub fn decay_slope(points: &[(f64, f64)], scale: FitScale) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Data(format!("need at least 3 points, got {}", points.len())));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(y > 0.0) || (scale == FitScale::LogLog && !(x > 0.0)) {
            return Err(Error::Data(format!("point ({x}, {y}) is not positive")));
        }
        xs.push(match scale {
            FitScale::LogLog => x.ln(),
            FitScale::SemiLog => x,
        });
        ys.push(y.ln());
    }
    let n = xs.len() as f64;
    let mx = mean(&xs);
    let my = mean(&ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        slope_stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFit {
    pub c: f64,
    pub c_v: f64,
    pub satisfied: bool,
}

pub const LYAPUNOV_C_GRID: usize = 99;

/// Fits `E V(X_{t₀}) ≤ (1 - c) V(x) + C_V` with `V = |x| + 1` on samples
/// `(|x_i|, E V(X^{x_i}_{t₀}))`, allowing `3·stderr` slack per sample.
/// For each `c` on the grid `0.01, …, 0.99` the smallest admissible `C_V`
/// is computed; the returned `c` is the largest one whose binding sample is
/// the innermost radius, i.e. the drift is contracting on every outer radius.
pub fn lyapunov_drift_fit(norms: &[f64], expected_v: &[Estimate]) -> Result<LyapunovFit> {
    if norms.len() != expected_v.len() {
        return Err(Error::LengthMismatch {
            expected: norms.len(),
            found: expected_v.len(),
        });
    }
    let v: Vec<f64> = norms.iter().map(|r| r + 1.0).collect();
    let mut distinct = v.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 || distinct[distinct.len() - 1] < 10.0 * distinct[0] {
        return Err(Error::Data(
            "Lyapunov fit needs at least 3 distinct radii with V spanning a decade".into(),
        ));
    }
    let inner = (0..v.len()).min_by(|&i, &j| v[i].total_cmp(&v[j])).expect("non-empty");
    let mut best: Option<LyapunovFit> = None;
    for step in 1..=LYAPUNOV_C_GRID {
        let c = step as f64 / (LYAPUNOV_C_GRID + 1) as f64;
        let slack: Vec<f64> = expected_v
            .iter()
            .zip(&v)
            .map(|(e, vi)| e.value - 3.0 * e.stderr - (1.0 - c) * vi)
            .collect();
        let argmax = (0..slack.len())
            .max_by(|&i, &j| slack[i].total_cmp(&slack[j]))
            .expect("non-empty");
        let c_v = slack[argmax].max(0.0);
        if (v[argmax] == v[inner] || c_v == 0.0) && c_v.is_finite() {
            best = Some(LyapunovFit {
                c,
                c_v,
                satisfied: true,
            });
        }
    }
    Ok(best.unwrap_or(LyapunovFit {
        c: 0.0,
        c_v: f64::INFINITY,
        satisfied: false,
    }))
}
