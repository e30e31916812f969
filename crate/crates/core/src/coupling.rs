//! Generalized-coupling bookkeeping: exponent selection, the capped
//! distance `d_{N,γ}`, Girsanov entropy, Pinsker and likelihood-ratio TV
//! estimates, and the entropy lower bound for small-set visits.

use serde::{Deserialize, Serialize};

use crate::spectral::Field;
use crate::statistics::{bootstrap, mean, Estimate};
use crate::{Error, Result};

/// Strict inequalities are enforced with this margin.
pub const EXPONENT_MARGIN: f64 = 1e-3;
const GAMMA_STEP: f64 = 1e-2;
const ETA_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersExponents {
    pub theta: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub gamma: f64,
    pub eta: f64,
    pub chi: f64,
}

impl Exponents {
    /// Powers of `δ` in the one-step contraction estimate; all exceed 1 on
    /// a feasible plan.
    pub fn contraction_powers(&self, alpha: f64, beta: f64, burgers: Option<BurgersExponents>) -> Vec<f64> {
        let mut out = vec![
            1.0 + alpha - self.gamma,
            (1.0 - self.gamma) * self.eta / 2.0 + beta - self.chi,
        ];
        if let Some(b) = burgers {
            out.push((1.0 - self.gamma) * (1.0 - b.theta) + b.zeta);
        }
        out
    }
}

fn margins(alpha: f64, beta: f64, gamma: f64, eta: f64, burgers: Option<BurgersExponents>) -> f64 {
    let mut m = (alpha - gamma).min(beta + (1.0 - gamma) * eta / 2.0 - 1.0);
    if let Some(b) = burgers {
        m = m.min(b.zeta + (1.0 - gamma) * (1.0 - b.theta) - 1.0);
    }
    m
}

/// Grid search for `(γ, η, χ)` maximising `χ` subject to `γ < α`,
/// `(1-γ)η/2 + β > 1`, `η < η₀` and, with a Burgers term,
/// `(1-γ)(1-ϑ) + ζ > 1`, each with margin [`EXPONENT_MARGIN`].
/// `χ` is the smallest slack minus the margin.
pub fn select_coupling_exponents(
    alpha: f64,
    beta: f64,
    eta0: f64,
    burgers: Option<BurgersExponents>,
) -> Result<Exponents> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    if !(eta0 > 0.0 && eta0 <= 1.0) {
        return Err(Error::invalid("eta0", format!("must lie in (0, 1], got {eta0}")));
    }
    let h3 = 1.0 - eta0 / 2.0;
    if beta <= h3 {
        return Err(Error::Infeasible(format!(
            "β = {beta} ≤ 1 − η₀/2 = {h3} violates H3: no η < η₀ makes (1−γ)η/2 + β > 1"
        )));
    }
    if let Some(b) = burgers {
        if !(b.theta > 0.0 && b.theta < 1.0) {
            return Err(Error::invalid("theta", format!("must lie in (0, 1), got {}", b.theta)));
        }
        if b.zeta <= b.theta {
            return Err(Error::Infeasible(format!(
                "ζ = {} ≤ ϑ = {}: (1−γ)(1−ϑ) + ζ > 1 has no solution γ > 0",
                b.zeta, b.theta
            )));
        }
    }
    let mut best: Option<Exponents> = None;
    let n_gamma = (alpha / GAMMA_STEP).ceil() as usize;
    let n_eta = (eta0 / ETA_STEP).ceil() as usize;
    for i in 1..n_gamma {
        let gamma = i as f64 * GAMMA_STEP;
        if gamma > alpha - EXPONENT_MARGIN {
            break;
        }
        for j in 1..n_eta {
            let eta = j as f64 * ETA_STEP;
            if eta > eta0 - EXPONENT_MARGIN {
                break;
            }
            let chi = margins(alpha, beta, gamma, eta, burgers) - EXPONENT_MARGIN;
            if chi > 0.0 && best.is_none_or(|b| chi > b.chi) {
                best = Some(Exponents { gamma, eta, chi });
            }
        }
    }
    best.ok_or_else(|| {
        let which = if burgers.is_some() {
            "(1−γ)η/2 + β > 1 and (1−γ)(1−ϑ) + ζ > 1"
        } else {
            "(1−γ)η/2 + β > 1"
        };
        Error::Infeasible(format!("no grid point satisfies {which} with margin {EXPONENT_MARGIN}"))
    })
}

fn check_n_gamma(n: f64, gamma: f64) -> Result<()> {
    if !(n >= 1.0) {
        return Err(Error::invalid("N", format!("must be at least 1, got {n}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma", format!("must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// `d_{N,γ}(x, y) = min(N |x - y|_H^γ, 1)`.
pub fn distance_dn_gamma(x: &Field, y: &Field, n: f64, gamma: f64) -> Result<f64> {
    check_n_gamma(n, gamma)?;
    Ok((n * x.sub(y)?.h_norm().powf(gamma)).min(1.0))
}

/// `d_γ(x, y) = min(|x - y|_H^γ, 1)`.
pub fn distance_d_gamma(x: &Field, y: &Field, gamma: f64) -> Result<f64> {
    distance_dn_gamma(x, y, 1.0, gamma)
}

/// `½ E ∫ |σ^{-1} λ φ|² dt` from per-path accumulated energies.
pub fn girsanov_entropy(energies: &[f64]) -> Result<f64> {
    if energies.is_empty() {
        return Err(Error::Data("no energy samples".into()));
    }
    if let Some(e) = energies.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::Data(format!("energy sample {e} is negative or not a number")));
    }
    Ok(0.5 * mean(energies))
}

/// `min(1, √(2H))`.
pub fn pinsker_tv_bound(entropy: f64) -> Result<f64> {
    if !(entropy >= 0.0) {
        return Err(Error::invalid(
            "entropy",
            format!("must be non-negative, got {entropy}"),
        ));
    }
    Ok((2.0 * entropy).sqrt().min(1.0))
}

/// `½ E|1 - LR|` over likelihood-ratio samples, bootstrap standard error.
pub fn tv_from_likelihood_ratio(lr: &[f64], resamples: usize, seed: u64) -> Result<Estimate> {
    if lr.is_empty() {
        return Err(Error::Data("no likelihood-ratio samples".into()));
    }
    if let Some(x) = lr.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::Data(format!("likelihood ratio {x} is not finite and positive")));
    }
    let dev: Vec<f64> = lr.iter().map(|x| 0.5 * (1.0 - x).abs()).collect();
    Ok(bootstrap(&dev, resamples, seed, mean))
}

/// `ν(A) ≥ μ(A)/N - (H + log 2)/(N log N)`.
pub fn entropy_measure_lower_bound(mu_a: f64, h_rel: f64, n: f64) -> Result<f64> {
    if !(n > 1.0) {
        return Err(Error::invalid("N", format!("must exceed 1, got {n}")));
    }
    if !(0.0..=1.0).contains(&mu_a) {
        return Err(Error::invalid("mu_a", format!("must lie in [0, 1], got {mu_a}")));
    }
    if !(h_rel >= 0.0) {
        return Err(Error::invalid("h_rel", format!("must be non-negative, got {h_rel}")));
    }
    Ok(mu_a / n - (h_rel + std::f64::consts::LN_2) / (n * n.ln()))
}

/// `L = 4 exp(4 C₂ + 4 log 2)`; `1/L` lower-bounds the visit probability.
pub fn small_set_constant(c2: f64) -> f64 {
    4.0 * (4.0 * c2 + 4.0 * std::f64::consts::LN_2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingPlan {
    pub exponents: Exponents,
    pub alpha: f64,
    pub beta: f64,
    pub burgers: Option<BurgersExponents>,
    pub n: f64,
    pub horizon: f64,
    /// Feedback switches off at `threshold · |x - y|`.
    pub threshold: f64,
}

impl CouplingPlan {
    pub fn new(alpha: f64, beta: f64, eta0: f64, burgers: Option<BurgersExponents>, horizon: f64) -> Result<Self> {
        let exponents = select_coupling_exponents(alpha, beta, eta0, burgers)?;
        Ok(CouplingPlan {
            exponents,
            alpha,
            beta,
            burgers,
            n: 1.0,
            horizon,
            threshold: 2.0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.exponents.gamma
    }

    /// `λ = δ^{γ-1}`.
    pub fn gain(&self, delta: f64) -> f64 {
        delta.powf(self.exponents.gamma - 1.0)
    }

    /// Largest `dt` compatible with the feedback step bound at `δ`.
    pub fn max_dt(&self, delta: f64) -> f64 {
        crate::integrator::MAX_FEEDBACK_STEP / self.gain(delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyLedger {
    /// Mean of `∫|σ^{-1}λφ|² dt`.
    pub girsanov_energy: f64,
    pub entropy: f64,
    pub pinsker_bound: f64,
    pub tv_estimate: Estimate,
}

impl EntropyLedger {
    pub fn from_paths(energies: &[f64], log_lr: &[f64], resamples: usize, seed: u64) -> Result<Self> {
        let entropy = girsanov_entropy(energies)?;
        let lr: Vec<f64> = log_lr.iter().map(|l| l.exp()).collect();
        Ok(EntropyLedger {
            girsanov_energy: mean(energies),
            entropy,
            pinsker_bound: pinsker_tv_bound(entropy)?,
            tv_estimate: tv_from_likelihood_ratio(&lr, resamples, seed)?,
        })
    }

    /// `TV̂ ≤ Pinsker + k·stderr`.
    pub fn consistent(&self, k: f64) -> bool {
        self.tv_estimate.value <= self.pinsker_bound + k * self.tv_estimate.stderr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SpectralGrid, SpectrumKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exponent_examples() {
        let e = select_coupling_exponents(1.0, 0.8, 0.5, None).unwrap();
        assert!(e.gamma < 1.0);
        assert!((1.0 - e.gamma) * e.eta / 2.0 + 0.8 > 1.0);
        assert!(e.eta < 0.5);
        // the worked point γ = 0.1, η = 0.45 is feasible with slack 0.0025
        assert_relative_eq!(margins(1.0, 0.8, 0.1, 0.45, None), 0.0025, epsilon = 1e-12);
        assert!(e.chi >= 0.0025 - EXPONENT_MARGIN);
        // analytic optimum on the grid: smallest γ, largest η
        assert_relative_eq!(e.gamma, 0.01, epsilon = 1e-12);
        assert_relative_eq!(e.eta, 0.499, epsilon = 1e-9);
        assert_relative_eq!(e.chi, 0.99 * 0.499 / 2.0 - 0.2 - 1e-3, epsilon = 1e-12);
        let err = select_coupling_exponents(1.0, 0.7, 0.5, None).unwrap_err();
        assert!(matches!(err, Error::Infeasible(ref m) if m.contains("H3")));
        assert!(select_coupling_exponents(1.0, 0.75, 0.5, None).is_err());
        let lip = select_coupling_exponents(1.0, 1.0, 0.5, None).unwrap();
        assert!(lip.chi > e.chi);
        assert!(lip.chi <= (1.0 - lip.gamma).min((1.0 - lip.gamma) * 0.25));
    }

    #[test]
    fn burgers_exponents() {
        let b = BurgersExponents { theta: 0.4, zeta: 1.0 };
        let e = select_coupling_exponents(1.0, 0.9, 0.5, Some(b)).unwrap();
        assert!((1.0 - e.gamma) * 0.6 + 1.0 > 1.0);
        let bad = BurgersExponents { theta: 0.5, zeta: 0.5 };
        assert!(matches!(
            select_coupling_exponents(1.0, 0.9, 0.5, Some(bad)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn distance_examples() {
        let g = SpectralGrid::new(4, SpectrumKind::Laplacian).unwrap();
        let x = Field::mode(&g, 1, 0.04).unwrap();
        let z = Field::zeros(&g);
        assert_eq!(distance_dn_gamma(&x, &x, 4.0, 0.5).unwrap(), 0.0);
        assert_relative_eq!(distance_dn_gamma(&x, &z, 4.0, 0.5).unwrap(), 0.8, epsilon = 1e-12);
        let far = Field::mode(&g, 2, 4f64.powf(-2.0)).unwrap();
        assert_eq!(distance_dn_gamma(&far, &z, 4.0, 0.5).unwrap(), 1.0);
        assert!(distance_dn_gamma(&x, &z, 0.5, 0.5).is_err());
    }

    #[test]
    fn entropy_and_pinsker_examples() {
        assert_eq!(girsanov_entropy(&[0.0, 0.0]).unwrap(), 0.0);
        // σ = 1, λ = 2, |φ| = 0.5, T = 1: ∫|λφ|² = 1
        assert_relative_eq!(girsanov_entropy(&[1.0]).unwrap(), 0.5);
        assert!(girsanov_entropy(&[-1.0]).is_err());
        assert_eq!(pinsker_tv_bound(0.0).unwrap(), 0.0);
        assert_relative_eq!(pinsker_tv_bound(0.5).unwrap(), 1.0);
        assert_eq!(pinsker_tv_bound(10.0).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_shift_tv() {
        // LR = exp(a W_T - a²T/2) with a = 1, T = 1 under P.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let lr: Vec<f64> = (0..40_000)
            .map(|_| {
                let w: f64 = rng.sample(StandardNormal);
                (w - 0.5).exp()
            })
            .collect();
        let est = tv_from_likelihood_ratio(&lr, 200, 3).unwrap();
        let exact = 2.0 * statrs_phi(0.5) - 1.0;
        assert_relative_eq!(exact, 0.3829, epsilon = 1e-4);
        assert!(est.within(exact, 3.0), "{est:?} vs {exact}");
        assert!(est.value <= pinsker_tv_bound(0.5).unwrap() + 3.0 * est.stderr);
        assert_eq!(tv_from_likelihood_ratio(&[1.0; 10], 20, 0).unwrap().value, 0.0);
        assert!(tv_from_likelihood_ratio(&[1.0, 0.0], 20, 0).is_err());
    }

    fn statrs_phi(x: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::standard().cdf(x)
    }

    #[test]
    fn entropy_bound_examples() {
        assert_relative_eq!(
            entropy_measure_lower_bound(0.5, 0.0, 16.0).unwrap(),
            0.015625,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            entropy_measure_lower_bound(0.5, 0.0, 16.0).unwrap(),
            1.0 / small_set_constant(0.0)
        );
        assert!(entropy_measure_lower_bound(0.0, 0.3, 16.0).unwrap() <= 0.0);
        for h in [0.0, 0.1, 1.0] {
            let n = (4.0 * h + 4.0 * std::f64::consts::LN_2).exp();
            let v = entropy_measure_lower_bound(0.5, h, n).unwrap();
            assert_relative_eq!(v, 1.0 / (4.0 * n), max_relative = 1e-12);
            assert_relative_eq!(1.0 / (4.0 * n), 1.0 / small_set_constant(h), max_relative = 1e-12);
        }
        assert!(entropy_measure_lower_bound(0.5, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn feasible_plans_have_super_linear_powers(alpha in 0.05f64..1.0, beta in 0.76f64..1.0) {
            let e = select_coupling_exponents(alpha, beta, 0.5, None).unwrap();
            for p in e.contraction_powers(alpha, beta, None) {
                prop_assert!(p > 1.0);
            }
            prop_assert!(e.chi > 0.0 && e.chi < alpha - e.gamma);
        }

        #[test]
        fn distance_is_capped_symmetric_monotone(
            a in proptest::collection::vec(-1.0f64..1.0, 4),
            b in proptest::collection::vec(-1.0f64..1.0, 4),
            n in 1.0f64..20.0,
            gamma in 0.05f64..1.0,
        ) {
            let g = SpectralGrid::new(4, SpectrumKind::Laplacian).unwrap();
            let x = Field::from_coeffs(&g, a).unwrap();
            let y = Field::from_coeffs(&g, b).unwrap();
            let d = distance_dn_gamma(&x, &y, n, gamma).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, distance_dn_gamma(&y, &x, n, gamma).unwrap());
            prop_assert!(distance_dn_gamma(&x, &y, n + 1.0, gamma).unwrap() >= d);
            prop_assert!(distance_dn_gamma(&x, &x.scale(1.0), n, gamma).unwrap() == 0.0);
        }
    }
}
