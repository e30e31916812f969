//! Diagonal operator algebra on `(0, 1)` with Dirichlet boundary.
//!
//! The eigenfunctions are `e_k(ξ) = √2 sin(kπξ)`, `k = 1..=n`, and fields are
//! collocated at the interior nodes `ξ_j = j / (n + 1)`. With that choice the
//! nodal values and modal coefficients are related by a scaled type-I
//! discrete sine transform which is orthogonal with respect to the
//! trapezoidal inner product `h Σ_j u_j v_j`, `h = 1 / (n + 1)`. In particular
//! the `ℓ²` norm of the coefficients equals the quadrature `L²` norm of the
//! values exactly.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sup-norm bound of the eigenfunctions, `|e_k|_∞ ≤ √2`.
pub const EIGENFUNCTION_SUP_BOUND: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    /// `λ_k = k²π²`
    Laplacian,
    /// `λ_k = k⁴π⁴`
    Bilaplacian,
}

impl SpectrumKind {
    pub fn eigenvalue(self, k: usize) -> f64 {
        let kp = k as f64 * PI;
        match self {
            SpectrumKind::Laplacian => kp * kp,
            SpectrumKind::Bilaplacian => kp.powi(4),
        }
    }

    /// Supremum of the `η` for which `Σ_k λ_k^{-(1-η)}` converges.
    pub fn eta0(self) -> f64 {
        match self {
            // Σ k^{-2(1-η)} < ∞  iff  η < 1/2
            SpectrumKind::Laplacian => 0.5,
            // Σ k^{-4(1-η)} < ∞  iff  η < 3/4
            SpectrumKind::Bilaplacian => 0.75,
        }
    }
}

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumKind::Laplacian => f.write_str("laplacian"),
            SpectrumKind::Bilaplacian => f.write_str("bilaplacian"),
        }
    }
}

impl FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "laplacian" => Ok(SpectrumKind::Laplacian),
            "bilaplacian" => Ok(SpectrumKind::Bilaplacian),
            other => Err(Error::UnknownSpectrum(other.to_string())),
        }
    }
}

/// Summability threshold `η₀` of a spectrum given by name.
pub fn eta0_of_spectrum(kind: &str) -> Result<f64> {
    Ok(kind.parse::<SpectrumKind>()?.eta0())
}

/// `d_θ = sup_{r>0} e^{-r} r^θ`, attained at `r = θ`.
pub fn d_theta(theta: f64) -> f64 {
    if theta <= 0.0 {
        1.0
    } else {
        theta.powf(theta) * (-theta).exp()
    }
}

/// Scratch space for the FFT-backed sine transform. One per worker.
pub struct DstWorkspace {
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

pub struct SpectralGrid {
    n_modes: usize,
    kind: SpectrumKind,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n_modes", &self.n_modes)
            .field("kind", &self.kind)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(n_modes: usize, kind: SpectrumKind) -> Result<Arc<Self>> {
        if n_modes == 0 {
            return Err(Error::invalid("n_modes", "must be positive"));
        }
        let eigenvalues = (1..=n_modes).map(|k| kind.eigenvalue(k)).collect();
        let h = 1.0 / (n_modes + 1) as f64;
        let nodes = (1..=n_modes).map(|j| j as f64 * h).collect();
        let fft = FftPlanner::new().plan_fft_forward(2 * (n_modes + 1));
        Ok(Arc::new(SpectralGrid {
            n_modes,
            kind,
            eigenvalues,
            nodes,
            fft,
        }))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.n_modes - 1]
    }

    pub fn eta0(&self) -> f64 {
        self.kind.eta0()
    }

    /// Quadrature weight `1 / (n + 1)`.
    pub fn node_spacing(&self) -> f64 {
        1.0 / (self.n_modes + 1) as f64
    }

    /// `‖(-A)^θ S(t)‖_op = sup_k λ_k^θ e^{-λ_k t}` on the truncated spectrum.
    pub fn smoothing_norm(&self, t: f64, theta: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&l| l.powf(theta) * (-l * t).exp())
            .fold(0.0, f64::max)
    }

    pub fn workspace(&self) -> DstWorkspace {
        let len = 2 * (self.n_modes + 1);
        DstWorkspace {
            buffer: vec![Complex::new(0.0, 0.0); len],
            scratch: vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
        }
    }

    /// Unscaled DST-I, `y_k = Σ_j x_j sin(π j k / (n+1))`, via an odd
    /// extension of length `2(n+1)`.
    fn dst1(&self, input: &[f64], out: &mut [f64], scale: f64, ws: &mut DstWorkspace) {
        let n = self.n_modes;
        let len = 2 * (n + 1);
        let buf = &mut ws.buffer;
        buf[0] = Complex::new(0.0, 0.0);
        buf[n + 1] = Complex::new(0.0, 0.0);
        for (j, &x) in input.iter().enumerate() {
            buf[j + 1] = Complex::new(x, 0.0);
            buf[len - 1 - j] = Complex::new(-x, 0.0);
        }
        self.fft.process_with_scratch(buf, &mut ws.scratch);
        // FFT of the odd extension is -2i y_k.
        let s = -0.5 * scale;
        for (k, o) in out.iter_mut().enumerate() {
            *o = s * buf[k + 1].im;
        }
    }

    /// Coefficients to nodal values: `u_j = Σ_k a_k √2 sin(kπξ_j)`.
    pub fn dst_inverse_into(&self, coeffs: &[f64], values: &mut [f64], ws: &mut DstWorkspace) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        self.dst1(coeffs, values, std::f64::consts::SQRT_2, ws);
    }

    /// Nodal values to coefficients: `a_k = h Σ_j u_j √2 sin(kπξ_j)`.
    pub fn dst_forward_into(&self, values: &[f64], coeffs: &mut [f64], ws: &mut DstWorkspace) {
        debug_assert_eq!(values.len(), self.n_modes);
        let scale = std::f64::consts::SQRT_2 * self.node_spacing();
        self.dst1(values, coeffs, scale, ws);
    }

    pub fn dst_forward(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        let mut out = vec![0.0; self.n_modes];
        self.dst_forward_into(values, &mut out, &mut self.workspace());
        Ok(out)
    }

    pub fn dst_inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let mut out = vec![0.0; self.n_modes];
        self.dst_inverse_into(coeffs, &mut out, &mut self.workspace());
        Ok(out)
    }

    pub(crate) fn check_len(&self, found: usize) -> Result<()> {
        if found != self.n_modes {
            return Err(Error::LengthMismatch {
                expected: self.n_modes,
                found,
            });
        }
        Ok(())
    }

    /// Per-mode semigroup factors `e^{-(λ_k + damping) t}`.
    pub fn decay_factors(&self, t: f64, damping: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|&l| (-(l + damping) * t).exp()).collect()
    }

    /// Per-mode drift weights `(1 - e^{-(λ_k + damping) dt}) / (λ_k + damping)`.
    pub fn phi1_weights(&self, dt: f64, damping: f64) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let rate = l + damping;
                -(-rate * dt).exp_m1() / rate
            })
            .collect()
    }
}

/// A state in `H = L²(0,1)`, stored by its modal coefficients with an
/// optional cached copy of the nodal values.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    coeffs: Vec<f64>,
    values: Option<Vec<f64>>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.coeffs == other.coeffs
    }
}

impl Field {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Field {
            grid: Arc::clone(grid),
            coeffs: vec![0.0; grid.n_modes()],
            values: None,
        }
    }

    pub fn from_coeffs(grid: &Arc<SpectralGrid>, coeffs: Vec<f64>) -> Result<Self> {
        grid.check_len(coeffs.len())?;
        Ok(Field {
            grid: Arc::clone(grid),
            coeffs,
            values: None,
        })
    }

    pub fn from_values(grid: &Arc<SpectralGrid>, values: Vec<f64>) -> Result<Self> {
        let coeffs = grid.dst_forward(&values)?;
        Ok(Field {
            grid: Arc::clone(grid),
            coeffs,
            values: Some(values),
        })
    }

    /// `amplitude · e_k`, with `k` starting at 1.
    pub fn mode(grid: &Arc<SpectralGrid>, k: usize, amplitude: f64) -> Result<Self> {
        if k == 0 || k > grid.n_modes() {
            return Err(Error::invalid("k", format!("mode {k} outside 1..={}", grid.n_modes())));
        }
        let mut coeffs = vec![0.0; grid.n_modes()];
        coeffs[k - 1] = amplitude;
        Field::from_coeffs(grid, coeffs)
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn has_values(&self) -> bool {
        self.values.is_some()
    }

    pub fn values(&self) -> Cow<'_, [f64]> {
        match &self.values {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(self.compute_values()),
        }
    }

    /// Rebuilds the field with the nodal values cached.
    pub fn with_values(self) -> Self {
        if self.values.is_some() {
            return self;
        }
        let values = self.compute_values();
        Field {
            values: Some(values),
            ..self
        }
    }

    fn compute_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_modes()];
        self.grid
            .dst_inverse_into(&self.coeffs, &mut out, &mut self.grid.workspace());
        out
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.n_modes() == other.grid.n_modes() && self.grid.kind() == other.grid.kind())
    }

    fn check_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn map_coeffs(&self, f: impl Fn(usize, f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            coeffs: self.coeffs.iter().enumerate().map(|(k, &a)| f(k, a)).collect(),
            values: None,
        }
    }

    /// `S^λ(t) x`: multiplies mode `k` by `e^{-(λ_k + damping) t}`.
    pub fn semigroup(&self, t: f64, damping: f64) -> Result<Field> {
        if !(t >= 0.0) {
            return Err(Error::invalid(
                "t",
                format!("semigroup time must be non-negative, got {t}"),
            ));
        }
        if !(damping >= 0.0) {
            return Err(Error::invalid(
                "damping",
                format!("must be non-negative, got {damping}"),
            ));
        }
        let lams = self.grid.eigenvalues();
        Ok(self.map_coeffs(|k, a| a * (-(lams[k] + damping) * t).exp()))
    }

    /// `(-A)^θ x` for `θ ∈ (0, 1)`.
    pub fn fractional_power(&self, theta: f64) -> Result<Field> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid("theta", format!("must lie in (0, 1), got {theta}")));
        }
        let lams = self.grid.eigenvalues();
        Ok(self.map_coeffs(|k, a| a * lams[k].powf(theta)))
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map_coeffs(|_, a| s * a)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        Ok(self.map_coeffs(|k, a| a + other.coeffs[k]))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        Ok(self.map_coeffs(|k, a| a - other.coeffs[k]))
    }

    /// `|x|_H`, the `ℓ²` norm of the coefficients.
    pub fn h_norm(&self) -> f64 {
        l2(&self.coeffs)
    }

    /// `|x|_{H₀}` approximated by the maximum over the collocation nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|a| a.is_finite())
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lap(n: usize) -> Arc<SpectralGrid> {
        SpectralGrid::new(n, SpectrumKind::Laplacian).unwrap()
    }

    /// Dense sine matrix, independent of the FFT path.
    fn dense_inverse(coeffs: &[f64]) -> Vec<f64> {
        let n = coeffs.len();
        (1..=n)
            .map(|j| {
                let xi = j as f64 / (n + 1) as f64;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * 2f64.sqrt() * ((k + 1) as f64 * PI * xi).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn eigenvalues_and_nodes() {
        let g = SpectralGrid::new(4, SpectrumKind::Bilaplacian).unwrap();
        assert_relative_eq!(g.eigenvalues()[1], 16.0 * PI.powi(4), max_relative = 1e-14);
        assert!(g.eigenvalues().windows(2).all(|w| w[0] < w[1]));
        assert_relative_eq!(g.nodes()[4 - 1], 0.8);
        assert!(lap(3).lambda_min() >= PI * PI - 1e-12);
    }

    #[test]
    fn eta0_values() {
        assert_eq!(eta0_of_spectrum("laplacian").unwrap(), 0.5);
        assert_eq!(eta0_of_spectrum("Bilaplacian").unwrap(), 0.75);
        assert!(matches!(eta0_of_spectrum("wave"), Err(Error::UnknownSpectrum(_))));
    }

    #[test]
    fn eta0_partial_sums() {
        // Decade increments of Σ λ_k^{-(1-η)} shrink by 10^{-0.1} below η₀
        // and grow by 10^{0.1} above it.
        let block = |eta: f64, from: usize, to: usize| -> f64 {
            (from..to)
                .map(|k| SpectrumKind::Laplacian.eigenvalue(k).powf(-(1.0 - eta)))
                .sum()
        };
        for (eta, converges) in [(0.45, true), (0.55, false)] {
            let early = block(eta, 10_000, 100_000);
            let late = block(eta, 100_000, 1_000_000);
            assert_eq!(late < early, converges, "η = {eta}: {early} then {late}");
        }
        // below η₀ the partial sum respects the integral bound 1 + 1/0.1
        let total = block(0.45, 1, 1_000_000);
        assert!(total <= PI.powf(-1.1) * 11.0);
    }

    #[test]
    fn semigroup_examples() {
        let g = lap(16);
        let x = Field::mode(&g, 1, 1.0).unwrap();
        assert_eq!(x.semigroup(0.0, 3.0).unwrap(), x);
        let y = x.semigroup(0.1, 0.0).unwrap();
        assert_relative_eq!(y.coeffs()[0], (-PI * PI * 0.1).exp(), max_relative = 1e-14);
        assert_relative_eq!(y.coeffs()[0], 0.37273, max_relative = 1e-4);
        assert!(x.semigroup(1e3, 0.0).unwrap().h_norm() < 1e-300);
        assert!(x.semigroup(-1.0, 0.0).is_err());
    }

    #[test]
    fn fractional_power_examples() {
        let g = lap(8);
        let e1 = Field::mode(&g, 1, 1.0).unwrap();
        assert_relative_eq!(e1.fractional_power(0.5).unwrap().coeffs()[0], PI, max_relative = 1e-14);
        let b = SpectralGrid::new(8, SpectrumKind::Bilaplacian).unwrap();
        let e2 = Field::mode(&b, 2, 1.0).unwrap();
        assert_relative_eq!(
            e2.fractional_power(0.5).unwrap().coeffs()[1],
            4.0 * PI * PI,
            max_relative = 1e-14
        );
        assert_eq!(Field::zeros(&g).fractional_power(0.3).unwrap().h_norm(), 0.0);
        assert!(e1.fractional_power(1.0).is_err());
        assert!(e1.fractional_power(0.0).is_err());
    }

    #[test]
    fn transform_examples() {
        let g = lap(9);
        let e1_values: Vec<f64> = g.nodes().iter().map(|x| 2f64.sqrt() * (PI * x).sin()).collect();
        let c = g.dst_forward(&e1_values).unwrap();
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-14);
        assert!(c[1..].iter().all(|a| a.abs() < 1e-14));
        assert!(g.dst_forward(&[1.0, 2.0]).is_err());
        assert!(matches!(
            g.dst_inverse(&[0.0; 10]),
            Err(Error::LengthMismatch { expected: 9, found: 10 })
        ));
    }

    #[test]
    fn fft_matches_dense_matrix() {
        for n in [1, 5, 16, 63, 128] {
            let g = lap(n);
            let coeffs: Vec<f64> = (0..n).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
            let fast = g.dst_inverse(&coeffs).unwrap();
            let slow = dense_inverse(&coeffs);
            for (a, b) in fast.iter().zip(&slow) {
                assert_relative_eq!(a, b, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn parseval_against_brute_force_quadrature() {
        let g = lap(32);
        let (a1, a2, a3) = (0.7, -1.3, 0.25);
        // Trapezoidal rule on the nodes with a fine independent evaluation
        // of the 3-mode function.
        let h = g.node_spacing();
        let quad: f64 = g
            .nodes()
            .iter()
            .map(|&x| {
                let s = 2f64.sqrt();
                let u = a1 * s * (PI * x).sin() + a2 * s * (2.0 * PI * x).sin() + a3 * s * (3.0 * PI * x).sin();
                u * u * h
            })
            .sum();
        assert_relative_eq!(quad, a1 * a1 + a2 * a2 + a3 * a3, max_relative = 1e-12);
    }

    #[test]
    fn norms() {
        let g = lap(9);
        let e1 = Field::mode(&g, 1, 1.0).unwrap();
        assert_relative_eq!(e1.h_norm(), 1.0);
        // n odd puts a node at ξ = 1/2
        assert_relative_eq!(e1.sup_norm(), 2f64.sqrt(), max_relative = 1e-14);
        let z = Field::zeros(&g);
        assert_eq!((z.h_norm(), z.sup_norm()), (0.0, 0.0));
        let mix = Field::from_coeffs(&g, vec![3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(mix.h_norm(), 5.0);
    }

    #[test]
    fn d_theta_matches_scan() {
        for theta in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let scan = (1..200_000)
                .map(|i| i as f64 * 1e-4)
                .map(|r: f64| (-r).exp() * r.powf(theta))
                .fold(0.0, f64::max);
            assert_relative_eq!(d_theta(theta), scan, max_relative = 1e-6);
        }
    }

    #[test]
    fn smoothing_bound_holds() {
        for kind in [SpectrumKind::Laplacian, SpectrumKind::Bilaplacian] {
            let g = SpectralGrid::new(128, kind).unwrap();
            for theta in [0.1, 0.5, 0.9] {
                for t in [1e-8, 1e-5, 1e-3, 0.1, 1.0, 10.0] {
                    assert!(g.smoothing_norm(t, theta) <= d_theta(theta) / t.powf(theta) * (1.0 + 1e-12));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(coeffs in proptest::collection::vec(-10.0f64..10.0, 1..96)) {
            let g = lap(coeffs.len());
            let back = g.dst_forward(&g.dst_inverse(&coeffs).unwrap()).unwrap();
            let scale = l2(&coeffs).max(1.0);
            prop_assert!(l2_distance(&back, &coeffs) <= 1e-12 * scale);
            let f = Field::from_coeffs(&g, coeffs.clone()).unwrap();
            let quad = (g.node_spacing() * f.values().iter().map(|v| v * v).sum::<f64>()).sqrt();
            prop_assert!((quad - f.h_norm()).abs() <= 1e-12 * scale);
        }

        #[test]
        fn semigroup_law_and_contractivity(
            coeffs in proptest::collection::vec(-5.0f64..5.0, 12),
            s in 0.0f64..0.2,
            t in 0.0f64..0.2,
            damping in 0.0f64..10.0,
        ) {
            let g = lap(12);
            let x = Field::from_coeffs(&g, coeffs).unwrap();
            let two = x.semigroup(s, damping).unwrap().semigroup(t, damping).unwrap();
            let one = x.semigroup(s + t, damping).unwrap();
            prop_assert!(l2_distance(two.coeffs(), one.coeffs()) <= 1e-12 * x.h_norm().max(1.0));
            prop_assert!(one.h_norm() <= (-(PI * PI) * (s + t)).exp() * x.h_norm() * (1.0 + 1e-12));
        }
    }
}
