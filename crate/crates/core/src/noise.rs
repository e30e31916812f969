//! Truncated cylindrical Wiener increments.
//!
//! Randomness is counter based: a [`SeedSpec`] fixes a ChaCha8 key and the
//! step index selects the 64-bit stream, so the increment of step `m` on
//! path `p` never depends on how many other paths or steps were drawn before
//! it. Mode `k` is the `k`-th standard normal drawn from that stream.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spectral::{Field, SpectralGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub path_index: u64,
    pub stream_label: String,
}

impl SeedSpec {
    pub fn new(base_seed: u64, path_index: u64, stream_label: impl Into<String>) -> Self {
        SeedSpec {
            base_seed,
            path_index,
            stream_label: stream_label.into(),
        }
    }

    pub fn with_path(&self, path_index: u64) -> Self {
        SeedSpec {
            path_index,
            ..self.clone()
        }
    }

    pub fn with_label(&self, stream_label: impl Into<String>) -> Self {
        SeedSpec {
            stream_label: stream_label.into(),
            ..self.clone()
        }
    }

    /// `base_seed ‖ path_index ‖ sha256(label)[..16]`.
    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.base_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.path_index.to_le_bytes());
        let digest = Sha256::digest(self.stream_label.as_bytes());
        key[16..].copy_from_slice(&digest[..16]);
        key
    }
}

/// Per-path generator: cached key, one ChaCha stream per step.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    key: [u8; 32],
}

impl NoiseStream {
    pub fn new(seed: &SeedSpec) -> Self {
        NoiseStream { key: seed.key() }
    }

    pub fn rng(&self, step_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(step_index);
        rng
    }

    /// Fills `out` with i.i.d. `N(0, 1)` draws for step `step_index`.
    pub fn standard_normals(&self, step_index: u64, out: &mut [f64]) {
        let mut rng = self.rng(step_index);
        for o in out.iter_mut() {
            *o = rng.sample(StandardNormal);
        }
    }

    /// Fills `out` with i.i.d. `N(0, std_dev²)` draws.
    pub fn gaussians(&self, step_index: u64, std_dev: f64, out: &mut [f64]) {
        self.standard_normals(step_index, out);
        for o in out.iter_mut() {
            *o *= std_dev;
        }
    }

    pub fn increment(&self, step_index: u64, n_modes: usize, dt: f64) -> Result<WienerIncrement> {
        check_dt(dt)?;
        let mut dw = vec![0.0; n_modes];
        self.gaussians(step_index, dt.sqrt(), &mut dw);
        Ok(WienerIncrement { dw, dt })
    }
}

/// Modal increments `ΔW_k ~ N(0, dt)` of the truncated cylindrical process.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("dt", format!("time step must be positive, got {dt}")))
    }
}

pub fn sample_increment(seed: &SeedSpec, step_index: u64, grid: &SpectralGrid, dt: f64) -> Result<WienerIncrement> {
    NoiseStream::new(seed).increment(step_index, grid.n_modes(), dt)
}

/// Variances `(1 - e^{-2(λ_k+λ)dt}) / (2(λ_k+λ))` of the exact one-step
/// convolution `∫_t^{t+dt} S^λ(t+dt-s) dW_s`.
pub fn ou_variances(grid: &SpectralGrid, dt: f64, damping: f64) -> Result<Vec<f64>> {
    check_dt(dt)?;
    if !(damping >= 0.0) {
        return Err(Error::invalid(
            "damping",
            format!("must be non-negative, got {damping}"),
        ));
    }
    Ok(grid
        .eigenvalues()
        .iter()
        .map(|&l| {
            let rate = l + damping;
            -(-2.0 * rate * dt).exp_m1() / (2.0 * rate)
        })
        .collect())
}

/// Exact sample of the one-step stochastic convolution with additive unit noise.
pub fn ou_convolution_step(
    grid: &Arc<SpectralGrid>,
    dt: f64,
    damping: f64,
    seed: &SeedSpec,
    step_index: u64,
) -> Result<Field> {
    let var = ou_variances(grid, dt, damping)?;
    let mut z = vec![0.0; grid.n_modes()];
    NoiseStream::new(seed).standard_normals(step_index, &mut z);
    for (zk, vk) in z.iter_mut().zip(&var) {
        *zk *= vk.sqrt();
    }
    Field::from_coeffs(grid, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectrumKind;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<SpectralGrid> {
        SpectralGrid::new(n, SpectrumKind::Laplacian).unwrap()
    }

    #[test]
    fn deterministic_and_label_sensitive() {
        let g = grid(8);
        let s = SeedSpec::new(7, 3, "x");
        let a = sample_increment(&s, 11, &g, 0.01).unwrap();
        let b = sample_increment(&s, 11, &g, 0.01).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_increment(&s.with_label("y"), 11, &g, 0.01).unwrap());
        assert_ne!(a, sample_increment(&s.with_path(4), 11, &g, 0.01).unwrap());
        assert_ne!(a, sample_increment(&s, 12, &g, 0.01).unwrap());
        assert!(sample_increment(&s, 0, &g, 0.0).is_err());
        assert!(sample_increment(&s, 0, &g, -1.0).is_err());
    }

    #[test]
    fn order_independent() {
        let s = NoiseStream::new(&SeedSpec::new(1, 0, "w"));
        let mut late = vec![0.0; 4];
        s.standard_normals(500, &mut late);
        let mut early = vec![0.0; 4];
        for step in 0..500 {
            s.standard_normals(step, &mut early);
        }
        let mut again = vec![0.0; 4];
        s.standard_normals(500, &mut again);
        assert_eq!(late, again);
    }

    #[test]
    fn increment_moments() {
        // 10⁵ draws of a 4-mode increment: variance dt and zero cross covariance
        // within three standard errors.
        let dt = 0.01;
        let n = 100_000;
        let g = grid(4);
        let stream = NoiseStream::new(&SeedSpec::new(42, 0, "moments"));
        let mut sum_sq = [0.0; 4];
        let mut sq_sq = [0.0; 4];
        let (mut cross, mut cross_sq) = (0.0, 0.0);
        for step in 0..n {
            let w = stream.increment(step as u64, g.n_modes(), dt).unwrap().dw;
            for k in 0..4 {
                sum_sq[k] += w[k] * w[k];
                sq_sq[k] += w[k].powi(4);
            }
            cross += w[0] * w[1];
            cross_sq += (w[0] * w[1]).powi(2);
        }
        let nf = n as f64;
        for k in 0..4 {
            let mean = sum_sq[k] / nf;
            let se = ((sq_sq[k] / nf - mean * mean) / nf).sqrt();
            assert!((mean - dt).abs() < 3.0 * se, "mode {k}: {mean} vs {dt} (se {se})");
        }
        let mean = cross / nf;
        let se = ((cross_sq / nf - mean * mean) / nf).sqrt();
        assert!(mean.abs() < 3.0 * se);
    }

    #[test]
    fn ou_variance_values() {
        let g = grid(64);
        let v = ou_variances(&g, 0.01, 0.0).unwrap();
        let expected = (1.0 - (-2.0 * PI * PI * 0.01f64).exp()) / (2.0 * PI * PI);
        assert_relative_eq!(v[0], expected, max_relative = 1e-14);
        assert_relative_eq!(v[0], 9.073e-3, max_relative = 1e-3);
        // λ_k dt ≫ 1
        let lk = g.eigenvalues()[63] + 5.0;
        let v = ou_variances(&g, 1.0, 5.0).unwrap();
        assert_relative_eq!(v[63], 1.0 / (2.0 * lk), max_relative = 1e-14);
        // dt → 0
        let v = ou_variances(&g, 1e-12, 0.0).unwrap();
        assert!(v.iter().all(|&x| x < 1.1e-12));
        assert!(ou_variances(&g, 0.0, 0.0).is_err());
    }

    #[test]
    fn step_isometry() {
        // E|Γ|² = Σ v_k for the one-step convolution.
        let g = grid(16);
        let (dt, damping) = (0.05, 2.0);
        let target: f64 = ou_variances(&g, dt, damping).unwrap().iter().sum();
        let n = 20_000;
        let samples: Vec<f64> = (0..n)
            .map(|p| {
                let s = SeedSpec::new(9, p, "iso");
                ou_convolution_step(&g, dt, damping, &s, 0).unwrap().h_norm().powi(2)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target} (se {se})");
    }
}
