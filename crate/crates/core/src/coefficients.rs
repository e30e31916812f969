//! Nemytskii coefficients `b(u)(ξ) = b(u(ξ))`, `σ(u)v = g(u)·v` and the
//! Burgers flux `F`, plus the scan-based estimators used to check their
//! regularity hypotheses.
//!
//! Sup-type quantities (uniform gap, Hölder constant, dissipativity
//! constant) are estimated on finite scans and are estimators, not
//! certified suprema.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::noise::WienerIncrement;
use crate::spectral::Field;
use crate::{Error, Result};

/// Default working window `[-W, W]` for coefficient arguments.
pub const DEFAULT_WINDOW: f64 = 1e3;

/// Scan resolution for sup estimators, points per unit length.
pub const SCAN_DENSITY: f64 = 2e4;

/// Difference quotients above this are reported as unbounded.
pub const DISSIPATIVITY_CAP: f64 = 1e2;

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

fn default_window() -> f64 {
    DEFAULT_WINDOW
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant {
        value: f64,
    },
    /// `intercept + slope·u`
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `floor + scale·|u|^exponent`
    HolderPower {
        #[serde(default)]
        floor: f64,
        #[serde(default = "one")]
        scale: f64,
        exponent: f64,
    },
    /// `floor + scale·min(|u|, cap)^exponent`
    BoundedHolderPower {
        #[serde(default)]
        floor: f64,
        #[serde(default = "one")]
        scale: f64,
        exponent: f64,
        cap: f64,
    },
    /// `u - u³`
    CubicDissipative,
    /// `amplitude·sin(u)`
    Sine {
        amplitude: f64,
    },
    /// Piecewise-linear interpolant of `inner` on the lattice `k / level`,
    /// restricted to `[-window, window]`.
    Mollified {
        inner: Box<ScalarFn>,
        level: u32,
        #[serde(default = "default_window")]
        window: f64,
    },
}

impl ScalarFn {
    pub fn zero() -> Self {
        ScalarFn::Constant { value: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn holder_power(exponent: f64) -> Self {
        ScalarFn::HolderPower {
            floor: 0.0,
            scale: 1.0,
            exponent,
        }
    }

    pub fn bounded_holder(floor: f64, scale: f64, exponent: f64, cap: f64) -> Self {
        ScalarFn::BoundedHolderPower {
            floor,
            scale,
            exponent,
            cap,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Linear { slope, intercept } => intercept + slope * u,
            ScalarFn::HolderPower { floor, scale, exponent } => floor + scale * u.abs().powf(*exponent),
            ScalarFn::BoundedHolderPower {
                floor,
                scale,
                exponent,
                cap,
            } => floor + scale * u.abs().min(*cap).powf(*exponent),
            ScalarFn::CubicDissipative => u - u * u * u,
            ScalarFn::Sine { amplitude } => amplitude * u.sin(),
            ScalarFn::Mollified { inner, level, window } => {
                let n = *level as f64;
                let x = u.clamp(-window, *window) * n;
                let i = x.floor();
                let t = x - i;
                let lo = inner.eval(i / n);
                if t == 0.0 {
                    lo
                } else {
                    lo + t * (inner.eval((i + 1.0) / n) - lo)
                }
            }
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            ScalarFn::Constant { value } => Some(*value),
            ScalarFn::Linear { slope, intercept } if *slope == 0.0 => Some(*intercept),
            ScalarFn::HolderPower { floor, scale, .. } | ScalarFn::BoundedHolderPower { floor, scale, .. }
                if *scale == 0.0 =>
            {
                Some(*floor)
            }
            ScalarFn::Sine { amplitude } if *amplitude == 0.0 => Some(0.0),
            ScalarFn::Mollified { inner, .. } => inner.constant_value(),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value() == Some(0.0)
    }

    /// Global Hölder exponent (local for the cubic).
    pub fn holder_exponent(&self) -> f64 {
        match self {
            ScalarFn::HolderPower { exponent, scale, .. } | ScalarFn::BoundedHolderPower { exponent, scale, .. }
                if *scale != 0.0 =>
            {
                exponent.min(1.0)
            }
            _ => 1.0,
        }
    }

    /// Lower bound of `|f|` over the real line.
    pub fn floor(&self) -> f64 {
        match self {
            ScalarFn::Constant { value } => value.abs(),
            ScalarFn::Linear { slope, intercept } => {
                if *slope == 0.0 {
                    intercept.abs()
                } else {
                    0.0
                }
            }
            ScalarFn::HolderPower { floor, scale, .. } | ScalarFn::BoundedHolderPower { floor, scale, .. } => {
                if *scale == 0.0 {
                    floor.abs()
                } else if *floor >= 0.0 && *scale >= 0.0 {
                    *floor
                } else {
                    0.0
                }
            }
            ScalarFn::CubicDissipative | ScalarFn::Sine { .. } => 0.0,
            // Convex combinations of values ≥ c₀ stay ≥ c₀.
            ScalarFn::Mollified { inner, .. } => inner.floor(),
        }
    }

    /// Upper bound of `|f|`, `None` when unbounded.
    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            ScalarFn::Constant { value } => Some(value.abs()),
            ScalarFn::Linear { slope, intercept } => (*slope == 0.0).then(|| intercept.abs()),
            ScalarFn::HolderPower { floor, scale, .. } => (*scale == 0.0).then(|| floor.abs()),
            ScalarFn::BoundedHolderPower {
                floor,
                scale,
                exponent,
                cap,
            } => Some(floor.abs() + scale.abs() * cap.powf(*exponent)),
            ScalarFn::CubicDissipative => None,
            ScalarFn::Sine { amplitude } => Some(amplitude.abs()),
            ScalarFn::Mollified { inner, .. } => inner.sup_abs(),
        }
    }

    /// `M` with `|f(u)| ≤ M (1 + |u|)`, `None` for super-linear growth.
    pub fn growth_constant(&self) -> Option<f64> {
        match self {
            ScalarFn::Linear { slope, intercept } => Some(slope.abs().max(intercept.abs())),
            ScalarFn::HolderPower { floor, scale, exponent } => (*exponent <= 1.0).then(|| floor.abs() + scale.abs()),
            ScalarFn::CubicDissipative => None,
            ScalarFn::Mollified { inner, level, .. } => {
                // Interpolation error adds at most one lattice cell.
                inner.growth_constant().map(|m| m * (1.0 + 1.0 / *level as f64))
            }
            other => other.sup_abs(),
        }
    }

    pub(crate) fn validate(&self, name: &'static str) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid(name, reason));
        match self {
            ScalarFn::HolderPower { exponent, .. } if !(*exponent > 0.0 && *exponent <= 1.0) => {
                bad(format!("Hölder exponent must lie in (0, 1], got {exponent}"))
            }
            ScalarFn::BoundedHolderPower { exponent, cap, .. } => {
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    bad(format!("Hölder exponent must lie in (0, 1], got {exponent}"))
                } else if !(*cap > 0.0) {
                    bad(format!("cap must be positive, got {cap}"))
                } else {
                    Ok(())
                }
            }
            ScalarFn::Mollified { inner, level, window } => {
                if *level == 0 {
                    bad("mollification level must be at least 1".into())
                } else if !(*window > 0.0) {
                    bad(format!("window must be positive, got {window}"))
                } else {
                    inner.validate(name)
                }
            }
            _ => Ok(()),
        }
    }
}

/// Piecewise-linear interpolation of `f` on the lattice `(k/n)`.
pub fn mollify(f: &ScalarFn, n: u32) -> Result<ScalarFn> {
    if n == 0 {
        return Err(Error::invalid("n", "mollification level must be at least 1"));
    }
    Ok(ScalarFn::Mollified {
        inner: Box::new(f.clone()),
        level: n,
        window: DEFAULT_WINDOW,
    })
}

fn scan_points(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let count = ((hi - lo) * SCAN_DENSITY).ceil().max(1.0) as usize;
    let step = (hi - lo) / count as f64;
    (0..=count).map(move |i| lo + i as f64 * step)
}

/// `Δ_K^n`: sup of `|f - f_n|` over a fine scan of `[-K, K]`.
pub fn uniform_gap(f: &ScalarFn, f_n: &ScalarFn, k_radius: f64) -> f64 {
    scan_points(-k_radius, k_radius).fold(0.0, |m, u| m.max((f.eval(u) - f_n.eval(u)).abs()))
}

/// Max of `|f(x) - f(y)| / |x - y|^β` over pairs of `samples` equispaced
/// points in `window` that are at least `min_separation` apart.
pub fn holder_constant_estimate(
    f: &ScalarFn,
    beta: f64,
    window: (f64, f64),
    samples: usize,
    min_separation: f64,
) -> f64 {
    if samples < 2 {
        return 0.0;
    }
    let (lo, hi) = window;
    let step = (hi - lo) / (samples - 1) as f64;
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let x = lo + i as f64 * step;
            (x, f.eval(x))
        })
        .collect();
    let mut best: f64 = 0.0;
    for (i, &(x, fx)) in pts.iter().enumerate() {
        for &(y, fy) in &pts[i + 1..] {
            let d = y - x;
            if d >= min_separation && d > 0.0 {
                best = best.max((fx - fy).abs() / d.powf(beta));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dissipativity {
    Finite(f64),
    Unbounded,
}

impl Dissipativity {
    pub fn value(self) -> f64 {
        match self {
            Dissipativity::Finite(c) => c,
            Dissipativity::Unbounded => f64::INFINITY,
        }
    }
}

/// `C₅ = sup_{σ≠ρ} (f(σ) - f(ρ)) / (σ - ρ)`.
pub fn dissipativity_constant(f: &ScalarFn) -> Dissipativity {
    match f {
        // (σ - σ³ - ρ + ρ³)/(σ - ρ) = 1 - (σ² + σρ + ρ²) ≤ 1, approached at 0.
        ScalarFn::CubicDissipative => return Dissipativity::Finite(1.0),
        ScalarFn::Linear { slope, .. } => return Dissipativity::Finite(*slope),
        ScalarFn::Constant { .. } => return Dissipativity::Finite(0.0),
        _ => {}
    }
    // Symmetric log-spaced scan from 1e-6 to the working window plus 0.
    let per_decade = 60;
    let decades = 9;
    let mut pts = vec![0.0];
    for i in 0..=per_decade * decades {
        let u = 1e-6 * 10f64.powf(i as f64 / per_decade as f64);
        pts.push(u);
        pts.push(-u);
    }
    let vals: Vec<f64> = pts.iter().map(|&u| f.eval(u)).collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let q = (vals[i] - vals[j]) / (pts[i] - pts[j]);
            best = best.max(q);
        }
    }
    if best > DISSIPATIVITY_CAP {
        Dissipativity::Unbounded
    } else {
        Dissipativity::Finite(best)
    }
}

/// Scan check of `|f(u)| ≤ M (1 + |u|)` on `[-window, window]`.
pub fn linear_growth_holds(f: &ScalarFn, m: f64, window: f64) -> bool {
    let count = 200_000;
    (0..=count).all(|i| {
        let u = -window + 2.0 * window * i as f64 / count as f64;
        f.eval(u).abs() <= m * (1.0 + u.abs()) * (1.0 + 1e-12)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionArgument {
    /// `g` evaluated at the nodal value `u(ξ)`.
    #[default]
    Pointwise,
    /// `g` evaluated at `|u|_H`, the same factor at every node.
    HNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurgersTerm {
    pub flux: ScalarFn,
    pub theta: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    #[serde(default)]
    pub diffusion_argument: DiffusionArgument,
    #[serde(default)]
    pub burgers: Option<BurgersTerm>,
    #[serde(default = "default_window")]
    pub window: f64,
}

impl Default for CoefficientSet {
    fn default() -> Self {
        CoefficientSet::additive(ScalarFn::zero(), 1.0)
    }
}

impl CoefficientSet {
    pub fn new(drift: ScalarFn, diffusion: ScalarFn) -> Self {
        CoefficientSet {
            drift,
            diffusion,
            diffusion_argument: DiffusionArgument::Pointwise,
            burgers: None,
            window: DEFAULT_WINDOW,
        }
    }

    pub fn additive(drift: ScalarFn, sigma: f64) -> Self {
        CoefficientSet::new(drift, ScalarFn::constant(sigma))
    }

    pub fn with_burgers(mut self, flux: ScalarFn, theta: f64, zeta: f64) -> Self {
        self.burgers = Some(BurgersTerm { flux, theta, zeta });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.drift.validate("drift")?;
        self.diffusion.validate("diffusion")?;
        if !(self.window > 0.0) {
            return Err(Error::invalid(
                "window",
                format!("must be positive, got {}", self.window),
            ));
        }
        if let Some(b) = &self.burgers {
            b.flux.validate("burgers.flux")?;
            if !(b.theta > 0.0 && b.theta < 1.0) {
                return Err(Error::invalid(
                    "burgers.theta",
                    format!("must lie in (0, 1), got {}", b.theta),
                ));
            }
            if !(b.zeta > b.theta && b.zeta <= 1.0) {
                return Err(Error::invalid(
                    "burgers.zeta",
                    format!("need θ < ζ ≤ 1, got ζ = {} with θ = {}", b.zeta, b.theta),
                ));
            }
        }
        Ok(())
    }

    /// Drift Hölder exponent `α`.
    pub fn alpha(&self) -> f64 {
        self.drift.holder_exponent()
    }

    /// Diffusion Hölder exponent `β`.
    pub fn beta(&self) -> f64 {
        self.diffusion.holder_exponent()
    }

    /// `(C₁, C₂)` with `C₁ ≤ |g| ≤ C₂`.
    pub fn nondegeneracy(&self) -> (f64, Option<f64>) {
        (self.diffusion.floor(), self.diffusion.sup_abs())
    }

    /// Linear growth constant `M` covering drift, diffusion and flux.
    pub fn growth_constant(&self) -> Option<f64> {
        let mut m = self.drift.growth_constant()?.max(self.diffusion.growth_constant()?);
        if let Some(b) = &self.burgers {
            m = m.max(b.flux.growth_constant()?);
        }
        Some(m)
    }

    pub fn is_additive(&self) -> bool {
        self.diffusion.constant_value().is_some()
    }

    pub(crate) fn clamp(&self, u: f64) -> f64 {
        if u.abs() > self.window && u.is_finite() {
            if !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                log::warn!(
                    "coefficient argument {u:.3e} outside the working window ±{:.1e}; clamping",
                    self.window
                );
            }
            u.clamp(-self.window, self.window)
        } else {
            u
        }
    }

    pub fn drift_at(&self, u: f64) -> f64 {
        self.drift.eval(self.clamp(u))
    }

    pub fn diffusion_at(&self, u: f64) -> f64 {
        self.diffusion.eval(self.clamp(u))
    }

    pub fn flux_at(&self, u: f64) -> f64 {
        match &self.burgers {
            Some(b) => b.flux.eval(self.clamp(u)),
            None => 0.0,
        }
    }

    /// Per-node diffusion factors for the state with the given values and norm.
    pub(crate) fn diffusion_factors(&self, values: &[f64], h_norm: f64, out: &mut [f64]) {
        match self.diffusion_argument {
            DiffusionArgument::Pointwise => {
                for (o, &u) in out.iter_mut().zip(values) {
                    *o = self.diffusion_at(u);
                }
            }
            DiffusionArgument::HNorm => out.fill(self.diffusion_at(h_norm)),
        }
    }
}

/// `b(x)` evaluated node by node.
pub fn apply_drift(cs: &CoefficientSet, field: &Field) -> Field {
    let values: Vec<f64> = field.values().iter().map(|&u| cs.drift_at(u)).collect();
    Field::from_values(field.grid(), values).expect("length preserved")
}

fn diffusion_of(cs: &CoefficientSet, field: &Field) -> Vec<f64> {
    let values = field.values();
    let mut g = vec![0.0; values.len()];
    cs.diffusion_factors(&values, field.h_norm(), &mut g);
    g
}

/// `σ(x) w` where `w` is the nodal representation of the increment.
pub fn apply_diffusion(cs: &CoefficientSet, field: &Field, increment: &WienerIncrement) -> Result<Field> {
    let grid = field.grid();
    let w = grid.dst_inverse(&increment.dw)?;
    let g = diffusion_of(cs, field);
    let prod = g.iter().zip(&w).map(|(a, b)| a * b).collect();
    Field::from_values(grid, prod)
}

/// `σ(x)^{-1} v`, node by node `v(ξ_j) / g(u(ξ_j))`.
pub fn apply_diffusion_inverse(cs: &CoefficientSet, field: &Field, v: &Field) -> Result<Field> {
    let floor = cs.diffusion.floor();
    if !(floor > 0.0) {
        return Err(Error::DegenerateDiffusion { floor });
    }
    if !field.same_grid(v) {
        return Err(Error::GridMismatch);
    }
    let g = diffusion_of(cs, field);
    let out = v.values().iter().zip(&g).map(|(a, b)| a / b).collect();
    Field::from_values(field.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_increment, SeedSpec};
    use crate::spectral::{SpectralGrid, SpectrumKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> std::sync::Arc<SpectralGrid> {
        SpectralGrid::new(15, SpectrumKind::Laplacian).unwrap()
    }

    fn ramp(g: &std::sync::Arc<SpectralGrid>) -> Field {
        let v = g.nodes().iter().map(|x| 3.0 * (7.0 * x).sin() - 0.5).collect();
        Field::from_values(g, v).unwrap()
    }

    #[test]
    fn drift_examples() {
        let g = grid();
        let x = ramp(&g);
        let zero = apply_drift(&CoefficientSet::default(), &x);
        assert!(zero.h_norm() < 1e-15);
        let lin = CoefficientSet::additive(
            ScalarFn::Linear {
                slope: 1.0,
                intercept: 0.0,
            },
            1.0,
        );
        let y = apply_drift(&lin, &x);
        for (a, b) in y.values().iter().zip(x.values().iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        let pow = CoefficientSet::additive(ScalarFn::holder_power(0.6), 1.0);
        let four = Field::from_values(&g, vec![4.0; 15]).unwrap();
        for v in apply_drift(&pow, &four).values().iter() {
            assert_relative_eq!(*v, 4f64.powf(0.6), epsilon = 1e-12);
            assert_relative_eq!(*v, 2.2974, epsilon = 1e-4);
        }
    }

    #[test]
    fn diffusion_examples() {
        let g = grid();
        let x = ramp(&g);
        let inc = sample_increment(&SeedSpec::new(1, 0, "d"), 0, &g, 0.01).unwrap();
        let dw = Field::from_coeffs(&g, inc.dw.clone()).unwrap();
        let one = apply_diffusion(&CoefficientSet::additive(ScalarFn::zero(), 1.0), &x, &inc).unwrap();
        assert!(one.sub(&dw).unwrap().h_norm() < 1e-12);
        let two = apply_diffusion(&CoefficientSet::additive(ScalarFn::zero(), 2.0), &x, &inc).unwrap();
        assert!(two.sub(&dw.scale(2.0)).unwrap().h_norm() < 1e-12);
        let holder = CoefficientSet::new(ScalarFn::zero(), ScalarFn::bounded_holder(1.0, 1.0, 0.8, 1.0));
        let out = apply_diffusion(&holder, &Field::zeros(&g), &inc).unwrap();
        assert!(out.sub(&dw).unwrap().h_norm() < 1e-12);
        assert!(apply_diffusion(
            &holder,
            &x,
            &WienerIncrement {
                dw: vec![0.0; 3],
                dt: 0.1
            }
        )
        .is_err());
    }

    #[test]
    fn diffusion_inverse_examples() {
        let g = grid();
        let x = ramp(&g);
        let cs2 = CoefficientSet::additive(ScalarFn::zero(), 2.0);
        let ones = Field::from_values(&g, vec![1.0; 15]).unwrap();
        for v in apply_diffusion_inverse(&cs2, &x, &ones).unwrap().values().iter() {
            assert_relative_eq!(*v, 0.5, epsilon = 1e-12);
        }
        let degenerate = CoefficientSet::new(ScalarFn::zero(), ScalarFn::holder_power(0.5));
        assert!(matches!(
            apply_diffusion_inverse(&degenerate, &x, &ones),
            Err(Error::DegenerateDiffusion { .. })
        ));
    }

    #[test]
    fn diffusion_right_inverse_roundtrip() {
        let g = grid();
        let x = ramp(&g);
        let cs = CoefficientSet::new(ScalarFn::zero(), ScalarFn::bounded_holder(0.5, 0.5, 0.8, 1.0));
        let inc = sample_increment(&SeedSpec::new(3, 1, "r"), 0, &g, 1.0).unwrap();
        let v = Field::from_coeffs(&g, inc.dw.clone()).unwrap();
        // σ ∘ σ⁻¹ on nodal values
        let inv = apply_diffusion_inverse(&cs, &x, &v).unwrap();
        let back = apply_diffusion(
            &cs,
            &x,
            &WienerIncrement {
                dw: inv.coeffs().to_vec(),
                dt: 1.0,
            },
        )
        .unwrap();
        assert!(back.sub(&v).unwrap().h_norm() < 1e-12 * v.h_norm());
        // |σ⁻¹|_op ≤ 1/c₀ node by node
        for (a, b) in inv.values().iter().zip(v.values().iter()) {
            assert!(a.abs() <= b.abs() / 0.5 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mollify_examples() {
        let lin = ScalarFn::Linear {
            slope: -2.5,
            intercept: 0.3,
        };
        let m = mollify(&lin, 7).unwrap();
        for u in [-3.21, -0.01, 0.0, 0.5, 2.123456] {
            assert_relative_eq!(m.eval(u), lin.eval(u), epsilon = 1e-12);
        }
        let c = mollify(&ScalarFn::constant(1.7), 3).unwrap();
        assert_eq!(c.eval(0.123), 1.7);
        let p = mollify(&ScalarFn::holder_power(0.8), 100).unwrap();
        let expected = 0.5 * (0.0f64.powf(0.8) + 0.01f64.powf(0.8));
        assert_relative_eq!(p.eval(0.005), expected, max_relative = 1e-12);
        assert_relative_eq!(p.eval(0.005), 1.2559e-2, max_relative = 1e-4);
        assert!(mollify(&lin, 0).is_err());
    }

    /// Exact max of `|u|^β` minus its chord on the cell `[0, h]`:
    /// `h^β (r^β - r)` with `r = β^{1/(1-β)}`.
    fn first_cell_gap(beta: f64, h: f64) -> f64 {
        let r = beta.powf(1.0 / (1.0 - beta));
        h.powf(beta) * (r.powf(beta) - r)
    }

    #[test]
    fn uniform_gap_examples() {
        let f = ScalarFn::holder_power(0.8);
        assert_eq!(uniform_gap(&f, &f, 1.0), 0.0);
        let g100 = uniform_gap(&f, &mollify(&f, 100).unwrap(), 1.0);
        assert!(g100 <= 2.0 * 0.01f64.powf(0.8));
        assert_relative_eq!(g100, first_cell_gap(0.8, 0.01), max_relative = 1e-3);
        let g200 = uniform_gap(&f, &mollify(&f, 200).unwrap(), 1.0);
        assert!(g200 / g100 <= 2f64.powf(-0.8) * (1.0 + 1e-2));
        // monotone in n on doubling
        let mut last = f64::INFINITY;
        for n in [4, 8, 16, 32, 64, 128] {
            let gap = uniform_gap(&f, &mollify(&f, n).unwrap(), 2.0);
            assert!(gap <= last);
            last = gap;
        }
    }

    #[test]
    fn holder_constant_examples() {
        let beta = 0.8;
        let f = ScalarFn::holder_power(beta);
        let est = holder_constant_estimate(&f, beta, (-1.0, 1.0), 801, 0.0);
        assert!(est <= 1.0 + 1e-9, "{est}");
        assert!(est > 0.99);
        assert_eq!(
            holder_constant_estimate(&ScalarFn::constant(3.0), 0.5, (-1.0, 1.0), 101, 0.0),
            0.0
        );
        let n = 50;
        let m = mollify(&f, n).unwrap();
        let sep = holder_constant_estimate(&m, beta, (-1.0, 1.0), 1001, 10.0 / n as f64);
        assert!(sep <= 2.0 + 1e-9, "{sep}");
    }

    #[test]
    fn dissipativity_examples() {
        assert_eq!(
            dissipativity_constant(&ScalarFn::CubicDissipative),
            Dissipativity::Finite(1.0)
        );
        // the scan agrees with the factorisation 1 - (σ² + σρ + ρ²)
        let mut best = f64::NEG_INFINITY;
        let pts: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.05).collect();
        for &s in &pts {
            for &r in &pts {
                if s != r {
                    let f = ScalarFn::CubicDissipative;
                    best = best.max((f.eval(s) - f.eval(r)) / (s - r));
                }
            }
        }
        assert!(best <= 1.0 && best > 0.99);
        assert_eq!(
            dissipativity_constant(&ScalarFn::Linear {
                slope: -1.0,
                intercept: 0.0
            }),
            Dissipativity::Finite(-1.0)
        );
        let sine = dissipativity_constant(&ScalarFn::Sine { amplitude: 1.0 }).value();
        assert!((sine - 1.0).abs() < 1e-6 && sine <= 1.0);
        // u² on the window: quotient σ + ρ grows without bound
        let u_squared = ScalarFn::HolderPower {
            floor: 0.0,
            scale: 1.0,
            exponent: 2.0,
        };
        assert_eq!(dissipativity_constant(&u_squared), Dissipativity::Unbounded);
        assert_eq!(
            dissipativity_constant(&ScalarFn::holder_power(0.5)),
            Dissipativity::Unbounded
        );
    }

    #[test]
    fn catalogue_contracts() {
        let g = ScalarFn::bounded_holder(0.5, 0.5, 0.8, 1.0);
        assert_eq!(g.floor(), 0.5);
        assert_eq!(g.sup_abs(), Some(1.0));
        let m = g.growth_constant().unwrap();
        assert!(linear_growth_holds(&g, m, 1e3));
        let p = ScalarFn::HolderPower {
            floor: 0.2,
            scale: 2.0,
            exponent: 0.6,
        };
        assert!(linear_growth_holds(&p, p.growth_constant().unwrap(), 1e3));
        let s = ScalarFn::Sine { amplitude: 1.5 };
        assert!(linear_growth_holds(&s, s.growth_constant().unwrap(), 1e3));
        assert_eq!(ScalarFn::CubicDissipative.growth_constant(), None);
        // sandwich C₁ ≤ g ≤ C₂ on a scan
        let (c1, c2) = (g.floor(), g.sup_abs().unwrap());
        assert!(scan_points(-5.0, 5.0).all(|u| (c1..=c2).contains(&g.eval(u))));
    }

    #[test]
    fn mollified_floor_preserved() {
        let g = ScalarFn::bounded_holder(0.5, 1.0, 0.8, 1.0);
        for n in [1, 8, 32, 128] {
            let m = mollify(&g, n).unwrap();
            assert_eq!(m.floor(), 0.5);
            assert!(scan_points(-3.0, 3.0).all(|u| m.eval(u) >= 0.5));
        }
    }

    #[test]
    fn burgers_validation() {
        let ok = CoefficientSet::default().with_burgers(ScalarFn::Sine { amplitude: 1.0 }, 0.4, 1.0);
        assert!(ok.validate().is_ok());
        let bad = CoefficientSet::default().with_burgers(ScalarFn::Sine { amplitude: 1.0 }, 0.6, 0.5);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn serde_descriptor() {
        let cs = CoefficientSet::new(ScalarFn::zero(), ScalarFn::bounded_holder(0.5, 0.5, 0.8, 1.0));
        let json = serde_json::to_string(&cs).unwrap();
        assert!(json.contains("\"kind\":\"bounded_holder_power\""));
        let back: CoefficientSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cs);
    }

    proptest! {
        #[test]
        fn holder_power_respects_its_seminorm(x in -5.0f64..5.0, y in -5.0f64..5.0, beta in 0.1f64..1.0) {
            let f = ScalarFn::bounded_holder(0.3, 0.7, beta, 2.0);
            prop_assume!(x != y);
            prop_assert!((f.eval(x) - f.eval(y)).abs() <= 0.7 * (x - y).abs().powf(beta) * (1.0 + 1e-9));
        }

        #[test]
        fn gap_shrinks_on_doubling(beta in 0.2f64..1.0, n in 2u32..64) {
            let f = ScalarFn::holder_power(beta);
            let a = uniform_gap(&f, &mollify(&f, n).unwrap(), 1.0);
            let b = uniform_gap(&f, &mollify(&f, 2 * n).unwrap(), 1.0);
            prop_assert!(b <= a * (1.0 + 1e-9));
        }
    }
}
