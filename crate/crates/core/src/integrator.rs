//! Exponential-Euler discretisation of the mild formulation
//!
//! ```text
//! X_{m+1} = S(dt) X_m + Φ₁(dt) [ b(X_m) + (-A)^ϑ F(X_m) + λ (X'_m - X_m) 1_{active} ]
//!         + S(dt) σ(X_m) ΔW_m
//! ```
//!
//! with `S(dt)` and `Φ₁(dt) = (1 - e^{-(λ_k + ν) dt}) / (λ_k + ν)` applied
//! mode by mode, where `ν ≥ 0` is an optional extra damping `-νX`.
//! Nonlinear terms are evaluated at the collocation nodes and projected back
//! with the sine transform.

use std::io::{self, Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, DiffusionArgument};
use crate::noise::{NoiseStream, SeedSpec};
use crate::spectral::{l2, l2_distance, DstWorkspace, Field, SpectralGrid, SpectrumKind};
use crate::{Error, Result};

/// Upper bound on `dt · λ_max`.
pub const MAX_STIFFNESS: f64 = 50.0;
/// Upper bound on `gain · dt` for the feedback term.
pub const MAX_FEEDBACK_STEP: f64 = 0.1;
/// States with a node value beyond this are treated as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;
pub const DEFAULT_BALL_RADIUS: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    /// Gain `λ` of the control `λ (X - Ỹ)`.
    pub gain: f64,
    /// The control switches off once `|X - Ỹ|_H ≥ threshold · |x - y|_H`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    2.0
}

impl Feedback {
    pub fn new(gain: f64) -> Self {
        Feedback {
            gain,
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Arc<SpectralGrid>,
    pub coefficients: CoefficientSet,
    pub dt: f64,
    pub horizon: f64,
    pub initial: Field,
    pub damping: f64,
    pub feedback: Option<Feedback>,
    /// Store every `stride`-th state; 0 keeps only the endpoints.
    pub stride: usize,
    pub ball_radius: f64,
    /// Track the running nodal sup norm (costs one transform per step on
    /// linear problems).
    pub track_sup_norm: bool,
}

impl SimConfig {
    pub fn new(initial: Field, coefficients: CoefficientSet, dt: f64, horizon: f64) -> Self {
        SimConfig {
            grid: Arc::clone(initial.grid()),
            coefficients,
            dt,
            horizon,
            initial,
            damping: 0.0,
            feedback: None,
            stride: 0,
            ball_radius: DEFAULT_BALL_RADIUS,
            track_sup_norm: false,
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_feedback(mut self, feedback: Feedback) -> Self {
        self.feedback = Some(feedback);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_sup_norm(mut self, track: bool) -> Self {
        self.track_sup_norm = track;
        self
    }

    pub fn with_initial(mut self, initial: Field) -> Self {
        self.initial = initial;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                format!("time step must be positive, got {}", self.dt),
            ));
        }
        let stiffness = self.dt * self.grid.lambda_max();
        if stiffness > MAX_STIFFNESS {
            return Err(Error::invalid(
                "dt",
                format!("dt·λ_max = {stiffness:.3} exceeds {MAX_STIFFNESS}; reduce dt or n_modes"),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(
                "horizon",
                format!("must be positive, got {}", self.horizon),
            ));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::invalid("horizon", format!("T/dt = {ratio} is not an integer")));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::invalid(
                "damping",
                format!("must be non-negative, got {}", self.damping),
            ));
        }
        if self.initial.grid().n_modes() != self.grid.n_modes() || self.initial.grid().kind() != self.grid.kind() {
            return Err(Error::GridMismatch);
        }
        if let Some(fb) = &self.feedback {
            if !(fb.gain >= 0.0 && fb.gain.is_finite()) {
                return Err(Error::invalid("gain", format!("must be non-negative, got {}", fb.gain)));
            }
            let product = fb.gain * self.dt;
            if product > MAX_FEEDBACK_STEP {
                return Err(Error::StiffFeedback {
                    gain: fb.gain,
                    dt: self.dt,
                    product,
                });
            }
        }
        self.coefficients.validate()
    }
}

/// Precomputed per-mode factors and scratch buffers for one worker.
pub struct Stepper {
    grid: Arc<SpectralGrid>,
    cs: CoefficientSet,
    decay: Vec<f64>,
    phi1: Vec<f64>,
    burgers_weights: Option<Vec<f64>>,
    additive_sigma: Option<f64>,
    ws: DstWorkspace,
    values: Vec<f64>,
    nodal: Vec<f64>,
    modal: Vec<f64>,
    forcing: Vec<f64>,
    noise: Vec<f64>,
    g: Vec<f64>,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Self {
        Stepper::from_parts(&cfg.grid, &cfg.coefficients, cfg.dt, cfg.damping)
    }

    pub fn from_parts(grid: &Arc<SpectralGrid>, cs: &CoefficientSet, dt: f64, damping: f64) -> Self {
        let n = grid.n_modes();
        let burgers_weights = cs
            .burgers
            .as_ref()
            .filter(|b| !b.flux.is_zero())
            .map(|b| grid.eigenvalues().iter().map(|l| l.powf(b.theta)).collect());
        let additive_sigma = cs.diffusion.constant_value();
        Stepper {
            grid: Arc::clone(grid),
            cs: cs.clone(),
            decay: grid.decay_factors(dt, damping),
            phi1: grid.phi1_weights(dt, damping),
            burgers_weights,
            additive_sigma,
            ws: grid.workspace(),
            values: vec![0.0; n],
            nodal: vec![0.0; n],
            modal: vec![0.0; n],
            forcing: vec![0.0; n],
            noise: vec![0.0; n],
            g: vec![0.0; n],
        }
    }

    fn needs_values(&self) -> bool {
        !self.cs.drift.is_zero() || self.burgers_weights.is_some() || self.additive_sigma.is_none()
    }

    /// One step in place. `control` is an extra modal forcing added under
    /// `Φ₁`. Returns the sup norm of the pre-step nodal values when they
    /// were computed.
    pub fn step(&mut self, state: &mut [f64], control: Option<&[f64]>, dw: &[f64]) -> Option<f64> {
        let n = state.len();
        let mut sup = None;
        self.forcing.iter_mut().for_each(|f| *f = 0.0);
        if self.needs_values() {
            self.grid.dst_inverse_into(state, &mut self.values, &mut self.ws);
            sup = Some(self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            if !self.cs.drift.is_zero() {
                for (o, &u) in self.nodal.iter_mut().zip(&self.values) {
                    *o = self.cs.drift_at(u);
                }
                self.grid.dst_forward_into(&self.nodal, &mut self.modal, &mut self.ws);
                for (f, m) in self.forcing.iter_mut().zip(&self.modal) {
                    *f += m;
                }
            }
            if let Some(w) = &self.burgers_weights {
                for (o, &u) in self.nodal.iter_mut().zip(&self.values) {
                    *o = self.cs.flux_at(u);
                }
                self.grid.dst_forward_into(&self.nodal, &mut self.modal, &mut self.ws);
                for ((f, m), wk) in self.forcing.iter_mut().zip(&self.modal).zip(w) {
                    *f += wk * m;
                }
            }
        }
        if let Some(c) = control {
            for (f, u) in self.forcing.iter_mut().zip(c) {
                *f += u;
            }
        }
        match self.additive_sigma {
            Some(c) => {
                for (o, w) in self.noise.iter_mut().zip(dw) {
                    *o = c * w;
                }
            }
            None => match self.cs.diffusion_argument {
                DiffusionArgument::HNorm => {
                    let c = self.cs.diffusion_at(l2(state));
                    for (o, w) in self.noise.iter_mut().zip(dw) {
                        *o = c * w;
                    }
                }
                DiffusionArgument::Pointwise => {
                    for (o, &u) in self.g.iter_mut().zip(&self.values) {
                        *o = self.cs.diffusion_at(u);
                    }
                    self.grid.dst_inverse_into(dw, &mut self.nodal, &mut self.ws);
                    for (o, g) in self.nodal.iter_mut().zip(&self.g) {
                        *o *= g;
                    }
                    self.grid.dst_forward_into(&self.nodal, &mut self.noise, &mut self.ws);
                }
            },
        }
        #[allow(clippy::needless_range_loop)]
        for k in 0..n {
            state[k] = self.decay[k] * (state[k] + self.noise[k]) + self.phi1[k] * self.forcing[k];
        }
        sup
    }

    /// Girsanov integrand `u = σ(y)^{-1} v` for a modal vector `v`, written
    /// into `out`.
    pub(crate) fn girsanov_integrand(&mut self, y: &[f64], v: &[f64], out: &mut [f64]) {
        match (self.additive_sigma, self.cs.diffusion_argument) {
            (Some(c), _) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = x / c;
                }
            }
            (None, DiffusionArgument::HNorm) => {
                let c = self.cs.diffusion_at(l2(y));
                for (o, x) in out.iter_mut().zip(v) {
                    *o = x / c;
                }
            }
            (None, DiffusionArgument::Pointwise) => {
                self.grid.dst_inverse_into(y, &mut self.values, &mut self.ws);
                self.grid.dst_inverse_into(v, &mut self.nodal, &mut self.ws);
                for (o, &u) in self.nodal.iter_mut().zip(&self.values) {
                    *o /= self.cs.diffusion_at(u);
                }
                self.grid.dst_forward_into(&self.nodal, out, &mut self.ws);
            }
        }
    }
}

/// One exponential-Euler step of `state` with the increment of `step_index`.
pub fn step_mild(state: &Field, cfg: &SimConfig, seed: &SeedSpec, step_index: u64) -> Result<Field> {
    if !state.same_grid(&cfg.initial) {
        return Err(Error::GridMismatch);
    }
    let inc = NoiseStream::new(seed).increment(step_index, cfg.grid.n_modes(), cfg.dt)?;
    let mut stepper = Stepper::new(cfg);
    let mut a = state.coeffs().to_vec();
    stepper.step(&mut a, None, &inc.dw);
    Field::from_coeffs(&cfg.grid, a)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    /// `sup_m |X_m|_H` over every step, not only stored states.
    pub running_sup_h: f64,
    /// `sup_m max_j |X_m(ξ_j)|`; zero unless tracked.
    pub running_sup_nodal: f64,
    /// First time `|X|_H > R_ball`.
    pub exit_time: Option<f64>,
    /// Time of the first non-finite or oversized state.
    pub blow_up: Option<f64>,
    pub final_state: Field,
    pub steps_taken: usize,
}

impl Trajectory {
    pub fn blew_up(&self) -> bool {
        self.blow_up.is_some()
    }

    /// Columns `time,h_norm,sup_norm[,pair_distance]`.
    pub fn write_csv<W: Write>(&self, mut w: W, partner: Option<&Trajectory>) -> io::Result<()> {
        match partner {
            Some(_) => writeln!(w, "time,h_norm,sup_norm,pair_distance")?,
            None => writeln!(w, "time,h_norm,sup_norm")?,
        }
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            write!(w, "{t},{},{}", s.h_norm(), s.sup_norm())?;
            if let Some(p) = partner {
                let d = p
                    .states
                    .get(i)
                    .map(|o| l2_distance(s.coeffs(), o.coeffs()))
                    .unwrap_or(f64::NAN);
                write!(w, ",{d}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_snapshot<W: Write>(&self, w: W) -> Result<()> {
        write_snapshot(w, &self.times, &self.states)
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"SPDESNAP";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Little-endian layout: magic `SPDESNAP`, `u32` version, `u32` spectrum
/// kind (0 laplacian, 1 bilaplacian), `u64` mode count, `u64` record count,
/// then per record an `f64` time followed by the `f64` coefficients.
pub fn write_snapshot<W: Write>(mut w: W, times: &[f64], states: &[Field]) -> Result<()> {
    if times.len() != states.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            found: states.len(),
        });
    }
    let grid = match states.first() {
        Some(s) => Arc::clone(s.grid()),
        None => return Err(Error::Data("snapshot needs at least one state".into())),
    };
    let kind: u32 = match grid.kind() {
        SpectrumKind::Laplacian => 0,
        SpectrumKind::Bilaplacian => 1,
    };
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&kind.to_le_bytes())?;
    w.write_all(&(grid.n_modes() as u64).to_le_bytes())?;
    w.write_all(&(states.len() as u64).to_le_bytes())?;
    for (t, s) in times.iter().zip(states) {
        if !s.same_grid(&states[0]) {
            return Err(Error::GridMismatch);
        }
        w.write_all(&t.to_le_bytes())?;
        for a in s.coeffs() {
            w.write_all(&a.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(Vec<f64>, Vec<Field>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Data("not a snapshot file".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Data(format!("unsupported snapshot version {version}")));
    }
    r.read_exact(&mut b4)?;
    let kind = match u32::from_le_bytes(b4) {
        0 => SpectrumKind::Laplacian,
        1 => SpectrumKind::Bilaplacian,
        other => return Err(Error::Data(format!("unknown spectrum tag {other}"))),
    };
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let records = u64::from_le_bytes(b8) as usize;
    let grid = SpectralGrid::new(n, kind)?;
    let mut times = Vec::with_capacity(records);
    let mut states = Vec::with_capacity(records);
    for _ in 0..records {
        r.read_exact(&mut b8)?;
        times.push(f64::from_le_bytes(b8));
        let mut coeffs = vec![0.0; n];
        for c in coeffs.iter_mut() {
            r.read_exact(&mut b8)?;
            *c = f64::from_le_bytes(b8);
        }
        states.push(Field::from_coeffs(&grid, coeffs)?);
    }
    Ok((times, states))
}

struct Recorder {
    stride: usize,
    n_steps: usize,
    ball_radius: f64,
    dt: f64,
    times: Vec<f64>,
    states: Vec<Field>,
    sup_h: f64,
    sup_nodal: f64,
    exit_time: Option<f64>,
    blow_up: Option<f64>,
}

impl Recorder {
    fn new(cfg: &SimConfig) -> Self {
        Recorder {
            stride: cfg.stride,
            n_steps: cfg.n_steps(),
            ball_radius: cfg.ball_radius,
            dt: cfg.dt,
            times: Vec::new(),
            states: Vec::new(),
            sup_h: 0.0,
            sup_nodal: 0.0,
            exit_time: None,
            blow_up: None,
        }
    }

    /// Registers the state after `m` steps; returns false on blow-up.
    fn observe(&mut self, grid: &Arc<SpectralGrid>, m: usize, a: &[f64], nodal_sup: Option<f64>) -> bool {
        let t = m as f64 * self.dt;
        let h = l2(a);
        if let Some(s) = nodal_sup {
            self.sup_nodal = self.sup_nodal.max(s);
            if !(s <= BLOW_UP_THRESHOLD) {
                self.blow_up = Some(t);
                return false;
            }
        }
        if !h.is_finite() || h > BLOW_UP_THRESHOLD {
            self.blow_up = Some(t);
            return false;
        }
        self.sup_h = self.sup_h.max(h);
        if self.exit_time.is_none() && h > self.ball_radius {
            self.exit_time = Some(t);
        }
        let store = m == 0 || m == self.n_steps || (self.stride > 0 && m.is_multiple_of(self.stride));
        if store {
            self.times.push(t);
            self.states
                .push(Field::from_coeffs(grid, a.to_vec()).expect("grid length"));
        }
        true
    }

    fn finish(self, grid: &Arc<SpectralGrid>, a: Vec<f64>, steps_taken: usize) -> Trajectory {
        Trajectory {
            times: self.times,
            states: self.states,
            running_sup_h: self.sup_h,
            running_sup_nodal: self.sup_nodal,
            exit_time: self.exit_time,
            blow_up: self.blow_up,
            final_state: Field::from_coeffs(grid, a).expect("grid length"),
            steps_taken,
        }
    }
}

fn nodal_sup(grid: &SpectralGrid, a: &[f64], buf: &mut [f64], ws: &mut DstWorkspace) -> f64 {
    grid.dst_inverse_into(a, buf, ws);
    buf.iter()
        .fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// Runs one path; the observer sees `(step, coefficients)` after every step.
pub fn simulate_path_with<F>(cfg: &SimConfig, seed: &SeedSpec, mut observer: F) -> Result<Trajectory>
where
    F: FnMut(usize, &[f64]),
{
    cfg.validate()?;
    let n = cfg.grid.n_modes();
    let steps = cfg.n_steps();
    let stream = NoiseStream::new(seed);
    let mut stepper = Stepper::new(cfg);
    let mut rec = Recorder::new(cfg);
    let mut a = cfg.initial.coeffs().to_vec();
    let mut dw = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut ws = cfg.grid.workspace();
    let sqrt_dt = cfg.dt.sqrt();
    let initial_sup = cfg.track_sup_norm.then(|| nodal_sup(&cfg.grid, &a, &mut buf, &mut ws));
    observer(0, &a);
    if !rec.observe(&cfg.grid, 0, &a, initial_sup) {
        return Ok(rec.finish(&cfg.grid, a, 0));
    }
    for m in 0..steps {
        stream.gaussians(m as u64, sqrt_dt, &mut dw);
        stepper.step(&mut a, None, &dw);
        observer(m + 1, &a);
        let sup = cfg.track_sup_norm.then(|| nodal_sup(&cfg.grid, &a, &mut buf, &mut ws));
        if !rec.observe(&cfg.grid, m + 1, &a, sup) {
            return Ok(rec.finish(&cfg.grid, a, m + 1));
        }
    }
    Ok(rec.finish(&cfg.grid, a, steps))
}

pub fn simulate_path(cfg: &SimConfig, seed: &SeedSpec) -> Result<Trajectory> {
    simulate_path_with(cfg, seed, |_, _| {})
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub x: Trajectory,
    pub y: Trajectory,
    /// First time `|X - Ỹ|_H ≥ threshold·|x - y|_H`, the horizon if never.
    pub tau: f64,
    pub stopped: bool,
    /// `∫₀^{τ∧T} |σ(Ỹ)^{-1} λ (X - Ỹ)|²_H ds`, left-endpoint rule.
    pub girsanov_energy: f64,
    /// `log dQ/dP = -Σ ⟨u, ΔW⟩ - ½ Σ |u|² dt`.
    pub log_likelihood_ratio: f64,
    pub sup_distance: f64,
    pub final_distance: f64,
}

/// Steps `X` (no feedback) and `Ỹ` (feedback from `cfg_y`) on shared noise.
pub fn simulate_coupled_pair(cfg_x: &SimConfig, cfg_y: &SimConfig, seed: &SeedSpec) -> Result<CoupledRun> {
    cfg_x.validate()?;
    cfg_y.validate()?;
    if cfg_x.grid.n_modes() != cfg_y.grid.n_modes() || cfg_x.grid.kind() != cfg_y.grid.kind() {
        return Err(Error::ConfigMismatch("pair must share the spectral grid".into()));
    }
    if cfg_x.dt != cfg_y.dt || cfg_x.n_steps() != cfg_y.n_steps() {
        return Err(Error::ConfigMismatch("pair must share dt and horizon".into()));
    }
    let fb = cfg_y.feedback.unwrap_or(Feedback {
        gain: 0.0,
        threshold: 2.0,
    });
    if fb.gain > 0.0 && !cfg_y.coefficients.is_additive() && !(cfg_y.coefficients.diffusion.floor() > 0.0) {
        return Err(Error::DegenerateDiffusion {
            floor: cfg_y.coefficients.diffusion.floor(),
        });
    }
    if let Some(c) = cfg_y.coefficients.diffusion.constant_value() {
        if fb.gain > 0.0 && c == 0.0 {
            return Err(Error::DegenerateDiffusion { floor: 0.0 });
        }
    }
    let n = cfg_x.grid.n_modes();
    let grid = &cfg_x.grid;
    let steps = cfg_x.n_steps();
    let dt = cfg_x.dt;
    let stream = NoiseStream::new(seed);
    let mut sx = Stepper::new(cfg_x);
    let mut sy = Stepper::new(cfg_y);
    let mut rx = Recorder::new(cfg_x);
    let mut ry = Recorder::new(cfg_y);
    let mut a = cfg_x.initial.coeffs().to_vec();
    let mut b = cfg_y.initial.coeffs().to_vec();
    let threshold = fb.threshold * l2_distance(&a, &b);
    let mut dw = vec![0.0; n];
    let mut control = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut ws = grid.workspace();
    let sqrt_dt = dt.sqrt();
    let mut active = fb.gain > 0.0;
    let mut tau = None;
    let (mut energy, mut log_lr) = (0.0, 0.0);
    let mut sup_distance = l2_distance(&a, &b);

    let sups =
        |a: &[f64], buf: &mut [f64], ws: &mut DstWorkspace, track: bool| track.then(|| nodal_sup(grid, a, buf, ws));
    let s0x = sups(&a, &mut buf, &mut ws, cfg_x.track_sup_norm);
    let s0y = sups(&b, &mut buf, &mut ws, cfg_y.track_sup_norm);
    let mut alive = rx.observe(grid, 0, &a, s0x) & ry.observe(grid, 0, &b, s0y);
    let mut taken = 0;
    if alive {
        for m in 0..steps {
            let d = l2_distance(&a, &b);
            if tau.is_none() && d >= threshold && threshold > 0.0 {
                tau = Some(m as f64 * dt);
                active = false;
            }
            stream.gaussians(m as u64, sqrt_dt, &mut dw);
            let ctrl = if active {
                for k in 0..n {
                    control[k] = fb.gain * (a[k] - b[k]);
                }
                sy.girsanov_integrand(&b, &control, &mut u);
                let uu: f64 = u.iter().map(|x| x * x).sum();
                let udw: f64 = u.iter().zip(&dw).map(|(x, w)| x * w).sum();
                energy += uu * dt;
                log_lr += -udw - 0.5 * uu * dt;
                Some(control.as_slice())
            } else {
                None
            };
            sx.step(&mut a, None, &dw);
            sy.step(&mut b, ctrl, &dw);
            taken = m + 1;
            sup_distance = sup_distance.max(l2_distance(&a, &b));
            let s_x = sups(&a, &mut buf, &mut ws, cfg_x.track_sup_norm);
            let s_y = sups(&b, &mut buf, &mut ws, cfg_y.track_sup_norm);
            alive = rx.observe(grid, m + 1, &a, s_x) & ry.observe(grid, m + 1, &b, s_y);
            if !alive {
                break;
            }
        }
    }
    // crossings at the final step count toward τ as well
    if tau.is_none() && alive && threshold > 0.0 && l2_distance(&a, &b) >= threshold {
        tau = Some(steps as f64 * dt);
    }
    let final_distance = l2_distance(&a, &b);
    Ok(CoupledRun {
        x: rx.finish(grid, a, taken),
        y: ry.finish(grid, b, taken),
        tau: tau.unwrap_or(cfg_x.horizon),
        stopped: tau.is_some(),
        girsanov_energy: energy,
        log_likelihood_ratio: log_lr,
        sup_distance,
        final_distance,
    })
}
