//! The symmetrized damped Euler system on a periodic box
//!
//! ```text
//! v_t + ∇·u = −u·∇v − c v ∇·u
//! u_t + ∇v + b(t) u = −(u·∇)u − c v ∇v,      c = (γ−1)/2, b = μ(1+t)^{−λ}
//! ```
//!
//! with `v = (ρ^c − 1)/c`, discretized pseudo-spectrally (optionally with the
//! 2/3 rule) and advanced with classical RK4.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::grid::{Grid, ScalarField, VectorField};
use crate::math;
pub use crate::ode::Control;
use crate::params::{self, DampingLaw, GasLaw, WeightSpec};
use crate::{Complex64, Error, Result};

/// Solution in symmetric variables.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerState {
    pub t: f64,
    pub v: ScalarField,
    pub u: VectorField,
}

impl EulerState {
    pub fn equilibrium(grid: &Grid, t: f64) -> Self {
        EulerState { t, v: grid.zeros(), u: grid.zero_vector() }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        grid.check_scalar(&self.v, "v")?;
        grid.check_vector(&self.u, "u")
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.u.is_finite()
    }
}

/// Solution in physical variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    pub t: f64,
    pub rho: ScalarField,
    pub u: VectorField,
}

/// `v = (2/(γ−1))(ρ^{(γ−1)/2} − 1)`.
pub fn to_symmetric(p: &PhysicalState, g: &GasLaw) -> Result<EulerState> {
    let c = g.half_gamma_minus_one();
    if let Some((index, &value)) = p.rho.as_slice().iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::NonPositiveDensity { index, value });
    }
    let v = p.rho.map(|r| (math::powf(r, c) - 1.0) / c);
    Ok(EulerState { t: p.t, v, u: p.u.clone() })
}

/// `ρ = (1 + (γ−1)v/2)^{2/(γ−1)}`; fails where the sound speed would vanish.
pub fn from_symmetric(s: &EulerState, g: &GasLaw) -> Result<PhysicalState> {
    let c = g.half_gamma_minus_one();
    let mut rho = Vec::with_capacity(s.v.len());
    for (index, &v) in s.v.as_slice().iter().enumerate() {
        let sound = 1.0 + c * v;
        if !(sound > 0.0) {
            return Err(Error::NonPositiveDensity { index, value: sound });
        }
        rho.push(math::powf(sound, 1.0 / c));
    }
    Ok(PhysicalState { t: s.t, rho: ScalarField::from_vec(rho), u: s.u.clone() })
}

/// Standard bump `exp(−1/(1 − s²))` for `|s| < 1`, zero otherwise.
pub fn bump_profile(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        math::exp(-1.0 / q)
    }
}

/// Composition of the initial perturbation, before amplitude scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpShape {
    /// Weight of the bump in `ρ₀`.
    pub density: f64,
    /// Weight of the bump in each velocity component.
    pub velocity: [f64; 3],
    /// Weight of the spectral gradient `∇φ` (irrotational part).
    pub potential: f64,
    /// Weight of the rotated gradient (`(−∂₂φ, ∂₁φ)` in 2-D, `curl(φ e₃)` in 3-D).
    pub swirl: f64,
    /// Adds a seeded off-centre lobe inside `|x| < 0.8R` when set.
    pub seed: Option<u64>,
}

impl Default for BumpShape {
    fn default() -> Self {
        BumpShape { density: 1.0, velocity: [0.0; 3], potential: 0.0, swirl: 0.0, seed: None }
    }
}

/// How the shaped perturbation is scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// `‖ρ₀‖_{H^order} + ‖u₀‖_{H^order} = eps`, Sobolev norms as sums of
    /// seminorms.
    Sobolev { eps: f64, order: u32 },
    /// `∫ρ₀ dx = q0`, velocity scaled by the same factor.
    Mass { q0: f64 },
}

/// Data-regularity order `s + max(2, ⌈k_c⌉ + 2)`.
pub fn default_data_order(spec: &WeightSpec, s: u32) -> u32 {
    let m = (math::ceil(spec.k_c) + 2.0).max(2.0) as u32;
    s + m
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn shape_profile(grid: &Grid, radius: f64, seed: Option<u64>) -> ScalarField {
    let main = grid.from_fn(|x| bump_profile(math::sqrt(x.iter().map(|c| c * c).sum()) / radius));
    let Some(seed) = seed else {
        return main;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut centre = [0.0; 3];
    for c in centre.iter_mut().take(dim) {
        *c = 0.3 * radius * (2.0 * unit_uniform(&mut rng) - 1.0) / math::sqrt(dim as f64);
    }
    let weight = unit_uniform(&mut rng) - 0.5;
    let lobe = grid.from_fn(|x| {
        let r2: f64 = x.iter().zip(&centre).map(|(a, b)| (a - b) * (a - b)).sum();
        bump_profile(math::sqrt(r2) / (0.5 * radius))
    });
    main.zip_map(&lobe, |a, b| a + weight * b)
}

/// Compactly supported initial data built from the standard bump of radius
/// `radius`, returned in symmetric variables at `t = 0`.
pub fn initial_bump(
    radius: f64,
    amplitude: Amplitude,
    shape: &BumpShape,
    grid: &Grid,
    gas: &GasLaw,
) -> Result<EulerState> {
    if !(radius > 0.0 && radius < grid.half_length() / 2.0) {
        return Err(Error::param(
            "R",
            format!("support radius {radius} must lie in (0, L/2 = {})", grid.half_length() / 2.0),
        ));
    }
    let dim = grid.dim();
    if shape.swirl != 0.0 && dim == 1 {
        return Err(Error::param("swirl", "rotational data needs n >= 2"));
    }
    let phi = shape_profile(grid, radius, shape.seed);
    let rho_shape = phi.map(|x| shape.density * x);
    let mut u_shape = grid.zero_vector();
    for (a, c) in u_shape.components_mut().iter_mut().enumerate() {
        c.axpy(shape.velocity[a], &phi);
    }
    if shape.potential != 0.0 || shape.swirl != 0.0 {
        let grad = grid.gradient(&phi);
        let gc = grad.components();
        let comps = u_shape.components_mut();
        for a in 0..dim {
            comps[a].axpy(shape.potential, &gc[a]);
        }
        if shape.swirl != 0.0 {
            comps[0].axpy(-shape.swirl * if dim == 2 { 1.0 } else { -1.0 }, &gc[1]);
            comps[1].axpy(shape.swirl * if dim == 2 { 1.0 } else { -1.0 }, &gc[0]);
        }
    }

    let scale = match amplitude {
        Amplitude::Sobolev { eps, order } => {
            if eps == 0.0 {
                0.0
            } else {
                let norm = grid.sobolev_norm(&rho_shape, order)
                    + u_shape.components().iter().map(|c| grid.sobolev_norm(c, order)).sum::<f64>();
                if !(norm > 0.0) {
                    return Err(Error::param("shape", "all shape weights vanish"));
                }
                eps / norm
            }
        }
        Amplitude::Mass { q0 } => {
            let mass = grid.integrate(&rho_shape);
            if q0 == 0.0 {
                0.0
            } else if mass.abs() < 1e-300 {
                return Err(Error::param("shape", "density shape carries no mass"));
            } else {
                q0 / mass
            }
        }
    };
    let rho = rho_shape.map(|x| 1.0 + scale * x);
    u_shape.scale(scale);
    to_symmetric(&PhysicalState { t: 0.0, rho, u: u_shape }, gas)
}

/// How the friction term enters the time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingSplit {
    /// Friction is part of the RK4 right-hand side.
    Plain,
    /// Friction is integrated exactly by the factor `IF(t0, t)` (Lawson RK4).
    IntegratingFactor,
}

/// Thresholds of the exploratory blow-up monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupSettings {
    /// Trigger when `max(‖∇v‖∞, ‖∇u‖∞)` exceeds this multiple of its initial value.
    pub gradient_factor: f64,
    /// Trigger when the top third of the resolved band holds this energy fraction.
    pub tail_fraction: f64,
    /// Check every this many steps (snapshots are always checked).
    pub interval: usize,
}

impl Default for BlowupSettings {
    fn default() -> Self {
        BlowupSettings { gradient_factor: 100.0, tail_fraction: 0.01, interval: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Courant factor, `0 < cfl ≤ 0.5`.
    pub cfl: f64,
    pub dealias: bool,
    pub t_final: f64,
    /// Ascending times in `[0, t_final]` at which the observer is called.
    pub snapshot_times: Vec<f64>,
    /// Coefficient of the optional `−ν Δ²` stabilizer; nonzero values are
    /// flagged in reports.
    pub hyperviscosity: f64,
    pub damping_split: DampingSplit,
    /// Fixed step instead of the adaptive Courant step.
    pub fixed_dt: Option<f64>,
    pub blowup: BlowupSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl: 0.4,
            dealias: true,
            t_final: 1.0,
            snapshot_times: vec![0.0, 1.0],
            hyperviscosity: 0.0,
            damping_split: DampingSplit::Plain,
            fixed_dt: None,
            blowup: BlowupSettings::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::param("cfl", format!("{} outside (0, 0.5]", self.cfl)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::param("t_final", format!("{} must be finite and nonnegative", self.t_final)));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0])
            || self.snapshot_times.iter().any(|&t| t < 0.0 || t > self.t_final)
        {
            return Err(Error::param("snapshot_times", "must be ascending within [0, t_final]"));
        }
        if !(self.hyperviscosity >= 0.0) {
            return Err(Error::param("hyperviscosity", "must be nonnegative"));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) {
                return Err(Error::param("fixed_dt", format!("{dt} must be positive")));
            }
        }
        if self.blowup.interval == 0 {
            return Err(Error::param("blowup.interval", "must be at least 1"));
        }
        Ok(())
    }

    pub fn is_flagged(&self) -> bool {
        self.hyperviscosity > 0.0
    }
}

/// Time derivatives `(v_t, u_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub dv: ScalarField,
    pub du: VectorField,
}

/// Spatial derivatives shared by the right-hand side and `Q`.
struct Derivs {
    grad_v: Vec<ScalarField>,
    /// `jac[a][b] = ∂_b u_a`
    jac: Vec<Vec<ScalarField>>,
    div_u: ScalarField,
}

fn derivs(grid: &Grid, v: &ScalarField, u: &VectorField) -> Derivs {
    let dim = grid.dim();
    let grad_v = grid.gradient(v).into_components();
    let jac: Vec<Vec<ScalarField>> = u.components().iter().map(|c| grid.gradient(c).into_components()).collect();
    let mut div_u = grid.zeros();
    for (a, row) in jac.iter().enumerate().take(dim) {
        div_u.axpy(1.0, &row[a]);
    }
    Derivs { grad_v, jac, div_u }
}

/// Right-hand side with the friction coefficient `b` (0 drops the friction).
fn tendency(grid: &Grid, s: &EulerState, gas: &GasLaw, b: f64, dealias: bool, hyper: f64) -> Tendency {
    let dim = grid.dim();
    let c = gas.half_gamma_minus_one();
    let dr = derivs(grid, &s.v, &s.u);
    let v = s.v.as_slice();
    let uc = s.u.components();
    let len = grid.len();

    let mut dv = vec![0.0; len];
    for i in 0..len {
        let adv: f64 = uc.iter().zip(&dr.grad_v).map(|(u, g)| u.as_slice()[i] * g.as_slice()[i]).sum();
        let div = dr.div_u.as_slice()[i];
        dv[i] = -div - adv - c * v[i] * div;
    }
    let mut du: Vec<ScalarField> = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut out = vec![0.0; len];
        for (i, o) in out.iter_mut().enumerate() {
            let adv: f64 = uc.iter().zip(&dr.jac[a]).map(|(u, j)| u.as_slice()[i] * j.as_slice()[i]).sum();
            let gv = dr.grad_v[a].as_slice()[i];
            *o = -gv - b * uc[a].as_slice()[i] - adv - c * v[i] * gv;
        }
        du.push(ScalarField::from_vec(out));
    }

    let mut dv = ScalarField::from_vec(dv);
    if dealias || hyper > 0.0 {
        dv = filter(grid, &dv, dealias, hyper, &s.v);
        du = du.iter().zip(uc).map(|(f, u)| filter(grid, f, dealias, hyper, u)).collect();
    }
    Tendency { dv, du: VectorField::from_components(du) }
}

/// Truncate to the 2/3 band and add `−ν|k|⁴ f̂` of the underlying field.
fn filter(grid: &Grid, tend: &ScalarField, dealias: bool, hyper: f64, field: &ScalarField) -> ScalarField {
    let mut spec = grid.forward(tend);
    if hyper > 0.0 {
        let fs = grid.forward(field);
        for (idx, (z, f)) in spec.iter_mut().zip(&fs).enumerate() {
            let k = grid.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            *z -= f * (hyper * k2 * k2);
        }
    }
    if dealias {
        grid.dealias(&mut spec);
    }
    grid.inverse_real(spec)
}

/// `(v_t, u_t)` of the full system at the state's time.
pub fn rhs(s: &EulerState, d: &DampingLaw, g: &GasLaw, grid: &Grid, dealias: bool) -> Result<Tendency> {
    s.check(grid)?;
    let out = tendency(grid, s, g, params::damping_coeff(s.t, d), dealias, 0.0);
    if !(out.dv.is_finite() && out.du.is_finite()) {
        return Err(Error::NonFinite { what: "right-hand side", t: s.t });
    }
    Ok(out)
}

fn combine(base: &EulerState, t: f64, h: f64, k: &Tendency) -> EulerState {
    let mut v = base.v.clone();
    v.axpy(h, &k.dv);
    let mut u = base.u.clone();
    u.axpy(h, &k.du);
    EulerState { t, v, u }
}

/// Fixed-configuration RK4 integrator for one grid and parameter set.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    grid: &'a Grid,
    damping: DampingLaw,
    gas: GasLaw,
    config: SolverConfig,
}

/// Verdict of the blow-up monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowupVerdict {
    Smooth,
    GradientBlowup { t: f64, gradient_ratio: f64, tail_fraction: f64 },
}

/// Tracks gradient growth and spectral-tail energy against the initial state.
#[derive(Debug, Clone)]
pub struct BlowupMonitor {
    settings: BlowupSettings,
    dealias: bool,
    initial_gradient: f64,
    verdict: BlowupVerdict,
}

impl BlowupMonitor {
    pub fn new(settings: BlowupSettings, dealias: bool, grid: &Grid, s0: &EulerState) -> Self {
        let initial_gradient = max_gradient(grid, s0);
        BlowupMonitor { settings, dealias, initial_gradient, verdict: BlowupVerdict::Smooth }
    }

    pub fn verdict(&self) -> BlowupVerdict {
        self.verdict
    }

    /// Update with a new state; returns true once blow-up has been flagged.
    pub fn observe(&mut self, grid: &Grid, s: &EulerState) -> bool {
        if self.verdict != BlowupVerdict::Smooth {
            return true;
        }
        let grad = max_gradient(grid, s);
        let band = grid.resolved_band(self.dealias);
        let tail_start = 2 * band / 3;
        let (mut tail, mut total) = (0.0, 0.0);
        for f in core::iter::once(&s.v).chain(s.u.components()) {
            let spec = grid.forward(f);
            let e: f64 = spec.iter().map(Complex64::norm_sqr).sum();
            total += e;
            tail += e * grid.spectrum_tail_fraction(&spec, tail_start);
        }
        let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
        let ratio = if self.initial_gradient > 0.0 { grad / self.initial_gradient } else { 0.0 };
        let blown = grad > self.settings.gradient_factor * self.initial_gradient
            || tail_fraction > self.settings.tail_fraction
            || !grad.is_finite();
        if blown {
            self.verdict = BlowupVerdict::GradientBlowup { t: s.t, gradient_ratio: ratio, tail_fraction };
        }
        blown
    }
}

fn max_gradient(grid: &Grid, s: &EulerState) -> f64 {
    let gv = grid.gradient(&s.v).max_abs();
    let gu = s.u.components().iter().map(|c| grid.gradient(c).max_abs()).fold(0.0, f64::max);
    gv.max(gu)
}

/// Blow-up verdict over a stored history, judged against its first state.
pub fn blowup_monitor(history: &[EulerState], settings: BlowupSettings, dealias: bool, grid: &Grid) -> BlowupVerdict {
    let Some(first) = history.first() else {
        return BlowupVerdict::Smooth;
    };
    let mut m = BlowupMonitor::new(settings, dealias, grid, first);
    for s in history {
        if m.observe(grid, s) {
            break;
        }
    }
    m.verdict()
}

/// Result of [`Solver::run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub last: EulerState,
    pub steps: usize,
    pub verdict: BlowupVerdict,
    /// True when the observer stopped the run before `t_final`.
    pub stopped_early: bool,
}

impl<'a> Solver<'a> {
    pub fn new(grid: &'a Grid, damping: DampingLaw, gas: GasLaw, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Solver { grid, damping, gas, config })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn damping(&self) -> &DampingLaw {
        &self.damping
    }

    pub fn gas(&self) -> &GasLaw {
        &self.gas
    }

    /// Full right-hand side under this solver's discretization settings.
    pub fn tendency(&self, s: &EulerState) -> Result<Tendency> {
        rhs(s, &self.damping, &self.gas, self.grid, self.config.dealias)
    }

    /// Largest admissible step: the Courant bound
    /// `cfl·dx/(1 + ‖u‖∞ + c‖v‖∞)`, further limited so that `b·dt ≤ 1` and
    /// `ν k_max⁴ dt ≤ 1`.
    pub fn stable_dt(&self, s: &EulerState) -> f64 {
        let c = self.gas.half_gamma_minus_one();
        let speed = 1.0 + s.u.max_abs() + c * s.v.max_abs();
        let mut dt = self.config.cfl * self.grid.dx() / speed;
        let b = params::damping_coeff(s.t, &self.damping);
        if b > 0.0 {
            dt = dt.min(1.0 / b);
        }
        if self.config.hyperviscosity > 0.0 {
            let k = math::PI / self.grid.dx() * math::sqrt(self.grid.dim() as f64);
            dt = dt.min(1.0 / (self.config.hyperviscosity * k * k * k * k));
        }
        dt
    }

    fn courant_limit(&self, s: &EulerState) -> f64 {
        let c = self.gas.half_gamma_minus_one();
        0.5 * self.grid.dx() / (1.0 + s.u.max_abs() + c * s.v.max_abs())
    }

    fn stage(&self, s: &EulerState, with_friction: bool) -> Result<Tendency> {
        let b = if with_friction { params::damping_coeff(s.t, &self.damping) } else { 0.0 };
        let out = tendency(self.grid, s, &self.gas, b, self.config.dealias, self.config.hyperviscosity);
        if !(out.dv.is_finite() && out.du.is_finite()) {
            return Err(Error::NonFinite { what: "right-hand side", t: s.t });
        }
        Ok(out)
    }

    /// One classical RK4 step of size `dt`.
    pub fn step(&self, s: &EulerState, dt: f64) -> Result<EulerState> {
        match self.config.damping_split {
            DampingSplit::Plain => self.step_plain(s, dt),
            DampingSplit::IntegratingFactor => self.step_lawson(s, dt),
        }
    }

    fn step_plain(&self, s: &EulerState, dt: f64) -> Result<EulerState> {
        let t0 = s.t;
        let half = t0 + 0.5 * dt;
        let k1 = self.stage(s, true)?;
        let k2 = self.stage(&combine(s, half, 0.5 * dt, &k1), true)?;
        let k3 = self.stage(&combine(s, half, 0.5 * dt, &k2), true)?;
        let k4 = self.stage(&combine(s, t0 + dt, dt, &k3), true)?;
        let mut out = s.clone();
        out.t = t0 + dt;
        for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
            out.v.axpy(dt * w / 6.0, &k.dv);
            out.u.axpy(dt * w / 6.0, &k.du);
        }
        Ok(out)
    }

    /// Lawson RK4 in the variable `U = IF(t0, t)·u`, which removes the
    /// friction from the stages.
    fn step_lawson(&self, s: &EulerState, dt: f64) -> Result<EulerState> {
        let t0 = s.t;
        let ph = params::integrating_factor(t0, t0 + 0.5 * dt, &self.damping)?;
        let pf = params::integrating_factor(t0, t0 + dt, &self.damping)?;
        // stage state at time t0+h from the transformed increment
        let lift = |t: f64, h: f64, k: &Tendency, phi: f64| -> EulerState {
            let mut st = combine(s, t, h, k);
            st.u.scale(1.0 / phi);
            st
        };
        let scaled = |k: Tendency, phi: f64| -> Tendency {
            let mut du = k.du;
            du.scale(phi);
            Tendency { dv: k.dv, du }
        };
        let k1 = self.stage(s, false)?;
        let k2 = scaled(self.stage(&lift(t0 + 0.5 * dt, 0.5 * dt, &k1, ph), false)?, ph);
        let k3 = scaled(self.stage(&lift(t0 + 0.5 * dt, 0.5 * dt, &k2, ph), false)?, ph);
        let k4 = scaled(self.stage(&lift(t0 + dt, dt, &k3, pf), false)?, pf);
        let mut out = s.clone();
        out.t = t0 + dt;
        for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
            out.v.axpy(dt * w / 6.0, &k.dv);
            out.u.axpy(dt * w / 6.0, &k.du);
        }
        out.u.scale(1.0 / pf);
        Ok(out)
    }

    fn positivity(&self, s: &EulerState) -> Result<()> {
        let c = self.gas.half_gamma_minus_one();
        match s.v.as_slice().iter().enumerate().find(|(_, &v)| !(1.0 + c * v > 0.0)) {
            Some((index, &v)) => Err(Error::NonPositiveDensity { index, value: 1.0 + c * v }),
            None => Ok(()),
        }
    }

    /// Band-limited copy of `s`: with dealiasing on, modes outside the 2/3
    /// band have zero tendency, so every evolved state lives in the band.
    pub fn admissible(&self, s: &EulerState) -> EulerState {
        if !self.config.dealias {
            return s.clone();
        }
        let u = s.u.components().iter().map(|c| self.grid.project(c)).collect();
        EulerState { t: s.t, v: self.grid.project(&s.v), u: VectorField::from_components(u) }
    }

    /// Advance from `s0` (first made [`admissible`](Self::admissible)) to
    /// `t_final`, calling `observe` at every snapshot time. Stops early when
    /// the observer asks to or the blow-up monitor fires; the latter is
    /// reported in the outcome, not as an error.
    pub fn run(&self, s0: EulerState, mut observe: impl FnMut(&EulerState) -> Result<Control>) -> Result<RunOutcome> {
        s0.check(self.grid)?;
        let s0 = self.admissible(&s0);
        self.positivity(&s0)?;
        let cfg = &self.config;
        let mut monitor = BlowupMonitor::new(cfg.blowup, cfg.dealias, self.grid, &s0);
        let mut marks: Vec<(f64, bool)> = cfg.snapshot_times.iter().map(|&t| (t, true)).collect();
        if marks.last().is_none_or(|m| m.0 < cfg.t_final) {
            marks.push((cfg.t_final, false));
        }
        let mut s = s0;
        let mut steps = 0usize;
        for (target, snapshot) in marks {
            if target < s.t {
                continue;
            }
            while s.t < target {
                let limit = self.courant_limit(&s);
                let mut dt = match cfg.fixed_dt {
                    Some(dt) => {
                        if dt > limit {
                            return Err(Error::Cfl { dt, limit });
                        }
                        dt
                    }
                    None => self.stable_dt(&s),
                };
                let last = s.t + dt >= target || target - (s.t + dt) < 1e-9 * dt;
                if last {
                    dt = target - s.t;
                }
                let mut next = self.step(&s, dt)?;
                if last {
                    next.t = target;
                }
                s = next;
                steps += 1;
                if !s.is_finite() {
                    return Err(Error::NonFinite { what: "solution", t: s.t });
                }
                self.positivity(&s)?;
                if (steps.is_multiple_of(cfg.blowup.interval) || last) && monitor.observe(self.grid, &s) {
                    return Ok(RunOutcome { last: s, steps, verdict: monitor.verdict(), stopped_early: true });
                }
            }
            if snapshot && observe(&s)? == Control::Stop {
                return Ok(RunOutcome { last: s, steps, verdict: monitor.verdict(), stopped_early: true });
            }
        }
        Ok(RunOutcome { last: s, steps, verdict: monitor.verdict(), stopped_early: false })
    }
}

/// Source term of the damped wave equation satisfied by `v`:
/// `v_tt − Δv + b v_t = Q` with
/// `Q = −b N₁ − ∂_t N₁ + ∇·N₂`, `N₁ = u·∇v + c v ∇·u`, `N₂ = (u·∇)u + c v ∇v`,
/// where `∂_t N₁` is assembled from the supplied tendency.
pub fn source_q(s: &EulerState, s_t: &Tendency, d: &DampingLaw, g: &GasLaw, grid: &Grid) -> Result<ScalarField> {
    s.check(grid)?;
    grid.check_scalar(&s_t.dv, "v_t")?;
    grid.check_vector(&s_t.du, "u_t")?;
    let dim = grid.dim();
    let c = g.half_gamma_minus_one();
    let b = params::damping_coeff(s.t, d);
    let dr = derivs(grid, &s.v, &s.u);
    let grad_vt = grid.gradient(&s_t.dv).into_components();
    let div_ut = grid.divergence(&s_t.du);
    let len = grid.len();
    let v = s.v.as_slice();
    let vt = s_t.dv.as_slice();
    let uc = s.u.components();
    let utc = s_t.du.components();

    let mut n1 = vec![0.0; len];
    let mut dn1 = vec![0.0; len];
    for i in 0..len {
        let mut adv = 0.0;
        let mut adv_t = 0.0;
        for a in 0..dim {
            adv += uc[a].as_slice()[i] * dr.grad_v[a].as_slice()[i];
            adv_t += utc[a].as_slice()[i] * dr.grad_v[a].as_slice()[i] + uc[a].as_slice()[i] * grad_vt[a].as_slice()[i];
        }
        let div = dr.div_u.as_slice()[i];
        n1[i] = adv + c * v[i] * div;
        dn1[i] = adv_t + c * (vt[i] * div + v[i] * div_ut.as_slice()[i]);
    }
    let mut n2 = grid.zero_vector();
    for (a, comp) in n2.components_mut().iter_mut().enumerate() {
        let out = comp.as_mut_slice();
        for (i, o) in out.iter_mut().enumerate() {
            let adv: f64 = uc.iter().zip(&dr.jac[a]).map(|(u, j)| u.as_slice()[i] * j.as_slice()[i]).sum();
            *o = adv + c * v[i] * dr.grad_v[a].as_slice()[i];
        }
    }
    let div_n2 = grid.divergence(&n2);
    let q: Vec<f64> = (0..len).map(|i| -b * n1[i] - dn1[i] + div_n2.as_slice()[i]).collect();
    let q = ScalarField::from_vec(q);
    if !q.is_finite() {
        return Err(Error::NonFinite { what: "source term Q", t: s.t });
    }
    Ok(q)
}

/// Spectral curl: a scalar in 2-D, a vector in 3-D.
#[derive(Debug, Clone, PartialEq)]
pub enum Vorticity {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Vorticity {
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        match self {
            Vorticity::Scalar(w) => grid.l2_norm(w),
            Vorticity::Vector(w) => grid.l2_norm_vec(w),
        }
    }

    pub fn linf_norm(&self) -> f64 {
        match self {
            Vorticity::Scalar(w) => w.max_abs(),
            Vorticity::Vector(w) => w.max_abs(),
        }
    }
}

pub fn vorticity(s: &EulerState, grid: &Grid) -> Result<Vorticity> {
    grid.check_vector(&s.u, "u")?;
    let u = s.u.components();
    match grid.dim() {
        2 => {
            let mut w = grid.partial(&u[1], 0);
            w.axpy(-1.0, &grid.partial(&u[0], 1));
            Ok(Vorticity::Scalar(w))
        }
        3 => {
            let d = |a: usize, axis: usize| grid.partial(&u[a], axis);
            let comps = [(2, 1, 1, 2), (0, 2, 2, 0), (1, 0, 0, 1)]
                .iter()
                .map(|&(a, ax, b, bx)| {
                    let mut w = d(a, ax);
                    w.axpy(-1.0, &d(b, bx));
                    w
                })
                .collect();
            Ok(Vorticity::Vector(VectorField::from_components(comps)))
        }
        n => Err(Error::param("n", format!("vorticity needs n in {{2, 3}}, got {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gas(g: f64) -> GasLaw {
        GasLaw::new(g).unwrap()
    }

    fn state_1d(grid: &Grid, v: impl Fn(f64) -> f64, u: impl Fn(f64) -> f64) -> EulerState {
        EulerState {
            t: 0.0,
            v: grid.from_fn(|x| v(x[0])),
            u: VectorField::from_components(vec![grid.from_fn(|x| u(x[0]))]),
        }
    }

    #[test]
    fn symmetric_variable_examples() {
        let grid = Grid::new(1, 1.0, 16).unwrap();
        let mk = |r: f64| PhysicalState { t: 0.0, rho: ScalarField::from_vec(vec![r; 16]), u: grid.zero_vector() };
        assert!(to_symmetric(&mk(1.0), &gas(2.0)).unwrap().v.max_abs() < 1e-15);
        assert!((to_symmetric(&mk(4.0), &gas(2.0)).unwrap().v.as_slice()[0] - 2.0).abs() < 1e-14);
        assert!((to_symmetric(&mk(0.25), &gas(3.0)).unwrap().v.as_slice()[0] + 0.75).abs() < 1e-14);
        assert!(matches!(to_symmetric(&mk(0.0), &gas(2.0)), Err(Error::NonPositiveDensity { .. })));
        let s = EulerState { t: 0.0, v: ScalarField::from_vec(vec![2.0; 16]), u: grid.zero_vector() };
        assert!((from_symmetric(&s, &gas(2.0)).unwrap().rho.as_slice()[0] - 4.0).abs() < 1e-14);
        let s = EulerState { t: 0.0, v: ScalarField::from_vec(vec![-2.0; 16]), u: grid.zero_vector() };
        assert!(from_symmetric(&s, &gas(2.0)).is_err());
    }

    #[test]
    fn rhs_examples() {
        let grid = Grid::new(1, math::PI, 32).unwrap();
        let d = DampingLaw::new(0.5, 2.0).unwrap();
        let eq = EulerState::equilibrium(&grid, 0.0);
        let k = rhs(&eq, &d, &gas(2.0), &grid, true).unwrap();
        assert_eq!(k.dv.max_abs(), 0.0);
        assert_eq!(k.du.max_abs(), 0.0);

        let mut s = state_1d(&grid, |_| 0.0, |_| 0.7);
        s.t = 3.0;
        let k = rhs(&s, &d, &gas(2.0), &grid, true).unwrap();
        assert!(k.dv.max_abs() < 1e-14);
        assert!(k.du.components()[0].as_slice().iter().all(|x| (x + 0.7).abs() < 1e-14));

        let s = state_1d(&grid, f64::sin, |_| 0.0);
        let k = rhs(&s, &d, &gas(3.0), &grid, false).unwrap();
        assert!(k.dv.max_abs() < 1e-13);
        for i in 0..grid.len() {
            let x = grid.position(i)[0];
            let expect = -x.cos() - x.sin() * x.cos();
            assert!((k.du.components()[0].as_slice()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_vanishes_outside_support_and_data_scales() {
        let grid = Grid::new(1, 40.0, 256).unwrap();
        assert_eq!(bump_profile(1.0), 0.0);
        assert_eq!(bump_profile(1.5), 0.0);
        let s = initial_bump(5.0, Amplitude::Sobolev { eps: 0.0, order: 3 }, &BumpShape::default(), &grid, &gas(2.0))
            .unwrap();
        assert_eq!(s.v.max_abs(), 0.0);
        let s = initial_bump(5.0, Amplitude::Mass { q0: 0.01 }, &BumpShape::default(), &grid, &gas(2.0)).unwrap();
        let p = from_symmetric(&s, &gas(2.0)).unwrap();
        let m = grid.integrate(&p.rho.map(|r| r - 1.0));
        assert!((m - 0.01).abs() < 1e-10);
        for i in 0..grid.len() {
            if grid.radius(i) >= 5.0 {
                assert_eq!(s.v.as_slice()[i], 0.0);
            }
        }
        assert!(initial_bump(25.0, Amplitude::Mass { q0: 0.01 }, &BumpShape::default(), &grid, &gas(2.0)).is_err());
    }

    #[test]
    fn vorticity_examples() {
        let grid = Grid::new(2, math::PI, 32).unwrap();
        let u = VectorField::from_components(vec![grid.from_fn(|x| -x[1].sin()), grid.zeros()]);
        let s = EulerState { t: 0.0, v: grid.zeros(), u };
        let Vorticity::Scalar(w) = vorticity(&s, &grid).unwrap() else { panic!("2-D curl is scalar") };
        for i in 0..grid.len() {
            assert!((w.as_slice()[i] - grid.position(i)[1].cos()).abs() < 1e-12);
        }
        let g1 = Grid::new(1, 1.0, 16).unwrap();
        assert!(vorticity(&EulerState::equilibrium(&g1, 0.0), &g1).is_err());
        let g3 = Grid::new(3, 1.0, 16).unwrap();
        assert_eq!(vorticity(&EulerState::equilibrium(&g3, 0.0), &g3).unwrap().linf_norm(), 0.0);
    }

    #[test]
    fn q_vanishes_on_trivial_states() {
        let grid = Grid::new(1, math::PI, 32).unwrap();
        let d = DampingLaw::new(0.5, 1.0).unwrap();
        for s in [EulerState::equilibrium(&grid, 0.0), state_1d(&grid, |_| 0.3, |_| 0.0)] {
            let k = rhs(&s, &d, &gas(2.0), &grid, true).unwrap();
            assert!(source_q(&s, &k, &d, &gas(2.0), &grid).unwrap().max_abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { cfl: 0.6, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { snapshot_times: vec![0.5, 0.2], ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
