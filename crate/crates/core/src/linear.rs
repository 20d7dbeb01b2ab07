//! Fourier laboratory for the damped wave equation
//! `w_tt − Δw + μ(1+t)^{-λ} w_t = f` on a periodic grid.
//!
//! Every Fourier mode obeys the scalar ODE `ŵ'' + b(t) ŵ' + |ξ|² ŵ = f̂`, which
//! depends on the frequency only through `r = |ξ|`. Its propagators are real,
//! so they are stored as real numbers and applied to complex amplitudes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::exec::ModeMap;
use crate::grid::{Grid, ScalarField};
use crate::math;
use crate::ode::{self, Control, Tolerance};
use crate::params::{self, DampingLaw, Zone};
use crate::quad;
use crate::{Complex64, Error, Result};

/// A frequency vector in one to three dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Freq {
    comps: [f64; 3],
    dim: usize,
}

impl Freq {
    pub fn new(comps: &[f64]) -> Result<Self> {
        if comps.is_empty() || comps.len() > 3 {
            return Err(Error::Shape(format!("frequency with {} components", comps.len())));
        }
        let mut c = [0.0; 3];
        c[..comps.len()].copy_from_slice(comps);
        Ok(Freq { comps: c, dim: comps.len() })
    }

    /// The one-dimensional frequency `r`.
    pub fn scalar(r: f64) -> Self {
        Freq { comps: [r, 0.0, 0.0], dim: 1 }
    }

    pub fn components(&self) -> &[f64] {
        &self.comps[..self.dim]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components().iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sqr())
    }
}

/// Complex amplitude of one Fourier mode and its time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub t: f64,
    pub xi: Freq,
    pub w_hat: Complex64,
    pub w_hat_t: Complex64,
}

/// Right-hand side `(ŵ_t, f̂ − |ξ|²ŵ − b(t)ŵ_t)` of the mode equation.
pub fn mode_rhs(s: &ModeState, f_hat: Complex64, d: &DampingLaw) -> (Complex64, Complex64) {
    let b = params::damping_coeff(s.t, d);
    (s.w_hat_t, f_hat - s.w_hat * s.xi.norm_sqr() - s.w_hat_t * b)
}

/// Which fundamental solution a kernel quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kernel {
    /// Data `(1, 0)` at the source time.
    Phi1,
    /// Data `(0, 1)` at the source time.
    Phi2,
}

impl Kernel {
    pub fn label(&self) -> &'static str {
        match self {
            Kernel::Phi1 => "phi1",
            Kernel::Phi2 => "phi2",
        }
    }
}

/// Two-time propagator entries of the mode equation for `|ξ| = xi`: the
/// solutions observed at `t` that start from `(1, 0)` and `(0, 1)` at `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorSample {
    pub t: f64,
    pub tau: f64,
    pub xi: f64,
    pub phi1: f64,
    pub phi1_t: f64,
    pub phi2: f64,
    pub phi2_t: f64,
    /// Set once the mode energy bound placed both solutions below the flush
    /// threshold; all four entries are then reported as zero.
    pub flushed: bool,
}

impl PropagatorSample {
    pub fn identity(tau: f64, xi: f64) -> Self {
        PropagatorSample { t: tau, tau, xi, phi1: 1.0, phi1_t: 0.0, phi2: 0.0, phi2_t: 1.0, flushed: false }
    }

    /// `[[Φ₁, Φ₂], [Φ₁', Φ₂']]`, mapping `(ŵ, ŵ_t)(τ)` to `(ŵ, ŵ_t)(t)`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.phi1, self.phi2], [self.phi1_t, self.phi2_t]]
    }

    pub fn value(&self, k: Kernel) -> f64 {
        match k {
            Kernel::Phi1 => self.phi1,
            Kernel::Phi2 => self.phi2,
        }
    }

    pub fn derivative(&self, k: Kernel) -> f64 {
        match k {
            Kernel::Phi1 => self.phi1_t,
            Kernel::Phi2 => self.phi2_t,
        }
    }

    /// Mode energy `Φ'² + |ξ|²Φ²`; non-increasing in `t` for `t ≥ τ`.
    pub fn energy(&self, k: Kernel) -> f64 {
        let (p, pt) = (self.value(k), self.derivative(k));
        pt * pt + self.xi * self.xi * p * p
    }

    pub fn apply(&self, w: Complex64, w_t: Complex64) -> (Complex64, Complex64) {
        (w * self.phi1 + w_t * self.phi2, w * self.phi1_t + w_t * self.phi2_t)
    }

    fn flushed_at(t: f64, tau: f64, xi: f64) -> Self {
        PropagatorSample { t, tau, xi, phi1: 0.0, phi1_t: 0.0, phi2: 0.0, phi2_t: 0.0, flushed: true }
    }
}

/// Mode-integrator settings for `|ξ| = r`: the given relative tolerance and a
/// step cap of `0.1/r` on the oscillatory side.
pub fn mode_tolerance(r: f64, rtol: f64) -> Tolerance {
    Tolerance {
        rtol,
        atol: 1e-4 * rtol,
        max_step: if r > 0.0 { 0.1 / r } else { f64::INFINITY },
        ..Tolerance::default()
    }
}

/// Checkpoints at `tau + 2^j` and then every 64 time units where the flush
/// test can run between requested outputs.
fn with_checkpoints(tau: f64, times: &[f64]) -> (Vec<f64>, Vec<Option<usize>>) {
    let end = times.last().copied().unwrap_or(tau);
    let mut marks: Vec<(f64, Option<usize>)> = times.iter().enumerate().map(|(i, &t)| (t, Some(i))).collect();
    let mut s = 1.0;
    while tau + s < end && s < 64.0 {
        marks.push((tau + s, None));
        s *= 2.0;
    }
    let mut c = tau + 64.0;
    while c < end {
        marks.push((c, None));
        c += 64.0;
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.is_some().cmp(&a.1.is_some())));
    marks.into_iter().unzip()
}

/// Integrate both fundamental solutions of the homogeneous mode equation with
/// data posed at `tau`, reporting them at each ascending time in `times`.
///
/// With `flush = Some(eps)` and `xi > 0`, integration stops as soon as the
/// energy bound `|Φ| ≤ √E/ξ` certifies both solutions below `eps`; the
/// remaining samples are zero and marked `flushed`.
pub fn propagate(
    xi: f64,
    tau: f64,
    times: &[f64],
    d: &DampingLaw,
    tol: &Tolerance,
    flush: Option<f64>,
) -> Result<Vec<PropagatorSample>> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::param("xi", format!("frequency magnitude {xi} must be finite and nonnegative")));
    }
    if !(tau >= 0.0) {
        return Err(Error::param("tau", format!("source time {tau} is negative")));
    }
    if let Some(&first) = times.first() {
        if first < tau {
            return Err(Error::param("tau", format!("source time {tau} exceeds observation time {first}")));
        }
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "observation times must be ascending"));
    }
    let r2 = xi * xi;
    let rhs = |t: f64, y: &[f64; 4]| {
        let b = params::damping_coeff(t, d);
        [y[1], -b * y[1] - r2 * y[0], y[3], -b * y[3] - r2 * y[2]]
    };
    let (marks, slots) = with_checkpoints(tau, times);
    let mut out: Vec<PropagatorSample> = Vec::with_capacity(times.len());
    let mut stopped_at = None;
    ode::integrate(rhs, tau, [1.0, 0.0, 0.0, 1.0], &marks, tol, |i, t, y| {
        if let Some(slot) = slots[i] {
            debug_assert_eq!(slot, out.len());
            out.push(PropagatorSample {
                t,
                tau,
                xi,
                phi1: y[0],
                phi1_t: y[1],
                phi2: y[2],
                phi2_t: y[3],
                flushed: false,
            });
        }
        if let Some(eps) = flush {
            if xi > 0.0 {
                let e1 = y[1] * y[1] + r2 * y[0] * y[0];
                let e2 = y[3] * y[3] + r2 * y[2] * y[2];
                let bound = math::sqrt(e1.max(e2)) * (1.0 / xi).max(1.0);
                if bound < eps {
                    stopped_at = Some(t);
                    return Control::Stop;
                }
            }
        }
        Control::Continue
    })?;
    if stopped_at.is_some() {
        for &t in &times[out.len()..] {
            out.push(PropagatorSample::flushed_at(t, tau, xi));
        }
    }
    debug_assert_eq!(out.len(), times.len());
    Ok(out)
}

/// Propagator of the mode equation from data at `tau` to time `t`.
pub fn two_time_propagator(t: f64, tau: f64, xi: f64, d: &DampingLaw, tol: &Tolerance) -> Result<PropagatorSample> {
    if tau > t {
        return Err(Error::param("tau", format!("source time {tau} exceeds observation time {t}")));
    }
    Ok(propagate(xi, tau, &[t], d, tol, None)?[0])
}

/// `Φ₁(t, ξ)` and `Φ₂(t, ξ)` with data posed at `t = 0`.
pub fn fundamental_pair(t: f64, xi: f64, d: &DampingLaw, tol: &Tolerance) -> Result<PropagatorSample> {
    two_time_propagator(t, 0.0, xi, d, tol)
}

/// Wronskian `Φ₁Φ₂' − Φ₂Φ₁'` of the pair started at 0, equal to `1/IF(0, τ)`.
pub fn wronskian(tau: f64, d: &DampingLaw) -> Result<f64> {
    Ok(math::exp(-params::log_integrating_factor(0.0, tau, d)?))
}

/// Duhamel kernel `E₂(t, τ)` rebuilt from the pair started at 0:
/// `[Φ₂(t)Φ₁(τ) − Φ₁(t)Φ₂(τ)] / W(τ)`.
pub fn wronskian_kernel(at_t: &PropagatorSample, at_tau: &PropagatorSample, d: &DampingLaw) -> Result<f64> {
    let w = wronskian(at_tau.t, d)?;
    Ok((at_t.phi2 * at_tau.phi1 - at_t.phi1 * at_tau.phi2) / w)
}

/// Non-fatal observations attached to linear-module results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The named field carries more than the configured fraction of its
    /// spectral energy outside the 2/3 band.
    Aliasing { field: &'static str, fraction: f64 },
}

impl core::fmt::Display for Warning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Warning::Aliasing { field, fraction } => {
                write!(f, "aliasing: {field} carries {fraction:.2e} of its spectral energy outside the 2/3 band")
            }
        }
    }
}

/// Grid modes grouped by `|ξ|`, ascending.
#[derive(Debug, Clone)]
pub struct Shells {
    pub radii: Vec<f64>,
    pub members: Vec<Vec<usize>>,
}

impl Shells {
    /// All modes with `|ξ| ≤ cutoff` (every mode when `cutoff` is `None`).
    pub fn of(grid: &Grid, cutoff: Option<f64>) -> Self {
        let k0 = grid.fundamental_wavenumber();
        let mut map: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for idx in 0..grid.len() {
            let shell = grid.mode_shell(idx);
            let r = k0 * math::sqrt(shell as f64);
            if cutoff.is_none_or(|c| r <= c) {
                map.entry(shell).or_default().push(idx);
            }
        }
        let radii = map.keys().map(|&s| k0 * math::sqrt(s as f64)).collect();
        let members = map.into_values().collect();
        Shells { radii, members }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

fn aliasing_warnings(grid: &Grid, fields: &[(&'static str, &[Complex64])], fraction: f64) -> Vec<Warning> {
    let band = grid.resolved_band(true);
    fields
        .iter()
        .filter_map(|(name, spec)| {
            let f = grid.spectrum_tail_fraction(spec, band);
            (f > fraction).then_some(Warning::Aliasing { field: name, fraction: f })
        })
        .collect()
}

/// Sampled forcing `f(τ_j, ·)` on ascending source times starting at 0.
/// Between samples the forcing is linear in `τ`.
#[derive(Debug, Clone)]
pub struct ForcingHistory {
    taus: Vec<f64>,
    fields: Vec<ScalarField>,
}

impl ForcingHistory {
    pub fn new(taus: Vec<f64>, fields: Vec<ScalarField>) -> Result<Self> {
        if taus.len() != fields.len() || taus.is_empty() {
            return Err(Error::Shape(format!("{} forcing times for {} fields", taus.len(), fields.len())));
        }
        if taus[0] != 0.0 || taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("taus", "forcing times must start at 0 and increase strictly"));
        }
        Ok(ForcingHistory { taus, fields })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }
}

/// Settings shared by the grid-level linear solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    /// Relative tolerance of the mode integrator.
    pub rtol: f64,
    /// Spectral tail fraction above which an aliasing warning is raised.
    pub alias_fraction: f64,
    /// Flush threshold for decayed modes (see [`propagate`]).
    pub flush: Option<f64>,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { rtol: 1e-10, alias_fraction: 1e-6, flush: None }
    }
}

/// `w(t, ·)` at each requested time.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
    pub warnings: Vec<Warning>,
}

struct ShellRun {
    homogeneous: Vec<PropagatorSample>,
    /// `duhamel[i][j] = E₂(times[i], taus[j])` for `taus[j] ≤ times[i]`.
    duhamel: Vec<Vec<f64>>,
}

/// Trapezoid weights on the nodes `taus[..m]` followed by `t` itself.
fn duhamel_weights(taus: &[f64], t: f64) -> Vec<f64> {
    let m = taus.iter().take_while(|&&s| s <= t).count();
    let mut nodes: Vec<f64> = taus[..m].to_vec();
    if nodes.last() != Some(&t) {
        nodes.push(t);
    }
    let mut w = vec![0.0; nodes.len()];
    for k in 0..nodes.len().saturating_sub(1) {
        let h = nodes[k + 1] - nodes[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w.truncate(m);
    w
}

/// Solve `w_tt − Δw + b(t)w_t = f` with `w(0) = w0`, `w_t(0) = w1` mode by
/// mode: `ŵ(t) = Φ₁ŵ₀ + Φ₂ŵ₁ + ∫₀ᵗ E₂(t, τ) f̂(τ) dτ`, the source integral by
/// the trapezoid rule on the stored forcing samples.
#[allow(clippy::too_many_arguments)]
pub fn solve_linear_ivp<M: ModeMap>(
    w0: &ScalarField,
    w1: &ScalarField,
    forcing: Option<&ForcingHistory>,
    grid: &Grid,
    d: &DampingLaw,
    times: &[f64],
    opts: &LinearOptions,
    exec: &M,
) -> Result<LinearSolution> {
    grid.check_scalar(w0, "w0")?;
    grid.check_scalar(w1, "w1")?;
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "output times must be nonnegative and ascending"));
    }
    let s0 = grid.forward(w0);
    let s1 = grid.forward(w1);
    let mut warnings = aliasing_warnings(grid, &[("w0", &s0), ("w1", &s1)], opts.alias_fraction);

    let (taus, forcing_spectra): (Vec<f64>, Vec<Vec<Complex64>>) = match forcing {
        Some(h) => {
            for f in h.fields() {
                grid.check_scalar(f, "forcing")?;
            }
            let spectra: Vec<Vec<Complex64>> = h.fields().iter().map(|f| grid.forward(f)).collect();
            for s in &spectra {
                warnings.extend(aliasing_warnings(grid, &[("forcing", s)], opts.alias_fraction));
            }
            (h.taus().to_vec(), spectra)
        }
        None => (Vec::new(), Vec::new()),
    };
    let active: Vec<bool> = forcing_spectra.iter().map(|s| s.iter().any(|z| z.norm_sqr() > 0.0)).collect();
    let last_time = times.last().copied().unwrap_or(0.0);

    let shells = Shells::of(grid, None);
    let runs: Vec<Result<ShellRun>> = exec.map(shells.len(), |si| {
        let r = shells.radii[si];
        let tol = mode_tolerance(r, opts.rtol);
        let homogeneous = propagate(r, 0.0, times, d, &tol, opts.flush)?;
        let mut duhamel = vec![vec![0.0; taus.len()]; times.len()];
        for (j, &tau) in taus.iter().enumerate() {
            if !active[j] || tau > last_time {
                continue;
            }
            let first = times.iter().position(|&t| t >= tau).unwrap_or(times.len());
            let samples = propagate(r, tau, &times[first..], d, &tol, opts.flush)?;
            for (i, s) in samples.iter().enumerate() {
                duhamel[first + i][j] = s.phi2;
            }
        }
        Ok(ShellRun { homogeneous, duhamel })
    });
    let runs: Vec<ShellRun> = runs.into_iter().collect::<Result<_>>()?;

    let mut fields = Vec::with_capacity(times.len());
    for (ti, &t) in times.iter().enumerate() {
        let weights = duhamel_weights(&taus, t);
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (run, members) in runs.iter().zip(&shells.members) {
            let p = &run.homogeneous[ti];
            for &idx in members {
                let mut z = s0[idx] * p.phi1 + s1[idx] * p.phi2;
                for (j, &wj) in weights.iter().enumerate() {
                    if active[j] {
                        z += forcing_spectra[j][idx] * (wj * run.duhamel[ti][j]);
                    }
                }
                spec[idx] = z;
            }
        }
        let f = grid.inverse_real(spec);
        if !f.is_finite() {
            return Err(Error::NonFinite { what: "linear solution", t });
        }
        fields.push(f);
    }
    Ok(LinearSolution { times: times.to_vec(), fields, warnings })
}

/// Norm used by the kernel decay check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    L2,
    Linf,
}

impl NormKind {
    pub fn label(&self) -> &'static str {
        match self {
            NormKind::L2 => "L2",
            NormKind::Linf => "Linf",
        }
    }
}

/// The envelope exponent for `‖∂^k (K_i(t) ∗ g)‖_p`, as a positive number:
/// `(1−λ)(n+k)/2` for the sup norm, `(1−λ)(n/4 + k/2)` for L².
pub fn kernel_envelope_exponent(n: usize, k: u32, p: NormKind, d: &DampingLaw) -> f64 {
    let n = n as f64;
    let k = k as f64;
    let one_minus = 1.0 - d.lambda();
    match p {
        NormKind::Linf => one_minus * (n + k) / 2.0,
        NormKind::L2 => one_minus * (n / 4.0 + k / 2.0),
    }
}

/// One observation time of a kernel decay check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDecayRow {
    pub t: f64,
    /// Norm of the low-frequency part (`|ξ| ≤ cutoff`).
    pub observed: f64,
    /// `(1+t)^{-exponent} ‖g‖₁`.
    pub envelope: f64,
    /// Estimated norm of the high-frequency remainder, kept out of fits.
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDecay {
    pub kernel: Kernel,
    pub k: u32,
    pub norm: NormKind,
    /// Predicted log-log slope, `−exponent`.
    pub predicted_slope: f64,
    pub cutoff: f64,
    pub rows: Vec<KernelDecayRow>,
    pub warnings: Vec<Warning>,
}

/// Settings for [`kernel_decay_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDecayOptions {
    pub rtol: f64,
    /// Modes above this magnitude form the reported tail; `None` uses the
    /// outer edge of the intermediate zone, `max(1, μ/4)`.
    pub cutoff: Option<f64>,
    pub flush: f64,
    pub alias_fraction: f64,
}

impl Default for KernelDecayOptions {
    fn default() -> Self {
        KernelDecayOptions { rtol: 1e-10, cutoff: None, flush: 1e-15, alias_fraction: 1e-6 }
    }
}

/// `‖∂^k (K_i(t) ∗ g)‖_p` at each time for every requested `(k, p)`, computed
/// by spectral multiplication with `Φ_i(t, |ξ|)`. Sup norms of derivatives
/// take the maximum over multi-indices of order `k`.
#[allow(clippy::too_many_arguments)]
pub fn kernel_decay_series<M: ModeMap>(
    g: &ScalarField,
    times: &[f64],
    kernel: Kernel,
    orders: &[(u32, NormKind)],
    grid: &Grid,
    d: &DampingLaw,
    opts: &KernelDecayOptions,
    exec: &M,
) -> Result<Vec<KernelDecay>> {
    grid.check_scalar(g, "g")?;
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "observation times must be nonnegative and ascending"));
    }
    let band = grid.resolved_band(false);
    for &(k, _) in orders {
        if k as usize > band {
            return Err(Error::param("k", format!("derivative order {k} outside the resolved band")));
        }
    }
    let spec_g = grid.forward(g);
    let warnings = aliasing_warnings(grid, &[("g", &spec_g)], opts.alias_fraction);
    let g_l1 = grid.l1_norm(g);
    let cutoff = opts.cutoff.unwrap_or_else(|| (1.0f64).max(d.mu() / 4.0));

    let shells = Shells::of(grid, Some(cutoff));
    let samples: Vec<Result<Vec<PropagatorSample>>> = exec.map(shells.len(), |si| {
        let r = shells.radii[si];
        propagate(r, 0.0, times, d, &mode_tolerance(r, opts.rtol), Some(opts.flush))
    });
    let samples: Vec<Vec<PropagatorSample>> = samples.into_iter().collect::<Result<_>>()?;

    // representative high-frequency modes, doubling from the cutoff
    let k_max = grid.fundamental_wavenumber() * band as f64 * math::sqrt(grid.dim() as f64);
    let mut probes = Vec::new();
    let mut r = 2.0 * cutoff;
    while r <= k_max {
        probes.push(r);
        r *= 2.0;
    }
    let probe_samples: Vec<Result<Vec<PropagatorSample>>> = exec.map(probes.len(), |pi| {
        let r = probes[pi];
        propagate(r, 0.0, times, d, &mode_tolerance(r, opts.rtol), Some(opts.flush))
    });
    let probe_samples: Vec<Vec<PropagatorSample>> = probe_samples.into_iter().collect::<Result<_>>()?;

    let in_low: Vec<bool> = {
        let mut v = vec![false; grid.len()];
        for m in &shells.members {
            for &idx in m {
                v[idx] = true;
            }
        }
        v
    };
    let n_total = grid.len() as f64;
    let tail_sums: Vec<(f64, f64)> = orders
        .iter()
        .map(|&(k, _)| {
            let (mut s1, mut s2) = (0.0, 0.0);
            for (idx, z) in spec_g.iter().enumerate() {
                if in_low[idx] {
                    continue;
                }
                let kv = grid.wavevector(idx);
                let r = math::sqrt(kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]);
                let w = math::powi(r, k as i32);
                s1 += w * z.norm();
                s2 += w * w * z.norm_sqr();
            }
            (s1 / n_total, math::sqrt(grid.cell_volume() * s2 / n_total))
        })
        .collect();

    let mut out: Vec<KernelDecay> = orders
        .iter()
        .map(|&(k, p)| KernelDecay {
            kernel,
            k,
            norm: p,
            predicted_slope: -kernel_envelope_exponent(grid.dim(), k, p, d),
            cutoff,
            rows: Vec::with_capacity(times.len()),
            warnings: warnings.clone(),
        })
        .collect();

    for (ti, &t) in times.iter().enumerate() {
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (s, members) in samples.iter().zip(&shells.members) {
            let phi = s[ti].value(kernel);
            for &idx in members {
                spec[idx] = spec_g[idx] * phi;
            }
        }
        let phi_tail = probe_samples.iter().map(|s| s[ti].value(kernel).abs()).fold(0.0, f64::max);
        for (oi, (o, &(k, p))) in out.iter_mut().zip(orders).enumerate() {
            let observed = match p {
                NormKind::L2 => grid.spectrum_derivative_l2(&spec, k),
                NormKind::Linf => grid
                    .multi_indices(k)
                    .into_iter()
                    .map(|alpha| grid.derivative_of_spectrum(&spec, alpha).max_abs())
                    .fold(0.0, f64::max),
            };
            let (t1, t2) = tail_sums[oi];
            let tail = phi_tail * if p == NormKind::Linf { t1 } else { t2 };
            let envelope = math::powf(1.0 + t, o.predicted_slope) * g_l1;
            if !observed.is_finite() {
                return Err(Error::NonFinite { what: "kernel convolution", t });
            }
            o.rows.push(KernelDecayRow { t, observed, envelope, tail });
        }
    }
    Ok(out)
}

/// Single-order convenience wrapper around [`kernel_decay_series`].
#[allow(clippy::too_many_arguments)]
pub fn kernel_decay_check<M: ModeMap>(
    g: &ScalarField,
    times: &[f64],
    kernel: Kernel,
    k: u32,
    p: NormKind,
    grid: &Grid,
    d: &DampingLaw,
    opts: &KernelDecayOptions,
    exec: &M,
) -> Result<KernelDecay> {
    let mut v = kernel_decay_series(g, times, kernel, &[(k, p)], grid, d, opts, exec)?;
    Ok(v.remove(0))
}

/// Zone envelope with constant `c0`:
/// Z1 `c0·e^{−c0 r²(1+t)^{1−λ}}`;
/// Z2 `c0·e^{−c0(1+t)^{1−λ}}·e^{c0(1−r²)(1+t_ξ)^{1−λ}}`;
/// Z3 `c0·e^{−c0(1+t)^{1−λ}}`.
pub fn zone_envelope(t: f64, r: f64, zone: Zone, c0: f64, d: &DampingLaw) -> Result<f64> {
    let p = 1.0 - d.lambda();
    let s = math::powf(1.0 + t, p);
    Ok(match zone {
        Zone::Z1 => c0 * math::exp(-c0 * r * r * s),
        Zone::Z3 => c0 * math::exp(-c0 * s),
        Zone::Z2 => {
            let txi = params::t_xi(r, d)?;
            c0 * math::exp(-c0 * s + c0 * (1.0 - r * r) * math::powf(1.0 + txi, p))
        }
    })
}

/// Observed `|Φ_i|` against its zone envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneBoundReport {
    pub zone: Zone,
    pub t: f64,
    pub xi: f64,
    pub observed: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// Compare `|Φ_i(t, ξ)|` with the envelope of the zone `(t, |ξ|)` lies in.
pub fn zone_bound_check(phi: &PropagatorSample, kernel: Kernel, c0: f64, d: &DampingLaw) -> Result<ZoneBoundReport> {
    if !(c0 > 0.0) {
        return Err(Error::param("c0", format!("envelope constant {c0} must be positive")));
    }
    let zone = params::zone_classify(phi.t, phi.xi, d);
    let envelope = zone_envelope(phi.t, phi.xi, zone, c0, d)?;
    let observed = phi.value(kernel).abs();
    let ratio = if envelope > 0.0 {
        observed / envelope
    } else if observed == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ZoneBoundReport { zone, t: phi.t, xi: phi.xi, observed, envelope, ratio })
}

/// Largest envelope ratio over a `(t, |ξ|)` sample restricted to one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSweep {
    pub zone: Zone,
    pub c0: f64,
    pub max_ratio: f64,
    /// Smallest `K` with `|Φ_i| ≤ K·envelope/c0` on the sample.
    pub fitted_constant: f64,
    pub samples: usize,
    pub worst: Option<ZoneBoundReport>,
}

#[allow(clippy::too_many_arguments)]
pub fn zone_bound_sweep<M: ModeMap>(
    zone: Zone,
    times: &[f64],
    radii: &[f64],
    kernel: Kernel,
    c0: f64,
    d: &DampingLaw,
    rtol: f64,
    exec: &M,
) -> Result<ZoneSweep> {
    let per_radius: Vec<Result<Vec<ZoneBoundReport>>> = exec.map(radii.len(), |i| {
        let r = radii[i];
        let samples = propagate(r, 0.0, times, d, &mode_tolerance(r, rtol), None)?;
        samples
            .iter()
            .filter(|s| params::zone_classify(s.t, s.xi, d) == zone)
            .map(|s| zone_bound_check(s, kernel, c0, d))
            .collect()
    });
    let mut sweep = ZoneSweep { zone, c0, max_ratio: 0.0, fitted_constant: 0.0, samples: 0, worst: None };
    for reports in per_radius {
        for rep in reports? {
            sweep.samples += 1;
            if rep.ratio > sweep.max_ratio || sweep.worst.is_none() {
                sweep.max_ratio = sweep.max_ratio.max(rep.ratio);
                sweep.worst = Some(rep);
            }
        }
    }
    sweep.fitted_constant = sweep.max_ratio * c0;
    Ok(sweep)
}

/// Settings for [`zone_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneIntegralOptions {
    /// Agreement required between successive Simpson refinements.
    pub rtol: f64,
    pub ode_rtol: f64,
    pub min_level: u32,
    pub max_level: u32,
}

impl Default for ZoneIntegralOptions {
    fn default() -> Self {
        ZoneIntegralOptions { rtol: 1e-4, ode_rtol: 1e-10, min_level: 3, max_level: 16 }
    }
}

/// Radial extent `[lo, hi]` of a zone at time `t`; `None` when empty.
pub fn zone_range(t: f64, zone: Zone, d: &DampingLaw) -> Result<Option<(f64, f64)>> {
    let r1 = params::low_zone_radius(t, d);
    match zone {
        Zone::Z1 => Ok((r1 > 0.0).then_some((0.0, r1))),
        Zone::Z2 => Ok((r1 < 1.0).then_some((r1, 1.0))),
        Zone::Z3 => Err(Error::param("zone", "zone integrals cover Z1 and Z2 only")),
    }
}

/// `‖|ξ|^{order} Φ_i(t, ξ)‖_{L^p(zone)}` in `n` dimensions, as a radial
/// integral with the sphere area `|S^{n−1}|` factored out analytically.
#[allow(clippy::too_many_arguments)]
pub fn zone_integral(
    t: f64,
    order: u32,
    zone: Zone,
    p: u32,
    kernel: Kernel,
    d: &DampingLaw,
    n: usize,
    opts: &ZoneIntegralOptions,
) -> Result<f64> {
    if !(p == 1 || p == 2) {
        return Err(Error::param("p", format!("norm index {p} not in {{1, 2}}")));
    }
    if !(1..=3).contains(&n) {
        return Err(Error::param("n", format!("dimension {n} not in 1..=3")));
    }
    let Some((lo, hi)) = zone_range(t, zone, d)? else {
        return Ok(0.0);
    };
    let integrand = |r: f64| -> Result<f64> {
        let phi = fundamental_pair(t, r, d, &mode_tolerance(r, opts.ode_rtol))?.value(kernel);
        let base = math::powi(r, order as i32) * phi.abs();
        Ok(math::powi(r, n as i32 - 1) * math::powi(base, p as i32))
    };
    let refined = quad::simpson_doubling(integrand, lo, hi, opts.rtol, 0.0, opts.min_level, opts.max_level)?;
    let value = math::unit_sphere_area(n) * refined.value;
    Ok(if p == 2 { math::sqrt(value) } else { value })
}

/// Predicted decay exponent of the zone integral: `(1−λ)(n/2 + |α|/2)` for `p = 1`,
/// `(1−λ)(n/4 + |α|/2)` for `p = 2`.
pub fn zone_integral_exponent(n: usize, order: u32, p: u32, d: &DampingLaw) -> f64 {
    let one_minus = 1.0 - d.lambda();
    let n = n as f64;
    let a = order as f64;
    if p == 1 {
        one_minus * (n / 2.0 + a / 2.0)
    } else {
        one_minus * (n / 4.0 + a / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn law(lambda: f64, mu: f64) -> DampingLaw {
        DampingLaw::new(lambda, mu).unwrap()
    }

    #[test]
    fn mode_rhs_examples() {
        let d = law(0.5, 1.0);
        let s = ModeState { t: 0.0, xi: Freq::scalar(2.0), w_hat: 1.0.into(), w_hat_t: 0.0.into() };
        assert_eq!(mode_rhs(&s, 0.0.into(), &d), (0.0.into(), (-4.0).into()));
        let s = ModeState { t: 0.0, xi: Freq::scalar(0.0), w_hat: 0.0.into(), w_hat_t: 0.0.into() };
        assert_eq!(mode_rhs(&s, 0.0.into(), &d), (0.0.into(), 0.0.into()));
        let s = ModeState { t: 0.0, xi: Freq::scalar(0.0), w_hat: 0.0.into(), w_hat_t: 1.0.into() };
        assert_eq!(mode_rhs(&s, 0.0.into(), &law(0.5, 3.0)), (1.0.into(), (-3.0).into()));
    }

    #[test]
    fn identity_at_equal_times_and_rejects_reversed() {
        let d = law(0.5, 1.0);
        let tol = mode_tolerance(0.7, 1e-10);
        let p = two_time_propagator(3.0, 3.0, 0.7, &d, &tol).unwrap();
        assert_eq!(p.matrix(), [[1.0, 0.0], [0.0, 1.0]]);
        assert!(two_time_propagator(1.0, 2.0, 0.7, &d, &tol).is_err());
    }

    #[test]
    fn free_wave_and_critical_damping() {
        let r = 1.3;
        let p = fundamental_pair(20.0, r, &law(0.5, 0.0), &mode_tolerance(r, 1e-11)).unwrap();
        assert!((p.phi2 - (r * 20.0).sin() / r).abs() < 1e-8);
        let p = fundamental_pair(1.0, 1.0, &law(0.0, 2.0), &mode_tolerance(1.0, 1e-11)).unwrap();
        assert!((p.phi2 - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn flush_zeroes_decayed_modes_only_after_bound() {
        let d = law(0.2, 4.0);
        let times = [10.0, 100.0, 1000.0];
        let s = propagate(0.9, 0.0, &times, &d, &mode_tolerance(0.9, 1e-10), Some(1e-12)).unwrap();
        assert!(s[2].flushed);
        assert_eq!(s[2].phi1, 0.0);
        let full = propagate(0.9, 0.0, &times, &d, &mode_tolerance(0.9, 1e-10), None).unwrap();
        for (a, b) in s.iter().zip(&full) {
            assert!((a.phi1 - b.phi1).abs() < 1e-12 && (a.phi2 - b.phi2).abs() < 1e-12);
        }
    }

    #[test]
    fn zone_envelope_at_zero_frequency() {
        let d = law(0.5, 2.0);
        let p = fundamental_pair(50.0, 0.0, &d, &mode_tolerance(0.0, 1e-10)).unwrap();
        let rep = zone_bound_check(&p, Kernel::Phi1, 2.0, &d).unwrap();
        assert_eq!(rep.zone, Zone::Z1);
        assert!((rep.ratio - 0.5).abs() < 1e-12);
        // Z2 envelope needs t_ξ, which does not exist above μ/4
        let q = fundamental_pair(0.0, 0.8, &d, &mode_tolerance(0.8, 1e-10)).unwrap();
        assert!(zone_bound_check(&q, Kernel::Phi1, 1.0, &d).is_err());
    }

    #[test]
    fn zone_integral_at_time_zero() {
        let d = law(0.5, 4.0);
        let v = zone_integral(0.0, 0, Zone::Z1, 1, Kernel::Phi1, &d, 1, &ZoneIntegralOptions::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let e = zone_integral(0.0, 0, Zone::Z3, 1, Kernel::Phi1, &d, 1, &ZoneIntegralOptions::default());
        assert!(e.is_err());
    }

    #[test]
    fn duhamel_weights_cover_partial_segment() {
        let w = duhamel_weights(&[0.0, 1.0, 2.0], 2.5);
        assert_eq!(w, vec![0.5, 1.0, 0.75]);
        let w = duhamel_weights(&[0.0, 1.0, 2.0], 2.0);
        assert_eq!(w, vec![0.5, 1.0, 0.5]);
    }

    #[test]
    fn zero_data_gives_zero_solution_and_zero_kernel_norms() {
        let grid = Grid::new(1, 20.0, 64).unwrap();
        let d = law(0.5, 1.0);
        let z = grid.zeros();
        let sol =
            solve_linear_ivp(&z, &z, None, &grid, &d, &[1.0, 2.0], &LinearOptions::default(), &Sequential).unwrap();
        assert!(sol.fields.iter().all(|f| f.max_abs() == 0.0));
        let kd = kernel_decay_check(
            &z,
            &[1.0, 5.0],
            Kernel::Phi1,
            0,
            NormKind::Linf,
            &grid,
            &d,
            &KernelDecayOptions::default(),
            &Sequential,
        )
        .unwrap();
        assert!(kd.rows.iter().all(|r| r.observed == 0.0 && r.envelope == 0.0));
    }
}
