//! Quantitative instruments: weighted energies, norms, mass and moment,
//! decay fits, the convolution-integral oracle and lower-bound margins.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::euler::{self, EulerState, PhysicalState, Tendency};
use crate::grid::{Grid, ScalarField};
use crate::math;
use crate::params::{self, DampingLaw, GasLaw, WeightSpec};
use crate::quad::{self, QuadTolerance};
use crate::{Error, Result};

/// Largest admissible `2ψ` on the active support before `e^{2ψ}` is deemed
/// unsafe.
pub const MAX_WEIGHT_EXPONENT: f64 = 700.0;

/// `J(t; g) = ∫ e^{2ψ} g²` and `J_ψ(t; g) = ∫ e^{2ψ}(−ψ_t) g²` over the ball
/// `|x| ≤ support`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPair {
    pub j: f64,
    pub j_psi: f64,
}

/// Grid quadrature of the weighted integrals of `g` at time `t`, restricted
/// to the active support `|x| ≤ support`.
pub fn weighted_pair(
    t: f64,
    g: &ScalarField,
    grid: &Grid,
    spec: &WeightSpec,
    d: &DampingLaw,
    support: f64,
) -> Result<WeightedPair> {
    grid.check_scalar(g, "g")?;
    let rate = (1.0 + d.lambda()) / (1.0 + t);
    let mut max_exponent: f64 = 0.0;
    let (mut j, mut j_psi) = (0.0, 0.0);
    for (idx, &val) in g.as_slice().iter().enumerate() {
        let r = grid.radius(idx);
        if r > support {
            continue;
        }
        let psi = 0.5 * params::weight_exponent(t, r * r, spec, d);
        max_exponent = max_exponent.max(2.0 * psi);
        let w = math::exp(2.0 * psi) * val * val;
        j += w;
        j_psi += w * rate * psi;
    }
    if max_exponent > MAX_WEIGHT_EXPONENT {
        return Err(Error::DomainSizing { t, max_exponent });
    }
    let dv = grid.cell_volume();
    Ok(WeightedPair { j: j * dv, j_psi: j_psi * dv })
}

/// Weighted energies of a state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnergy {
    pub v: WeightedPair,
    /// Sum over velocity components.
    pub u: WeightedPair,
    /// `J` of `v_t`, `∂v`, `∂u` and their derivatives below `order`, summed.
    pub j_first: f64,
    /// Instantaneous `E^ψ_order(t)`, i.e. the square root of
    /// `(1+t)^{B+1+λ}[J(∂^{<order} v_t) + J(∂^{<order}∂v) + J(∂^{<order}∂u)]
    ///   + (1+t)^B [J(v) + J(u)]`.
    pub e_psi: f64,
}

/// `J`, `J_ψ` and `E^ψ` of `(v, u)` with time derivative `s_t`, over the
/// support ball of radius `support`. `order ≥ 1`.
pub fn weighted_energy(
    s: &EulerState,
    s_t: &Tendency,
    grid: &Grid,
    spec: &WeightSpec,
    d: &DampingLaw,
    support: f64,
    order: u32,
) -> Result<WeightedEnergy> {
    if order == 0 {
        return Err(Error::param("order", "weighted energy order must be at least 1"));
    }
    let t = s.t;
    let v = weighted_pair(t, &s.v, grid, spec, d, support)?;
    let mut u = WeightedPair { j: 0.0, j_psi: 0.0 };
    for c in s.u.components() {
        let p = weighted_pair(t, c, grid, spec, d, support)?;
        u.j += p.j;
        u.j_psi += p.j_psi;
    }
    let mut j_first = 0.0;
    let mut add = |f: &ScalarField, k: u32| -> Result<()> {
        let spec_f = grid.forward(f);
        for alpha in grid.multi_indices(k) {
            let df = grid.derivative_of_spectrum(&spec_f, alpha);
            j_first += weighted_pair(t, &df, grid, spec, d, support)?.j;
        }
        Ok(())
    };
    for k in 0..order {
        add(&s_t.dv, k)?;
        add(&s.v, k + 1)?;
        for c in s.u.components() {
            add(c, k + 1)?;
        }
    }
    let hi = math::powf(1.0 + t, spec.b + 1.0 + d.lambda());
    let lo = math::powf(1.0 + t, spec.b);
    let e_psi = math::sqrt(hi * j_first + lo * (v.j + u.j));
    Ok(WeightedEnergy { v, u, j_first, e_psi })
}

/// `M = ∫(ρ − 1) dx`.
pub fn mass_m(p: &PhysicalState, grid: &Grid) -> Result<f64> {
    grid.check_scalar(&p.rho, "rho")?;
    Ok(grid.cell_volume() * p.rho.as_slice().iter().map(|r| r - 1.0).sum::<f64>())
}

/// `F = ∫ x·(ρu) dx`.
pub fn moment_f(p: &PhysicalState, grid: &Grid) -> Result<f64> {
    grid.check_scalar(&p.rho, "rho")?;
    grid.check_vector(&p.u, "u")?;
    let mut acc = 0.0;
    for (idx, &r) in p.rho.as_slice().iter().enumerate() {
        let x = grid.position(idx);
        let dot: f64 = p.u.components().iter().enumerate().map(|(a, c)| x[a] * c.as_slice()[idx]).sum();
        acc += r * dot;
    }
    Ok(acc * grid.cell_volume())
}

/// What an [`EnergyRow`] records beyond the always-present norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSettings {
    /// Highest derivative order `k` for the per-order norm columns.
    pub order: u32,
    /// Weight and support radius `R` (active support `R + t + margin`).
    pub weight: Option<(WeightSpec, f64)>,
    pub support_margin: f64,
    /// Derivative order of `E^ψ`.
    pub e_psi_order: u32,
    pub with_q: bool,
}

impl Default for RowSettings {
    fn default() -> Self {
        RowSettings { order: 2, weight: None, support_margin: 2.0, e_psi_order: 2, with_q: false }
    }
}

/// One time sample of the monitored quantities. Optional entries are `None`
/// when not requested or not defined (vorticity in 1-D).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub v_l2: f64,
    pub u_l2: f64,
    pub v_linf: f64,
    pub u_linf: f64,
    /// `‖ρ − 1‖₂`
    pub rho_l2: f64,
    /// `‖ρ − 1‖∞`
    pub rho_linf: f64,
    pub vt_l2: f64,
    /// Entry `k−1` holds the order-`k` seminorm, `k = 1..=order`.
    pub dv_l2: Vec<f64>,
    pub du_l2: Vec<f64>,
    pub dv_linf: Vec<f64>,
    pub du_linf: Vec<f64>,
    pub j_v: Option<f64>,
    pub j_u: Option<f64>,
    pub jpsi_v: Option<f64>,
    pub jpsi_u: Option<f64>,
    pub e_psi: Option<f64>,
    pub mass: f64,
    pub moment: f64,
    pub omega_l2: Option<f64>,
    pub omega_linf: Option<f64>,
    pub q_l1: Option<f64>,
    /// Entry `k−1` holds `‖∂^k Q‖₂`, `k = 1..=order`, when `Q` is recorded.
    pub dq_l2: Vec<f64>,
}

impl EnergyRow {
    /// Column names in serialization order for derivative order `order`.
    pub fn columns(order: u32) -> Vec<String> {
        let mut c: Vec<String> = ["t", "v_l2", "u_l2", "v_linf", "u_linf", "rho_l2", "rho_linf", "vt_l2"]
            .iter()
            .map(|s| String::from(*s))
            .collect();
        for name in ["dv_l2", "du_l2", "dv_linf", "du_linf"] {
            for k in 1..=order {
                c.push(format!("{name}_{k}"));
            }
        }
        for name in ["j_v", "j_u", "jpsi_v", "jpsi_u", "e_psi", "mass", "moment", "omega_l2", "omega_linf", "q_l1"] {
            c.push(String::from(name));
        }
        for k in 1..=order {
            c.push(format!("dq_l2_{k}"));
        }
        c
    }

    /// Values aligned with [`EnergyRow::columns`] for `order = dv_l2.len()`.
    pub fn values(&self) -> Vec<Option<f64>> {
        let order = self.dv_l2.len();
        let mut v: Vec<Option<f64>> =
            [self.t, self.v_l2, self.u_l2, self.v_linf, self.u_linf, self.rho_l2, self.rho_linf, self.vt_l2]
                .iter()
                .map(|x| Some(*x))
                .collect();
        for arr in [&self.dv_l2, &self.du_l2, &self.dv_linf, &self.du_linf] {
            v.extend(arr.iter().map(|x| Some(*x)));
        }
        v.extend([
            self.j_v,
            self.j_u,
            self.jpsi_v,
            self.jpsi_u,
            self.e_psi,
            Some(self.mass),
            Some(self.moment),
            self.omega_l2,
            self.omega_linf,
            self.q_l1,
        ]);
        for k in 0..order {
            v.push(self.dq_l2.get(k).copied());
        }
        v
    }

    /// `(1+t)^B (‖v‖² + ‖u‖²)`.
    pub fn low_energy(&self, b: f64) -> f64 {
        math::powf(1.0 + self.t, b) * (self.v_l2 * self.v_l2 + self.u_l2 * self.u_l2)
    }

    /// `(1+t)^{B+1+λ} (‖v_t‖² + ‖∂v‖² + ‖∂u‖²)`.
    pub fn high_energy(&self, b: f64, lambda: f64) -> f64 {
        let dv = self.dv_l2.first().copied().unwrap_or(0.0);
        let du = self.du_l2.first().copied().unwrap_or(0.0);
        math::powf(1.0 + self.t, b + 1.0 + lambda) * (self.vt_l2 * self.vt_l2 + dv * dv + du * du)
    }
}

/// Evaluate every monitored quantity of `s`. `radius` is the initial support
/// radius used for the active-support ball `radius + t + margin`.
pub fn energy_row(
    s: &EulerState,
    grid: &Grid,
    d: &DampingLaw,
    g: &GasLaw,
    dealias: bool,
    settings: &RowSettings,
) -> Result<EnergyRow> {
    let tend = euler::rhs(s, d, g, grid, dealias)?;
    let phys = euler::from_symmetric(s, g)?;
    let excess = phys.rho.map(|r| r - 1.0);
    let spec_v = grid.forward(&s.v);
    let spec_u: Vec<_> = s.u.components().iter().map(|c| grid.forward(c)).collect();
    let order = settings.order;
    let mut row = EnergyRow {
        t: s.t,
        v_l2: grid.l2_norm(&s.v),
        u_l2: grid.l2_norm_vec(&s.u),
        v_linf: s.v.max_abs(),
        u_linf: s.u.max_abs(),
        rho_l2: grid.l2_norm(&excess),
        rho_linf: excess.max_abs(),
        vt_l2: grid.l2_norm(&tend.dv),
        dv_l2: Vec::new(),
        du_l2: Vec::new(),
        dv_linf: Vec::new(),
        du_linf: Vec::new(),
        j_v: None,
        j_u: None,
        jpsi_v: None,
        jpsi_u: None,
        e_psi: None,
        mass: mass_m(&phys, grid)?,
        moment: moment_f(&phys, grid)?,
        omega_l2: None,
        omega_linf: None,
        q_l1: None,
        dq_l2: Vec::new(),
    };
    let linf_of = |spec: &[crate::Complex64], k: u32| {
        grid.multi_indices(k).into_iter().map(|a| grid.derivative_of_spectrum(spec, a).max_abs()).fold(0.0, f64::max)
    };
    for k in 1..=order {
        row.dv_l2.push(grid.spectrum_derivative_l2(&spec_v, k));
        let du2: f64 = spec_u
            .iter()
            .map(|sp| {
                let n = grid.spectrum_derivative_l2(sp, k);
                n * n
            })
            .sum();
        row.du_l2.push(math::sqrt(du2));
        row.dv_linf.push(linf_of(&spec_v, k));
        row.du_linf.push(spec_u.iter().map(|sp| linf_of(sp, k)).fold(0.0, f64::max));
    }
    if let Some((spec, radius)) = settings.weight {
        let support = radius + s.t + settings.support_margin;
        let we = weighted_energy(s, &tend, grid, &spec, d, support, settings.e_psi_order)?;
        row.j_v = Some(we.v.j);
        row.j_u = Some(we.u.j);
        row.jpsi_v = Some(we.v.j_psi);
        row.jpsi_u = Some(we.u.j_psi);
        row.e_psi = Some(we.e_psi);
    }
    if grid.dim() >= 2 {
        let w = euler::vorticity(s, grid)?;
        row.omega_l2 = Some(w.l2_norm(grid));
        row.omega_linf = Some(w.linf_norm());
    }
    if settings.with_q {
        let q = euler::source_q(s, &tend, d, g, grid)?;
        row.q_l1 = Some(grid.l1_norm(&q));
        let spec_q = grid.forward(&q);
        row.dq_l2 = (1..=order).map(|k| grid.spectrum_derivative_l2(&spec_q, k)).collect();
    }
    Ok(row)
}

/// Abscissa of a decay fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Abscissa {
    /// `log(1+t)`: the slope is a power-law exponent.
    LogOnePlusT,
    /// `(1+t)^{p}`: the slope is a stretched-exponential rate.
    Stretched { power: f64 },
}

impl Abscissa {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Abscissa::LogOnePlusT => math::ln(1.0 + t),
            Abscissa::Stretched { power } => math::powf(1.0 + t, *power),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Abscissa::LogOnePlusT => "log(1+t)",
            Abscissa::Stretched { .. } => "(1+t)^p",
        }
    }
}

/// Least-squares line through `(abscissa(t), log value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log value`.
    pub rms: f64,
    pub window: (f64, f64),
    pub abscissa: Abscissa,
    pub samples: usize,
    /// Residual above 0.1: the data are not well described by the model.
    pub poor_fit: bool,
}

pub const MIN_FIT_SAMPLES: usize = 8;
pub const POOR_FIT_RMS: f64 = 0.1;

/// Fit `log value = slope·abscissa(t) + intercept` over samples with
/// `t ∈ [window.0, window.1]`; at least [`MIN_FIT_SAMPLES`] are required.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64), abscissa: Abscissa) -> Result<FitResult> {
    decay_fit_with(series, window, abscissa, MIN_FIT_SAMPLES)
}

/// [`decay_fit`] with a caller-chosen sample floor (at least 2).
pub fn decay_fit_with(
    series: &[(f64, f64)],
    window: (f64, f64),
    abscissa: Abscissa,
    min_samples: usize,
) -> Result<FitResult> {
    let min_samples = min_samples.max(2);
    if !(window.0 < window.1) {
        return Err(Error::Fit(format!("empty window [{}, {}]", window.0, window.1)));
    }
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if pts.len() < min_samples {
        return Err(Error::Fit(format!("{} samples in window, need {min_samples}", pts.len())));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("value {v} at t = {t} is not positive")));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| abscissa.eval(*t)).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| math::ln(*v)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit(String::from("abscissa has no spread")));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept) * (y - slope * x - intercept)).sum();
    let rms = math::sqrt(ss / n);
    Ok(FitResult { slope, intercept, rms, window, abscissa, samples: pts.len(), poor_fit: rms > POOR_FIT_RMS })
}

/// Ratios `∫₀ᵗ (1+t−τ)^{−a}(1+τ)^{−b} dτ / (1+t)^{−b}` at sampled times.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionReport {
    pub a: f64,
    pub b: f64,
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
}

pub fn convolution_oracle(a: f64, b: f64, t_samples: &[f64]) -> Result<ConvolutionReport> {
    if !(a > 1.0) {
        return Err(Error::param("a", format!("{a} must exceed 1")));
    }
    if !(b > 0.0 && b <= a) {
        return Err(Error::param("b", format!("{b} outside (0, a = {a}]")));
    }
    let tol = QuadTolerance { rtol: 1e-10, atol: 0.0, ..QuadTolerance::default() };
    let mut ratios = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        if !(t >= 0.0) {
            return Err(Error::param("t", format!("sample time {t} is negative")));
        }
        let integral =
            quad::gauss_kronrod(|tau| math::powf(1.0 + t - tau, -a) * math::powf(1.0 + tau, -b), 0.0, t, &tol)?;
        ratios.push((t, integral * math::powf(1.0 + t, b)));
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(ConvolutionReport { a, b, ratios, max_ratio })
}

/// One snapshot of a positive-mass run, as needed by the lower-bound checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundSample {
    pub t: f64,
    /// `‖ρ − 1‖₂`
    pub rho_l2: f64,
    /// `‖u‖₂`
    pub u_l2: f64,
    /// `F(t)`
    pub moment: f64,
}

/// Margins `m_ρ = ‖ρ−1‖(R+t)^{n/2}/q₀` and `m_u = ‖u‖(R+t)^{(n+2)/2}/q₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Margins {
    pub m_rho: Vec<(f64, f64)>,
    pub m_u: Vec<(f64, f64)>,
    pub inf_rho: f64,
    pub inf_u: f64,
    /// Smallest `q₀ ≤ ‖ρ−1‖·|B(R+t)|^{1/2}` slack ratio over all samples;
    /// the inequality holds everywhere iff this is `≥ 1`.
    pub cauchy_schwarz_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LowerBound {
    /// The positive-mass hypothesis fails.
    Declined {
        reason: String,
    },
    Checked(Margins),
}

pub fn lower_bound_margin(series: &[LowerBoundSample], q0: f64, r: f64, n: usize, t0: f64) -> Result<LowerBound> {
    if !(q0 > 0.0) {
        return Ok(LowerBound::Declined { reason: format!("q0 = {q0} is not positive") });
    }
    if !(r > 0.0) {
        return Err(Error::param("R", format!("support radius {r} must be positive")));
    }
    let nf = n as f64;
    let mut m = Margins {
        m_rho: Vec::new(),
        m_u: Vec::new(),
        inf_rho: f64::INFINITY,
        inf_u: f64::INFINITY,
        cauchy_schwarz_min: f64::INFINITY,
    };
    for s in series {
        let cs = s.rho_l2 * math::sqrt(math::ball_volume(n, r + s.t)) / q0;
        m.cauchy_schwarz_min = m.cauchy_schwarz_min.min(cs);
        if s.t < t0 {
            continue;
        }
        let mr = s.rho_l2 * math::powf(r + s.t, nf / 2.0) / q0;
        let mu = s.u_l2 * math::powf(r + s.t, (nf + 2.0) / 2.0) / q0;
        m.m_rho.push((s.t, mr));
        m.m_u.push((s.t, mu));
        m.inf_rho = m.inf_rho.min(mr);
        m.inf_u = m.inf_u.min(mu);
    }
    if m.m_rho.is_empty() {
        return Err(Error::Fit(format!("no samples at or after t0 = {t0}")));
    }
    Ok(LowerBound::Checked(m))
}

/// `(F'(t) + b(t)F(t)) / (n q₀)` at every sample, with `F'` by centred
/// differences (one-sided at the ends).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentInequality {
    pub ratios: Vec<(f64, f64)>,
    pub min_ratio: f64,
}

pub fn moment_inequality(series: &[LowerBoundSample], q0: f64, n: usize, d: &DampingLaw) -> Result<MomentInequality> {
    if series.len() < 3 {
        return Err(Error::Fit(String::from("need at least three snapshots for F'")));
    }
    if !(q0 > 0.0) {
        return Err(Error::param("q0", format!("{q0} is not positive")));
    }
    let m = series.len();
    let mut ratios = Vec::with_capacity(m);
    for i in 0..m {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == m - 1 {
            (m - 2, m - 1)
        } else {
            (i - 1, i + 1)
        };
        let fp = (series[hi].moment - series[lo].moment) / (series[hi].t - series[lo].t);
        let s = &series[i];
        let lhs = fp + params::damping_coeff(s.t, d) * s.moment;
        ratios.push((s.t, lhs / (n as f64 * q0)));
    }
    let min_ratio = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(MomentInequality { ratios, min_ratio })
}

/// Decay of `‖Q‖₁` against the envelope `(1+t)^{−B−(1+λ)/2}`.
#[derive(Debug, Clone, PartialEq)]
pub enum QDecay {
    /// `Q` vanished identically along the run.
    Vacuous,
    Fitted {
        fit: FitResult,
        bound: f64,
        tolerance: f64,
        passed: bool,
    },
}

pub fn q_decay_check(
    series: &[(f64, f64)],
    spec: &WeightSpec,
    d: &DampingLaw,
    window: (f64, f64),
    tolerance: f64,
) -> Result<QDecay> {
    if series.iter().all(|(_, q)| *q == 0.0) {
        return Ok(QDecay::Vacuous);
    }
    let fit = decay_fit(series, window, Abscissa::LogOnePlusT)?;
    let bound = -spec.b - (1.0 + d.lambda()) / 2.0;
    let passed = fit.slope <= bound + tolerance;
    Ok(QDecay::Fitted { fit, bound, tolerance, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VectorField;
    use alloc::vec;

    fn law() -> DampingLaw {
        DampingLaw::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn synthetic_fits() {
        let ts: Vec<f64> = (0..20).map(|i| 10f64.powf(1.0 + i as f64 * 0.1)).collect();
        let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, (1.0 + t).powf(-1.5))).collect();
        let f = decay_fit(&s, (1.0, 1e4), Abscissa::LogOnePlusT).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12 && f.rms < 1e-12);
        let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 7.0 * (1.0 + t).powf(-0.25))).collect();
        assert!((decay_fit(&s, (1.0, 1e4), Abscissa::LogOnePlusT).unwrap().slope + 0.25).abs() < 1e-12);
        let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, (-2.0 * (1.0 + t).sqrt()).exp())).collect();
        let f = decay_fit(&s[..12], (1.0, 1e4), Abscissa::Stretched { power: 0.5 }).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-10);
        assert!(decay_fit(&s[..5], (1.0, 1e4), Abscissa::LogOnePlusT).is_err());
        let bad: Vec<(f64, f64)> = ts.iter().map(|&t| (t, -1.0)).collect();
        assert!(decay_fit(&bad, (1.0, 1e4), Abscissa::LogOnePlusT).is_err());
    }

    #[test]
    fn convolution_cases() {
        let r = convolution_oracle(2.0, 1.0, &[0.0]).unwrap();
        assert_eq!(r.ratios[0].1, 0.0);
        assert!(convolution_oracle(0.5, 0.5, &[1.0]).is_err());
        assert!(convolution_oracle(2.0, 3.0, &[1.0]).is_err());
        // closed form for a = 2, b = 1 at t = 1: ∫₀¹ (2−τ)^{-2}(1+τ)^{-1} dτ
        let exact = (1.0 / 3.0) * (0.5) + (1.0 / 9.0) * (4f64).ln();
        let r = convolution_oracle(2.0, 1.0, &[1.0]).unwrap();
        assert!((r.ratios[0].1 - 2.0 * exact).abs() < 1e-10);
    }

    #[test]
    fn mass_and_moment_trivial() {
        let grid = Grid::new(1, 10.0, 64).unwrap();
        let p = PhysicalState { t: 0.0, rho: grid.from_fn(|_| 1.0), u: grid.zero_vector() };
        assert_eq!(mass_m(&p, &grid).unwrap(), 0.0);
        assert_eq!(moment_f(&p, &grid).unwrap(), 0.0);
        let p = PhysicalState { t: 0.0, rho: grid.from_fn(|x| 1.0 + (-x[0] * x[0]).exp()), u: grid.zero_vector() };
        assert_eq!(moment_f(&p, &grid).unwrap(), 0.0);
    }

    #[test]
    fn weighted_pair_limits() {
        let grid = Grid::new(1, 10.0, 128).unwrap();
        let d = law();
        let mut spec = params::derive_constants(&d, 1, 0.25).unwrap();
        let z = grid.zeros();
        assert_eq!(weighted_pair(1.0, &z, &grid, &spec, &d, 5.0).unwrap(), WeightedPair { j: 0.0, j_psi: 0.0 });
        let g = grid.from_fn(|x| (-x[0] * x[0]).exp());
        spec.a = 0.0;
        let p = weighted_pair(1.0, &g, &grid, &spec, &d, 100.0).unwrap();
        let l2 = grid.l2_norm(&g);
        assert!((p.j - l2 * l2).abs() < 1e-15);
        assert_eq!(p.j_psi, 0.0);
        spec.a = 10.0;
        assert!(matches!(weighted_pair(0.0, &g, &grid, &spec, &d, 100.0), Err(Error::DomainSizing { .. })));
    }

    #[test]
    fn lower_bound_guard_and_moment_identity() {
        let s = [LowerBoundSample { t: 30.0, rho_l2: 1.0, u_l2: 1.0, moment: 0.0 }];
        assert!(matches!(lower_bound_margin(&s, 0.0, 5.0, 1, 20.0).unwrap(), LowerBound::Declined { .. }));
        // F = n q0 ∫ 1/IF: then F' + bF = n q0 exactly
        let d = law();
        let series: Vec<LowerBoundSample> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.05;
                let f = crate::quad::gauss_kronrod(
                    |s| (-params::log_integrating_factor(s, t, &d).unwrap()).exp(),
                    0.0,
                    t,
                    &QuadTolerance::default(),
                )
                .unwrap();
                LowerBoundSample { t, rho_l2: 1.0, u_l2: 1.0, moment: 0.02 * f }
            })
            .collect();
        let m = moment_inequality(&series, 0.02, 1, &d).unwrap();
        let interior = &m.ratios[1..m.ratios.len() - 1];
        assert!(interior.iter().all(|(_, r)| (r - 1.0).abs() < 1e-3));
        assert!(m.min_ratio > 0.95);
    }

    #[test]
    fn energy_row_columns_align() {
        let grid = Grid::new(1, 20.0, 64).unwrap();
        let d = law();
        let g = GasLaw::new(2.0).unwrap();
        let s = EulerState {
            t: 0.0,
            v: grid.from_fn(|x| 1e-3 * (-x[0] * x[0]).exp()),
            u: VectorField::from_components(vec![grid.zeros()]),
        };
        let spec = params::derive_constants(&d, 1, 0.25).unwrap();
        let settings = RowSettings { weight: Some((spec, 3.0)), with_q: true, ..RowSettings::default() };
        let row = energy_row(&s, &grid, &d, &g, true, &settings).unwrap();
        assert_eq!(EnergyRow::columns(2).len(), row.values().len());
        assert!(row.j_v.unwrap() >= row.v_l2 * row.v_l2 * (1.0 - 1e-9) - 1e-30);
        assert!(row.omega_l2.is_none());
    }
}
