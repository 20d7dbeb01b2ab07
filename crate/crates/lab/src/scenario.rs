//! Scenario execution: builds the numerical setup from a configuration, runs
//! the selected engine and turns its output into verdicts, fits and tables.

use tdeuler::diagnostics::{self, Abscissa, EnergyRow, FitResult, LowerBound, LowerBoundSample, RowSettings};
use tdeuler::euler::{self, Amplitude, BlowupVerdict, BumpShape, Control, EulerState, Solver};
use tdeuler::exec::ModeMap;
use tdeuler::grid::{Grid, ScalarField};
use tdeuler::linear::{self, Kernel, KernelDecayOptions, NormKind, ZoneIntegralOptions};
use tdeuler::params::{DampingLaw, Zone};

use crate::config::{ScenarioConfig, SnapshotFormat};
use crate::diagnostic::{Diagnostic, Kind};
use crate::error::{LabError, Result};
use crate::presets;
use crate::report::{FitRecord, Report, Rule, Verdict};

/// Acceptance tolerances of the individual checks.
pub mod tolerance {
    pub const KERNEL_SLOPE: f64 = 0.05;
    pub const SOLUTION_SLOPE: f64 = 0.08;
    pub const SLOPE_DIFFERENCE: f64 = 0.05;
    /// Monitored energies stay below this multiple of their maximum on `[0, 1]`.
    pub const ENERGY_FACTOR: f64 = 10.0;
    pub const Q_SLOPE: f64 = 0.15;
    /// `‖Q‖₁` ratio under doubled amplitude lies in `4 ± 0.6`.
    pub const Q_SCALING: f64 = 0.6;
    pub const MASS_DRIFT: f64 = 1e-8;
    pub const MOMENT_INEQUALITY: f64 = 0.05;
    pub const VORTICITY_RATE: f64 = 0.2;
    pub const IRROTATIONAL: f64 = 1e-10;
    pub const CONVOLUTION: f64 = 0.1;
    pub const ZONE_SPREAD: f64 = 3.0;
    pub const ZONE_GAP: f64 = 0.2;
    pub const ZONE_REFINEMENT: f64 = 0.1;
}

/// A named CSV table; `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Everything a run produces, before anything is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
    pub snapshots: Vec<EulerState>,
    pub grid: Option<Grid>,
}

/// `count` log-spaced times from `a` to `b`, both included.
pub fn log_times(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![b],
        _ => (0..count)
            .map(|i| {
                let s = i as f64 / (count - 1) as f64;
                (a.ln() + s * (b.ln() - a.ln())).exp()
            })
            .collect(),
    }
}

/// `((1+t)^{1+λ} − 1) / (μ(1+λ))`, the diffusive time scale of the
/// low-frequency modes.
pub fn heat_time(t: f64, d: &DampingLaw) -> f64 {
    ((1.0 + t).powf(1.0 + d.lambda()) - 1.0) / (d.mu() * (1.0 + d.lambda()))
}

fn flags(cfg: &ScenarioConfig, d: &DampingLaw) -> Vec<String> {
    let mut out = Vec::new();
    if d.lambda() == 0.0 {
        out.push("lambda = 0: constant-damping validation mode".to_string());
    }
    if d.mu() == 0.0 {
        out.push("mu = 0: free-wave validation mode".to_string());
    }
    if cfg.solver.hyperviscosity > 0.0 {
        out.push(format!("hyperviscosity {} active", cfg.solver.hyperviscosity));
    }
    out
}

fn fit_record(quantity: &str, fit: &FitResult, predicted: f64, tolerance: f64, passed: bool) -> FitRecord {
    FitRecord {
        quantity: quantity.to_string(),
        slope: fit.slope,
        predicted,
        tolerance,
        residual: fit.rms,
        window: [fit.window.0, fit.window.1],
        abscissa: match fit.abscissa {
            Abscissa::LogOnePlusT => "log(1+t)".to_string(),
            Abscissa::Stretched { power } => format!("(1+t)^{power}"),
        },
        samples: fit.samples,
        verdict: if fit.poor_fit {
            "poor-fit".to_string()
        } else if passed {
            "pass".to_string()
        } else {
            "fail".to_string()
        },
    }
}

fn unavailable(quantity: String, predicted: f64, tol: f64, rule: Rule, why: impl std::fmt::Display) -> Verdict {
    Verdict::check(quantity, f64::NAN, predicted, tol, rule).with_note(why.to_string())
}

/// Run one configuration.
pub fn run_scenario<M: ModeMap>(cfg: &ScenarioConfig, exec: &M) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.damping_law()?;
    let selected = cfg.selected()?;
    let mut outcome = Outcome {
        report: Report {
            scenario: cfg.scenario.clone(),
            run: cfg.run_name(),
            config: cfg.clone(),
            flags: flags(cfg, &d),
            verdicts: Vec::new(),
            fits: Vec::new(),
            files: Vec::new(),
        },
        tables: Vec::new(),
        snapshots: Vec::new(),
        grid: None,
    };
    if selected.is_empty() {
        return Ok(outcome);
    }
    match presets::kind_of(&cfg.scenario)? {
        Kind::KernelDecay => kernel_decay(cfg, &d, &selected, exec, &mut outcome)?,
        Kind::ZoneBounds => zone_bounds(cfg, &d, &selected, exec, &mut outcome)?,
        Kind::ZoneIntegrals => zone_integrals(cfg, &d, &selected, &mut outcome)?,
        Kind::Convolution => convolution(cfg, &selected, &mut outcome)?,
        Kind::Solver => solver_run(cfg, &d, &selected, &mut outcome)?,
    }
    Ok(outcome)
}

/// Half-length and point count for the kernel-decay grid: the box holds
/// eleven diffusive widths at the last fit time, with spacing at most one.
pub fn kernel_grid(cfg: &ScenarioConfig, d: &DampingLaw) -> Result<Grid> {
    let t_end = cfg.fit.window[1];
    let half = cfg.grid.half_length.unwrap_or_else(|| {
        let want = (11.0 * heat_time(t_end, d).sqrt()).max(4.0 * cfg.data.radius);
        (want.ceil().max(1.0) as usize).next_power_of_two() as f64
    });
    let points = cfg.grid.points.unwrap_or_else(|| ((2.0 * half).ceil() as usize).next_power_of_two());
    Ok(Grid::new(cfg.n, half, points)?)
}

fn bump(grid: &Grid, radius: f64) -> ScalarField {
    grid.from_fn(|x| euler::bump_profile(x.iter().map(|c| c * c).sum::<f64>().sqrt() / radius))
}

fn kernel_decay<M: ModeMap>(
    cfg: &ScenarioConfig,
    d: &DampingLaw,
    selected: &[Diagnostic],
    exec: &M,
    out: &mut Outcome,
) -> Result<()> {
    let grid = kernel_grid(cfg, d)?;
    let g = bump(&grid, cfg.data.radius);
    let [a, b] = cfg.fit.window;
    let times = log_times(a, b, cfg.linear.samples);
    let orders: Vec<(u32, NormKind)> = selected
        .iter()
        .filter_map(|s| match s {
            Diagnostic::KernelDecay { k } => Some((*k, NormKind::Linf)),
            _ => None,
        })
        .collect();
    let opts = KernelDecayOptions { rtol: cfg.linear.rtol, cutoff: cfg.linear.cutoff, ..KernelDecayOptions::default() };
    let series = linear::kernel_decay_series(&g, &times, Kernel::Phi1, &orders, &grid, d, &opts, exec)?;

    let mut header = vec!["t".to_string()];
    let mut rows: Vec<Vec<Option<f64>>> = times.iter().map(|t| vec![Some(*t)]).collect();
    for kd in &series {
        let label = Diagnostic::KernelDecay { k: kd.k }.label();
        for col in ["observed", "tail", "envelope"] {
            header.push(format!("{col}_k{}", kd.k));
        }
        for (row, r) in rows.iter_mut().zip(&kd.rows) {
            row.extend([Some(r.observed), Some(r.tail), Some(r.envelope)]);
        }
        let pts: Vec<(f64, f64)> = kd.rows.iter().map(|r| (r.t, r.observed)).collect();
        let tol = tolerance::KERNEL_SLOPE;
        match diagnostics::decay_fit(&pts, (a, b), Abscissa::LogOnePlusT) {
            Ok(fit) => {
                let v = Verdict::check(&label, fit.slope, kd.predicted_slope, tol, Rule::Within);
                out.report.fits.push(fit_record(&label, &fit, kd.predicted_slope, tol, v.passed));
                let tail_max = kd.rows.iter().map(|r| r.tail / r.observed.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
                out.report
                    .verdicts
                    .push(v.with_note(format!("cutoff {:.3}, tail/observed <= {tail_max:.1e}", kd.cutoff)));
            }
            Err(e) => out.report.verdicts.push(unavailable(label, kd.predicted_slope, tol, Rule::Within, e)),
        }
        for w in &kd.warnings {
            let text = w.to_string();
            if !out.report.flags.contains(&text) {
                out.report.flags.push(text);
            }
        }
    }
    out.tables.push(Table { name: "kernel_decay".into(), header, rows });
    Ok(())
}

fn zone_radii(zone: Zone, d: &DampingLaw, t_final: f64, count: usize) -> Vec<f64> {
    let quarter = d.mu() / 4.0;
    let (lo, hi) = match zone {
        Zone::Z1 => (0.0, quarter),
        Zone::Z2 => (quarter / (1.0 + t_final).powf(d.lambda()), quarter.min(1.0)),
        Zone::Z3 => (1.0, 4.0),
    };
    (1..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

fn zone_bounds<M: ModeMap>(
    cfg: &ScenarioConfig,
    d: &DampingLaw,
    selected: &[Diagnostic],
    exec: &M,
    out: &mut Outcome,
) -> Result<()> {
    let lin = &cfg.linear;
    let mut rows = Vec::new();
    for s in selected {
        let Diagnostic::ZoneBound(zone) = *s else { continue };
        let mut constants = Vec::new();
        for res in [lin.zone_resolution, 2 * lin.zone_resolution] {
            let mut times = vec![0.0];
            times.extend(log_times(1e-2, lin.zone_t_final, res));
            let radii = zone_radii(zone, d, lin.zone_t_final, res);
            let sweep = linear::zone_bound_sweep(zone, &times, &radii, Kernel::Phi1, lin.c0, d, lin.rtol, exec)?;
            let (wt, wx) = sweep.worst.map(|w| (w.t, w.xi)).unwrap_or((f64::NAN, f64::NAN));
            rows.push(vec![
                Some(zone as u8 as f64 + 1.0),
                Some(res as f64),
                Some(sweep.samples as f64),
                Some(sweep.max_ratio),
                Some(sweep.fitted_constant),
                Some(wt),
                Some(wx),
            ]);
            constants.push((sweep.fitted_constant, sweep.samples));
        }
        let (k0, n0) = constants[0];
        let (k1, n1) = constants[1];
        let label = s.label();
        let v = if n0 == 0 || n1 == 0 || !(k0 > 0.0) || !k1.is_finite() {
            unavailable(label, 0.0, tolerance::ZONE_REFINEMENT, Rule::AtMost, "zone not sampled")
        } else {
            let change = (k1 - k0).abs() / k0;
            Verdict::check(label, change, 0.0, tolerance::ZONE_REFINEMENT, Rule::AtMost)
                .with_note(format!("fitted constant {k0:.4} -> {k1:.4} under refinement"))
        };
        out.report.verdicts.push(v);
    }
    let header = ["zone", "resolution", "samples", "max_ratio", "fitted_constant", "worst_t", "worst_xi"];
    out.tables.push(Table { name: "zone_bounds".into(), header: header.iter().map(|s| s.to_string()).collect(), rows });
    Ok(())
}

fn zone_integrals(cfg: &ScenarioConfig, d: &DampingLaw, selected: &[Diagnostic], out: &mut Outcome) -> Result<()> {
    let times = &cfg.linear.zone_times;
    let mut alphas: Vec<u32> = selected
        .iter()
        .filter_map(|s| match s {
            Diagnostic::ZoneIntegral { alpha } => Some(*alpha),
            _ => None,
        })
        .collect();
    if selected.contains(&Diagnostic::ZoneIntegralGap) {
        alphas.extend([0, 2]);
    }
    alphas.sort_unstable();
    alphas.dedup();
    let opts = ZoneIntegralOptions { ode_rtol: cfg.linear.rtol, ..ZoneIntegralOptions::default() };
    let mut values: Vec<(u32, Vec<f64>)> = Vec::new();
    let mut rows = Vec::new();
    for &alpha in &alphas {
        let exponent = linear::zone_integral_exponent(cfg.n, alpha, 1, d);
        let mut vals = Vec::new();
        for &t in times {
            let v = linear::zone_integral(t, alpha, Zone::Z1, 1, Kernel::Phi1, d, cfg.n, &opts)?;
            rows.push(vec![Some(alpha as f64), Some(t), Some(v), Some(v * (1.0 + t).powf(exponent))]);
            vals.push(v);
        }
        values.push((alpha, vals));
    }
    for s in selected {
        match *s {
            Diagnostic::ZoneIntegral { alpha } => {
                let exponent = linear::zone_integral_exponent(cfg.n, alpha, 1, d);
                let vals = &values.iter().find(|(a, _)| *a == alpha).expect("computed above").1;
                let ratios: Vec<f64> = vals.iter().zip(times).map(|(v, t)| v * (1.0 + t).powf(exponent)).collect();
                let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
                let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
                out.report.verdicts.push(
                    Verdict::check(s.label(), hi / lo, tolerance::ZONE_SPREAD, 0.0, Rule::AtMost)
                        .with_note(format!("max/min of I(t)(1+t)^{exponent:.3}")),
                );
            }
            Diagnostic::ZoneIntegralGap => {
                let get = |a: u32| &values.iter().find(|(x, _)| *x == a).expect("computed above").1;
                let pts: Vec<(f64, f64)> =
                    times.iter().zip(get(2).iter().zip(get(0))).map(|(t, (v2, v0))| (*t, v2 / v0)).collect();
                let predicted =
                    linear::zone_integral_exponent(cfg.n, 2, 1, d) - linear::zone_integral_exponent(cfg.n, 0, 1, d);
                let window = (times[0], times[times.len() - 1]);
                let v = match diagnostics::decay_fit_with(&pts, window, Abscissa::LogOnePlusT, 2) {
                    Ok(fit) => {
                        let v = Verdict::check(s.label(), -fit.slope, predicted, tolerance::ZONE_GAP, Rule::Relative);
                        out.report.fits.push(fit_record(
                            &s.label(),
                            &fit,
                            -predicted,
                            tolerance::ZONE_GAP * predicted,
                            v.passed,
                        ));
                        v
                    }
                    Err(e) => unavailable(s.label(), predicted, tolerance::ZONE_GAP, Rule::Relative, e),
                };
                out.report.verdicts.push(v);
            }
            _ => {}
        }
    }
    let header = ["alpha", "t", "integral", "scaled"];
    out.tables.push(Table {
        name: "zone_integrals".into(),
        header: header.iter().map(|s| s.to_string()).collect(),
        rows,
    });
    Ok(())
}

fn convolution(cfg: &ScenarioConfig, selected: &[Diagnostic], out: &mut Outcome) -> Result<()> {
    let c = &cfg.convolution;
    let mut all = c.times.clone();
    all.push(c.extended);
    let mut rows = Vec::new();
    for s in selected {
        let Diagnostic::Convolution { a, b } = *s else { continue };
        let rep = diagnostics::convolution_oracle(a, b, &all)?;
        for (t, r) in &rep.ratios {
            rows.push(vec![Some(a), Some(b), Some(*t), Some(*r)]);
        }
        let base = rep.ratios[..c.times.len()].iter().map(|r| r.1).fold(0.0, f64::max);
        let change = (rep.max_ratio - base).abs() / base;
        out.report.verdicts.push(
            Verdict::check(s.label(), change, 0.0, tolerance::CONVOLUTION, Rule::AtMost)
                .with_note(format!("max ratio {base:.5} -> {:.5} with t = {}", rep.max_ratio, c.extended)),
        );
    }
    let header = ["a", "b", "t", "ratio"];
    out.tables.push(Table { name: "convolution".into(), header: header.iter().map(|s| s.to_string()).collect(), rows });
    Ok(())
}

/// Grid of a solver scenario: by default the box holds the support after
/// travelling at unit speed until `t_final`.
pub fn solver_grid(cfg: &ScenarioConfig) -> Result<Grid> {
    let half = cfg.grid.half_length.unwrap_or(cfg.data.radius + cfg.solver.t_final + cfg.grid.margin);
    let points = cfg.grid.points.unwrap_or_else(|| ((2.0 * half).ceil() as usize).next_power_of_two());
    Ok(Grid::new(cfg.n, half, points)?)
}

/// Initial state with the amplitude scaled by `scale`, optionally with the
/// irrotational variant of the velocity shape.
pub fn initial_state(cfg: &ScenarioConfig, grid: &Grid, scale: f64, irrotational: bool) -> Result<EulerState> {
    let spec = cfg.weight()?;
    let amplitude = match cfg.data.q0 {
        Some(q0) => Amplitude::Mass { q0: scale * q0 },
        None => Amplitude::Sobolev {
            eps: scale * cfg.data.eps,
            order: cfg.data.order.unwrap_or_else(|| euler::default_data_order(&spec, 1)),
        },
    };
    let mut shape = BumpShape {
        density: cfg.data.density,
        velocity: cfg.data.velocity,
        potential: cfg.data.potential,
        swirl: cfg.data.swirl,
        seed: cfg.data.lobe.then_some(cfg.seed),
    };
    if irrotational {
        shape.potential = if shape.swirl != 0.0 { shape.swirl } else { 1.0 };
        shape.swirl = 0.0;
    }
    Ok(euler::initial_bump(cfg.data.radius, amplitude, &shape, grid, &cfg.gas_law()?)?)
}

/// Observation times: dense on `[0, 1]`, log-spaced after, plus the
/// uniform moment grid when requested. Returns the sorted times and, for
/// each, whether a full energy row is recorded there.
pub fn observation_times(cfg: &ScenarioConfig, with_moments: bool) -> Vec<(f64, bool)> {
    let s = &cfg.solver;
    let mut marks: Vec<(f64, bool)> = Vec::new();
    let dense = (1.0f64.min(s.t_final) / s.early_interval).round() as usize;
    for i in 0..=dense {
        marks.push(((i as f64 * s.early_interval).min(s.t_final), true));
    }
    if s.t_final > 1.0 {
        for t in log_times(1.0, s.t_final, s.log_samples + 1).into_iter().skip(1) {
            marks.push((t.min(s.t_final), true));
        }
    }
    if with_moments {
        if let Some(dt) = s.moment_interval {
            let count = (s.t_final / dt).floor() as usize;
            for i in 0..=count {
                marks.push(((i as f64 * dt).min(s.t_final), false));
            }
        }
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(marks.len());
    for (t, full) in marks {
        match out.last_mut() {
            Some(last) if (t - last.0).abs() <= 1e-9 * t.max(1.0) => last.1 |= full,
            _ => out.push((t, full)),
        }
    }
    out
}

/// Recorded history of one solver run.
#[derive(Debug, Clone)]
pub struct History {
    pub rows: Vec<EnergyRow>,
    pub moments: Vec<LowerBoundSample>,
    pub snapshots: Vec<EulerState>,
    pub verdict: BlowupVerdict,
    pub steps: usize,
}

/// Run the solver from `s0`, recording energy rows (with `settings`), the
/// moment samples and the snapshots at the given indices of the full rows.
pub fn record(
    cfg: &ScenarioConfig,
    grid: &Grid,
    s0: EulerState,
    settings: &RowSettings,
    with_moments: bool,
    snapshot_rows: &[usize],
) -> Result<History> {
    let d = cfg.damping_law()?;
    let g = cfg.gas_law()?;
    let marks = observation_times(cfg, with_moments);
    let solver = Solver::new(grid, d, g, cfg.solver_config(marks.iter().map(|m| m.0).collect()))?;
    let mut rows = Vec::new();
    let mut moments = Vec::new();
    let mut snapshots = Vec::new();
    let mut next = 0usize;
    let outcome = solver.run(s0, |s| {
        let full = marks.get(next).map(|m| m.1).unwrap_or(true);
        next += 1;
        if with_moments {
            let p = euler::from_symmetric(s, &g)?;
            let excess = p.rho.map(|r| r - 1.0);
            moments.push(LowerBoundSample {
                t: s.t,
                rho_l2: grid.l2_norm(&excess),
                u_l2: grid.l2_norm_vec(&p.u),
                moment: diagnostics::moment_f(&p, grid)?,
            });
        }
        if full {
            if snapshot_rows.contains(&rows.len()) {
                snapshots.push(s.clone());
            }
            rows.push(diagnostics::energy_row(s, grid, &d, &g, cfg.solver.dealias, settings)?);
        }
        Ok(Control::Continue)
    })?;
    Ok(History { rows, moments, snapshots, verdict: outcome.verdict, steps: outcome.steps })
}

fn energy_table(name: &str, order: u32, rows: &[EnergyRow]) -> Table {
    Table {
        name: name.to_string(),
        header: EnergyRow::columns(order),
        rows: rows.iter().map(EnergyRow::values).collect(),
    }
}

/// Power-law slope verdict; returns the slope when the fit succeeded.
fn slope_verdict(
    label: String,
    pts: &[(f64, f64)],
    predicted: f64,
    window: (f64, f64),
    out: &mut Outcome,
) -> Option<f64> {
    let tol = tolerance::SOLUTION_SLOPE;
    match diagnostics::decay_fit(pts, window, Abscissa::LogOnePlusT) {
        Ok(fit) => {
            let v = Verdict::check(&label, fit.slope, predicted, tol, Rule::Within);
            out.report.fits.push(fit_record(&label, &fit, predicted, tol, v.passed));
            out.report.verdicts.push(v);
            Some(fit.slope)
        }
        Err(e) => {
            out.report.verdicts.push(unavailable(label, predicted, tol, Rule::Within, e));
            None
        }
    }
}

/// Largest value over the run divided by the largest value on `[0, 1]`.
fn growth_factor(series: &[(f64, f64)]) -> f64 {
    let early = series.iter().filter(|(t, _)| *t <= 1.0).map(|p| p.1).fold(0.0, f64::max);
    let all = series.iter().map(|p| p.1).fold(0.0, f64::max);
    if early > 0.0 {
        all / early
    } else {
        f64::INFINITY
    }
}

fn solver_run(cfg: &ScenarioConfig, d: &DampingLaw, selected: &[Diagnostic], out: &mut Outcome) -> Result<()> {
    use Diagnostic::*;
    let has = |x: Diagnostic| selected.contains(&x);
    if cfg.n == 1 && (has(VorticityDecay) || has(Irrotational)) {
        return Err(LabError::config("n", "vorticity diagnostics need n >= 2"));
    }
    let grid = solver_grid(cfg)?;
    let spec = cfg.weight()?;
    let order = cfg.solver.norm_order.max(1);
    let with_q = has(QDecay) || has(QScaling);
    let settings = RowSettings {
        order,
        weight: has(WeightedEnergy).then_some((spec, cfg.data.radius)),
        support_margin: cfg.grid.margin,
        e_psi_order: 2,
        with_q,
    };
    let with_moments = selected.iter().any(Diagnostic::needs_moment_series);
    let full_rows = observation_times(cfg, false).len();
    let snapshot_rows: Vec<usize> = match (cfg.output.snapshots, cfg.output.snapshot_count) {
        (SnapshotFormat::None, _) | (_, 0) => Vec::new(),
        (_, 1) => vec![full_rows - 1],
        (_, k) => (0..k).map(|i| i * (full_rows - 1) / (k - 1)).collect(),
    };
    let s0 = initial_state(cfg, &grid, 1.0, false)?;
    let h = record(cfg, &grid, s0, &settings, with_moments, &snapshot_rows)?;
    out.tables.push(energy_table("energy", order, &h.rows));
    if with_moments {
        out.tables.push(Table {
            name: "moments".into(),
            header: ["t", "rho_l2", "u_l2", "moment"].iter().map(|s| s.to_string()).collect(),
            rows: h.moments.iter().map(|m| vec![Some(m.t), Some(m.rho_l2), Some(m.u_l2), Some(m.moment)]).collect(),
        });
    }
    let window = (cfg.fit.window[0], cfg.fit.window[1]);
    let lambda = d.lambda();
    let n = cfg.n as f64;
    let series = |f: &dyn Fn(&EnergyRow) -> Option<f64>| -> Vec<(f64, f64)> {
        h.rows.iter().filter_map(|r| f(r).map(|v| (r.t, v))).collect()
    };
    let mut slopes: (Option<f64>, Option<f64>) = (None, None);
    let rho_pred = -(1.0 - lambda) * n / 2.0;
    let u_pred = -(1.0 - lambda) * (n + 1.0) / 2.0 + lambda;
    for s in selected {
        match *s {
            RhoSlope => {
                slopes.0 = slope_verdict(s.label(), &series(&|r| Some(r.rho_linf)), rho_pred, window, out);
            }
            USlope => {
                slopes.1 = slope_verdict(s.label(), &series(&|r| Some(r.u_linf)), u_pred, window, out);
            }
            SlopeDifference => {
                let fit =
                    |pts: &[(f64, f64)]| diagnostics::decay_fit(pts, window, Abscissa::LogOnePlusT).map(|f| f.slope);
                let rho = slopes.0.map(Ok).unwrap_or_else(|| fit(&series(&|r| Some(r.rho_linf))));
                let u = slopes.1.map(Ok).unwrap_or_else(|| fit(&series(&|r| Some(r.u_linf))));
                let predicted = rho_pred - u_pred;
                out.report.verdicts.push(match (rho, u) {
                    (Ok(a), Ok(b)) => {
                        Verdict::check(s.label(), a - b, predicted, tolerance::SLOPE_DIFFERENCE, Rule::Within)
                            .with_note(format!("rho slope {a:.4}, u slope {b:.4}"))
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        unavailable(s.label(), predicted, tolerance::SLOPE_DIFFERENCE, Rule::Within, e)
                    }
                });
            }
            LowEnergy | HighEnergy | WeightedEnergy => {
                let pts = match *s {
                    LowEnergy => series(&|r| Some(r.low_energy(spec.b))),
                    HighEnergy => series(&|r| Some(r.high_energy(spec.b, lambda))),
                    _ => series(&|r| r.e_psi),
                };
                let factor = growth_factor(&pts);
                out.report.verdicts.push(
                    Verdict::check(s.label(), factor, tolerance::ENERGY_FACTOR, 0.0, Rule::AtMost)
                        .with_note("max over run / max over [0, 1]"),
                );
            }
            QDecay => {
                let pts = series(&|r| r.q_l1);
                let bound = -spec.b - (1.0 + lambda) / 2.0;
                let v = match diagnostics::q_decay_check(&pts, &spec, d, window, tolerance::Q_SLOPE) {
                    Ok(diagnostics::QDecay::Vacuous) => {
                        Verdict::check(s.label(), f64::NEG_INFINITY, bound, tolerance::Q_SLOPE, Rule::AtMost)
                            .with_note("Q vanishes identically")
                    }
                    Ok(diagnostics::QDecay::Fitted { fit, bound, tolerance, passed }) => {
                        out.report.fits.push(fit_record("q-l1-slope", &fit, bound, tolerance, passed));
                        Verdict::check(s.label(), fit.slope, bound, tolerance, Rule::AtMost)
                    }
                    Err(e) => unavailable(s.label(), bound, tolerance::Q_SLOPE, Rule::AtMost, e),
                };
                out.report.verdicts.push(v);
            }
            QScaling => {
                let s2 = initial_state(cfg, &grid, 2.0, false)?;
                let q_only = RowSettings { weight: None, ..settings };
                let h2 = record(cfg, &grid, s2, &q_only, false, &[])?;
                out.tables.push(energy_table("energy_doubled", order, &h2.rows));
                let worst = h
                    .rows
                    .iter()
                    .zip(&h2.rows)
                    .filter_map(|(a, b)| match (a.q_l1, b.q_l1) {
                        (Some(x), Some(y)) if x > 0.0 => Some(y / x),
                        _ => None,
                    })
                    .fold(None::<f64>, |acc, r| match acc {
                        Some(w) if (w - 4.0).abs() >= (r - 4.0).abs() => Some(w),
                        _ => Some(r),
                    });
                out.report.verdicts.push(match worst {
                    Some(r) => Verdict::check(s.label(), r, 4.0, tolerance::Q_SCALING, Rule::Within)
                        .with_note("ratio farthest from 4 over all samples"),
                    None => unavailable(s.label(), 4.0, tolerance::Q_SCALING, Rule::Within, "Q vanishes"),
                });
            }
            MassDrift => {
                let m0 = h.rows.first().map(|r| r.mass).unwrap_or(0.0);
                let scale = if m0 != 0.0 { m0.abs() } else { 1.0 };
                let drift = h.rows.iter().map(|r| (r.mass - m0).abs() / scale).fold(0.0, f64::max);
                let mut v = Verdict::check(s.label(), drift, 0.0, tolerance::MASS_DRIFT, Rule::AtMost);
                if m0 == 0.0 {
                    v = v.with_note("initial mass is zero; drift is absolute");
                }
                out.report.verdicts.push(v);
            }
            CauchySchwarz | MarginRho | MarginU => {
                let q0 = cfg.data.q0.unwrap_or_else(|| h.rows.first().map(|r| r.mass).unwrap_or(0.0));
                let (predicted, tol) = match *s {
                    CauchySchwarz => (1.0, 0.0),
                    _ => (f64::MIN_POSITIVE, 0.0),
                };
                let v =
                    match diagnostics::lower_bound_margin(&h.moments, q0, cfg.data.radius, cfg.n, cfg.fit.margin_start)
                    {
                        Ok(LowerBound::Declined { reason }) => {
                            unavailable(s.label(), predicted, tol, Rule::AtLeast, reason)
                        }
                        Ok(LowerBound::Checked(m)) => {
                            let observed = match *s {
                                CauchySchwarz => m.cauchy_schwarz_min,
                                MarginRho => m.inf_rho,
                                _ => m.inf_u,
                            };
                            Verdict::check(s.label(), observed, predicted, tol, Rule::AtLeast)
                        }
                        Err(e) => unavailable(s.label(), predicted, tol, Rule::AtLeast, e),
                    };
                out.report.verdicts.push(v);
            }
            MomentInequality => {
                let q0 = cfg.data.q0.unwrap_or_else(|| h.rows.first().map(|r| r.mass).unwrap_or(0.0));
                let v = match diagnostics::moment_inequality(&h.moments, q0, cfg.n, d) {
                    Ok(m) => Verdict::check(s.label(), m.min_ratio, 1.0, tolerance::MOMENT_INEQUALITY, Rule::AtLeast)
                        .with_note("min of (F' + bF)/(n q0)"),
                    Err(e) => unavailable(s.label(), 1.0, tolerance::MOMENT_INEQUALITY, Rule::AtLeast, e),
                };
                out.report.verdicts.push(v);
            }
            VorticityDecay => {
                let pts = series(&|r| r.omega_l2);
                let predicted = -d.mu() / (1.0 - lambda);
                let abscissa = Abscissa::Stretched { power: 1.0 - lambda };
                let v = match diagnostics::decay_fit(&pts, window, abscissa) {
                    Ok(fit) => {
                        let mut v =
                            Verdict::check(s.label(), fit.slope, predicted, tolerance::VORTICITY_RATE, Rule::Relative)
                                .with_note(format!("rms {:.3e}", fit.rms));
                        if fit.poor_fit {
                            v.passed = false;
                        }
                        out.report.fits.push(fit_record(
                            "omega-l2-rate",
                            &fit,
                            predicted,
                            tolerance::VORTICITY_RATE * predicted.abs(),
                            v.passed,
                        ));
                        v
                    }
                    Err(e) => unavailable(s.label(), predicted, tolerance::VORTICITY_RATE, Rule::Relative, e),
                };
                out.report.verdicts.push(v);
            }
            Irrotational => {
                let s2 = initial_state(cfg, &grid, 1.0, true)?;
                let plain = RowSettings { weight: None, with_q: false, ..settings };
                let h2 = record(cfg, &grid, s2, &plain, false, &[])?;
                out.tables.push(energy_table("energy_irrotational", order, &h2.rows));
                let worst = h2
                    .rows
                    .iter()
                    .filter_map(|r| {
                        let grad = r.du_l2.first().copied()?;
                        (grad > 0.0).then(|| r.omega_l2.unwrap_or(0.0) / grad)
                    })
                    .fold(0.0, f64::max);
                out.report.verdicts.push(
                    Verdict::check(s.label(), worst, 0.0, tolerance::IRROTATIONAL, Rule::AtMost)
                        .with_note("max of |omega|/|grad u|"),
                );
            }
            Blowup => {
                let v = match h.verdict {
                    BlowupVerdict::Smooth => Verdict::check(s.label(), 0.0, 0.0, 0.0, Rule::AtMost)
                        .with_note(format!("smooth, {} steps", h.steps)),
                    BlowupVerdict::GradientBlowup { t, gradient_ratio, tail_fraction } => {
                        Verdict::check(s.label(), 1.0, 0.0, 0.0, Rule::AtMost).with_note(format!(
                            "flagged at t = {t:.4}: gradient x{gradient_ratio:.1}, tail fraction {tail_fraction:.2e}"
                        ))
                    }
                };
                out.report.verdicts.push(v);
            }
            _ => {}
        }
    }
    if let BlowupVerdict::GradientBlowup { t, .. } = h.verdict {
        out.report.flags.push(format!("blow-up monitor stopped the run at t = {t:.4}"));
    }
    out.snapshots = h.snapshots;
    out.grid = Some(grid);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    #[test]
    fn observation_times_are_sorted_and_merged() {
        let mut c = preset("lower-bound").unwrap();
        c.solver.t_final = 10.0;
        c.solver.log_samples = 5;
        let m = observation_times(&c, true);
        assert!(m.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(m.first().unwrap().0, 0.0);
        assert_eq!(m.last().unwrap().0, 10.0);
        assert!(m.last().unwrap().1);
        assert_eq!(m.iter().filter(|x| x.1).count(), observation_times(&c, false).len());
    }

    #[test]
    fn log_times_endpoints() {
        let t = log_times(100.0, 1e4, 3);
        assert!((t[0] - 100.0).abs() < 1e-9 && (t[1] - 1000.0).abs() < 1e-9 && (t[2] - 1e4).abs() < 1e-9);
    }

    #[test]
    fn growth_factor_uses_early_window() {
        assert_eq!(growth_factor(&[(0.0, 1.0), (1.0, 2.0), (5.0, 8.0)]), 4.0);
    }
}
