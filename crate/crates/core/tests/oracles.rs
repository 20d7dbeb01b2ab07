//! Cross-checks of the core numerics against independent computations that
//! live entirely in this file.

use tdeuler::diagnostics::{self, convolution_oracle};
use tdeuler::euler::{self, BlowupSettings, DampingSplit, EulerState, Solver, SolverConfig};
use tdeuler::exec::Sequential;
use tdeuler::grid::{Grid, ScalarField, VectorField};
use tdeuler::linear::{self, LinearOptions};
use tdeuler::ode::Tolerance;
use tdeuler::params::{self, DampingLaw, GasLaw};

fn law(lambda: f64, mu: f64) -> DampingLaw {
    DampingLaw::new(lambda, mu).unwrap()
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Fixed-step classical RK4 for `y'' + b(t) y' + ξ² y = 0`.
fn rk4_mode(xi: f64, tau: f64, t: f64, y0: [f64; 2], d: &DampingLaw, steps: usize) -> [f64; 2] {
    let f = |s: f64, y: [f64; 2]| [y[1], -params::damping_coeff(s, d) * y[1] - xi * xi * y[0]];
    let h = (t - tau) / steps as f64;
    let mut y = y0;
    for i in 0..steps {
        let s = tau + i as f64 * h;
        let k1 = f(s, y);
        let k2 = f(s + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = f(s + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = f(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

#[test]
fn two_time_propagator_agrees_with_fixed_step_rk4() {
    let d = law(0.5, 1.0);
    let p = linear::two_time_propagator(10.0, 1.0, 0.3, &d, &Tolerance::default()).unwrap();
    let y1 = rk4_mode(0.3, 1.0, 10.0, [1.0, 0.0], &d, 20_000);
    let y2 = rk4_mode(0.3, 1.0, 10.0, [0.0, 1.0], &d, 20_000);
    assert!((p.phi1 - y1[0]).abs() < 1e-8, "{} vs {}", p.phi1, y1[0]);
    assert!((p.phi1_t - y1[1]).abs() < 1e-8);
    assert!((p.phi2 - y2[0]).abs() < 1e-8, "{} vs {}", p.phi2, y2[0]);
    assert!((p.phi2_t - y2[1]).abs() < 1e-8);
}

#[test]
fn critically_damped_closed_form() {
    let p = linear::fundamental_pair(1.0, 1.0, &law(0.0, 2.0), &Tolerance::default()).unwrap();
    assert!((p.phi2 - (-1.0f64).exp()).abs() < 1e-8);
    // Φ₁ = (1 + t) e^{−t}
    assert!((p.phi1 - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
}

/// Method of lines for `w_tt = Δw − b(t) w_t` with spectral `Δ` and RK4.
fn method_of_lines(grid: &Grid, w0: &ScalarField, d: &DampingLaw, t_end: f64, dt: f64) -> ScalarField {
    let f = |t: f64, w: &ScalarField, wt: &ScalarField| {
        let b = params::damping_coeff(t, d);
        let lap = grid.laplacian(w);
        (wt.clone(), lap.zip_map(wt, |l, v| l - b * v))
    };
    let add = |a: &ScalarField, s: f64, b: &ScalarField| a.zip_map(b, |x, y| x + s * y);
    let steps = (t_end / dt).round() as usize;
    let (mut w, mut wt) = (w0.clone(), grid.zeros());
    for i in 0..steps {
        let t = i as f64 * dt;
        let (a1, b1) = f(t, &w, &wt);
        let (a2, b2) = f(t + dt / 2.0, &add(&w, dt / 2.0, &a1), &add(&wt, dt / 2.0, &b1));
        let (a3, b3) = f(t + dt / 2.0, &add(&w, dt / 2.0, &a2), &add(&wt, dt / 2.0, &b2));
        let (a4, b4) = f(t + dt, &add(&w, dt, &a3), &add(&wt, dt, &b3));
        for (k, (x, y, z, q)) in [(&a1, &a2, &a3, &a4), (&b1, &b2, &b3, &b4)].into_iter().enumerate() {
            let incr = x.zip_map(y, |p, r| p + 2.0 * r).zip_map(z, |p, r| p + 2.0 * r).zip_map(q, |p, r| p + r);
            let target = if k == 0 { &mut w } else { &mut wt };
            target.axpy(dt / 6.0, &incr);
        }
    }
    w
}

#[test]
fn linear_solution_matches_method_of_lines() {
    let grid = Grid::new(1, 16.0, 128).unwrap();
    let d = law(0.5, 1.0);
    let w0 = grid.from_fn(|x| bump(x[0] / 4.0));
    let sol =
        linear::solve_linear_ivp(&w0, &grid.zeros(), None, &grid, &d, &[4.0], &LinearOptions::default(), &Sequential)
            .unwrap();
    let reference = method_of_lines(&grid, &w0, &d, 4.0, 0.002);
    let diff = sol.fields[0].zip_map(&reference, |a, b| a - b);
    let rel = grid.l2_norm(&diff) / grid.l2_norm(&reference);
    assert!(rel < 1e-6, "relative L2 error {rel:e}");
}

#[test]
fn source_matches_finite_difference_wave_residual() {
    let gas = GasLaw::new(3.0).unwrap();
    let d = law(0.5, 1.0);
    let grid = Grid::new(1, std::f64::consts::PI, 64).unwrap();
    let eps = 0.1;
    let s0 = EulerState { t: 0.0, v: grid.from_fn(|x| eps * x[0].sin()), u: grid.zero_vector() };
    let config = SolverConfig { dealias: false, t_final: 1.0, ..SolverConfig::default() };
    let solver = Solver::new(&grid, d, gas, config).unwrap();
    let h = 1e-3;
    let mut s = s0;
    for _ in 0..10 {
        s = solver.step(&s, h).unwrap();
    }
    let before = s.clone();
    let mid = solver.step(&before, h).unwrap();
    let after = solver.step(&mid, h).unwrap();
    let tendency = euler::rhs(&mid, &d, &gas, &grid, false).unwrap();
    let q = euler::source_q(&mid, &tendency, &d, &gas, &grid).unwrap();

    let b = params::damping_coeff(mid.t, &d);
    let lap = grid.laplacian(&mid.v);
    let residual: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (vm, v0, vp) = (before.v.as_slice()[i], mid.v.as_slice()[i], after.v.as_slice()[i]);
            (vp - 2.0 * v0 + vm) / (h * h) - lap.as_slice()[i] + b * (vp - vm) / (2.0 * h)
        })
        .collect();
    let residual = ScalarField::from_vec(residual);
    let diff = q.zip_map(&residual, |a, r| a - r);
    let rel = grid.l2_norm(&diff) / grid.l2_norm(&q);
    assert!(grid.l2_norm(&q) > 1e-4, "source unexpectedly small");
    assert!(rel < 1e-3, "relative error {rel:e}");
}

/// Adaptive Simpson quadrature on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

#[test]
fn weighted_energy_matches_adaptive_quadrature() {
    let d = law(0.5, 1.0);
    let spec = params::derive_constants(&d, 1, 0.25).unwrap();
    let grid = Grid::new(1, 16.0, 1024).unwrap();
    let radius = 5.0;
    let g = grid.from_fn(|x| bump(x[0] / radius));
    for t in [0.0, 2.0, 30.0] {
        let pair = diagnostics::weighted_pair(t, &g, &grid, &spec, &d, 8.0).unwrap();
        let weight = |x: f64| params::weight_exponent(t, x * x, &spec, &d).exp();
        let j = simpson(&|x| weight(x) * bump(x / radius).powi(2), -radius, radius, 1e-15);
        let rate = (1.0 + d.lambda()) / (1.0 + t);
        let j_psi = simpson(
            &|x| weight(x) * bump(x / radius).powi(2) * rate * 0.5 * params::weight_exponent(t, x * x, &spec, &d),
            -radius,
            radius,
            1e-15,
        );
        assert!((pair.j - j).abs() < 1e-8 * j, "t = {t}: J {} vs {j}", pair.j);
        assert!((pair.j_psi - j_psi).abs() < 1e-8 * j_psi, "t = {t}: J_psi {} vs {j_psi}", pair.j_psi);
    }
}

#[test]
fn convolution_matches_partial_fractions() {
    // a = 2, b = 1: with T = 2 + t the integral is 2 ln(T−1)/T² + 1/T − 1/(T(T−1)).
    let times = [1.0, 10.0, 100.0, 1000.0];
    let report = convolution_oracle(2.0, 1.0, &times).unwrap();
    for (&t, &(ts, ratio)) in times.iter().zip(&report.ratios) {
        assert_eq!(t, ts);
        let big = 2.0 + t;
        let exact = 2.0 * (big - 1.0).ln() / (big * big) + 1.0 / big - 1.0 / (big * (big - 1.0));
        assert!((ratio - exact * (1.0 + t)).abs() < 1e-9 * ratio, "t = {t}");
    }
}

#[test]
fn undamped_steepening_is_flagged() {
    let gas = GasLaw::new(2.0).unwrap();
    let grid = Grid::new(1, 32.0, 512).unwrap();
    let v = grid.from_fn(|x| 0.3 * bump(x[0] / 6.0));
    let s0 = EulerState { t: 0.0, u: VectorField::from_components(vec![v.clone()]), v };
    let config = SolverConfig {
        t_final: 60.0,
        blowup: BlowupSettings { gradient_factor: 20.0, ..BlowupSettings::default() },
        damping_split: DampingSplit::Plain,
        ..SolverConfig::default()
    };
    let undamped = Solver::new(&grid, law(0.5, 0.0), gas, config.clone()).unwrap();
    let out = undamped.run(s0.clone(), |_| Ok(euler::Control::Continue)).unwrap();
    assert!(out.stopped_early, "no gradient blow-up without friction");
    assert!(matches!(out.verdict, euler::BlowupVerdict::GradientBlowup { .. }));

    let small = EulerState { t: 0.0, v: s0.v.map(|x| 1e-3 * x / 0.3), u: grid.zero_vector() };
    let damped = Solver::new(&grid, law(0.5, 1.0), gas, config).unwrap();
    let out = damped.run(small, |_| Ok(euler::Control::Continue)).unwrap();
    assert_eq!(out.verdict, euler::BlowupVerdict::Smooth);
}

#[test]
fn linearization_error_is_quadratic_in_amplitude() {
    let gas = GasLaw::new(2.0).unwrap();
    let d = law(0.5, 1.0);
    let grid = Grid::new(1, 16.0, 256).unwrap();
    let config = SolverConfig { t_final: 5.0, snapshot_times: vec![5.0], ..SolverConfig::default() };
    let solver = Solver::new(&grid, d, gas, config).unwrap();
    let shape = euler::BumpShape { velocity: [0.5, 0.0, 0.0], ..euler::BumpShape::default() };
    let deviation = |eps: f64| {
        let s0 = euler::initial_bump(4.0, euler::Amplitude::Sobolev { eps, order: 2 }, &shape, &grid, &gas).unwrap();
        let s0 = solver.admissible(&s0);
        let w1 = euler::rhs(&s0, &d, &gas, &grid, true).unwrap().dv;
        let w = linear::solve_linear_ivp(&s0.v, &w1, None, &grid, &d, &[5.0], &LinearOptions::default(), &Sequential)
            .unwrap();
        let v = solver.run(s0, |_| Ok(euler::Control::Continue)).unwrap().last.v;
        grid.l2_norm(&v.zip_map(&w.fields[0], |a, b| a - b))
    };
    let ratio = deviation(2e-3) / deviation(1e-3);
    assert!((ratio - 4.0).abs() < 0.5, "halving ratio {ratio}");
}
