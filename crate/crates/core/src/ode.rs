//! Dormand–Prince 5(4) with embedded error control, used for the
//! per-frequency propagators.

use crate::math;
use crate::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// difference between 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-10, atol: 1e-14, max_step: f64::INFINITY, max_steps: 50_000_000 }
    }
}

/// What the observer wants after seeing a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[inline]
fn lin<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * c;
        for i in 0..D {
            out[i] += hc * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0`, stopping exactly at each of the
/// ascending `outputs` (all `>= t0`) and handing the state to `observe`.
/// Returns the final time reached and state.
pub fn integrate<const D: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; D],
    outputs: &[f64],
    tol: &Tolerance,
    mut observe: O,
) -> Result<(f64, [f64; D])>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    O: FnMut(usize, f64, &[f64; D]) -> Control,
{
    let mut t = t0;
    let mut y = y0;
    let Some(&t_end) = outputs.last() else {
        return Ok((t, y));
    };
    let mut next = 0usize;
    while next < outputs.len() && outputs[next] <= t {
        if observe(next, t, &y) == Control::Stop {
            return Ok((t, y));
        }
        next += 1;
    }
    if next == outputs.len() {
        return Ok((t, y));
    }

    let mut k1 = f(t, &y);
    let mut h = initial_step(&y, &k1, t_end - t, tol);
    let mut steps = 0usize;
    let mut reject_streak = 0u32;

    while next < outputs.len() {
        let target = outputs[next];
        let mut last = false;
        let mut hs = h.min(tol.max_step);
        if t + hs >= target || target - (t + hs) < 1e-12 * target.abs().max(1.0) {
            hs = target - t;
            last = true;
        }
        let k2 = f(t + C2 * hs, &lin(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &lin(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &lin(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * hs, &lin(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + hs, &lin(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = lin(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let t_new = if last { target } else { t + hs };
        let k7 = f(t_new, &y_new);

        let mut err = 0.0;
        for i in 0..D {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = math::sqrt(err / D as f64);
        if !err.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite error estimate" });
        }

        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::Integration { t, reason: "step budget exhausted" });
        }

        if err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            reject_streak = 0;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * math::powf(err, -0.2)).clamp(0.2, 5.0) };
            if !last || hs >= h {
                h = hs * grow;
            } else {
                h = h.max(hs * grow);
            }
            if last {
                while next < outputs.len() && outputs[next] <= t {
                    if observe(next, t, &y) == Control::Stop {
                        return Ok((t, y));
                    }
                    next += 1;
                }
            }
        } else {
            reject_streak += 1;
            let shrink = (0.9 * math::powf(err, -0.2)).clamp(0.1, 0.9);
            h = hs * if reject_streak > 3 { 0.1 } else { shrink };
            if h <= 1e-15 * t.abs().max(1.0) {
                return Err(Error::Integration { t, reason: "step size underflow" });
            }
        }
    }
    Ok((t, y))
}

fn initial_step<const D: usize>(y: &[f64; D], dy: &[f64; D], span: f64, tol: &Tolerance) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..D {
        let sc = tol.atol + tol.rtol * y[i].abs();
        d0 += (y[i] / sc) * (y[i] / sc);
        d1 += (dy[i] / sc) * (dy[i] / sc);
    }
    let d0 = math::sqrt(d0 / D as f64);
    let d1 = math::sqrt(d1 / D as f64);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs().max(1e-12)).min(tol.max_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_long_run() {
        let tol = Tolerance::default();
        let outs = [1.0, 10.0, 100.0];
        let mut seen = std::vec::Vec::new();
        let (t, y) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            &outs,
            &tol,
            |i, t, y| {
                seen.push((i, t, y[0]));
                Control::Continue
            },
        )
        .unwrap();
        assert_eq!(t, 100.0);
        assert!((y[0] - 100f64.sin()).abs() < 1e-8);
        assert_eq!(seen.len(), 3);
        for (i, t, x) in seen {
            assert_eq!(t, outs[i]);
            assert!((x - t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn outputs_at_start_and_early_stop() {
        let tol = Tolerance::default();
        let mut count = 0;
        let (t, y) = integrate(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            &[0.0, 1.0, 2.0],
            &tol,
            |i, _, _| {
                count += 1;
                if i == 1 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )
        .unwrap();
        assert_eq!(count, 2);
        assert_eq!(t, 1.0);
        assert!((y[0] - (-1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn step_budget_is_enforced() {
        let tol = Tolerance { max_steps: 10, ..Tolerance::default() };
        let r =
            integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], &[1000.0], &tol, |_, _, _| Control::Continue);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }
}
