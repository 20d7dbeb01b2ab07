//! One-dimensional quadrature: adaptive Gauss–Kronrod for smooth integrands
//! with endpoint layers, and nested Simpson doubling for integrands that are
//! expensive to evaluate (each node reused by the next level).

use alloc::vec::Vec;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Tolerances for [`gauss_kronrod`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_intervals: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        QuadTolerance { rtol: 1e-10, atol: 1e-300, max_intervals: 20_000 }
    }
}

/// Single G7/K15 panel: (Kronrod value, |Kronrod − Gauss|).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection on the panel with the largest error estimate until the
/// total estimate meets `max(atol, rtol·|I|)`.
pub fn gauss_kronrod(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: &QuadTolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature { value: total, estimate: err, reason: "non-finite integrand" });
        }
        if err <= tol.atol.max(tol.rtol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Quadrature { value: total, estimate: err, reason: "interval budget exhausted" });
        }
        let worst =
            panels.iter().enumerate().fold((0usize, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc }).0;
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            let total: f64 = panels.iter().map(|p| p.2).sum();
            return Err(Error::Quadrature { value: total, estimate: err, reason: "panel width underflow" });
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// Outcome of [`simpson_doubling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined {
    pub value: f64,
    pub previous: f64,
    /// Number of panels of the final composite rule.
    pub panels: usize,
}

/// Composite Simpson on `[a, b]`, doubling the panel count from `2^min_level`
/// until two successive values agree to `rtol` (or both fall below `atol`).
/// Every node is evaluated once; `f` may fail, which aborts the refinement.
pub fn simpson_doubling(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    rtol: f64,
    atol: f64,
    min_level: u32,
    max_level: u32,
) -> Result<Refined> {
    if a == b {
        return Ok(Refined { value: 0.0, previous: 0.0, panels: 0 });
    }
    let h0 = b - a;
    // trapezoid sums: ends + interior nodes
    let ends = f(a)? + f(b)?;
    let mut interior = 0.0;
    let mut n = 1usize;
    let mut trap_prev = 0.5 * h0 * ends;
    let mut simpson_prev = f64::NAN;
    for level in 1..=max_level {
        let h = h0 / (2 * n) as f64;
        let mut fresh = 0.0;
        for i in 0..n {
            fresh += f(a + (2 * i + 1) as f64 * h)?;
        }
        interior += fresh;
        n *= 2;
        let trap = h * (0.5 * ends + interior);
        let simpson = (4.0 * trap - trap_prev) / 3.0;
        trap_prev = trap;
        if !simpson.is_finite() {
            return Err(Error::Quadrature { value: simpson, estimate: simpson_prev, reason: "non-finite integrand" });
        }
        if level > min_level.max(1) {
            let diff = (simpson - simpson_prev).abs();
            if diff <= rtol * simpson.abs().max(simpson_prev.abs())
                || (simpson.abs() <= atol && simpson_prev.abs() <= atol)
            {
                return Ok(Refined { value: simpson, previous: simpson_prev, panels: n });
            }
        }
        simpson_prev = simpson;
    }
    Err(Error::Quadrature { value: trap_prev, estimate: simpson_prev, reason: "refinement levels exhausted" })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_polynomials_and_layers() {
        let tol = QuadTolerance::default();
        let v = gauss_kronrod(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, &tol).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
        // sharp endpoint layer
        let v = gauss_kronrod(|x| (-1e3 * x).exp(), 0.0, 10.0, &tol).unwrap();
        assert!((v - 1e-3).abs() < 1e-14);
        let v = gauss_kronrod(|x| 1.0 / x.sqrt(), 1e-12, 1.0, &tol).unwrap();
        assert!((v - 2.0 * (1.0 - 1e-6)).abs() < 1e-8);
    }

    #[test]
    fn kronrod_reports_budget() {
        let tol = QuadTolerance { max_intervals: 4, ..QuadTolerance::default() };
        let r = gauss_kronrod(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &tol);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn simpson_doubling_converges_and_counts_nodes() {
        let mut calls = 0usize;
        let r = simpson_doubling(
            |x| {
                calls += 1;
                Ok(x.cos())
            },
            0.0,
            1.0,
            1e-10,
            0.0,
            2,
            20,
        )
        .unwrap();
        assert!((r.value - 1f64.sin()).abs() < 1e-10);
        assert_eq!(calls, r.panels + 1);
        let bad = simpson_doubling(|x| Ok((1e4 * x).sin().abs()), 0.0, 1.0, 1e-12, 0.0, 1, 3);
        assert!(bad.is_err());
    }
}
