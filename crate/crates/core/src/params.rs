//! Parameter algebra: damping and gas laws, the weight `ψ = a|x|²/(1+t)^{1+λ}`
//! with its derivatives, the integrating factor of the damping, and the
//! frequency zones of the damped wave equation.

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Which regime a damping law belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `0 < λ < 1`, `μ > 0`: the decaying-damping regime under study.
    Decaying,
    /// `λ = 0`: classical constant damping, admitted for cross-validation.
    ConstantDamping,
    /// `μ = 0`: no friction at all, admitted for free-wave and blow-up checks.
    Undamped,
}

/// Friction coefficient `μ (1+t)^{-λ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingLaw {
    lambda: f64,
    mu: f64,
}

impl DampingLaw {
    /// Accepts `0 ≤ λ < 1` and `μ ≥ 0`; the boundary values are flagged
    /// through [`DampingLaw::regime`].
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::param("lambda", format!("{lambda} outside [0, 1)")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::param("mu", format!("{mu} must be finite and nonnegative")));
        }
        Ok(DampingLaw { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn regime(&self) -> Regime {
        if self.mu == 0.0 {
            Regime::Undamped
        } else if self.lambda == 0.0 {
            Regime::ConstantDamping
        } else {
            Regime::Decaying
        }
    }

    /// True outside the `0 < λ < 1, μ > 0` regime.
    pub fn is_validation_mode(&self) -> bool {
        self.regime() != Regime::Decaying
    }
}

/// Polytropic pressure `p(ρ) = ρ^γ / γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasLaw {
    gamma: f64,
}

impl GasLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("{gamma} must exceed 1")));
        }
        Ok(GasLaw { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(γ-1)/2`, the coefficient that recurs throughout the symmetric system.
    pub fn half_gamma_minus_one(&self) -> f64 {
        0.5 * (self.gamma - 1.0)
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        math::powf(rho, self.gamma) / self.gamma
    }
}

/// Weight amplitude, decay index and critical derivative order for a given
/// dimension and slack `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub n: usize,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub k_c: f64,
}

/// Default slack `δ = min(1/4, (1+λ)n/4)`.
pub fn default_delta(lambda: f64, n: usize) -> f64 {
    (0.25f64).min((1.0 + lambda) * n as f64 / 4.0)
}

pub fn derive_constants(d: &DampingLaw, n: usize, delta: f64) -> Result<WeightSpec> {
    if n == 0 {
        return Err(Error::param("n", "dimension must be positive"));
    }
    let lam = d.lambda();
    let half = (1.0 + lam) * n as f64 / 2.0;
    if !(delta > 0.0 && delta <= half) {
        return Err(Error::param("delta", format!("{delta} outside (0, {half}]")));
    }
    let a = (1.0 + lam) * d.mu() / 8.0 * (1.0 - delta / ((1.0 + lam) * n as f64));
    let b = half - delta;
    let k_c = (1.0 + lam) / (1.0 - lam) * (n as f64 + 1.0) - n as f64 - 2.0 * delta / (1.0 - lam);
    Ok(WeightSpec { n, delta, a, b, k_c })
}

/// The weight `ψ` and its derivatives at one space-time point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEval {
    pub psi: f64,
    pub psi_t: f64,
    pub grad_psi: Vec<f64>,
    pub lap_psi: f64,
}

pub fn weight_eval(t: f64, x: &[f64], spec: &WeightSpec, d: &DampingLaw) -> WeightEval {
    let denom = math::powf(1.0 + t, 1.0 + d.lambda());
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let psi = spec.a * r2 / denom;
    WeightEval {
        psi,
        psi_t: -(1.0 + d.lambda()) / (1.0 + t) * psi,
        grad_psi: x.iter().map(|&xi| 2.0 * spec.a * xi / denom).collect(),
        lap_psi: 2.0 * spec.a * x.len() as f64 / denom,
    }
}

/// `2ψ` only, for quadrature loops.
#[inline]
pub fn weight_exponent(t: f64, r2: f64, spec: &WeightSpec, d: &DampingLaw) -> f64 {
    2.0 * spec.a * r2 / math::powf(1.0 + t, 1.0 + d.lambda())
}

#[inline]
pub fn damping_coeff(t: f64, d: &DampingLaw) -> f64 {
    if d.lambda() == 0.0 {
        d.mu()
    } else {
        d.mu() * math::powf(1.0 + t, -d.lambda())
    }
}

/// `ln` of the integrating factor between `t0` and `t1`.
pub fn log_integrating_factor(t0: f64, t1: f64, d: &DampingLaw) -> Result<f64> {
    if !(t0 >= 0.0 && t1 >= t0) {
        return Err(Error::param("t1", format!("need 0 <= t0 <= t1, got t0 = {t0}, t1 = {t1}")));
    }
    let p = 1.0 - d.lambda();
    if d.lambda() == 0.0 {
        return Ok(d.mu() * (t1 - t0));
    }
    Ok(d.mu() / p * (math::powf(1.0 + t1, p) - math::powf(1.0 + t0, p)))
}

/// `exp( μ/(1-λ) ((1+t1)^{1-λ} - (1+t0)^{1-λ}) )`: a solution of
/// `y' + μ(1+t)^{-λ} y = 0` satisfies `y(t1) = y(t0) / factor`.
pub fn integrating_factor(t0: f64, t1: f64, d: &DampingLaw) -> Result<f64> {
    log_integrating_factor(t0, t1, d).map(math::exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Zone {
    Z1,
    Z2,
    Z3,
}

impl Zone {
    pub fn label(&self) -> &'static str {
        match self {
            Zone::Z1 => "Z1",
            Zone::Z2 => "Z2",
            Zone::Z3 => "Z3",
        }
    }
}

/// Upper radius of the low-frequency zone at time `t`: `μ / (4 (1+t)^λ)`.
#[inline]
pub fn low_zone_radius(t: f64, d: &DampingLaw) -> f64 {
    0.25 * damping_coeff(t, d)
}

/// Boundary equalities resolve to the lower-index zone.
pub fn zone_classify(t: f64, r: f64, d: &DampingLaw) -> Zone {
    if r <= low_zone_radius(t, d) {
        Zone::Z1
    } else if r <= 1.0 {
        Zone::Z2
    } else {
        Zone::Z3
    }
}

/// Time at which frequency `r` leaves the low zone: `1 + t_ξ = (4r/μ)^{-1/λ}`.
pub fn t_xi(r: f64, d: &DampingLaw) -> Result<f64> {
    if d.lambda() == 0.0 || d.mu() == 0.0 {
        return Err(Error::param("lambda", "zone boundary is time independent when λ = 0 or μ = 0"));
    }
    let top = d.mu() / 4.0;
    if !(r > 0.0 && r <= top) {
        return Err(Error::param("r", format!("{r} outside (0, μ/4 = {top}]")));
    }
    Ok((math::powf(4.0 * r / d.mu(), -1.0 / d.lambda()) - 1.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(lambda: f64, mu: f64) -> DampingLaw {
        DampingLaw::new(lambda, mu).unwrap()
    }

    #[test]
    fn constants_from_closed_forms() {
        let b = derive_constants(&law(0.5, 1.0), 2, 0.2).unwrap().b;
        assert!((b - 1.3).abs() < 1e-15);
        let a = derive_constants(&law(0.5, 2.0), 1, 0.75).unwrap().a;
        assert!((a - 0.1875).abs() < 1e-15);
        let kc = derive_constants(&law(0.5, 1.0), 1, 0.25).unwrap().k_c;
        assert!((kc - 4.0).abs() < 1e-14);
    }

    #[test]
    fn constants_reject_bad_delta() {
        let d = law(0.5, 1.0);
        assert!(derive_constants(&d, 1, 0.0).is_err());
        assert!(derive_constants(&d, 1, 0.76).is_err());
        assert!(derive_constants(&d, 1, 0.75).is_ok());
        assert!(derive_constants(&d, 0, 0.1).is_err());
    }

    #[test]
    fn damping_law_validation() {
        assert!(DampingLaw::new(1.0, 1.0).is_err());
        assert!(DampingLaw::new(-0.1, 1.0).is_err());
        assert!(DampingLaw::new(0.5, -1.0).is_err());
        assert_eq!(law(0.5, 1.0).regime(), Regime::Decaying);
        assert_eq!(law(0.0, 1.0).regime(), Regime::ConstantDamping);
        assert_eq!(law(0.5, 0.0).regime(), Regime::Undamped);
        assert!(law(0.0, 1.0).is_validation_mode());
        assert!(GasLaw::new(1.0).is_err());
    }

    #[test]
    fn weight_plug_in_values() {
        let d = law(0.5, 1.0);
        let zero = weight_eval(0.0, &[0.0], &derive_constants(&d, 1, 0.25).unwrap(), &d);
        assert_eq!((zero.psi, zero.psi_t, zero.grad_psi[0]), (0.0, 0.0, 0.0));

        let spec = WeightSpec { n: 1, delta: 0.25, a: 1.0, b: 0.5, k_c: 4.0 };
        let w = weight_eval(0.0, &[1.0], &spec, &d);
        assert!((w.psi - 1.0).abs() < 1e-15);
        assert!((w.psi_t + 1.5).abs() < 1e-15);
        assert!((w.grad_psi[0] - 2.0).abs() < 1e-15);
        assert!((w.lap_psi - 2.0).abs() < 1e-15);
    }

    #[test]
    fn damping_and_integrating_factor() {
        assert_eq!(damping_coeff(0.0, &law(0.5, 3.0)), 3.0);
        assert!((damping_coeff(3.0, &law(0.5, 1.0)) - 0.5).abs() < 1e-15);
        assert_eq!(damping_coeff(123.0, &law(0.0, 2.5)), 2.5);

        let d = law(0.5, 1.0);
        assert_eq!(integrating_factor(0.0, 0.0, &d).unwrap(), 1.0);
        assert!((integrating_factor(0.0, 3.0, &d).unwrap() - 7.38905609893065).abs() < 1e-12);
        let c = law(0.0, 0.7);
        assert!((integrating_factor(1.0, 4.0, &c).unwrap() - (0.7f64 * 3.0).exp()).abs() < 1e-12);
        assert!(integrating_factor(2.0, 1.0, &d).is_err());
    }

    #[test]
    fn zones_and_boundary_time() {
        let d = law(0.5, 4.0);
        assert_eq!(zone_classify(0.0, 0.5, &d), Zone::Z1);
        assert_eq!(zone_classify(3.0, 0.7, &d), Zone::Z2);
        assert_eq!(zone_classify(0.0, 2.0, &d), Zone::Z3);
        // ties resolve downward
        assert_eq!(zone_classify(3.0, 0.5, &d), Zone::Z1);
        assert_eq!(zone_classify(100.0, 1.0, &d), Zone::Z2);

        assert_eq!(t_xi(1.0, &d).unwrap(), 0.0);
        assert!((t_xi(0.5, &d).unwrap() - 3.0).abs() < 1e-12);
        assert!(t_xi(1.5, &d).is_err());
        assert!(t_xi(0.0, &d).is_err());
        assert!(t_xi(0.5, &law(0.0, 4.0)).is_err());
        let r = 0.3;
        let t = t_xi(r, &d).unwrap();
        assert!((low_zone_radius(t, &d) - r).abs() < 1e-14);
    }
}
