//! Periodic sampling grids on the box `[-L, L)^n` and the fields living on them.
//!
//! Samples are stored row-major with the last axis fastest. Grid point `i`
//! along an axis sits at `x = -L + i·dx`, so the origin is the sample `N/2`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::fft::FftPlan;
use crate::math;
use crate::{Complex64, Error, Result};

/// Scalar samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    data: Vec<f64>,
}

impl ScalarField {
    pub fn from_vec(data: Vec<f64>) -> Self {
        ScalarField { data }
    }

    pub fn zeros(len: usize) -> Self {
        ScalarField { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        ScalarField { data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }
}

/// `n` scalar components on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn from_components(comps: Vec<ScalarField>) -> Self {
        VectorField { comps }
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        VectorField { comps: (0..dim).map(|_| ScalarField::zeros(len)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let len = self.comps.first().map_or(0, ScalarField::len);
        let mut out = vec![0.0; len];
        for c in &self.comps {
            for (o, x) in out.iter_mut().zip(c.as_slice()) {
                *o += x * x;
            }
        }
        ScalarField::from_vec(out.into_iter().map(math::sqrt).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().max_abs()
    }

    pub fn scale(&mut self, s: f64) {
        self.comps.iter_mut().for_each(|c| c.scale(s));
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(s, b);
        }
    }
}

/// Uniform periodic grid with `points` samples per axis on `[-L, L)^dim`.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    half_length: f64,
    points: usize,
    plan: FftPlan,
}

impl Grid {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::param("n", format!("dimension {dim} not in 1..=3")));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::param("L", format!("half-length {half_length} must be positive")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::param("N", format!("{points} points per axis: need a power of two >= 16")));
        }
        Ok(Grid { dim, half_length, points, plan: FftPlan::new(points)? })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Total number of samples `N^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        math::powi(self.dx(), self.dim as i32)
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField::zeros(self.len())
    }

    pub fn zero_vector(&self) -> VectorField {
        VectorField::zeros(self.dim, self.len())
    }

    /// Per-axis sample indices of a flat index.
    pub fn axis_indices(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rest = idx;
        for a in (0..self.dim).rev() {
            out[a] = rest % self.points;
            rest /= self.points;
        }
        out
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx()
    }

    /// Physical position of a flat index (unused axes are 0).
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let ai = self.axis_indices(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coordinate(ai[a]);
        }
        x
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.position(idx);
        math::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    }

    pub fn from_fn(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        ScalarField::from_vec((0..self.len()).map(|i| f(&self.position(i)[..self.dim])).collect())
    }

    /// Signed DFT mode index of sample `i` along one axis, in `[-N/2, N/2)`.
    pub fn mode_index(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn fundamental_wavenumber(&self) -> f64 {
        math::PI / self.half_length
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        self.mode_index(i) as f64 * self.fundamental_wavenumber()
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let ai = self.axis_indices(idx);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumber(ai[a]);
        }
        k
    }

    /// Sum of squared signed mode indices; modes sharing it share `|ξ|`.
    pub fn mode_shell(&self, idx: usize) -> u64 {
        let ai = self.axis_indices(idx);
        (0..self.dim).map(|a| self.mode_index(ai[a]).unsigned_abs().pow(2)).sum()
    }

    fn is_nyquist(&self, i: usize) -> bool {
        i == self.points / 2
    }

    /// Real factor `k^order` of an axis derivative; odd derivatives drop the
    /// Nyquist mode.
    fn axis_factor(&self, i: usize, order: u32) -> f64 {
        if order == 0 {
            return 1.0;
        }
        if order % 2 == 1 && self.is_nyquist(i) {
            return 0.0;
        }
        math::powi(self.wavenumber(i), order as i32)
    }

    pub fn forward(&self, f: &ScalarField) -> Vec<Complex64> {
        debug_assert_eq!(f.len(), self.len());
        let mut buf: Vec<Complex64> = f.as_slice().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.plan.forward_nd(&mut buf, self.dim);
        buf
    }

    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> ScalarField {
        self.plan.inverse_nd(&mut spec, self.dim);
        ScalarField::from_vec(spec.into_iter().map(|z| z.re).collect())
    }

    pub fn inverse_complex(&self, spec: &mut [Complex64]) {
        self.plan.inverse_nd(spec, self.dim);
    }

    /// Multiply a spectrum by `∂^α` for the multi-index `alpha`.
    pub fn apply_derivative(&self, spec: &mut [Complex64], alpha: [u32; 3]) {
        let order: u32 = alpha.iter().take(self.dim).sum();
        if order == 0 {
            return;
        }
        // i^order
        let phase = match order % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        for (idx, z) in spec.iter_mut().enumerate() {
            let ai = self.axis_indices(idx);
            let mut m = 1.0;
            for a in 0..self.dim {
                m *= self.axis_factor(ai[a], alpha[a]);
            }
            *z *= phase * m;
        }
    }

    fn axis_alpha(&self, axis: usize, order: u32) -> [u32; 3] {
        let mut alpha = [0u32; 3];
        alpha[axis] = order;
        alpha
    }

    pub fn derivative_of_spectrum(&self, spec: &[Complex64], alpha: [u32; 3]) -> ScalarField {
        let mut s = spec.to_vec();
        self.apply_derivative(&mut s, alpha);
        self.inverse_real(s)
    }

    pub fn partial(&self, f: &ScalarField, axis: usize) -> ScalarField {
        let spec = self.forward(f);
        self.derivative_of_spectrum(&spec, self.axis_alpha(axis, 1))
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        let spec = self.forward(f);
        VectorField::from_components(
            (0..self.dim).map(|a| self.derivative_of_spectrum(&spec, self.axis_alpha(a, 1))).collect(),
        )
    }

    pub fn divergence(&self, u: &VectorField) -> ScalarField {
        let mut out = self.zeros();
        for (a, c) in u.components().iter().enumerate() {
            out.axpy(1.0, &self.partial(c, a));
        }
        out
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let mut spec = self.forward(f);
        for (idx, z) in spec.iter_mut().enumerate() {
            let k = self.wavevector(idx);
            *z *= -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
        }
        self.inverse_real(spec)
    }

    /// Largest retained mode index per axis: `N/3` under the 2/3 rule,
    /// otherwise `N/2`.
    pub fn resolved_band(&self, dealias: bool) -> usize {
        if dealias {
            self.points / 3
        } else {
            self.points / 2
        }
    }

    /// Zero every mode whose index exceeds `N/3` on some axis.
    pub fn dealias(&self, spec: &mut [Complex64]) {
        let cut = self.resolved_band(true) as u64;
        for (idx, z) in spec.iter_mut().enumerate() {
            let ai = self.axis_indices(idx);
            if (0..self.dim).any(|a| self.mode_index(ai[a]).unsigned_abs() > cut) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn project(&self, f: &ScalarField) -> ScalarField {
        let mut spec = self.forward(f);
        self.dealias(&mut spec);
        self.inverse_real(spec)
    }

    /// Fraction of spectral energy carried by modes with some axis index
    /// above `band_start`.
    pub fn tail_fraction(&self, f: &ScalarField, band_start: usize) -> f64 {
        let spec = self.forward(f);
        self.spectrum_tail_fraction(&spec, band_start)
    }

    pub fn spectrum_tail_fraction(&self, spec: &[Complex64], band_start: usize) -> f64 {
        let (mut tail, mut total) = (0.0, 0.0);
        for (idx, z) in spec.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            let ai = self.axis_indices(idx);
            if (0..self.dim).any(|a| self.mode_index(ai[a]).unsigned_abs() > band_start as u64) {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Trapezoid (spectrally accurate) integral over the periodic box.
    pub fn integrate(&self, f: &ScalarField) -> f64 {
        self.cell_volume() * f.as_slice().iter().sum::<f64>()
    }

    pub fn l1_norm(&self, f: &ScalarField) -> f64 {
        self.cell_volume() * f.as_slice().iter().map(|x| x.abs()).sum::<f64>()
    }

    pub fn l2_norm(&self, f: &ScalarField) -> f64 {
        math::sqrt(self.cell_volume() * f.as_slice().iter().map(|x| x * x).sum::<f64>())
    }

    pub fn linf_norm(&self, f: &ScalarField) -> f64 {
        f.max_abs()
    }

    /// L² norm of a vector field (Euclidean in components).
    pub fn l2_norm_vec(&self, u: &VectorField) -> f64 {
        math::sqrt(
            u.components()
                .iter()
                .map(|c| {
                    let n = self.l2_norm(c);
                    n * n
                })
                .sum(),
        )
    }

    pub fn linf_norm_vec(&self, u: &VectorField) -> f64 {
        u.max_abs()
    }

    /// All multi-indices of order `k` in the grid dimension.
    pub fn multi_indices(&self, k: u32) -> Vec<[u32; 3]> {
        let mut out = Vec::new();
        match self.dim {
            1 => out.push([k, 0, 0]),
            2 => (0..=k).for_each(|a| out.push([a, k - a, 0])),
            _ => {
                for a in 0..=k {
                    for b in 0..=(k - a) {
                        out.push([a, b, k - a - b]);
                    }
                }
            }
        }
        out
    }

    /// `(Σ_{|α|=k} ‖∂^α f‖²)^{1/2}`, evaluated by Parseval.
    pub fn derivative_l2(&self, f: &ScalarField, k: u32) -> f64 {
        let spec = self.forward(f);
        self.spectrum_derivative_l2(&spec, k)
    }

    pub fn spectrum_derivative_l2(&self, spec: &[Complex64], k: u32) -> f64 {
        let alphas = self.multi_indices(k);
        let mut acc = 0.0;
        for (idx, z) in spec.iter().enumerate() {
            let ai = self.axis_indices(idx);
            let mut w = 0.0;
            for alpha in &alphas {
                let mut m = 1.0;
                for a in 0..self.dim {
                    m *= self.axis_factor(ai[a], alpha[a]);
                }
                w += m * m;
            }
            acc += w * z.norm_sqr();
        }
        math::sqrt(self.cell_volume() * acc / self.len() as f64)
    }

    /// `max_{|α|=k} ‖∂^α f‖_∞`.
    pub fn derivative_linf(&self, f: &ScalarField, k: u32) -> f64 {
        if k == 0 {
            return f.max_abs();
        }
        let spec = self.forward(f);
        self.multi_indices(k)
            .into_iter()
            .map(|alpha| self.derivative_of_spectrum(&spec, alpha).max_abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_{k=0}^{order} (Σ_{|α|=k} ‖∂^α f‖²)^{1/2}`.
    pub fn sobolev_norm(&self, f: &ScalarField, order: u32) -> f64 {
        let spec = self.forward(f);
        (0..=order).map(|k| self.spectrum_derivative_l2(&spec, k)).sum()
    }

    pub fn check_scalar(&self, f: &ScalarField, what: &str) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Shape(format!("{what}: {} samples, grid has {}", f.len(), self.len())));
        }
        Ok(())
    }

    pub fn check_vector(&self, u: &VectorField, what: &str) -> Result<()> {
        if u.dim() != self.dim {
            return Err(Error::Shape(format!("{what}: {} components on a {}-D grid", u.dim(), self.dim)));
        }
        u.components().iter().try_for_each(|c| self.check_scalar(c, what))
    }
}
