//! Uniform grids on the coordinate circle `[0, 1)` and the two kinds of
//! scalar fields living on them.
//!
//! A [`PeriodicField`] is a plain sample vector of a 1-periodic function.
//! A [`TwistedField`] represents `k(y) = λ·y + p(y)` with `p` periodic, so
//! `k(y + 1) = k(y) + λ`. Only the periodic part is ever transformed; the
//! holonomy `λ` enters the first derivative as an additive constant.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible grid.
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: grid has {expected} nodes, field has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported derivative order {0} (only 1 and 2 are available)")]
    UnsupportedOrder(usize),
    #[error("weight must be strictly positive, found {value} at node {index}")]
    NonPositiveWeight { index: usize, value: f64 },
}

/// Differentiation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fourier collocation.
    Spectral,
    /// Fourth-order central differences.
    Fd4,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Spectral => f.write_str("spectral"),
            Scheme::Fd4 => f.write_str("fd4"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_nodes: usize,
    pub scheme: Scheme,
}

impl GridSpec {
    pub fn new(n_nodes: usize, scheme: Scheme) -> Result<Self, GridError> {
        let spec = GridSpec { n_nodes, scheme };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.n_nodes < MIN_NODES {
            return Err(GridError::InvalidSpec(format!(
                "n_nodes = {} is below the minimum of {MIN_NODES}",
                self.n_nodes
            )));
        }
        if self.scheme == Scheme::Spectral && self.n_nodes % 2 != 0 {
            return Err(GridError::InvalidSpec(format!(
                "spectral grids need an even node count, got {}",
                self.n_nodes
            )));
        }
        Ok(())
    }

    /// Node spacing `h = 1 / n_nodes`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n_nodes as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n_nodes as f64
    }
}

/// Samples of a 1-periodic function at the nodes `y_j = j / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodicField {
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(values: Vec<f64>) -> Self {
        PeriodicField { values }
    }

    pub fn zeros(n: usize) -> Self {
        PeriodicField { values: vec![0.0; n] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        PeriodicField { values: vec![c; n] }
    }

    /// Samples `f(y_j)` on the grid.
    pub fn from_fn(spec: &GridSpec, f: impl Fn(f64) -> f64) -> Self {
        PeriodicField {
            values: (0..spec.n_nodes).map(|j| f(spec.node(j))).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        PeriodicField {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two equally sized fields.
    ///
    /// Panics when the lengths differ; callers validate sizes at the API
    /// boundary.
    pub fn zip_map(&self, other: &PeriodicField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        PeriodicField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &PeriodicField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PeriodicField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &PeriodicField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &PeriodicField) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index and value of the entry with the largest magnitude.
    pub fn argmax_abs(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |(bi, bv): (usize, f64), (i, v)| {
                if v.abs() > bv.abs() {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `k(y) = λ·y + p(y)` with `p` periodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistedField {
    periodic: PeriodicField,
    holonomy: f64,
}

impl TwistedField {
    pub fn new(periodic: PeriodicField, holonomy: f64) -> Self {
        TwistedField { periodic, holonomy }
    }

    /// Pure twist `λ·y`.
    pub fn linear(n: usize, holonomy: f64) -> Self {
        TwistedField::new(PeriodicField::zeros(n), holonomy)
    }

    pub fn from_fn(spec: &GridSpec, holonomy: f64, periodic: impl Fn(f64) -> f64) -> Self {
        TwistedField::new(PeriodicField::from_fn(spec, periodic), holonomy)
    }

    /// Splits raw samples of `k` into periodic part and twist.
    pub fn from_samples(spec: &GridSpec, samples: &[f64], holonomy: f64) -> Self {
        let periodic = samples
            .iter()
            .enumerate()
            .map(|(j, &k)| k - holonomy * spec.node(j))
            .collect();
        TwistedField::new(PeriodicField::new(periodic), holonomy)
    }

    /// Raw samples `k(y_j)`.
    pub fn samples(&self, spec: &GridSpec) -> Vec<f64> {
        self.periodic
            .values()
            .iter()
            .enumerate()
            .map(|(j, &p)| p + self.holonomy * spec.node(j))
            .collect()
    }

    pub fn periodic(&self) -> &PeriodicField {
        &self.periodic
    }

    pub fn holonomy(&self) -> f64 {
        self.holonomy
    }

    pub fn len(&self) -> usize {
        self.periodic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periodic.is_empty()
    }

    /// Same twist, new periodic part.
    pub fn with_periodic(&self, periodic: PeriodicField) -> Self {
        TwistedField::new(periodic, self.holonomy)
    }

    /// `k + c`.
    pub fn shift(&self, c: f64) -> Self {
        self.with_periodic(self.periodic.shift(c))
    }
}

/// Anything that can be differentiated on the grid: a periodic part plus a
/// constant first-derivative offset.
pub trait GridFunction {
    fn periodic_part(&self) -> &PeriodicField;
    fn holonomy(&self) -> f64;
}

impl GridFunction for PeriodicField {
    fn periodic_part(&self) -> &PeriodicField {
        self
    }

    fn holonomy(&self) -> f64 {
        0.0
    }
}

impl GridFunction for TwistedField {
    fn periodic_part(&self) -> &PeriodicField {
        &self.periodic
    }

    fn holonomy(&self) -> f64 {
        self.holonomy
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `2πm` per FFT slot, zero at the Nyquist slot.
    d1_symbol: Vec<f64>,
    /// `−(2πm)²` per FFT slot.
    d2_symbol: Vec<f64>,
}

/// A validated [`GridSpec`] together with its transform plans.
///
/// Cloning is cheap; plans are shared.
#[derive(Clone)]
pub struct Grid {
    spec: GridSpec,
    fft: Arc<FftPair>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self, GridError> {
        spec.validate()?;
        let mut planner = FftPlanner::new();
        let n = spec.n_nodes;
        let wavenumber = |idx: usize| if idx <= n / 2 { idx as f64 } else { idx as f64 - n as f64 };
        let d1_symbol = (0..n)
            .map(|idx| {
                if n % 2 == 0 && idx == n / 2 {
                    // the Nyquist mode has no odd derivative on the grid
                    0.0
                } else {
                    2.0 * PI * wavenumber(idx)
                }
            })
            .collect();
        let d2_symbol = (0..n).map(|idx| -(2.0 * PI * wavenumber(idx)).powi(2)).collect();
        let fft = FftPair {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            d1_symbol,
            d2_symbol,
        };
        Ok(Grid {
            spec,
            fft: Arc::new(fft),
        })
    }

    pub fn spectral(n_nodes: usize) -> Result<Self, GridError> {
        Grid::new(GridSpec::new(n_nodes, Scheme::Spectral)?)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n_nodes
    }

    pub fn scheme(&self) -> Scheme {
        self.spec.scheme
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.spec.node(j)).collect()
    }

    pub fn check(&self, f: &PeriodicField) -> Result<(), GridError> {
        if f.len() != self.n() {
            return Err(GridError::DimensionMismatch {
                expected: self.n(),
                found: f.len(),
            });
        }
        Ok(())
    }

    /// Samples of the `order`-th coordinate derivative.
    pub fn derivative<F: GridFunction + ?Sized>(
        &self,
        field: &F,
        order: usize,
    ) -> Result<PeriodicField, GridError> {
        let p = field.periodic_part();
        self.check(p)?;
        match order {
            1 => {
                let d = self.d1(p.values());
                Ok(PeriodicField::new(d).shift(field.holonomy()))
            }
            2 => Ok(PeriodicField::new(self.d2(p.values()))),
            other => Err(GridError::UnsupportedOrder(other)),
        }
    }

    /// First and second derivative from a single forward transform.
    pub fn derivatives<F: GridFunction + ?Sized>(
        &self,
        field: &F,
    ) -> Result<(PeriodicField, PeriodicField), GridError> {
        let p = field.periodic_part();
        self.check(p)?;
        let (d1, d2) = self.d12(p.values());
        Ok((PeriodicField::new(d1).shift(field.holonomy()), PeriodicField::new(d2)))
    }

    /// Rectangle-rule quadrature of `∫₀¹ f·weight dy`.
    pub fn integrate(&self, f: &PeriodicField, weight: &PeriodicField) -> Result<f64, GridError> {
        self.check(f)?;
        self.check(weight)?;
        if let Some((index, &value)) = weight
            .values()
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w > 0.0))
        {
            return Err(GridError::NonPositiveWeight { index, value });
        }
        Ok(self.quad_weighted(f.values(), weight.values()))
    }

    /// `∫₀¹ f dy` without a weight.
    pub fn mean_integral(&self, f: &PeriodicField) -> Result<f64, GridError> {
        self.check(f)?;
        Ok(f.mean())
    }

    pub(crate) fn quad_weighted(&self, f: &[f64], w: &[f64]) -> f64 {
        let h = self.spec.spacing();
        f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() * h
    }

    /// Discrete Fourier coefficients `c_m`, ordered as the FFT output and
    /// normalised so that `f_j = Σ c_m e^{2πi m j / n}`.
    pub fn fourier_coefficients(&self, f: &PeriodicField) -> Result<Vec<Complex64>, GridError> {
        self.check(f)?;
        let mut buf = self.forward(f.values());
        let inv_n = 1.0 / self.n() as f64;
        buf.iter_mut().for_each(|c| *c *= inv_n);
        Ok(buf)
    }

    /// Evaluates the trigonometric interpolant of `f` at arbitrary points.
    pub fn interpolate(&self, f: &PeriodicField, points: &[f64]) -> Result<Vec<f64>, GridError> {
        let coeffs = self.fourier_coefficients(f)?;
        let n = self.n();
        let half = n / 2;
        Ok(points
            .iter()
            .map(|&y| {
                let mut acc = coeffs[0].re;
                for (m, c) in coeffs.iter().enumerate().take(n.div_ceil(2)).skip(1) {
                    let phase = 2.0 * PI * m as f64 * y;
                    // conjugate pair m and n - m
                    acc += 2.0 * (c.re * phase.cos() - c.im * phase.sin());
                }
                if n % 2 == 0 {
                    acc += coeffs[half].re * (PI * n as f64 * y).cos();
                }
                acc
            })
            .collect())
    }

    /// Trigonometric interpolant sampled on `n·factor` equispaced points, by
    /// zero padding. The Nyquist coefficient is split between `±n/2`.
    pub fn upsample(&self, f: &PeriodicField, factor: usize) -> Result<PeriodicField, GridError> {
        let coeffs = self.fourier_coefficients(f)?;
        let n = self.n();
        let m = n * factor.max(1);
        let zero = Complex64::new(0.0, 0.0);
        let mut buf = vec![zero; m];
        for (idx, c) in coeffs.iter().enumerate() {
            if n % 2 == 0 && idx == n / 2 {
                buf[n / 2] += c * 0.5;
                buf[m - n / 2] += c * 0.5;
            } else if idx < n.div_ceil(2) {
                buf[idx] = *c;
            } else {
                buf[m - (n - idx)] = *c;
            }
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(m).process(&mut buf);
        Ok(PeriodicField::new(buf.into_iter().map(|c| c.re).collect()))
    }

    /// Removes all Fourier modes with `|m| > max_mode`.
    pub fn lowpass(&self, f: &PeriodicField, max_mode: usize) -> Result<PeriodicField, GridError> {
        self.check(f)?;
        let n = self.n();
        let mut buf = self.forward(f.values());
        for (idx, c) in buf.iter_mut().enumerate() {
            let m = idx.min(n - idx);
            if m > max_mode {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Ok(PeriodicField::new(self.inverse_real(buf)))
    }

    /// Root-mean-square size of the Fourier modes above `n/4`, used as a
    /// cheap indicator of spatial resolution.
    pub fn spectral_tail(&self, f: &PeriodicField) -> Result<f64, GridError> {
        let coeffs = self.fourier_coefficients(f)?;
        let n = self.n();
        let tail: f64 = coeffs
            .iter()
            .enumerate()
            .filter(|(idx, _)| (*idx).min(n - *idx) > n / 4)
            .map(|(_, c)| c.norm_sqr())
            .sum();
        Ok(tail.sqrt())
    }

    fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward.process(&mut buf);
        buf
    }

    fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.fft.inverse.process(&mut buf);
        let inv_n = 1.0 / self.n() as f64;
        buf.into_iter().map(|c| c.re * inv_n).collect()
    }

    pub(crate) fn d1(&self, values: &[f64]) -> Vec<f64> {
        match self.spec.scheme {
            Scheme::Spectral => {
                let mut buf = self.forward(values);
                self.apply_d1(&mut buf);
                self.inverse_real(buf)
            }
            Scheme::Fd4 => fd4_d1(values, self.spec.spacing()),
        }
    }

    pub(crate) fn d2(&self, values: &[f64]) -> Vec<f64> {
        match self.spec.scheme {
            Scheme::Spectral => {
                let mut buf = self.forward(values);
                self.apply_d2(&mut buf);
                self.inverse_real(buf)
            }
            Scheme::Fd4 => fd4_d2(values, self.spec.spacing()),
        }
    }

    pub(crate) fn d12(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.spec.scheme {
            Scheme::Spectral => {
                let hat = self.forward(values);
                let mut b1 = hat.clone();
                let mut b2 = hat;
                self.apply_d1(&mut b1);
                self.apply_d2(&mut b2);
                (self.inverse_real(b1), self.inverse_real(b2))
            }
            Scheme::Fd4 => {
                let h = self.spec.spacing();
                (fd4_d1(values, h), fd4_d2(values, h))
            }
        }
    }

    pub(crate) fn workspace(&self) -> Workspace {
        let n = self.n();
        let zero = Complex64::new(0.0, 0.0);
        Workspace {
            a: vec![zero; n],
            scratch: vec![zero; self.fft.forward.get_inplace_scratch_len().max(self.fft.inverse.get_inplace_scratch_len())],
        }
    }

    /// `(v_y, v_yy)` of one real field. On spectral grids both come back
    /// from a single inverse transform as `v_y + i v_yy`.
    pub(crate) fn d12_into(&self, v: &[f64], ws: &mut Workspace, vy: &mut [f64], vyy: &mut [f64]) {
        match self.spec.scheme {
            Scheme::Spectral => {
                let inv_n = 1.0 / self.n() as f64;
                for (z, a) in ws.a.iter_mut().zip(v) {
                    *z = Complex64::new(*a, 0.0);
                }
                self.fft.forward.process_with_scratch(&mut ws.a, &mut ws.scratch);
                for ((c, w1), w2) in ws.a.iter_mut().zip(&self.fft.d1_symbol).zip(&self.fft.d2_symbol) {
                    // i·w1·c + i·(w2·c)
                    let w = w1 + w2;
                    *c = Complex64::new(-c.im * w, c.re * w);
                }
                self.fft.inverse.process_with_scratch(&mut ws.a, &mut ws.scratch);
                for ((a, d1), d2) in ws.a.iter().zip(vy.iter_mut()).zip(vyy.iter_mut()) {
                    *d1 = a.re * inv_n;
                    *d2 = a.im * inv_n;
                }
            }
            Scheme::Fd4 => {
                let h = self.spec.spacing();
                vy.copy_from_slice(&fd4_d1(v, h));
                vyy.copy_from_slice(&fd4_d2(v, h));
            }
        }
    }

    fn apply_d1(&self, buf: &mut [Complex64]) {
        for (c, w) in buf.iter_mut().zip(&self.fft.d1_symbol) {
            *c = Complex64::new(-c.im * w, c.re * w);
        }
    }

    fn apply_d2(&self, buf: &mut [Complex64]) {
        for (c, w) in buf.iter_mut().zip(&self.fft.d2_symbol) {
            *c *= *w;
        }
    }
}

/// Reusable FFT buffers for hot loops.
pub(crate) struct Workspace {
    a: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn fd4_d1(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let scale = 1.0 / (12.0 * h);
    (0..n)
        .map(|j| {
            let fp1 = f[(j + 1) % n];
            let fp2 = f[(j + 2) % n];
            let fm1 = f[(j + n - 1) % n];
            let fm2 = f[(j + n - 2) % n];
            (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) * scale
        })
        .collect()
}

fn fd4_d2(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let scale = 1.0 / (12.0 * h * h);
    (0..n)
        .map(|j| {
            let fp1 = f[(j + 1) % n];
            let fp2 = f[(j + 2) % n];
            let fm1 = f[(j + n - 1) % n];
            let fm2 = f[(j + n - 2) % n];
            (-fp2 + 16.0 * fp1 - 30.0 * f[j] + 16.0 * fm1 - fm2) * scale
        })
        .collect()
}
