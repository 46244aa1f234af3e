//! Uniform periodic grids, Fourier transforms and spectral operators.
//!
//! Coefficients follow the normalization
//!
//! ```text
//! c(ξ) = n^{-d} Σ_x f(x) exp(-i ξ·x),      f(x) = Σ_ξ c(ξ) exp(i ξ·x)
//! ```
//!
//! where the nodes `x` live in `[-L/2, L/2)^d` and `ξ = 2π k / L` with
//! integer `k ∈ [-n/2, n/2)`. Negative-order multipliers `|ξ|^s` (s < 0) act
//! on the mean-zero part only: the zero mode of the output is set to 0.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{RelaxError, Result};

struct GridInner {
    dim: usize,
    n: usize,
    length: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed integer frequency per axis, indexed like the nodal array.
    kint: Vec<[i64; 2]>,
    /// `(-1)^{k_0 + k_1}`: phase of the shift from `[0, L)` to `[-L/2, L/2)`.
    phase: Vec<f64>,
}

/// A uniform periodic grid on `[-L/2, L/2)^d`, d ∈ {1, 2}.
///
/// Cloning is cheap; FFT plans are shared. Plans are `Send + Sync` and every
/// transform allocates its own scratch, so a grid may be used from any number
/// of threads at once.
#[derive(Clone)]
pub struct PeriodicGrid(Arc<GridInner>);

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("dim", &self.0.dim)
            .field("n", &self.0.n)
            .field("length", &self.0.length)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.dim == other.0.dim
                && self.0.n == other.0.n
                && self.0.length == other.0.length)
    }
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(RelaxError::Grid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 16 || n % 2 != 0 {
            return Err(RelaxError::Grid(format!("n must be even and >= 16, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(RelaxError::Grid(format!("length must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let total = n.pow(dim as u32);
        let signed = |j: usize| -> i64 {
            if j < n / 2 {
                j as i64
            } else {
                j as i64 - n as i64
            }
        };
        let mut kint = Vec::with_capacity(total);
        for idx in 0..total {
            let k = if dim == 1 {
                [signed(idx), 0]
            } else {
                [signed(idx / n), signed(idx % n)]
            };
            kint.push(k);
        }
        let phase = kint
            .iter()
            .map(|k| if (k[0] + k[1]).rem_euclid(2) == 0 { 1.0 } else { -1.0 })
            .collect();
        Ok(Self(Arc::new(GridInner {
            dim,
            n,
            length,
            fwd,
            inv,
            kint,
            phase,
        })))
    }

    /// Grid on the standard torus of period 2π.
    pub fn standard(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn length(&self) -> f64 {
        self.0.length
    }

    /// Node spacing `h = L / n`, identical on every axis.
    pub fn spacing(&self) -> f64 {
        self.0.length / self.0.n as f64
    }

    /// Number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.0.kint.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.0.length.powi(self.0.dim as i32)
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.0.dim as i32)
    }

    /// 1-D node coordinates `-L/2 + i h`.
    pub fn axis_coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.0.n)
            .map(|i| -0.5 * self.0.length + i as f64 * h)
            .collect()
    }

    /// Coordinates of node `idx` (unused axes are 0).
    pub fn node(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let half = 0.5 * self.0.length;
        if self.0.dim == 1 {
            [-half + idx as f64 * h, 0.0]
        } else {
            let n = self.0.n;
            [-half + (idx / n) as f64 * h, -half + (idx % n) as f64 * h]
        }
    }

    /// Integer frequency of spectral index `idx`.
    pub fn mode(&self, idx: usize) -> [i64; 2] {
        self.0.kint[idx]
    }

    /// Physical wavevector `2π k / L` of spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let s = 2.0 * PI / self.0.length;
        let k = self.0.kint[idx];
        [s * k[0] as f64, s * k[1] as f64]
    }

    pub fn wavenumber_norm(&self, idx: usize) -> f64 {
        let w = self.wavevector(idx);
        (w[0] * w[0] + w[1] * w[1]).sqrt()
    }

    /// True when component `axis` of mode `idx` is the unpaired Nyquist frequency.
    pub fn is_nyquist(&self, idx: usize, axis: usize) -> bool {
        self.0.kint[idx][axis] == -(self.0.n as i64 / 2)
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len(), "nodal array does not match grid");
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_all_axes(&mut buf, &self.0.fwd);
        let scale = 1.0 / self.len() as f64;
        for (c, p) in buf.iter_mut().zip(&self.0.phase) {
            *c *= scale * p;
        }
        buf
    }

    /// Inverse transform; the imaginary part (nonzero only for non-Hermitian
    /// input) is discarded.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "spectral array does not match grid");
        let mut buf: Vec<Complex64> = coeffs
            .iter()
            .zip(&self.0.phase)
            .map(|(c, p)| c * p)
            .collect();
        self.fft_all_axes(&mut buf, &self.0.inv);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn fft_all_axes(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.0.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // Rows are contiguous: one pass covers the last axis in both dimensions.
        plan.process_with_scratch(buf, &mut scratch);
        if self.0.dim == 2 {
            let mut column = vec![Complex64::default(); n];
            for j in 0..n {
                for i in 0..n {
                    column[i] = buf[i * n + j];
                }
                plan.process_with_scratch(&mut column, &mut scratch);
                for i in 0..n {
                    buf[i * n + j] = column[i];
                }
            }
        }
    }
}

/// A real scalar field sampled at the grid nodes.
///
/// Fields are immutable snapshots. The spectrum is computed on first use and
/// cached.
#[derive(Clone)]
pub struct Field {
    grid: PeriodicGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Arc<[Complex64]>>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("len", &self.values.len())
            .finish()
    }
}

impl Field {
    pub fn from_values(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(RelaxError::Grid(format!(
                "expected {} nodal values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self::raw(grid, values))
    }

    pub(crate) fn raw(grid: &PeriodicGrid, values: Vec<f64>) -> Self {
        Self {
            grid: grid.clone(),
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self::raw(grid, values)
    }

    pub fn constant(grid: &PeriodicGrid, c: f64) -> Self {
        Self::raw(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_spectrum(grid: &PeriodicGrid, coeffs: &[Complex64]) -> Self {
        Self::raw(grid, grid.inverse(coeffs))
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum
            .get_or_init(|| self.grid.forward(&self.values).into())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.grid == other.grid);
        Self::raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Grid quadrature `Σ f h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∫ f g dx` by grid quadrature.
    pub fn inner(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Apply a spectral multiplier `m(idx)` and transform back.
    pub fn apply_multiplier(&self, m: impl Fn(usize) -> Complex64) -> Self {
        let coeffs: Vec<Complex64> = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(i))
            .collect();
        Self::from_spectrum(&self.grid, &coeffs)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}

/// A vector field with one scalar component per axis.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<Field>,
}

impl VectorField {
    pub fn new(comps: Vec<Field>) -> Result<Self> {
        let Some(first) = comps.first() else {
            return Err(RelaxError::Grid("vector field needs components".into()));
        };
        if comps.len() != first.grid().dim() || comps.iter().any(|c| c.grid() != first.grid()) {
            return Err(RelaxError::Grid(
                "vector field needs one component per axis on a common grid".into(),
            ));
        }
        Ok(Self { comps })
    }

    pub(crate) fn raw(comps: Vec<Field>) -> Self {
        Self { comps }
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::raw((0..grid.dim()).map(|_| Field::zeros(grid)).collect())
    }

    pub fn constant(grid: &PeriodicGrid, c: [f64; 2]) -> Self {
        Self::raw((0..grid.dim()).map(|a| Field::constant(grid, c[a])).collect())
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.comps[0].grid()
    }

    pub fn comps(&self) -> &[Field] {
        &self.comps
    }

    pub fn comp(&self, axis: usize) -> &Field {
        &self.comps[axis]
    }

    pub fn map_comps(&self, f: impl Fn(&Field) -> Field) -> Self {
        Self::raw(self.comps.iter().map(f).collect())
    }

    pub fn zip_comps(&self, other: &VectorField, f: impl Fn(&Field, &Field) -> Field) -> Self {
        Self::raw(
            self.comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| f(a, b))
                .collect(),
        )
    }

    /// Pointwise `|v|²`.
    pub fn norm_sq(&self) -> Field {
        let grid = self.grid();
        let mut out = vec![0.0; grid.len()];
        for c in &self.comps {
            for (o, v) in out.iter_mut().zip(c.values()) {
                *o += v * v;
            }
        }
        Field::raw(grid, out)
    }

    /// Pointwise `v · w`.
    pub fn dot(&self, other: &VectorField) -> Field {
        let grid = self.grid();
        let mut out = vec![0.0; grid.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, x), y) in out.iter_mut().zip(a.values()).zip(b.values()) {
                *o += x * y;
            }
        }
        Field::raw(grid, out)
    }

    /// Componentwise integrals.
    pub fn integral(&self) -> Vec<f64> {
        self.comps.iter().map(Field::integral).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.norm_sq().max().max(0.0).sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_comps(|f| f.scale(c))
    }

    /// Multiply every component by a scalar field, pointwise.
    pub fn scale_by(&self, s: &Field) -> Self {
        self.map_comps(|f| f * s)
    }
}

/// Spectral coefficients under the module normalization.
pub fn transform_forward(f: &Field) -> Vec<Complex64> {
    f.spectrum().to_vec()
}

pub fn transform_inverse(grid: &PeriodicGrid, coeffs: &[Complex64]) -> Field {
    Field::from_spectrum(grid, coeffs)
}

/// Partial derivative along `axis`; the Nyquist mode of that axis is zeroed.
pub fn partial(f: &Field, axis: usize) -> Field {
    let grid = f.grid().clone();
    f.apply_multiplier(|i| {
        if grid.is_nyquist(i, axis) {
            Complex64::default()
        } else {
            Complex64::new(0.0, grid.wavevector(i)[axis])
        }
    })
}

pub fn spectral_gradient(f: &Field) -> VectorField {
    VectorField::raw((0..f.grid().dim()).map(|a| partial(f, a)).collect())
}

pub fn spectral_divergence(v: &VectorField) -> Field {
    let mut parts = v.comps().iter().enumerate().map(|(a, c)| partial(c, a));
    let first = parts.next().expect("vector field has at least one component");
    parts.fold(first, |acc, p| &acc + &p)
}

pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid().clone();
    f.apply_multiplier(|i| {
        let k = grid.wavenumber_norm(i);
        Complex64::new(-k * k, 0.0)
    })
}

fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > -2.0 && s < 2.0 {
        Ok(())
    } else {
        Err(RelaxError::Range {
            what: "fractional order s",
            value: s,
            range: "(-2, 2)".into(),
        })
    }
}

/// Multiplier `|ξ|^s` for ξ ≠ 0; the zero mode maps to 0 for s ≤ 0 and is
/// left untouched (multiplied by `0^s = 0`) otherwise.
pub(crate) fn frac_multiplier(grid: &PeriodicGrid, i: usize, s: f64) -> f64 {
    let k = grid.wavenumber_norm(i);
    if k == 0.0 {
        0.0
    } else {
        k.powf(s)
    }
}

/// `Λ^s f = (-Δ)^{s/2} f`, s ∈ (−2, 2).
pub fn fractional_laplacian(f: &Field, s: f64) -> Result<Field> {
    check_order(s)?;
    let grid = f.grid().clone();
    Ok(f.apply_multiplier(|i| Complex64::new(frac_multiplier(&grid, i, s), 0.0)))
}

/// Admissible Riesz exponents: `α − d ∈ (−2, 0)` and `α > 0`.
pub fn check_alpha(alpha: f64, dim: usize) -> Result<()> {
    let d = dim as f64;
    let lo = (d - 2.0).max(0.0);
    if alpha.is_finite() && alpha > lo && alpha < d {
        Ok(())
    } else {
        Err(RelaxError::Range {
            what: "alpha",
            value: alpha,
            range: format!("({lo}, {d})"),
        })
    }
}

/// `∇Λ^{α−d} ρ`, the interaction force per unit density (without `c_K`).
pub fn riesz_force(rho: &Field, alpha: f64) -> Result<VectorField> {
    let dim = rho.grid().dim();
    check_alpha(alpha, dim)?;
    let potential = fractional_laplacian(rho, alpha - dim as f64)?;
    Ok(spectral_gradient(&potential))
}

/// Largest retained |k| per axis under the two-thirds rule.
pub fn dealias_cutoff(grid: &PeriodicGrid) -> i64 {
    grid.n() as i64 / 3
}

/// Zero every coefficient with some `|k_axis| > n/3`.
pub fn dealias(f: &Field) -> Field {
    let grid = f.grid().clone();
    let cut = dealias_cutoff(&grid);
    f.apply_multiplier(|i| {
        let k = grid.mode(i);
        if k[0].abs() > cut || k[1].abs() > cut {
            Complex64::default()
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Pointwise product followed by two-thirds dealiasing.
pub fn dealiased_product(a: &Field, b: &Field) -> Field {
    dealias(&(a * b))
}
