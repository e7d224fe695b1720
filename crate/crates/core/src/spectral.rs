//! Discrete function spaces on the 2π-periodic torus.
//!
//! A [`TorusGrid`] fixes the resolution, the integer wavenumber tables and
//! the 2/3-rule dealias mask. A [`Field`] is a real scalar on that grid,
//! held either as physical samples or as Fourier coefficients
//!
//! ```text
//! f̂_k = (2π)⁻² ∫ f(x) e^{-i k·x} dx  ≈  (nx·ny)⁻¹ Σ_j f(x_j) e^{-i k·x_j}
//! ```
//!
//! Storage is row-major with y outer: value `(i, j)` (x index `i`, y index
//! `j`) lives at `j * nx + i`, and coefficient `(kx, ky)` at the same slot
//! of the FFT-ordered wavenumber tables.
//!
//! All norms use the integral convention, so `‖f‖²_{L²} = (2π)² Σ_k |f̂_k|²`.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Absolute tolerance on the k = 0 coefficient for operations that need
/// mean-zero data.
pub const MEAN_TOLERANCE: f64 = 1e-10;

/// (2π)², the area of the torus.
pub const TORUS_AREA: f64 = 4.0 * PI * PI;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Uniform grid on `[0, 2π)²` with its transform plans.
pub struct TorusGrid {
    nx: usize,
    ny: usize,
    kx: Vec<i64>,
    ky: Vec<i64>,
    k2: Vec<f64>,
    mask: Vec<bool>,
    neg: Vec<usize>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }
}

/// FFT-ordered integer wavenumbers `0, 1, …, n/2, -n/2+1, …, -1`.
fn wavenumbers(n: usize) -> Vec<i64> {
    (0..n)
        .map(|i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
        .collect()
}

impl TorusGrid {
    /// Builds an `nx × ny` grid. Both sizes must be even and at least 8.
    pub fn new(nx: usize, ny: usize) -> Result<Arc<Self>> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n}; sizes must be even and >= 8"
                )));
            }
        }
        let kx = wavenumbers(nx);
        let ky = wavenumbers(ny);
        let len = nx * ny;
        let mut k2 = Vec::with_capacity(len);
        let mut mask = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b) = (kx[i], ky[j]);
                k2.push((a * a + b * b) as f64);
                // 2/3 rule: keep |kx| <= nx/3 and |ky| <= ny/3.
                mask.push(3 * a.unsigned_abs() as usize <= nx && 3 * b.unsigned_abs() as usize <= ny);
                neg.push(((ny - j) % ny) * nx + (nx - i) % nx);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            nx,
            ny,
            kx,
            ky,
            k2,
            mask,
            neg,
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of grid points (and of Fourier modes).
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumber tables in FFT order.
    pub fn kx_table(&self) -> &[i64] {
        &self.kx
    }

    pub fn ky_table(&self) -> &[i64] {
        &self.ky
    }

    /// `(kx, ky)` of the coefficient stored at `idx`.
    pub fn wavevector(&self, idx: usize) -> (i64, i64) {
        (self.kx[idx % self.nx], self.ky[idx / self.nx])
    }

    /// `|k|²` for every slot.
    pub fn k2_table(&self) -> &[f64] {
        &self.k2
    }

    /// Dealias mask: `true` for resolved (kept) modes.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Slot holding the coefficient of `-k` for the mode at `idx`.
    pub fn negated(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    /// Storage slot of wavevector `(kx, ky)`, if it is representable.
    pub fn mode_index(&self, kx: i64, ky: i64) -> Option<usize> {
        let slot = |k: i64, n: usize| -> Option<usize> {
            let half = (n / 2) as i64;
            if k > half || k <= -half {
                None
            } else if k >= 0 {
                Some(k as usize)
            } else {
                Some((k + n as i64) as usize)
            }
        };
        Some(slot(ky, self.ny)? * self.nx + slot(kx, self.nx)?)
    }

    /// Largest |kx| kept by the dealias mask.
    pub fn kx_resolved(&self) -> i64 {
        (self.nx / 3) as i64
    }

    /// Largest |ky| kept by the dealias mask.
    pub fn ky_resolved(&self) -> i64 {
        (self.ny / 3) as i64
    }

    pub fn x(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.ny as f64
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * PI / self.ny as f64
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_area(&self) -> f64 {
        TORUS_AREA / self.len() as f64
    }

    /// Smallest positive eigenvalue of `-Δ` represented on the grid.
    pub fn lambda_1(&self) -> f64 {
        1.0
    }

    pub(crate) fn fft_y(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_y
    }

    pub(crate) fn ifft_y(&self) -> &Arc<dyn Fft<f64>> {
        &self.ifft_y
    }
}

/// Owns the scratch space for 2D transforms on one grid.
///
/// Each worker thread should hold its own `Transformer`.
pub struct Transformer {
    grid: Arc<TorusGrid>,
    scratch: Vec<Complex64>,
    columns: Vec<Complex64>,
}

impl Transformer {
    pub fn new(grid: &Arc<TorusGrid>) -> Self {
        let scratch_len = [
            grid.fft_x.get_inplace_scratch_len(),
            grid.ifft_x.get_inplace_scratch_len(),
            grid.fft_y.get_inplace_scratch_len(),
            grid.ifft_y.get_inplace_scratch_len(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        Self {
            grid: Arc::clone(grid),
            scratch: vec![ZERO; scratch_len],
            columns: vec![ZERO; grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    fn transform(&mut self, buf: &mut [Complex64], inverse: bool) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert_eq!(buf.len(), nx * ny);
        let (fx, fy) = if inverse {
            (&self.grid.ifft_x, &self.grid.ifft_y)
        } else {
            (&self.grid.fft_x, &self.grid.fft_y)
        };
        fx.process_with_scratch(buf, &mut self.scratch);
        for j in 0..ny {
            for i in 0..nx {
                self.columns[i * ny + j] = buf[j * nx + i];
            }
        }
        fy.process_with_scratch(&mut self.columns, &mut self.scratch);
        for i in 0..nx {
            for j in 0..ny {
                buf[j * nx + i] = self.columns[i * ny + j];
            }
        }
    }

    /// Physical samples to normalized coefficients, in place.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.transform(buf, false);
        let norm = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= norm);
    }

    /// Coefficients to physical samples, in place.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    pub fn forward_real(&mut self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn inverse_real(&mut self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Transforms two real fields with one complex FFT.
    ///
    /// `buf` holds `p + i q` on entry; on exit `p_hat` and `q_hat` hold the
    /// coefficients of `p` and `q`. `buf` is clobbered.
    pub fn forward_pair(
        &mut self,
        buf: &mut [Complex64],
        p_hat: &mut [Complex64],
        q_hat: &mut [Complex64],
    ) {
        self.forward(buf);
        for idx in 0..buf.len() {
            let z = buf[idx];
            let zn = buf[self.grid.neg[idx]].conj();
            p_hat[idx] = (z + zn) * 0.5;
            // (z - zn) / (2i)
            let d = (z - zn) * 0.5;
            q_hat[idx] = Complex64::new(d.im, -d.re);
        }
    }
}

/// Which representation of a [`Field`] is current.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Physical,
    Spectral,
}

#[derive(Clone, Debug, PartialEq)]
enum Data {
    Physical(Vec<f64>),
    Spectral(Vec<Complex64>),
}

/// A real scalar field on a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Arc<TorusGrid>,
    data: Data,
}

impl Field {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            data: Data::Spectral(vec![ZERO; grid.len()]),
        }
    }

    pub fn from_physical(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            data: Data::Physical(values),
        })
    }

    /// Wraps Fourier coefficients. The caller is responsible for conjugate
    /// symmetry; [`Field::symmetrize`] enforces it.
    pub fn from_spectral(grid: &Arc<TorusGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            data: Data::Spectral(coeffs),
        })
    }

    /// Samples `f(x, y)` at the grid points.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        Self {
            grid: Arc::clone(grid),
            data: Data::Physical(values),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn view(&self) -> View {
        match self.data {
            Data::Physical(_) => View::Physical,
            Data::Spectral(_) => View::Spectral,
        }
    }

    pub fn to_spectral(&self) -> Field {
        match &self.data {
            Data::Spectral(_) => self.clone(),
            Data::Physical(v) => {
                let coeffs = Transformer::new(&self.grid).forward_real(v);
                Field {
                    grid: Arc::clone(&self.grid),
                    data: Data::Spectral(coeffs),
                }
            }
        }
    }

    pub fn to_physical(&self) -> Field {
        match &self.data {
            Data::Physical(_) => self.clone(),
            Data::Spectral(c) => {
                let values = Transformer::new(&self.grid).inverse_real(c);
                Field {
                    grid: Arc::clone(&self.grid),
                    data: Data::Physical(values),
                }
            }
        }
    }

    pub fn into_spectral(self) -> Field {
        match self.data {
            Data::Spectral(_) => self,
            Data::Physical(_) => self.to_spectral(),
        }
    }

    /// Fourier coefficients, transforming if needed.
    pub fn coeffs(&self) -> Cow<'_, [Complex64]> {
        match &self.data {
            Data::Spectral(c) => Cow::Borrowed(c),
            Data::Physical(v) => Cow::Owned(Transformer::new(&self.grid).forward_real(v)),
        }
    }

    /// Physical samples, transforming if needed.
    pub fn values(&self) -> Cow<'_, [f64]> {
        match &self.data {
            Data::Physical(v) => Cow::Borrowed(v),
            Data::Spectral(c) => Cow::Owned(Transformer::new(&self.grid).inverse_real(c)),
        }
    }

    /// Coefficient of wavevector `(kx, ky)` (zero if not representable).
    pub fn coeff(&self, kx: i64, ky: i64) -> Complex64 {
        self.grid
            .mode_index(kx, ky)
            .map(|idx| self.coeffs()[idx])
            .unwrap_or(ZERO)
    }

    /// Spatial average, i.e. the k = 0 coefficient.
    pub fn mean(&self) -> f64 {
        match &self.data {
            Data::Spectral(c) => c[0].re,
            Data::Physical(v) => v.iter().sum::<f64>() / v.len() as f64,
        }
    }

    /// Zeroes every mode outside the 2/3-rule mask.
    pub fn dealias(&self) -> Field {
        let mut c = self.coeffs().into_owned();
        for (c, &keep) in c.iter_mut().zip(self.grid.mask.iter()) {
            if !keep {
                *c = ZERO;
            }
        }
        Field {
            grid: Arc::clone(&self.grid),
            data: Data::Spectral(c),
        }
    }

    /// Replaces the coefficients by their conjugate-symmetric part, so
    /// the field is exactly real.
    pub fn symmetrize(&self) -> Field {
        let c = self.coeffs();
        let sym = (0..c.len())
            .map(|idx| (c[idx] + c[self.grid.neg[idx]].conj()) * 0.5)
            .collect();
        Field {
            grid: Arc::clone(&self.grid),
            data: Data::Spectral(sym),
        }
    }

    /// Largest deviation from conjugate symmetry, `max |f̂_k - conj(f̂_{-k})|`.
    pub fn symmetry_defect(&self) -> f64 {
        let c = self.coeffs();
        (0..c.len())
            .map(|idx| (c[idx] - c[self.grid.neg[idx]].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Homogeneous Sobolev norm `(2π)² Σ |k|^{2s} |f̂_k|²`, square-rooted.
    ///
    /// For `s = 0` the k = 0 mode counts with weight one, giving the plain
    /// L² norm. For `s < 0` the field must be mean-zero.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        sobolev_norm_sq(&self.grid, &self.coeffs(), s).map(f64::sqrt)
    }

    /// `‖f‖_{L²}`.
    pub fn l2_norm(&self) -> f64 {
        l2_norm_sq(&self.coeffs()).sqrt()
    }

    /// L² inner product `∫ f g`.
    pub fn inner(&self, other: &Field) -> f64 {
        inner(&self.coeffs(), &other.coeffs())
    }

    /// Splits `u` into its x-average and the remainder.
    pub fn split_mean_fluct(&self) -> MeanFluctPair {
        let nx = self.grid.nx;
        let mut fluct = self.coeffs().into_owned();
        let mut mean = Vec::with_capacity(self.grid.ny);
        for j in 0..self.grid.ny {
            mean.push(fluct[j * nx]);
            fluct[j * nx] = ZERO;
        }
        MeanFluctPair {
            mean_part: YProfile { coeffs: mean },
            fluct_part: Field {
                grid: Arc::clone(&self.grid),
                data: Data::Spectral(fluct),
            },
        }
    }

    /// Linear combination `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        check_same_grid(&self.grid, &other.grid)?;
        let (a, b) = (self.coeffs(), other.coeffs());
        let c = a.iter().zip(b.iter()).map(|(x, y)| x * alpha + y * beta).collect();
        Ok(Field {
            grid: Arc::clone(&self.grid),
            data: Data::Spectral(c),
        })
    }

    pub fn scale(&self, alpha: f64) -> Field {
        match &self.data {
            Data::Physical(v) => Field {
                grid: Arc::clone(&self.grid),
                data: Data::Physical(v.iter().map(|x| x * alpha).collect()),
            },
            Data::Spectral(c) => Field {
                grid: Arc::clone(&self.grid),
                data: Data::Spectral(c.iter().map(|x| x * alpha).collect()),
            },
        }
    }

    /// Relative L² distance `‖self - other‖ / ‖other‖` (absolute if
    /// `other` vanishes).
    pub fn relative_l2_distance(&self, other: &Field) -> Result<f64> {
        let diff = self.combine(1.0, other, -1.0)?.l2_norm();
        let reference = other.l2_norm();
        Ok(if reference > 0.0 { diff / reference } else { diff })
    }
}

pub(crate) fn check_same_grid(a: &Arc<TorusGrid>, b: &Arc<TorusGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}x{} vs {}x{}",
            a.nx, a.ny, b.nx, b.ny
        )))
    }
}

pub(crate) fn l2_norm_sq(coeffs: &[Complex64]) -> f64 {
    TORUS_AREA * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    TORUS_AREA * a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
}

/// Squared homogeneous Sobolev norm of raw coefficients.
pub fn sobolev_norm_sq(grid: &TorusGrid, coeffs: &[Complex64], s: f64) -> Result<f64> {
    if coeffs.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: coeffs.len(),
        });
    }
    if s < 0.0 && coeffs[0].norm() > MEAN_TOLERANCE {
        return Err(Error::NonZeroMean {
            mean: coeffs[0].re,
            tolerance: MEAN_TOLERANCE,
        });
    }
    let mut sum = if s == 0.0 { coeffs[0].norm_sqr() } else { 0.0 };
    for (c, &k2) in coeffs.iter().zip(grid.k2.iter()).skip(1) {
        sum += k2.powf(s) * c.norm_sqr();
    }
    Ok(TORUS_AREA * sum)
}

/// A function of y alone, stored as 1D Fourier coefficients (FFT order).
///
/// Used for the x-average `⟨u⟩(y) = (2π)⁻¹ ∫ u dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct YProfile {
    pub coeffs: Vec<Complex64>,
}

impl YProfile {
    pub fn ny(&self) -> usize {
        self.coeffs.len()
    }

    /// Samples at `y_j = 2πj/ny`.
    pub fn values(&self) -> Vec<f64> {
        let ny = self.ny();
        let mut buf = self.coeffs.clone();
        FftPlanner::new().plan_fft_inverse(ny).process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// `(∫ |f|² dy)^{1/2}` over one period.
    pub fn l2_norm(&self) -> f64 {
        (2.0 * PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// L² norm of `∫ u dx` rather than of the average; this is `2π` times
    /// [`YProfile::l2_norm`].
    pub fn l2_norm_integral_convention(&self) -> f64 {
        2.0 * PI * self.l2_norm()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// `⟨u⟩` and `u_∦ = u - ⟨u⟩`.
#[derive(Clone, Debug)]
pub struct MeanFluctPair {
    pub mean_part: YProfile,
    pub fluct_part: Field,
}

impl MeanFluctPair {
    /// `⟨u⟩ + u_∦` as a 2D field.
    pub fn reconstruct(&self) -> Field {
        let grid = self.fluct_part.grid();
        let nx = grid.nx();
        let mut c = self.fluct_part.coeffs().into_owned();
        for (j, m) in self.mean_part.coeffs.iter().enumerate() {
            c[j * nx] += m;
        }
        Field {
            grid: Arc::clone(grid),
            data: Data::Spectral(c),
        }
    }

    /// Largest kx = 0 coefficient left in the fluctuation (zero by construction).
    pub fn fluct_x_average_defect(&self) -> f64 {
        let grid = self.fluct_part.grid();
        let c = self.fluct_part.coeffs();
        (0..grid.ny())
            .map(|j| c[j * grid.nx()].norm())
            .fold(0.0, f64::max)
    }
}
