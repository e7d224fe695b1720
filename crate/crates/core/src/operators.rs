//! Spatial operators of the advective Cahn–Hilliard equation
//!
//! ```text
//! u_t + A v₁(y) ∂ₓu + ε Δ²u = Δ(a u³ + b u² + c u)            (original form)
//! u_t +   v₁(y) ∂ₓu + εγ Δ²u = γ Δ(a u³ + b u² + c u),  γ = 1/A  (rescaled form)
//! ```
//!
//! Products are formed in physical space from 2/3-dealiased input and the
//! result is dealiased again.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Field, MeanFluctPair, TorusGrid, Transformer, YProfile};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which of the two equivalent forms of the equation is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EquationForm {
    /// Shear amplitude 1, hyperdiffusion εγ, nonlinearity weighted by γ.
    #[default]
    Rescaled,
    /// Shear amplitude A = 1/γ, hyperdiffusion ε, unit nonlinearity.
    Original,
}

/// Coefficients of the equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub form: EquationForm,
}

impl PhysicalParams {
    pub fn new(epsilon: f64, gamma: f64, a: f64, b: f64, c: f64, form: EquationForm) -> Result<Self> {
        let p = Self {
            epsilon,
            gamma,
            a,
            b,
            c,
            form,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pure advection–hyperdiffusion (a = b = c = 0) in rescaled form.
    pub fn linear(epsilon: f64, gamma: f64) -> Result<Self> {
        Self::new(epsilon, gamma, 0.0, 0.0, 0.0, EquationForm::Rescaled)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Shear amplitude multiplying `v₁(y) ∂ₓ`.
    pub fn advection_amplitude(&self) -> f64 {
        match self.form {
            EquationForm::Rescaled => 1.0,
            EquationForm::Original => 1.0 / self.gamma,
        }
    }

    /// Weight of the nonlinear flux.
    pub fn nonlinear_weight(&self) -> f64 {
        match self.form {
            EquationForm::Rescaled => self.gamma,
            EquationForm::Original => 1.0,
        }
    }

    /// Coefficient of Δ².
    pub fn hyperdiffusivity(&self) -> f64 {
        self.epsilon * self.nonlinear_weight()
    }

    pub fn is_linear(&self) -> bool {
        self.a == 0.0 && self.b == 0.0 && self.c == 0.0
    }

    /// Same coefficients with a = b = c = 0.
    pub fn linearized(&self) -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            ..*self
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Cosine,
    SineCubed,
    Constant,
    Zero,
    Sampled {
        samples: Vec<f64>,
        coeffs: Vec<Complex64>,
    },
}

/// A shear profile `v₁(y)` with its declared critical-point order `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShearProfile {
    name: String,
    shape: Shape,
    critical_order: u32,
    max_abs: f64,
    max_slope: f64,
}

impl ShearProfile {
    /// `v₁ = cos y`: two nondegenerate critical points, m = 2.
    pub fn cosine() -> Self {
        Self {
            name: "cosine".into(),
            shape: Shape::Cosine,
            critical_order: 2,
            max_abs: 1.0,
            max_slope: 1.0,
        }
    }

    /// `v₁ = sin³ y`: third-order critical points at y ∈ {0, π}, m = 3.
    pub fn sine_cubed() -> Self {
        Self {
            name: "sine-cubed".into(),
            shape: Shape::SineCubed,
            critical_order: 3,
            max_abs: 1.0,
            // max |3 sin²y cos y| at sin²y = 2/3
            max_slope: 2.0 / 3f64.sqrt(),
        }
    }

    /// `v₁ ≡ 1`: rigid translation, no mixing.
    pub fn constant() -> Self {
        Self {
            name: "constant".into(),
            shape: Shape::Constant,
            critical_order: 2,
            max_abs: 1.0,
            max_slope: 0.0,
        }
    }

    /// `v₁ ≡ 0`.
    pub fn none() -> Self {
        Self {
            name: "none".into(),
            shape: Shape::Zero,
            critical_order: 2,
            max_abs: 0.0,
            max_slope: 0.0,
        }
    }

    /// Profile given by equispaced samples on `[0, 2π)`, evaluated off-grid
    /// by trigonometric interpolation.
    pub fn from_samples(name: &str, samples: Vec<f64>, critical_order: u32) -> Result<Self> {
        if critical_order < 2 {
            return Err(Error::InvalidParameter(format!(
                "critical-point order must be >= 2, got {critical_order}"
            )));
        }
        if samples.len() < 4 || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "shear profile needs at least 4 finite samples".into(),
            ));
        }
        let n = samples.len();
        let mut coeffs: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut coeffs);
        coeffs.iter_mut().for_each(|c| *c /= n as f64);
        let mut profile = Self {
            name: name.into(),
            shape: Shape::Sampled { samples, coeffs },
            critical_order,
            max_abs: 0.0,
            max_slope: 0.0,
        };
        let fine = 16 * n;
        for j in 0..fine {
            let y = 2.0 * PI * j as f64 / fine as f64;
            profile.max_abs = profile.max_abs.max(profile.eval(y).abs());
            profile.max_slope = profile.max_slope.max(profile.eval_derivative(y).abs());
        }
        Ok(profile)
    }

    /// Reads one sample per line; blank lines and `#` comments are skipped.
    pub fn load(path: &Path, critical_order: u32) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::Format(format!(
                    "{}:{}: expected a number, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            samples.push(v);
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("custom")
            .to_string();
        Self::from_samples(&name, samples, critical_order)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Declared critical-point order `m`.
    pub fn critical_order(&self) -> u32 {
        self.critical_order
    }

    /// Predicted enhanced-dissipation exponent `2 / (2 + m)`.
    pub fn predicted_exponent(&self) -> f64 {
        2.0 / (2.0 + self.critical_order as f64)
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// `‖v₁'‖_∞`.
    pub fn max_slope(&self) -> f64 {
        self.max_slope
    }

    /// `‖v₁‖_{W^{1,∞}} = ‖v₁‖_∞ + ‖v₁'‖_∞`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.max_abs + self.max_slope
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero) || self.max_abs == 0.0
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.shape {
            Shape::Cosine => y.cos(),
            Shape::SineCubed => y.sin().powi(3),
            Shape::Constant => 1.0,
            Shape::Zero => 0.0,
            Shape::Sampled { coeffs, .. } => trig_interp(coeffs, y, false),
        }
    }

    fn eval_derivative(&self, y: f64) -> f64 {
        match &self.shape {
            Shape::Cosine => -y.sin(),
            Shape::SineCubed => 3.0 * y.sin().powi(2) * y.cos(),
            Shape::Constant | Shape::Zero => 0.0,
            Shape::Sampled { coeffs, .. } => trig_interp(coeffs, y, true),
        }
    }

    /// Values at `y_j = 2πj/ny`.
    pub fn sample(&self, ny: usize) -> Vec<f64> {
        if let Shape::Sampled { samples, .. } = &self.shape {
            if samples.len() == ny {
                return samples.clone();
            }
        }
        (0..ny)
            .map(|j| self.eval(2.0 * PI * j as f64 / ny as f64))
            .collect()
    }
}

/// Evaluates the real trigonometric interpolant (or its derivative) of DFT
/// coefficients; the Nyquist mode contributes `cos(n y / 2)`.
fn trig_interp(coeffs: &[Complex64], y: f64, derivative: bool) -> f64 {
    let n = coeffs.len();
    let mut sum = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        if n.is_multiple_of(2) && i == n / 2 {
            sum += if derivative {
                -c.re * k * (k * y).sin()
            } else {
                c.re * (k * y).cos()
            };
            continue;
        }
        let phase = Complex64::from_polar(1.0, k * y);
        let term = if derivative {
            c * phase * Complex64::new(0.0, k)
        } else {
            c * phase
        };
        sum += term.re;
    }
    sum
}

/// Evaluates the explicit (non-stiff) part of the tendency on raw
/// coefficient arrays:
///
/// ```text
/// F(u) = −A v₁(y) ∂ₓu + w Δ(a u³ + b u² + c u)
/// ```
///
/// Owns all transform scratch, so one instance per worker.
pub struct ExplicitTerms {
    grid: Arc<TorusGrid>,
    tf: Transformer,
    /// `A · v₁(y_j)`, or `None` when there is no advection.
    shear: Option<Vec<f64>>,
    weight: f64,
    a: f64,
    b: f64,
    c: f64,
    ikx: Vec<f64>,
    active_columns: Vec<usize>,
    buf: Vec<Complex64>,
    p_hat: Vec<Complex64>,
    q_hat: Vec<Complex64>,
    cols: Vec<Complex64>,
    col_scratch: Vec<Complex64>,
}

impl ExplicitTerms {
    pub fn new(grid: &Arc<TorusGrid>, params: &PhysicalParams, shear: &ShearProfile) -> Self {
        let samples = (!shear.is_zero()).then(|| {
            let amp = params.advection_amplitude();
            shear.sample(grid.ny()).into_iter().map(|v| amp * v).collect()
        });
        Self::from_parts(grid, samples, params.nonlinear_weight(), params.a, params.b, params.c)
    }

    /// `shear` holds `A·v₁(y_j)` directly.
    pub fn from_parts(
        grid: &Arc<TorusGrid>,
        shear: Option<Vec<f64>>,
        weight: f64,
        a: f64,
        b: f64,
        c: f64,
    ) -> Self {
        let nx = grid.nx();
        let ny = grid.ny();
        let ikx = grid
            .kx_table()
            .iter()
            .map(|&k| if k == (nx / 2) as i64 { 0.0 } else { k as f64 })
            .collect();
        let active_columns: Vec<usize> = (0..nx)
            .filter(|&i| {
                let k = grid.kx_table()[i];
                k != 0 && 3 * k.unsigned_abs() as usize <= nx
            })
            .collect();
        let len = grid.len();
        let col_scratch_len = grid
            .fft_y()
            .get_inplace_scratch_len()
            .max(grid.ifft_y().get_inplace_scratch_len());
        Self {
            grid: Arc::clone(grid),
            tf: Transformer::new(grid),
            shear,
            weight,
            a,
            b,
            c,
            ikx,
            cols: vec![ZERO; active_columns.len() * ny],
            active_columns,
            buf: vec![ZERO; len],
            p_hat: vec![ZERO; len],
            q_hat: vec![ZERO; len],
            col_scratch: vec![ZERO; col_scratch_len],
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn has_shear(&self) -> bool {
        self.shear.is_some()
    }

    pub fn has_nonlinearity(&self) -> bool {
        self.a != 0.0 || self.b != 0.0 || self.c != 0.0
    }

    /// True when `F ≡ 0`.
    pub fn is_trivial(&self) -> bool {
        !self.has_shear() && !self.has_nonlinearity()
    }

    /// Writes `F(u)` into `out`. When `flux` is given it receives the bare
    /// flux `Δ(a u³ + b u² + c u)` (without the weight `w`).
    pub fn eval(&mut self, u: &[Complex64], out: &mut [Complex64], flux: Option<&mut [Complex64]>) {
        if self.has_nonlinearity() {
            self.eval_full(u, out, flux);
        } else {
            if let Some(f) = flux {
                f.fill(ZERO);
            }
            if self.has_shear() {
                self.advection_mixed(u, out);
            } else {
                out.fill(ZERO);
            }
        }
    }

    /// Both terms through one packed inverse and one packed forward FFT.
    fn eval_full(&mut self, u: &[Complex64], out: &mut [Complex64], flux: Option<&mut [Complex64]>) {
        let grid = Arc::clone(&self.grid);
        let nx = grid.nx();
        let mask = grid.mask();
        let shear = self.shear.as_deref();
        // z = u + i ∂ₓu
        for idx in 0..u.len() {
            self.buf[idx] = if mask[idx] {
                match shear {
                    Some(_) => {
                        let k = self.ikx[idx % nx];
                        // u + i·(i k u) = (1 - k) u
                        u[idx] * (1.0 - k)
                    }
                    None => u[idx],
                }
            } else {
                ZERO
            };
        }
        self.tf.inverse(&mut self.buf);
        let (a, b, c) = (self.a, self.b, self.c);
        for (idx, z) in self.buf.iter_mut().enumerate() {
            let v = z.re;
            let adv = match shear {
                Some(s) => -s[idx / nx] * z.im,
                None => 0.0,
            };
            let nl = ((a * v + b) * v + c) * v;
            *z = Complex64::new(adv, nl);
        }
        self.tf
            .forward_pair(&mut self.buf, &mut self.p_hat, &mut self.q_hat);
        let k2 = grid.k2_table();
        let w = self.weight;
        let mut flux = flux;
        for idx in 0..out.len() {
            if !mask[idx] {
                out[idx] = ZERO;
                if let Some(f) = flux.as_deref_mut() {
                    f[idx] = ZERO;
                }
                continue;
            }
            let lap_q = self.q_hat[idx] * (-k2[idx]);
            // v₁(y)∂ₓu has no kx = 0 content
            let adv = if idx % nx == 0 { ZERO } else { self.p_hat[idx] };
            out[idx] = adv + lap_q * w;
            if let Some(f) = flux.as_deref_mut() {
                f[idx] = lap_q;
            }
        }
    }

    /// `out = −A v₁(y) ∂ₓu` in the mixed (kx, y) representation: only
    /// 1D transforms in y over the resolved kx ≠ 0 columns.
    fn advection_mixed(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        let Some(shear) = self.shear.as_deref() else {
            out.fill(ZERO);
            return;
        };
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let mask = self.grid.mask();
        for (c, &ix) in self.active_columns.iter().enumerate() {
            let k = self.ikx[ix];
            let col = &mut self.cols[c * ny..(c + 1) * ny];
            for (j, slot) in col.iter_mut().enumerate() {
                let idx = j * nx + ix;
                *slot = if mask[idx] {
                    u[idx] * Complex64::new(0.0, k)
                } else {
                    ZERO
                };
            }
        }
        if self.cols.is_empty() {
            out.fill(ZERO);
            return;
        }
        self.grid
            .ifft_y()
            .process_with_scratch(&mut self.cols, &mut self.col_scratch);
        let norm = 1.0 / ny as f64;
        for col in self.cols.chunks_exact_mut(ny) {
            for (j, z) in col.iter_mut().enumerate() {
                *z *= -shear[j] * norm;
            }
        }
        self.grid
            .fft_y()
            .process_with_scratch(&mut self.cols, &mut self.col_scratch);
        out.fill(ZERO);
        for (c, &ix) in self.active_columns.iter().enumerate() {
            let col = &self.cols[c * ny..(c + 1) * ny];
            for (j, z) in col.iter().enumerate() {
                let idx = j * nx + ix;
                if mask[idx] {
                    out[idx] = *z;
                }
            }
        }
    }
}

/// Multiplier for the signed integer power `Δⁿ`: `(−|k|²)ⁿ`.
fn signed_laplacian_multiplier(k2: f64, n: i32) -> f64 {
    if k2 == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-k2).powi(n)
}

/// `Δⁿ f` for integer `n` (signed; `n < 0` inverts on mean-zero data).
pub fn apply_laplacian(f: &Field, n: i32) -> Result<Field> {
    let grid = f.grid();
    let c = f.coeffs();
    if n < 0 {
        check_mean_zero(&c)?;
    }
    let out = c
        .iter()
        .zip(grid.k2_table())
        .map(|(c, &k2)| c * signed_laplacian_multiplier(k2, n))
        .collect();
    Field::from_spectral(grid, out)
}

/// `(−Δ)^p f` for real `p`, multiplier `|k|^{2p}` (`p < 0` needs mean-zero data).
pub fn apply_laplacian_power(f: &Field, p: f64) -> Result<Field> {
    let grid = f.grid();
    let c = f.coeffs();
    if p < 0.0 {
        check_mean_zero(&c)?;
    }
    let out = c
        .iter()
        .zip(grid.k2_table())
        .map(|(c, &k2)| {
            if k2 == 0.0 {
                if p == 0.0 {
                    *c
                } else {
                    ZERO
                }
            } else {
                c * k2.powf(p)
            }
        })
        .collect();
    Field::from_spectral(grid, out)
}

fn check_mean_zero(c: &[Complex64]) -> Result<()> {
    if c[0].norm() > crate::spectral::MEAN_TOLERANCE {
        return Err(Error::NonZeroMean {
            mean: c[0].re,
            tolerance: crate::spectral::MEAN_TOLERANCE,
        });
    }
    Ok(())
}

/// `amplitude · v₁(y) · ∂ₓu`.
pub fn shear_advect(u: &Field, v: &ShearProfile, amplitude: f64) -> Field {
    let grid = u.grid();
    let samples: Vec<f64> = v.sample(grid.ny()).into_iter().map(|s| amplitude * s).collect();
    let mut terms = ExplicitTerms::from_parts(grid, Some(samples), 0.0, 0.0, 0.0, 0.0);
    let mut out = vec![ZERO; grid.len()];
    terms.advection_mixed(&u.coeffs(), &mut out);
    // the kernel returns −A v ∂ₓu
    out.iter_mut().for_each(|c| *c = -*c);
    Field::from_spectral(grid, out).expect("grid-sized buffer")
}

/// `Δ(a u³ + b u² + c u)`.
pub fn nonlinear_flux(u: &Field, p: &PhysicalParams) -> Field {
    let grid = u.grid();
    let mut terms = ExplicitTerms::from_parts(grid, None, 1.0, p.a, p.b, p.c);
    let mut out = vec![ZERO; grid.len()];
    if terms.has_nonlinearity() {
        let mut flux = vec![ZERO; grid.len()];
        terms.eval_full(&u.coeffs(), &mut out, Some(&mut flux));
        return Field::from_spectral(grid, flux).expect("grid-sized buffer");
    }
    Field::from_spectral(grid, out).expect("grid-sized buffer")
}

/// Full tendency `u_t = −A v₁ ∂ₓu − εw Δ²u + w Δ(a u³ + b u² + c u)`.
pub fn rhs(u: &Field, p: &PhysicalParams, v: &ShearProfile) -> Field {
    let grid = u.grid();
    let mut terms = ExplicitTerms::new(grid, p, v);
    let uc = u.coeffs();
    let mut out = vec![ZERO; grid.len()];
    terms.eval(&uc, &mut out, None);
    let nu = p.hyperdiffusivity();
    for ((o, c), &k2) in out.iter_mut().zip(uc.iter()).zip(grid.k2_table()) {
        *o -= c * (nu * k2 * k2);
    }
    Field::from_spectral(grid, out).expect("grid-sized buffer")
}

/// Right side of the evolution equation for the x-average,
///
/// ```text
/// ∂ₜ⟨u⟩ = −εw ∂ᵧ⁴⟨u⟩ + w ⟨Δ[a(⟨u⟩+u_∦)³ + b(⟨u⟩+u_∦)² + c(⟨u⟩+u_∦)]⟩,
/// ```
///
/// evaluated from the two parts directly with 1D transforms only.
pub fn averaged_rhs(pair: &MeanFluctPair, p: &PhysicalParams) -> Result<YProfile> {
    let grid = pair.fluct_part.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    if pair.mean_part.ny() != ny {
        return Err(Error::DimensionMismatch {
            expected: ny,
            got: pair.mean_part.ny(),
        });
    }
    let ky_keep = |ky: i64| 3 * ky.unsigned_abs() as usize <= ny;
    let ky_table = grid.ky_table();
    let mean_dealiased = YProfile {
        coeffs: pair
            .mean_part
            .coeffs
            .iter()
            .zip(ky_table)
            .map(|(c, &ky)| if ky_keep(ky) { *c } else { ZERO })
            .collect(),
    };
    let mean_vals = mean_dealiased.values();
    let fluct_vals = pair.fluct_part.dealias().values().into_owned();

    let mut avg: Vec<Complex64> = (0..ny)
        .map(|j| {
            let row = &fluct_vals[j * nx..(j + 1) * nx];
            let s: f64 = row
                .iter()
                .map(|&f| {
                    let w = mean_vals[j] + f;
                    ((p.a * w + p.b) * w + p.c) * w
                })
                .sum();
            Complex64::new(s / nx as f64, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(ny).process(&mut avg);
    let w = p.nonlinear_weight();
    let nu = p.hyperdiffusivity();
    let coeffs = avg
        .iter()
        .zip(mean_dealiased.coeffs.iter())
        .zip(ky_table)
        .map(|((n, m), &ky)| {
            if !ky_keep(ky) {
                return ZERO;
            }
            let k2 = (ky * ky) as f64;
            n / ny as f64 * (-k2 * w) - m * (nu * k2 * k2)
        })
        .collect();
    Ok(YProfile { coeffs })
}

/// Landau–Ginzburg free energy
/// `∫ (a u⁴/4 + b u³/3) + (κ/2) |∇u|²` with gradient coefficient `κ`.
pub fn free_energy(u: &Field, p: &PhysicalParams, grad_coeff: f64) -> f64 {
    let grid = u.grid();
    let potential: f64 = u
        .values()
        .iter()
        .map(|&v| {
            let v2 = v * v;
            p.a * v2 * v2 / 4.0 + p.b * v2 * v / 3.0
        })
        .sum::<f64>()
        * grid.cell_area();
    let gradient = if grad_coeff == 0.0 {
        0.0
    } else {
        crate::spectral::sobolev_norm_sq(grid, &u.coeffs(), 1.0).expect("s > 0 has no precondition")
    };
    potential + 0.5 * grad_coeff * gradient
}

/// Same as [`free_energy`] on raw coefficients plus their physical samples.
pub(crate) fn free_energy_raw(
    grid: &TorusGrid,
    coeffs: &[Complex64],
    values: &[f64],
    p: &PhysicalParams,
    grad_coeff: f64,
) -> f64 {
    let potential: f64 = values
        .iter()
        .map(|&v| {
            let v2 = v * v;
            p.a * v2 * v2 / 4.0 + p.b * v2 * v / 3.0
        })
        .sum::<f64>()
        * grid.cell_area();
    let gradient = crate::spectral::sobolev_norm_sq(grid, coeffs, 1.0).unwrap_or(0.0);
    potential + 0.5 * grad_coeff * gradient
}
