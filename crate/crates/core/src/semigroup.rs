//! Measurements on the linear problem: H⁻¹ mixing under pure transport,
//! the enhanced dissipation rate `λ_γ` of `H_γ = εγΔ² + v₁(y)∂ₓ`, and the
//! dissipation time.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use log::debug;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::Stepper;
use crate::operators::{PhysicalParams, ShearProfile};
use crate::spectral::{Field, TorusGrid, MEAN_TOLERANCE, TORUS_AREA};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Minimum number of samples in an exponential fit window.
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `amplitude · e^{−rate·t}`
    Exponential,
    /// `amplitude · (1 + t)^{−rate}`
    PowerLaw,
}

/// Least-squares fit on log-transformed data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub samples: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns
/// `(slope, intercept, r²)`. A perfectly flat `y` counts as r² = 1.
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if syy <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// Sampled norm history `‖g(tᵢ)‖`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

impl DecayCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, norm: f64) {
        self.times.push(t);
        self.norms.push(norm);
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self {
            times: pairs.iter().map(|p| p.0).collect(),
            norms: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Keeps the samples with `t` in `[t_lo, t_hi]`.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> DecayCurve {
        let mut out = DecayCurve::default();
        for (&t, &n) in self.times.iter().zip(&self.norms) {
            if t >= t_lo && t <= t_hi {
                out.push(t, n);
            }
        }
        out
    }
}

fn fit(curve: &DecayCurve, model: DecayModel, min_samples: usize) -> Result<DecayFit> {
    if curve.len() < min_samples {
        return Err(Error::WindowTooShort {
            found: curve.len(),
            needed: min_samples,
        });
    }
    if let Some(bad) = curve.norms.iter().find(|n| !(**n > 0.0 && n.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "decay curve must be strictly positive, found {bad}"
        )));
    }
    let x: Vec<f64> = match model {
        DecayModel::Exponential => curve.times.clone(),
        DecayModel::PowerLaw => curve.times.iter().map(|t| (1.0 + t).ln()).collect(),
    };
    let y: Vec<f64> = curve.norms.iter().map(|n| n.ln()).collect();
    let (slope, intercept, r_squared) = linear_regression(&x, &y);
    Ok(DecayFit {
        model,
        rate: -slope,
        amplitude: intercept.exp(),
        r_squared,
        t_lo: curve.times[0],
        t_hi: curve.t_end(),
        samples: curve.len(),
    })
}

/// Exponential fit on the tail window `[t_end/2, t_end]`.
pub fn estimate_lambda(curve: &DecayCurve) -> Result<DecayFit> {
    let t_end = curve.t_end();
    fit(&curve.window(0.5 * t_end, t_end), DecayModel::Exponential, MIN_FIT_SAMPLES)
}

/// Power-law fit `‖g‖ ≈ C (1 + t)^{−q}` over the whole curve.
pub fn fit_power_law(curve: &DecayCurve) -> Result<DecayFit> {
    fit(curve, DecayModel::PowerLaw, 3)
}

/// Exponential fit over the whole curve.
pub fn fit_exponential(curve: &DecayCurve) -> Result<DecayFit> {
    fit(curve, DecayModel::Exponential, 3)
}

/// 1D transforms in y for mixed-representation work.
struct ColumnFft {
    n: usize,
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
}

impl ColumnFft {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }
}

/// Copies a length-`ny` column spectrum into a length-`n` one (zero padding).
/// A Nyquist coefficient is split evenly between `±ny/2`.
fn pad_column(col: &[Complex64], n: usize) -> Vec<Complex64> {
    let ny = col.len();
    let mut out = vec![ZERO; n];
    for (j, c) in col.iter().enumerate() {
        let k = if j <= ny / 2 { j as i64 } else { j as i64 - ny as i64 };
        if j == ny / 2 && n > ny {
            out[ny / 2] += c * 0.5;
            out[n - ny / 2] += c * 0.5;
            continue;
        }
        let dst = if k >= 0 { k as usize } else { (n as i64 + k) as usize };
        out[dst] += c;
    }
    out
}

/// Applies `exp(−i kx A v₁(y) t)` to one column spectrum on an `m`-point grid.
fn transport_column(col: &mut [Complex64], kx: f64, phase_speed: &[f64], t: f64, plan: &ColumnFft) {
    plan.inv.process(col);
    let norm = 1.0 / plan.n as f64;
    for (z, &s) in col.iter_mut().zip(phase_speed) {
        *z *= Complex64::from_polar(norm, -kx * s * t);
    }
    plan.fwd.process(col);
}

/// Exact solution of `∂ₜg + amplitude·v₁(y)∂ₓg = 0` on the grid of `g0`:
/// each kx column is multiplied by `exp(−i kx A v₁(y) t)` pointwise in y.
///
/// Content pushed beyond the grid's y-resolution aliases; use
/// [`transport_norm`] for norms at large `t`.
pub fn transport_solution(g0: &Field, v: &ShearProfile, amplitude: f64, t: f64) -> Field {
    let grid = g0.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let c = g0.coeffs();
    let plan = ColumnFft::new(ny);
    let speed: Vec<f64> = v.sample(ny).into_iter().map(|s| amplitude * s).collect();
    let mut out = c.to_vec();
    let mut col = vec![ZERO; ny];
    for ix in 0..nx {
        let kx = grid.kx_table()[ix] as f64;
        if kx == 0.0 {
            continue;
        }
        for j in 0..ny {
            col[j] = c[j * nx + ix];
        }
        if col.iter().all(|z| *z == ZERO) {
            continue;
        }
        transport_column(&mut col, kx, &speed, t, &plan);
        for j in 0..ny {
            out[j * nx + ix] = col[j];
        }
    }
    Field::from_spectral(grid, out).expect("grid-sized buffer")
}

/// Number of y points that resolves the transported data at time `t`.
fn refined_ny(g0: &Field, v: &ShearProfile, amplitude: f64, t: f64) -> usize {
    let grid = g0.grid();
    let c = g0.coeffs();
    let (mut kx_max, mut ky_max) = (0i64, 0i64);
    for (idx, z) in c.iter().enumerate() {
        if z.norm() > 0.0 {
            let (kx, ky) = grid.wavevector(idx);
            kx_max = kx_max.max(kx.abs());
            ky_max = ky_max.max(ky.abs());
        }
    }
    let band = kx_max as f64 * amplitude.abs() * v.max_slope() * t.abs() + ky_max as f64;
    let need = (4.0 * band).ceil() as usize;
    need.max(grid.ny()).next_power_of_two()
}

/// `‖e^{−t A v₁ ∂ₓ} g0‖_{Ḣˢ}` evaluated on a y-grid refined so that the
/// transported spectrum is resolved.
pub fn transport_norm(g0: &Field, v: &ShearProfile, amplitude: f64, t: f64, s: f64) -> Result<f64> {
    let grid = g0.grid();
    let c = g0.coeffs();
    if s < 0.0 && c[0].norm() > MEAN_TOLERANCE {
        return Err(Error::NonZeroMean {
            mean: c[0].re,
            tolerance: MEAN_TOLERANCE,
        });
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let m = refined_ny(g0, v, amplitude, t);
    let plan = ColumnFft::new(m);
    let speed: Vec<f64> = (0..m)
        .map(|j| amplitude * v.eval(2.0 * PI * j as f64 / m as f64))
        .collect();
    let mut total = 0.0;
    let mut col = vec![ZERO; ny];
    for ix in 0..nx {
        for j in 0..ny {
            col[j] = c[j * nx + ix];
        }
        if col.iter().all(|z| *z == ZERO) {
            continue;
        }
        let kx = grid.kx_table()[ix] as f64;
        let mut fine = pad_column(&col, m);
        if kx != 0.0 {
            transport_column(&mut fine, kx, &speed, t, &plan);
        }
        for (j, z) in fine.iter().enumerate() {
            let ky = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            let k2 = kx * kx + ky * ky;
            let w = if k2 == 0.0 {
                if s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                k2.powf(s)
            };
            total += w * z.norm_sqr();
        }
    }
    Ok((TORUS_AREA * total).sqrt())
}

/// `(t, ‖e^{−t v₁∂ₓ} g0‖_{H⁻¹})` for each requested time (unit amplitude).
pub fn mixing_decay_curve(g0: &Field, v: &ShearProfile, times: &[f64]) -> Result<DecayCurve> {
    let mut curve = DecayCurve::default();
    for &t in times {
        curve.push(t, transport_norm(g0, v, 1.0, t, -1.0)?);
    }
    Ok(curve)
}

/// Seeded Gaussian fluctuation with zero x-average, supported on
/// `k_min ≤ |k| ≤ k_max`, normalized to unit L² norm.
pub fn band_limited_probe(grid: &Arc<TorusGrid>, seed: u64, k_min: f64, k_max: f64) -> Result<Field> {
    let limit = grid.kx_resolved().min(grid.ky_resolved()) as f64;
    if !(k_min >= 1.0 && k_min <= k_max && k_max <= limit) {
        return Err(Error::BandOutOfRange { k_min, k_max, limit });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = vec![ZERO; grid.len()];
    for (idx, z) in c.iter_mut().enumerate() {
        let (kx, ky) = grid.wavevector(idx);
        let k = ((kx * kx + ky * ky) as f64).sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if kx != 0 && k >= k_min && k <= k_max {
            *z = Complex64::new(re, im);
        }
    }
    let f = Field::from_spectral(grid, c)?.symmetrize();
    let n = f.l2_norm();
    Ok(f.scale(1.0 / n))
}

/// Knobs for the linear decay runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayOptions {
    /// Upper bound on the step (the advective CFL limit also applies).
    pub dt_max: f64,
    /// Minimum number of steps over the horizon.
    pub min_steps: usize,
    /// Stop once `‖g‖ < stop_fraction·‖g0‖`.
    pub stop_fraction: f64,
    /// Cap on the number of stored samples.
    pub max_samples: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            dt_max: 0.1,
            min_steps: 4000,
            stop_fraction: 1e-10,
            max_samples: 2000,
        }
    }
}

/// Norm history of `∂ₜg + A v₁∂ₓg + εγ_eff Δ²g = 0` up to `t_end`, or until
/// the norm has fallen by `opts.stop_fraction`. Only the x-fluctuating part
/// of `g0` is evolved.
pub fn hyperdiffusion_shear_decay_with(
    g0: &Field,
    p: &PhysicalParams,
    v: &ShearProfile,
    t_end: f64,
    opts: &DecayOptions,
) -> Result<DecayCurve> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let grid = g0.grid();
    let pair = g0.split_mean_fluct();
    if pair.mean_part.max_abs_coeff() > MEAN_TOLERANCE {
        debug!("dropping the x-average of the probe");
    }
    let mut stepper = Stepper::new(grid, p.linearized(), v.clone())?.with_integrals(false);
    let dt = stepper
        .cfl_limit()
        .min(opts.dt_max)
        .min(t_end / opts.min_steps as f64);
    let n_steps = (t_end / dt).ceil() as usize;
    let dt = t_end / n_steps as f64;
    let stride = n_steps.div_ceil(opts.max_samples).max(1);

    let mut u = pair.fluct_part.coeffs().into_owned();
    let mut next = vec![ZERO; u.len()];
    let n0 = (TORUS_AREA * crate::spectral::l2_norm_sq(&u)).sqrt();
    let mut curve = DecayCurve::default();
    curve.push(0.0, n0);
    for i in 1..=n_steps {
        stepper.advance_coeffs_into(&u, dt, &mut next);
        std::mem::swap(&mut u, &mut next);
        let n = (TORUS_AREA * crate::spectral::l2_norm_sq(&u)).sqrt();
        let done = n < opts.stop_fraction * n0 || i == n_steps;
        if i % stride == 0 || done {
            curve.push(i as f64 * dt, n);
        }
        if done {
            break;
        }
    }
    Ok(curve)
}

/// [`hyperdiffusion_shear_decay_with`] using default options.
pub fn hyperdiffusion_shear_decay(
    g0: &Field,
    p: &PhysicalParams,
    v: &ShearProfile,
    t_end: f64,
) -> Result<DecayCurve> {
    hyperdiffusion_shear_decay_with(g0, p, v, t_end, &DecayOptions::default())
}

/// Horizon `10 / (εγ_eff k_min⁴)` capped at `10⁵`, where `k_min` is the
/// smallest |k| present in the fluctuating part of `g0`.
pub fn default_horizon(g0: &Field, p: &PhysicalParams) -> f64 {
    let grid = g0.grid();
    let c = g0.coeffs();
    let k2_min = c
        .iter()
        .enumerate()
        .filter(|(idx, z)| z.norm() > 0.0 && grid.wavevector(*idx).0 != 0)
        .map(|(idx, _)| grid.k2_table()[idx])
        .fold(f64::INFINITY, f64::min);
    let k2_min = if k2_min.is_finite() { k2_min } else { 1.0 };
    (10.0 / (p.hyperdiffusivity() * k2_min * k2_min)).min(1e5)
}

/// One row of a scaling study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub gamma: f64,
    pub fit: DecayFit,
    /// Time at which the run stopped.
    pub t_stop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub shear: String,
    pub critical_order: u32,
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_r2: f64,
    pub predicted_exponent: f64,
}

impl ScalingResult {
    pub fn gammas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gamma).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.fit.rate).collect()
    }

    /// Slope of log λ against log γ between each point and its predecessor.
    pub fn running_slopes(&self) -> Vec<f64> {
        let mut out = vec![f64::NAN];
        for w in self.points.windows(2) {
            out.push((w[1].fit.rate / w[0].fit.rate).ln() / (w[1].gamma / w[0].gamma).ln());
        }
        out
    }

    /// Columns `gamma, lambda_fit, r2, slope_running`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "gamma,lambda_fit,r2,slope_running")?;
        for (p, s) in self.points.iter().zip(self.running_slopes()) {
            writeln!(w, "{:e},{:e},{:e},{:e}", p.gamma, p.fit.rate, p.fit.r_squared, s)?;
        }
        w.flush()
    }

    /// Summary with measured and predicted exponents.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "shear": self.shear,
            "critical_order": self.critical_order,
            "measured_exponent": self.slope,
            "measured_exponent_r2": self.slope_r2,
            "intercept": self.intercept,
            "predicted_exponent": self.predicted_exponent,
            "predicted_band": [0.25, 0.75],
            "within_band": (0.25..=0.75).contains(&self.slope),
            "gammas": self.gammas(),
            "lambdas": self.lambdas(),
            "fit_r2": self.points.iter().map(|p| p.fit.r_squared).collect::<Vec<_>>(),
        })
    }
}

/// Measures `λ_γ` for each γ (in parallel, results ordered like `gammas`)
/// and regresses `log λ_γ` on `log γ`.
///
/// `template` supplies ε; its γ is replaced and its nonlinearity dropped.
pub fn scaling_exponent(
    template: &PhysicalParams,
    v: &ShearProfile,
    gammas: &[f64],
    probe: &Field,
    opts: &DecayOptions,
) -> Result<ScalingResult> {
    if gammas.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "scaling needs at least 5 gamma values, got {}",
            gammas.len()
        )));
    }
    if gammas.windows(2).any(|w| !(w[1] < w[0])) || gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParameter(
            "gammas must be positive and strictly decreasing".into(),
        ));
    }
    let points = gammas
        .par_iter()
        .map(|&gamma| {
            let p = PhysicalParams {
                gamma,
                ..template.linearized()
            };
            let horizon = default_horizon(probe, &p);
            let curve = hyperdiffusion_shear_decay_with(probe, &p, v, horizon, opts)?;
            let fit = estimate_lambda(&curve)?;
            debug!(
                "gamma {gamma:e}: lambda {:e} (r2 {:.4}) stop {:.1}",
                fit.rate,
                fit.r_squared,
                curve.t_end()
            );
            Ok(ScalingPoint {
                gamma,
                fit,
                t_stop: curve.t_end(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = points.iter().find(|p| !(p.fit.rate > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "non-positive decay rate {} at gamma {}",
            bad.fit.rate, bad.gamma
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| p.gamma.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.fit.rate.ln()).collect();
    let (slope, intercept, slope_r2) = linear_regression(&x, &y);
    Ok(ScalingResult {
        shear: v.name().to_string(),
        critical_order: v.critical_order(),
        points,
        slope,
        intercept,
        slope_r2,
        predicted_exponent: v.predicted_exponent(),
    })
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn log_spaced_desc(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    let (a, b) = (hi.log10(), lo.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Smallest sampled `t` with `max_g ‖S_t g‖ / ‖g‖ ≤ 1/2` over the probes.
///
/// All probes are advanced on the same time grid of `samples` points over
/// `horizon` (defaults to [`default_horizon`] of the first probe).
pub fn estimate_dissipation_time(
    p: &PhysicalParams,
    v: &ShearProfile,
    probes: &[Field],
    horizon: Option<f64>,
    samples: usize,
) -> Result<f64> {
    let first = probes
        .first()
        .ok_or_else(|| Error::InvalidParameter("no probes given".into()))?;
    for g in probes {
        if g.mean().abs() > MEAN_TOLERANCE {
            return Err(Error::NonZeroMean {
                mean: g.mean(),
                tolerance: MEAN_TOLERANCE,
            });
        }
        if g.l2_norm() == 0.0 {
            return Err(Error::InvalidParameter("probe must be nonzero".into()));
        }
    }
    let horizon = horizon.unwrap_or_else(|| default_horizon(first, p));
    let samples = samples.max(2);
    let dt_sample = horizon / samples as f64;
    let mut ratios = vec![0.0f64; samples + 1];
    for g in probes {
        let mut stepper = Stepper::new(g.grid(), p.linearized(), v.clone())?.with_integrals(false);
        let sub = (dt_sample / stepper.cfl_limit().min(0.1)).ceil().max(1.0) as usize;
        let h = dt_sample / sub as f64;
        let mut u = g.coeffs().into_owned();
        let mut next = vec![ZERO; u.len()];
        let n0 = g.l2_norm();
        for slot in ratios.iter_mut().skip(1) {
            for _ in 0..sub {
                stepper.advance_coeffs_into(&u, h, &mut next);
                std::mem::swap(&mut u, &mut next);
            }
            let r = (TORUS_AREA * crate::spectral::l2_norm_sq(&u)).sqrt() / n0;
            *slot = slot.max(r);
        }
    }
    ratios
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, r)| **r <= 0.5)
        .map(|(i, _)| i as f64 * dt_sample)
        .ok_or(Error::NotReached { horizon })
}
