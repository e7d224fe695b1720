//! Time stepping as a discrete Duhamel formula.
//!
//! The stiff term `εw Δ²` is integrated exactly through the diagonal factor
//! `exp(−εw|k|⁴h)`; advection and the nonlinear flux go through classical
//! RK4 in the integrating-factor (Lawson) form. The `k = 0` mode is left
//! untouched by every stage, so the spatial mean is conserved exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::operators::{free_energy_raw, ExplicitTerms, PhysicalParams, ShearProfile};
use crate::spectral::{Field, TorusGrid, Transformer, TORUS_AREA};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Solution at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Always in the spectral view.
    pub u: Field,
    pub step_index: u64,
    pub dt_current: f64,
    /// Consecutive accepted steps since the last change of `dt_current`.
    pub accept_streak: u32,
}

impl SimState {
    pub fn new(u: Field, dt: f64) -> Self {
        Self {
            t: 0.0,
            u: u.into_spectral(),
            step_index: 0,
            dt_current: dt,
            accept_streak: 0,
        }
    }
}

/// Adaptive step-size rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepController {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// After `grow_after` consecutive accepts dt is divided by `safety`.
    pub safety: f64,
    /// A step is rejected (and dt halved) when ‖u‖ grows by more than this.
    pub growth_limit: f64,
    pub grow_after: u32,
    /// Absolute L² threshold; `None` means `10³·‖u₀‖`.
    pub blowup_threshold: Option<f64>,
    pub max_steps: u64,
    pub output_interval: f64,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 1e-1,
            safety: 1.0 / 1.1,
            growth_limit: 1.25,
            grow_after: 10,
            blowup_threshold: None,
            max_steps: 10_000_000,
            output_interval: 0.1,
        }
    }
}

impl StepController {
    /// Controller that never changes dt (barring rejections).
    pub fn fixed(dt: f64, output_interval: f64) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt.min(1e-12),
            dt_max: dt,
            output_interval,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad(format!("safety must lie in (0, 1), got {}", self.safety));
        }
        if !(self.growth_limit > 1.0) {
            return bad(format!("growth_limit must exceed 1, got {}", self.growth_limit));
        }
        if !(self.output_interval > 0.0) {
            return bad("output_interval must be positive".into());
        }
        if let Some(b) = self.blowup_threshold {
            if !(b > 0.0) {
                return bad("blowup_threshold must be positive".into());
            }
        }
        if self.max_steps == 0 || self.grow_after == 0 {
            return bad("max_steps and grow_after must be positive".into());
        }
        Ok(())
    }
}

/// Why [`integrate`] stopped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TerminalStatus {
    ReachedTEnd,
    BlowUp { t: f64 },
    DtUnderflow { t: f64 },
    MaxSteps { t: f64 },
}

impl TerminalStatus {
    pub fn is_blow_up(&self) -> bool {
        matches!(self, TerminalStatus::BlowUp { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            TerminalStatus::ReachedTEnd => "reached_t_end",
            TerminalStatus::BlowUp { .. } => "blow_up",
            TerminalStatus::DtUnderflow { .. } => "dt_underflow",
            TerminalStatus::MaxSteps { .. } => "max_steps",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Strictly increasing in `t`; the first record is the initial state.
    pub records: Vec<DiagnosticsRecord>,
    pub status: TerminalStatus,
    pub final_state: SimState,
    pub integrals_accumulated: bool,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
}

/// Exponential Runge–Kutta variant used for the explicit part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Cox–Matthews exponential time differencing RK4.
    #[default]
    Etdrk4,
    /// Lawson integrating-factor RK4. Fourth order only once `h·εw|k|⁴`
    /// is small on every mode the nonlinearity excites.
    Lawson4,
}

/// Per-mode coefficients of one step size.
struct Factors {
    h: f64,
    /// `e^{Lh}`
    full: Vec<f64>,
    /// `e^{Lh/2}`
    half: Vec<f64>,
    /// ETDRK4 weights `Q, f₁, f₂, f₃` (empty for Lawson).
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

/// Number of contour points for the ETD weights.
const CONTOUR_POINTS: usize = 64;

/// ETDRK4 weights for `z = L h`, divided by `h`, by averaging the closed
/// forms over a unit circle around `z` (avoids cancellation near z = 0).
fn etd_weights(z: f64) -> [f64; 4] {
    let mut acc = [0.0; 4];
    for j in 0..CONTOUR_POINTS {
        let theta = std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64;
        // upper half circle suffices for real z (conjugate symmetry)
        let r = Complex64::new(z, 0.0) + Complex64::from_polar(1.0, theta);
        let er = r.exp();
        let er2 = (r * 0.5).exp();
        let r3 = r * r * r;
        let vals = [
            (er2 - 1.0) / r,
            (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3,
            (2.0 + r + er * (r - 2.0)) / r3,
            (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3,
        ];
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v.re;
        }
    }
    acc.map(|a| a / CONTOUR_POINTS as f64)
}

/// Owns everything one simulation needs: transform scratch, stage buffers
/// and the exponential factors for the current step size.
pub struct Stepper {
    grid: Arc<TorusGrid>,
    params: PhysicalParams,
    shear: ShearProfile,
    terms: ExplicitTerms,
    tf: Transformer,
    /// `−εw|k|⁴`
    lin: Vec<f64>,
    factors: Option<Factors>,
    scheme: Scheme,
    grad_coeff: f64,
    accumulate: bool,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
    stage_a: Vec<Complex64>,
    flux: Vec<Complex64>,
}

/// Integrands of the three cumulative integrals at one state.
#[derive(Clone, Copy, Debug, Default)]
struct Integrands {
    dissipation: f64,
    fluct_dissipation: f64,
    work: f64,
}

impl Stepper {
    pub fn new(grid: &Arc<TorusGrid>, params: PhysicalParams, shear: ShearProfile) -> Result<Self> {
        params.validate()?;
        let nu = params.hyperdiffusivity();
        let lin = grid.k2_table().iter().map(|&k2| -nu * k2 * k2).collect();
        let n = grid.len();
        Ok(Self {
            grid: Arc::clone(grid),
            terms: ExplicitTerms::new(grid, &params, &shear),
            tf: Transformer::new(grid),
            params,
            shear,
            lin,
            factors: None,
            scheme: Scheme::default(),
            grad_coeff: params.epsilon,
            accumulate: true,
            k1: vec![ZERO; n],
            k2: vec![ZERO; n],
            k3: vec![ZERO; n],
            k4: vec![ZERO; n],
            stage: vec![ZERO; n],
            stage_a: vec![ZERO; n],
            flux: vec![ZERO; n],
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self.factors = None;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Gradient coefficient of the recorded free energy (default ε).
    pub fn with_grad_coeff(mut self, grad_coeff: f64) -> Self {
        self.grad_coeff = grad_coeff;
        self
    }

    /// Whether to accumulate the dissipation and work integrals.
    pub fn with_integrals(mut self, on: bool) -> Self {
        self.accumulate = on;
        self
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn shear(&self) -> &ShearProfile {
        &self.shear
    }

    /// `0.5·Δx / (A·max|v₁|)`, or infinity without advection.
    pub fn cfl_limit(&self) -> f64 {
        let speed = self.params.advection_amplitude() * self.shear.max_abs();
        if speed == 0.0 {
            f64::INFINITY
        } else {
            0.5 * self.grid.dx() / speed
        }
    }

    fn ensure_factors(&mut self, h: f64) {
        if self.factors.as_ref().is_some_and(|f| f.h == h) {
            return;
        }
        let full = self.lin.iter().map(|&l| (l * h).exp()).collect();
        let half = self.lin.iter().map(|&l| (0.5 * l * h).exp()).collect();
        let (mut q, mut f1, mut f2, mut f3) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        if self.scheme == Scheme::Etdrk4 {
            // many modes share |k|⁴, so memoize on the exact value of L
            let mut memo: std::collections::HashMap<u64, [f64; 4]> = Default::default();
            for &l in &self.lin {
                let w = *memo.entry(l.to_bits()).or_insert_with(|| etd_weights(l * h));
                q.push(h * w[0]);
                f1.push(h * w[1]);
                f2.push(h * w[2]);
                f3.push(h * w[3]);
            }
        }
        self.factors = Some(Factors {
            h,
            full,
            half,
            q,
            f1,
            f2,
            f3,
        });
    }

    /// One step of size `h` from `u` into `out`, assuming `self.k1`
    /// already holds `F(u)`.
    fn advance_from_k1(&mut self, u: &[Complex64], h: f64, out: &mut [Complex64]) {
        self.ensure_factors(h);
        if self.terms.is_trivial() {
            let e = &self.factors.as_ref().unwrap().full;
            for i in 0..u.len() {
                out[i] = u[i] * e[i];
            }
            return;
        }
        match self.scheme {
            Scheme::Etdrk4 => self.etdrk4(u, out),
            Scheme::Lawson4 => self.lawson4(u, h, out),
        }
    }

    fn etdrk4(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        let f = self.factors.as_ref().unwrap();
        let n = u.len();
        for i in 0..n {
            self.stage_a[i] = u[i] * f.half[i] + self.k1[i] * f.q[i];
        }
        self.terms.eval(&self.stage_a, &mut self.k2, None);
        for i in 0..n {
            self.stage[i] = u[i] * f.half[i] + self.k2[i] * f.q[i];
        }
        self.terms.eval(&self.stage, &mut self.k3, None);
        for i in 0..n {
            self.stage[i] = self.stage_a[i] * f.half[i] + (self.k3[i] * 2.0 - self.k1[i]) * f.q[i];
        }
        self.terms.eval(&self.stage, &mut self.k4, None);
        for i in 0..n {
            out[i] = u[i] * f.full[i]
                + self.k1[i] * f.f1[i]
                + (self.k2[i] + self.k3[i]) * (2.0 * f.f2[i])
                + self.k4[i] * f.f3[i];
        }
    }

    fn lawson4(&mut self, u: &[Complex64], h: f64, out: &mut [Complex64]) {
        let f = self.factors.as_ref().unwrap();
        let (e, eh) = (&f.full, &f.half);
        let h2 = 0.5 * h;
        for i in 0..u.len() {
            self.stage[i] = (u[i] + self.k1[i] * h2) * eh[i];
        }
        self.terms.eval(&self.stage, &mut self.k2, None);
        for i in 0..u.len() {
            self.stage[i] = u[i] * eh[i] + self.k2[i] * h2;
        }
        self.terms.eval(&self.stage, &mut self.k3, None);
        for i in 0..u.len() {
            self.stage[i] = u[i] * e[i] + self.k3[i] * (h * eh[i]);
        }
        self.terms.eval(&self.stage, &mut self.k4, None);
        let h6 = h / 6.0;
        for i in 0..u.len() {
            out[i] = u[i] * e[i]
                + (self.k1[i] * e[i] + (self.k2[i] + self.k3[i]) * (2.0 * eh[i]) + self.k4[i]) * h6;
        }
    }

    /// Evaluates `F(u)` into `k1` (and the flux when integrals are on).
    fn eval_k1(&mut self, u: &[Complex64]) {
        if self.terms.is_trivial() {
            self.k1.fill(ZERO);
            self.flux.fill(ZERO);
            return;
        }
        let flux = if self.accumulate && self.terms.has_nonlinearity() {
            Some(&mut self.flux[..])
        } else {
            None
        };
        self.terms.eval(u, &mut self.k1, flux);
    }

    /// Advances raw coefficients in place by one step.
    pub fn advance_coeffs(&mut self, u: &mut [Complex64], h: f64) {
        let mut out = vec![ZERO; u.len()];
        self.advance_coeffs_into(u, h, &mut out);
        u.copy_from_slice(&out);
    }

    /// One step from `u` into `out` (allocation-free).
    pub fn advance_coeffs_into(&mut self, u: &[Complex64], h: f64, out: &mut [Complex64]) {
        if !self.terms.is_trivial() {
            self.terms.eval(u, &mut self.k1, None);
        }
        self.advance_from_k1(u, h, out);
    }

    /// One step of size `dt`; the result keeps the controller fields of
    /// `state` except `t` and `step_index`.
    pub fn step(&mut self, state: &SimState, dt: f64) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        crate::spectral::check_same_grid(state.u.grid(), &self.grid)?;
        let u = state.u.coeffs().into_owned();
        let mut out = vec![ZERO; u.len()];
        self.advance_coeffs_into(&u, dt, &mut out);
        Ok(SimState {
            t: state.t + dt,
            u: Field::from_spectral(&self.grid, out)?,
            step_index: state.step_index + 1,
            dt_current: state.dt_current,
            accept_streak: state.accept_streak,
        })
    }

    fn integrands(&self, u: &[Complex64]) -> Integrands {
        let nu = self.params.hyperdiffusivity();
        let w = self.params.nonlinear_weight();
        let nx = self.grid.nx();
        let k2 = self.grid.k2_table();
        let (mut d, mut df, mut work) = (0.0, 0.0, 0.0);
        for (idx, c) in u.iter().enumerate() {
            let e = k2[idx] * k2[idx] * c.norm_sqr();
            d += e;
            if idx % nx != 0 {
                df += e;
            }
            work += (c * self.flux[idx].conj()).re;
        }
        Integrands {
            dissipation: 2.0 * nu * TORUS_AREA * d,
            fluct_dissipation: nu * TORUS_AREA * df,
            work: 2.0 * w * TORUS_AREA * work,
        }
    }

    fn record(&mut self, t: f64, u: &[Complex64], dt: f64, acc: &Integrands) -> DiagnosticsRecord {
        let nx = self.grid.nx();
        let k2 = self.grid.k2_table();
        let (mut l2, mut h2, mut mean_sq) = (0.0, 0.0, 0.0);
        for (idx, c) in u.iter().enumerate() {
            let e = c.norm_sqr();
            l2 += e;
            h2 += k2[idx] * k2[idx] * e;
            if idx % nx == 0 {
                mean_sq += e;
            }
        }
        let values = self.tf.inverse_real(u);
        let fe = free_energy_raw(&self.grid, u, &values, &self.params, self.grad_coeff);
        DiagnosticsRecord {
            t,
            l2: (TORUS_AREA * l2).sqrt(),
            h2: (TORUS_AREA * h2).sqrt(),
            mean: u[0].re,
            // x-integral of u has L²_y norm 2π·sqrt(2π Σ|û(0,ky)|²)
            mean_part_l2: 2.0 * PI * (2.0 * PI * mean_sq).sqrt(),
            fluct_l2: (TORUS_AREA * (l2 - mean_sq).max(0.0)).sqrt(),
            free_energy: fe,
            dissipation: acc.dissipation,
            fluct_dissipation: acc.fluct_dissipation,
            nonlinear_work: acc.work,
            dt,
        }
    }

    /// Adaptive integration to `t_end` with records every
    /// `ctrl.output_interval` (plus one at the final time).
    pub fn integrate(&mut self, state: SimState, t_end: f64, ctrl: &StepController) -> Result<Trajectory> {
        ctrl.validate()?;
        crate::spectral::check_same_grid(state.u.grid(), &self.grid)?;
        if !(t_end > state.t) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {t_end} must exceed the start time {}",
                state.t
            )));
        }
        let t0 = state.t;
        let mut u = state.u.coeffs().into_owned();
        let mut trial = vec![ZERO; u.len()];
        let mut t = state.t;
        let mut step_index = state.step_index;
        let mut streak = state.accept_streak;
        let dt_cap = ctrl.dt_max.min(self.cfl_limit());
        let mut dt = state.dt_current.clamp(ctrl.dt_min, ctrl.dt_max).min(dt_cap);

        let mut norm = l2_of(&u);
        let threshold = ctrl.blowup_threshold.unwrap_or(1e3 * norm);
        let mut acc = Integrands::default();
        self.eval_k1(&u);
        let mut now = self.integrands(&u);
        let mut records = vec![self.record(t, &u, dt, &acc)];
        // Output times are absolute multiples of the interval, so a resumed
        // run visits exactly the same times as an uninterrupted one.
        let mut n_out = (t0 / ctrl.output_interval + 1e-9).floor() as u64 + 1;
        let (mut accepted, mut rejected) = (0u64, 0u64);

        let status = loop {
            if t >= t_end {
                break TerminalStatus::ReachedTEnd;
            }
            if accepted >= ctrl.max_steps {
                break TerminalStatus::MaxSteps { t };
            }
            let next_output = (n_out as f64 * ctrl.output_interval).min(t_end);
            let remaining = next_output - t;
            // land when within rounding of the target, not one ulp short of it
            let lands = remaining <= dt * (1.0 + 1e-9);
            let h = if lands { remaining } else { dt };
            self.advance_from_k1(&u, h, &mut trial);
            let trial_norm = l2_of(&trial);
            if !trial_norm.is_finite() || trial_norm > ctrl.growth_limit * norm {
                rejected += 1;
                streak = 0;
                dt = h * 0.5;
                if dt < ctrl.dt_min {
                    break TerminalStatus::DtUnderflow { t };
                }
                continue;
            }
            std::mem::swap(&mut u, &mut trial);
            t = if lands { next_output } else { t + h };
            norm = trial_norm;
            accepted += 1;
            step_index += 1;
            self.eval_k1(&u);
            if self.accumulate {
                let next = self.integrands(&u);
                acc.dissipation += h * log_mean(now.dissipation, next.dissipation);
                acc.fluct_dissipation += h * log_mean(now.fluct_dissipation, next.fluct_dissipation);
                acc.work += 0.5 * h * (now.work + next.work);
                now = next;
            }
            streak += 1;
            if streak >= ctrl.grow_after {
                dt = (dt / ctrl.safety).min(dt_cap);
                streak = 0;
            }
            if norm > threshold {
                records.push(self.record(t, &u, dt, &acc));
                break TerminalStatus::BlowUp { t };
            }
            if lands {
                records.push(self.record(t, &u, dt, &acc));
                n_out += 1;
            }
        };

        let final_state = SimState {
            t,
            u: Field::from_spectral(&self.grid, u)?,
            step_index,
            dt_current: dt,
            accept_streak: streak,
        };
        Ok(Trajectory {
            records,
            status,
            final_state,
            integrals_accumulated: self.accumulate,
            accepted_steps: accepted,
            rejected_steps: rejected,
        })
    }
}

/// Logarithmic mean `(b − a) / ln(b / a)`: the exact step average of a
/// positive integrand that varies exponentially across the step, and within
/// O(h²) of the trapezoid average otherwise.
fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.5 * (a + b);
    }
    let r = b / a;
    if (r - 1.0).abs() < 1e-6 {
        // series of (r − 1)/ln r about r = 1
        let d = r - 1.0;
        return a * (1.0 + d / 2.0 - d * d / 12.0);
    }
    (b - a) / r.ln()
}

fn l2_of(u: &[Complex64]) -> f64 {
    (TORUS_AREA * crate::spectral::l2_norm_sq(u)).sqrt()
}

/// One step of size `dt` with the default scheme.
pub fn step(state: &SimState, dt: f64, p: &PhysicalParams, v: &ShearProfile) -> Result<SimState> {
    Stepper::new(state.u.grid(), *p, v.clone())?.step(state, dt)
}

/// Adaptive integration with default diagnostics (free energy with
/// gradient coefficient ε, integrals on).
pub fn integrate(
    state: SimState,
    t_end: f64,
    ctrl: &StepController,
    p: &PhysicalParams,
    v: &ShearProfile,
) -> Result<Trajectory> {
    let grid = Arc::clone(state.u.grid());
    Stepper::new(&grid, *p, v.clone())?.integrate(state, t_end, ctrl)
}

/// `max_t |‖u₀‖² + W(t) − ‖u(t)‖² − D(t)| / ‖u₀‖²` over the records, with
/// `D` the dissipation and `W` the nonlinear work columns. Zero data gives 0.
pub fn energy_identity_residual(traj: &Trajectory) -> Result<f64> {
    if !traj.integrals_accumulated {
        return Err(Error::MissingDiagnostics(
            "trajectory was recorded without cumulative integrals".into(),
        ));
    }
    let first = traj
        .records
        .first()
        .ok_or_else(|| Error::MissingDiagnostics("trajectory has no records".into()))?;
    let e0 = first.l2 * first.l2;
    if e0 == 0.0 {
        return Ok(0.0);
    }
    Ok(traj
        .records
        .iter()
        .map(|r| (e0 + r.nonlinear_work - r.l2 * r.l2 - r.dissipation).abs() / e0)
        .fold(0.0, f64::max))
}
