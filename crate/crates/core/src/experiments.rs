//! Scenario orchestration: initial data, single runs with their output
//! files, the bootstrap monitor, smallness thresholds and (a, A) sweeps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{shear_by_name, InitialData, LambdaChoice, LambdaSource, RunConfig};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::integrators::{SimState, Stepper, TerminalStatus, Trajectory};
use crate::io;
use crate::operators::{PhysicalParams, ShearProfile};
use crate::semigroup::{self, DecayCurve, DecayFit, ScalingResult};
use crate::spectral::{Field, TorusGrid};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Builds `u₀` from an initial-data description. The result has zero total
/// integral. Checkpoint specs are not handled here.
pub fn make_initial_data(grid: &Arc<TorusGrid>, init: &InitialData, seed: u64) -> Result<Field> {
    match *init {
        InitialData::SingleMode { kx, ky, amp } => {
            if !(amp > 0.0) {
                return Err(Error::InvalidParameter(format!("amp must be positive, got {amp}")));
            }
            if kx == 0 && ky == 0 {
                return Err(Error::InvalidParameter(
                    "single mode (0, 0) is a constant, not mean-zero data".into(),
                ));
            }
            let limit = grid.kx_resolved().min(grid.ky_resolved());
            if kx.abs() > grid.kx_resolved() || ky.abs() > grid.ky_resolved() {
                let k = ((kx * kx + ky * ky) as f64).sqrt();
                return Err(Error::BandOutOfRange {
                    k_min: k,
                    k_max: k,
                    limit: limit as f64,
                });
            }
            let (kx, ky) = (kx as f64, ky as f64);
            Ok(Field::from_fn(grid, |x, y| amp * (kx * x + ky * y).sin()))
        }
        InitialData::SeededRandom {
            seed: own_seed,
            k_min,
            k_max,
            amp,
            mean_frac,
        } => seeded_random(grid, own_seed.unwrap_or(seed), k_min, k_max, amp, mean_frac),
        InitialData::Checkpoint { .. } => Err(Error::InvalidParameter(
            "checkpoint initial data is loaded, not constructed".into(),
        )),
    }
}

/// Gaussian data on `k_min ≤ |k| ≤ k_max` with `‖u_∦‖ = amp` and
/// `‖⟨u⟩‖ = mean_frac·amp` (the x-average part measured as a field on T²).
fn seeded_random(
    grid: &Arc<TorusGrid>,
    seed: u64,
    k_min: f64,
    k_max: f64,
    amp: f64,
    mean_frac: f64,
) -> Result<Field> {
    let limit = grid.kx_resolved().min(grid.ky_resolved()) as f64;
    if !(k_min >= 1.0 && k_min <= k_max && k_max <= limit) {
        return Err(Error::BandOutOfRange { k_min, k_max, limit });
    }
    if !(amp > 0.0 && mean_frac >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need amp > 0 and mean_frac >= 0, got {amp} and {mean_frac}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fluct = vec![ZERO; grid.len()];
    let mut mean = vec![ZERO; grid.len()];
    for idx in 0..grid.len() {
        let (kx, ky) = grid.wavevector(idx);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let k = ((kx * kx + ky * ky) as f64).sqrt();
        if k < k_min || k > k_max {
            continue;
        }
        if kx == 0 {
            mean[idx] = Complex64::new(re, im);
        } else {
            fluct[idx] = Complex64::new(re, im);
        }
    }
    let fluct = Field::from_spectral(grid, fluct)?.symmetrize();
    let mean = Field::from_spectral(grid, mean)?.symmetrize();
    let (nf, nm) = (fluct.l2_norm(), mean.l2_norm());
    if nf == 0.0 || (mean_frac > 0.0 && nm == 0.0) {
        return Err(Error::BandOutOfRange { k_min, k_max, limit });
    }
    let mean_scale = if mean_frac > 0.0 { mean_frac * amp / nm } else { 0.0 };
    fluct.combine(amp / nf, &mean, mean_scale)
}

/// Everything needed to integrate one configured run.
pub struct Scenario {
    pub params: PhysicalParams,
    pub shear: ShearProfile,
    pub initial: SimState,
    pub stepper: Stepper,
}

impl Scenario {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let grid = TorusGrid::new(cfg.grid.nx, cfg.grid.ny)?;
        let params = cfg.params.to_params()?;
        let shear = cfg.shear.to_profile(&cfg.base_dir)?;
        let initial = match &cfg.initial_data {
            InitialData::Checkpoint { path } => {
                let state = io::load_checkpoint(&cfg.base_dir.join(path))?;
                crate::spectral::check_same_grid(state.u.grid(), &grid)?;
                state
            }
            init => SimState::new(make_initial_data(&grid, init, cfg.seed)?, cfg.controller.dt_init),
        };
        let grad = cfg.numerics.grad_coeff.unwrap_or(params.epsilon);
        let stepper = Stepper::new(&grid, params, shear.clone())?
            .with_scheme(cfg.numerics.scheme)
            .with_grad_coeff(grad);
        Ok(Self {
            params,
            shear,
            initial,
            stepper,
        })
    }

    pub fn run(&mut self, cfg: &RunConfig) -> Result<Trajectory> {
        self.stepper
            .integrate(self.initial.clone(), cfg.outputs.t_end, &cfg.controller)
    }
}

/// Exponential fit of `‖u(t)‖` over `[t_end/2, t_end]`.
pub fn tail_fit(records: &[DiagnosticsRecord]) -> Result<DecayFit> {
    let mut curve = DecayCurve::default();
    for r in records {
        curve.push(r.t, r.l2);
    }
    semigroup::estimate_lambda(&curve)
}

/// Contents of `status.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub status: String,
    pub blow_up: bool,
    pub terminal: TerminalStatus,
    pub t_final: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub final_l2: f64,
    pub tail_fit: Option<DecayFit>,
}

/// Result of [`run_scenario`].
pub struct ScenarioOutput {
    pub trajectory: Trajectory,
    pub status: RunStatus,
    pub bootstrap: Option<BootstrapReport>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Runs a configured scenario without touching the file system.
pub fn run_in_memory(cfg: &RunConfig) -> Result<ScenarioOutput> {
    let mut sc = Scenario::from_config(cfg)?;
    let traj = sc.run(cfg)?;
    let fit = if cfg.outputs.tail_fit && traj.status == TerminalStatus::ReachedTEnd {
        match tail_fit(&traj.records) {
            Ok(f) => Some(f),
            Err(e) => {
                warn!("tail fit skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    let last = traj.records.last().copied();
    let status = RunStatus {
        status: traj.status.label().to_string(),
        blow_up: traj.status.is_blow_up(),
        terminal: traj.status,
        t_final: traj.final_state.t,
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        final_l2: last.map_or(f64::NAN, |r| r.l2),
        tail_fit: fit,
    };
    let bootstrap = match &cfg.bootstrap {
        Some(b) => {
            let (lambda, source) = match b.lambda {
                LambdaChoice::Value(v) => (v, LambdaOrigin::Configured),
                LambdaChoice::Named(which) => {
                    resolve_lambda(&sc.params, &sc.shear, sc.stepper.grid(), cfg.seed, which, b.prefactor)
                }
            };
            let t0 = traj.records.first().map_or(0.0, |r| r.t);
            let t1 = traj.records.last().map_or(0.0, |r| r.t);
            let checkpoints = checkpoint_grid(t0, t1, b.checkpoint_interval);
            let mut report = bootstrap_monitor(&traj, lambda, &checkpoints)?;
            report.lambda_source = source;
            Some(report)
        }
        None => None,
    };
    Ok(ScenarioOutput {
        trajectory: traj,
        status,
        bootstrap,
    })
}

/// Runs a scenario and writes `diagnostics.csv`, `status.json` and, when
/// configured, `bootstrap.json` and `final.chk` into `out_dir`.
pub fn run_scenario(cfg: &RunConfig, out_dir: &Path) -> Result<ScenarioOutput> {
    let out = run_in_memory(cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut csv = Vec::new();
    diagnostics::write_csv(&mut csv, &out.trajectory.records)?;
    write_atomic(&out_dir.join("diagnostics.csv"), &csv)?;
    write_atomic(&out_dir.join("status.json"), &json_bytes(&out.status))?;
    if let Some(b) = &out.bootstrap {
        write_atomic(&out_dir.join("bootstrap.json"), &json_bytes(b))?;
    }
    if cfg.outputs.checkpoint {
        let tmp = out_dir.join(".final.chk.tmp");
        io::save_checkpoint(&tmp, &out.trajectory.final_state)?;
        fs::rename(tmp, out_dir.join("final.chk"))?;
    }
    info!(
        "{}: t = {} after {} steps",
        out.status.status, out.status.t_final, out.status.accepted_steps
    );
    Ok(out)
}

/// Where the monitor's `λ_γ` came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaOrigin {
    Configured,
    Measured,
    Formula,
}

/// `λ_γ` of the linearized problem on the same grid, measured from a seeded
/// band-limited probe.
pub fn measure_lambda(
    params: &PhysicalParams,
    shear: &ShearProfile,
    grid: &Arc<TorusGrid>,
    seed: u64,
) -> Result<DecayFit> {
    let k_max = 8f64.min(grid.kx_resolved().min(grid.ky_resolved()) as f64);
    let probe = semigroup::band_limited_probe(grid, seed, 1.0, k_max)?;
    let p = params.linearized();
    let horizon = semigroup::default_horizon(&probe, &p);
    let curve = semigroup::hyperdiffusion_shear_decay(&probe, &p, shear, horizon)?;
    semigroup::estimate_lambda(&curve)
}

/// `C·γ^{2/(2+m)}`.
pub fn lambda_formula(gamma: f64, critical_order: u32, prefactor: f64) -> f64 {
    prefactor * gamma.powf(2.0 / (2.0 + critical_order as f64))
}

fn resolve_lambda(
    params: &PhysicalParams,
    shear: &ShearProfile,
    grid: &Arc<TorusGrid>,
    seed: u64,
    which: LambdaSource,
    prefactor: f64,
) -> (f64, LambdaOrigin) {
    let formula = || {
        (
            lambda_formula(params.gamma, shear.critical_order(), prefactor),
            LambdaOrigin::Formula,
        )
    };
    match which {
        LambdaSource::Formula => formula(),
        LambdaSource::Measured => match measure_lambda(params, shear, grid, seed) {
            Ok(fit) if fit.rate > 0.0 => {
                info!("measured lambda_gamma = {:e} (r2 {:.4})", fit.rate, fit.r_squared);
                (fit.rate, LambdaOrigin::Measured)
            }
            Ok(fit) => {
                warn!("measured lambda_gamma {} is not positive, using the formula", fit.rate);
                formula()
            }
            Err(e) => {
                warn!("lambda_gamma measurement failed ({e}), using the formula");
                formula()
            }
        },
    }
}

/// `{t0, t0 + Δ, …} ∩ [t0, t1]`.
pub fn checkpoint_grid(t0: f64, t1: f64, interval: f64) -> Vec<f64> {
    let n = ((t1 - t0) / interval + 1e-9).floor() as usize;
    (0..=n).map(|i| t0 + i as f64 * interval).collect()
}

/// Bootstrap quantities for one checkpoint pair `s < t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPair {
    pub s: f64,
    pub t: f64,
    /// `‖u_∦(t)‖ / (e^{−λ(t−s)/4} ‖u_∦(s)‖)`
    pub ratio1: f64,
    /// `εγ∫ₛᵗ‖Δu_∦‖² / ‖u_∦(s)‖²`
    pub ratio2: f64,
    pub ratio1_le_20: bool,
    pub ratio1_le_16: bool,
    pub ratio2_le_10: bool,
    pub ratio2_le_5: bool,
}

/// First pair (earliest `t`, then earliest `s`) breaking a bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub s: f64,
    pub t: f64,
    pub value: f64,
}

/// One Prop. 5.3 contraction check: `‖u_∦(s+τ*)‖ / ‖u_∦(s)‖ ≤ 1/e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    pub s: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub lambda_gamma: f64,
    pub lambda_source: LambdaOrigin,
    pub tau_star: f64,
    pub checkpoints: Vec<f64>,
    /// Both ends on the checkpoint grid.
    pub pairs: Vec<BootstrapPair>,
    /// Worst cases over `s` on the checkpoint grid and every recorded `t ≥ s`.
    pub max_ratio1: f64,
    pub max_ratio2: f64,
    pub ratio1_le_20: bool,
    pub ratio1_le_16: bool,
    pub ratio2_le_10: bool,
    pub ratio2_le_5: bool,
    pub first_violation_ratio1: Option<Violation>,
    pub first_violation_ratio2: Option<Violation>,
    /// `max ‖u_∦(t)‖ / ‖u_∦(s)‖` against the 3/2 of Prop. 5.2.
    pub max_growth: f64,
    pub growth_le_3_2: bool,
    pub contractions: Vec<Contraction>,
    /// True when every evaluated contraction holds (vacuous if none fit).
    pub contraction_holds: bool,
    /// Some ratio was 0/0 and counted as passing.
    pub degenerate: bool,
}

impl BootstrapReport {
    /// The §3 assumptions (20 and 10) hold everywhere.
    pub fn assumptions_hold(&self) -> bool {
        self.ratio1_le_20 && self.ratio2_le_10
    }

    /// The improved constants (16 and 5) hold everywhere.
    pub fn improved_hold(&self) -> bool {
        self.ratio1_le_16 && self.ratio2_le_5
    }
}

/// `num/den`, with 0/0 counted as 0 and reported through `degenerate`.
fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        *degenerate = true;
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates the bootstrap inequalities on a trajectory. Every checkpoint
/// must coincide with a record time.
pub fn bootstrap_monitor(traj: &Trajectory, lambda_gamma: f64, checkpoints: &[f64]) -> Result<BootstrapReport> {
    if !traj.integrals_accumulated {
        return Err(Error::MissingDiagnostics(
            "bootstrap monitor needs the cumulative fluctuation dissipation".into(),
        ));
    }
    if !(lambda_gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda_gamma must be positive, got {lambda_gamma}"
        )));
    }
    let recs = &traj.records;
    if recs.is_empty() {
        return Err(Error::MissingDiagnostics("trajectory has no records".into()));
    }
    let t_last = recs[recs.len() - 1].t;
    let find = |s: f64| {
        recs.iter()
            .position(|r| (r.t - s).abs() <= 1e-9 * s.abs().max(1.0))
            .ok_or_else(|| Error::InvalidParameter(format!("checkpoint {s} is not a record time")))
    };
    let idx: Vec<usize> = checkpoints.iter().map(|&s| find(s)).collect::<Result<_>>()?;

    let mut degenerate = false;
    let eval = |i: usize, j: usize, deg: &mut bool| {
        let (a, b) = (&recs[i], &recs[j]);
        let decay = (-lambda_gamma * (b.t - a.t) / 4.0).exp();
        let r1 = ratio(b.fluct_l2, decay * a.fluct_l2, deg);
        let r2 = ratio(b.fluct_dissipation - a.fluct_dissipation, a.fluct_l2 * a.fluct_l2, deg);
        let g = ratio(b.fluct_l2, a.fluct_l2, deg);
        (r1, r2, g)
    };

    let mut pairs = Vec::new();
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            let (r1, r2, _) = eval(i, j, &mut degenerate);
            pairs.push(BootstrapPair {
                s: recs[i].t,
                t: recs[j].t,
                ratio1: r1,
                ratio2: r2,
                ratio1_le_20: r1 <= 20.0,
                ratio1_le_16: r1 <= 16.0,
                ratio2_le_10: r2 <= 10.0,
                ratio2_le_5: r2 <= 5.0,
            });
        }
    }

    let (mut max1, mut max2, mut max_growth) = (0.0f64, 0.0f64, 0.0f64);
    let mut first1: Option<Violation> = None;
    let mut first2: Option<Violation> = None;
    let earlier = |v: &Option<Violation>, s: f64, t: f64| match v {
        None => true,
        Some(old) => t < old.t || (t == old.t && s < old.s),
    };
    for &i in &idx {
        for j in i..recs.len() {
            let (r1, r2, g) = eval(i, j, &mut degenerate);
            max1 = max1.max(r1);
            max2 = max2.max(r2);
            max_growth = max_growth.max(g);
            let (s, t) = (recs[i].t, recs[j].t);
            if !(r1 <= 20.0) && earlier(&first1, s, t) {
                first1 = Some(Violation { s, t, value: r1 });
            }
            if !(r2 <= 10.0) && earlier(&first2, s, t) {
                first2 = Some(Violation { s, t, value: r2 });
            }
        }
    }

    let tau_star = 4.0 / lambda_gamma;
    let mut contractions = Vec::new();
    for &i in &idx {
        let s = recs[i].t;
        if s + tau_star > t_last {
            continue;
        }
        let later = log_interp_fluct(recs, s + tau_star);
        let r = ratio(later, recs[i].fluct_l2, &mut degenerate);
        contractions.push(Contraction {
            s,
            ratio: r,
            holds: r <= (-1f64).exp(),
        });
    }

    Ok(BootstrapReport {
        lambda_gamma,
        lambda_source: LambdaOrigin::Configured,
        tau_star,
        checkpoints: idx.iter().map(|&i| recs[i].t).collect(),
        pairs,
        max_ratio1: max1,
        max_ratio2: max2,
        ratio1_le_20: max1 <= 20.0,
        ratio1_le_16: max1 <= 16.0,
        ratio2_le_10: max2 <= 10.0,
        ratio2_le_5: max2 <= 5.0,
        first_violation_ratio1: first1,
        first_violation_ratio2: first2,
        max_growth,
        growth_le_3_2: max_growth <= 1.5,
        contraction_holds: contractions.iter().all(|c| c.holds),
        contractions,
        degenerate,
    })
}

/// `‖u_∦(t)‖` interpolated log-linearly between the bracketing records.
fn log_interp_fluct(recs: &[DiagnosticsRecord], t: f64) -> f64 {
    let j = recs.partition_point(|r| r.t < t).min(recs.len() - 1);
    if j == 0 || recs[j].t == t {
        return recs[j].fluct_l2;
    }
    let (a, b) = (&recs[j - 1], &recs[j]);
    let w = (t - a.t) / (b.t - a.t);
    if a.fluct_l2 > 0.0 && b.fluct_l2 > 0.0 {
        (a.fluct_l2.ln() * (1.0 - w) + b.fluct_l2.ln() * w).exp()
    } else {
        a.fluct_l2 * (1.0 - w) + b.fluct_l2 * w
    }
}

/// Inputs of the smallness conditions. `b1, b2, b3, l, l_prime` are
/// not provided by the paper; they default to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInputs {
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    /// `‖u_∦(0)‖_{L²}`
    pub fluct0: f64,
    /// `‖⟨u⟩(0)‖_{L²_y}` with `⟨u⟩ = ∫u dx` (integral convention).
    pub mean0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub l: f64,
    pub l_prime: f64,
    pub lambda1: f64,
}

impl Default for ThresholdInputs {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            a: 0.0,
            b: 0.0,
            fluct0: 1.0,
            mean0: 0.0,
            b1: 1.0,
            b2: 1.0,
            b3: 1.0,
            l: 1.0,
            l_prime: 1.0,
            lambda1: 1.0,
        }
    }
}

/// `lhs ≤ rhs`, literally evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub equation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs − lhs`; negative when violated.
    pub margin: f64,
}

impl Condition {
    fn new(equation: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            equation: equation.into(),
            lhs,
            rhs,
            holds: lhs <= rhs,
            margin: rhs - lhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub inputs: ThresholdInputs,
    /// `K = min{1, (ελ₁²/4B₁)^{3/8}}`
    pub k_bound: f64,
    /// Largest admissible |a| from (20211018eq01).
    pub a_bound_eq1018: f64,
    /// Largest admissible |a| from (20211026eq100).
    pub a_bound_eq100: f64,
    pub conditions: Vec<Condition>,
    pub note: String,
}

impl ThresholdReport {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }
}

pub const CONSTANTS_NOTE: &str =
    "B1, B2, B3, L, L' are not provided by the paper; values shown are user-supplied (default 1)";

pub fn threshold_report(inp: &ThresholdInputs) -> Result<ThresholdReport> {
    for (name, v) in [
        ("epsilon", inp.epsilon),
        ("B1", inp.b1),
        ("B2", inp.b2),
        ("B3", inp.b3),
        ("L", inp.l),
        ("L'", inp.l_prime),
        ("lambda1", inp.lambda1),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveConstant { name, value: v });
        }
    }
    for (name, v) in [("fluct0", inp.fluct0), ("mean0", inp.mean0)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be a finite norm, got {v}")));
        }
    }
    let q = inp.epsilon * inp.lambda1 * inp.lambda1 / (4.0 * inp.b1);
    let k_bound = q.powf(3.0 / 8.0).min(1.0);
    let f = inp.fluct0;

    // (20211017eq04)
    // a zero factor wins over an overflowing exponential
    let lhs04 = if inp.a == 0.0 || f == 0.0 {
        0.0
    } else {
        inp.a * inp.a * inp.b2 * (inp.b2 * f.powi(4)).exp() * f.powi(6)
    };
    let rhs04 = (1.0 / 12.0f64).min(q.powf(0.75) / 12.0);
    // (20211017eq01)
    let rhs01 = (1.0 / (inp.b2 * inp.b2.exp())) * (1.0 / 12.0f64).min(q.powf(3.0 / 8.0) / 12.0);
    // (20211018eq01) and (20211026eq100)
    let a_bound_eq1018 = inp.epsilon / (1e7 * inp.l * f * f);
    let a_bound_eq100 = inp.epsilon / (1e6 * inp.l_prime * inp.b3.sqrt() * f);

    Ok(ThresholdReport {
        inputs: *inp,
        k_bound,
        a_bound_eq1018,
        a_bound_eq100,
        conditions: vec![
            Condition::new("20211017eq04", lhs04, rhs04),
            Condition::new("20211017eq01", inp.mean0, rhs01),
            Condition::new("20211018eq01", inp.a.abs(), a_bound_eq1018),
            Condition::new("20211026eq100", inp.a.abs(), a_bound_eq100),
        ],
        note: CONSTANTS_NOTE.into(),
    })
}

/// Threshold inputs read off a run config: ε, a, b from `[params]`, and
/// `‖u_∦(0)‖`, `‖∫u₀ dx‖` from its initial data. Constants stay at 1.
pub fn threshold_inputs_for(cfg: &RunConfig) -> Result<ThresholdInputs> {
    let grid = TorusGrid::new(cfg.grid.nx, cfg.grid.ny)?;
    let u0 = match &cfg.initial_data {
        InitialData::Checkpoint { path } => io::load_checkpoint(&cfg.base_dir.join(path))?.u,
        init => make_initial_data(&grid, init, cfg.seed)?,
    };
    let pair = u0.split_mean_fluct();
    Ok(ThresholdInputs {
        epsilon: cfg.params.epsilon,
        a: cfg.params.a,
        b: cfg.params.b,
        fluct0: pair.fluct_part.l2_norm(),
        mean0: pair.mean_part.l2_norm_integral_convention(),
        ..Default::default()
    })
}

/// One cell of an (a, A) sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub a: f64,
    pub amplitude: f64,
    /// Terminal status label, or `error` when the cell failed.
    pub status: String,
    pub final_l2: f64,
    pub decay_rate: f64,
    pub r2: f64,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: &str = "a,A,status,final_l2,decay_rate,r2";

impl SweepCell {
    pub fn csv_line(&self) -> String {
        format!(
            "{:e},{:e},{},{:e},{:e},{:e}",
            self.a, self.amplitude, self.status, self.final_l2, self.decay_rate, self.r2
        )
    }
}

fn cell_dir(out_dir: &Path, a: f64, amplitude: f64) -> PathBuf {
    out_dir.join("cells").join(format!("a{a:e}_A{amplitude:e}"))
}

/// Config of one sweep cell: `params.a = a`, `γ = 1/A`, tail fit on,
/// no bootstrap monitor and no nested sweep.
pub fn cell_config(base: &RunConfig, a: f64, amplitude: f64) -> RunConfig {
    let mut cfg = base.clone();
    cfg.params.a = a;
    cfg.params.gamma = 1.0 / amplitude;
    cfg.outputs.tail_fit = true;
    cfg.bootstrap = None;
    cfg.sweep = None;
    cfg
}

/// Runs every (a, A) cell of `base.sweep` on `jobs` threads (default: all
/// cores), writes per-cell outputs under `out_dir/cells/` and the merged
/// `map.csv`, ordered by (a, A).
pub fn sweep(base: &RunConfig, out_dir: &Path, jobs: Option<usize>) -> Result<Vec<SweepCell>> {
    let grid = base
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("no [sweep] section".into()))?;
    if grid.a.is_empty() || grid.amplitude.is_empty() {
        return Err(Error::Config("[sweep] a and amplitude must be nonempty".into()));
    }
    let mut keys: Vec<(f64, f64)> = grid
        .a
        .iter()
        .flat_map(|&a| grid.amplitude.iter().map(move |&amp| (a, amp)))
        .collect();
    keys.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    keys.dedup();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        keys.par_iter()
            .map(|&(a, amplitude)| {
                let cfg = cell_config(base, a, amplitude);
                match run_scenario(&cfg, &cell_dir(out_dir, a, amplitude)) {
                    Ok(out) => SweepCell {
                        a,
                        amplitude,
                        status: out.status.status.clone(),
                        final_l2: out.status.final_l2,
                        decay_rate: out.status.tail_fit.map_or(f64::NAN, |f| f.rate),
                        r2: out.status.tail_fit.map_or(f64::NAN, |f| f.r_squared),
                        error: None,
                    },
                    Err(e) => {
                        warn!("sweep cell a = {a}, A = {amplitude} failed: {e}");
                        SweepCell {
                            a,
                            amplitude,
                            status: "error".into(),
                            final_l2: f64::NAN,
                            decay_rate: f64::NAN,
                            r2: f64::NAN,
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect()
    });

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for c in &cells {
        csv.push_str(&c.csv_line());
        csv.push('\n');
    }
    write_atomic(&out_dir.join("map.csv"), csv.as_bytes())?;
    Ok(cells)
}

/// Scaling study of `λ_γ` for every shear listed in `[semigroup]`; writes
/// `scaling_<shear>.csv` and `semigroup_summary.json`.
pub fn run_semigroup(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<ScalingResult>> {
    let sec = cfg
        .semigroup
        .as_ref()
        .ok_or_else(|| Error::Config("no [semigroup] section".into()))?;
    let grid = TorusGrid::new(cfg.grid.nx, cfg.grid.ny)?;
    let probe = semigroup::band_limited_probe(&grid, cfg.seed, sec.k_min, sec.k_max)?;
    let template = cfg.params.to_params()?;
    let gammas = sec.gamma_list();
    let mut results = Vec::new();
    for name in &sec.shears {
        let v = shear_by_name(name)?;
        let res = semigroup::scaling_exponent(&template, &v, &gammas, &probe, &sec.decay)?;
        info!("{name}: slope {:.4} (r2 {:.4})", res.slope, res.slope_r2);
        let mut csv = Vec::new();
        res.write_csv(&mut csv)?;
        write_atomic(&out_dir.join(format!("scaling_{name}.csv")), &csv)?;
        results.push(res);
    }
    let summary: Vec<_> = results.iter().map(|r| r.summary_json()).collect();
    write_atomic(&out_dir.join("semigroup_summary.json"), &json_bytes(&summary))?;
    Ok(results)
}

/// Power-law fit of one H⁻¹ mixing curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingResult {
    pub shear: String,
    pub critical_order: u32,
    pub fit: DecayFit,
    pub curve: DecayCurve,
}

/// H⁻¹ decay under pure transport for every shear in `[mixing]`; writes
/// `mixing_<shear>.csv` (`t,h_minus_one`) and `mixing_summary.json`.
pub fn run_mixing(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<MixingResult>> {
    let sec = cfg
        .mixing
        .as_ref()
        .ok_or_else(|| Error::Config("no [mixing] section".into()))?;
    let grid = TorusGrid::new(cfg.grid.nx, cfg.grid.ny)?;
    let probe = semigroup::band_limited_probe(&grid, cfg.seed, sec.k_min, sec.k_max)?;
    let times = sec.times();
    let mut results = Vec::new();
    for name in &sec.shears {
        let v = shear_by_name(name)?;
        let curve = semigroup::mixing_decay_curve(&probe, &v, &times)?;
        let fit = semigroup::fit_power_law(&curve)?;
        info!("{name}: q = {:.4} (r2 {:.4})", fit.rate, fit.r_squared);
        let mut csv = String::from("t,h_minus_one\n");
        for (t, n) in curve.times.iter().zip(&curve.norms) {
            csv.push_str(&format!("{t:e},{n:e}\n"));
        }
        write_atomic(&out_dir.join(format!("mixing_{name}.csv")), csv.as_bytes())?;
        results.push(MixingResult {
            shear: name.clone(),
            critical_order: v.critical_order(),
            fit,
            curve,
        });
    }
    let summary: Vec<_> = results
        .iter()
        .map(|r| {
            serde_json::json!({
                "shear": r.shear,
                "critical_order": r.critical_order,
                "q": r.fit.rate,
                "r2": r.fit.r_squared,
                "t_min": r.fit.t_lo,
                "t_max": r.fit.t_hi,
            })
        })
        .collect();
    write_atomic(&out_dir.join("mixing_summary.json"), &json_bytes(&summary))?;
    Ok(results)
}
