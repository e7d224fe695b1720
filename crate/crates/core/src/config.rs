//! Run configuration (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [grid]
//! nx = 64
//! ny = 64
//!
//! [params]
//! epsilon = 0.5
//! gamma = 0.01
//! a = -1.0
//! form = "rescaled"        # or "original"
//!
//! [shear]
//! profile = "cosine"       # sine-cubed | constant | none | file
//!
//! [initial_data]
//! kind = "single-mode"
//! kx = 1
//! amp = 1.2
//!
//! [controller]
//! dt_init = 0.01
//! output_interval = 0.5
//!
//! [outputs]
//! t_end = 100.0
//! tail_fit = true
//! ```
//!
//! Optional sections: `[numerics]`, `[bootstrap]`, `[sweep]`,
//! `[semigroup]`, `[mixing]`. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{Scheme, StepController};
use crate::operators::{EquationForm, PhysicalParams, ShearProfile};
use crate::semigroup::DecayOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Single source of randomness for everything the run does. TOML
    /// integers are signed, so seeds written in a file are at most
    /// `i64::MAX`; `--seed` accepts the full `u64` range.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub shear: ShearSection,
    pub initial_data: InitialData,
    #[serde(default)]
    pub controller: StepController,
    pub outputs: OutputsSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    pub bootstrap: Option<BootstrapSection>,
    pub sweep: Option<SweepSection>,
    pub semigroup: Option<SemigroupSection>,
    pub mixing: Option<MixingSection>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub epsilon: f64,
    pub gamma: f64,
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub form: EquationForm,
}

impl ParamsSection {
    pub fn to_params(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(self.epsilon, self.gamma, self.a, self.b, self.c, self.form)
            .map_err(|e| Error::Config(format!("[params]: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearSection {
    #[serde(default = "default_profile")]
    pub profile: String,
    /// Sample file for `profile = "file"`, one value per line.
    pub path: Option<PathBuf>,
    /// Declared critical-point order for `profile = "file"`.
    pub critical_order: Option<u32>,
}

fn default_profile() -> String {
    "none".into()
}

impl Default for ShearSection {
    fn default() -> Self {
        Self {
            profile: default_profile(),
            path: None,
            critical_order: None,
        }
    }
}

/// Built-in profile by name.
pub fn shear_by_name(name: &str) -> Result<ShearProfile> {
    match name {
        "cosine" | "cos" => Ok(ShearProfile::cosine()),
        "sine-cubed" | "sin3" => Ok(ShearProfile::sine_cubed()),
        "constant" => Ok(ShearProfile::constant()),
        "none" | "zero" => Ok(ShearProfile::none()),
        other => Err(Error::Config(format!(
            "[shear] profile: unknown profile {other:?} (expected cosine, sine-cubed, constant, none or file)"
        ))),
    }
}

impl ShearSection {
    pub fn to_profile(&self, base_dir: &Path) -> Result<ShearProfile> {
        if self.profile != "file" {
            return shear_by_name(&self.profile);
        }
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| Error::Config("[shear] path is required for profile = \"file\"".into()))?;
        let m = self.critical_order.ok_or_else(|| {
            Error::Config("[shear] critical_order is required for profile = \"file\"".into())
        })?;
        ShearProfile::load(&base_dir.join(path), m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// `amp · sin(kx x + ky y)`
    SingleMode {
        #[serde(default = "one")]
        kx: i64,
        #[serde(default)]
        ky: i64,
        amp: f64,
    },
    /// Seeded Gaussian data on `k_min ≤ |k| ≤ k_max`.
    SeededRandom {
        /// Defaults to the top-level seed.
        seed: Option<u64>,
        k_min: f64,
        k_max: f64,
        amp: f64,
        #[serde(default)]
        mean_frac: f64,
    },
    /// Resume from a checkpoint file.
    Checkpoint { path: PathBuf },
}

fn one() -> i64 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub t_end: f64,
    /// Append an exponential fit of ‖u‖ over `[t_end/2, t_end]`.
    #[serde(default)]
    pub tail_fit: bool,
    /// Write the final state as `final.chk`.
    #[serde(default)]
    pub checkpoint: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    #[serde(default)]
    pub scheme: Scheme,
    /// Gradient coefficient of the recorded free energy; defaults to ε.
    pub grad_coeff: Option<f64>,
}

/// Source of `λ_γ` for the bootstrap monitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Value(f64),
    Named(LambdaSource),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSource {
    Measured,
    Formula,
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Named(LambdaSource::Measured)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    /// Spacing of the checkpoint grid `s ∈ {0, Δ, 2Δ, …}`; must be a
    /// multiple of the output interval.
    pub checkpoint_interval: f64,
    #[serde(default)]
    pub lambda: LambdaChoice,
    /// `C` in the fallback `λ_γ = C γ^{2/(2+m)}`.
    #[serde(default = "unit")]
    pub prefactor: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub a: Vec<f64>,
    /// Shear amplitudes `A`; each cell uses `γ = 1/A`.
    pub amplitude: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSection {
    /// Explicit γ list (strictly decreasing); otherwise log-spaced from
    /// `gamma_max` to `gamma_min` with `count` points.
    pub gammas: Option<Vec<f64>>,
    #[serde(default = "gamma_max")]
    pub gamma_max: f64,
    #[serde(default = "gamma_min")]
    pub gamma_min: f64,
    #[serde(default = "seven")]
    pub count: usize,
    #[serde(default = "scaling_shears")]
    pub shears: Vec<String>,
    #[serde(default = "unit")]
    pub k_min: f64,
    #[serde(default = "eight")]
    pub k_max: f64,
    #[serde(default)]
    pub decay: DecayOptions,
}

fn gamma_max() -> f64 {
    1e-1
}
fn gamma_min() -> f64 {
    1e-4
}
fn seven() -> usize {
    7
}
fn eight() -> f64 {
    8.0
}
fn scaling_shears() -> Vec<String> {
    vec!["cosine".into(), "none".into()]
}

impl SemigroupSection {
    pub fn gamma_list(&self) -> Vec<f64> {
        self.gammas.clone().unwrap_or_else(|| {
            crate::semigroup::log_spaced_desc(self.gamma_max, self.gamma_min, self.count)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    #[serde(default = "unit")]
    pub t_min: f64,
    #[serde(default = "hundred")]
    pub t_max: f64,
    /// Uniformly spaced sample times over `[t_min, t_max]`.
    #[serde(default = "hundred_usize")]
    pub samples: usize,
    #[serde(default = "mixing_shears")]
    pub shears: Vec<String>,
    #[serde(default = "unit")]
    pub k_min: f64,
    #[serde(default = "eight")]
    pub k_max: f64,
}

fn hundred() -> f64 {
    100.0
}
fn hundred_usize() -> usize {
    100
}
fn mixing_shears() -> Vec<String> {
    vec!["constant".into(), "cosine".into()]
}

impl MixingSection {
    pub fn times(&self) -> Vec<f64> {
        let n = self.samples.max(2);
        (0..n)
            .map(|i| self.t_min + (self.t_max - self.t_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

impl RunConfig {
    /// Parses and validates; errors carry the offending key and line.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fails only for seeds above `i64::MAX`.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        crate::spectral::TorusGrid::new(self.grid.nx, self.grid.ny)
            .map_err(|e| Error::Config(format!("[grid]: {e}")))?;
        self.params.to_params()?;
        self.shear.to_profile(&self.base_dir)?;
        self.controller
            .validate()
            .map_err(|e| Error::Config(format!("[controller]: {e}")))?;
        if !(self.outputs.t_end > 0.0 && self.outputs.t_end.is_finite()) {
            return cfg_err(format!("[outputs] t_end must be positive, got {}", self.outputs.t_end));
        }
        match &self.initial_data {
            InitialData::SingleMode { amp, .. } | InitialData::SeededRandom { amp, .. } if !(*amp > 0.0) => {
                return cfg_err(format!("[initial_data] amp must be positive, got {amp}"));
            }
            InitialData::SeededRandom { mean_frac, .. } if !(*mean_frac >= 0.0) => {
                return cfg_err(format!("[initial_data] mean_frac must be >= 0, got {mean_frac}"));
            }
            _ => {}
        }
        if let Some(b) = &self.bootstrap {
            if !(b.checkpoint_interval > 0.0) {
                return cfg_err("[bootstrap] checkpoint_interval must be positive".into());
            }
            let k = b.checkpoint_interval / self.controller.output_interval;
            if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                return cfg_err(
                    "[bootstrap] checkpoint_interval must be a multiple of controller.output_interval".into(),
                );
            }
            if let LambdaChoice::Value(v) = b.lambda {
                if !(v > 0.0) {
                    return cfg_err(format!("[bootstrap] lambda must be positive, got {v}"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.a.is_empty() || s.amplitude.is_empty() {
                return cfg_err("[sweep] a and amplitude must be nonempty".into());
            }
            if let Some(bad) = s.amplitude.iter().find(|v| !(**v > 0.0)) {
                return cfg_err(format!("[sweep] amplitude values must be positive, got {bad}"));
            }
        }
        if let Some(s) = &self.semigroup {
            for name in &s.shears {
                shear_by_name(name)?;
            }
            if s.gamma_list().len() < 5 {
                return cfg_err("[semigroup] needs at least 5 gamma values".into());
            }
        }
        if let Some(m) = &self.mixing {
            for name in &m.shears {
                shear_by_name(name)?;
            }
            if !(m.t_min >= 0.0 && m.t_max > m.t_min) {
                return cfg_err("[mixing] need 0 <= t_min < t_max".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[grid]
nx = 32
ny = 32
[params]
epsilon = 0.5
gamma = 0.1
a = -1.0
[shear]
profile = "cosine"
[initial_data]
kind = "single-mode"
amp = 1.0
[outputs]
t_end = 1.0
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_toml_str(BASE, Path::new(".")).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.params.form, EquationForm::Rescaled);
        assert_eq!(c.controller, StepController::default());
        assert_eq!(
            c.initial_data,
            InitialData::SingleMode {
                kx: 1,
                ky: 0,
                amp: 1.0
            }
        );
    }

    #[test]
    fn missing_key_is_named() {
        let text = BASE.replace("epsilon = 0.5\n", "");
        let err = RunConfig::from_toml_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("epsilon"), "{err}");
        assert!(err.is_input_error());
    }

    #[test]
    fn unknown_key_and_bad_values_rejected() {
        let text = BASE.replace("a = -1.0", "a = -1.0\nd = 2.0");
        assert!(RunConfig::from_toml_str(&text, Path::new(".")).is_err());
        let text = BASE.replace("epsilon = 0.5", "epsilon = -0.5");
        assert!(RunConfig::from_toml_str(&text, Path::new(".")).is_err());
        let text = BASE.replace("\"cosine\"", "\"wavy\"");
        assert!(RunConfig::from_toml_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let c = RunConfig::from_toml_str(BASE, Path::new(".")).unwrap();
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap(), Path::new(".")).unwrap();
        assert_eq!(back, c);
    }
}
