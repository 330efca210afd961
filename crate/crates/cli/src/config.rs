//! Scenario files: TOML describing a model, an input field, a time grid and
//! what to record.

use std::path::Path;

use fockflow::fit::Family;
use fockflow::{models, Displacement, EnvelopeKind, FieldSpec, SLHModel, Slot, TimeGrid, C64};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub model: ModelConfig,
    /// "ground" or "excited"; `initial_basis` picks any basis state instead.
    #[serde(default = "ground")]
    pub initial: String,
    pub initial_basis: Option<usize>,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_observables")]
    pub observables: Vec<String>,
    #[serde(default = "default_invariant_tolerance")]
    pub invariant_tolerance: f64,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub fit: Vec<FitConfig>,
}

fn ground() -> String {
    "ground".into()
}

fn default_observables() -> Vec<String> {
    vec!["pe".into()]
}

fn default_invariant_tolerance() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoLevel {
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default)]
        detuning: f64,
    },
    TwoModeTwoLevel {
        gamma1: f64,
        gamma2: f64,
    },
    JaynesCummings {
        g: f64,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default)]
        delta_atom: f64,
        #[serde(default)]
        delta_cav: f64,
        /// Cavity truncation; defaults to the input photon number plus one.
        n_max: Option<usize>,
        /// (time, atomic detuning) switches.
        #[serde(default)]
        schedule: Vec<(f64, f64)>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotConfig {
    pub envelope: EnvelopeKind,
    #[serde(default)]
    pub mode: usize,
    pub photons: u32,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    #[default]
    Vacuum,
    Fock {
        envelope: EnvelopeKind,
        photons: u32,
        #[serde(default)]
        mode: usize,
    },
    /// Pure Σ a_n |n⟩; amplitudes are (n, re, im) and are normalized here.
    Superposition {
        envelope: EnvelopeKind,
        amplitudes: Vec<(u32, f64, f64)>,
        #[serde(default)]
        mode: usize,
    },
    Mixture {
        envelope: EnvelopeKind,
        probabilities: Vec<(u32, f64)>,
        #[serde(default)]
        mode: usize,
    },
    /// Coherent pulse with mean photon number n̄. Without `truncation` the
    /// exact displaced master equation is used.
    Coherent {
        envelope: EnvelopeKind,
        mean_photons: f64,
        #[serde(default)]
        phase: f64,
        truncation: Option<u32>,
        #[serde(default)]
        mode: usize,
    },
    Product {
        slots: Vec<SlotConfig>,
        #[serde(default = "yes")]
        orthogonal: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t0: Option<f64>,
    pub tf: Option<f64>,
    /// Extra time after the last envelope ends, used when `tf` is absent.
    #[serde(default)]
    pub tail: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    pub atol: Option<f64>,
    pub fixed_step: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { t0: None, tf: None, tail: 0.0, samples: default_samples(), rtol: default_rtol(), atol: None, fixed_step: None }
    }
}

fn default_samples() -> usize {
    401
}

fn default_rtol() -> f64 {
    1e-9
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<Axis>,
    #[serde(default = "default_scalars")]
    pub scalars: Vec<String>,
    pub optimize: Option<Optimize>,
}

fn default_scalars() -> Vec<String> {
    vec!["max:pe".into()]
}

/// One sweep axis over a dotted config path, e.g. `field.envelope.bandwidth`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub values: Option<Vec<toml::Value>>,
    /// Inclusive integer range.
    pub range: Option<(i64, i64)>,
    /// (start, stop, count), logarithmically spaced.
    pub logspace: Option<(f64, f64, usize)>,
    pub linspace: Option<(f64, f64, usize)>,
}

impl Axis {
    pub fn points(&self) -> Result<Vec<toml::Value>, CliError> {
        let given = [self.values.is_some(), self.range.is_some(), self.logspace.is_some(), self.linspace.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::Parse(format!("axis '{}' needs exactly one of values, range, logspace, linspace", self.param)));
        }
        let spaced = |(a, b, n): (f64, f64, usize), log: bool| -> Vec<toml::Value> {
            (0..n)
                .map(|k| {
                    let s = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
                    let v = if log { (a.ln() + s * (b.ln() - a.ln())).exp() } else { a + s * (b - a) };
                    toml::Value::Float(v)
                })
                .collect()
        };
        let pts = if let Some(v) = &self.values {
            v.clone()
        } else if let Some((a, b)) = self.range {
            (a..=b).map(toml::Value::Integer).collect()
        } else if let Some(l) = self.logspace {
            if !(l.0 > 0.0 && l.1 > 0.0) {
                return Err(CliError::Parse(format!("logspace on '{}' needs positive bounds", self.param)));
            }
            spaced(l, true)
        } else {
            spaced(self.linspace.unwrap(), false)
        };
        if pts.is_empty() {
            return Err(CliError::Parse(format!("axis '{}' is empty", self.param)));
        }
        Ok(pts)
    }
}

/// Maximize `objective` over `param` in [lo·s, hi·s] on a log scale, with s
/// read from the `scale_with` path (1 when absent).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optimize {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub scale_with: Option<String>,
    #[serde(default = "default_objective")]
    pub objective: String,
    #[serde(default = "default_opt_tol")]
    pub tol: f64,
}

fn default_objective() -> String {
    "max:pe".into()
}

fn default_opt_tol() -> f64 {
    2e-4
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub family: Family,
    pub x: String,
    pub y: String,
    pub range: (f64, f64),
}

pub fn load(path: &Path) -> Result<toml::Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn parse(value: toml::Value) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig = value.try_into().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    if cfg.observables.is_empty() {
        return Err(CliError::Parse("no observables requested".into()));
    }
    if !cfg.fit.is_empty() && cfg.sweep.as_ref().map_or(true, |s| s.axes.is_empty()) {
        return Err(CliError::Parse("a fit needs a sweep with at least one axis".into()));
    }
    Ok(cfg)
}

/// Replace the value at a dotted path, creating tables along the way.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| CliError::Parse(format!("'{path}' does not name a table entry")))?;
        if k + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(CliError::Parse("empty parameter path".into()))
}

pub fn get_path<'a>(root: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(root, |v, p| v.get(p))
}

pub fn as_f64(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

impl FieldConfig {
    fn envelopes(&self) -> Vec<&EnvelopeKind> {
        match self {
            FieldConfig::Vacuum => vec![],
            FieldConfig::Fock { envelope, .. }
            | FieldConfig::Superposition { envelope, .. }
            | FieldConfig::Mixture { envelope, .. }
            | FieldConfig::Coherent { envelope, .. } => vec![envelope],
            FieldConfig::Product { slots, .. } => slots.iter().map(|s| &s.envelope).collect(),
        }
    }

    fn max_photons(&self) -> u32 {
        match self {
            FieldConfig::Vacuum => 0,
            FieldConfig::Fock { photons, .. } => *photons,
            FieldConfig::Superposition { amplitudes, .. } => amplitudes.iter().map(|a| a.0).max().unwrap_or(0),
            FieldConfig::Mixture { probabilities, .. } => probabilities.iter().map(|a| a.0).max().unwrap_or(0),
            FieldConfig::Coherent { truncation, mean_photons, .. } => truncation.unwrap_or(mean_photons.ceil() as u32),
            FieldConfig::Product { slots, .. } => slots.iter().map(|s| s.photons).sum(),
        }
    }

    pub fn build(&self) -> fockflow::Result<FieldSpec> {
        let env = |k: &EnvelopeKind| fockflow::make_envelope(k.clone());
        let with_mode = |mut spec: FieldSpec, mode: usize| {
            spec.slots.iter_mut().for_each(|s| s.mode = mode);
            spec
        };
        let spec = match self {
            FieldConfig::Vacuum => FieldSpec::vacuum(),
            FieldConfig::Fock { envelope, photons, mode } => with_mode(FieldSpec::fock(env(envelope)?, *photons), *mode),
            FieldConfig::Superposition { envelope, amplitudes, mode } => {
                let norm: f64 = amplitudes.iter().map(|a| a.1 * a.1 + a.2 * a.2).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(fockflow::FockError::InvalidField("superposition amplitudes are all zero".into()));
                }
                let amps: Vec<(u32, C64)> = amplitudes.iter().map(|a| (a.0, C64::new(a.1, a.2) / norm)).collect();
                with_mode(FieldSpec::superposition(env(envelope)?, &amps), *mode)
            }
            FieldConfig::Mixture { envelope, probabilities, mode } => {
                with_mode(FieldSpec::mixture(env(envelope)?, probabilities), *mode)
            }
            FieldConfig::Coherent { envelope, mean_photons, phase, truncation, mode } => {
                let alpha = C64::from_polar(mean_photons.sqrt(), *phase);
                match truncation {
                    Some(n) => with_mode(FieldSpec::coherent_truncated(env(envelope)?, alpha, *n), *mode),
                    None => FieldSpec::vacuum().with_displacement(Displacement { mode: *mode, amplitude: alpha, envelope: env(envelope)? }),
                }
            }
            FieldConfig::Product { slots, orthogonal } => {
                let slots = slots
                    .iter()
                    .map(|s| Ok(Slot { envelope: env(&s.envelope)?, mode: s.mode, max_photons: s.photons }))
                    .collect::<fockflow::Result<Vec<_>>>()?;
                FieldSpec::product(slots, *orthogonal)
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl ModelConfig {
    pub fn build(&self, photons: u32) -> fockflow::Result<SLHModel> {
        match self {
            ModelConfig::TwoLevel { gamma, detuning } => models::two_level(*gamma, *detuning),
            ModelConfig::TwoModeTwoLevel { gamma1, gamma2 } => models::two_mode_two_level(*gamma1, *gamma2),
            ModelConfig::JaynesCummings { g, gamma, delta_atom, delta_cav, n_max, schedule } => {
                models::jaynes_cummings(*g, *gamma, *delta_atom, *delta_cav, n_max.unwrap_or(photons as usize + 1), schedule)
            }
        }
    }

    pub fn n_max(&self, photons: u32) -> Option<usize> {
        match self {
            ModelConfig::JaynesCummings { n_max, .. } => Some(n_max.unwrap_or(photons as usize + 1)),
            _ => None,
        }
    }
}

/// Everything needed for one run.
pub struct Built {
    pub model: SLHModel,
    pub spec: FieldSpec,
    pub rho0: fockflow::Operator,
    pub grid: TimeGrid,
    pub n_max: Option<usize>,
}

/// Run-level overrides from the command line.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub rtol: Option<f64>,
    pub fixed_step: Option<f64>,
}

impl ScenarioConfig {
    pub fn build(&self, ov: Overrides) -> Result<Built, CliError> {
        let photons = self.field.max_photons();
        let model = self.model.build(photons).map_err(CliError::Model)?;
        let spec = self.field.build().map_err(CliError::Model)?;
        let d = model.dim();
        let n_max = self.model.n_max(photons);
        let k = match (self.initial_basis, self.initial.as_str(), n_max) {
            (Some(k), _, _) => k,
            (None, "ground", None) => models::GROUND,
            (None, "excited", None) => models::EXCITED,
            (None, "ground", Some(n)) => models::jc_index(0, 0, n),
            (None, "excited", Some(n)) => models::jc_index(1, 0, n),
            (None, other, _) => return Err(CliError::Parse(format!("unknown initial state '{other}'"))),
        };
        if k >= d {
            return Err(CliError::Parse(format!("initial basis state {k} outside dimension {d}")));
        }

        let supports: Vec<(f64, f64)> = self
            .field
            .envelopes()
            .into_iter()
            .map(|e| fockflow::make_envelope(e.clone()).map(|e| e.support()))
            .collect::<fockflow::Result<_>>()
            .map_err(CliError::Model)?;
        let lo = supports.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = supports.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let t0 = self.grid.t0.unwrap_or(if lo.is_finite() { lo } else { 0.0 });
        let tf = self.grid.tf.unwrap_or(if hi.is_finite() { hi + self.grid.tail } else { t0 + self.grid.tail.max(1.0) });
        if !(tf > t0) {
            return Err(CliError::Parse(format!("time grid [{t0}, {tf}] is empty")));
        }
        let rtol = ov.rtol.unwrap_or(self.grid.rtol);
        let mut grid = TimeGrid::sampled(t0, tf, self.grid.samples).with_tolerances(rtol, self.grid.atol.unwrap_or(rtol * 1e-2));
        if let Some(dt) = ov.fixed_step.or(self.grid.fixed_step) {
            grid = grid.fixed(dt);
        }
        Ok(Built { model, spec, rho0: models::basis_state(d, k), grid, n_max })
    }
}
