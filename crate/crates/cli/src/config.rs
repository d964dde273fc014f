//! Scenario configuration read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use dephasing_core::bplus::{self, CorrelatedPFState};
use dephasing_core::decoherence::{FrequencySpec, GaussianPairParams, PhaseProfile, Spectrum, Tabulated1d, Tabulated2d};
use dephasing_core::generator::DtMode;
use dephasing_core::{states, Tolerances};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rates,
    Evolve,
    Bplus,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rates => "rates",
            Mode::Evolve => "evolve",
            Mode::Bplus => "bplus",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Polarization Hilbert-space dimension, 2 or 4; inferred from `frequency` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Refractive-index difference `Δn`; 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<FrequencyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_profile: Option<String>,
    /// Explicit tolerances; unspecified fields take the default profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bplus: Option<BPlusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

/// Frequency distributions; all frequencies in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrequencyConfig {
    UniGaussian { mean: f64, sd: f64 },
    UniLorentzian { center: f64, width: f64 },
    /// CSV of `(omega, p)` rows.
    UniTabulated { path: PathBuf },
    BiGaussianSingle(GaussianPairParams),
    BiGaussianDouble(GaussianPairParams),
    /// CSV of `(omega_a, omega_b, p)` rows, `omega_a` outer.
    BiTabulated { path: PathBuf },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Generalized Bloch vector in the crate's Hermitian basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bloch: Option<Vec<f64>>,
    /// Random full-rank state drawn from the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n).map(|i| self.t_start + (self.t_end - self.t_start) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File stem for `<stem>.csv` and `<stem>.json`; the mode name when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeConfig {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<DerivativeConfig>,
    /// Add exact-map columns to trajectory output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    /// Generator entries above `rate_limit · rate scale` trigger a bridge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BPlusConfig {
    /// One of the shipped scenario presets; `markovian` when nothing else is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// `[re, im]`; `1/√2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_h: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_v: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Spectrum>,
    /// CSV of `(omega, p)` rows; replaces `spectrum`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<PhaseProfile>,
    /// CSV of `(omega, theta)` rows; replaces `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads a config file and resolves relative data paths against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(FrequencyConfig::UniTabulated { path } | FrequencyConfig::BiTabulated { path }) = &mut cfg.frequency {
            fix(path);
        }
        if let Some(b) = &mut cfg.bplus {
            b.spectrum_csv.iter_mut().chain(b.theta_csv.iter_mut()).for_each(fix);
        }
        Ok(cfg)
    }

    pub fn dn(&self) -> f64 {
        self.dn.unwrap_or(1.0)
    }

    pub fn tolerances(&self, profile_override: Option<&str>) -> anyhow::Result<Tolerances> {
        if let Some(t) = &self.tolerances {
            return Ok(*t);
        }
        let name = profile_override.or(self.tolerance_profile.as_deref()).unwrap_or("default");
        Tolerances::profile(name).ok_or_else(|| anyhow!("tolerance_profile: unknown profile `{name}` (default, strict, loose)"))
    }

    pub fn derivative(&self) -> DtMode {
        match self.generator.as_ref().and_then(|g| g.derivative).unwrap_or_default() {
            DerivativeConfig::Analytic => DtMode::Analytic,
            DerivativeConfig::FiniteDifference => DtMode::FiniteDifference,
        }
    }

    /// Field-level checks for `mode`.
    pub fn validate(&self, mode: Mode) -> anyhow::Result<()> {
        if let Some(m) = self.mode {
            if m != mode {
                bail!("mode: config is for `{}` but `{}` was requested", m.name(), mode.name());
            }
        }
        if !(self.dn().is_finite() && self.dn() != 0.0) {
            bail!("dn: must be finite and nonzero");
        }
        if let Some(t) = &self.tolerances {
            let fields = [t.algebraic, t.hermiticity, t.quadrature, t.normalization, t.singular_det, t.pole_epsilon, t.rk_rtol, t.rk_atol];
            if fields.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                bail!("tolerances: every tolerance must be positive");
            }
        }
        if let Some(t) = &self.time {
            if t.n_points < 2 {
                bail!("time.n_points: must be at least 2, got {}", t.n_points);
            }
            if !(t.t_start >= 0.0 && t.t_end > t.t_start && t.t_end.is_finite()) {
                bail!("time: need t_end > t_start >= 0, got t_start = {}, t_end = {}", t.t_start, t.t_end);
            }
        }
        match mode {
            Mode::Rates | Mode::Evolve => {
                let spec = self.frequency_spec()?;
                let dim = if spec.is_bivariate() { 4 } else { 2 };
                if let Some(d) = self.dim {
                    if d != dim {
                        bail!("dim: {d} does not match the frequency distribution (dimension {dim})");
                    }
                }
                if self.time.is_none() {
                    bail!("time: required for `{}`", mode.name());
                }
                if mode == Mode::Evolve {
                    self.initial_state(dim, &Tolerances::default(), 0)?;
                }
            }
            Mode::Bplus => {
                self.bplus_state()?;
            }
            Mode::Verify => {
                if self.verify.as_ref().and_then(|v| v.samples) == Some(0) {
                    bail!("verify.samples: must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn frequency_spec(&self) -> anyhow::Result<FrequencySpec> {
        let f = self.frequency.as_ref().ok_or_else(|| anyhow!("frequency: required"))?;
        let spec = match f {
            FrequencyConfig::UniGaussian { mean, sd } => FrequencySpec::UniGaussian { mean: *mean, sd: *sd },
            FrequencyConfig::UniLorentzian { center, width } => FrequencySpec::UniLorentzian { center: *center, width: *width },
            FrequencyConfig::UniTabulated { path } => {
                FrequencySpec::UniTabulated(Tabulated1d::from_csv(path, 1e-6).with_context(|| format!("frequency.path: {}", path.display()))?)
            }
            FrequencyConfig::BiGaussianSingle(p) => FrequencySpec::BiGaussianSingle(*p),
            FrequencyConfig::BiGaussianDouble(p) => FrequencySpec::BiGaussianDouble(*p),
            FrequencyConfig::BiTabulated { path } => {
                FrequencySpec::BiTabulated(Tabulated2d::from_csv(path, 1e-6).with_context(|| format!("frequency.path: {}", path.display()))?)
            }
        };
        spec.validate().map_err(|e| anyhow!("frequency: {e}"))?;
        Ok(spec)
    }

    /// Initial density matrix for a system of dimension `dim`.
    pub fn initial_state(&self, dim: usize, tol: &Tolerances, seed: u64) -> anyhow::Result<dephasing_core::CMatrix> {
        use rand::SeedableRng;
        let init = self.initial.as_ref().ok_or_else(|| anyhow!("initial: required"))?;
        let chosen = [init.preset.is_some(), init.bloch.is_some(), init.random == Some(true)].iter().filter(|b| **b).count();
        if chosen != 1 {
            bail!("initial: set exactly one of preset, bloch, random = true");
        }
        let rho = if let Some(name) = &init.preset {
            if !states::PRESET_NAMES.contains(&name.as_str()) {
                bail!("initial.preset: unknown state `{name}` (known: {})", states::PRESET_NAMES.join(", "));
            }
            states::preset(name)?
        } else if let Some(r) = &init.bloch {
            let basis = dephasing_core::basis::build_basis(dim)?;
            if r.len() != basis.len() {
                bail!("initial.bloch: expected {} components, got {}", basis.len(), r.len());
            }
            let rho = basis.from_bloch(&dephasing_core::basis::BlochVector::new(dim, r.clone().into()))?;
            if states::min_eigenvalue(&rho) < -tol.hermiticity || (rho.trace().re - 1.0).abs() > 1e-9 {
                bail!("initial.bloch: not a density matrix");
            }
            rho
        } else {
            states::random_density_matrix(dim, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
        };
        if rho.nrows() != dim {
            bail!("initial: state has dimension {} but the system has dimension {dim}", rho.nrows());
        }
        Ok(rho)
    }

    pub fn bplus_state(&self) -> anyhow::Result<(String, CorrelatedPFState)> {
        let b = self.bplus.clone().unwrap_or_default();
        let custom = b.spectrum.is_some() || b.spectrum_csv.is_some() || b.theta.is_some() || b.theta_csv.is_some();
        let (label, mut state) = if custom {
            if b.preset.is_some() {
                bail!("bplus: `preset` cannot be combined with spectrum or theta");
            }
            let spectrum = match (&b.spectrum_csv, b.spectrum) {
                (Some(path), _) => Spectrum::Tabulated(
                    Tabulated1d::from_csv(path, 1e-6).with_context(|| format!("bplus.spectrum_csv: {}", path.display()))?,
                ),
                (None, Some(s)) => s,
                (None, None) => Spectrum::gaussian(0.0, 1.0),
            };
            let theta = match (&b.theta_csv, b.theta) {
                (Some(path), _) => load_theta(path)?,
                (None, Some(t)) => t,
                (None, None) => PhaseProfile::zero(),
            };
            ("custom".to_string(), CorrelatedPFState::balanced(spectrum, theta))
        } else {
            let name = b.preset.as_deref().unwrap_or("markovian");
            let p = bplus::preset(name)
                .ok_or_else(|| anyhow!("bplus.preset: unknown preset `{name}` (known: {})", bplus::PRESET_NAMES.join(", ")))?;
            (p.name.to_string(), p.state)
        };
        if let Some([re, im]) = b.c_h {
            state.c_h = Complex64::new(re, im);
        }
        if let Some([re, im]) = b.c_v {
            state.c_v = Complex64::new(re, im);
        }
        state.validate(&Tolerances::default()).map_err(|e| anyhow!("bplus: {e}"))?;
        Ok((label, state))
    }
}

/// Reads `(omega, theta)` rows, with or without a header.
fn load_theta(path: &Path) -> anyhow::Result<PhaseProfile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("bplus.theta_csv: {}", path.display()))?;
    let mut omega = Vec::new();
    let mut theta = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 2 => {
                omega.push(v[0]);
                theta.push(v[1]);
            }
            Err(_) if i == 0 => continue,
            _ => bail!("bplus.theta_csv: line {} is not an (omega, theta) pair", i + 1),
        }
    }
    let p = PhaseProfile::Tabulated { omega, theta };
    p.validate().map_err(|e| anyhow!("bplus.theta_csv: {e}"))?;
    Ok(p)
}
