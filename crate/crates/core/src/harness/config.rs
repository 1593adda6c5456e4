//! Per-command TOML schemas. Unknown keys are rejected.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::carleman::C1FitMode;
use crate::error::{Error, Result};
use crate::observability::YArc;

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into().trim_end().to_string())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn grid_size(name: &str, m: usize) -> Result<()> {
    if m >= 4 {
        Ok(())
    } else {
        Err(schema(format!("`{name}` must be at least 4, got {m}")))
    }
}

fn interval(a: f64, b: f64) -> Result<()> {
    if -1.0 <= a && a < b && b <= 1.0 {
        Ok(())
    } else {
        Err(schema(format!("need -1 <= a < b <= 1, got a = {a}, b = {b}")))
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(schema(format!("`{name}` must lie in (0, 1), got {v}")))
    }
}

fn edge(a: f64) -> Result<()> {
    if a > -1.0 && a < 1.0 {
        Ok(())
    } else {
        Err(schema(format!("`a` must lie in (-1, 1), got {a}")))
    }
}

fn increasing_k(k: &[u32]) -> Result<()> {
    if k.len() >= 5 && k[0] >= 1 && k.windows(2).all(|w| w[1] > w[0]) {
        Ok(())
    } else {
        Err(schema("`k_list` must be increasing, start at 1 or more and have at least 5 entries"))
    }
}

/// Arc `[start, start + length)` of `𝕋`.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub start: f64,
    pub length: f64,
}

pub(crate) fn arcs_or_full(arcs: &Option<Vec<ArcConfig>>) -> Vec<YArc> {
    match arcs {
        Some(list) => list.iter().map(|a| YArc { start: a.start, length: a.length }).collect(),
        None => vec![YArc { start: -PI, length: 2.0 * PI }],
    }
}

/// Real profile on `(-1, 1)`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileConfig {
    /// `Σ c_j sin(jπ(x+1)/2)`.
    Sine { coefficients: Vec<f64> },
    /// `A e^{-(x-c)²/(2w²)}`.
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

impl ProfileConfig {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ProfileConfig::Sine { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| c * ((j + 1) as f64 * PI * 0.5 * (x + 1.0)).sin())
                .sum(),
            ProfileConfig::Gaussian { center, width, amplitude } => amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp(),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            ProfileConfig::Sine { coefficients } if coefficients.is_empty() => Err(schema("sine profile needs coefficients")),
            ProfileConfig::Gaussian { width, .. } => positive("width", *width),
            _ => Ok(()),
        }
    }
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Sine { coefficients: vec![1.0] }
    }
}

/// `r(t) h(x)` with `r(t) = cos(ωt + φ)`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub profile: ProfileConfig,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Time-dependence `R(t, x)` of a separable source.
#[derive(Debug, Clone, Copy, Deserialize, Serialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `R ≡ 1`.
    #[default]
    Unit,
    /// `R(t, x) = 1 + slope (t - T1)`, `ρ₀ = 1`.
    Linear { slope: f64 },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_k() -> usize {
    10
}
fn default_modes() -> usize {
    crate::quasimode::DEFAULT_MODES
}
fn default_j_max() -> u32 {
    40
}
fn default_slack() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EigConfig {
    pub n: i64,
    pub p: f64,
    pub m: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub richardson: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationConfig {
    pub n_max: i64,
    pub p_max: i64,
    pub m: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub n: i64,
    pub p: f64,
    pub m: usize,
    pub t: f64,
    #[serde(default = "default_outputs")]
    pub outputs: usize,
    #[serde(default)]
    pub initial: ProfileConfig,
    pub source: Option<SourceConfig>,
}

fn default_outputs() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObsConstantConfig {
    pub a: f64,
    pub b: f64,
    pub arcs: Option<Vec<ArcConfig>>,
    pub t: f64,
    pub n_max: i64,
    pub p_max: i64,
    pub m: usize,
    pub kx: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub arcs: Option<Vec<ArcConfig>>,
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub a: f64,
    pub b: f64,
    pub times: Vec<f64>,
    pub n_max: i64,
    pub p_max: i64,
    pub m: usize,
    pub kx: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub t: f64,
    pub p: f64,
    #[serde(default = "half")]
    pub rho: f64,
    #[serde(default = "default_j_max")]
    pub j_max: u32,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionConfig {
    pub c8: f64,
    pub c9: f64,
    /// Defaults to `K*(ρ)`.
    pub k_star: Option<f64>,
    pub t: f64,
    pub p: f64,
    #[serde(default = "half")]
    pub rho: f64,
    #[serde(default = "default_j_max")]
    pub j_max: u32,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuasimodeConfig {
    pub a: f64,
    pub k_list: Vec<u32>,
    pub t: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_qm_grid")]
    pub m: usize,
    #[serde(default = "default_qm_modes")]
    pub modes: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_samples() -> usize {
    8
}
fn default_qm_grid() -> usize {
    2000
}
fn default_qm_modes() -> usize {
    96
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub a: f64,
    pub k_list: Vec<u32>,
    /// Explicit horizons; otherwise a geometric grid around the threshold.
    pub t_list: Option<Vec<f64>>,
    pub t_center: Option<f64>,
    #[serde(default = "default_t_count")]
    pub t_count: usize,
    #[serde(default = "default_t_ratio")]
    pub t_ratio: f64,
    /// Fixed grid; otherwise `max(2000, 60 p^{3/2})` capped.
    pub m: Option<usize>,
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Gauss–Legendre nodes in `p` (unbounded scan only).
    pub nodes: Option<usize>,
}

fn default_t_count() -> usize {
    9
}
fn default_t_ratio() -> f64 {
    std::f64::consts::SQRT_2
}

impl ScanConfig {
    pub fn horizons(&self) -> Vec<f64> {
        if let Some(list) = &self.t_list {
            return list.clone();
        }
        let center = self.t_center.unwrap_or_else(|| crate::quasimode::theoretical_threshold(self.a));
        let half = (self.t_count / 2) as i32;
        (0..self.t_count as i32).map(|i| center * self.t_ratio.powi(i - half)).collect()
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "default_corpus")]
    pub corpus_size: usize,
    #[serde(default = "default_corpus_seed")]
    pub corpus_seed: u64,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default = "default_eight")]
    pub n_max: i64,
    #[serde(default = "default_eight")]
    pub p_max: i64,
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default = "default_carleman_grid")]
    pub m: usize,
    #[serde(default = "default_time_nodes")]
    pub time_nodes: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_fit")]
    pub fit: C1FitMode,
}

fn default_corpus() -> usize {
    40
}
fn default_corpus_seed() -> u64 {
    11
}
fn default_split_seed() -> u64 {
    7
}
fn default_eight() -> i64 {
    8
}
fn default_t_values() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_carleman_grid() -> usize {
    400
}
fn default_time_nodes() -> usize {
    64
}
fn default_fit() -> C1FitMode {
    C1FitMode::Split
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityModeConfig {
    pub n: i64,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub t1: f64,
    pub m: usize,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub model: ModelConfig,
    /// Also sweep `|n|, |p| ≤ sweep_max` with the same profile.
    pub sweep_max: Option<i64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Stability3dConfig {
    pub a: f64,
    pub b: f64,
    pub arcs: Option<Vec<ArcConfig>>,
    pub t0: f64,
    pub t1: f64,
    pub n_max: i64,
    pub p_max: i64,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    /// Minimal window; defaults to `4 / C4` from a small envelope fit.
    pub t_star: Option<f64>,
    /// Defaults to a truncated observability constant on the window.
    pub c10: Option<f64>,
}

/// A parsed, range-checked experiment.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Experiment {
    Eig(EigConfig),
    Dissipation(DissipationConfig),
    Evolve(EvolveConfig),
    ObsConstant(ObsConstantConfig),
    SpectralIneq(SpectralConfig),
    EnvelopeFit(EnvelopeConfig),
    LrSchedule(ScheduleConfig),
    LrRecursion(RecursionConfig),
    Quasimode(QuasimodeConfig),
    TminScan(ScanConfig),
    UnboundedScan(ScanConfig),
    Carleman(CarlemanConfig),
    StabilityMode(StabilityModeConfig),
    Stability3d(Stability3dConfig),
}

pub const COMMANDS: [&str; 14] = [
    "eig",
    "dissipation",
    "evolve",
    "obs-constant",
    "spectral-ineq",
    "envelope-fit",
    "lr-schedule",
    "lr-recursion",
    "quasimode",
    "tmin-scan",
    "unbounded-scan",
    "carleman",
    "stability-mode",
    "stability-3d",
];

fn typed<T: serde::de::DeserializeOwned>(table: toml::Table) -> Result<T> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| schema(e.to_string()))
}

/// Output directory named by the optional top-level `out` key.
pub fn configured_out(text: &str) -> Option<std::path::PathBuf> {
    let table: toml::Table = text.parse().ok()?;
    table.get("out")?.as_str().map(Into::into)
}

impl Experiment {
    /// Parses `text` for `command`; a `command` key in the file must agree.
    pub fn parse(command: Option<&str>, text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| schema(e.to_string()))?;
        let declared = match table.remove("command") {
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => return Err(schema(format!("`command` must be a string, got {other}"))),
            None => None,
        };
        let name = match (command, declared.as_deref()) {
            (Some(c), Some(d)) if c != d => return Err(schema(format!("config declares command `{d}` but `{c}` was requested"))),
            (Some(c), _) => c.to_string(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return Err(schema("missing field `command`")),
        };
        match table.remove("out") {
            None | Some(toml::Value::String(_)) => {}
            Some(other) => return Err(schema(format!("`out` must be a string, got {other}"))),
        }
        let exp = match name.as_str() {
            "eig" => Experiment::Eig(typed(table)?),
            "dissipation" => Experiment::Dissipation(typed(table)?),
            "evolve" => Experiment::Evolve(typed(table)?),
            "obs-constant" => Experiment::ObsConstant(typed(table)?),
            "spectral-ineq" => Experiment::SpectralIneq(typed(table)?),
            "envelope-fit" => Experiment::EnvelopeFit(typed(table)?),
            "lr-schedule" => Experiment::LrSchedule(typed(table)?),
            "lr-recursion" => Experiment::LrRecursion(typed(table)?),
            "quasimode" => Experiment::Quasimode(typed(table)?),
            "tmin-scan" => Experiment::TminScan(typed(table)?),
            "unbounded-scan" => Experiment::UnboundedScan(typed(table)?),
            "carleman" => Experiment::Carleman(typed(table)?),
            "stability-mode" => Experiment::StabilityMode(typed(table)?),
            "stability-3d" => Experiment::Stability3d(typed(table)?),
            other => return Err(schema(format!("unknown command `{other}`; expected one of {}", COMMANDS.join(", ")))),
        };
        exp.check()?;
        Ok(exp)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Eig(_) => "eig",
            Experiment::Dissipation(_) => "dissipation",
            Experiment::Evolve(_) => "evolve",
            Experiment::ObsConstant(_) => "obs-constant",
            Experiment::SpectralIneq(_) => "spectral-ineq",
            Experiment::EnvelopeFit(_) => "envelope-fit",
            Experiment::LrSchedule(_) => "lr-schedule",
            Experiment::LrRecursion(_) => "lr-recursion",
            Experiment::Quasimode(_) => "quasimode",
            Experiment::TminScan(_) => "tmin-scan",
            Experiment::UnboundedScan(_) => "unbounded-scan",
            Experiment::Carleman(_) => "carleman",
            Experiment::StabilityMode(_) => "stability-mode",
            Experiment::Stability3d(_) => "stability-3d",
        }
    }

    /// Seeds that drive random draws, for the manifest.
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Experiment::Carleman(c) => vec![c.corpus_seed, c.split_seed],
            Experiment::Stability3d(c) => vec![c.seed],
            _ => Vec::new(),
        }
    }

    /// Range checks beyond the type-level schema.
    pub fn check(&self) -> Result<()> {
        match self {
            Experiment::Eig(c) => {
                grid_size("m", c.m)?;
                if c.k == 0 || c.k > c.m - 1 {
                    return Err(schema(format!("`k` must lie in 1..={}", c.m - 1)));
                }
                Ok(())
            }
            Experiment::Dissipation(c) => {
                grid_size("m", c.m)?;
                if c.n_max < 0 || c.p_max < 0 {
                    return Err(schema("`n_max` and `p_max` must be nonnegative"));
                }
                Ok(())
            }
            Experiment::Evolve(c) => {
                grid_size("m", c.m)?;
                positive("t", c.t)?;
                c.initial.check()?;
                if let Some(s) = &c.source {
                    s.profile.check()?;
                }
                if c.outputs < 2 {
                    return Err(schema("`outputs` must be at least 2"));
                }
                Ok(())
            }
            Experiment::ObsConstant(c) => {
                interval(c.a, c.b)?;
                positive("t", c.t)?;
                grid_size("m", c.m)?;
                if c.kx == 0 || c.n_max < 0 || c.p_max < 0 {
                    return Err(schema("`kx` must be positive and truncations nonnegative"));
                }
                Ok(())
            }
            Experiment::SpectralIneq(c) => {
                if c.n_list.is_empty() {
                    return Err(schema("`n_list` must be nonempty"));
                }
                Ok(())
            }
            Experiment::EnvelopeFit(c) => {
                interval(c.a, c.b)?;
                grid_size("m", c.m)?;
                if c.times.is_empty() {
                    return Err(schema("`times` must be nonempty"));
                }
                c.times.iter().try_for_each(|&t| positive("times", t))
            }
            Experiment::LrSchedule(c) => {
                positive("t", c.t)?;
                open_unit("rho", c.rho)?;
                if c.p < 0.0 {
                    return Err(schema("`p` must be nonnegative"));
                }
                Ok(())
            }
            Experiment::LrRecursion(c) => {
                open_unit("rho", c.rho)?;
                positive("c8", c.c8)?;
                positive("c9", c.c9)?;
                positive("t", c.t)?;
                if let Some(k) = c.k_star {
                    positive("k_star", k)?;
                }
                Ok(())
            }
            Experiment::Quasimode(c) => {
                edge(c.a)?;
                positive("t", c.t)?;
                grid_size("m", c.m)?;
                if c.k_list.len() < 2 || c.k_list[0] == 0 || c.samples == 0 || c.modes == 0 {
                    return Err(schema("quasimode needs two or more k values >= 1, samples and modes"));
                }
                Ok(())
            }
            Experiment::TminScan(c) | Experiment::UnboundedScan(c) => {
                edge(c.a)?;
                increasing_k(&c.k_list)?;
                let ts = c.horizons();
                if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0)) || ts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(schema("horizons must be positive and increasing"));
                }
                if let Some(m) = c.m {
                    grid_size("m", m)?;
                }
                if c.nodes == Some(0) {
                    return Err(schema("`nodes` must be positive"));
                }
                Ok(())
            }
            Experiment::Carleman(c) => {
                interval(c.a, c.b)?;
                positive("c2", c.c2)?;
                grid_size("m", c.m)?;
                if c.corpus_size < 2 || c.t_values.is_empty() {
                    return Err(schema("corpus needs two or more elements and horizons"));
                }
                c.t_values.iter().try_for_each(|&t| positive("t_values", t))
            }
            Experiment::StabilityMode(c) => {
                interval(c.a, c.b)?;
                grid_size("m", c.m)?;
                c.profile.check()?;
                if !(c.t0 >= 0.0 && c.t1 > c.t0) {
                    return Err(schema("need 0 <= t0 < t1"));
                }
                Ok(())
            }
            Experiment::Stability3d(c) => {
                interval(c.a, c.b)?;
                grid_size("m", c.m)?;
                if !(c.t0 >= 0.0 && c.t1 > c.t0) {
                    return Err(schema("need 0 <= t0 < t1"));
                }
                if c.n_max < 0 || c.p_max < 0 {
                    return Err(schema("`n_max` and `p_max` must be nonnegative"));
                }
                Ok(())
            }
        }
    }
}
