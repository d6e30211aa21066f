//! Experiment configuration: TOML files with unit-bearing quantities,
//! resolved against the case presets into SI values.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adjoint::TipDelta;
use crate::control::{CostWeights, LearningRate};
use crate::error::{Result, SolverError};
use crate::rod::{BaseBoundary, RodParameters, Vec2};

/// Which experiment a config describes. The three named cases fill any
/// field the file leaves out from their preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    #[default]
    Reach,
    Fetch,
    Shoot,
    Custom,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Case::Reach => "reach",
            Case::Fetch => "fetch",
            Case::Shoot => "shoot",
            Case::Custom => "custom",
        };
        f.write_str(name)
    }
}

/// Discretisation profile: grid size and time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `N = 100`, `dt = 1e-5` s.
    Fine,
    /// `N = 50`, `dt = 2e-5` s.
    #[default]
    Desk,
}

impl Profile {
    pub fn segments(self) -> usize {
        match self {
            Profile::Fine => 100,
            Profile::Desk => 50,
        }
    }

    pub fn dt(self) -> f64 {
        match self {
            Profile::Fine => 1e-5,
            Profile::Desk => 2e-5,
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fine" => Ok(Profile::Fine),
            "desk" => Ok(Profile::Desk),
            other => Err(format!("unknown profile `{other}` (expected fine or desk)")),
        }
    }
}

/// One Gaussian term of the initial curvature,
/// `magnitude * exp(-(s - center)^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    /// Peak curvature [1/m].
    pub magnitude: f64,
    /// Arc-length of the peak [m].
    pub center: f64,
    /// Standard deviation [m].
    pub width: f64,
}

/// Field the wave tracker follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// `|u_C|` on the elements.
    #[default]
    Couple,
    /// `|u_F|` on the nodes.
    Force,
}

/// What is located at every time sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tracking {
    /// Peak of the control magnitude.
    Amplitude,
    /// Peak of the magnitude of the centred time difference of the control
    /// over `half_width` seconds. Ignores the slowly varying global profile.
    Rate { half_width: f64 },
}

impl Default for Tracking {
    fn default() -> Self {
        Tracking::Rate { half_width: 1e-3 }
    }
}

/// Settings of the wave-speed and direction analyses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    /// Time window `[t_a, t_b]` [s]; defaults to the last 0.05 s.
    pub window: Option<(f64, f64)>,
    pub channel: Channel,
    pub tracking: Tracking,
    /// Fits with `R^2` below this are flagged unreliable.
    pub min_r2: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: None,
            channel: Channel::Couple,
            tracking: Tracking::default(),
            min_r2: 0.5,
        }
    }
}

impl AnalysisConfig {
    pub fn window_for(&self, horizon: f64) -> (f64, f64) {
        self.window.unwrap_or(((horizon - 0.05).max(0.0), horizon))
    }
}

/// A Young's modulus and density pair of a material sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub youngs_modulus: f64,
    pub density: f64,
}

/// Parameter lists swept by `sweep`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepConfig {
    pub materials: Vec<Material>,
    pub chi1: Vec<f64>,
}

/// Fully resolved experiment, all values SI.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case: Case,
    pub rod: RodParameters,
    pub chi1: f64,
    pub chi2: f64,
    pub eta: LearningRate,
    pub horizon: f64,
    pub dt: f64,
    pub iterations: usize,
    pub epsilon: f64,
    pub tip_delta: TipDelta,
    pub target: Vec2,
    pub bumps: Vec<Bump>,
    pub output: Option<PathBuf>,
    /// Snapshot instants per iteration, endpoints included.
    pub snapshots: usize,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    /// Preset for a case with the given profile.
    pub fn preset(case: Case, profile: Profile) -> Self {
        let rod = RodParameters {
            segments: profile.segments(),
            ..RodParameters::default()
        };
        let length = rod.length;
        let mut config = Self {
            case,
            rod,
            chi1: 10.0,
            chi2: 2e4,
            eta: LearningRate::Constant(3e-5),
            horizon: 0.5,
            dt: profile.dt(),
            iterations: 20,
            epsilon: 1e-8,
            tip_delta: TipDelta::Kronecker,
            target: Vec2::new(0.09, 0.09),
            bumps: Vec::new(),
            output: None,
            snapshots: 6,
            analysis: AnalysisConfig::default(),
            sweep: SweepConfig::default(),
        };
        match case {
            Case::Reach | Case::Custom => {}
            Case::Fetch => {
                config.horizon = 0.6;
                config.eta = LearningRate::Constant(4e-5);
                config.target = Vec2::new(0.0, -0.02);
                config.iterations = 40;
            }
            Case::Shoot => {
                config.horizon = 0.8;
                config.chi1 = 100.0;
                config.target = Vec2::new(0.16, 0.10);
                config.bumps = [
                    (20.0, 0.0, 0.015),
                    (78.0, 0.3, 0.015),
                    (10.0, 0.7, 0.012),
                    (-30.0, 0.85, 0.008),
                ]
                .into_iter()
                .map(|(magnitude, frac, width)| Bump {
                    magnitude,
                    center: frac * length,
                    width,
                })
                .collect();
            }
        }
        config
    }

    /// Replaces the grid size and time step by the profile's.
    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.rod.segments = profile.segments();
        self.dt = profile.dt();
        self
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights {
            chi1: self.chi1,
            chi2: self.chi2,
            eta: self.eta.clone(),
            horizon: self.horizon,
            tip_delta: self.tip_delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rod.validate()?;
        self.weights().validate()?;
        crate::error::positive("dt", self.dt)?;
        if self.iterations == 0 {
            return Err(invalid("iterations", "need at least one iteration"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(invalid("epsilon", "must be non-negative"));
        }
        if !(self.target.x.is_finite() && self.target.y.is_finite()) {
            return Err(invalid("target", "must be finite"));
        }
        if self.snapshots < 2 {
            return Err(invalid("snapshots", "need at least 2 instants"));
        }
        for b in &self.bumps {
            if !(b.width.is_finite() && b.width > 0.0) {
                return Err(invalid("bumps.width", "must be positive"));
            }
            if !(b.magnitude.is_finite() && b.center.is_finite()) {
                return Err(invalid("bumps", "must be finite"));
            }
        }
        if let Some((a, b)) = self.analysis.window {
            if !(0.0 <= a && a < b && b <= self.horizon) {
                return Err(invalid(
                    "analysis.window",
                    format!("[{a}, {b}] must lie inside [0, {}]", self.horizon),
                ));
            }
        }
        if let Tracking::Rate { half_width } = self.analysis.tracking {
            if !(half_width.is_finite() && half_width > 0.0) {
                return Err(invalid("analysis.half_width", "must be positive"));
            }
        }
        for m in &self.sweep.materials {
            if !(m.youngs_modulus > 0.0 && m.density > 0.0) {
                return Err(invalid("sweep.materials", "E and rho must be positive"));
            }
        }
        if self
            .sweep
            .chi1
            .iter()
            .any(|c| !(c.is_finite() && *c >= 0.0))
        {
            return Err(invalid("sweep.chi1", "must be non-negative"));
        }
        Ok(())
    }

    /// Parses and resolves a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path)
    }

    /// Parses and resolves TOML text; `path` only labels errors.
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| SolverError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let config = raw
            .resolve()
            .map_err(|(key, message)| SolverError::Config {
                path: path.to_path_buf(),
                message: match line_of(text, &key) {
                    Some(line) => format!("line {line}, `{key}`: {message}"),
                    None => format!("`{key}`: {message}"),
                },
            })?;
        config.validate().map_err(|e| SolverError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    /// Serialises every field explicitly, in SI, so that parsing the result
    /// gives back `self`.
    pub fn to_toml_string(&self) -> String {
        let raw = RawConfig::from_resolved(self);
        toml::to_string(&raw).expect("config serialises")
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> SolverError {
    SolverError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// 1-based line of the first assignment to the last path segment of `key`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next()?;
    let leaf = leaf.split('[').next()?;
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(leaf)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Length,
    Pressure,
    Density,
    Time,
    Curvature,
    Damping,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3)],
            Dimension::Pressure => &[("Pa", 1.0), ("kPa", 1e3), ("MPa", 1e6)],
            Dimension::Density => &[
                ("kg/m^3", 1.0),
                ("kg/m3", 1.0),
                ("g/cm^3", 1e3),
                ("g/cm3", 1e3),
            ],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3)],
            Dimension::Curvature => &[("1/m", 1.0), ("1/cm", 1e2)],
            Dimension::Damping => &[("kg/s", 1.0)],
        }
    }
}

/// A number in SI, or a string with a number and a unit (`"20 cm"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn si(&self, dim: Dimension) -> std::result::Result<f64, String> {
        match self {
            Quantity::Number(x) => Ok(*x),
            Quantity::Text(text) => parse_quantity(text, dim),
        }
    }
}

fn parse_quantity(text: &str, dim: Dimension) -> std::result::Result<f64, String> {
    let text = text.trim();
    // "20 cm", "78 1/m", or unspaced "10kPa", "2e-3s"
    let (number, unit) = match text.split_once(char::is_whitespace) {
        Some((n, u)) => (n, u.trim()),
        None => {
            let bytes = text.as_bytes();
            let split = (0..bytes.len())
                .find(|&i| {
                    let c = bytes[i];
                    let exponent = matches!(c, b'e' | b'E')
                        && i > 0
                        && bytes
                            .get(i + 1)
                            .is_some_and(|n| n.is_ascii_digit() || matches!(n, b'+' | b'-'));
                    c.is_ascii_alphabetic() && !exponent
                })
                .unwrap_or(text.len());
            text.split_at(split)
        }
    };
    let value: f64 = number
        .parse()
        .map_err(|_| format!("cannot read a number from `{text}`"))?;
    if unit.is_empty() {
        return Ok(value);
    }
    dim.units()
        .iter()
        .find(|(name, _)| *name == unit)
        .map(|(_, scale)| value * scale)
        .ok_or_else(|| {
            let names: Vec<&str> = dim.units().iter().map(|(n, _)| *n).collect();
            format!(
                "unknown unit `{unit}` (expected one of {})",
                names.join(", ")
            )
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawBoundary {
    Clamped,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawTipDelta {
    Kronecker,
    Consistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawTracking {
    Amplitude,
    Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawEta {
    Constant(f64),
    Schedule(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRod {
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_diameter: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tip_diameter: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    youngs_modulus: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    damping: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary: Option<RawBoundary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    #[serde(skip_serializing_if = "Option::is_none")]
    chi1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<RawEta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tip_delta: Option<RawTipDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBump {
    magnitude: Quantity,
    center: Quantity,
    width: Quantity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<[Quantity; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<Channel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tracking: Option<RawTracking>,
    #[serde(skip_serializing_if = "Option::is_none")]
    half_width: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    youngs_modulus: Quantity,
    density: Quantity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    materials: Vec<RawMaterial>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    chi1: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    case: Case,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<[Quantity; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshots: Option<usize>,
    /// Replaces the preset bump list when present, even if empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    bumps: Option<Vec<RawBump>>,
    #[serde(default)]
    rod: RawRod,
    #[serde(default)]
    weights: RawWeights,
    #[serde(default)]
    analysis: RawAnalysis,
    #[serde(default)]
    sweep: RawSweep,
}

type Resolve<T> = std::result::Result<T, (String, String)>;

fn get(q: &Option<Quantity>, key: &str, dim: Dimension, default: f64) -> Resolve<f64> {
    match q {
        Some(q) => q.si(dim).map_err(|m| (key.to_string(), m)),
        None => Ok(default),
    }
}

fn req(q: &Quantity, key: &str, dim: Dimension) -> Resolve<f64> {
    q.si(dim).map_err(|m| (key.to_string(), m))
}

impl RawConfig {
    fn resolve(&self) -> Resolve<ExperimentConfig> {
        let mut c = ExperimentConfig::preset(self.case, self.profile.unwrap_or_default());
        let r = &self.rod;
        c.rod.length = get(&r.length, "rod.length", Dimension::Length, c.rod.length)?;
        if let Some(n) = r.segments {
            c.rod.segments = n;
        }
        c.rod.base_diameter = get(
            &r.base_diameter,
            "rod.base_diameter",
            Dimension::Length,
            c.rod.base_diameter,
        )?;
        c.rod.tip_diameter = get(
            &r.tip_diameter,
            "rod.tip_diameter",
            Dimension::Length,
            c.rod.tip_diameter,
        )?;
        c.rod.density = get(&r.density, "rod.density", Dimension::Density, c.rod.density)?;
        c.rod.youngs_modulus = get(
            &r.youngs_modulus,
            "rod.youngs_modulus",
            Dimension::Pressure,
            c.rod.youngs_modulus,
        )?;
        c.rod.damping = get(&r.damping, "rod.damping", Dimension::Damping, c.rod.damping)?;
        if let Some(b) = r.boundary {
            c.rod.boundary = match b {
                RawBoundary::Clamped => BaseBoundary::Clamped,
                RawBoundary::Free => BaseBoundary::Free,
            };
        }

        let w = &self.weights;
        c.chi1 = w.chi1.unwrap_or(c.chi1);
        c.chi2 = w.chi2.unwrap_or(c.chi2);
        if let Some(eta) = &w.eta {
            c.eta = match eta {
                RawEta::Constant(x) => LearningRate::Constant(*x),
                RawEta::Schedule(xs) => LearningRate::Schedule(xs.clone()),
            };
        }
        c.horizon = get(&w.horizon, "weights.horizon", Dimension::Time, c.horizon)?;
        c.dt = get(&w.dt, "weights.dt", Dimension::Time, c.dt)?;
        c.iterations = w.iterations.unwrap_or(c.iterations);
        c.epsilon = w.epsilon.unwrap_or(c.epsilon);
        if let Some(d) = w.tip_delta {
            c.tip_delta = match d {
                RawTipDelta::Kronecker => TipDelta::Kronecker,
                RawTipDelta::Consistent => TipDelta::Consistent,
            };
        }

        if let Some([x, y]) = &self.target {
            c.target = Vec2::new(
                req(x, "target", Dimension::Length)?,
                req(y, "target", Dimension::Length)?,
            );
        }
        c.output = self.output.clone().or(c.output);
        c.snapshots = self.snapshots.unwrap_or(c.snapshots);
        if let Some(bumps) = &self.bumps {
            c.bumps = bumps
                .iter()
                .map(|b| {
                    Ok(Bump {
                        magnitude: req(&b.magnitude, "magnitude", Dimension::Curvature)?,
                        center: req(&b.center, "center", Dimension::Length)?,
                        width: req(&b.width, "width", Dimension::Length)?,
                    })
                })
                .collect::<Resolve<_>>()?;
        }

        let a = &self.analysis;
        if let Some([ta, tb]) = &a.window {
            c.analysis.window = Some((
                req(ta, "analysis.window", Dimension::Time)?,
                req(tb, "analysis.window", Dimension::Time)?,
            ));
        }
        c.analysis.channel = a.channel.unwrap_or(c.analysis.channel);
        let half_width = get(
            &a.half_width,
            "analysis.half_width",
            Dimension::Time,
            match c.analysis.tracking {
                Tracking::Rate { half_width } => half_width,
                Tracking::Amplitude => 1e-3,
            },
        )?;
        c.analysis.tracking = match a.tracking {
            Some(RawTracking::Amplitude) => Tracking::Amplitude,
            Some(RawTracking::Rate) | None => Tracking::Rate { half_width },
        };
        c.analysis.min_r2 = a.min_r2.unwrap_or(c.analysis.min_r2);

        c.sweep.materials = self
            .sweep
            .materials
            .iter()
            .map(|m| {
                Ok(Material {
                    youngs_modulus: req(&m.youngs_modulus, "youngs_modulus", Dimension::Pressure)?,
                    density: req(&m.density, "density", Dimension::Density)?,
                })
            })
            .collect::<Resolve<_>>()?;
        c.sweep.chi1 = self.sweep.chi1.clone();
        Ok(c)
    }

    fn from_resolved(c: &ExperimentConfig) -> Self {
        let n = Quantity::Number;
        Self {
            case: c.case,
            profile: None,
            target: Some([n(c.target.x), n(c.target.y)]),
            output: c.output.clone(),
            snapshots: Some(c.snapshots),
            bumps: Some(
                c.bumps
                    .iter()
                    .map(|b| RawBump {
                        magnitude: n(b.magnitude),
                        center: n(b.center),
                        width: n(b.width),
                    })
                    .collect(),
            ),
            rod: RawRod {
                length: Some(n(c.rod.length)),
                segments: Some(c.rod.segments),
                base_diameter: Some(n(c.rod.base_diameter)),
                tip_diameter: Some(n(c.rod.tip_diameter)),
                density: Some(n(c.rod.density)),
                youngs_modulus: Some(n(c.rod.youngs_modulus)),
                damping: Some(n(c.rod.damping)),
                boundary: Some(match c.rod.boundary {
                    BaseBoundary::Clamped => RawBoundary::Clamped,
                    BaseBoundary::Free => RawBoundary::Free,
                }),
            },
            weights: RawWeights {
                chi1: Some(c.chi1),
                chi2: Some(c.chi2),
                eta: Some(match &c.eta {
                    LearningRate::Constant(x) => RawEta::Constant(*x),
                    LearningRate::Schedule(xs) => RawEta::Schedule(xs.clone()),
                }),
                horizon: Some(n(c.horizon)),
                dt: Some(n(c.dt)),
                iterations: Some(c.iterations),
                epsilon: Some(c.epsilon),
                tip_delta: Some(match c.tip_delta {
                    TipDelta::Kronecker => RawTipDelta::Kronecker,
                    TipDelta::Consistent => RawTipDelta::Consistent,
                }),
            },
            analysis: RawAnalysis {
                window: c.analysis.window.map(|(a, b)| [n(a), n(b)]),
                channel: Some(c.analysis.channel),
                tracking: Some(match c.analysis.tracking {
                    Tracking::Amplitude => RawTracking::Amplitude,
                    Tracking::Rate { .. } => RawTracking::Rate,
                }),
                half_width: match c.analysis.tracking {
                    Tracking::Rate { half_width } => Some(n(half_width)),
                    Tracking::Amplitude => None,
                },
                min_r2: Some(c.analysis.min_r2),
            },
            sweep: RawSweep {
                materials: c
                    .sweep
                    .materials
                    .iter()
                    .map(|m| RawMaterial {
                        youngs_modulus: n(m.youngs_modulus),
                        density: n(m.density),
                    })
                    .collect(),
                chi1: c.sweep.chi1.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("20 cm", Dimension::Length).unwrap(), 0.2);
        assert_eq!(parse_quantity("10kPa", Dimension::Pressure).unwrap(), 1e4);
        assert_eq!(
            parse_quantity("1.5e-2 m", Dimension::Length).unwrap(),
            0.015
        );
        assert_eq!(
            parse_quantity("1.042 g/cm^3", Dimension::Density).unwrap(),
            1042.0
        );
        assert_eq!(
            parse_quantity("78 1/m", Dimension::Curvature).unwrap(),
            78.0
        );
        assert_eq!(parse_quantity("0.5", Dimension::Time).unwrap(), 0.5);
        assert_eq!(parse_quantity("2e-3s", Dimension::Time).unwrap(), 2e-3);
        assert!(parse_quantity("20 kg", Dimension::Length).is_err());
        assert!(parse_quantity("cm", Dimension::Length).is_err());
    }

    #[test]
    fn presets() {
        let r = parse("case = \"reach\"").unwrap();
        assert_eq!(r.horizon, 0.5);
        assert_eq!((r.chi1, r.chi2), (10.0, 2e4));
        assert_eq!(r.eta, LearningRate::Constant(3e-5));
        assert_eq!(r.target, Vec2::new(0.09, 0.09));
        assert_eq!(r.iterations, 20);
        assert_eq!((r.rod.segments, r.dt), (50, 2e-5));

        let f = parse("case = \"fetch\"").unwrap();
        assert_eq!(f.horizon, 0.6);
        assert_eq!(f.eta, LearningRate::Constant(4e-5));
        assert_eq!(f.target, Vec2::new(0.0, -0.02));
        assert_eq!(f.iterations, 40);

        let s = parse("case = \"shoot\"\nprofile = \"fine\"").unwrap();
        assert_eq!(s.horizon, 0.8);
        assert_eq!(s.chi1, 100.0);
        assert_eq!(s.iterations, 20);
        assert_eq!((s.rod.segments, s.dt), (100, 1e-5));
        let m: Vec<f64> = s.bumps.iter().map(|b| b.magnitude).collect();
        assert_eq!(m, [20.0, 78.0, 10.0, -30.0]);
        let c: Vec<f64> = s.bumps.iter().map(|b| b.center / 0.2).collect();
        for (a, b) in c.iter().zip([0.0, 0.3, 0.7, 0.85]) {
            assert!((a - b).abs() < 1e-12);
        }
        let w: Vec<f64> = s.bumps.iter().map(|b| b.width).collect();
        assert_eq!(w, [0.015, 0.015, 0.012, 0.008]);
    }

    #[test]
    fn units_are_converted() {
        let c = parse(
            r#"
case = "custom"
target = ["5 cm", "-2 cm"]
[rod]
length = "30 cm"
youngs_modulus = "20 kPa"
density = "2.084 g/cm^3"
[weights]
horizon = "300 ms"
eta = [1e-5, 2e-5]
"#,
        )
        .unwrap();
        assert!((c.rod.length - 0.3).abs() < 1e-15);
        assert_eq!(c.rod.youngs_modulus, 2e4);
        assert!((c.rod.density - 2084.0).abs() < 1e-9);
        assert!((c.horizon - 0.3).abs() < 1e-15);
        assert_eq!(c.target, Vec2::new(0.05, -0.02));
        assert_eq!(c.eta, LearningRate::Schedule(vec![1e-5, 2e-5]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("case = \"reach\"\ncolour = 3").is_err());
        let e = parse("[rod]\nyoung = \"10 kPa\"").unwrap_err().to_string();
        assert!(e.contains("young"), "{e}");
        assert!(parse("case = \"swim\"").is_err());
    }

    #[test]
    fn bad_units_name_the_line() {
        let e = parse("case = \"reach\"\n[rod]\nlength = \"20 kg\"\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 3"), "{e}");
        assert!(e.contains("rod.length"), "{e}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse("[rod]\ndensity = -1").is_err());
        assert!(parse("[weights]\nchi1 = -1").is_err());
        assert!(parse("[analysis]\nwindow = [0.4, 0.6]").is_err());
        assert!(parse("snapshots = 1").is_err());
    }

    #[test]
    fn profile_override() {
        let c = parse("case = \"reach\"")
            .unwrap()
            .with_profile(Profile::Fine);
        assert_eq!((c.rod.segments, c.dt), (100, 1e-5));
    }

    #[test]
    fn shoot_round_trips() {
        let c = ExperimentConfig::preset(Case::Shoot, Profile::Fine);
        let text = c.to_toml_string();
        assert_eq!(parse(&text).unwrap(), c);
    }
}
