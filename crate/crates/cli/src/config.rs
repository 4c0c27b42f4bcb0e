//! Run configuration. Every section has defaults, unknown keys are fatal,
//! and [`RunConfig::resolve`] makes every default explicit for the echo.

use std::path::{Path, PathBuf};

use mech_wigner::backaction::ScheduleEntry;
use mech_wigner::device::{DeviceParams, DevicePreset, FreeParameter, MatchConvention, RamanParams};
use mech_wigner::fockspace::StateSpec;
use mech_wigner::tomography::{IntensityPolicy, ProbeGridSpec, SynthesisMode, WignerSpec};
use mech_wigner::C64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const REFERENCE_PRESET: &str = "lithium6_reference";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for grid sweeps; 0 picks the machine default.
    pub threads: usize,
    pub device: DeviceSection,
    pub dynamics: DynamicsSection,
    pub tomography: TomographySection,
    pub backaction: BackactionSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            device: DeviceSection::default(),
            dynamics: DynamicsSection::default(),
            tomography: TomographySection::default(),
            backaction: BackactionSection::default(),
        }
    }
}

/// Either a named preset (or preset file), or explicit parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<DeviceParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raman: Option<RamanParams>,
    pub solve_for: FreeParameter,
    pub convention: MatchConvention,
}

impl Default for DeviceSection {
    fn default() -> Self {
        Self { preset: None, params: None, raman: None, solve_for: FreeParameter::DeltaL, convention: MatchConvention::Signed }
    }
}

/// Cantilever state descriptor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    Fock { n: usize },
    Coherent { alpha: [f64; 2] },
    Thermal { nbar: f64 },
    Cat { alpha: [f64; 2], #[serde(default)] phase: f64 },
}

impl StateConfig {
    pub fn spec(&self) -> StateSpec {
        let c = |a: [f64; 2]| C64::new(a[0], a[1]);
        match *self {
            StateConfig::Fock { n } => StateSpec::Fock(n),
            StateConfig::Coherent { alpha } => StateSpec::Coherent(c(alpha)),
            StateConfig::Thermal { nbar } => StateSpec::Thermal(nbar),
            StateConfig::Cat { alpha, phase } => StateSpec::Cat { alpha: c(alpha), phase },
        }
    }

    pub fn label(&self) -> String {
        match *self {
            StateConfig::Fock { n } => format!("fock({n})"),
            StateConfig::Coherent { alpha } => format!("coherent({}{:+}i)", alpha[0], alpha[1]),
            StateConfig::Thermal { nbar } => format!("thermal({nbar})"),
            StateConfig::Cat { alpha, phase } => format!("cat({}{:+}i, phase {phase})", alpha[0], alpha[1]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub g: f64,
    pub intensities: Vec<f64>,
    pub tau_max: f64,
    pub tau_points: usize,
    pub phi: f64,
    pub atom_excited: f64,
    pub phonon_dim: usize,
    pub state: StateConfig,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            g: 1.0,
            intensities: vec![25.0, 100.0, 400.0],
            tau_max: 1.0,
            tau_points: 201,
            phi: 0.0,
            atom_excited: 0.0,
            phonon_dim: 16,
            state: StateConfig::Fock { n: 0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    pub g: f64,
    pub dim: usize,
    pub state: StateConfig,
    pub atom_excited: f64,
    pub synthesis: SynthesisMode,
    /// Shots per probe; 0 means noise-free records.
    pub shots: u64,
    pub raster: ProbeGridSpec,
    /// Cartesian μ grid: `mu_grid_n` cells per axis inside a disk of
    /// `mu_grid_radius`.
    pub mu_grid_n: usize,
    pub mu_grid_radius: f64,
    pub wigner: WignerSpec,
    pub round_trip_tolerance: f64,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            g: 830.0,
            dim: 64,
            state: StateConfig::Cat { alpha: [1.5, 0.0], phase: 0.0 },
            atom_excited: 0.0,
            synthesis: SynthesisMode::ClosedForm,
            shots: 0,
            raster: ProbeGridSpec {
                mu_max: 4.0,
                radial_count: 128,
                angular_count: 512,
                intensity: IntensityPolicy::BaseIntensity { intensity: 400.0 },
            },
            mu_grid_n: 64,
            mu_grid_radius: 4.0,
            wigner: WignerSpec::symmetric(64, 5.0),
            round_trip_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeChoice {
    ConditionOnGround,
    /// Born-rule draws seeded by the run seed.
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackactionSection {
    pub g: f64,
    pub dim: usize,
    pub state: StateConfig,
    pub steps: usize,
    /// One entry is repeated for every step; otherwise one per step.
    pub schedule: Vec<ScheduleEntry>,
    pub outcomes: OutcomeChoice,
    pub wigner: WignerSpec,
}

impl Default for BackactionSection {
    fn default() -> Self {
        Self {
            g: 830.0,
            dim: 128,
            state: StateConfig::Fock { n: 0 },
            steps: 4,
            schedule: vec![ScheduleEntry { tau: 0.005, intensity: 400.0, phi: 0.0 }],
            outcomes: OutcomeChoice::ConditionOnGround,
            wigner: WignerSpec { nx: 128, np: 256, x_max: 4.0, p_max: 15.0 },
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fill presets and repeated schedules in, then validate. `base` is the
    /// directory relative preset paths are resolved against.
    pub fn resolve(mut self, base: &Path) -> Result<Self, CliError> {
        self.device = self.device.resolve(base)?;
        let b = &mut self.backaction;
        if b.steps == 0 {
            return Err(field("backaction.steps", "must be at least 1"));
        }
        match b.schedule.len() {
            1 => b.schedule = vec![b.schedule[0]; b.steps],
            n if n == b.steps => {}
            n => return Err(field("backaction.schedule", &format!("has {n} entries; expected 1 or steps = {}", b.steps))),
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let d = &self.dynamics;
        positive("dynamics.g", d.g)?;
        positive("dynamics.tau_max", d.tau_max)?;
        if d.intensities.is_empty() {
            return Err(field("dynamics.intensities", "must not be empty"));
        }
        for &i in &d.intensities {
            positive("dynamics.intensities", i)?;
        }
        if d.tau_points < 2 {
            return Err(field("dynamics.tau_points", "must be at least 2"));
        }
        probability("dynamics.atom_excited", d.atom_excited)?;
        let t = &self.tomography;
        positive("tomography.g", t.g)?;
        probability("tomography.atom_excited", t.atom_excited)?;
        positive("tomography.raster.mu_max", t.raster.mu_max)?;
        positive("tomography.mu_grid_radius", t.mu_grid_radius)?;
        positive("tomography.round_trip_tolerance", t.round_trip_tolerance)?;
        if t.raster.radial_count < 2 || t.raster.angular_count < 2 {
            return Err(field("tomography.raster", "radial_count and angular_count must be at least 2"));
        }
        if t.mu_grid_n < 2 {
            return Err(field("tomography.mu_grid_n", "must be at least 2"));
        }
        wigner("tomography.wigner", &t.wigner)?;
        let b = &self.backaction;
        positive("backaction.g", b.g)?;
        for e in &b.schedule {
            positive("backaction.schedule.tau", e.tau)?;
            positive("backaction.schedule.intensity", e.intensity)?;
            finite("backaction.schedule.phi", e.phi)?;
        }
        wigner("backaction.wigner", &b.wigner)?;
        for (name, s) in [("dynamics.state", d.state), ("tomography.state", t.state), ("backaction.state", b.state)] {
            state(name, &s)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl DeviceSection {
    fn resolve(self, base: &Path) -> Result<Self, CliError> {
        let (device, raman) = match (&self.preset, self.params) {
            (Some(_), Some(_)) => return Err(field("device", "set either preset or params, not both")),
            (None, Some(p)) => (p, self.raman),
            (preset, None) => {
                let name = preset.as_deref().unwrap_or(REFERENCE_PRESET);
                if name == REFERENCE_PRESET {
                    (DeviceParams::lithium6_reference(), self.raman.or_else(|| Some(RamanParams::lithium6_reference())))
                } else {
                    let path = resolve_path(base, name);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| field("device.preset", &format!("{}: {e}", path.display())))?;
                    let p = DevicePreset::from_toml(&text).map_err(|e| field("device.preset", &format!("{}: {e}", path.display())))?;
                    (p.device, self.raman.or(p.raman))
                }
            }
        };
        device.validate().map_err(|e| field("device.params", &e.to_string()))?;
        if let Some(r) = &raman {
            r.validate().map_err(|e| field("device.raman", &e.to_string()))?;
        }
        Ok(Self { preset: None, params: Some(device), raman, ..self })
    }
}

fn resolve_path(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn field(name: &str, msg: &str) -> CliError {
    CliError::Config(format!("field `{name}`: {msg}"))
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field(name, &format!("must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, &format!("must be positive and finite, got {v}")))
    }
}

fn probability(name: &str, v: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(field(name, &format!("must lie in [0, 1], got {v}")))
    }
}

fn wigner(name: &str, w: &WignerSpec) -> Result<(), CliError> {
    if w.nx < 2 || w.np < 2 {
        return Err(field(name, "nx and np must be at least 2"));
    }
    positive(&format!("{name}.x_max"), w.x_max)?;
    positive(&format!("{name}.p_max"), w.p_max)
}

fn state(name: &str, s: &StateConfig) -> Result<(), CliError> {
    match *s {
        StateConfig::Fock { .. } => Ok(()),
        StateConfig::Thermal { nbar } => {
            if nbar >= 0.0 && nbar.is_finite() {
                Ok(())
            } else {
                Err(field(&format!("{name}.nbar"), &format!("must be non-negative, got {nbar}")))
            }
        }
        StateConfig::Coherent { alpha } | StateConfig::Cat { alpha, .. } => {
            finite(&format!("{name}.alpha"), alpha[0])?;
            finite(&format!("{name}.alpha"), alpha[1])
        }
    }
}
