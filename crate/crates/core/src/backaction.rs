//! Conditional oscillator states after detector-atom measurements.
//!
//! In the strong-field limit the Raman mode is the classical amplitude
//! `β = √I e^{iφ}`. The atom, starting in `|g⟩`, is dressed into
//! `|±⟩ = (|g⟩ ± e^{iφ}|e⟩)/√2`, each branch displacing the oscillator by
//! `∓μ/2`. With `E = D(μ/2)` and `θ = 2gτ√I` the measurement operators are
//!
//! ```text
//! K_g =  ½ [e^{iθ/2} E + e^{−iθ/2} E†]
//! K_e = −½ e^{iφ} [e^{iθ/2} E − e^{−iθ/2} E†]
//! ```
//!
//! and `K_g†K_g + K_e†K_e = 1` holds exactly in the truncated space.

use std::io::{self, Write};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{photon_dim_for_intensity, CouplingSet, ExcitationBlocks};
use crate::error::{Error, Result};
use crate::fockspace::{displacement, make_state, AtomLevel, CMatrix, CVector, ModeOperator, QuantumState, Representation, StateSpec};
use crate::tomography::io::{fmt_f64, Metadata};
use crate::tomography::{probe_mu, wigner_series, WignerGrid, WignerSpec};

/// Outcomes less likely than this cannot be renormalized reliably.
pub const MIN_PROBABILITY: f64 = 1e-12;
/// Population in the top sixteenth of the truncation that triggers a warning.
pub const EDGE_WARNING: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ground,
    Excited,
}

impl Outcome {
    pub fn level(self) -> AtomLevel {
        match self {
            Outcome::Ground => AtomLevel::Ground,
            Outcome::Excited => AtomLevel::Excited,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Ground => "ground",
            Outcome::Excited => "excited",
        }
    }
}

/// Classical Raman field: mean photon number and phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanDrive {
    pub intensity: f64,
    pub phi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Quantized coherent Raman field, two-mode evolution, photon traced out.
    Exact,
    /// Classical Raman field (measurement operators above).
    LargeI,
}

/// Post-measurement oscillator state.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioned {
    pub state: QuantumState,
    pub probability: f64,
    pub purity: f64,
}

fn single_mode(psi: &QuantumState) -> Result<usize> {
    if !psi.space().is_single_mode() {
        return Err(Error::InvalidState("back-action acts on a single-mode oscillator state".into()));
    }
    Ok(psi.dim())
}

/// `(K_g, K_e)` for one measurement.
pub fn measurement_operators(dim: usize, g: f64, tau: f64, raman: RamanDrive) -> Result<(ModeOperator, ModeOperator)> {
    if !(raman.intensity >= 0.0) || !raman.intensity.is_finite() {
        return Err(Error::InvalidIntensity(raman.intensity));
    }
    let mu = probe_mu(g, tau, raman.phi);
    let half = g * tau * raman.intensity.sqrt();
    let e = displacement(dim, mu * 0.5)?;
    let (plus, minus) = (e.scale(C64::from_polar(1.0, half)), e.adjoint().scale(C64::from_polar(1.0, -half)));
    let k_g = (&plus + &minus).scale(C64::new(0.5, 0.0));
    let k_e = (&plus - &minus).scale(C64::from_polar(-0.5, raman.phi));
    Ok((k_g, k_e))
}

fn apply_kraus(k: &ModeOperator, psi: &QuantumState) -> (QuantumState, f64) {
    match psi.representation() {
        Representation::Pure(v) => {
            let out = k.apply(v);
            let p = out.norm_squared();
            (QuantumState::pure_trusted(psi.space().clone(), out), p)
        }
        Representation::Mixed(rho) => {
            let out = k.matrix() * rho * k.matrix().adjoint();
            let p = out.trace().re;
            (QuantumState::mixed_trusted(psi.space().clone(), out), p)
        }
    }
}

fn renormalize(state: QuantumState, p: f64) -> QuantumState {
    let space = state.space().clone();
    match state.representation() {
        Representation::Pure(v) => QuantumState::pure_trusted(space, v / C64::new(p.sqrt(), 0.0)),
        Representation::Mixed(m) => QuantumState::mixed_trusted(space, m / C64::new(p, 0.0)),
    }
}

/// Both outcome probabilities `(P_g, P_e)` under the strong-field map.
pub fn outcome_probabilities(psi_c: &QuantumState, g: f64, tau: f64, raman: RamanDrive) -> Result<(f64, f64)> {
    let dim = single_mode(psi_c)?;
    let (k_g, k_e) = measurement_operators(dim, g, tau, raman)?;
    Ok((apply_kraus(&k_g, psi_c).1, apply_kraus(&k_e, psi_c).1))
}

/// State of the oscillator after the atom is found in `outcome`, with the
/// Born probability of that outcome.
///
/// `LargeI` maps pure states to pure states. `Exact` evolves
/// atom ⊗ coherent photon ⊗ oscillator under the matched two-mode
/// Hamiltonian, projects the atom and traces the photon out; the photon
/// field stays entangled, so the result is in general mixed.
pub fn conditional_update(
    psi_c: &QuantumState,
    outcome: Outcome,
    g: f64,
    tau: f64,
    raman: RamanDrive,
    mode: UpdateMode,
) -> Result<Conditioned> {
    let dim = single_mode(psi_c)?;
    let (state, probability) = match mode {
        UpdateMode::LargeI => {
            let (k_g, k_e) = measurement_operators(dim, g, tau, raman)?;
            apply_kraus(if outcome == Outcome::Ground { &k_g } else { &k_e }, psi_c)
        }
        UpdateMode::Exact => exact_branch(psi_c, outcome, g, tau, raman)?,
    };
    if !(probability >= MIN_PROBABILITY) {
        return Err(Error::ImprobableOutcome { probability });
    }
    let state = renormalize(state, probability);
    let purity = state.purity();
    Ok(Conditioned { state, probability: probability.min(1.0), purity })
}

fn exact_branch(psi_c: &QuantumState, outcome: Outcome, g: f64, tau: f64, raman: RamanDrive) -> Result<(QuantumState, f64)> {
    let psi = psi_c
        .vector()
        .ok_or_else(|| Error::InvalidState("exact conditional update needs a pure oscillator state".into()))?;
    if !(raman.intensity > 0.0) || !raman.intensity.is_finite() {
        return Err(Error::InvalidIntensity(raman.intensity));
    }
    let dc = psi.len();
    let dp = photon_dim_for_intensity(raman.intensity);
    let blocks = ExcitationBlocks::new(&CouplingSet::matched(g), dp, dc)?;
    let photon = make_state(dp, StateSpec::Coherent(C64::from_polar(raman.intensity.sqrt(), raman.phi)))?;
    let photon = photon.vector().expect("coherent state is pure");
    let mut initial = CVector::zeros(2 * dp * dc);
    let joint = photon.kronecker(psi);
    let offset = AtomLevel::Ground.index() * dp * dc;
    initial.rows_mut(offset, dp * dc).copy_from(&joint);
    let evolved = blocks.evolve_vector(&initial, tau)?;

    let start = outcome.level().index() * dp * dc;
    // rows: photon, columns: oscillator
    let m = CMatrix::from_fn(dp, dc, |p, c| evolved[start + p * dc + c]);
    let rho = m.transpose() * m.map(|z| z.conj());
    let probability = rho.trace().re;
    Ok((QuantumState::mixed_trusted(psi_c.space().clone(), rho), probability))
}

/// One `(τ, I, φ)` setting of a measurement sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub tau: f64,
    pub intensity: f64,
    pub phi: f64,
}

impl ScheduleEntry {
    pub fn raman(&self) -> RamanDrive {
        RamanDrive { intensity: self.intensity, phi: self.phi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequencePolicy {
    /// Force every outcome to ground, accumulating the joint probability.
    ConditionOnGround,
    /// Draw each outcome from its Born probability.
    SampleOutcomes { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasurementStep {
    pub outcome: Outcome,
    pub tau: f64,
    pub raman: RamanDrive,
    pub mu: C64,
    pub theta: f64,
    /// Born probability of the recorded outcome.
    pub probability: f64,
    /// `P_g + P_e` for this step.
    pub branch_sum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub initial: String,
    pub g: f64,
    pub steps: Vec<MeasurementStep>,
    /// `snapshots[0]` is the initial state, `snapshots[k]` the state after step `k`.
    pub snapshots: Vec<QuantumState>,
    pub purity: Vec<f64>,
    pub mean_phonon: Vec<f64>,
    /// Population of the top sixteenth of the truncation, per snapshot.
    pub edge_population: Vec<f64>,
    pub joint_probability: f64,
    pub warnings: Vec<String>,
}

fn edge_population(state: &QuantumState) -> f64 {
    let pops = state.populations();
    let top = (pops.len() / 16).max(1);
    pops[pops.len() - top..].iter().sum()
}

/// Iterate the strong-field update over `schedule` (free evolution between
/// measurements omitted).
pub fn run_sequence(
    psi0: &QuantumState,
    initial: &str,
    g: f64,
    steps: usize,
    schedule: &[ScheduleEntry],
    policy: SequencePolicy,
) -> Result<TrajectoryLog> {
    run_sequence_with(psi0, initial, g, steps, schedule, policy, |_, s| Ok(s))
}

/// [`run_sequence`] with `between(step, state)` applied after every
/// measurement.
pub fn run_sequence_with(
    psi0: &QuantumState,
    initial: &str,
    g: f64,
    steps: usize,
    schedule: &[ScheduleEntry],
    policy: SequencePolicy,
    mut between: impl FnMut(usize, QuantumState) -> Result<QuantumState>,
) -> Result<TrajectoryLog> {
    let dim = single_mode(psi0)?;
    if schedule.len() != steps {
        return Err(Error::Contract(format!("schedule has {} entries for {steps} steps", schedule.len())));
    }
    let mut rng = match policy {
        SequencePolicy::SampleOutcomes { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SequencePolicy::ConditionOnGround => None,
    };
    let mut log = TrajectoryLog {
        initial: initial.to_string(),
        g,
        steps: Vec::with_capacity(steps),
        snapshots: vec![psi0.clone()],
        purity: vec![psi0.purity()],
        mean_phonon: vec![psi0.mean_number()?],
        edge_population: vec![edge_population(psi0)],
        joint_probability: 1.0,
        warnings: Vec::new(),
    };
    let mut state = psi0.clone();
    for (k, entry) in schedule.iter().enumerate() {
        let raman = entry.raman();
        let (k_g, k_e) = measurement_operators(dim, g, entry.tau, raman)?;
        let (ground, p_g) = apply_kraus(&k_g, &state);
        let (excited, p_e) = apply_kraus(&k_e, &state);
        let outcome = match rng.as_mut() {
            None => Outcome::Ground,
            Some(r) => {
                if r.random::<f64>() < p_g / (p_g + p_e) {
                    Outcome::Ground
                } else {
                    Outcome::Excited
                }
            }
        };
        let (next, p) = if outcome == Outcome::Ground { (ground, p_g) } else { (excited, p_e) };
        if !(p >= MIN_PROBABILITY) {
            return Err(Error::ImprobableOutcome { probability: p });
        }
        state = between(k + 1, renormalize(next, p))?;
        log.joint_probability *= p;
        log.steps.push(MeasurementStep {
            outcome,
            tau: entry.tau,
            raman,
            mu: probe_mu(g, entry.tau, entry.phi),
            theta: 2.0 * g * entry.tau * entry.intensity.sqrt(),
            probability: p.min(1.0),
            branch_sum: p_g + p_e,
        });
        let edge = edge_population(&state);
        if edge > EDGE_WARNING {
            log.warnings.push(format!("step {}: population {edge:.2e} near the truncation edge", k + 1));
        }
        log.purity.push(state.purity());
        log.mean_phonon.push(state.mean_number()?);
        log.edge_population.push(edge);
        log.snapshots.push(state.clone());
    }
    Ok(log)
}

impl TrajectoryLog {
    /// Wigner function of every snapshot.
    pub fn wigner_snapshots(&self, spec: &WignerSpec) -> Result<Vec<WignerGrid>> {
        self.snapshots.par_iter().map(|s| wigner_series(s, spec)).collect()
    }

    /// Structured text: `#` metadata, then one row per snapshot.
    pub fn write(&self, w: &mut impl Write, extra: &Metadata) -> io::Result<()> {
        let mut meta = Metadata::default();
        meta.push("format", TRAJECTORY_FORMAT);
        meta.push("initial", &self.initial);
        meta.push("g_rad_s", fmt_f64(self.g));
        meta.push("joint_probability", fmt_f64(self.joint_probability));
        for warning in &self.warnings {
            meta.push("warning", warning);
        }
        meta.0.extend(extra.0.iter().cloned());
        meta.write(w)?;
        writeln!(w, "{}", TRAJECTORY_COLUMNS.join(" "))?;
        for k in 0..self.snapshots.len() {
            let cols = match k.checked_sub(1).map(|i| &self.steps[i]) {
                None => vec!["-".to_string(); 9],
                Some(s) => vec![
                    s.outcome.as_str().to_string(),
                    fmt_f64(s.tau),
                    fmt_f64(s.raman.intensity),
                    fmt_f64(s.raman.phi),
                    fmt_f64(s.mu.re),
                    fmt_f64(s.mu.im),
                    fmt_f64(s.theta),
                    fmt_f64(s.probability),
                    fmt_f64(s.branch_sum),
                ],
            };
            writeln!(
                w,
                "{k} {} {} {} {}",
                cols.join(" "),
                fmt_f64(self.purity[k]),
                fmt_f64(self.mean_phonon[k]),
                fmt_f64(self.edge_population[k])
            )?;
        }
        Ok(())
    }
}

pub const TRAJECTORY_FORMAT: &str = "mech-wigner trajectory v1";
pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "step",
    "outcome",
    "tau_s",
    "intensity",
    "phi_rad",
    "mu_re",
    "mu_im",
    "theta",
    "probability",
    "branch_sum",
    "purity",
    "mean_phonon",
    "edge_population",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DisturbanceRow {
    pub step: usize,
    pub fidelity: f64,
    pub mean_phonon: f64,
    pub purity: f64,
    pub negativity_volume: f64,
}

/// Per-step fidelity with the initial state, mean phonon number, purity and
/// Wigner negativity volume (evaluated on `spec`).
pub fn disturbance_report(log: &TrajectoryLog, spec: &WignerSpec) -> Result<Vec<DisturbanceRow>> {
    let first = log.snapshots.first().ok_or_else(|| Error::Contract("empty trajectory".into()))?;
    let grids = log.wigner_snapshots(spec)?;
    log.snapshots
        .iter()
        .zip(grids)
        .enumerate()
        .map(|(step, (s, w))| {
            Ok(DisturbanceRow {
                step,
                fidelity: first.fidelity(s)?,
                mean_phonon: log.mean_phonon[step],
                purity: log.purity[step],
                negativity_volume: w.negativity_volume(),
            })
        })
        .collect()
}

pub fn write_disturbance(w: &mut impl Write, rows: &[DisturbanceRow]) -> io::Result<()> {
    writeln!(w, "step fidelity mean_phonon purity negativity_volume")?;
    for r in rows {
        writeln!(
            w,
            "{} {} {} {} {}",
            r.step,
            fmt_f64(r.fidelity),
            fmt_f64(r.mean_phonon),
            fmt_f64(r.purity),
            fmt_f64(r.negativity_volume)
        )?;
    }
    Ok(())
}
