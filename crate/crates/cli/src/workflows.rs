use std::fmt::Write as _;

use mech_wigner::backaction::{disturbance_report, run_sequence, write_disturbance, SequencePolicy};
use mech_wigner::device::{coupling_g_ac, magnetic_gradient, match_couplings, raman_coupling, resonance_report, FreeParameter, RamanParams};
use mech_wigner::dynamics::{pe_exact_two_mode, photon_dim_for_intensity, AtomMixture, CouplingSet, ExcitationBlocks};
use mech_wigner::fockspace::{make_state, QuantumState, StateSpec};
use mech_wigner::tomography::io::{fmt_f64, write_char_fn, write_records, write_wigner, Metadata};
use mech_wigner::tomography::{
    extract_char_fn, pe_approx, probe_grid, resample_polar, synthesize_records, wigner_direct, wigner_from_charfn,
    wigner_from_charfn_at, MuGrid, MAX_PHOTON_DIM,
};
use mech_wigner::C64;

use crate::artifacts::ArtifactDir;
use crate::config::{OutcomeChoice, RunConfig, StateConfig};
use crate::error::{CliError, InModule};

pub const DEVICE_REPORT: &str = "device_report.toml";
pub const CONVERGENCE: &str = "convergence.dat";
pub const CONVERGENCE_SUMMARY: &str = "convergence_summary.toml";
pub const RECORDS: &str = "records.csv";
pub const CHARFN_POLAR: &str = "charfn_polar.dat";
pub const CHARFN_GRID: &str = "charfn_grid.dat";
pub const WIGNER: &str = "wigner.dat";
pub const WIGNER_DIRECT: &str = "wigner_direct.dat";
pub const ROUND_TRIP: &str = "round_trip.toml";
pub const TRAJECTORY: &str = "trajectory.dat";
pub const DISTURBANCE: &str = "disturbance.dat";

pub fn wigner_step_name(k: usize) -> String {
    format!("wigner_step_{k}.dat")
}

fn bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn state(module: &'static str, dim: usize, s: &StateConfig) -> Result<QuantumState, CliError> {
    make_state(dim, s.spec()).in_module(module)
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Minimal TOML writer keeping the 17-digit float format.
#[derive(Default)]
struct Report(String);

impl Report {
    fn float(&mut self, key: &str, v: f64) -> &mut Self {
        let _ = writeln!(self.0, "{key} = {}", fmt_f64(v));
        self
    }

    fn raw(&mut self, key: &str, v: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.0, "{key} = {v}");
        self
    }

    fn text(&mut self, key: &str, v: &str) -> &mut Self {
        self.raw(key, toml_str(v))
    }

    fn list(&mut self, key: &str, items: &[String]) -> &mut Self {
        let quoted: Vec<String> = items.iter().map(|s| toml_str(s)).collect();
        self.raw(key, format!("[{}]", quoted.join(", ")))
    }

    fn floats(&mut self, key: &str, items: &[f64]) -> &mut Self {
        let f: Vec<String> = items.iter().map(|&x| fmt_f64(x)).collect();
        self.raw(key, format!("[{}]", f.join(", ")))
    }

    fn section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.0, "\n[{name}]");
        self
    }
}

pub fn device(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let d = &cfg.device;
    let p = d.params.as_ref().expect("resolved config carries params");
    let mut r = Report::default();
    r.raw("format", toml_str("mech-wigner device report v1"));
    r.float("gradient_t_per_m", magnetic_gradient(p.mu_c, p.r).in_module("device")?)
        .float("zero_point_length_m", p.zero_point_length())
        .float("g_ac_rad_s", coupling_g_ac(p).in_module("device")?);
    let res = resonance_report(p);
    r.section("resonance").float("detuning_rad_s", res.detuning).float("threshold_rad_s", res.threshold).raw("resonant", res.resonant);
    if let Some(rp) = &d.raman {
        let matched = match_couplings(p, rp, d.solve_for, d.convention).in_module("device")?;
        let (mut p2, mut rp2) = (p.clone(), rp.clone());
        match d.solve_for {
            FreeParameter::OmegaL => rp2.omega_l_rabi = matched,
            FreeParameter::DeltaL => rp2.delta_l = matched,
            FreeParameter::Distance => p2.r = matched,
        }
        let solve_for = toml::Value::try_from(d.solve_for).expect("enum serializes");
        let convention = toml::Value::try_from(d.convention).expect("enum serializes");
        r.section("raman")
            .float("g_raman_rad_s", raman_coupling(rp).in_module("device")?)
            .list("warnings", &rp.warnings(p.omega_0));
        r.section("matched")
            .raw("solve_for", solve_for)
            .raw("convention", convention)
            .float("value", matched)
            .float("g_ac_rad_s", coupling_g_ac(&p2).in_module("device")?)
            .float("g_raman_rad_s", raman_coupling(&rp2).in_module("device")?)
            .list("warnings", &RamanParams::warnings(&rp2, p2.omega_0));
    }
    out.write(DEVICE_REPORT, r.0.as_bytes())?;
    Ok(())
}

pub fn dynamics_convergence(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let d = &cfg.dynamics;
    let am = AtomMixture::from_excited(d.atom_excited).in_module("dynamics")?;
    let phonon = state("fockspace", d.phonon_dim, &d.state)?;
    let taus: Vec<f64> = (0..d.tau_points).map(|k| d.tau_max * k as f64 / (d.tau_points - 1) as f64).collect();
    let mut table = String::from("# format = mech-wigner convergence v1\n");
    let _ = writeln!(table, "# g_rad_s = {}", fmt_f64(d.g));
    let _ = writeln!(table, "# phonon_state = {}", d.state.label());
    table.push_str("intensity tau_s pe_exact pe_approx pe_approx_photon_vacuum theta\n");
    let (mut printed, mut corrected) = (Vec::new(), Vec::new());
    for &intensity in &d.intensities {
        let dp = photon_dim_for_intensity(intensity);
        if dp > MAX_PHOTON_DIM {
            return Err(CliError::Numerical {
                module: "dynamics",
                source: mech_wigner::Error::InfeasibleTruncation { intensity, required: dp, limit: MAX_PHOTON_DIM },
            });
        }
        let blocks = ExcitationBlocks::new(&CouplingSet::matched(d.g), dp, d.phonon_dim).in_module("dynamics")?;
        let photon = make_state(dp, StateSpec::Coherent(C64::from_polar(intensity.sqrt(), d.phi))).in_module("fockspace")?;
        let exact = pe_exact_two_mode(&blocks, am, &photon, &phonon, &taus).in_module("dynamics")?;
        let (mut dev, mut dev_c) = (0.0f64, 0.0f64);
        for (&tau, &e) in taus.iter().zip(&exact) {
            let a = pe_approx(&phonon, am, d.g, tau, intensity, d.phi).in_module("tomography")?;
            // the quantized Raman mode contributes its own vacuum factor
            let c = 0.5 + (a.value - 0.5) * (-0.5 * a.mu.norm_sqr()).exp();
            dev = dev.max((a.value - e).abs());
            dev_c = dev_c.max((c - e).abs());
            let _ = writeln!(
                table,
                "{} {} {} {} {} {}",
                fmt_f64(intensity),
                fmt_f64(tau),
                fmt_f64(e),
                fmt_f64(a.value),
                fmt_f64(c),
                fmt_f64(a.theta)
            );
        }
        printed.push(dev);
        corrected.push(dev_c);
    }
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let mut r = Report::default();
    r.raw("format", toml_str("mech-wigner convergence summary v1"))
        .floats("intensities", &d.intensities)
        .floats("max_deviation", &printed)
        .raw("max_deviation_decreasing", decreasing(&printed))
        .floats("max_deviation_photon_vacuum", &corrected)
        .raw("max_deviation_photon_vacuum_decreasing", decreasing(&corrected));
    out.write(CONVERGENCE, table.as_bytes())?;
    out.write(CONVERGENCE_SUMMARY, r.0.as_bytes())?;
    Ok(())
}

pub struct RoundTrip {
    pub max_abs_error: f64,
    pub within_tolerance: bool,
}

pub fn tomography(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<RoundTrip, CliError> {
    let t = &cfg.tomography;
    let rho = state("fockspace", t.dim, &t.state)?;
    let am = AtomMixture::from_excited(t.atom_excited).in_module("dynamics")?;
    let sites = probe_grid(&t.raster, t.g, t.dim).in_module("tomography")?;
    let shots = (t.shots > 0).then_some(t.shots);
    let seed = shots.map(|_| cfg.seed);
    let records = synthesize_records(&rho, am, &sites, t.g, t.synthesis, shots, seed).in_module("tomography")?;
    let mut meta = Metadata::default();
    meta.push("state", t.state.label());
    meta.push("dim", t.dim);
    meta.push("seed", cfg.seed);
    let mut buf = Vec::new();
    write_records(&mut buf, &records, t.g, &meta).in_module("tomography")?;
    out.write(RECORDS, &buf)?;

    let polar = extract_char_fn(&records).in_module("tomography")?;
    out.write(CHARFN_POLAR, &bytes(|w| write_char_fn(w, &polar, &meta))?)?;
    let mu_grid = MuGrid::disk(t.mu_grid_n, t.mu_grid_radius);
    let cart = resample_polar(&polar, &mu_grid).in_module("tomography")?;
    out.write(CHARFN_GRID, &bytes(|w| write_char_fn(w, &cart, &meta))?)?;
    let rec = wigner_from_charfn(&cart, &t.wigner).in_module("tomography")?;
    out.write(WIGNER, &bytes(|w| write_wigner(w, &rec, &meta))?)?;
    let direct = wigner_direct(&rho, &mu_grid, &t.wigner).in_module("tomography")?;
    out.write(WIGNER_DIRECT, &bytes(|w| write_wigner(w, &direct, &meta))?)?;

    let err = rec.max_abs_diff(&direct).in_module("tomography")?;
    let within = err <= t.round_trip_tolerance;
    let max_condition = polar.condition.iter().copied().fold(0.0, f64::max);
    let mut r = Report::default();
    r.raw("format", toml_str("mech-wigner round trip v1"))
        .text("state", &t.state.label())
        .float("max_abs_error", err)
        .float("tolerance", t.round_trip_tolerance)
        .raw("within_tolerance", within)
        .float("integral", rec.integral())
        .float("integral_direct", direct.integral())
        .float("min", rec.min())
        .float("max", rec.max())
        .float("w_origin", wigner_from_charfn_at(&cart, 0.0, 0.0).in_module("tomography")?)
        .float("negativity_volume", rec.negativity_volume())
        .float("imag_residue", rec.imag_residue)
        .float("max_condition", max_condition)
        .raw("records", records.len())
        .list("warnings", &rec.warnings);
    out.write(ROUND_TRIP, r.0.as_bytes())?;
    Ok(RoundTrip { max_abs_error: err, within_tolerance: within })
}

pub fn backaction(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let b = &cfg.backaction;
    let psi0 = state("fockspace", b.dim, &b.state)?;
    let policy = match b.outcomes {
        OutcomeChoice::ConditionOnGround => SequencePolicy::ConditionOnGround,
        OutcomeChoice::Sample => SequencePolicy::SampleOutcomes { seed: cfg.seed },
    };
    let log = run_sequence(&psi0, &b.state.label(), b.g, b.steps, &b.schedule, policy).in_module("backaction")?;
    let mut meta = Metadata::default();
    meta.push("dim", b.dim);
    meta.push("seed", cfg.seed);
    out.write(TRAJECTORY, &bytes(|w| log.write(w, &meta))?)?;
    let grids = log.wigner_snapshots(&b.wigner).in_module("tomography")?;
    for (k, grid) in grids.iter().enumerate() {
        let mut m = meta.clone();
        m.push("step", k);
        m.push("state", &log.initial);
        out.write(&wigner_step_name(k), &bytes(|w| write_wigner(w, grid, &m))?)?;
    }
    let rows = disturbance_report(&log, &b.wigner).in_module("backaction")?;
    out.write(DISTURBANCE, &bytes(|w| write_disturbance(w, &rows))?)?;
    Ok(())
}
