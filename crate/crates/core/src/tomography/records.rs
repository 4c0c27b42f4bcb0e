use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::charfn::{pe_approx_with, CharFnEvaluator};
use super::probe::{ProbePoint, ProbeSite};
use crate::dynamics::{pe_exact_two_mode, photon_dim_for_intensity, AtomMixture, CouplingSet, ExcitationBlocks};
use crate::error::{Error, Result};
use crate::fockspace::{make_state, QuantumState, StateSpec};

/// Seed used for shot sampling when none is given.
pub const DEFAULT_SEED: u64 = 0;
/// Largest photon truncation attempted in exact synthesis.
pub const MAX_PHOTON_DIM: usize = 1200;

/// One simulated measurement setting and its outcome statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub point: ProbePoint,
    pub atom: AtomMixture,
    pub p_e: f64,
    pub shots: Option<u64>,
    pub p_e_sampled: Option<f64>,
}

impl ProbeRecord {
    /// Empirical frequency when shots were simulated, otherwise `p_e`.
    pub fn observed(&self) -> f64 {
        self.p_e_sampled.unwrap_or(self.p_e)
    }
}

/// How `p_e` is computed for each probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    /// Strong-field formula in terms of `C_W(μ)`.
    ClosedForm,
    /// Brute-force evolution with a quantized coherent Raman field.
    Exact,
}

/// Simulate the measurement campaign over `sites`.
///
/// With `shots`, each record also carries `Binomial(shots, p_e)/shots`
/// drawn from a ChaCha8 stream seeded with `seed` (default
/// [`DEFAULT_SEED`]), consumed in record order so results do not depend on
/// thread count.
pub fn synthesize_records(
    rho_c: &QuantumState,
    am: AtomMixture,
    sites: &[ProbeSite],
    g: f64,
    mode: SynthesisMode,
    shots: Option<u64>,
    seed: Option<u64>,
) -> Result<Vec<ProbeRecord>> {
    if !rho_c.space().is_single_mode() {
        return Err(Error::InvalidState("records need a single-mode oscillator state".into()));
    }
    let points: Vec<ProbePoint> = sites.iter().flat_map(|s| s.probes.iter().copied()).collect();

    let probabilities: Vec<f64> = match mode {
        SynthesisMode::ClosedForm => {
            let ev = CharFnEvaluator::new(rho_c)?;
            let nbar = rho_c.mean_number()?;
            points
                .par_iter()
                .map(|p| {
                    let c = ev.eval(p.mu)?;
                    Ok(pe_approx_with(c, nbar, am, g, p.tau, p.intensity, p.phi)?.value)
                })
                .collect::<Result<_>>()?
        }
        SynthesisMode::Exact => {
            for p in &points {
                let required = photon_dim_for_intensity(p.intensity);
                if required > MAX_PHOTON_DIM {
                    return Err(Error::InfeasibleTruncation { intensity: p.intensity, required, limit: MAX_PHOTON_DIM });
                }
            }
            points
                .par_iter()
                .map(|p| exact_probability(rho_c, am, g, p))
                .collect::<Result<_>>()?
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(DEFAULT_SEED));
    points
        .into_iter()
        .zip(probabilities)
        .map(|(point, p_e)| {
            let p_e_sampled = match shots {
                Some(0) => return Err(Error::Contract("shots must be positive".into())),
                Some(n) => {
                    let dist = Binomial::new(n, p_e).map_err(|e| Error::Contract(e.to_string()))?;
                    Some(dist.sample(&mut rng) as f64 / n as f64)
                }
                None => None,
            };
            Ok(ProbeRecord { point, atom: am, p_e, shots, p_e_sampled })
        })
        .collect()
}

fn exact_probability(rho_c: &QuantumState, am: AtomMixture, g: f64, p: &ProbePoint) -> Result<f64> {
    let dp = photon_dim_for_intensity(p.intensity);
    let blocks = ExcitationBlocks::new(&CouplingSet::matched(g), dp, rho_c.dim())?;
    let beta = num_complex::Complex64::from_polar(p.intensity.sqrt(), p.phi);
    let photon = make_state(dp, StateSpec::Coherent(beta))?;
    Ok(pe_exact_two_mode(&blocks, am, &photon, rho_c, &[p.tau])?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::probe::{probe_grid, IntensityPolicy, ProbeGridSpec};

    fn sites(g: f64) -> Vec<ProbeSite> {
        let spec = ProbeGridSpec { mu_max: 2.0, radial_count: 4, angular_count: 8, intensity: IntensityPolicy::default() };
        probe_grid(&spec, g, 32).unwrap()
    }

    #[test]
    fn noise_free_has_no_samples() {
        let vac = make_state(32, StateSpec::Fock(0)).unwrap();
        let recs = synthesize_records(&vac, AtomMixture::ground(), &sites(1.0), 1.0, SynthesisMode::ClosedForm, None, None).unwrap();
        assert_eq!(recs.len(), 1 + 2 * 32);
        assert!(recs.iter().all(|r| r.p_e_sampled.is_none() && r.shots.is_none()));
        assert_eq!(recs[0].p_e, 0.0);
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let vac = make_state(32, StateSpec::Fock(0)).unwrap();
        let run = |seed| {
            synthesize_records(&vac, AtomMixture::ground(), &sites(1.0), 1.0, SynthesisMode::ClosedForm, Some(1000), Some(seed)).unwrap()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn binomial_concentration() {
        let vac = make_state(32, StateSpec::Fock(0)).unwrap();
        let shots = 1_000_000u64;
        let recs = synthesize_records(&vac, AtomMixture::ground(), &sites(1.0), 1.0, SynthesisMode::ClosedForm, Some(shots), Some(11)).unwrap();
        let inside = recs
            .iter()
            .filter(|r| {
                let sigma = (r.p_e * (1.0 - r.p_e) / shots as f64).sqrt();
                (r.p_e_sampled.unwrap() - r.p_e).abs() <= 5.0 * sigma
            })
            .count();
        assert!(inside as f64 >= 0.99 * recs.len() as f64, "{inside}/{}", recs.len());
    }

    #[test]
    fn exact_mode_guards_truncation() {
        let vac = make_state(8, StateSpec::Fock(0)).unwrap();
        let tiny = ProbeGridSpec { mu_max: 1.0, radial_count: 1, angular_count: 2, intensity: IntensityPolicy::BaseIntensity { intensity: 5000.0 } };
        let s = probe_grid(&tiny, 1.0, 8).unwrap();
        let err = synthesize_records(&vac, AtomMixture::ground(), &s, 1.0, SynthesisMode::Exact, None, None);
        assert!(matches!(err, Err(Error::InfeasibleTruncation { .. })));
    }

    #[test]
    fn exact_mode_includes_photon_vacuum_noise() {
        // The quantized Raman mode contributes its own vacuum factor
        // e^{−|μ|²/2}; with it the strong-field formula tracks the exact run.
        let vac = make_state(12, StateSpec::Fock(0)).unwrap();
        let spec = ProbeGridSpec { mu_max: 0.6, radial_count: 1, angular_count: 2, intensity: IntensityPolicy::BaseIntensity { intensity: 400.0 } };
        let s = probe_grid(&spec, 1.0, 12).unwrap();
        let exact = synthesize_records(&vac, AtomMixture::ground(), &s, 1.0, SynthesisMode::Exact, None, None).unwrap();
        for r in &exact {
            let c = (-r.point.mu.norm_sqr()).exp();
            let want = 0.5 - 0.5 * r.point.theta.cos() * c;
            assert!((r.p_e - want).abs() < 1e-2, "{} vs {}", r.p_e, want);
        }
    }
}
