use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::charfn::probe_mu;
use crate::error::{Error, Result};
use crate::fockspace::check_truncation;

/// One setting of the experiment: interaction time, Raman phase and
/// intensity. `μ` and `θ = 2gτ√I` are derived at construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbePoint {
    pub tau: f64,
    pub phi: f64,
    pub intensity: f64,
    pub theta: f64,
    pub mu: C64,
}

impl ProbePoint {
    pub fn new(g: f64, tau: f64, phi: f64, intensity: f64) -> Result<Self> {
        if !(intensity >= 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidIntensity(intensity));
        }
        if !tau.is_finite() || !phi.is_finite() || !g.is_finite() {
            return Err(Error::Contract("probe parameters must be finite".into()));
        }
        Ok(Self {
            tau,
            phi,
            intensity,
            theta: 2.0 * g * tau * intensity.sqrt(),
            mu: probe_mu(g, tau, phi),
        })
    }
}

/// How the two intensities probing one `μ` are chosen. Either way the pair
/// is ordered so that `θ₁ − θ₂ = π/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntensityPolicy {
    /// One probe at `intensity`, its partner a quarter turn further in `θ`.
    /// The origin is probed at `intensity`.
    BaseIntensity { intensity: f64 },
    /// Fixed phase pair `(θ₀ + π/2, θ₀)` in units of `|θ|`, intensities
    /// solved per point. The origin is probed at `origin_intensity`.
    ThetaPair { theta0: f64, origin_intensity: f64 },
}

impl Default for IntensityPolicy {
    fn default() -> Self {
        IntensityPolicy::BaseIntensity { intensity: 400.0 }
    }
}

/// Polar raster `{μ : |μ| ≤ mu_max}` plus the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGridSpec {
    pub mu_max: f64,
    pub radial_count: usize,
    pub angular_count: usize,
    #[serde(default)]
    pub intensity: IntensityPolicy,
}

/// All probes sharing one displacement `μ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeSite {
    pub mu: C64,
    pub probes: Vec<ProbePoint>,
}

/// Lay out the probe raster for coupling `g`, checking `mu_max` against the
/// oscillator truncation `dim`.
///
/// Radii are `mu_max·i/radial_count` for `i = 1..=radial_count`, angles
/// `2πj/angular_count`. Each `μ` is realized with `τ = |μ|/|g|` and the
/// Raman phase that rotates `igτ` onto `μ`.
pub fn probe_grid(spec: &ProbeGridSpec, g: f64, dim: usize) -> Result<Vec<ProbeSite>> {
    if !(g != 0.0) || !g.is_finite() {
        return Err(Error::Contract(format!("coupling g = {g} cannot scan μ")));
    }
    if spec.radial_count == 0 || spec.angular_count == 0 || !(spec.mu_max > 0.0) {
        return Err(Error::Contract("probe grid needs positive extent and counts".into()));
    }
    check_truncation(spec.mu_max, dim)?;

    let origin_intensity = match spec.intensity {
        IntensityPolicy::BaseIntensity { intensity } => intensity,
        IntensityPolicy::ThetaPair { theta0, origin_intensity } => {
            if !(theta0 > 0.0) {
                return Err(Error::Contract("theta0 must be positive".into()));
            }
            origin_intensity
        }
    };
    if !(origin_intensity > 0.0) {
        return Err(Error::InvalidIntensity(origin_intensity));
    }

    let mut sites = Vec::with_capacity(1 + spec.radial_count * spec.angular_count);
    sites.push(ProbeSite {
        mu: C64::new(0.0, 0.0),
        probes: vec![ProbePoint::new(g, 0.0, 0.0, origin_intensity)?],
    });
    for i in 1..=spec.radial_count {
        let r = spec.mu_max * i as f64 / spec.radial_count as f64;
        let tau = r / g.abs();
        let gt = g.abs() * tau;
        for j in 0..spec.angular_count {
            let angle = TAU * j as f64 / spec.angular_count as f64;
            let target = C64::from_polar(r, angle);
            let phi = (target / C64::new(0.0, g)).arg();
            // |θ| values of the pair, low then high
            let (low, high) = match spec.intensity {
                IntensityPolicy::BaseIntensity { intensity } => {
                    let low = 2.0 * gt * intensity.sqrt();
                    (low, low + FRAC_PI_2)
                }
                IntensityPolicy::ThetaPair { theta0, .. } => (theta0, theta0 + FRAC_PI_2),
            };
            let intensity_for = |abs_theta: f64| (abs_theta / (2.0 * gt)).powi(2);
            let hi = ProbePoint::new(g, tau, phi, intensity_for(high))?;
            let lo = ProbePoint::new(g, tau, phi, intensity_for(low))?;
            // order so that θ₁ − θ₂ = +π/2 whatever the sign of g
            let probes = if g > 0.0 { vec![hi, lo] } else { vec![lo, hi] };
            sites.push(ProbeSite { mu: hi.mu, probes });
        }
    }
    Ok(sites)
}
