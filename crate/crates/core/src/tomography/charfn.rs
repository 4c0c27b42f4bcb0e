use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::AtomMixture;
use crate::error::{Error, Result};
use crate::fockspace::{annihilation, check_truncation, displacement, hermitian_eigen, CMatrix, QuantumState, Representation};

/// Large-I expansion is flagged when `I < 25 (⟨n_c⟩ + 1)`.
pub const LARGE_I_FACTOR: f64 = 25.0;

fn require_single_mode(rho: &QuantumState) -> Result<usize> {
    if !rho.space().is_single_mode() {
        return Err(Error::InvalidState("characteristic function needs a single-mode state".into()));
    }
    Ok(rho.dim())
}

/// `C_W(μ) = Tr[ρ D(μ)]`, using the dense displacement matrix.
pub fn char_fn(rho: &QuantumState, mu: C64) -> Result<C64> {
    let dim = require_single_mode(rho)?;
    let d = displacement(dim, mu)?;
    Ok(match rho.representation() {
        Representation::Pure(psi) => psi.dotc(&d.apply(psi)),
        Representation::Mixed(m) => (m * d.matrix()).trace(),
    })
}

/// Fast repeated evaluation of `C_W` for one state.
///
/// Writing `μ = r e^{iϑ}`, `D(μ) = R(ϑ) D(r) R(ϑ)†` with `R(ϑ) = e^{iϑ c†c}`,
/// and `D(r) = exp(−i r K)` for the Hermitian `K = i(c† − c)`. With
/// `K = V Λ V†`,
///
/// ```text
/// C_W(μ) = Σ_j e^{iϑj} Σ_k T[j][k] e^{−irλ_k},
/// T[j][k] = Σ_{m−n=j} ρ_nm V_mk V*_nk,
/// ```
///
/// so after an `O(d³)` setup each point costs `O(d²)`.
#[derive(Clone, Debug)]
pub struct CharFnEvaluator {
    dim: usize,
    eigenvalues: DVector<f64>,
    // rows j + dim − 1, columns k
    table: CMatrix,
}

impl CharFnEvaluator {
    pub fn new(rho: &QuantumState) -> Result<Self> {
        let dim = require_single_mode(rho)?;
        let c = annihilation(dim)?;
        let k = (c.adjoint().into_matrix() - c.matrix()) * C64::i();
        let (eigenvalues, v) = hermitian_eigen(&k);
        let density = rho.density();
        let mut table = CMatrix::zeros(2 * dim - 1, dim);
        for kk in 0..dim {
            for m in 0..dim {
                let vm = v[(m, kk)];
                for n in 0..dim {
                    let j = m + dim - 1 - n;
                    table[(j, kk)] += density[(n, m)] * vm * v[(n, kk)].conj();
                }
            }
        }
        Ok(Self { dim, eigenvalues, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, mu: C64) -> Result<C64> {
        check_truncation(mu.norm(), self.dim)?;
        Ok(self.eval_unchecked(mu))
    }

    pub(crate) fn eval_unchecked(&self, mu: C64) -> C64 {
        let (r, theta) = mu.to_polar();
        let phases = DVector::from_iterator(self.dim, self.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -r * l)));
        let s = &self.table * phases;
        let offset = self.dim as i64 - 1;
        s.iter()
            .enumerate()
            .map(|(row, v)| v * C64::from_polar(1.0, theta * (row as i64 - offset) as f64))
            .sum()
    }
}

/// Outcome of [`pe_approx`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeApprox {
    pub value: f64,
    /// The raw value left [0, 1] and was clamped.
    pub clamped: bool,
    /// `I < 25(⟨n_c⟩ + 1)`: the strong-field expansion is doubtful.
    pub large_i_warning: bool,
    pub theta: f64,
    pub mu: C64,
}

/// `½ + ½(ρ_e − ρ_g) Re[e^{iθ} C]`, returning the raw (unclamped) value.
pub fn pe_from_charfn(c: C64, am: AtomMixture, theta: f64) -> f64 {
    0.5 + 0.5 * am.contrast() * (C64::from_polar(1.0, theta) * c).re
}

/// Displacement probed by interaction time `τ` and Raman phase `φ`:
/// `μ = i g τ e^{iφ}`.
pub fn probe_mu(g: f64, tau: f64, phi: f64) -> C64 {
    C64::new(0.0, g * tau) * C64::from_polar(1.0, phi)
}

/// Strong-field excited-state probability
/// `½ + ¼(ρ_e − ρ_g)(e^{2igτ√I} C_W(μ) + c.c.)`.
pub fn pe_approx(rho_c: &QuantumState, am: AtomMixture, g: f64, tau: f64, intensity: f64, phi: f64) -> Result<PeApprox> {
    let mu = probe_mu(g, tau, phi);
    let c = char_fn(rho_c, mu)?;
    pe_approx_with(c, rho_c.mean_number()?, am, g, tau, intensity, phi)
}

pub(crate) fn pe_approx_with(
    c: C64,
    mean_number: f64,
    am: AtomMixture,
    g: f64,
    tau: f64,
    intensity: f64,
    phi: f64,
) -> Result<PeApprox> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(Error::InvalidIntensity(intensity));
    }
    let theta = 2.0 * g * tau * intensity.sqrt();
    let raw = pe_from_charfn(c, am, theta);
    let value = raw.clamp(0.0, 1.0);
    Ok(PeApprox {
        value,
        clamped: value != raw,
        large_i_warning: intensity < LARGE_I_FACTOR * (mean_number + 1.0),
        theta,
        mu: probe_mu(g, tau, phi),
    })
}
