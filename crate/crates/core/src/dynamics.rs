//! Jaynes–Cummings dynamics of the detector atom.
//!
//! Everything is in the interaction picture at resonance, so only coupling
//! terms appear. The two-mode Hamiltonian on atom ⊗ photon ⊗ phonon is
//!
//! ```text
//! H = g_ac (σ₋ c† + σ₊ c) + g_raman (σ₋ a† + σ₊ a)
//! ```
//!
//! which conserves `N = a†a + c†c + σ₊σ₋`. [`ExcitationBlocks`] exploits that
//! to diagonalize photon truncations of several hundred levels.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::device::{coupling_g_ac, raman_coupling, DeviceParams, RamanParams};
use crate::error::{Error, Result};
use crate::fockspace::{
    annihilation, atom_state, embed, hermitian_eigen, sigma_minus, AtomLevel, CMatrix, CVector, HilbertSpec, Kron,
    ModeOperator, Propagator, QuantumState, Representation, Subsystem,
};

/// Probabilities may leave [0, 1] by at most this much before clamping.
pub const CLAMP_TOL: f64 = 1e-10;
/// Relative tolerance for declaring two coupling rates matched.
pub const MATCH_TOL: f64 = 1e-9;
/// Ensemble weights below this are dropped when unravelling mixed inputs.
const WEIGHT_FLOOR: f64 = 1e-15;

/// Incoherent mixture `ρ_e|e⟩⟨e| + ρ_g|g⟩⟨g|` of the detector atom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AtomMixture {
    rho_e: f64,
    rho_g: f64,
}

impl AtomMixture {
    pub fn new(rho_e: f64, rho_g: f64) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&rho_e) && (0.0..=1.0).contains(&rho_g) && (rho_e + rho_g - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(Error::InvalidState(format!("atom mixture ({rho_e}, {rho_g}) is not a probability pair")));
        }
        Ok(Self { rho_e, rho_g })
    }

    pub fn from_excited(rho_e: f64) -> Result<Self> {
        Self::new(rho_e, 1.0 - rho_e)
    }

    pub fn ground() -> Self {
        Self { rho_e: 0.0, rho_g: 1.0 }
    }

    pub fn excited() -> Self {
        Self { rho_e: 1.0, rho_g: 0.0 }
    }

    pub fn rho_e(&self) -> f64 {
        self.rho_e
    }

    pub fn rho_g(&self) -> f64 {
        self.rho_g
    }

    /// `ρ_e − ρ_g`, the signal prefactor.
    pub fn contrast(&self) -> f64 {
        self.rho_e - self.rho_g
    }

    pub fn state(&self) -> QuantumState {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(AtomLevel::Excited.index(), AtomLevel::Excited.index())] = C64::new(self.rho_e, 0.0);
        rho[(AtomLevel::Ground.index(), AtomLevel::Ground.index())] = C64::new(self.rho_g, 0.0);
        QuantumState::mixed_trusted(HilbertSpec::atom(), rho)
    }

    fn branches(&self) -> impl Iterator<Item = (f64, AtomLevel)> {
        [(self.rho_g, AtomLevel::Ground), (self.rho_e, AtomLevel::Excited)]
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
    }
}

/// Magnetic and Raman rates, rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingSet {
    pub g_ac: f64,
    pub g_raman: f64,
    matched: bool,
}

impl CouplingSet {
    pub fn new(g_ac: f64, g_raman: f64) -> Self {
        let scale = g_ac.abs().max(g_raman.abs());
        Self { g_ac, g_raman, matched: (g_ac - g_raman).abs() <= MATCH_TOL * scale }
    }

    /// Both rates equal to `g`.
    pub fn matched(g: f64) -> Self {
        Self { g_ac: g, g_raman: g, matched: true }
    }

    pub fn from_device(p: &DeviceParams, rp: &RamanParams) -> Result<Self> {
        Ok(Self::new(coupling_g_ac(p)?, raman_coupling(rp)?))
    }

    pub fn is_matched(&self) -> bool {
        self.matched
    }

    /// The common rate when matched.
    pub fn g(&self) -> Option<f64> {
        self.matched.then_some(0.5 * (self.g_ac + self.g_raman))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("mode dimension {d} < 2")));
    }
    Ok(())
}

/// `λ(σ₋M† + σ₊M)` on atom ⊗ mode.
pub fn jc_hamiltonian(lambda: f64, dim: usize) -> Result<ModeOperator> {
    check_dim(dim)?;
    let space = HilbertSpec::new(vec![dim], true)?;
    let sm = embed(&sigma_minus(), &space, Subsystem::Atom)?;
    let m = embed(&annihilation(dim)?, &space, Subsystem::Mode(0))?;
    let term = &sm * &m.adjoint();
    Ok((&term + &term.adjoint()).scale(C64::new(lambda, 0.0)))
}

/// Nonzero upper-triangle-and-below entries `(row, col, value)` of the
/// two-mode Hamiltonian in the atom ⊗ photon ⊗ phonon basis.
pub fn two_mode_entries(cs: &CouplingSet, dim_photon: usize, dim_phonon: usize) -> Vec<(usize, usize, f64)> {
    let idx = |atom: usize, na: usize, nc: usize| (atom * dim_photon + na) * dim_phonon + nc;
    let mut out = Vec::new();
    for na in 0..dim_photon {
        for nc in 0..dim_phonon {
            let ground = idx(0, na, nc);
            if nc > 0 && cs.g_ac != 0.0 {
                let v = cs.g_ac * (nc as f64).sqrt();
                let excited = idx(1, na, nc - 1);
                out.push((excited, ground, v));
                out.push((ground, excited, v));
            }
            if na > 0 && cs.g_raman != 0.0 {
                let v = cs.g_raman * (na as f64).sqrt();
                let excited = idx(1, na - 1, nc);
                out.push((excited, ground, v));
                out.push((ground, excited, v));
            }
        }
    }
    out
}

/// Total excitation number of each basis state of atom ⊗ photon ⊗ phonon.
pub fn excitation_numbers(dim_photon: usize, dim_phonon: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2 * dim_photon * dim_phonon);
    for atom in 0..2 {
        for na in 0..dim_photon {
            for nc in 0..dim_phonon {
                out.push(atom + na + nc);
            }
        }
    }
    out
}

fn two_mode_space(dim_photon: usize, dim_phonon: usize) -> Result<HilbertSpec> {
    check_dim(dim_photon)?;
    check_dim(dim_phonon)?;
    HilbertSpec::new(vec![dim_photon, dim_phonon], true)
}

/// Dense magnetic + Raman Hamiltonian on atom ⊗ photon ⊗ phonon.
pub fn two_mode_hamiltonian(cs: &CouplingSet, dim_photon: usize, dim_phonon: usize) -> Result<ModeOperator> {
    let space = two_mode_space(dim_photon, dim_phonon)?;
    let d = space.dim();
    let mut m = CMatrix::zeros(d, d);
    for (i, j, v) in two_mode_entries(cs, dim_photon, dim_phonon) {
        m[(i, j)] += C64::new(v, 0.0);
    }
    ModeOperator::new(space, m)
}

/// `a†a + c†c + σ₊σ₋`.
pub fn total_excitation(dim_photon: usize, dim_phonon: usize) -> Result<ModeOperator> {
    let space = two_mode_space(dim_photon, dim_phonon)?;
    let diag = CVector::from_iterator(
        space.dim(),
        excitation_numbers(dim_photon, dim_phonon).into_iter().map(|n| C64::new(n as f64, 0.0)),
    );
    ModeOperator::new(space, CMatrix::from_diagonal(&diag))
}

/// Composite mode `A = (a + c)/√2` on photon ⊗ phonon.
pub fn composite_mode(dim_photon: usize, dim_phonon: usize) -> Result<ModeOperator> {
    check_dim(dim_photon)?;
    check_dim(dim_phonon)?;
    let space = HilbertSpec::new(vec![dim_photon, dim_phonon], false)?;
    let a = embed(&annihilation(dim_photon)?, &space, Subsystem::Mode(0))?;
    let c = embed(&annihilation(dim_phonon)?, &space, Subsystem::Mode(1))?;
    Ok((a + c).scale(C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)))
}

fn clamp_probability(p: f64) -> Result<f64> {
    if p < -CLAMP_TOL || p > 1.0 + CLAMP_TOL || !p.is_finite() {
        return Err(Error::Contract(format!("probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Excited-state probability in the printed closed form
/// `½ + ½(ρ_e − ρ_g)⟨cos(2λτ√(M†M + 1))⟩` for a single-mode state.
///
/// The `+1` is applied to both atomic branches exactly as printed. It is
/// exact for `ρ_e = 1`; for the ground branch the true dynamics uses
/// `√(M†M)` (see [`pe_exact_unitary`]).
pub fn pe_closed_form(mode_state: &QuantumState, am: AtomMixture, lambda: f64, tau: f64) -> Result<f64> {
    if !mode_state.space().is_single_mode() {
        return Err(Error::InvalidState("pe_closed_form expects a single-mode state".into()));
    }
    let mean_cos: f64 = mode_state
        .populations()
        .iter()
        .enumerate()
        .map(|(n, p)| p * (2.0 * lambda * tau * ((n + 1) as f64).sqrt()).cos())
        .sum();
    clamp_probability(0.5 + 0.5 * am.contrast() * mean_cos)
}

/// `Tr(Π_e ρ)` for a state whose leftmost factor is the atom.
pub fn excited_probability(state: &QuantumState) -> Result<f64> {
    if !state.space().has_atom() {
        return Err(Error::InvalidState("state has no atom factor".into()));
    }
    let half = state.dim() / 2;
    let p: f64 = state.populations()[half * AtomLevel::Excited.index()..][..half].iter().sum();
    clamp_probability(p)
}

/// Brute-force `Tr(Π_e U ρ U†)` with `U = exp(−iHτ)`.
pub fn pe_exact_unitary(initial: &QuantumState, h: &ModeOperator, tau: f64) -> Result<f64> {
    if initial.space() != h.space() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: initial.dim() });
    }
    if !initial.space().has_atom() {
        return Err(Error::InvalidState("initial state has no atom factor".into()));
    }
    let evolved = Propagator::new(h)?.evolve(initial, tau)?;
    excited_probability(&evolved)
}

/// Photon truncation for a coherent Raman field of mean photon number `I`:
/// `ceil(I + 6√I + 10)`.
pub fn photon_dim_for_intensity(intensity: f64) -> usize {
    (intensity + 6.0 * intensity.sqrt() + 10.0).ceil() as usize
}

/// Weighted pure components of a state (eigen-decomposition for mixed input).
pub(crate) fn pure_ensemble(state: &QuantumState) -> Vec<(f64, CVector)> {
    match state.representation() {
        Representation::Pure(v) => vec![(1.0, v.clone())],
        Representation::Mixed(m) => {
            let (vals, vecs) = hermitian_eigen(m);
            vals.iter()
                .enumerate()
                .filter(|(_, &w)| w > WEIGHT_FLOOR)
                .map(|(k, &w)| (w, vecs.column(k).into_owned()))
                .collect()
        }
    }
}

#[derive(Clone, Debug)]
struct Block {
    indices: Vec<usize>,
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

/// The two-mode Hamiltonian split into excitation-number blocks, each
/// diagonalized once. Evolution agrees with the dense route to rounding.
#[derive(Clone, Debug)]
pub struct ExcitationBlocks {
    space: HilbertSpec,
    dim_photon: usize,
    dim_phonon: usize,
    blocks: Vec<Block>,
}

impl ExcitationBlocks {
    pub fn new(cs: &CouplingSet, dim_photon: usize, dim_phonon: usize) -> Result<Self> {
        let space = two_mode_space(dim_photon, dim_phonon)?;
        let numbers = excitation_numbers(dim_photon, dim_phonon);
        let max_n = numbers.iter().copied().max().unwrap_or(0);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); max_n + 1];
        let mut position = vec![0usize; numbers.len()];
        for (i, &n) in numbers.iter().enumerate() {
            position[i] = members[n].len();
            members[n].push(i);
        }
        let mut mats: Vec<CMatrix> = members.iter().map(|m| CMatrix::zeros(m.len(), m.len())).collect();
        for (i, j, v) in two_mode_entries(cs, dim_photon, dim_phonon) {
            debug_assert_eq!(numbers[i], numbers[j]);
            mats[numbers[i]][(position[i], position[j])] += C64::new(v, 0.0);
        }
        let blocks = members
            .into_iter()
            .zip(mats)
            .filter(|(m, _)| !m.is_empty())
            .map(|(indices, h)| {
                let (eigenvalues, eigenvectors) = hermitian_eigen(&h);
                Block { indices, eigenvalues, eigenvectors }
            })
            .collect();
        Ok(Self { space, dim_photon, dim_phonon, blocks })
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_photon, self.dim_phonon)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0)
    }

    fn check(&self, psi: &CVector) -> Result<()> {
        if psi.len() != self.space.dim() {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), found: psi.len() });
        }
        Ok(())
    }

    /// `exp(−iHt) ψ`.
    pub fn evolve_vector(&self, psi: &CVector, t: f64) -> Result<CVector> {
        self.check(psi)?;
        let mut out = CVector::zeros(psi.len());
        for b in &self.blocks {
            let local = CVector::from_iterator(b.indices.len(), b.indices.iter().map(|&i| psi[i]));
            let mut coeffs = b.eigenvectors.ad_mul(&local);
            for (c, &l) in coeffs.iter_mut().zip(b.eigenvalues.iter()) {
                *c *= C64::from_polar(1.0, -l * t);
            }
            let evolved = &b.eigenvectors * coeffs;
            for (&i, v) in b.indices.iter().zip(evolved.iter()) {
                out[i] = *v;
            }
        }
        Ok(out)
    }

    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        if state.space() != &self.space {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), found: state.dim() });
        }
        match state.representation() {
            Representation::Pure(psi) => Ok(QuantumState::pure_trusted(self.space.clone(), self.evolve_vector(psi, t)?)),
            Representation::Mixed(_) => {
                let d = self.space.dim();
                let mut rho = CMatrix::zeros(d, d);
                for (w, v) in pure_ensemble(state) {
                    let e = self.evolve_vector(&v, t)?;
                    rho += (&e * e.adjoint()) * C64::new(w, 0.0);
                }
                Ok(QuantumState::mixed_trusted(self.space.clone(), rho))
            }
        }
    }

    /// Excited-state probability of `ψ(t)` for every `t` in `times`.
    pub fn excited_probabilities(&self, psi: &CVector, times: &[f64]) -> Result<Vec<f64>> {
        self.check(psi)?;
        let half = self.space.dim() / 2;
        let mut out = vec![0.0; times.len()];
        for b in &self.blocks {
            let local = CVector::from_iterator(b.indices.len(), b.indices.iter().map(|&i| psi[i]));
            if local.norm_squared() == 0.0 {
                continue;
            }
            let coeffs = b.eigenvectors.ad_mul(&local);
            let excited: Vec<usize> = (0..b.indices.len()).filter(|&k| b.indices[k] >= half).collect();
            if excited.is_empty() {
                continue;
            }
            for (slot, &t) in out.iter_mut().zip(times) {
                let phased = CVector::from_iterator(
                    coeffs.len(),
                    coeffs.iter().zip(b.eigenvalues.iter()).map(|(c, &l)| c * C64::from_polar(1.0, -l * t)),
                );
                for &k in &excited {
                    *slot += b.eigenvectors.row(k).transpose().dot(&phased).norm_sqr();
                }
            }
        }
        out.into_iter().map(clamp_probability).collect()
    }
}

/// Exact excited-state probability for atom mixture ⊗ photon ⊗ phonon
/// product inputs, evaluated at every `τ` in `taus`. Mixed inputs are
/// unravelled into their eigen-ensembles.
pub fn pe_exact_two_mode(
    blocks: &ExcitationBlocks,
    am: AtomMixture,
    photon: &QuantumState,
    phonon: &QuantumState,
    taus: &[f64],
) -> Result<Vec<f64>> {
    let (dp, dc) = blocks.dims();
    if photon.dim() != dp || phonon.dim() != dc {
        return Err(Error::DimensionMismatch { expected: dp * dc, found: photon.dim() * phonon.dim() });
    }
    let photons = pure_ensemble(photon);
    let phonons = pure_ensemble(phonon);
    let mut total = vec![0.0; taus.len()];
    for (wa, level) in am.branches() {
        let atom = atom_state(level);
        let atom_v = atom.vector().expect("atom basis state is pure");
        for (wp, vp) in &photons {
            for (wc, vc) in &phonons {
                let psi = atom_v.kronecker(vp).kronecker(vc);
                let probs = blocks.excited_probabilities(&psi, taus)?;
                for (t, p) in total.iter_mut().zip(probs) {
                    *t += wa * wp * wc * p;
                }
            }
        }
    }
    total.into_iter().map(clamp_probability).collect()
}

/// Atom ⊗ photon ⊗ phonon product state.
pub fn product_state(atom: &QuantumState, photon: &QuantumState, phonon: &QuantumState) -> Result<QuantumState> {
    atom.kron(photon)?.kron(phonon)
}
