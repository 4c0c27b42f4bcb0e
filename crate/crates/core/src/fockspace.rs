//! Truncated Fock-space linear algebra.
//!
//! A [`HilbertSpec`] lists the factors of a composite space: an optional
//! two-level atom followed by bosonic modes, each truncated to `dim` levels.
//! Kronecker products always put the leftmost factor on the slowest-varying
//! index, so the full index of `|atom, n_1, n_2⟩` is
//! `(atom * d_1 + n_1) * d_2 + n_2`.
//!
//! Atom levels are indexed ground = 0, excited = 1, which makes `σ₋` the
//! same matrix as a two-level annihilation operator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Norm/trace tolerance for states built from scratch.
pub const STATE_TOL: f64 = 1e-12;
/// Hermiticity tolerance accepted by [`evolve`] and [`Propagator`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a density matrix.
pub const EIGEN_FLOOR: f64 = -1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Factor structure of a (possibly composite) Hilbert space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    mode_dims: Vec<usize>,
    has_atom: bool,
}

/// One tensor factor of a [`HilbertSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subsystem {
    Atom,
    /// Bosonic mode by position among the modes (0 = first mode).
    Mode(usize),
}

impl HilbertSpec {
    pub fn new(mode_dims: Vec<usize>, has_atom: bool) -> Result<Self> {
        if let Some(&d) = mode_dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(format!(
                "mode dimension {d} < 2"
            )));
        }
        if mode_dims.is_empty() && !has_atom {
            return Err(Error::InvalidDimension("space has no factors".into()));
        }
        Ok(Self { mode_dims, has_atom })
    }

    /// Single bosonic mode.
    pub fn mode(dim: usize) -> Result<Self> {
        Self::new(vec![dim], false)
    }

    /// Bare two-level atom.
    pub fn atom() -> Self {
        Self { mode_dims: Vec::new(), has_atom: true }
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn has_atom(&self) -> bool {
        self.has_atom
    }

    /// Total dimension: product of mode dims, doubled when an atom is present.
    pub fn dim(&self) -> usize {
        let modes: usize = self.mode_dims.iter().product();
        if self.has_atom {
            2 * modes
        } else {
            modes
        }
    }

    /// Factor dimensions in tensor order (atom first).
    pub fn factor_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.mode_dims.len() + 1);
        if self.has_atom {
            dims.push(2);
        }
        dims.extend_from_slice(&self.mode_dims);
        dims
    }

    /// Position of `sub` in [`factor_dims`](Self::factor_dims).
    pub fn factor_index(&self, sub: Subsystem) -> Result<usize> {
        let offset = usize::from(self.has_atom);
        match sub {
            Subsystem::Atom if self.has_atom => Ok(0),
            Subsystem::Mode(i) if i < self.mode_dims.len() => Ok(i + offset),
            Subsystem::Atom => Err(Error::InvalidIndex { index: 0, dim: 0 }),
            Subsystem::Mode(i) => Err(Error::InvalidIndex {
                index: i,
                dim: self.mode_dims.len(),
            }),
        }
    }

    pub fn is_single_mode(&self) -> bool {
        !self.has_atom && self.mode_dims.len() == 1
    }

    /// Product space `self ⊗ other`. The atom, if any, must stay leftmost.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if other.has_atom && (self.has_atom || !self.mode_dims.is_empty()) {
            return Err(Error::InvalidDimension(
                "atom factor must be the leftmost tensor factor".into(),
            ));
        }
        let mut mode_dims = self.mode_dims.clone();
        mode_dims.extend_from_slice(&other.mode_dims);
        Ok(Self {
            mode_dims,
            has_atom: self.has_atom || other.has_atom,
        })
    }
}

/// Atomic level of the two-level detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomLevel {
    Ground,
    Excited,
}

impl AtomLevel {
    pub fn index(self) -> usize {
        match self {
            AtomLevel::Ground => 0,
            AtomLevel::Excited => 1,
        }
    }
}

/// Square complex matrix acting on a [`HilbertSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    space: HilbertSpec,
    matrix: CMatrix,
}

impl ModeOperator {
    pub fn new(space: HilbertSpec, matrix: CMatrix) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: &HilbertSpec) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: CMatrix::identity(d, d) }
    }

    pub fn zeros(space: &HilbertSpec) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: CMatrix::zeros(d, d) }
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * s }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `[self, other]`. Panics if the spaces differ.
    pub fn commutator(&self, other: &Self) -> Self {
        self * other - other * self
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_defect(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait<&ModeOperator> for &ModeOperator {
            type Output = ModeOperator;
            fn $method(self, rhs: &ModeOperator) -> ModeOperator {
                assert_eq!(self.space, rhs.space, "operator spaces differ");
                ModeOperator { space: self.space.clone(), matrix: &self.matrix $op &rhs.matrix }
            }
        }
        impl std::ops::$trait<ModeOperator> for ModeOperator {
            type Output = ModeOperator;
            fn $method(self, rhs: ModeOperator) -> ModeOperator {
                &self $op &rhs
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);
impl_binop!(Mul, mul, *);

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Annihilation operator `c` with `⟨n−1|c|n⟩ = √n`.
pub fn annihilation(dim: usize) -> Result<ModeOperator> {
    let space = HilbertSpec::mode(dim)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(ModeOperator { space, matrix: m })
}

pub fn creation(dim: usize) -> Result<ModeOperator> {
    Ok(annihilation(dim)?.adjoint())
}

/// Number operator `c†c`, diagonal.
pub fn number(dim: usize) -> Result<ModeOperator> {
    let space = HilbertSpec::mode(dim)?;
    let m = CMatrix::from_diagonal(&CVector::from_fn(dim, |n, _| C64::new(n as f64, 0.0)));
    Ok(ModeOperator { space, matrix: m })
}

/// `σ₋ = |g⟩⟨e|`.
pub fn sigma_minus() -> ModeOperator {
    let mut m = CMatrix::zeros(2, 2);
    m[(AtomLevel::Ground.index(), AtomLevel::Excited.index())] = ONE;
    ModeOperator { space: HilbertSpec::atom(), matrix: m }
}

pub fn sigma_plus() -> ModeOperator {
    sigma_minus().adjoint()
}

/// `σ_z = |e⟩⟨e| − |g⟩⟨g|`.
pub fn sigma_z() -> ModeOperator {
    let mut m = CMatrix::zeros(2, 2);
    m[(1, 1)] = ONE;
    m[(0, 0)] = -ONE;
    ModeOperator { space: HilbertSpec::atom(), matrix: m }
}

/// Projector on one atomic level.
pub fn atom_projector(level: AtomLevel) -> ModeOperator {
    let mut m = CMatrix::zeros(2, 2);
    m[(level.index(), level.index())] = ONE;
    ModeOperator { space: HilbertSpec::atom(), matrix: m }
}

/// Lift a single-factor operator into `space`, padding with identities.
pub fn embed(op: &ModeOperator, space: &HilbertSpec, target: Subsystem) -> Result<ModeOperator> {
    let pos = space.factor_index(target)?;
    let dims = space.factor_dims();
    if op.dim() != dims[pos] {
        return Err(Error::DimensionMismatch { expected: dims[pos], found: op.dim() });
    }
    let left: usize = dims[..pos].iter().product();
    let right: usize = dims[pos + 1..].iter().product();
    let m = CMatrix::identity(left, left)
        .kronecker(&op.matrix)
        .kronecker(&CMatrix::identity(right, right));
    Ok(ModeOperator { space: space.clone(), matrix: m })
}

/// Reject amplitudes whose displaced vacuum would not fit: requires
/// `|α|² + 6|α| ≤ dim`.
pub fn check_truncation(amplitude: f64, dim: usize) -> Result<()> {
    let required = amplitude * amplitude + 6.0 * amplitude;
    if required > dim as f64 {
        return Err(Error::TruncationTooSmall { amplitude, required, dim });
    }
    Ok(())
}

/// Hermitian eigendecomposition `h = V diag(λ) V†`, after symmetrizing away
/// rounding-level anti-Hermitian parts.
pub(crate) fn hermitian_eigen(h: &CMatrix) -> (DVector<f64>, CMatrix) {
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues, eig.eigenvectors)
}

/// `V diag(f(λ)) V†`.
pub(crate) fn spectral_map(values: &DVector<f64>, vectors: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let mut scaled = vectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f(values[k]);
    }
    scaled * vectors.adjoint()
}

/// Displacement operator `D(μ) = exp(μc† − μ*c)` on a truncated mode.
///
/// Computed as `exp(−iK)` with `K = i(μc† − μ*c)` Hermitian, so the result is
/// unitary to machine precision inside the truncation.
pub fn displacement(dim: usize, mu: C64) -> Result<ModeOperator> {
    HilbertSpec::mode(dim)?;
    check_truncation(mu.norm(), dim)?;
    let c = annihilation(dim)?;
    if mu == ZERO {
        return Ok(ModeOperator::identity(c.space()));
    }
    let generator = c.adjoint().matrix * mu - c.matrix() * mu.conj();
    let k = generator * C64::i();
    let (vals, vecs) = hermitian_eigen(&k);
    let m = spectral_map(&vals, &vecs, |l| C64::from_polar(1.0, -l));
    Ok(ModeOperator { space: c.space, matrix: m })
}

/// Pure vector or density matrix over a [`HilbertSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    space: HilbertSpec,
    repr: Representation,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    Pure(CVector),
    Mixed(CMatrix),
}

impl QuantumState {
    /// Pure state; the vector must already have unit norm (within 1e-12).
    pub fn pure(space: HilbertSpec, psi: CVector) -> Result<Self> {
        check_len(&space, psi.len())?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self { space, repr: Representation::Pure(psi) })
    }

    /// Pure state from an unnormalized vector.
    pub fn pure_normalized(space: HilbertSpec, psi: CVector) -> Result<Self> {
        check_len(&space, psi.len())?;
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("vector has zero or non-finite norm".into()));
        }
        Ok(Self { space, repr: Representation::Pure(psi / C64::new(norm, 0.0)) })
    }

    /// Density matrix, validated for Hermiticity, unit trace and positivity.
    pub fn mixed(space: HilbertSpec, rho: CMatrix) -> Result<Self> {
        check_len(&space, rho.nrows())?;
        if !rho.is_square() {
            return Err(Error::InvalidState("density matrix is not square".into()));
        }
        let herm = max_abs_diff(&rho, &rho.adjoint());
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = rho.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let (vals, _) = hermitian_eigen(&rho);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { space, repr: Representation::Mixed(rho) })
    }

    /// Density matrix built by a trace- and positivity-preserving map.
    pub(crate) fn mixed_trusted(space: HilbertSpec, rho: CMatrix) -> Self {
        debug_assert_eq!(rho.nrows(), space.dim());
        Self { space, repr: Representation::Mixed(rho) }
    }

    pub(crate) fn pure_trusted(space: HilbertSpec, psi: CVector) -> Self {
        debug_assert_eq!(psi.len(), space.dim());
        Self { space, repr: Representation::Pure(psi) }
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(space: HilbertSpec, index: usize) -> Result<Self> {
        let d = space.dim();
        if index >= d {
            return Err(Error::InvalidIndex { index, dim: d });
        }
        let mut v = CVector::zeros(d);
        v[index] = ONE;
        Ok(Self::pure_trusted(space, v))
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Representation::Pure(_))
    }

    pub fn vector(&self) -> Option<&CVector> {
        match &self.repr {
            Representation::Pure(v) => Some(v),
            Representation::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> CMatrix {
        match &self.repr {
            Representation::Pure(v) => v * v.adjoint(),
            Representation::Mixed(m) => m.clone(),
        }
    }

    pub fn into_mixed(self) -> Self {
        let rho = self.density();
        Self { space: self.space, repr: Representation::Mixed(rho) }
    }

    /// Norm squared for pure states, trace for mixed ones.
    pub fn total_probability(&self) -> f64 {
        match &self.repr {
            Representation::Pure(v) => v.norm_squared(),
            Representation::Mixed(m) => m.trace().re,
        }
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        match &self.repr {
            Representation::Pure(v) => v.norm_squared().powi(2),
            Representation::Mixed(m) => m.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// `Tr(ρ X)`.
    pub fn expectation(&self, op: &ModeOperator) -> Result<C64> {
        if op.space() != &self.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.dim() });
        }
        Ok(match &self.repr {
            Representation::Pure(v) => v.dotc(&(op.matrix() * v)),
            Representation::Mixed(m) => (m * op.matrix()).trace(),
        })
    }

    /// Diagonal of the density matrix in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        match &self.repr {
            Representation::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Representation::Mixed(m) => m.diagonal().iter().map(|z| z.re).collect(),
        }
    }

    /// `⟨c†c⟩` of a single-mode state.
    pub fn mean_number(&self) -> Result<f64> {
        if !self.space.is_single_mode() {
            return Err(Error::InvalidState("mean_number needs a single-mode state".into()));
        }
        Ok(self
            .populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum())
    }

    /// Uhlmann fidelity; reduces to `|⟨ψ|φ⟩|²` and `⟨ψ|ρ|ψ⟩` for pure arguments.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(match (&self.repr, &other.repr) {
            (Representation::Pure(a), Representation::Pure(b)) => a.dotc(b).norm_sqr(),
            (Representation::Pure(a), Representation::Mixed(m))
            | (Representation::Mixed(m), Representation::Pure(a)) => a.dotc(&(m * a)).re,
            (Representation::Mixed(a), Representation::Mixed(b)) => {
                let (va, ua) = hermitian_eigen(a);
                let sqrt_a = spectral_map(&va, &ua, |l| C64::new(l.max(0.0).sqrt(), 0.0));
                let inner = &sqrt_a * b * &sqrt_a;
                let (vi, _) = hermitian_eigen(&inner);
                vi.iter().map(|l| l.max(0.0).sqrt()).sum::<f64>().powi(2)
            }
        })
    }
}

fn check_len(space: &HilbertSpec, len: usize) -> Result<()> {
    if len != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: len });
    }
    Ok(())
}

/// Single-mode state descriptors understood by [`make_state`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateSpec {
    Fock(usize),
    Coherent(C64),
    /// Bose–Einstein populations with the given mean occupation.
    Thermal(f64),
    /// `∝ |α⟩ + e^{iχ}|−α⟩`.
    Cat { alpha: C64, phase: f64 },
}

/// Coherent-state amplitudes `α^n e^{−|α|²/2}/√(n!)` on `dim` levels
/// (not renormalized).
pub(crate) fn coherent_amplitudes(dim: usize, alpha: C64) -> CVector {
    let mut v = CVector::zeros(dim);
    v[0] = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 1..dim {
        v[n] = v[n - 1] * alpha / (n as f64).sqrt();
    }
    v
}

/// Build a normalized single-mode state of dimension `dim`.
pub fn make_state(dim: usize, spec: StateSpec) -> Result<QuantumState> {
    let space = HilbertSpec::mode(dim)?;
    match spec {
        StateSpec::Fock(n) => QuantumState::basis(space, n),
        StateSpec::Coherent(alpha) => {
            check_truncation(alpha.norm(), dim)?;
            QuantumState::pure_normalized(space, coherent_amplitudes(dim, alpha))
        }
        StateSpec::Thermal(nbar) => {
            if !(nbar >= 0.0) || !nbar.is_finite() {
                return Err(Error::InvalidState(format!("thermal occupation {nbar}")));
            }
            let mut pops = vec![0.0; dim];
            if nbar == 0.0 {
                pops[0] = 1.0;
            } else {
                let ratio = nbar / (nbar + 1.0);
                let mut w = 1.0;
                for p in pops.iter_mut() {
                    *p = w;
                    w *= ratio;
                }
                let total: f64 = pops.iter().sum();
                pops.iter_mut().for_each(|p| *p /= total);
            }
            let rho = CMatrix::from_diagonal(&CVector::from_iterator(
                dim,
                pops.into_iter().map(|p| C64::new(p, 0.0)),
            ));
            Ok(QuantumState::mixed_trusted(space, rho))
        }
        StateSpec::Cat { alpha, phase } => {
            check_truncation(alpha.norm(), dim)?;
            let v = coherent_amplitudes(dim, alpha)
                + coherent_amplitudes(dim, -alpha) * C64::from_polar(1.0, phase);
            // odd cat at α → 0 cancels to rounding noise
            if v.norm() < 1e-10 {
                return Err(Error::InvalidState(format!("cat superposition at α = {alpha} vanishes")));
            }
            QuantumState::pure_normalized(space, v)
        }
    }
}

/// Atom in a definite level.
pub fn atom_state(level: AtomLevel) -> QuantumState {
    QuantumState::basis(HilbertSpec::atom(), level.index()).expect("atom index in range")
}

/// Kronecker product with the leftmost factor slowest.
pub trait Kron: Sized {
    fn kron(&self, other: &Self) -> Result<Self>;
}

impl Kron for ModeOperator {
    fn kron(&self, other: &Self) -> Result<Self> {
        let space = self.space.tensor(&other.space)?;
        Ok(Self { space, matrix: self.matrix.kronecker(&other.matrix) })
    }
}

impl Kron for QuantumState {
    fn kron(&self, other: &Self) -> Result<Self> {
        let space = self.space.tensor(&other.space)?;
        let repr = match (&self.repr, &other.repr) {
            (Representation::Pure(a), Representation::Pure(b)) => Representation::Pure(a.kronecker(b)),
            _ => Representation::Mixed(self.density().kronecker(&other.density())),
        };
        Ok(Self { space, repr })
    }
}

/// `a ⊗ b`.
pub fn tensor<T: Kron>(a: &T, b: &T) -> Result<T> {
    a.kron(b)
}

/// Cached eigendecomposition of a Hermitian generator for repeated
/// evolution at different times.
#[derive(Clone, Debug)]
pub struct Propagator {
    space: HilbertSpec,
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl Propagator {
    pub fn new(h: &ModeOperator) -> Result<Self> {
        let defect = h.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidOperator(format!(
                "Hamiltonian not Hermitian (defect {defect:e})"
            )));
        }
        let (eigenvalues, eigenvectors) = hermitian_eigen(h.matrix());
        Ok(Self { space: h.space().clone(), eigenvalues, eigenvectors })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `exp(−iHt)`.
    pub fn unitary(&self, t: f64) -> ModeOperator {
        let m = spectral_map(&self.eigenvalues, &self.eigenvectors, |l| C64::from_polar(1.0, -l * t));
        ModeOperator { space: self.space.clone(), matrix: m }
    }

    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        if state.space() != &self.space {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), found: state.dim() });
        }
        if !t.is_finite() {
            return Err(Error::InvalidOperator(format!("non-finite time {t}")));
        }
        let phases: Vec<C64> = self.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
        let v = &self.eigenvectors;
        let repr = match &state.repr {
            Representation::Pure(psi) => {
                let mut coeffs = v.ad_mul(psi);
                coeffs.iter_mut().zip(&phases).for_each(|(c, p)| *c *= p);
                Representation::Pure(v * coeffs)
            }
            Representation::Mixed(rho) => {
                let mut w = v.ad_mul(rho) * v;
                for j in 0..w.nrows() {
                    for k in 0..w.ncols() {
                        w[(j, k)] *= phases[j] * phases[k].conj();
                    }
                }
                Representation::Mixed(v * w * v.adjoint())
            }
        };
        Ok(QuantumState { space: self.space.clone(), repr })
    }
}

/// Apply `exp(−iHt)` to `state`; `H` is in rad/s.
pub fn evolve(h: &ModeOperator, state: &QuantumState, t: f64) -> Result<QuantumState> {
    Propagator::new(h)?.evolve(state, t)
}

/// Reduced state on the subsystems listed in `keep` (original order kept).
pub fn partial_trace(state: &QuantumState, keep: &[Subsystem]) -> Result<QuantumState> {
    let space = state.space();
    let dims = space.factor_dims();
    let mut kept = vec![false; dims.len()];
    for &sub in keep {
        let pos = space.factor_index(sub)?;
        if kept[pos] {
            return Err(Error::InvalidIndex { index: pos, dim: dims.len() });
        }
        kept[pos] = true;
    }
    if keep.is_empty() {
        return Err(Error::InvalidIndex { index: 0, dim: 0 });
    }

    let keep_dim: usize = dims.iter().zip(&kept).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let trace_dim = space.dim() / keep_dim;

    // Full index for every (kept, traced) pair.
    let mut full = vec![0usize; space.dim()];
    for idx in 0..space.dim() {
        let (mut rem, mut k, mut t, mut kstride, mut tstride) = (idx, 0, 0, 1, 1);
        for (f, &d) in dims.iter().enumerate().rev() {
            let digit = rem % d;
            rem /= d;
            if kept[f] {
                k += digit * kstride;
                kstride *= d;
            } else {
                t += digit * tstride;
                tstride *= d;
            }
        }
        full[k * trace_dim + t] = idx;
    }

    let rho = match state.representation() {
        Representation::Pure(psi) => {
            let amp = CMatrix::from_fn(keep_dim, trace_dim, |k, t| psi[full[k * trace_dim + t]]);
            &amp * amp.adjoint()
        }
        Representation::Mixed(m) => CMatrix::from_fn(keep_dim, keep_dim, |k1, k2| {
            (0..trace_dim)
                .map(|t| m[(full[k1 * trace_dim + t], full[k2 * trace_dim + t])])
                .sum()
        }),
    };

    let has_atom = space.has_atom() && kept[0];
    let offset = usize::from(space.has_atom());
    let mode_dims = space
        .mode_dims()
        .iter()
        .enumerate()
        .filter(|(i, _)| kept[i + offset])
        .map(|(_, &d)| d)
        .collect();
    Ok(QuantumState::mixed_trusted(HilbertSpec { mode_dims, has_atom }, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(2).unwrap();
        assert_eq!(a.matrix()[(0, 1)], ONE);
        assert_eq!(a.max_abs(), 1.0);
        let a4 = annihilation(4).unwrap();
        assert_abs_diff_eq!(a4.matrix()[(2, 3)].re, 3f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(annihilation(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn number_operator_on_fock() {
        let c = annihilation(8).unwrap();
        let n = c.adjoint() * c;
        let five = make_state(8, StateSpec::Fock(5)).unwrap();
        let out = n.apply(five.vector().unwrap());
        assert_abs_diff_eq!(out[5].re, 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!((out - five.vector().unwrap() * C64::new(5.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn commutator_truncation_artifact() {
        let dim = 10;
        let a = annihilation(dim).unwrap();
        let comm = a.commutator(&a.adjoint());
        for i in 0..dim {
            for j in 0..dim {
                let want = if i == j && i < dim - 1 { 1.0 } else { 0.0 };
                if i < dim - 2 && j < dim - 2 {
                    assert!((comm.matrix()[(i, j)] - c(want, 0.0)).norm() < 1e-12);
                }
            }
        }
        assert_abs_diff_eq!(comm.matrix()[(dim - 1, dim - 1)].re, -(dim as f64) + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn make_state_cases() {
        let vac = make_state(16, StateSpec::Fock(0)).unwrap();
        assert_eq!(vac.vector().unwrap()[0], ONE);
        assert!(matches!(make_state(4, StateSpec::Fock(4)), Err(Error::InvalidIndex { .. })));

        let coh = make_state(32, StateSpec::Coherent(c(1.0, 0.0))).unwrap();
        let n = number(32).unwrap();
        assert_abs_diff_eq!(coh.expectation(&n).unwrap().re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(coh.mean_number().unwrap(), 1.0, epsilon = 1e-10);

        let th = make_state(16, StateSpec::Thermal(0.0)).unwrap();
        assert_eq!(th.density(), vac.density());

        assert!(matches!(
            make_state(10, StateSpec::Coherent(c(2.0, 0.0))),
            Err(Error::TruncationTooSmall { .. })
        ));
        assert!(make_state(16, StateSpec::Cat { alpha: ZERO, phase: std::f64::consts::PI }).is_err());
    }

    #[test]
    fn thermal_is_valid_density() {
        let th = make_state(24, StateSpec::Thermal(0.7)).unwrap();
        let checked = QuantumState::mixed(th.space().clone(), th.density()).unwrap();
        assert_abs_diff_eq!(checked.total_probability(), 1.0, epsilon = 1e-12);
        assert!((th.mean_number().unwrap() - 0.7).abs() < 1e-6);
    }

    #[test]
    fn displacement_basics() {
        let d0 = displacement(8, ZERO).unwrap();
        assert_eq!(d0, ModeOperator::identity(d0.space()));

        let mu = c(1.0, 0.5);
        let prod = displacement(64, mu).unwrap() * displacement(64, -mu).unwrap();
        assert!(max_abs_diff(prod.matrix(), &CMatrix::identity(64, 64)) < 1e-10);

        let shifted = displacement(64, c(1.5, 0.0)).unwrap().apply(make_state(64, StateSpec::Fock(0)).unwrap().vector().unwrap());
        let coh = make_state(64, StateSpec::Coherent(c(1.5, 0.0))).unwrap();
        assert!(shifted.dotc(coh.vector().unwrap()).norm() >= 1.0 - 1e-10);

        assert!(matches!(displacement(16, c(3.0, 0.0)), Err(Error::TruncationTooSmall { .. })));
    }

    #[test]
    fn tensor_examples() {
        let i2 = ModeOperator::identity(&HilbertSpec::mode(2).unwrap());
        let i3 = ModeOperator::identity(&HilbertSpec::mode(3).unwrap());
        let i6 = tensor(&i2, &i3).unwrap();
        assert_eq!(i6.matrix(), &CMatrix::identity(6, 6));

        let one = make_state(2, StateSpec::Fock(1)).unwrap();
        let zero = make_state(2, StateSpec::Fock(0)).unwrap();
        let prod = tensor(&one, &zero).unwrap();
        assert_eq!(prod.vector().unwrap()[2], ONE);
        assert_abs_diff_eq!(prod.vector().unwrap().norm(), 1.0);

        // atom must stay leftmost
        assert!(tensor(&zero, &atom_state(AtomLevel::Ground)).is_err());
        let ok = tensor(&atom_state(AtomLevel::Excited), &zero).unwrap();
        assert!(ok.space().has_atom());
        assert_eq!(ok.vector().unwrap()[2], ONE);
    }

    #[test]
    fn kron_trace_factorizes() {
        let space = HilbertSpec::mode(3).unwrap();
        let a = CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.7));
        let b = CMatrix::from_fn(3, 3, |i, j| c((i * j) as f64 - 1.0, 0.2 * (j as f64 - i as f64)));
        let ha = ModeOperator::new(space.clone(), &a + a.adjoint()).unwrap();
        let hb = ModeOperator::new(space, &b + b.adjoint()).unwrap();
        let ab = tensor(&ha, &hb).unwrap();
        assert!((ab.trace() - ha.trace() * hb.trace()).norm() < 1e-12);
    }

    #[test]
    fn evolve_rotates_coherent_state() {
        let dim = 64;
        let omega = 2.0;
        let t = std::f64::consts::FRAC_PI_3 / omega;
        let h = number(dim).unwrap().scale(c(omega, 0.0));
        let alpha = c(0.6, 0.8);
        let start = make_state(dim, StateSpec::Coherent(alpha)).unwrap();
        let end = evolve(&h, &start, t).unwrap();
        let want = make_state(dim, StateSpec::Coherent(alpha * C64::from_polar(1.0, -omega * t))).unwrap();
        assert!(end.fidelity(&want).unwrap() >= 1.0 - 1e-8);
        assert_eq!(evolve(&h, &start, 0.0).unwrap().vector().unwrap().len(), dim);
        assert!((evolve(&h, &start, 0.0).unwrap().vector().unwrap() - start.vector().unwrap()).norm() < 1e-15);
    }

    #[test]
    fn evolve_rejects_non_hermitian() {
        let a = annihilation(4).unwrap();
        let state = make_state(4, StateSpec::Fock(0)).unwrap();
        assert!(matches!(evolve(&a, &state, 1.0), Err(Error::InvalidOperator(_))));
    }

    #[test]
    fn evolve_preserves_mixed_purity() {
        let dim = 12;
        let a = annihilation(dim).unwrap();
        let h = (a.adjoint() * a.clone()).scale(c(0.3, 0.0)) + (a.clone() + a.adjoint()).scale(c(1.1, 0.0));
        let th = make_state(dim, StateSpec::Thermal(0.8)).unwrap();
        let out = evolve(&h, &th, 2.7).unwrap();
        assert_abs_diff_eq!(out.purity(), th.purity(), epsilon = 1e-10);
        assert_abs_diff_eq!(out.total_probability(), 1.0, epsilon = 1e-10);
        assert!(max_abs_diff(&out.density(), &out.density().adjoint()) < 1e-10);
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let rho_a = atom_state(AtomLevel::Excited);
        let rho_c = make_state(5, StateSpec::Thermal(0.4)).unwrap();
        let joint = tensor(&rho_a, &rho_c).unwrap();
        let reduced = partial_trace(&joint, &[Subsystem::Mode(0)]).unwrap();
        assert!(max_abs_diff(&reduced.density(), &rho_c.density()) < 1e-12);
        let atom = partial_trace(&joint, &[Subsystem::Atom]).unwrap();
        assert_abs_diff_eq!(atom.density()[(1, 1)].re, 1.0, epsilon = 1e-12);

        let space = HilbertSpec::new(vec![2, 2], false).unwrap();
        let mut v = CVector::zeros(4);
        v[0] = c(1.0, 0.0);
        v[3] = c(1.0, 0.0);
        let bell = QuantumState::pure_normalized(space, v).unwrap();
        let half = partial_trace(&bell, &[Subsystem::Mode(1)]).unwrap();
        assert!(max_abs_diff(&half.density(), &(CMatrix::identity(2, 2) * c(0.5, 0.0))) < 1e-12);

        assert!(partial_trace(&bell, &[Subsystem::Atom]).is_err());
        assert!(partial_trace(&bell, &[Subsystem::Mode(0), Subsystem::Mode(0)]).is_err());
    }

    #[test]
    fn embed_matches_kron() {
        let space = HilbertSpec::new(vec![3, 4], true).unwrap();
        let c4 = annihilation(4).unwrap();
        let lifted = embed(&c4, &space, Subsystem::Mode(1)).unwrap();
        let manual = tensor(
            &tensor(&ModeOperator::identity(&HilbertSpec::atom()), &ModeOperator::identity(&HilbertSpec::mode(3).unwrap())).unwrap(),
            &c4,
        )
        .unwrap();
        assert_eq!(lifted, manual);
        assert!(embed(&c4, &space, Subsystem::Mode(0)).is_err());
    }

    #[test]
    fn fidelity_routes_agree() {
        let a = make_state(10, StateSpec::Coherent(c(0.5, -0.2))).unwrap();
        let b = make_state(10, StateSpec::Cat { alpha: c(0.7, 0.1), phase: 0.3 }).unwrap();
        let pp = a.fidelity(&b).unwrap();
        let pm = a.fidelity(&b.clone().into_mixed()).unwrap();
        let mm = a.clone().into_mixed().fidelity(&b.into_mixed()).unwrap();
        assert_abs_diff_eq!(pp, pm, epsilon = 1e-12);
        assert_abs_diff_eq!(pp, mm, epsilon = 1e-8);
    }
}
