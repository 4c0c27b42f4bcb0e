use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::charfn::CharFnEvaluator;
use super::inversion::{CharFnGrid, CharFnSource};
use crate::error::{Error, Result};
use crate::fockspace::{check_truncation, CMatrix, QuantumState};

/// Boundary `|C|` above which the transform warns about truncation.
pub const BOUNDARY_DECAY: f64 = 1e-6;
/// Relative tolerance for recognising uniform axes and raster structure.
pub const GRID_TOL: f64 = 1e-9;

/// Normalization stated in every grid file.
pub const NORMALIZATION: &str =
    "W(alpha) = (1/pi^2) int C(mu) exp(mu* alpha - mu alpha*) d2mu, alpha = (x + i p)/sqrt(2), int W d2alpha = 1";

/// `n` equally spaced points from `min` to `max` inclusive.
pub fn uniform_axis(min: f64, max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::InvalidGeometry(format!("axis [{min}, {max}] with {n} points")));
    }
    let h = (max - min) / (n - 1) as f64;
    Ok((0..n).map(|k| min + h * k as f64).collect())
}

/// Cell-centred square μ-grid, optionally cut to a disk.
///
/// Points are `−L + (j + ½)·2L/n` along both axes, so the grid is symmetric
/// under `μ → −μ`. Points outside `mask_radius` carry `C = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuGrid {
    pub n: usize,
    pub half_width: f64,
    #[serde(default)]
    pub mask_radius: Option<f64>,
}

impl MuGrid {
    pub fn square(n: usize, half_width: f64) -> Self {
        Self { n, half_width, mask_radius: None }
    }

    /// Square of half-width `radius` masked to the disk of that radius.
    pub fn disk(n: usize, radius: f64) -> Self {
        Self { n, half_width: radius, mask_radius: Some(radius) }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidGeometry(format!("μ-grid n={} half_width={}", self.n, self.half_width)));
        }
        if let Some(r) = self.mask_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidGeometry(format!("mask radius {r}")));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|j| -self.half_width + h * (j as f64 + 0.5)).collect()
    }

    /// All grid points, `Re μ` varying slowest.
    pub fn points(&self) -> Vec<C64> {
        let axis = self.axis();
        axis.iter().flat_map(|&u| axis.iter().map(move |&v| C64::new(u, v))).collect()
    }

    pub fn inside(&self, mu: C64) -> bool {
        self.mask_radius.is_none_or(|r| mu.norm() <= r)
    }

    /// Largest `|μ|` that is actually evaluated.
    pub fn reach(&self) -> f64 {
        let corner = self.axis()[self.n - 1] * std::f64::consts::SQRT_2;
        self.mask_radius.map_or(corner, |r| r.min(corner))
    }
}

/// Dense `C_W` on a μ-grid, zero outside the mask.
pub fn char_fn_on_grid(rho: &QuantumState, grid: &MuGrid) -> Result<CharFnGrid> {
    grid.validate()?;
    let ev = CharFnEvaluator::new(rho)?;
    check_truncation(grid.reach(), ev.dim())?;
    let mu_values = grid.points();
    let c_values: Vec<C64> = mu_values
        .par_iter()
        .map(|&m| if grid.inside(m) { ev.eval_unchecked(m) } else { C64::new(0.0, 0.0) })
        .collect();
    let n = mu_values.len();
    Ok(CharFnGrid { mu_values, c_values, source: CharFnSource::Direct, condition: vec![1.0; n], origin_deviation: None })
}

struct Raster {
    dr: f64,
    rings: usize,
    angles: usize,
    origin: C64,
    // [ring − 1][angle]
    values: Vec<Vec<C64>>,
}

impl Raster {
    fn detect(cf: &CharFnGrid) -> Result<Self> {
        let bad = |msg: &str| Error::Contract(format!("polar raster expected: {msg}"));
        let mut origin = None;
        let mut rest = Vec::new();
        for (m, c) in cf.mu_values.iter().zip(&cf.c_values) {
            if m.norm() == 0.0 {
                origin = Some(*c);
            } else {
                rest.push((*m, *c));
            }
        }
        let origin = origin.ok_or_else(|| bad("origin missing"))?;
        let r_max = rest.iter().map(|(m, _)| m.norm()).fold(0.0, f64::max);
        let r_min = rest.iter().map(|(m, _)| m.norm()).fold(f64::INFINITY, f64::min);
        if rest.is_empty() {
            return Err(bad("no rings"));
        }
        let rings = (r_max / r_min).round() as usize;
        if rings == 0 || rest.len() % rings != 0 {
            return Err(bad("ring count"));
        }
        let angles = rest.len() / rings;
        let dr = r_max / rings as f64;
        let dphi = TAU / angles as f64;
        let mut values = vec![vec![None; angles]; rings];
        for (m, c) in rest {
            let s = m.norm() / dr;
            let t = m.arg().rem_euclid(TAU) / dphi;
            let (i, j) = (s.round(), t.round());
            if (s - i).abs() > GRID_TOL * rings as f64 || (t - j).abs() > GRID_TOL * angles as f64 || i < 1.0 {
                return Err(bad(&format!("point {m} off the raster")));
            }
            let slot = &mut values[i as usize - 1][j as usize % angles];
            if slot.replace(c).is_some() {
                return Err(bad(&format!("duplicate point {m}")));
            }
        }
        let values = values
            .into_iter()
            .map(|ring| ring.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("incomplete rings"))?;
        Ok(Self { dr, rings, angles, origin, values })
    }

    fn ring(&self, i: usize, t: f64) -> C64 {
        if i == 0 {
            return self.origin;
        }
        let j0 = t.floor();
        let w = t - j0;
        let j0 = j0 as usize % self.angles;
        let j1 = (j0 + 1) % self.angles;
        let ring = &self.values[i - 1];
        ring[j0] * (1.0 - w) + ring[j1] * w
    }

    fn interpolate(&self, mu: C64) -> Option<C64> {
        let s = mu.norm() / self.dr;
        if s > self.rings as f64 * (1.0 + GRID_TOL) {
            return None;
        }
        let t = mu.arg().rem_euclid(TAU) / (TAU / self.angles as f64);
        let i0 = (s.floor() as usize).min(self.rings - 1);
        let f = (s - i0 as f64).min(1.0);
        Some(self.ring(i0, t) * (1.0 - f) + self.ring(i0 + 1, t) * f)
    }
}

/// Resample a polar-raster `C_W` onto a cartesian μ-grid.
///
/// Interpolation is bilinear in `(|μ|, arg μ)`: linear between neighbouring
/// rings (the origin acting as ring 0) and linear in angle with wrap-around.
/// Points beyond the outermost ring or outside the grid's mask get `C = 0`.
pub fn resample_polar(cf: &CharFnGrid, grid: &MuGrid) -> Result<CharFnGrid> {
    grid.validate()?;
    let raster = Raster::detect(cf)?;
    let mu_values = grid.points();
    let c_values = mu_values
        .iter()
        .map(|&m| if grid.inside(m) { raster.interpolate(m).unwrap_or_default() } else { C64::default() })
        .collect();
    let n = mu_values.len();
    Ok(CharFnGrid {
        mu_values,
        c_values,
        source: cf.source,
        condition: vec![1.0; n],
        origin_deviation: cf.origin_deviation,
    })
}

/// Output phase-space grid in the quadratures `x = √2 Re α`, `p = √2 Im α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSpec {
    pub nx: usize,
    pub np: usize,
    pub x_max: f64,
    pub p_max: f64,
}

impl WignerSpec {
    pub fn symmetric(n: usize, extent: f64) -> Self {
        Self { nx: n, np: n, x_max: extent, p_max: extent }
    }

    pub fn axes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((uniform_axis(-self.x_max, self.x_max, self.nx)?, uniform_axis(-self.p_max, self.p_max, self.np)?))
    }
}

/// Real Wigner function on a rectangular `(x, p)` grid; `values[(i, j)]`
/// is `W(x_i, p_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub values: DMatrix<f64>,
    /// Largest discarded imaginary part.
    pub imag_residue: f64,
    pub warnings: Vec<String>,
}

impl WignerGrid {
    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn dp(&self) -> f64 {
        self.p[1] - self.p[0]
    }

    /// `d²α = dx dp / 2`.
    pub fn cell_area(&self) -> f64 {
        0.5 * self.dx() * self.dp()
    }

    /// Riemann sum of `W d²α` over the grid.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// `∫ (|W| − W)/2 d²α`.
    pub fn negativity_volume(&self) -> f64 {
        self.values.iter().map(|w| (w.abs() - w) * 0.5).sum::<f64>() * self.cell_area()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), found: other.values.len() });
        }
        let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(u, v)| (u - v).abs() <= GRID_TOL * (1.0 + u.abs()));
        if !same(&self.x, &other.x) || !same(&self.p, &other.p) {
            return Err(Error::InvalidGeometry("grids have different axes".into()));
        }
        Ok((&self.values - &other.values).amax())
    }

    /// Minimum of `W` over points satisfying `keep(x, p)`.
    pub fn min_where(&self, keep: impl Fn(f64, f64) -> bool) -> Option<f64> {
        let mut out: Option<f64> = None;
        for (i, &x) in self.x.iter().enumerate() {
            for (j, &p) in self.p.iter().enumerate() {
                if keep(x, p) {
                    let w = self.values[(i, j)];
                    out = Some(out.map_or(w, |m| m.min(w)));
                }
            }
        }
        out
    }

    /// Central second moment of `|W|` along the phase-space direction `dir`
    /// (a complex number in the `α` plane), in units of `|α|²`.
    pub fn second_moment_along(&self, dir: C64) -> f64 {
        let u = dir / dir.norm();
        let (mut w0, mut w1, mut w2) = (0.0, 0.0, 0.0);
        for (i, &x) in self.x.iter().enumerate() {
            for (j, &p) in self.p.iter().enumerate() {
                let alpha = C64::new(x, p) * FRAC_1_SQRT_2;
                let q = (alpha * u.conj()).re;
                let w = self.values[(i, j)].abs();
                w0 += w;
                w1 += w * q;
                w2 += w * q * q;
            }
        }
        let mean = w1 / w0;
        w2 / w0 - mean * mean
    }
}

struct Cartesian {
    u: Vec<f64>,
    v: Vec<f64>,
    // (u index, v index)
    values: CMatrix,
}

fn uniform_values(mut xs: Vec<f64>) -> Result<Vec<f64>> {
    xs.sort_by(f64::total_cmp);
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    xs.dedup_by(|a, b| (*a - *b).abs() <= GRID_TOL * scale);
    if xs.len() < 2 {
        return Err(Error::Contract("μ-grid needs at least two values per axis".into()));
    }
    let h = xs[1] - xs[0];
    if xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > GRID_TOL * scale) {
        return Err(Error::Contract("μ-grid is not uniform".into()));
    }
    Ok(xs)
}

impl Cartesian {
    fn from_grid(cf: &CharFnGrid) -> Result<Self> {
        let u = uniform_values(cf.mu_values.iter().map(|m| m.re).collect())?;
        let v = uniform_values(cf.mu_values.iter().map(|m| m.im).collect())?;
        if cf.len() != u.len() * v.len() {
            return Err(Error::Contract(format!(
                "μ-grid is not a full product grid ({} points for {}×{})",
                cf.len(),
                u.len(),
                v.len()
            )));
        }
        let (hu, hv) = (u[1] - u[0], v[1] - v[0]);
        let mut values = CMatrix::zeros(u.len(), v.len());
        let mut seen = vec![false; u.len() * v.len()];
        for (m, c) in cf.mu_values.iter().zip(&cf.c_values) {
            let j = ((m.re - u[0]) / hu).round() as usize;
            let i = ((m.im - v[0]) / hv).round() as usize;
            if std::mem::replace(&mut seen[j * v.len() + i], true) {
                return Err(Error::Contract(format!("duplicate μ-grid point {m}")));
            }
            values[(j, i)] = *c;
        }
        Ok(Self { u, v, values })
    }

    fn boundary_max(&self) -> f64 {
        let (nu, nv) = self.values.shape();
        let zero = |j: isize, i: isize| {
            j < 0 || i < 0 || j >= nu as isize || i >= nv as isize || self.values[(j as usize, i as usize)] == C64::default()
        };
        let mut worst: f64 = 0.0;
        for j in 0..nu as isize {
            for i in 0..nv as isize {
                if zero(j, i) {
                    continue;
                }
                if zero(j - 1, i) || zero(j + 1, i) || zero(j, i - 1) || zero(j, i + 1) {
                    worst = worst.max(self.values[(j as usize, i as usize)].norm());
                }
            }
        }
        worst
    }

    /// `(h_u h_v / π²) Σ C(u + iv) e^{2i(u b − v a)}` with `α = a + ib`.
    fn transform(&self, xs: &[f64], ps: &[f64]) -> CMatrix {
        let (hu, hv) = (self.u[1] - self.u[0], self.v[1] - self.v[0]);
        let ea = CMatrix::from_fn(xs.len(), self.v.len(), |k, i| C64::from_polar(1.0, -2.0 * self.v[i] * xs[k] * FRAC_1_SQRT_2));
        let eb = CMatrix::from_fn(self.u.len(), ps.len(), |j, l| C64::from_polar(1.0, 2.0 * self.u[j] * ps[l] * FRAC_1_SQRT_2));
        (ea * self.values.transpose() * eb) * C64::from(hu * hv / (PI * PI))
    }
}

/// Wigner function from characteristic-function samples on a uniform
/// cartesian μ-grid, by direct evaluation of the discretized Fourier
/// integral on the requested `(x, p)` grid.
pub fn wigner_from_charfn(cf: &CharFnGrid, spec: &WignerSpec) -> Result<WignerGrid> {
    let cart = Cartesian::from_grid(cf)?;
    let (x, p) = spec.axes()?;
    let mut warnings = Vec::new();
    let edge = cart.boundary_max();
    if edge > BOUNDARY_DECAY {
        warnings.push(format!("|C| reaches {edge:.3e} on the μ-grid boundary; W is smoothed by truncation"));
    }
    let w = cart.transform(&x, &p);
    let imag_residue = w.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(WignerGrid { x, p, values: w.map(|z| z.re), imag_residue, warnings })
}

/// Single-point version of [`wigner_from_charfn`] at `α = (x + ip)/√2`.
pub fn wigner_from_charfn_at(cf: &CharFnGrid, x: f64, p: f64) -> Result<f64> {
    let cart = Cartesian::from_grid(cf)?;
    Ok(cart.transform(&[x], &[p])[(0, 0)].re)
}

/// Reference Wigner function: dense `C_W` on `mu_grid`, same transform.
pub fn wigner_direct(rho_c: &QuantumState, mu_grid: &MuGrid, spec: &WignerSpec) -> Result<WignerGrid> {
    wigner_from_charfn(&char_fn_on_grid(rho_c, mu_grid)?, spec)
}

/// Wigner function straight from the Fock-basis matrix elements,
///
/// ```text
/// W_{|m⟩⟨n|}(α) = (2/π)(−1)ⁿ √(n!/m!) (2α*)^{m−n} e^{−2|α|²} L_n^{(m−n)}(4|α|²),   m ≥ n,
/// ```
///
/// with a normalized Laguerre recurrence. Exact for the truncated state,
/// no μ-grid involved.
pub fn wigner_series(rho_c: &QuantumState, spec: &WignerSpec) -> Result<WignerGrid> {
    if !rho_c.space().is_single_mode() {
        return Err(Error::InvalidState("Wigner function needs a single-mode state".into()));
    }
    let (x, p) = spec.axes()?;
    let rho = rho_c.density();
    let dim = rho.nrows();
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..dim).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let cols: Vec<Vec<f64>> = p
        .par_iter()
        .map(|&pj| x.iter().map(|&xi| series_point(&rho, &ln_fact, C64::new(xi, pj) * FRAC_1_SQRT_2)).collect())
        .collect();
    let values = DMatrix::from_fn(x.len(), p.len(), |i, j| cols[j][i]);
    Ok(WignerGrid { x, p, values, imag_residue: 0.0, warnings: Vec::new() })
}

fn series_point(rho: &CMatrix, ln_fact: &[f64], alpha: C64) -> f64 {
    let dim = rho.nrows();
    let x = 4.0 * alpha.norm_sqr();
    let psi = alpha.arg();
    let mut total = 0.0;
    for k in 0..dim {
        let start = if x == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            (0.5 * k as f64 * x.ln() - 0.5 * x - 0.5 * ln_fact[k]).exp()
        };
        let phase = C64::from_polar(1.0, -(k as f64) * psi);
        let (mut prev, mut cur) = (0.0, start);
        let mut acc = C64::default();
        for n in 0..dim - k {
            if n > 0 {
                let (nf, kf) = (n as f64, k as f64);
                let next = ((2.0 * nf - 1.0 + kf - x) * cur - ((nf - 1.0) * (nf - 1.0 + kf)).sqrt() * prev) / (nf * (nf + kf)).sqrt();
                prev = cur;
                cur = next;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += rho[(n + k, n)] * (sign * cur);
        }
        let term = (acc * phase).re;
        total += if k == 0 { term } else { 2.0 * term };
    }
    2.0 / PI * total
}
