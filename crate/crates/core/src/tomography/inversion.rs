use std::collections::HashMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::charfn::CharFnEvaluator;
use super::records::ProbeRecord;
use crate::error::{Error, Result};
use crate::fockspace::{check_truncation, QuantumState};

/// Points whose 2×2 system is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e3;
const CONTRAST_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CharFnSource {
    Direct,
    Reconstructed,
}

impl CharFnSource {
    pub fn as_str(self) -> &'static str {
        match self {
            CharFnSource::Direct => "direct",
            CharFnSource::Reconstructed => "reconstructed",
        }
    }
}

/// Characteristic-function samples on an arbitrary set of `μ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharFnGrid {
    pub mu_values: Vec<C64>,
    pub c_values: Vec<C64>,
    pub source: CharFnSource,
    /// Condition number of each point's solve (1 for direct samples).
    pub condition: Vec<f64>,
    /// `|C(0) − 1|` when the origin is sampled.
    pub origin_deviation: Option<f64>,
}

fn key(mu: C64) -> (u64, u64) {
    // +0.0 and −0.0 must collide
    ((mu.re + 0.0).to_bits(), (mu.im + 0.0).to_bits())
}

impl CharFnGrid {
    /// Dense evaluation of `C_W` at every `μ`.
    pub fn direct(rho: &QuantumState, mu_values: Vec<C64>) -> Result<Self> {
        let ev = CharFnEvaluator::new(rho)?;
        let max = mu_values.iter().map(|m| m.norm()).fold(0.0, f64::max);
        check_truncation(max, ev.dim())?;
        let c_values: Vec<C64> = mu_values.iter().map(|&m| ev.eval_unchecked(m)).collect();
        let origin_deviation = mu_values.iter().position(|m| m.norm() == 0.0).map(|i| (c_values[i] - 1.0).norm());
        let n = mu_values.len();
        Ok(Self { mu_values, c_values, source: CharFnSource::Direct, condition: vec![1.0; n], origin_deviation })
    }

    pub fn len(&self) -> usize {
        self.mu_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_values.is_empty()
    }

    /// Largest `|C(−μ) − C(μ)*|` over pairs present in the grid, matching
    /// points to within `tol`.
    pub fn hermitian_defect(&self, tol: f64) -> f64 {
        let cell = |x: f64| (x / tol).round() as i64;
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, m) in self.mu_values.iter().enumerate() {
            buckets.entry((cell(m.re), cell(m.im))).or_default().push(i);
        }
        let mut worst: f64 = 0.0;
        for (i, m) in self.mu_values.iter().enumerate() {
            let target = -m;
            let (cx, cy) = (cell(target.re), cell(target.im));
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = buckets.get(&(cx + dx, cy + dy)) {
                        for &j in list {
                            if (self.mu_values[j] - target).norm() <= tol {
                                worst = worst.max((self.c_values[j] - self.c_values[i].conj()).norm());
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    /// Largest `|C| − 1` (positive means the bound `|C| ≤ 1` is violated).
    pub fn modulus_excess(&self) -> f64 {
        self.c_values.iter().map(|c| c.norm() - 1.0).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Invert the strong-field readout record by record.
///
/// For every distinct `μ` the records give the real linear system
/// `P_i − ½ = ½(ρ_e − ρ_g)[cos θ_i Re C − sin θ_i Im C]`, solved by least
/// squares. The origin only determines `Re C(0)`; its imaginary part is 0 by
/// Hermitian symmetry. `C(0)` is not rescaled, only its deviation reported.
pub fn extract_char_fn(records: &[ProbeRecord]) -> Result<CharFnGrid> {
    if records.iter().any(|r| r.atom.contrast().abs() < CONTRAST_FLOOR) {
        return Err(Error::Unobservable);
    }
    let mut order: Vec<C64> = Vec::new();
    let mut groups: HashMap<(u64, u64), Vec<&ProbeRecord>> = HashMap::new();
    for r in records {
        let entry = groups.entry(key(r.point.mu)).or_default();
        if entry.is_empty() {
            order.push(r.point.mu);
        }
        entry.push(r);
    }

    let mut c_values = Vec::with_capacity(order.len());
    let mut condition = Vec::with_capacity(order.len());
    let mut ill = Vec::new();
    for mu in &order {
        let group = &groups[&key(*mu)];
        let (c, cond) = if mu.norm() == 0.0 {
            let re = group.iter().map(|r| (r.observed() - 0.5) / (0.5 * r.atom.contrast())).sum::<f64>() / group.len() as f64;
            (C64::new(re, 0.0), 1.0)
        } else {
            solve_point(group)
        };
        if !(cond <= MAX_CONDITION) {
            ill.push((*mu, cond));
        }
        c_values.push(c);
        condition.push(cond);
    }
    if !ill.is_empty() {
        return Err(Error::IllConditioned { limit: MAX_CONDITION, points: ill });
    }
    let origin_deviation = order.iter().position(|m| m.norm() == 0.0).map(|i| (c_values[i] - 1.0).norm());
    Ok(CharFnGrid { mu_values: order, c_values, source: CharFnSource::Reconstructed, condition, origin_deviation })
}

fn solve_point(group: &[&ProbeRecord]) -> (C64, f64) {
    // normal equations of the n×2 design matrix
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in group {
        let s = 0.5 * r.atom.contrast();
        let (x1, x2) = (s * r.point.theta.cos(), -s * r.point.theta.sin());
        let y = r.observed() - 0.5;
        a11 += x1 * x1;
        a12 += x1 * x2;
        a22 += x2 * x2;
        b1 += x1 * y;
        b2 += x2 * y;
    }
    let det = a11 * a22 - a12 * a12;
    let mean = 0.5 * (a11 + a22);
    let spread = (0.25 * (a11 - a22).powi(2) + a12 * a12).sqrt();
    let (hi, lo) = (mean + spread, mean - spread);
    let cond = if lo > 0.0 { (hi / lo).sqrt() } else { f64::INFINITY };
    if det == 0.0 {
        return (C64::new(f64::NAN, f64::NAN), f64::INFINITY);
    }
    let re = (a22 * b1 - a12 * b2) / det;
    let im = (a11 * b2 - a12 * b1) / det;
    (C64::new(re, im), cond)
}
