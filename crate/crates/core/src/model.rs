//! Model constants, the energy functional and the Euler-Lagrange operator of
//! the coupled system
//!
//! ```text
//! -Δu₁ + ω₁u₁ = μ₁ u₁|u₁|^{p-1} + β u₁|u₁|^{(p-3)/2}|u₂|^{(p+1)/2}
//! -Δu₂ + ω₂u₂ = μ₂ u₂|u₂|^{p-1} + β u₂|u₂|^{(p-3)/2}|u₁|^{(p+1)/2}
//! ```
//!
//! The coupling `u|u|^{(p-3)/2}` is singular at `u = 0` when `p < 3`; it is
//! evaluated as the equivalent `sign(u)|u|^{(p-1)/2}`, which is continuous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{same_grid, Field, Grid, Scalar};

/// Relative tolerance used to recognise the critical exponents.
pub const EXPONENT_TOL: f64 = 1e-9;

/// `|u|^q`, with `|u| < 1e-300` mapped to zero.
#[inline]
pub fn pow_abs(u: f64, q: f64) -> f64 {
    let a = u.abs();
    if a < 1e-300 {
        0.0
    } else {
        (q * a.ln()).exp()
    }
}

/// `(N, p, μ₁, μ₂, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Spatial dimension `N`.
    pub dim: usize,
    pub p: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
}

impl SystemParams {
    pub fn new(dim: usize, p: f64, mu1: f64, mu2: f64, beta: f64) -> Result<Self> {
        let s = SystemParams { dim, p, mu1, mu2, beta };
        s.validate()?;
        Ok(s)
    }

    /// Every violated constraint, each stated as the failing inequality.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dim == 0 {
            v.push("N >= 1 violated: N = 0".to_string());
        }
        if !(self.mu1 > 0.0 && self.mu1.is_finite()) {
            v.push(format!("mu1 > 0 violated: mu1 = {}", self.mu1));
        }
        if !(self.mu2 > 0.0 && self.mu2.is_finite()) {
            v.push(format!("mu2 > 0 violated: mu2 = {}", self.mu2));
        }
        if !self.beta.is_finite() {
            v.push(format!("beta must be finite: beta = {}", self.beta));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            v.push(format!("p > 1 violated: p = {}", self.p));
        }
        if let Some(pc) = sobolev_critical_p(self.dim) {
            if self.p > pc * (1.0 + EXPONENT_TOL) {
                v.push(format!(
                    "p <= 2*-1 = {pc} violated for N = {}: p = {} (p > 2*-1)",
                    self.dim, self.p
                ));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    pub fn beta_plus(&self) -> f64 {
        self.beta.max(0.0)
    }

    pub fn exponents(&self) -> Exponents {
        exponents(self.dim, self.p)
    }

    /// The same system with the two components exchanged.
    pub fn swapped(&self) -> Self {
        SystemParams { mu1: self.mu2, mu2: self.mu1, ..*self }
    }
}

/// `2* = 2N/(N-2)` for `N ≥ 3`.
pub fn sobolev_exponent(dim: usize) -> Option<f64> {
    (dim >= 3).then(|| 2.0 * dim as f64 / (dim as f64 - 2.0))
}

/// `2* - 1 = (N+2)/(N-2)` for `N ≥ 3`.
pub fn sobolev_critical_p(dim: usize) -> Option<f64> {
    sobolev_exponent(dim).map(|s| s - 1.0)
}

/// `1 + 4/N`.
pub fn l2_critical_p(dim: usize) -> f64 {
    1.0 + 4.0 / dim as f64
}

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXPONENT_TOL * a.abs().max(b.abs())
}

/// Prescribed masses `(ρ₁, ρ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassPair {
    pub rho1: f64,
    pub rho2: f64,
}

impl MassPair {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        let m = MassPair { rho1, rho2 };
        let v = m.violations();
        if v.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, r) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(r >= 0.0 && r.is_finite()) {
                v.push(format!("{name} >= 0 violated: {name} = {r}"));
            }
        }
        v
    }

    pub fn total(&self) -> f64 {
        self.rho1 + self.rho2
    }

    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            self.rho1
        } else {
            self.rho2
        }
    }

    pub fn swapped(&self) -> Self {
        MassPair { rho1: self.rho2, rho2: self.rho1 }
    }

    pub fn scaled(&self, s: f64) -> Self {
        MassPair { rho1: s * self.rho1, rho2: s * self.rho2 }
    }
}

/// Gagliardo-Nirenberg exponents `a = N(p-1)/4`, `r = (p+1)/4 - N(p-1)/8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub a: f64,
    pub r: f64,
}

pub fn exponents(dim: usize, p: f64) -> Exponents {
    let n = dim as f64;
    Exponents { a: n * (p - 1.0) / 4.0, r: (p + 1.0) / 4.0 - n * (p - 1.0) / 8.0 }
}

/// Position of `p` relative to the L²-critical and Sobolev-critical exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `1 < p < 1 + 4/N`.
    H1,
    /// `p = 1 + 4/N`.
    H2,
    /// `1 + 4/N < p < 2* - 1` (no upper bound when `N ≤ 2`).
    H3,
    /// `p = 2* - 1`, `N ≥ 3`.
    H4,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

pub fn classify_regime(dim: usize, p: f64) -> Result<Regime> {
    if dim == 0 || !(p > 1.0) {
        return Err(Error::InvalidParams(format!("need N >= 1 and p > 1, got N = {dim}, p = {p}")));
    }
    let l2 = l2_critical_p(dim);
    if let Some(pc) = sobolev_critical_p(dim) {
        if approx_eq(p, pc) {
            return Ok(Regime::H4);
        }
        if p > pc {
            return Err(Error::InvalidParams(format!(
                "p <= 2*-1 = {pc} violated for N = {dim}: p = {p}"
            )));
        }
    }
    Ok(if approx_eq(p, l2) {
        Regime::H2
    } else if p < l2 {
        Regime::H1
    } else {
        Regime::H3
    })
}

/// Pointwise interaction density `μ₁|u₁|^{p+1} + 2β|u₁|^{(p+1)/2}|u₂|^{(p+1)/2} + μ₂|u₂|^{p+1}`
/// as a function of the moduli.
#[inline]
pub(crate) fn interaction_density(params: &SystemParams, m1: f64, m2: f64) -> f64 {
    let q = 0.5 * (params.p + 1.0);
    let (a, b) = (pow_abs(m1, q), pow_abs(m2, q));
    // grouped so that exchanging the components is bitwise symmetric
    (params.mu1 * (a * a) + params.mu2 * (b * b)) + 2.0 * params.beta * (a * b)
}

fn check_pair<T: Scalar>(grid: &Grid, u1: &Field<T>, u2: &Field<T>) -> Result<()> {
    same_grid(grid, u1.grid())?;
    same_grid(grid, u2.grid())
}

/// `F(u₁,u₂) = ∫ μ₁|u₁|^{p+1} + 2β|u₁|^{(p+1)/2}|u₂|^{(p+1)/2} + μ₂|u₂|^{p+1}`.
pub fn interaction_f<T: Scalar>(
    params: &SystemParams,
    grid: &Grid,
    u1: &Field<T>,
    u2: &Field<T>,
) -> Result<f64> {
    check_pair(grid, u1, u2)?;
    Ok(interaction_values(params, grid, u1.values(), u2.values()))
}

pub(crate) fn interaction_values<T: Scalar>(
    params: &SystemParams,
    grid: &Grid,
    u1: &[T],
    u2: &[T],
) -> f64 {
    u1.iter()
        .zip(u2)
        .zip(grid.weights())
        .map(|((a, b), w)| w * interaction_density(params, a.modulus(), b.modulus()))
        .sum()
}

/// `𝓔(u₁,u₂) = ½∫(|∇u₁|² + |∇u₂|²) - F(u₁,u₂)/(p+1)`.
pub fn energy<T: Scalar>(
    params: &SystemParams,
    grid: &Grid,
    u1: &Field<T>,
    u2: &Field<T>,
) -> Result<f64> {
    check_pair(grid, u1, u2)?;
    Ok(energy_values(params, grid, u1.values(), u2.values()))
}

pub(crate) fn energy_values<T: Scalar>(
    params: &SystemParams,
    grid: &Grid,
    u1: &[T],
    u2: &[T],
) -> f64 {
    let kin = grid.kinetic_values(u1) + grid.kinetic_values(u2);
    0.5 * kin - interaction_values(params, grid, u1, u2) / (params.p + 1.0)
}

/// Right-hand-side nonlinearity of the first equation at one node, real case:
/// `μ₁ u₁|u₁|^{p-1} + β sign(u₁)|u₁|^{(p-1)/2}|u₂|^{(p+1)/2}`.
#[inline]
pub(crate) fn force_component(p: f64, mu: f64, beta: f64, own: f64, other: f64) -> f64 {
    let s = own.signum();
    s * (mu * pow_abs(own, p) + beta * pow_abs(own, 0.5 * (p - 1.0)) * pow_abs(other, 0.5 * (p + 1.0)))
}

/// Nodal nonlinearities `(N₁(u), N₂(u))` of the real system.
pub(crate) fn nonlinearity(params: &SystemParams, u1: &[f64], u2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = params.p;
    let n1 = u1
        .iter()
        .zip(u2)
        .map(|(&a, &b)| force_component(p, params.mu1, params.beta, a, b))
        .collect();
    let n2 = u2
        .iter()
        .zip(u1)
        .map(|(&a, &b)| force_component(p, params.mu2, params.beta, a, b))
        .collect();
    (n1, n2)
}

/// L²-gradient of the discrete energy, `(-Δu₁ - N₁(u), -Δu₂ - N₂(u))`: the
/// Euler-Lagrange operator without the multiplier terms.
pub fn energy_gradient(
    params: &SystemParams,
    grid: &Grid,
    u1: &Field<f64>,
    u2: &Field<f64>,
) -> Result<(Field<f64>, Field<f64>)> {
    check_pair(grid, u1, u2)?;
    let (n1, n2) = nonlinearity(params, u1.values(), u2.values());
    let mk = |u: &Field<f64>, n: Vec<f64>| {
        let lap = grid.neg_laplacian_values(u.values());
        let v = lap.iter().zip(&n).map(|(l, f)| l - f).collect();
        Field::new(u.grid().clone(), v)
    };
    Ok((mk(u1, n1)?, mk(u2, n2)?))
}

/// Discrete L² norm of the Euler-Lagrange residual for given multipliers.
pub fn el_residual(
    params: &SystemParams,
    grid: &Grid,
    u1: &Field<f64>,
    u2: &Field<f64>,
    omega1: f64,
    omega2: f64,
) -> Result<f64> {
    let (g1, g2) = energy_gradient(params, grid, u1, u2)?;
    let w = grid.weights();
    let mut s = 0.0;
    for i in 0..w.len() {
        let r1 = g1.values()[i] + omega1 * u1.values()[i];
        let r2 = g2.values()[i] + omega2 * u2.values()[i];
        s += w[i] * (r1 * r1 + r2 * r2);
    }
    Ok(s.sqrt())
}

/// Multipliers obtained by testing equation `i` with `u_i`:
/// `ω_i = (∫ μ_i|u_i|^{p+1} + β|u₁u₂|^{(p+1)/2} - |∇u_i|²) / ∫u_i²`.
///
/// A zero-mass component has no multiplier and yields `None`.
pub fn lagrange_multipliers(
    params: &SystemParams,
    grid: &Grid,
    u1: &Field<f64>,
    u2: &Field<f64>,
) -> Result<(Option<f64>, Option<f64>)> {
    check_pair(grid, u1, u2)?;
    Ok(multipliers_values(params, grid, u1.values(), u2.values()))
}

pub(crate) fn multipliers_values(
    params: &SystemParams,
    grid: &Grid,
    u1: &[f64],
    u2: &[f64],
) -> (Option<f64>, Option<f64>) {
    let q = 0.5 * (params.p + 1.0);
    let w = grid.weights();
    let (mut s1, mut s2, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..w.len() {
        let (a, b) = (pow_abs(u1[i], q), pow_abs(u2[i], q));
        s1 += w[i] * (a * a);
        s2 += w[i] * (b * b);
        cross += w[i] * (a * b);
    }
    let one = |mu: f64, s: f64, u: &[f64]| {
        let m = grid.mass_values(u);
        (m > 0.0).then(|| (mu * s + params.beta * cross - grid.kinetic_values(u)) / m)
    };
    (one(params.mu1, s1, u1), one(params.mu2, s2, u2))
}

/// Like [`lagrange_multipliers`] but fails on a zero-mass component.
pub fn lagrange_multipliers_strict(
    params: &SystemParams,
    grid: &Grid,
    u1: &Field<f64>,
    u2: &Field<f64>,
) -> Result<(f64, f64)> {
    let (w1, w2) = lagrange_multipliers(params, grid, u1, u2)?;
    Ok((w1.ok_or(Error::ZeroMass { component: 1 })?, w2.ok_or(Error::ZeroMass { component: 2 })?))
}
