//! Ground states along `β → -∞` and the sign-changing limit profile
//! `w = u₁ - u₂`, which away from the interface solves
//! `-Δw + ω₁w⁺ - ω₂w⁻ = μ₁(w⁺)^p - μ₂(w⁻)^p`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::minimize::{initial_guess, normalized_gradient_flow, ConstraintSpec, FlowOptions, GroundStateResult, InitKind};
use crate::model::{pow_abs, MassPair, SystemParams};

/// One point of a β sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SegregationRecord {
    pub beta: f64,
    pub result: GroundStateResult,
    /// `∫(u₁u₂)^{(p+1)/2}`.
    pub overlap: f64,
    /// `u₁ - u₂`.
    pub w: Field<f64>,
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub h1_norms: [f64; 2],
    pub sup_norms: [f64; 2],
    /// `max |u(x) - u(y)| / |x - y|^{1/2}` over node pairs and both components.
    pub holder_proxy: f64,
}

/// `∫(u₁u₂)^{(p+1)/2}` by the grid quadrature.
pub fn overlap(p: f64, u1: &Field<f64>, u2: &Field<f64>) -> Result<f64> {
    u1.check_same_grid(u2)?;
    let q = 0.5 * (p + 1.0);
    Ok(u1
        .values()
        .iter()
        .zip(u2.values())
        .zip(u1.grid().weights())
        .map(|((a, b), w)| w * pow_abs(a * b, q))
        .sum())
}

/// Largest Hölder quotient of exponent `alpha` over all node pairs.
pub fn holder_quotient(u: &Field<f64>, alpha: f64) -> f64 {
    let grid = u.grid();
    let v = u.values();
    (0..v.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in (i + 1)..v.len() {
                let d = grid.distance(i, j);
                if d > 0.0 {
                    best = best.max((v[i] - v[j]).abs() / d.powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

fn record(params: &SystemParams, result: GroundStateResult) -> Result<SegregationRecord> {
    let grid = result.u1.grid().clone();
    let ov = overlap(params.p, &result.u1, &result.u2)?;
    let w = Field::new(grid.clone(), result.u1.values().iter().zip(result.u2.values()).map(|(a, b)| a - b).collect())?;
    let h1 = |f: &Field<f64>| (grid.mass_values(f.values()) + grid.kinetic_values(f.values())).sqrt();
    let holder = holder_quotient(&result.u1, 0.5).max(holder_quotient(&result.u2, 0.5));
    Ok(SegregationRecord {
        beta: params.beta,
        overlap: ov,
        w,
        omega1: result.omega1,
        omega2: result.omega2,
        h1_norms: [h1(&result.u1), h1(&result.u2)],
        sup_norms: [result.u1.max_abs(), result.u2.max_abs()],
        holder_proxy: holder,
        result,
    })
}

/// Runs the flow at each β of a descending list of negative couplings,
/// starting from separated bumps and warm-starting every later β from the
/// previous solution. Non-converged runs are kept with `converged = false`.
/// The caller is responsible for checking that the masses satisfy the
/// β-uniform existence condition.
pub fn beta_sweep(
    params: &SystemParams,
    masses: &MassPair,
    betas: &[f64],
    grid: &Arc<Grid>,
    opts: &FlowOptions,
) -> Result<Vec<SegregationRecord>> {
    if betas.is_empty() {
        return Err(Error::InvalidParams("empty β list".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(**b < 0.0)) {
        return Err(Error::InvalidParams(format!("β < 0 violated: {b}")));
    }
    if betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParams("β values must be strictly descending".into()));
    }
    let spec = ConstraintSpec { masses: *masses, ball_alpha: None };
    let mut prev = initial_guess(InitKind::SegregatedBumps, masses, grid)?;
    let mut out = Vec::with_capacity(betas.len());
    for &beta in betas {
        let pr = SystemParams { beta, ..*params };
        pr.validate()?;
        let res = normalized_gradient_flow(&pr, grid, &spec, prev.clone(), opts)?;
        prev = (res.u1.clone(), res.u2.clone());
        out.push(record(&pr, res)?);
    }
    Ok(out)
}

/// How well `w` of a record fits the limit equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub mass_plus: f64,
    pub mass_minus: f64,
    /// `max(|mass(w⁺) - ρ₁|/ρ₁, |mass(w⁻) - ρ₂|/ρ₂)`.
    pub mass_error: f64,
    /// Max of the limit-equation residual over nodes with `|w| > 0.05‖w‖_∞`.
    pub residual: f64,
    /// Max of `|μ₁(w⁺)^p - μ₂(w⁻)^p|` over the same nodes.
    pub nonlinearity: f64,
    /// Measure of the set where both components exceed 5% of the larger sup norm.
    pub interface_width: f64,
}

impl LimitReport {
    pub fn relative_residual(&self) -> f64 {
        if self.nonlinearity > 0.0 {
            self.residual / self.nonlinearity
        } else {
            f64::INFINITY
        }
    }
}

/// Compares `w` of a record with the limit equation, using the record's
/// multipliers.
pub fn limit_profile_check(params: &SystemParams, masses: &MassPair, rec: &SegregationRecord) -> Result<LimitReport> {
    let (om1, om2) = match (rec.omega1, rec.omega2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::ZeroMass { component: if rec.omega1.is_none() { 1 } else { 2 } }),
    };
    let grid = rec.w.grid();
    let w = rec.w.values();
    let plus: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let minus: Vec<f64> = w.iter().map(|v| (-v).max(0.0)).collect();
    let mass_plus = grid.mass_values(&plus);
    let mass_minus = grid.mass_values(&minus);
    let rel = |m: f64, r: f64| if r > 0.0 { (m - r).abs() / r } else { m };
    let lap = grid.neg_laplacian_values(w);
    let cut = 0.05 * rec.w.max_abs();
    let mut residual = 0.0f64;
    let mut nonlin = 0.0f64;
    for k in 0..w.len() {
        if w[k].abs() <= cut {
            continue;
        }
        let rhs = params.mu1 * pow_abs(plus[k], params.p) - params.mu2 * pow_abs(minus[k], params.p);
        let lhs = lap[k] + om1 * plus[k] - om2 * minus[k];
        residual = residual.max((lhs - rhs).abs());
        nonlin = nonlin.max(rhs.abs());
    }
    let top = rec.sup_norms[0].max(rec.sup_norms[1]);
    let interface_width = rec
        .result
        .u1
        .values()
        .iter()
        .zip(rec.result.u2.values())
        .zip(grid.weights())
        .filter(|((a, b), _)| a.min(**b) > 0.05 * top)
        .map(|(_, w)| w)
        .sum();
    Ok(LimitReport {
        mass_plus,
        mass_minus,
        mass_error: rel(mass_plus, masses.rho1).max(rel(mass_minus, masses.rho2)),
        residual,
        nonlinearity: nonlin,
        interface_width,
    })
}

/// `|ωᵢ(β_{k+1}) - ωᵢ(β_k)|` along a sweep, per component.
pub fn omega_increments(records: &[SegregationRecord]) -> Vec<[f64; 2]> {
    records
        .windows(2)
        .map(|w| {
            let d = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(x), Some(y)) => (x - y).abs(),
                _ => f64::NAN,
            };
            [d(w[1].omega1, w[0].omega1), d(w[1].omega2, w[0].omega2)]
        })
        .collect()
}
