//! Constrained minimization of the energy on the mass manifold
//! `𝓜 = {∫u₁² = ρ₁, ∫u₂² = ρ₂}`, optionally restricted to the kinetic ball
//! `𝓑_α = {∫|∇u₁|² + ∫|∇u₂|² ≤ (ρ₁+ρ₂)α}`.
//!
//! The flow is a preconditioned projected gradient descent. With
//! `gᵢ = -Δuᵢ - Nᵢ(u) + ωᵢuᵢ` (ωᵢ from [`crate::model::lagrange_multipliers`],
//! which makes `gᵢ` L²-orthogonal to `uᵢ`), one step is
//!
//! ```text
//! (I + dt(-Δ + Dᵢ)) sᵢ = gᵢ,   uᵢ ← |uᵢ - dt sᵢ|,   uᵢ ← √ρᵢ uᵢ/‖uᵢ‖₂
//! ```
//!
//! where `Dᵢ ≥ 0` is the repulsive part of the coupling written as a
//! potential, so very negative `β` does not restrict the step. Fixed points
//! are exact solutions of the discrete Euler-Lagrange system. Steps that
//! raise the energy are rejected and retried with half the step.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{principal_eigenpairs, Domain, Field, Grid};
use crate::model::{energy_values, multipliers_values, nonlinearity, pow_abs, MassPair, SystemParams};
use crate::thresholds::{hat_c_bounds, Check, ThresholdReport};

/// Masses and optional kinetic budget `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub masses: MassPair,
    #[serde(default)]
    pub ball_alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowOptions {
    /// Initial step; `None` means `1e-2/λ₁`.
    pub dt: Option<f64>,
    /// Stop when the relative H¹ change of one step falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Factor applied to `dt` after an accepted step (capped at `dt_max`).
    pub dt_growth: f64,
    /// Cap for `dt`; `None` means `1/λ₁`.
    pub dt_max: Option<f64>,
    /// Keep the energy of every accepted iterate.
    pub record_energy: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt: None,
            tol: 1e-9,
            max_iter: 200_000,
            dt_growth: 1.0,
            dt_max: None,
            record_energy: true,
        }
    }
}

/// A computed (local) minimizer and its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateResult {
    pub u1: Field<f64>,
    pub u2: Field<f64>,
    /// `None` for an empty component.
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub energy: f64,
    pub kinetic_total: f64,
    pub converged: bool,
    pub boundary_hit: bool,
    pub iterations: usize,
    /// Discrete L² norm of the Euler-Lagrange residual at the final iterate.
    pub residual: f64,
    /// Relative H¹ change of the last accepted step.
    pub last_change: f64,
    pub dt_final: f64,
    /// Energy of the initial pair and of every accepted iterate.
    pub energy_history: Vec<f64>,
}

impl GroundStateResult {
    pub fn masses(&self) -> (f64, f64) {
        let g = self.u1.grid();
        (g.mass_values(self.u1.values()), g.mass_values(self.u2.values()))
    }
}

/// Initial pairs for the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// `(√ρ₁φ₁, √ρ₂φ₁)`.
    Eigen1,
    /// `(√ρ₁φ₂⁺/‖φ₂⁺‖, √ρ₂φ₂⁻/‖φ₂⁻‖)`.
    Eigen2Split,
    /// Smooth bumps with disjoint supports.
    SegregatedBumps,
}

/// Rescales each component to its prescribed mass. A component with
/// `ρᵢ = 0` is set to zero.
pub fn normalize_pair(u1: &mut Field<f64>, u2: &mut Field<f64>, masses: &MassPair) -> Result<()> {
    u1.check_same_grid(u2)?;
    for (u, rho, comp) in [(u1, masses.rho1, 1), (u2, masses.rho2, 2)] {
        let g = u.grid().clone();
        if rho == 0.0 {
            u.values_mut().iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let m = g.mass_values(u.values());
        if !(m > 0.0) {
            return Err(Error::ZeroMass { component: comp });
        }
        let s = (rho / m).sqrt();
        u.values_mut().iter_mut().for_each(|v| *v *= s);
    }
    Ok(())
}

fn smooth_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Builds an initial pair with the prescribed masses.
pub fn initial_guess(kind: InitKind, masses: &MassPair, grid: &Arc<Grid>) -> Result<(Field<f64>, Field<f64>)> {
    let (mut u1, mut u2) = match kind {
        InitKind::Eigen1 => {
            let phi = principal_eigenpairs(grid, 1)?.remove(0).phi;
            (phi.clone(), phi)
        }
        InitKind::Eigen2Split => {
            let phi2 = principal_eigenpairs(grid, 2)?.remove(1).phi;
            let plus = phi2.map(|v| v.max(0.0));
            let minus = phi2.map(|v| (-v).max(0.0));
            if plus.max_abs() == 0.0 || minus.max_abs() == 0.0 {
                return Err(Error::InvalidParams("second eigenfunction does not change sign".into()));
            }
            (plus, minus)
        }
        InitKind::SegregatedBumps => segregated_bumps(grid),
    };
    normalize_pair(&mut u1, &mut u2, masses)?;
    Ok((u1, u2))
}

fn segregated_bumps(grid: &Arc<Grid>) -> (Field<f64>, Field<f64>) {
    match *grid.domain() {
        Domain::Interval { length } => (
            Field::from_fn(grid.clone(), |x| smooth_bump((x[0] / length - 0.25) / 0.2)),
            Field::from_fn(grid.clone(), |x| smooth_bump((x[0] / length - 0.75) / 0.2)),
        ),
        Domain::Rectangle { lx, ly } => {
            let across = move |y: f64| (std::f64::consts::PI * y / ly).sin();
            (
                Field::from_fn(grid.clone(), move |x| smooth_bump((x[0] / lx - 0.25) / 0.2) * across(x[1])),
                Field::from_fn(grid.clone(), move |x| smooth_bump((x[0] / lx - 0.75) / 0.2) * across(x[1])),
            )
        }
        Domain::RadialBall { radius, .. } => (
            Field::from_fn(grid.clone(), |x| smooth_bump(x[0] / (0.35 * radius))),
            Field::from_fn(grid.clone(), |x| smooth_bump((x[0] / radius - 0.72) / 0.18)),
        ),
    }
}

/// Repulsive part of the coupling as a nonnegative potential on component
/// `own`: `|β| |own|^{(p-3)/2} |other|^{(p+1)/2}` for `β < 0`, else zero.
fn repulsive_diag(params: &SystemParams, own: &[f64], other: &[f64]) -> Vec<f64> {
    if params.beta >= 0.0 {
        return vec![0.0; own.len()];
    }
    let p = params.p;
    own.iter()
        .zip(other)
        .map(|(&a, &b)| {
            if a.abs() < 1e-150 {
                0.0
            } else {
                -params.beta * pow_abs(a, 0.5 * (p - 3.0)) * pow_abs(b, 0.5 * (p + 1.0))
            }
        })
        .collect()
}

struct State {
    u: [Vec<f64>; 2],
    energy: f64,
    kinetic: [f64; 2],
}

impl State {
    fn new(params: &SystemParams, grid: &Grid, u1: Vec<f64>, u2: Vec<f64>) -> Self {
        let kinetic = [grid.kinetic_values(&u1), grid.kinetic_values(&u2)];
        let energy = energy_values(params, grid, &u1, &u2);
        State { u: [u1, u2], energy, kinetic }
    }

    fn kinetic_total(&self) -> f64 {
        self.kinetic[0] + self.kinetic[1]
    }
}

/// Projected gradients `gᵢ = -Δuᵢ - Nᵢ(u) + ωᵢuᵢ`, multipliers, and the
/// discrete L² norm of the residual.
fn projected_gradient(
    params: &SystemParams,
    grid: &Grid,
    u: &[Vec<f64>; 2],
) -> ([Vec<f64>; 2], (Option<f64>, Option<f64>), f64) {
    let (n1, n2) = nonlinearity(params, &u[0], &u[1]);
    let om = multipliers_values(params, grid, &u[0], &u[1]);
    let mk = |ui: &[f64], ni: Vec<f64>, w: Option<f64>| -> Vec<f64> {
        let lap = grid.neg_laplacian_values(ui);
        let w = w.unwrap_or(0.0);
        lap.iter().zip(&ni).zip(ui).map(|((l, f), v)| l - f + w * v).collect()
    };
    let g = [mk(&u[0], n1, om.0), mk(&u[1], n2, om.1)];
    let res = g[0]
        .iter()
        .zip(&g[1])
        .zip(grid.weights())
        .map(|((a, b), w)| w * (a * a + b * b))
        .sum::<f64>()
        .sqrt();
    (g, om, res)
}

fn h1_sq(grid: &Grid, f: &[f64]) -> f64 {
    grid.mass_values(f) + grid.kinetic_values(f)
}

/// Runs the normalized gradient flow from `init` (rescaled to the prescribed
/// masses first).
pub fn normalized_gradient_flow(
    params: &SystemParams,
    grid: &Arc<Grid>,
    spec: &ConstraintSpec,
    init: (Field<f64>, Field<f64>),
    opts: &FlowOptions,
) -> Result<GroundStateResult> {
    params.validate()?;
    let masses = spec.masses;
    let v = masses.violations();
    if !v.is_empty() {
        return Err(Error::InvalidParams(v.join("; ")));
    }
    let (mut u1, mut u2) = init;
    crate::grid::same_grid(grid, u1.grid())?;
    crate::grid::same_grid(grid, u2.grid())?;
    normalize_pair(&mut u1, &mut u2, &masses)?;
    let active = [masses.rho1 > 0.0, masses.rho2 > 0.0];
    let rho = [masses.rho1, masses.rho2];
    let (mut dt, dt_max) = match (opts.dt, opts.dt_max) {
        (Some(d), Some(m)) => (d, m),
        _ => {
            let l1 = principal_eigenpairs(grid, 1)?[0].lambda;
            (opts.dt.unwrap_or(1e-2 / l1), opts.dt_max.unwrap_or(1.0 / l1))
        }
    };
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt > 0 violated: dt = {dt}")));
    }
    let kin_cap = spec.ball_alpha.map(|a| masses.total() * a);
    let mut state = State::new(params, grid, u1.into_values(), u2.into_values());
    let mut history = if opts.record_energy { vec![state.energy] } else { Vec::new() };
    let mut converged = false;
    let mut boundary_hit = kin_cap.is_some_and(|c| state.kinetic_total() > c);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let (mut g, _, _) = projected_gradient(params, grid, &state.u);
    while !boundary_hit && iterations < opts.max_iter {
        let diag = [repulsive_diag(params, &state.u[0], &state.u[1]), repulsive_diag(params, &state.u[1], &state.u[0])];
        let mut halvings = 0;
        let next = loop {
            let mut cand: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for i in 0..2 {
                if !active[i] {
                    cand[i] = vec![0.0; state.u[i].len()];
                    continue;
                }
                let s = grid.solve_shifted_diag(1.0, dt, &diag[i], &g[i]);
                let mut w: Vec<f64> = state.u[i].iter().zip(&s).map(|(u, d)| (u - dt * d).abs()).collect();
                let m = grid.mass_values(&w);
                if !(m > 0.0) || !m.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "component {} lost its mass at iteration {iterations}; reduce dt (now {dt:e})",
                        i + 1
                    )));
                }
                let sc = (rho[i] / m).sqrt();
                w.iter_mut().for_each(|v| *v *= sc);
                cand[i] = w;
            }
            let [c1, c2] = cand;
            let st = State::new(params, grid, c1, c2);
            if !st.energy.is_finite() {
                return Err(Error::NonFinite(format!("energy at iteration {iterations}; reduce dt (now {dt:e})")));
            }
            if st.energy <= state.energy + 1e-12 * state.energy.abs() {
                break st;
            }
            dt *= 0.5;
            halvings += 1;
            if halvings > 60 {
                return Err(Error::NoConvergence { iterations, residual: f64::NAN });
            }
        };
        let num: f64 = (0..2)
            .map(|i| {
                let d: Vec<f64> = next.u[i].iter().zip(&state.u[i]).map(|(a, b)| a - b).collect();
                h1_sq(grid, &d)
            })
            .sum();
        let den = h1_sq(grid, &next.u[0]) + h1_sq(grid, &next.u[1]);
        last_change = (num / den).sqrt();
        state = next;
        iterations += 1;
        if opts.record_energy {
            history.push(state.energy);
        }
        if kin_cap.is_some_and(|c| state.kinetic_total() > c) {
            boundary_hit = true;
            break;
        }
        g = projected_gradient(params, grid, &state.u).0;
        if last_change < opts.tol {
            converged = true;
            break;
        }
        dt = (dt * opts.dt_growth).min(dt_max.max(dt));
    }
    let (_, om, residual) = projected_gradient(params, grid, &state.u);
    let kinetic_total = state.kinetic_total();
    let [v1, v2] = state.u;
    Ok(GroundStateResult {
        u1: Field::new(grid.clone(), v1)?,
        u2: Field::new(grid.clone(), v2)?,
        omega1: om.0,
        omega2: om.1,
        energy: state.energy,
        kinetic_total,
        converged: converged && !boundary_hit,
        boundary_hit,
        iterations,
        residual,
        last_change,
        dt_final: dt,
        energy_history: history,
    })
}

/// Result of several flows from different initial pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    pub runs: Vec<(InitKind, Result<GroundStateResult>)>,
    /// Index into `runs` of the lowest-energy converged run.
    pub best: Option<usize>,
}

/// Runs the flow from each kind concurrently; results keep the input order.
pub fn multistart(
    params: &SystemParams,
    grid: &Arc<Grid>,
    spec: &ConstraintSpec,
    kinds: &[InitKind],
    opts: &FlowOptions,
) -> MultiStart {
    let runs: Vec<(InitKind, Result<GroundStateResult>)> = kinds
        .par_iter()
        .map(|&k| {
            let r = initial_guess(k, &spec.masses, grid)
                .and_then(|init| normalized_gradient_flow(params, grid, spec, init, opts));
            (k, r)
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .filter_map(|(i, (_, r))| r.as_ref().ok().filter(|g| g.converged).map(|g| (i, g.energy)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    MultiStart { runs, best }
}

/// The three checks that certify a local minimizer interior to `𝓑_ᾱ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinCertificate {
    pub bar_alpha: f64,
    /// `kinetic_total < (ρ₁+ρ₂)ᾱ`.
    pub interior: Check,
    /// `energy ≤ ½(ρ₁+ρ₂)λ_j + tol`.
    pub below_eigen_level: Check,
    /// `energy < ½((ρ₁+ρ₂)ᾱ - Λ(ρ₁+ρ₂)^a ᾱ^a)`.
    pub below_sphere_bound: Check,
    pub conclusive: bool,
}

/// Certifies `result` against the thresholds in `report` (which must come
/// from an L²-supercritical regime).
pub fn verify_local_min(
    result: &GroundStateResult,
    spec: &ConstraintSpec,
    report: &ThresholdReport,
    tol: f64,
) -> Result<LocalMinCertificate> {
    if spec.ball_alpha.is_none() {
        return Err(Error::InvalidParams("the certificate needs a kinetic budget alpha".into()));
    }
    let (Some(bar), Some(lam), Some(j)) = (report.bar_alpha, report.lambda_cap, report.j) else {
        return Err(Error::WrongRegime {
            regime: report.regime.to_string(),
            reason: "no kinetic budget: the certificate needs p > 1 + 4/N".into(),
        });
    };
    let lj = if j == 1 { report.lambda1 } else { report.lambda2 };
    let m = spec.masses;
    let mk = |name: &str, lhs: f64, rhs: f64, strict: bool| Check {
        name: name.into(),
        pass: if strict { lhs < rhs } else { lhs <= rhs },
        margin: rhs - lhs,
    };
    let interior = mk("interior", result.kinetic_total, m.total() * bar, true);
    let (_, upper) = hat_c_bounds(lj, &m, lam, report.a, lj);
    let below_eigen_level = mk("below_eigen_level", result.energy, upper + tol, false);
    let (lower, _) = hat_c_bounds(bar, &m, lam, report.a, lj);
    let below_sphere_bound = mk("below_sphere_bound", result.energy, lower, true);
    let conclusive = interior.pass && below_eigen_level.pass && below_sphere_bound.pass;
    Ok(LocalMinCertificate { bar_alpha: bar, interior, below_eigen_level, below_sphere_bound, conclusive })
}

/// One row of the unboundedness witness table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub k: f64,
    pub kinetic: f64,
    /// `F(U_k)/(p+1)`.
    pub interaction: f64,
    pub energy: f64,
}

/// `U_{i,k}(x) = √ρᵢ k^{N/2} φ(k(x - xᵢ))` for a fixed smooth bump `φ`
/// supported in the unit ball, renormalized to the exact discrete masses.
/// Centres are at a quarter and three quarters of the first axis. On a ball
/// only one component may be nonempty; its bump sits at the centre.
pub fn make_divergent_sequence(
    params: &SystemParams,
    grid: &Arc<Grid>,
    masses: &MassPair,
    k: f64,
) -> Result<(Field<f64>, Field<f64>)> {
    if params.exponents().a <= 1.0 {
        return Err(Error::WrongRegime {
            regime: crate::model::classify_regime(params.dim, params.p)?.to_string(),
            reason: "the witness sequence needs p > 1 + 4/N".into(),
        });
    }
    if params.dim != grid.domain().dim() {
        return Err(Error::InvalidParams(format!(
            "N = {} does not match the domain dimension {}",
            params.dim,
            grid.domain().dim()
        )));
    }
    let bump = move |d: f64| smooth_bump(k * d);
    let too_small = |room: f64| -> Result<()> {
        if !(k > 0.0) || 1.0 / k >= room {
            Err(Error::InvalidParams(format!("k = {k} too small: bump radius 1/k must be below {room}")))
        } else {
            Ok(())
        }
    };
    let (mut u1, mut u2) = match *grid.domain() {
        Domain::Interval { length } => {
            too_small(0.25 * length)?;
            (
                Field::from_fn(grid.clone(), move |x| bump((x[0] - 0.25 * length).abs())),
                Field::from_fn(grid.clone(), move |x| bump((x[0] - 0.75 * length).abs())),
            )
        }
        Domain::Rectangle { lx, ly } => {
            too_small((0.25 * lx).min(0.5 * ly))?;
            let dist = move |x: [f64; 2], cx: f64| ((x[0] - cx).powi(2) + (x[1] - 0.5 * ly).powi(2)).sqrt();
            (
                Field::from_fn(grid.clone(), move |x| bump(dist(x, 0.25 * lx))),
                Field::from_fn(grid.clone(), move |x| bump(dist(x, 0.75 * lx))),
            )
        }
        Domain::RadialBall { radius, .. } => {
            if masses.rho1 > 0.0 && masses.rho2 > 0.0 {
                return Err(Error::InvalidParams(
                    "a radial grid cannot hold two disjoint bumps; set one mass to zero".into(),
                ));
            }
            too_small(radius)?;
            let f = Field::from_fn(grid.clone(), move |x| bump(x[0]));
            (f.clone(), f)
        }
    };
    if u1.max_abs() == 0.0 || u2.max_abs() == 0.0 {
        return Err(Error::InvalidParams(format!("k = {k} too large: the bump is not resolved by the grid")));
    }
    normalize_pair(&mut u1, &mut u2, masses)?;
    Ok((u1, u2))
}

/// Witness table for a list of `k`.
pub fn witness_table(params: &SystemParams, grid: &Arc<Grid>, masses: &MassPair, ks: &[f64]) -> Result<Vec<WitnessRow>> {
    ks.iter()
        .map(|&k| {
            let (u1, u2) = make_divergent_sequence(params, grid, masses, k)?;
            let kinetic = grid.kinetic_values(u1.values()) + grid.kinetic_values(u2.values());
            let interaction = crate::model::interaction_values(params, grid, u1.values(), u2.values()) / (params.p + 1.0);
            Ok(WitnessRow { k, kinetic, interaction, energy: 0.5 * kinetic - interaction })
        })
        .collect()
}
