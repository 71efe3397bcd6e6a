//! Time integration of
//!
//! ```text
//! i∂ₜΨ₁ + ΔΨ₁ + Ψ₁(μ₁|Ψ₁|^{p-1} + β|Ψ₁|^{(p-3)/2}|Ψ₂|^{(p+1)/2}) = 0
//! i∂ₜΨ₂ + ΔΨ₂ + Ψ₂(μ₂|Ψ₂|^{p-1} + β|Ψ₂|^{(p-3)/2}|Ψ₁|^{(p+1)/2}) = 0
//! ```
//!
//! by a Crank-Nicolson scheme
//! `i(Ψⁿ⁺¹ - Ψⁿ)/dt = -ΔΨ^m - VΨ^m`, `Ψ^m = (Ψⁿ⁺¹ + Ψⁿ)/2`, where the
//! potentials `Vᵢ` are symmetrized difference quotients of the interaction
//! density in the variables `ρᵢ = |Ψᵢ|²`. The scheme conserves the discrete
//! mass of each component and the discrete energy up to the tolerance of the
//! fixed-point iteration, is symmetric in time, and commutes with phase
//! rotations.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{principal_eigenpairs, same_grid, ComplexField, Field, Grid};
use crate::minimize::GroundStateResult;
use crate::model::{energy_values, pow_abs, SystemParams};

/// `(Ψ₁, Ψ₂)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub psi1: ComplexField,
    pub psi2: ComplexField,
    pub t: f64,
}

impl WaveState {
    pub fn new(psi1: ComplexField, psi2: ComplexField, t: f64) -> Result<Self> {
        psi1.check_same_grid(&psi2)?;
        Ok(WaveState { psi1, psi2, t })
    }

    pub fn from_real(u1: &Field<f64>, u2: &Field<f64>) -> Result<Self> {
        Self::new(u1.to_complex(), u2.to_complex(), 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.psi1.grid()
    }

    pub fn masses(&self) -> (f64, f64) {
        let g = self.grid();
        (g.mass_values(self.psi1.values()), g.mass_values(self.psi2.values()))
    }

    pub fn energy(&self, params: &SystemParams) -> f64 {
        energy_values(params, self.grid(), self.psi1.values(), self.psi2.values())
    }

    /// `‖(Ψ₁, Ψ₂)‖_{H¹}`.
    pub fn h1_norm(&self) -> f64 {
        let g = self.grid();
        let s: f64 = [&self.psi1, &self.psi2]
            .iter()
            .map(|f| g.mass_values(f.values()) + g.kinetic_values(f.values()))
            .sum();
        s.sqrt()
    }
}

/// Fixed-point controls of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// How many times a step may be split in half before giving up.
    pub max_halvings: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { tol: 1e-12, max_sweeps: 50, max_halvings: 20 }
    }
}

/// Diagnostics of one call to [`step_crank_nicolson_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepReport {
    /// Fixed-point sweeps over all substeps.
    pub sweeps: usize,
    /// Number of substeps the step was split into.
    pub substeps: usize,
}

/// `(y^e - x^e)/(y - x)` for `x, y ≥ 0`, without cancellation.
fn power_quotient(x: f64, y: f64, e: f64) -> f64 {
    if e == 1.0 {
        return 1.0;
    }
    if e == 2.0 {
        return x + y;
    }
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if hi <= 1e-300 {
        return 0.0;
    }
    if lo <= 1e-300 {
        return hi.powf(e - 1.0);
    }
    let t = (hi - lo) / lo;
    if t == 0.0 {
        return e * lo.powf(e - 1.0);
    }
    lo.powf(e - 1.0) * (e * t.ln_1p()).exp_m1() / t
}

/// Difference quotient in `ρ` of `Φ(ρ, s) = μρ^κ + 2βρ^{κ/2}s^{κ/2} + μ's^κ`,
/// `κ = (p+1)/2`, between `a0` and `a1`.
fn quotient(params: &SystemParams, mu: f64, a0: f64, a1: f64, s: f64) -> f64 {
    let k = 0.5 * (params.p + 1.0);
    mu * power_quotient(a0, a1, k) + 2.0 * params.beta * pow_abs(s, 0.5 * k) * power_quotient(a0, a1, 0.5 * k)
}

/// Potentials `Vᵢ = (2/(p+1)) · ½[δᵢΦ(·, old other) + δᵢΦ(·, new other)]`.
fn discrete_potentials(params: &SystemParams, old: [&[Complex64]; 2], new: [&[Complex64]; 2]) -> [Vec<f64>; 2] {
    let c = 2.0 / (params.p + 1.0);
    let m = old[0].len();
    let mut v = [vec![0.0; m], vec![0.0; m]];
    for k in 0..m {
        let a0 = old[0][k].norm_sqr();
        let a1 = new[0][k].norm_sqr();
        let b0 = old[1][k].norm_sqr();
        let b1 = new[1][k].norm_sqr();
        v[0][k] = c * 0.5 * (quotient(params, params.mu1, a0, a1, b0) + quotient(params, params.mu1, a0, a1, b1));
        v[1][k] = c * 0.5 * (quotient(params, params.mu2, b0, b1, a0) + quotient(params, params.mu2, b0, b1, a1));
    }
    v
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// One fixed-point solve of a step of size `dt`; `None` if the iteration did
/// not converge.
fn try_step(
    params: &SystemParams,
    grid: &Grid,
    psi: [&[Complex64]; 2],
    dt: f64,
    opts: &StepOptions,
) -> Option<([Vec<Complex64>; 2], usize)> {
    let i = Complex64::new(0.0, 1.0);
    let half = i * (0.5 * dt);
    // explicit part (I - i dt/2 (-Δ)) Ψⁿ
    let base: Vec<Vec<Complex64>> = psi
        .iter()
        .map(|p| {
            let lap = grid.neg_laplacian_values(p);
            p.iter().zip(&lap).map(|(a, l)| a - half * l).collect()
        })
        .collect();
    let mut next = [psi[0].to_vec(), psi[1].to_vec()];
    for sweep in 1..=opts.max_sweeps {
        let v = discrete_potentials(params, psi, [&next[0], &next[1]]);
        let mut change = 0.0f64;
        let mut cand: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for c in 0..2 {
            let rhs: Vec<Complex64> = (0..psi[c].len())
                .map(|k| {
                    let mid = 0.5 * (psi[c][k] + next[c][k]);
                    base[c][k] + i * dt * v[c][k] * mid
                })
                .collect();
            let sol = grid.solve_shifted(Complex64::new(1.0, 0.0), half, &rhs);
            change = change.max(rel_diff(&sol, &next[c]));
            cand[c] = sol;
        }
        next = cand;
        if sol_ok(&next) && change <= opts.tol {
            return Some((next, sweep));
        }
        if !sol_ok(&next) {
            return None;
        }
    }
    None
}

fn sol_ok(v: &[Vec<Complex64>; 2]) -> bool {
    v.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}

/// One Crank-Nicolson step of size `dt` (negative `dt` steps backwards).
pub fn step_crank_nicolson(params: &SystemParams, state: &WaveState, dt: f64) -> Result<WaveState> {
    step_crank_nicolson_with(params, state, dt, &StepOptions::default()).map(|(s, _)| s)
}

/// As [`step_crank_nicolson`]; when the fixed point fails the step is split
/// into halves recursively.
pub fn step_crank_nicolson_with(
    params: &SystemParams,
    state: &WaveState,
    dt: f64,
    opts: &StepOptions,
) -> Result<(WaveState, StepReport)> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParams(format!("dt must be finite and nonzero, got {dt}")));
    }
    let grid = state.grid().clone();
    let mut report = StepReport::default();
    let mut cur = [state.psi1.values().to_vec(), state.psi2.values().to_vec()];
    let mut pending = vec![(dt, 0usize)];
    while let Some((h, depth)) = pending.pop() {
        match try_step(params, &grid, [&cur[0], &cur[1]], h, opts) {
            Some((next, sweeps)) => {
                cur = next;
                report.sweeps += sweeps;
                report.substeps += 1;
            }
            None => {
                if depth >= opts.max_halvings {
                    return Err(Error::NoConvergence { iterations: opts.max_sweeps, residual: f64::NAN });
                }
                pending.push((0.5 * h, depth + 1));
                pending.push((0.5 * h, depth + 1));
            }
        }
    }
    let [a, b] = cur;
    Ok((
        WaveState { psi1: Field::new(grid.clone(), a)?, psi2: Field::new(grid, b)?, t: state.t + dt },
        report,
    ))
}

fn h1_inner(grid: &Grid, f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let af = grid.neg_laplacian_values(f);
    grid.inner_values(f, g) + grid.inner_values(&af, g)
}

/// `min_{θ₁,θ₂} ‖(Ψ₁ - e^{iθ₁}u₁, Ψ₂ - e^{iθ₂}u₂)‖_{H¹}`, attained at
/// `θᵢ = arg⟨Ψᵢ, uᵢ⟩_{H¹}`.
pub fn orbit_distance(state: &WaveState, gs: &GroundStateResult) -> Result<f64> {
    let grid = state.grid();
    same_grid(grid, gs.u1.grid())?;
    let mut total = 0.0;
    for (psi, u) in [(&state.psi1, &gs.u1), (&state.psi2, &gs.u2)] {
        let uc: Vec<Complex64> = u.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let ip = h1_inner(grid, psi.values(), &uc);
        let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
        let d: Vec<Complex64> = psi.values().iter().zip(&uc).map(|(a, b)| a - phase * b).collect();
        total += grid.mass_values(&d) + grid.kinetic_values(&d);
    }
    Ok(total.sqrt())
}

/// Shape of the perturbation added to the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Smoothed complex noise in both components, drawn from `seed`.
    Random,
    /// `φ₂` in both components.
    Eigen2,
    /// `φ₂` in the first component only.
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub mode: PerturbationMode,
    /// Only used by [`PerturbationMode::Random`].
    #[serde(default)]
    pub seed: u64,
    /// H¹ size of the perturbation before mass renormalization.
    pub delta: f64,
}

/// Time series of conserved quantities and the orbit distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub mass1: Vec<f64>,
    pub mass2: Vec<f64>,
    pub energy: Vec<f64>,
    pub orbit_distance: Vec<f64>,
    pub dt: f64,
    /// Fixed-point sweeps per step.
    pub sweeps: Vec<usize>,
    /// Steps that had to be split.
    pub split_steps: usize,
    /// The H¹ norm exceeded 10³ times its initial value.
    pub blow_up: bool,
}

impl EvolutionTrace {
    pub fn sup_distance(&self) -> f64 {
        self.orbit_distance.iter().copied().fold(0.0, f64::max)
    }

    /// `max_t |mass_i(t) - mass_i(0)| / mass_i(0)` over both components
    /// (components with zero mass are skipped).
    pub fn max_mass_drift(&self) -> f64 {
        let drift = |m: &[f64]| {
            let m0 = m[0];
            if m0 == 0.0 {
                0.0
            } else {
                m.iter().map(|x| (x - m0).abs() / m0).fold(0.0, f64::max)
            }
        };
        drift(&self.mass1).max(drift(&self.mass2))
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }
}

/// Smoothed noise with zero boundary values: `(I + (-Δ)/λ₁)^{-2}` applied to
/// uniform samples.
fn smooth_noise(grid: &Grid, lambda1: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let raw: Vec<Complex64> = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let one = Complex64::new(1.0, 0.0);
    let b = Complex64::new(1.0 / lambda1, 0.0);
    let once = grid.solve_shifted(one, b, &raw);
    grid.solve_shifted(one, b, &once)
}

/// Initial data `uᵢ + δvᵢ`, with `‖(v₁,v₂)‖_{H¹} = 1`, each component then
/// rescaled to the mass of `uᵢ`.
pub fn perturbed_state(gs: &GroundStateResult, perturbation: &Perturbation) -> Result<WaveState> {
    let grid = gs.u1.grid().clone();
    let pairs = principal_eigenpairs(&grid, 2)?;
    let phi2: Vec<Complex64> = pairs[1].phi.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
    let (mut v1, mut v2) = match perturbation.mode {
        PerturbationMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(perturbation.seed);
            let a = smooth_noise(&grid, pairs[0].lambda, &mut rng);
            let b = smooth_noise(&grid, pairs[0].lambda, &mut rng);
            (a, b)
        }
        PerturbationMode::Eigen2 => (phi2.clone(), phi2),
        PerturbationMode::Asymmetric => (phi2, zero.clone()),
    };
    for (v, u) in [(&mut v1, &gs.u1), (&mut v2, &gs.u2)] {
        if u.max_abs() == 0.0 {
            v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        }
    }
    let norm = (grid.mass_values(&v1) + grid.kinetic_values(&v1) + grid.mass_values(&v2) + grid.kinetic_values(&v2)).sqrt();
    let scale = if norm > 0.0 { perturbation.delta / norm } else { 0.0 };
    let mut out = Vec::new();
    for (v, u) in [(&v1, &gs.u1), (&v2, &gs.u2)] {
        let mut w: Vec<Complex64> = u.values().iter().zip(v).map(|(&a, &b)| a + b * scale).collect();
        let target = grid.mass_values(u.values());
        let m = grid.mass_values(&w);
        if m > 0.0 {
            let s = (target / m).sqrt();
            w.iter_mut().for_each(|z| *z *= s);
        }
        out.push(Field::new(grid.clone(), w)?);
    }
    let psi2 = out.pop().unwrap();
    let psi1 = out.pop().unwrap();
    WaveState::new(psi1, psi2, 0.0)
}

/// Evolves a state to time `t_end`, sampling every `sample_every` steps.
pub fn evolve(
    params: &SystemParams,
    init: &WaveState,
    gs: Option<&GroundStateResult>,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    opts: &StepOptions,
) -> Result<EvolutionTrace> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParams(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    let every = sample_every.max(1);
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        mass1: Vec::new(),
        mass2: Vec::new(),
        energy: Vec::new(),
        orbit_distance: Vec::new(),
        dt,
        sweeps: Vec::with_capacity(steps),
        split_steps: 0,
        blow_up: false,
    };
    let record = |tr: &mut EvolutionTrace, s: &WaveState| -> Result<()> {
        let (m1, m2) = s.masses();
        tr.times.push(s.t);
        tr.mass1.push(m1);
        tr.mass2.push(m2);
        tr.energy.push(s.energy(params));
        tr.orbit_distance.push(match gs {
            Some(g) => orbit_distance(s, g)?,
            None => 0.0,
        });
        Ok(())
    };
    let h1_0 = init.h1_norm();
    let mut state = init.clone();
    record(&mut trace, &state)?;
    for n in 1..=steps {
        let (next, rep) = step_crank_nicolson_with(params, &state, dt, opts)?;
        state = next;
        state.t = n as f64 * dt;
        trace.sweeps.push(rep.sweeps);
        if rep.substeps > 1 {
            trace.split_steps += 1;
        }
        let blow = state.h1_norm() > 1e3 * h1_0.max(f64::MIN_POSITIVE);
        if n % every == 0 || n == steps || blow {
            record(&mut trace, &state)?;
        }
        if blow {
            trace.blow_up = true;
            break;
        }
    }
    Ok(trace)
}

/// Perturbs a ground state and records how far the solution drifts from its
/// orbit up to time `t_end`.
pub fn stability_experiment(
    params: &SystemParams,
    gs: &GroundStateResult,
    perturbation: &Perturbation,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<EvolutionTrace> {
    if !gs.converged {
        return Err(Error::InvalidParams("the ground state did not converge".into()));
    }
    if !(perturbation.delta >= 0.0) {
        return Err(Error::InvalidParams(format!("delta >= 0 violated: {}", perturbation.delta)));
    }
    let init = perturbed_state(gs, perturbation)?;
    evolve(params, &init, Some(gs), t_end, dt, sample_every, &StepOptions::default())
}
