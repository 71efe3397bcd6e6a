//! Gagliardo-Nirenberg constants `C_{N,p}` from the radial ground state `Z` of
//! `-ΔZ + Z = Z^p` in `R^N`, and the Sobolev constant `S_N`.
//!
//! Conventions: `‖v‖_{p+1}^{p+1} ≤ C_{N,p} ‖∇v‖₂^{2a} ‖v‖₂^{4r}` and
//! `‖v‖_{2*}^{2*} ≤ S_N ‖∇v‖₂^{2*}`, so that `C_{N,2*-1} = S_N`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::unit_sphere_area;
use crate::model::{approx_eq, exponents, l2_critical_p, pow_abs, sobolev_critical_p};
use crate::ode::{integrate, Control, OdeOptions};

/// Controls for the shooting solve of `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Relative tolerance of the radial integrator.
    pub rtol: f64,
    /// The profile is truncated once `Z` drops below this level.
    pub z_floor: f64,
    /// Hard cap on the truncation radius.
    pub r_max: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions { rtol: 1e-12, z_floor: 1e-12, r_max: 200.0 }
    }
}

/// The radial ground state `Z` of `Z'' + (N-1)/r Z' - Z + Z^p = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateZ {
    pub dim: usize,
    pub p: f64,
    /// `Z(0)`.
    pub z0: f64,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
    /// `‖Z‖₂²`.
    pub mass: f64,
    /// `‖∇Z‖₂²`.
    pub kinetic: f64,
    /// `‖Z‖_{p+1}^{p+1}`.
    pub lp1: f64,
}

impl GroundStateZ {
    /// Radius at which the profile was truncated.
    pub fn truncation_radius(&self) -> f64 {
        *self.r.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Norm quotient of the shooting solution `Z`.
    Shooting,
    /// Norm quotient of the Aubin-Talenti bubble.
    Bubble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnConstant {
    pub dim: usize,
    pub p: f64,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, PartialEq)]
enum Shot {
    /// `Z` crosses zero: `Z(0)` too large.
    Over,
    /// `Z` turns back up while positive: `Z(0)` too small.
    Under,
}

fn radial_rhs(dim: usize, p: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    let nm1 = dim as f64 - 1.0;
    let area = unit_sphere_area(dim);
    move |r, y, dy| {
        let (z, dz) = (y[0], y[1]);
        dy[0] = dz;
        dy[1] = z - z.signum() * pow_abs(z, p) - if nm1 > 0.0 { nm1 / r * dz } else { 0.0 };
        if y.len() > 2 {
            let w = area * r.powi(dim as i32 - 1);
            dy[2] = w * z * z;
            dy[3] = w * dz * dz;
            dy[4] = w * pow_abs(z, p + 1.0);
        }
    }
}

/// Starting radius and Taylor data `Z = z₀ + c r²` off the coordinate singularity.
fn start(dim: usize, p: f64, z0: f64) -> (f64, [f64; 2]) {
    if dim == 1 {
        return (0.0, [z0, 0.0]);
    }
    let r0 = 1e-4;
    let c = (z0 - pow_abs(z0, p)) / (2.0 * dim as f64);
    (r0, [z0 + c * r0 * r0, 2.0 * c * r0])
}

fn shoot(dim: usize, p: f64, z0: f64, opts: &ShootingOptions) -> Result<Shot> {
    let (r0, y0) = start(dim, p, z0);
    let ode = OdeOptions { rtol: opts.rtol, atol: 1e-3 * opts.rtol, ..OdeOptions::default() };
    let mut verdict = None;
    integrate(radial_rhs(dim, p), r0, &y0, opts.r_max, &ode, |_, y| {
        if y[0] < 0.0 {
            verdict = Some(Shot::Over);
            Control::Stop
        } else if y[1] > 0.0 {
            verdict = Some(Shot::Under);
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    // still decaying at r_max: treat as a crossing that never happened
    Ok(verdict.unwrap_or(Shot::Under))
}

fn check_range(dim: usize, p: f64) -> Result<()> {
    if dim == 0 || !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParams(format!("need N >= 1 and p > 1, got N = {dim}, p = {p}")));
    }
    if let Some(pc) = sobolev_critical_p(dim) {
        if p >= pc || approx_eq(p, pc) {
            return Err(Error::InvalidParams(format!(
                "Z exists only for p < 2*-1 = {pc}; got p = {p}"
            )));
        }
    }
    Ok(())
}

/// Solves for `Z` with default options.
pub fn solve_z(dim: usize, p: f64) -> Result<GroundStateZ> {
    solve_z_with(dim, p, &ShootingOptions::default())
}

/// Shooting on `Z(0)`: bisection between undershoot (`Z'` turns positive) and
/// overshoot (`Z` crosses zero), then one integration of the profile and its
/// norms up to the point where the shot leaves the decaying branch.
pub fn solve_z_with(dim: usize, p: f64, opts: &ShootingOptions) -> Result<GroundStateZ> {
    check_range(dim, p)?;
    // Z(0) > 1 is necessary at a positive maximum
    let mut lo = 1.0 + 1e-9;
    if shoot(dim, p, lo, opts)? == Shot::Over {
        return Err(Error::Bracket(format!("overshoot already at Z(0) = {lo}")));
    }
    let mut hi = 2.0;
    while shoot(dim, p, hi, opts)? == Shot::Under {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Bracket(format!("no overshoot up to Z(0) = {hi}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(dim, p, mid, opts)? {
            Shot::Under => lo = mid,
            Shot::Over => hi = mid,
        }
    }
    let z0 = 0.5 * (lo + hi);
    profile(dim, p, z0, opts)
}

fn profile(dim: usize, p: f64, z0: f64, opts: &ShootingOptions) -> Result<GroundStateZ> {
    let (r0, y) = start(dim, p, z0);
    let area = unit_sphere_area(dim);
    // contribution of the ball of radius r0, where Z ≈ z₀
    let ball = area * r0.powi(dim as i32) / dim as f64;
    let y0 = [y[0], y[1], ball * z0 * z0, 0.0, ball * pow_abs(z0, p + 1.0)];
    let ode = OdeOptions { rtol: opts.rtol, atol: 1e-3 * opts.rtol, h_max: 0.02, ..OdeOptions::default() };
    let mut rs = vec![r0];
    let mut zs = vec![y0[0]];
    let mut dzs = vec![y0[1]];
    let mut norms = [y0[2], y0[3], y0[4]];
    integrate(radial_rhs(dim, p), r0, &y0, opts.r_max, &ode, |r, y| {
        if y[0] <= opts.z_floor || y[1] >= 0.0 {
            return Control::Stop;
        }
        rs.push(r);
        zs.push(y[0]);
        dzs.push(y[1]);
        norms = [y[2], y[3], y[4]];
        Control::Continue
    })?;
    // exponential tail beyond the last kept radius R: Z ≈ Z(R) e^{-(r-R)}
    let (rl, zl) = (*rs.last().unwrap(), *zs.last().unwrap());
    let tail = area * rl.powi(dim as i32 - 1) * zl * zl / 2.0;
    let [mass, kinetic, lp1] = [norms[0] + tail, norms[1] + tail, norms[2]];
    if !(mass.is_finite() && kinetic > 0.0 && lp1 > 0.0) {
        return Err(Error::NonFinite(format!("norms of Z for N = {dim}, p = {p}")));
    }
    Ok(GroundStateZ { dim, p, z0, r: rs, z: zs, dz: dzs, mass, kinetic, lp1 })
}

/// `C_{N,p} = ‖Z‖_{p+1}^{p+1} / (‖∇Z‖₂^{2a} ‖Z‖₂^{4r})`; at `p = 2*-1`
/// this is `S_N`.
pub fn gn_constant(dim: usize, p: f64) -> Result<GnConstant> {
    gn_constant_with(dim, p, &ShootingOptions::default())
}

pub fn gn_constant_with(dim: usize, p: f64, opts: &ShootingOptions) -> Result<GnConstant> {
    if let Some(pc) = sobolev_critical_p(dim) {
        if approx_eq(p, pc) {
            return sobolev_constant(dim);
        }
    }
    let z = solve_z_with(dim, p, opts)?;
    Ok(GnConstant { dim, p, value: gn_quotient(&z), provenance: Provenance::Shooting })
}

/// The Gagliardo-Nirenberg quotient evaluated on the norms of `Z`.
pub fn gn_quotient(z: &GroundStateZ) -> f64 {
    let e = exponents(z.dim, z.p);
    z.lp1 / (z.kinetic.powf(e.a) * z.mass.powf(2.0 * e.r))
}

/// Both sides of `(N+2)/(N C_N) = ‖Z‖₂^{4/N}` at `p = 1 + 4/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalIdentity {
    pub dim: usize,
    /// `(N+2)/(N C_N)`.
    pub threshold: f64,
    /// `(‖Z‖₂²)^{2/N}`.
    pub z_mass_power: f64,
    pub relative_gap: f64,
    /// `‖Z‖₂²`: critical mass of the single equation with `μ = 1`.
    pub z_mass: f64,
}

impl CriticalIdentity {
    /// Critical mass `ρ*(μ) = ‖Z‖₂² μ^{-N/2}` of `-Δu + ωu = μ u^p`.
    pub fn critical_mass(&self, mu: f64) -> f64 {
        self.z_mass * mu.powf(-(self.dim as f64) / 2.0)
    }
}

pub fn l2critical_identity_check(dim: usize) -> Result<CriticalIdentity> {
    let z = solve_z(dim, l2_critical_p(dim))?;
    let c = gn_quotient(&z);
    let n = dim as f64;
    let threshold = (n + 2.0) / (n * c);
    let z_mass_power = z.mass.powf(2.0 / n);
    Ok(CriticalIdentity {
        dim,
        threshold,
        z_mass_power,
        relative_gap: (threshold - z_mass_power).abs() / threshold,
        z_mass: z.mass,
    })
}

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `(‖∇v‖₂², ‖v‖_{2*}^{2*})` of the bubble `v = (1 + |x|²/(N(N-2)))^{-(N-2)/2}`
/// restricted to `|x| < radius`, by quadrature in `θ = atan(r/√(N(N-2)))`.
fn bubble_norms(dim: usize, radius: f64) -> (f64, f64) {
    let n = dim as f64;
    let c = n * (n - 2.0);
    let area = unit_sphere_area(dim);
    let top = if radius.is_finite() { (radius / c.sqrt()).atan() } else { FRAC_PI_2 };
    let kin = simpson(
        |t| (n - 2.0).powi(2) * c.powf((n - 2.0) / 2.0) * t.sin().powf(n + 1.0) * t.cos().powf(n - 3.0),
        0.0,
        top,
        8192,
    );
    let crit = simpson(|t| c.powf(n / 2.0) * (t.sin() * t.cos()).powf(n - 1.0), 0.0, top, 8192);
    (area * kin, area * crit)
}

fn sobolev_quotient(dim: usize, kin: f64, crit: f64) -> f64 {
    let n = dim as f64;
    crit / kin.powf(n / (n - 2.0))
}

/// `S_N`, the norm quotient of the Aubin-Talenti bubble over all of `R^N`.
pub fn sobolev_constant(dim: usize) -> Result<GnConstant> {
    if dim < 3 {
        return Err(Error::InvalidParams(format!("S_N needs N >= 3, got N = {dim}")));
    }
    let (kin, crit) = bubble_norms(dim, f64::INFINITY);
    Ok(GnConstant {
        dim,
        p: sobolev_critical_p(dim).unwrap(),
        value: sobolev_quotient(dim, kin, crit),
        provenance: Provenance::Bubble,
    })
}

/// The bubble quotient over the ball of the given radius, completed by the
/// leading-order power-law tails `|∇v|² ~ (N-2)² c^{N-2} r^{-2(N-1)}` and
/// `v^{2*} ~ c^N r^{-2N}` with `c = N(N-2)`.
pub fn sobolev_constant_truncated(dim: usize, radius: f64) -> Result<f64> {
    if dim < 3 || !(radius > 0.0) {
        return Err(Error::InvalidParams(format!("need N >= 3 and radius > 0, got N = {dim}, radius = {radius}")));
    }
    let n = dim as f64;
    let c = n * (n - 2.0);
    let area = unit_sphere_area(dim);
    let (kin, crit) = bubble_norms(dim, radius);
    let kin_tail = area * (n - 2.0) * c.powf(n - 2.0) * radius.powf(-(n - 2.0));
    let crit_tail = area * c.powf(n) * radius.powf(-n) / n;
    Ok(sobolev_quotient(dim, kin + kin_tail, crit + crit_tail))
}

/// Memo of computed constants keyed by `(N, p)`.
#[derive(Debug, Clone, Default)]
pub struct ConstantsCache {
    entries: BTreeMap<(usize, u64), GnConstant>,
}

impl ConstantsCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, dim: usize, p: f64) -> Option<&GnConstant> {
        self.entries.get(&(dim, p.to_bits()))
    }

    pub fn get_or_compute(&mut self, dim: usize, p: f64) -> Result<GnConstant> {
        if let Some(c) = self.get(dim, p) {
            return Ok(*c);
        }
        let c = gn_constant(dim, p)?;
        self.entries.insert((dim, p.to_bits()), c);
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
