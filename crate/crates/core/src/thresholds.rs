//! Explicit admissibility thresholds for the prescribed masses `(ρ₁, ρ₂)`.
//!
//! Notation: `a, r` are the Gagliardo-Nirenberg exponents, `C = C_{N,p}`,
//! `β⁺ = max(β, 0)`, `T = (N+2)/(N C_N)` at the L²-critical exponent, and
//! `j = 1` when `β ≥ -√(μ₁μ₂)`, `j = 2` otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify_regime, MassPair, Regime, SystemParams};

/// Outcome of one inequality, with `margin = right side - left side`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

impl Check {
    /// `lhs ≤ rhs` (or `<` when `strict`).
    fn new(name: &str, lhs: f64, rhs: f64, strict: bool) -> Self {
        let margin = rhs - lhs;
        let pass = if strict { lhs < rhs } else { lhs <= rhs };
        Check { name: name.to_string(), pass, margin }
    }
}

pub const CHECK_H2: &str = "h2_coercivity";
pub const CHECK_MAIN: &str = "lambda_budget";
pub const CHECK_EXPLICIT: &str = "explicit_budget";
pub const CHECK_COMPACT: &str = "compactness_at_bar_alpha";
pub const CHECK_COMPACT_STRICT: &str = "compactness_at_bar_alpha_strict";
pub const CHECK_UNIFORM_BETA: &str = "uniform_in_beta";

/// Evaluated admissibility quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub regime: Regime,
    pub a: f64,
    pub r: f64,
    /// `C_{N,p}` (`S_N` at the Sobolev-critical exponent).
    pub c: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `Λ(ρ₁, ρ₂)`; present when `a ≥ 1`.
    pub lambda_cap: Option<f64>,
    /// `Λ′(ρ₁, ρ₂)`; present when `a ≥ 1`.
    pub lambda_cap_prime: Option<f64>,
    /// `R(Ω, N, p)`; present when `a > 1`.
    pub r_bound: Option<f64>,
    /// Index of the eigenvalue entering the budget; present when `a > 1`.
    pub j: Option<u8>,
    /// `ᾱ = a/(a-1) λ_j`; present when `a > 1`.
    pub bar_alpha: Option<f64>,
    pub checks: Vec<Check>,
}

impl ThresholdReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `T = (N+2)/(N C_N)`.
pub fn h2_threshold(dim: usize, c_n: f64) -> f64 {
    let n = dim as f64;
    (n + 2.0) / (n * c_n)
}

/// `j` for the given coupling.
pub fn eigen_index(params: &SystemParams) -> u8 {
    if params.beta >= -(params.mu1 * params.mu2).sqrt() {
        1
    } else {
        2
    }
}

fn wrong_regime(regime: Regime, reason: &str) -> Error {
    Error::WrongRegime { regime: regime.to_string(), reason: reason.to_string() }
}

/// `max{μ₁ρ₁^{2/N}, μ₂ρ₂^{2/N}, μ₁ρ₁^{2/N} + μ₂ρ₂^{2/N} + (N C_N/(N+2))((β⁺)² - μ₁μ₂)(ρ₁ρ₂)^{2/N}} < T`.
pub fn check_h2_condition(params: &SystemParams, masses: &MassPair, c_n: f64) -> Result<Check> {
    let regime = classify_regime(params.dim, params.p)?;
    if regime != Regime::H2 {
        return Err(wrong_regime(regime, "the coercivity condition needs p = 1 + 4/N"));
    }
    let q = 2.0 / params.dim as f64;
    let t = h2_threshold(params.dim, c_n);
    let x = params.mu1 * masses.rho1.powf(q);
    let y = params.mu2 * masses.rho2.powf(q);
    let bp = params.beta_plus();
    let mixed = x + y + (bp * bp - params.mu1 * params.mu2) * (masses.rho1 * masses.rho2).powf(q) / t;
    Ok(Check::new(CHECK_H2, x.max(y).max(mixed), t, true))
}

/// `f(t) = A cos^{2a}t + B sin^{2a}t + 2D cos^a t sin^a t` on `[0, π/2]`.
fn trig_objective(a: f64, coef: [f64; 3]) -> impl Fn(f64) -> f64 {
    move |t: f64| {
        let (c, s) = (t.cos().max(0.0).powf(a), t.sin().max(0.0).powf(a));
        coef[0] * c * c + coef[1] * s * s + 2.0 * coef[2] * c * s
    }
}

/// `(μ₁ρ₁^{2r}, μ₂ρ₂^{2r}, β⁺ρ₁^rρ₂^r)`. An empty component contributes
/// nothing, also at `r = 0`.
fn coefficients(params: &SystemParams, masses: &MassPair) -> [f64; 3] {
    let r = params.exponents().r;
    let pw = |rho: f64| if rho == 0.0 { 0.0 } else { rho.powf(r) };
    let (p1, p2) = (pw(masses.rho1), pw(masses.rho2));
    [params.mu1 * p1 * p1, params.mu2 * p2 * p2, params.beta_plus() * p1 * p2]
}

/// Maximum of a continuous function on `[0, π/2]`: 1024-point scan, then
/// golden-section refinement around the best sample to width `1e-12`.
fn maximize_quarter(f: impl Fn(f64) -> f64) -> f64 {
    const SAMPLES: usize = 1024;
    let h = std::f64::consts::FRAC_PI_2 / (SAMPLES - 1) as f64;
    let (mut best_i, mut best) = (0, f(0.0));
    for i in 1..SAMPLES {
        let v = f(i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = best_i.saturating_sub(1) as f64 * h;
    let mut hi = ((best_i + 1).min(SAMPLES - 1)) as f64 * h;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    best.max(f1).max(f2)
}

/// `Λ(ρ₁,ρ₂) = (2C/(p+1)) max_{t∈[0,π/2]} (μ₁ρ₁^{2r}cos^{2a}t + μ₂ρ₂^{2r}sin^{2a}t + 2β⁺ρ₁^rρ₂^r cos^a t sin^a t)`.
pub fn lambda_capital(params: &SystemParams, masses: &MassPair, c: f64) -> f64 {
    let a = params.exponents().a;
    let coef = coefficients(params, masses);
    2.0 * c / (params.p + 1.0) * maximize_quarter(trig_objective(a, coef))
}

/// Closed-form majorant `Λ′ = (C/(p+1))(A + B + √((A-B)² + 4D²))` with
/// `A = μ₁ρ₁^{2r}`, `B = μ₂ρ₂^{2r}`, `D = β⁺ρ₁^rρ₂^r`.
pub fn lambda_prime(params: &SystemParams, masses: &MassPair, c: f64) -> f64 {
    let [a, b, d] = coefficients(params, masses);
    c / (params.p + 1.0) * (a + b + ((a - b).powi(2) + 4.0 * d * d).sqrt())
}

/// `(a-1)^{a-1}/a^a · λ^{-(a-1)}`, the maximum of `(α - λ)/α^a` over `α ≥ λ`.
pub fn budget(a: f64, lambda: f64) -> f64 {
    (a - 1.0).powf(a - 1.0) / a.powf(a) * lambda.powf(-(a - 1.0))
}

/// `R(Ω,N,p) = ((p+1)/(2C)) (a-1)^{a-1}/a^a λ_j^{-(a-1)}`.
pub fn r_bound(params: &SystemParams, c: f64, lambda_j: f64) -> f64 {
    (params.p + 1.0) / (2.0 * c) * budget(params.exponents().a, lambda_j)
}

fn eigen_j(j: u8, lambda1: f64, lambda2: f64) -> f64 {
    if j == 1 {
        lambda1
    } else {
        lambda2
    }
}

/// Left side `[max{μ₁ρ₁^{2r}, μ₂ρ₂^{2r}} + β⁺ρ₁^rρ₂^r](ρ₁+ρ₂)^{a-1}` of the
/// explicit budget.
pub fn explicit_budget_lhs(params: &SystemParams, masses: &MassPair) -> f64 {
    let [a, b, d] = coefficients(params, masses);
    (a.max(b) + d) * masses.total().powf(params.exponents().a - 1.0)
}

/// All checks of the L²-supercritical regimes (`a > 1`).
pub fn check_supercritical(
    params: &SystemParams,
    masses: &MassPair,
    c: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<ThresholdReport> {
    let regime = classify_regime(params.dim, params.p)?;
    if !matches!(regime, Regime::H3 | Regime::H4) {
        return Err(wrong_regime(regime, "the mass budgets need p > 1 + 4/N"));
    }
    let e = params.exponents();
    let j = eigen_index(params);
    let lj = eigen_j(j, lambda1, lambda2);
    let lam = lambda_capital(params, masses, c);
    let lam_p = lambda_prime(params, masses, c);
    let r_b = r_bound(params, c, lj);
    let bar_alpha = e.a / (e.a - 1.0) * lj;
    let total = masses.total();
    let mut checks = vec![
        Check::new(CHECK_MAIN, lam * total.powf(e.a - 1.0), budget(e.a, lj), false),
        Check::new(CHECK_EXPLICIT, explicit_budget_lhs(params, masses), r_b, false),
    ];
    if regime == Regime::H4 {
        let lhs = total * (bar_alpha - lambda1);
        let rhs = lam.powf(-(params.dim as f64 - 2.0) / 2.0);
        checks.push(Check::new(CHECK_COMPACT, lhs, rhs, false));
        checks.push(Check::new(CHECK_COMPACT_STRICT, lhs, rhs, true));
    }
    Ok(ThresholdReport {
        regime,
        a: e.a,
        r: e.r,
        c,
        lambda1,
        lambda2,
        lambda_cap: Some(lam),
        lambda_cap_prime: Some(lam_p),
        r_bound: Some(r_b),
        j: Some(j),
        bar_alpha: Some(bar_alpha),
        checks,
    })
}

/// Report for any regime: the H2 condition, the supercritical budgets, or no
/// mass condition at all in the subcritical regime. Always includes the
/// β-uniform condition.
pub fn threshold_report(
    params: &SystemParams,
    masses: &MassPair,
    c: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<ThresholdReport> {
    let regime = classify_regime(params.dim, params.p)?;
    let mut report = match regime {
        Regime::H3 | Regime::H4 => check_supercritical(params, masses, c, lambda1, lambda2)?,
        Regime::H1 | Regime::H2 => {
            let e = params.exponents();
            let mut checks = Vec::new();
            let (mut lam, mut lam_p) = (None, None);
            if regime == Regime::H2 {
                checks.push(check_h2_condition(params, masses, c)?);
                lam = Some(lambda_capital(params, masses, c));
                lam_p = Some(lambda_prime(params, masses, c));
            }
            ThresholdReport {
                regime,
                a: e.a,
                r: e.r,
                c,
                lambda1,
                lambda2,
                lambda_cap: lam,
                lambda_cap_prime: lam_p,
                r_bound: None,
                j: None,
                bar_alpha: None,
                checks,
            }
        }
    };
    report.checks.push(uniform_beta_condition(params, masses, c, lambda2)?);
    Ok(report)
}

/// The mass condition under which ground states exist for every `β < 0`:
/// both masses positive (H1); `0 < μ_iρ_i^{2/N} < T` (H2);
/// `max{μ₁ρ₁^{2r}, μ₂ρ₂^{2r}}(ρ₁+ρ₂)^{a-1} ≤ R` with `j = 2` (H3, H4).
pub fn uniform_beta_condition(params: &SystemParams, masses: &MassPair, c: f64, lambda2: f64) -> Result<Check> {
    let regime = classify_regime(params.dim, params.p)?;
    let positive = masses.rho1 > 0.0 && masses.rho2 > 0.0;
    let check = match regime {
        Regime::H1 => Check {
            name: CHECK_UNIFORM_BETA.into(),
            pass: positive,
            margin: masses.rho1.min(masses.rho2),
        },
        Regime::H2 => {
            let q = 2.0 / params.dim as f64;
            let x = (params.mu1 * masses.rho1.powf(q)).max(params.mu2 * masses.rho2.powf(q));
            let mut ch = Check::new(CHECK_UNIFORM_BETA, x, h2_threshold(params.dim, c), true);
            ch.pass &= positive;
            ch
        }
        Regime::H3 | Regime::H4 => {
            let no_coupling = SystemParams { beta: 0.0, ..*params };
            let lhs = explicit_budget_lhs(&no_coupling, masses);
            let mut ch = Check::new(CHECK_UNIFORM_BETA, lhs, r_bound(params, c, lambda2), false);
            ch.pass &= positive;
            ch
        }
    };
    Ok(check)
}

/// `(lower, upper)` bounds on `ĉ_α`: `lower = ½((ρ₁+ρ₂)α - Λ(ρ₁+ρ₂)^a α^a)`;
/// `upper = ½(ρ₁+ρ₂)λ_j`, valid at `α = λ_j`.
pub fn hat_c_bounds(alpha: f64, masses: &MassPair, lambda_cap: f64, a: f64, lambda_j: f64) -> (f64, f64) {
    let t = masses.total();
    let lower = 0.5 * (t * alpha - lambda_cap * t.powf(a) * alpha.powf(a));
    (lower, 0.5 * t * lambda_j)
}

/// Boundary of the H2 region in the coordinates `x = μ₁ρ₁^{2/N}`,
/// `y = μ₂ρ₂^{2/N}`: `y = (T-x)/(1 + ((β⁺)² - μ₁μ₂)x/(μ₁μ₂T))`.
pub fn h2_boundary(params: &SystemParams, c_n: f64, x: f64) -> f64 {
    let t = h2_threshold(params.dim, c_n);
    let bp = params.beta_plus();
    let m = params.mu1 * params.mu2;
    (t - x) / (1.0 + (bp * bp - m) * x / (m * t))
}

/// Sampling plan for [`region_sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    /// The H2 condition on the scaled axes `(μ₁ρ₁^{2/N}, μ₂ρ₂^{2/N})`.
    H2Scaled { x_max: f64, y_max: f64, nx: usize, ny: usize },
    /// The explicit budget on the `(ρ₁, ρ₂)` axes.
    Budget { rho1_max: f64, rho2_max: f64, nx: usize, ny: usize, lambda1: f64, lambda2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub x: f64,
    pub y: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Cell-centred samples, `x` varying slowest.
    pub points: Vec<RegionPoint>,
    /// Analytic boundary (H2 mode only), clipped to the sampling window.
    pub boundary: Vec<(f64, f64)>,
}

fn centers(max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| max * (i as f64 + 0.5) / n as f64).collect()
}

/// Samples the admissible region on a regular grid of cell centres.
pub fn region_sample(params: &SystemParams, c: f64, spec: &RegionSpec) -> Result<Region> {
    let (xs, ys) = match *spec {
        RegionSpec::H2Scaled { x_max, y_max, nx, ny } | RegionSpec::Budget { rho1_max: x_max, rho2_max: y_max, nx, ny, .. } => {
            if nx == 0 || ny == 0 || !(x_max > 0.0) || !(y_max > 0.0) {
                return Err(Error::InvalidParams("region window and sample counts must be positive".into()));
            }
            (centers(x_max, nx), centers(y_max, ny))
        }
    };
    let pairs: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let q = params.dim as f64 / 2.0;
    let points = pairs
        .par_iter()
        .map(|&(x, y)| -> Result<RegionPoint> {
            let pass = match *spec {
                RegionSpec::H2Scaled { .. } => {
                    let m = MassPair { rho1: (x / params.mu1).powf(q), rho2: (y / params.mu2).powf(q) };
                    check_h2_condition(params, &m, c)?.pass
                }
                RegionSpec::Budget { lambda1, lambda2, .. } => {
                    let m = MassPair { rho1: x, rho2: y };
                    let lj = eigen_j(eigen_index(params), lambda1, lambda2);
                    let regime = classify_regime(params.dim, params.p)?;
                    if !matches!(regime, Regime::H3 | Regime::H4) {
                        return Err(wrong_regime(regime, "the budget region needs p > 1 + 4/N"));
                    }
                    explicit_budget_lhs(params, &m) <= r_bound(params, c, lj)
                }
            };
            Ok(RegionPoint { x, y, pass })
        })
        .collect::<Result<Vec<_>>>()?;
    let boundary = match *spec {
        RegionSpec::H2Scaled { x_max, y_max, .. } => {
            let t = h2_threshold(params.dim, c);
            let m = 512;
            (0..=m)
                .map(|i| x_max.min(t) * i as f64 / m as f64)
                .map(|x| (x, h2_boundary(params, c, x).min(t)))
                .filter(|&(_, y)| y >= 0.0 && y <= y_max)
                .collect()
        }
        RegionSpec::Budget { .. } => Vec::new(),
    };
    Ok(Region { points, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(dim: usize, p: f64, mu1: f64, mu2: f64, beta: f64) -> SystemParams {
        SystemParams::new(dim, p, mu1, mu2, beta).unwrap()
    }

    #[test]
    fn h2_reduces_for_nonpositive_beta() {
        let c = 0.3;
        let t = h2_threshold(2, c);
        let pr = sp(2, 3.0, 1.0, 2.0, -5.0);
        let m = MassPair { rho1: 0.9 * t, rho2: 0.4 * t };
        let ch = check_h2_condition(&pr, &m, c).unwrap();
        assert!(ch.pass);
        // for β ≤ 0 the mixed term dominates: margin = (T - x)(T - y)/T
        let (x, y) = (0.9 * t, 2.0 * 0.4 * t);
        assert!((ch.margin - (t - x) * (t - y) / t).abs() < 1e-12);
        let m = MassPair { rho1: 1.01 * t, rho2: 0.0 };
        assert!(!check_h2_condition(&pr, &m, c).unwrap().pass);
        assert!(check_h2_condition(&sp(1, 3.0, 1.0, 1.0, 0.0), &m, c).is_err());
    }

    #[test]
    fn h2_half_square_at_geometric_mean() {
        let c = 0.2;
        let t = h2_threshold(2, c);
        let pr = sp(2, 3.0, 4.0, 1.0, 2.0);
        for (x, y) in [(0.3, 0.6), (0.5, 0.49), (0.5, 0.51), (0.1, 0.95)] {
            let m = MassPair { rho1: x * t / 4.0, rho2: y * t };
            let pass = check_h2_condition(&pr, &m, c).unwrap().pass;
            assert_eq!(pass, x + y < 1.0, "{x} {y}");
        }
    }

    #[test]
    fn lambda_endpoint_for_nonpositive_beta() {
        let pr = sp(3, 4.0, 1.0, 3.0, -1.0);
        let m = MassPair { rho1: 2.0, rho2: 0.5 };
        let c = 0.05;
        let r = pr.exponents().r;
        let expect = 2.0 * c / 5.0 * (2f64.powf(2.0 * r)).max(3.0 * 0.5f64.powf(2.0 * r));
        assert!((lambda_capital(&pr, &m, c) - expect).abs() < 1e-14);
        assert!((lambda_prime(&pr, &m, c) - expect).abs() < 1e-14);
    }

    #[test]
    fn lambda_interior_max_matches_dense_scan() {
        let pr = sp(3, 5.0, 1.0, 1.0, 3.0);
        let m = MassPair { rho1: 1.0, rho2: 1.0 };
        let c = 0.01;
        let a = pr.exponents().a;
        let f = trig_objective(a, coefficients(&pr, &m));
        let scan = (0..=1_000_000)
            .map(|i| f(std::f64::consts::FRAC_PI_2 * i as f64 / 1e6))
            .fold(f64::MIN, f64::max);
        let lam = lambda_capital(&pr, &m, c);
        assert!((lam - 2.0 * c / 6.0 * scan).abs() < 1e-12 * lam);
        // symmetric data: maximum at t = π/4
        let mid = f(std::f64::consts::FRAC_PI_4);
        assert!((lam - 2.0 * c / 6.0 * mid).abs() < 1e-12 * lam);
        assert!(lam <= lambda_prime(&pr, &m, c));
    }

    #[test]
    fn symmetric_lambda_prime() {
        let pr = sp(3, 4.0, 2.0, 2.0, 0.7);
        let m = MassPair { rho1: 1.5, rho2: 1.5 };
        let r = pr.exponents().r;
        let mm = 2.0 * 1.5f64.powf(2.0 * r);
        let expect = 2.0 * 0.1 / 5.0 * (mm + 0.7 * 1.5f64.powf(2.0 * r));
        assert!((lambda_prime(&pr, &m, 0.1) - expect).abs() < 1e-14);
    }

    #[test]
    fn supercritical_report_fields() {
        let pr = sp(3, 5.0, 1.0, 1.0, 0.5);
        let m = MassPair { rho1: 0.01, rho2: 0.02 };
        let rep = check_supercritical(&pr, &m, 0.006, 9.87, 20.19).unwrap();
        assert_eq!(rep.j, Some(1));
        assert!((rep.bar_alpha.unwrap() - 1.5 * 9.87).abs() < 1e-12);
        assert_eq!(rep.checks.len(), 4);
        let pr2 = SystemParams { beta: -1.5, ..pr };
        let rep2 = check_supercritical(&pr2, &m, 0.006, 9.87, 20.19).unwrap();
        assert_eq!(rep2.j, Some(2));
        assert!((rep2.bar_alpha.unwrap() - 1.5 * 20.19).abs() < 1e-12);
        assert!(check_supercritical(&sp(2, 3.0, 1.0, 1.0, 0.0), &m, 0.1, 1.0, 2.0).is_err());
    }

    #[test]
    fn h4_single_equation_budget() {
        // r = 0, a = 3 at N = 3: explicit budget reads μ₁ρ₁² ≤ R, i.e. ρ₁ ≤ (R/μ₁)^{1/2};
        // the larger μ₂ of the empty component plays no role
        let pr = sp(3, 5.0, 1.0, 2.0, 0.0);
        let rb = r_bound(&pr, 0.006, 9.87);
        let edge = rb.sqrt();
        let inside = check_supercritical(&pr, &MassPair { rho1: 0.999 * edge, rho2: 0.0 }, 0.006, 9.87, 20.0).unwrap();
        let outside = check_supercritical(&pr, &MassPair { rho1: 1.001 * edge, rho2: 0.0 }, 0.006, 9.87, 20.0).unwrap();
        assert!(inside.check(CHECK_EXPLICIT).unwrap().pass);
        assert!(!outside.check(CHECK_EXPLICIT).unwrap().pass);
    }

    #[test]
    fn tangency_at_bar_alpha() {
        // when the Λ budget holds with equality, lower(ᾱ) = upper at λ_j
        let (a, lj) = (3.0, 9.87);
        let m = MassPair { rho1: 0.3, rho2: 0.2 };
        let lam = budget(a, lj) / m.total().powf(a - 1.0);
        let bar = a / (a - 1.0) * lj;
        let (lower, _) = hat_c_bounds(bar, &m, lam, a, lj);
        let (_, upper) = hat_c_bounds(lj, &m, lam, a, lj);
        assert!((lower - upper).abs() < 1e-12 * upper);
        assert_eq!(hat_c_bounds(2.0, &m, 0.0, a, lj).0, 0.5 * 0.5 * 2.0);
    }

    #[test]
    fn region_shapes() {
        let c = 0.171;
        let t = h2_threshold(2, c);
        let spec = RegionSpec::H2Scaled { x_max: 1.2 * t, y_max: 1.2 * t, nx: 40, ny: 40 };
        let sq = region_sample(&sp(2, 3.0, 1.0, 2.0, -1.0), c, &spec).unwrap();
        assert!(sq.points.iter().all(|q| q.pass == (q.x < t && q.y < t)));
        let tri = region_sample(&sp(2, 3.0, 1.0, 4.0, 2.0), c, &spec).unwrap();
        assert!(tri.points.iter().all(|q| q.pass == (q.x + q.y < t)));
        assert!(tri.boundary.iter().all(|&(x, y)| (x + y - t).abs() < 1e-12 * t));
        let inner = region_sample(&sp(2, 3.0, 1.0, 1.0, 3.0), c, &spec).unwrap();
        assert!(inner.points.iter().filter(|q| q.pass).all(|q| q.x + q.y < t));
        assert!(inner.points.iter().filter(|q| q.pass).count() < tri.points.iter().filter(|q| q.pass).count());
    }
}
