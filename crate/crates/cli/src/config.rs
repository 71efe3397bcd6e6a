//! Run configuration: a JSON document validated in full before any
//! computation.

use std::fmt;

use normgp_core::evolve::Perturbation;
use normgp_core::grid::Domain;
use normgp_core::minimize::{FlowOptions, InitKind};
use normgp_core::model::{MassPair, SystemParams};
use normgp_core::thresholds::RegionSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    /// Grid resolution.
    #[serde(default = "default_n")]
    pub n: usize,
    pub params: SystemParams,
    #[serde(default)]
    pub masses: Option<MassPair>,
    #[serde(default)]
    pub solver: FlowOptions,
    /// `λ₁, λ₂` to use instead of the grid eigenvalues.
    #[serde(default)]
    pub eigenvalues: Option<EigenOverride>,
    #[serde(default)]
    pub constants: Option<ConstantsBlock>,
    #[serde(default)]
    pub groundstate: Option<GroundStateBlock>,
    #[serde(default)]
    pub evolve: Option<EvolveBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub region: Option<RegionSpec>,
}

fn default_n() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenOverride {
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsBlock {
    /// `(N, p)` pairs; defaults to the pair of `params`.
    pub cases: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateBlock {
    #[serde(default = "default_inits")]
    pub inits: Vec<InitKind>,
    /// Kinetic budget `α` replacing `ᾱ` in the supercritical regimes.
    #[serde(default)]
    pub alpha: Option<f64>,
}

impl Default for GroundStateBlock {
    fn default() -> Self {
        GroundStateBlock { inits: default_inits(), alpha: None }
    }
}

fn default_inits() -> Vec<InitKind> {
    vec![InitKind::Eigen1, InitKind::Eigen2Split, InitKind::SegregatedBumps]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveBlock {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
    pub perturbation: Perturbation,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub betas: Vec<f64>,
}

/// Everything wrong with a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for m in &self.messages {
            writeln!(f, "  - {m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a JSON configuration. Syntax errors and unknown keys
/// stop parsing; semantic problems are collected and reported together.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError { messages: vec![e.to_string()] })?;
    let messages = cfg.violations();
    if messages.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { messages })
    }
}

fn kind_name(d: &Domain) -> &'static str {
    match d {
        Domain::Interval { .. } => "interval",
        Domain::Rectangle { .. } => "rectangle",
        Domain::RadialBall { .. } => "radial_ball",
    }
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = self.domain.validate() {
            v.push(e.to_string());
        }
        if self.domain.dim() != self.params.dim {
            v.push(format!(
                "domain kind `{}` has dimension {} but N = {}",
                kind_name(&self.domain),
                self.domain.dim(),
                self.params.dim
            ));
        }
        v.extend(self.params.violations());
        if let Some(m) = &self.masses {
            v.extend(m.violations());
        }
        if self.n < 3 {
            v.push(format!("n >= 3 violated: n = {}", self.n));
        }
        let s = &self.solver;
        if !(s.tol > 0.0) {
            v.push(format!("solver.tol > 0 violated: {}", s.tol));
        }
        if s.max_iter == 0 {
            v.push("solver.max_iter > 0 violated".into());
        }
        if let Some(dt) = s.dt.filter(|d| !(*d > 0.0)) {
            v.push(format!("solver.dt > 0 violated: {dt}"));
        }
        if let Some(dt) = s.dt_max.filter(|d| !(*d > 0.0)) {
            v.push(format!("solver.dt_max > 0 violated: {dt}"));
        }
        if !(s.dt_growth >= 1.0) {
            v.push(format!("solver.dt_growth >= 1 violated: {}", s.dt_growth));
        }
        if let Some(e) = &self.eigenvalues {
            if !(e.lambda1 > 0.0 && e.lambda1 <= e.lambda2) {
                v.push(format!("0 < lambda1 <= lambda2 violated: ({}, {})", e.lambda1, e.lambda2));
            }
        }
        if let Some(c) = &self.constants {
            for &(n, p) in &c.cases {
                let probe = SystemParams { dim: n, p, mu1: 1.0, mu2: 1.0, beta: 0.0 };
                v.extend(probe.violations().into_iter().map(|m| format!("constants case ({n}, {p}): {m}")));
            }
        }
        if let Some(g) = &self.groundstate {
            if g.inits.is_empty() {
                v.push("groundstate.inits must not be empty".into());
            }
            if let Some(a) = g.alpha.filter(|a| !(*a > 0.0)) {
                v.push(format!("groundstate.alpha > 0 violated: {a}"));
            }
        }
        if let Some(e) = &self.evolve {
            if !(e.t_end >= 0.0) {
                v.push(format!("evolve.t_end >= 0 violated: {}", e.t_end));
            }
            if !(e.dt > 0.0) {
                v.push(format!("evolve.dt > 0 violated: {}", e.dt));
            }
            if !(e.perturbation.delta >= 0.0) {
                v.push(format!("evolve.perturbation.delta >= 0 violated: {}", e.perturbation.delta));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.betas.is_empty() {
                v.push("sweep.betas must not be empty".into());
            }
            if let Some(b) = sw.betas.iter().find(|b| !(**b < 0.0)) {
                v.push(format!("sweep.betas: beta < 0 violated: {b}"));
            }
            if sw.betas.windows(2).any(|w| !(w[1] < w[0])) {
                v.push("sweep.betas must be strictly descending".into());
            }
        }
        if let Some(r) = &self.region {
            let (nx, ny, ok) = match *r {
                RegionSpec::H2Scaled { x_max, y_max, nx, ny } => (nx, ny, x_max > 0.0 && y_max > 0.0),
                RegionSpec::Budget { rho1_max, rho2_max, nx, ny, lambda1, lambda2 } => {
                    (nx, ny, rho1_max > 0.0 && rho2_max > 0.0 && lambda1 > 0.0 && lambda1 <= lambda2)
                }
            };
            if nx == 0 || ny == 0 {
                v.push("region: nx, ny > 0 violated".into());
            }
            if !ok {
                v.push("region: extents must be positive and 0 < lambda1 <= lambda2".into());
            }
        }
        v
    }
}
