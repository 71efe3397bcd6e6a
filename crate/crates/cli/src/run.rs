//! Subcommand drivers. Every run writes its artifacts into one output
//! directory together with `manifest.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use normgp_core::constants::{gn_constant, GnConstant, Provenance};
use normgp_core::error::Error as CoreError;
use normgp_core::evolve::{stability_experiment, EvolutionTrace};
use normgp_core::grid::{build_grid, domain_eigenvalues, field_to_csv, Field, Grid, GridSpec};
use normgp_core::minimize::{
    multistart, verify_local_min, witness_table, ConstraintSpec, GroundStateResult, InitKind, LocalMinCertificate,
};
use normgp_core::model::{classify_regime, exponents, MassPair, Regime, SystemParams};
use normgp_core::segregation::{beta_sweep, limit_profile_check, LimitReport};
use normgp_core::thresholds::{region_sample, threshold_report, uniform_beta_condition, Region, ThresholdReport};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Unconverged(String),
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(_) | RunError::Io { .. } => 1,
            RunError::Unconverged(_) => 3,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Constants,
    Thresholds,
    GroundState,
    Evolve,
    SweepBeta,
    Region,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Constants => "constants",
            Subcommand::Thresholds => "thresholds",
            Subcommand::GroundState => "groundstate",
            Subcommand::Evolve => "evolve",
            Subcommand::SweepBeta => "sweep-beta",
            Subcommand::Region => "region",
        }
    }
}

/// Options that do not live in the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub allow_partial: bool,
    /// `k` values of the unboundedness witness (`groundstate` only).
    pub witness: Vec<f64>,
    /// Ground-state snapshot to perturb (`evolve` only).
    pub ground_state: Option<PathBuf>,
}

/// A ground state on disk: enough to rebuild the grid and the fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateFile {
    pub grid: GridSpec,
    pub params: SystemParams,
    pub masses: MassPair,
    pub alpha: Option<f64>,
    pub init: Option<InitKind>,
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub energy: f64,
    pub kinetic_total: f64,
    pub converged: bool,
    pub boundary_hit: bool,
    pub iterations: usize,
    pub residual: f64,
    pub certificate: Option<LocalMinCertificate>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl GroundStateFile {
    pub fn to_result(&self) -> RunResult<GroundStateResult> {
        let grid = self.grid.build()?;
        Ok(GroundStateResult {
            u1: Field::new(grid.clone(), self.u1.clone())?,
            u2: Field::new(grid, self.u2.clone())?,
            omega1: self.omega1,
            omega2: self.omega2,
            energy: self.energy,
            kinetic_total: self.kinetic_total,
            converged: self.converged,
            boundary_hit: self.boundary_hit,
            iterations: self.iterations,
            residual: self.residual,
            last_change: f64::NAN,
            dt_final: f64::NAN,
            energy_history: Vec::new(),
        })
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    seed: Option<u64>,
    allow_partial: bool,
    wall_time_s: f64,
    outputs: &'a [String],
    warnings: &'a [String],
    config: &'a RunConfig,
}

/// Collects the files of one run.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    warnings: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> RunResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> RunResult<()> {
        let mut s = serde_json::to_string_pretty(value).expect("output serializes");
        s.push('\n');
        self.write(name, &s)
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn need<'a, T>(x: &'a Option<T>, what: &str, sub: Subcommand) -> RunResult<&'a T> {
    x.as_ref().ok_or_else(|| RunError::Config(format!("`{}` needs a `{what}` block in the configuration", sub.name())))
}

fn grid_of(cfg: &RunConfig) -> RunResult<Arc<Grid>> {
    Ok(build_grid(cfg.domain, cfg.n)?)
}

fn eigenvalues(cfg: &RunConfig, grid: &Arc<Grid>) -> RunResult<(f64, f64)> {
    match cfg.eigenvalues {
        Some(e) => Ok((e.lambda1, e.lambda2)),
        None => Ok(domain_eigenvalues(grid)?),
    }
}

fn report_for(cfg: &RunConfig, masses: &MassPair, grid: &Arc<Grid>) -> RunResult<(GnConstant, ThresholdReport)> {
    let c = gn_constant(cfg.params.dim, cfg.params.p)?;
    let (l1, l2) = eigenvalues(cfg, grid)?;
    let rep = threshold_report(&cfg.params, masses, c.value, l1, l2)?;
    Ok((c, rep))
}

/// Runs one subcommand. Artifacts are written even when a flagged
/// non-convergence turns into an error at the end.
pub fn run(sub: Subcommand, cfg: &RunConfig, opts: &RunOptions) -> RunResult<()> {
    let start = Instant::now();
    fs::create_dir_all(&opts.out).map_err(|source| RunError::Io { path: opts.out.clone(), source })?;
    let mut out = Outputs { dir: opts.out.clone(), files: Vec::new(), warnings: Vec::new() };
    let flagged = match sub {
        Subcommand::Constants => constants(cfg, &mut out),
        Subcommand::Thresholds => thresholds(cfg, &mut out),
        Subcommand::Region => region(cfg, &mut out),
        Subcommand::GroundState => groundstate(cfg, opts, &mut out),
        Subcommand::Evolve => evolve(cfg, opts, &mut out),
        Subcommand::SweepBeta => sweep(cfg, opts, &mut out),
    }?;
    let wall = start.elapsed().as_secs_f64();
    let manifest = Manifest {
        subcommand: sub.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: opts.seed,
        allow_partial: opts.allow_partial,
        wall_time_s: wall,
        outputs: &out.files.clone(),
        warnings: &out.warnings.clone(),
        config: cfg,
    };
    out.json("manifest.json", &manifest)?;
    match flagged {
        Some(msg) if !opts.allow_partial => Err(RunError::Unconverged(msg)),
        _ => Ok(()),
    }
}

type Flag = RunResult<Option<String>>;

fn constants(cfg: &RunConfig, out: &mut Outputs) -> Flag {
    let cases = cfg.constants.as_ref().map(|c| c.cases.clone()).unwrap_or_else(|| vec![(cfg.params.dim, cfg.params.p)]);
    let mut s = String::from("N,p,a,r,C,provenance\n");
    for (n, p) in cases {
        let c = gn_constant(n, p)?;
        let e = exponents(n, p);
        let prov = match c.provenance {
            Provenance::Shooting => "shooting",
            Provenance::Bubble => "bubble",
        };
        writeln!(s, "{n},{},{},{},{},{prov}", num(p), num(e.a), num(e.r), num(c.value)).unwrap();
    }
    print!("{s}");
    out.write("constants.csv", &s)?;
    Ok(None)
}

fn region_csv(region: &Region, out: &mut Outputs) -> RunResult<()> {
    let mut s = String::from("x,y,pass\n");
    for p in &region.points {
        writeln!(s, "{},{},{}", num(p.x), num(p.y), p.pass as u8).unwrap();
    }
    out.write("region.csv", &s)?;
    if !region.boundary.is_empty() {
        let mut b = String::from("x,y\n");
        for (x, y) in &region.boundary {
            writeln!(b, "{},{}", num(*x), num(*y)).unwrap();
        }
        out.write("region_boundary.csv", &b)?;
    }
    Ok(())
}

fn thresholds(cfg: &RunConfig, out: &mut Outputs) -> Flag {
    let masses = need(&cfg.masses, "masses", Subcommand::Thresholds)?;
    let grid = grid_of(cfg)?;
    let (c, rep) = report_for(cfg, masses, &grid)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        constant: &'a GnConstant,
        eigenvalues_overridden: bool,
        report: &'a ThresholdReport,
    }
    out.json("thresholds.json", &Doc { constant: &c, eigenvalues_overridden: cfg.eigenvalues.is_some(), report: &rep })?;
    if let Some(spec) = &cfg.region {
        region_csv(&region_sample(&cfg.params, c.value, spec)?, out)?;
    }
    for ch in &rep.checks {
        println!("{:<20} {} margin {}", ch.name, if ch.pass { "pass" } else { "fail" }, num(ch.margin));
    }
    Ok(None)
}

fn region(cfg: &RunConfig, out: &mut Outputs) -> Flag {
    let spec = need(&cfg.region, "region", Subcommand::Region)?;
    let c = gn_constant(cfg.params.dim, cfg.params.p)?;
    let r = region_sample(&cfg.params, c.value, spec)?;
    println!("{} of {} samples admissible", r.points.iter().filter(|p| p.pass).count(), r.points.len());
    region_csv(&r, out)?;
    Ok(None)
}

fn snapshot(
    cfg: &RunConfig,
    masses: &MassPair,
    alpha: Option<f64>,
    init: Option<InitKind>,
    res: &GroundStateResult,
    certificate: Option<LocalMinCertificate>,
) -> GroundStateFile {
    GroundStateFile {
        grid: res.u1.grid().spec(),
        params: cfg.params,
        masses: *masses,
        alpha,
        init,
        omega1: res.omega1,
        omega2: res.omega2,
        energy: res.energy,
        kinetic_total: res.kinetic_total,
        converged: res.converged,
        boundary_hit: res.boundary_hit,
        iterations: res.iterations,
        residual: res.residual,
        certificate,
        u1: res.u1.values().to_vec(),
        u2: res.u2.values().to_vec(),
    }
}

fn groundstate(cfg: &RunConfig, opts: &RunOptions, out: &mut Outputs) -> Flag {
    let masses = need(&cfg.masses, "masses", Subcommand::GroundState)?;
    let block = cfg.groundstate.clone().unwrap_or_default();
    let grid = grid_of(cfg)?;
    let regime = classify_regime(cfg.params.dim, cfg.params.p)?;
    let supercritical = matches!(regime, Regime::H3 | Regime::H4);
    let report = if supercritical { Some(report_for(cfg, masses, &grid)?.1) } else { None };
    let alpha = block.alpha.or(report.as_ref().and_then(|r| r.bar_alpha));
    let spec = ConstraintSpec { masses: *masses, ball_alpha: alpha };
    let ms = multistart(&cfg.params, &grid, &spec, &block.inits, &cfg.solver);

    let mut runs = String::from("init,converged,boundary_hit,energy,iterations,residual,omega1,omega2\n");
    for (kind, r) in &ms.runs {
        let name = serde_json::to_value(kind).unwrap().as_str().unwrap().to_string();
        match r {
            Ok(g) => writeln!(
                runs,
                "{name},{},{},{},{},{},{},{}",
                g.converged,
                g.boundary_hit,
                num(g.energy),
                g.iterations,
                num(g.residual),
                opt(g.omega1),
                opt(g.omega2)
            )
            .unwrap(),
            Err(e) => {
                out.warnings.push(format!("{name}: {e}"));
                writeln!(runs, "{name},false,false,,,,,").unwrap();
            }
        }
    }
    out.write("runs.csv", &runs)?;

    if !opts.witness.is_empty() {
        let rows = witness_table(&cfg.params, &grid, masses, &opts.witness)?;
        let mut s = String::from("k,kinetic,interaction,energy\n");
        for r in rows {
            writeln!(s, "{},{},{},{}", num(r.k), num(r.kinetic), num(r.interaction), num(r.energy)).unwrap();
        }
        out.write("witness.csv", &s)?;
    }

    // the lowest converged run, or the lowest-energy run when none converged
    let pick = ms.best.or_else(|| {
        ms.runs
            .iter()
            .enumerate()
            .filter_map(|(i, (_, r))| r.as_ref().ok().map(|g| (i, g.energy)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    });
    let Some(idx) = pick else {
        return Err(RunError::Unconverged("every run of the flow failed".into()));
    };
    let (kind, res) = (&ms.runs[idx].0, ms.runs[idx].1.as_ref().unwrap());
    let certificate = match &report {
        Some(rep) => Some(verify_local_min(res, &spec, rep, 1e-9)?),
        None => None,
    };
    let file = snapshot(cfg, masses, alpha, Some(*kind), res, certificate);
    out.json("groundstate.json", &file)?;
    out.write("u1.csv", &field_to_csv(&res.u1))?;
    out.write("u2.csv", &field_to_csv(&res.u2))?;
    let mut hist = String::from("iteration,energy\n");
    for (i, e) in res.energy_history.iter().enumerate() {
        writeln!(hist, "{i},{}", num(*e)).unwrap();
    }
    out.write("energy.csv", &hist)?;
    println!(
        "energy {} omega ({}, {}) converged {} after {} iterations",
        num(res.energy),
        opt(res.omega1),
        opt(res.omega2),
        res.converged,
        res.iterations
    );
    Ok((!res.converged).then(|| format!("the flow did not converge (best run: {kind:?})")))
}

fn trace_csv(tr: &EvolutionTrace) -> String {
    let mut s = String::from("t,mass1,mass2,energy,dist\n");
    for i in 0..tr.times.len() {
        writeln!(
            s,
            "{},{},{},{},{}",
            num(tr.times[i]),
            num(tr.mass1[i]),
            num(tr.mass2[i]),
            num(tr.energy[i]),
            num(tr.orbit_distance[i])
        )
        .unwrap();
    }
    s
}

fn read_ground_state(path: &Path) -> RunResult<GroundStateFile> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn evolve(cfg: &RunConfig, opts: &RunOptions, out: &mut Outputs) -> Flag {
    let block = need(&cfg.evolve, "evolve", Subcommand::Evolve)?;
    let path = opts
        .ground_state
        .as_ref()
        .ok_or_else(|| RunError::Config("`evolve` needs --ground-state <groundstate.json>".into()))?;
    let file = read_ground_state(path)?;
    if file.params != cfg.params {
        return Err(RunError::Config("the ground state was computed for different params".into()));
    }
    let gs = file.to_result()?;
    let mut pert = block.perturbation;
    if let Some(seed) = opts.seed {
        pert.seed = seed;
    }
    let tr = stability_experiment(&cfg.params, &gs, &pert, block.t_end, block.dt, block.sample_every)?;
    out.write("trace.csv", &trace_csv(&tr))?;
    #[derive(Serialize)]
    struct Summary {
        perturbation: normgp_core::evolve::Perturbation,
        sup_distance: f64,
        max_mass_drift: f64,
        max_energy_drift: f64,
        split_steps: usize,
        blow_up: bool,
    }
    let summary = Summary {
        perturbation: pert,
        sup_distance: tr.sup_distance(),
        max_mass_drift: tr.max_mass_drift(),
        max_energy_drift: tr.max_energy_drift(),
        split_steps: tr.split_steps,
        blow_up: tr.blow_up,
    };
    out.json("evolve.json", &summary)?;
    println!(
        "sup orbit distance {} (delta {}), blow-up {}",
        num(summary.sup_distance),
        num(pert.delta),
        tr.blow_up
    );
    Ok(tr.blow_up.then(|| "the H1 norm exceeded 1e3 times its initial value".to_string()))
}

fn sweep(cfg: &RunConfig, opts: &RunOptions, out: &mut Outputs) -> Flag {
    let masses = need(&cfg.masses, "masses", Subcommand::SweepBeta)?;
    let block = need(&cfg.sweep, "sweep", Subcommand::SweepBeta)?;
    let grid = grid_of(cfg)?;
    let c = gn_constant(cfg.params.dim, cfg.params.p)?;
    let (_, l2) = eigenvalues(cfg, &grid)?;
    let uniform = uniform_beta_condition(&cfg.params, masses, c.value, l2)?;
    if !uniform.pass {
        let msg = format!("the masses violate the beta-uniform existence condition (margin {})", num(uniform.margin));
        if !opts.allow_partial {
            return Err(RunError::Config(msg));
        }
        out.warnings.push(msg);
    }
    let recs = beta_sweep(&cfg.params, masses, &block.betas, &grid, &cfg.solver)?;
    let mut s = String::from("beta,energy,omega1,omega2,overlap,holder_proxy,converged\n");
    for r in &recs {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(r.beta),
            num(r.result.energy),
            opt(r.omega1),
            opt(r.omega2),
            num(r.overlap),
            num(r.holder_proxy),
            r.result.converged
        )
        .unwrap();
    }
    out.write("sweep.csv", &s)?;
    let last = recs.last().expect("nonempty sweep");
    let lim: Option<LimitReport> = limit_profile_check(&SystemParams { beta: last.beta, ..cfg.params }, masses, last).ok();
    out.json("limit.json", &lim)?;
    out.write("w.csv", &field_to_csv(&last.w))?;
    let bad: Vec<String> = recs.iter().filter(|r| !r.result.converged).map(|r| num(r.beta)).collect();
    println!("{} sweep points, {} unconverged", recs.len(), bad.len());
    Ok((!bad.is_empty()).then(|| format!("the flow did not converge at beta = {}", bad.join(", "))))
}
