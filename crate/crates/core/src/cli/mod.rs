//! Command-line driver: configuration, orchestration and tabular output.

pub mod config;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::dynamics::{dirichlet_evolve, DirichletBasis, FreePropagator};
use crate::error::Error;
use crate::phase_space::{make_grid, PhaseSpaceGrid, SpatialGrid};
use crate::quantization::wigner_transform;
use crate::semiclassical::{escape_sweep, EpsPolicy, EscapeSweep, SweepSpec};
use crate::symbols::build_mollifier;
use crate::zeno::{check_study_inputs, empirically_converging, product_formula_state, zeno_row, ProjectorPolicy};

use config::{default_config, ConfigError, ExperimentConfig, Format};
use output::{provenance, write_f64_le, write_json, Cell, FieldSidecar, ResultTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;
pub const EXIT_GUARD_TRIPPED: i32 = 4;

pub const DEFAULT_BUDGET: f64 = 1e10;

#[derive(Debug, Parser)]
#[command(name = "qzeno", version, about = "Quantum Zeno product formulas and their semiclassical hierarchy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config; the reference experiment when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set physical.hbar=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Largest predicted work accepted before refusing.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Survival probabilities and distance to the Dirichlet limit over the N list.
    Zeno,
    /// Sup-norms, supports and vanishing verdicts of the symbol hierarchy over time.
    Hierarchy,
    /// Wigner functions of the evolved state at the listed times.
    Wigner,
    /// Invariant suite; exit 0 iff every check passes.
    Verify,
    /// Escape-time thresholds over the configured cutoff widths.
    Sweep,
    /// Print the resolved config.
    ShowConfig,
}

/// Failure of a subcommand with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: EXIT_INVALID_CONFIG, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_FAILED, message: format!("i/o: {e}") }
    }
}

/// Error raised before any computation started.
fn refusal(e: Error) -> Failure {
    let code = match e {
        Error::InvalidParameter(_) | Error::NotPowerOfTwo(_) | Error::NotNormalized(_) => EXIT_INVALID_CONFIG,
        _ => EXIT_REFUSED,
    };
    Failure { code, message: e.to_string() }
}

fn check_budget(cost: f64, budget: f64) -> Result<(), Failure> {
    if cost > budget {
        return Err(refusal(Error::CostGuard(format!("predicted work {cost:.3e} exceeds budget {budget:.3e}"))));
    }
    log::info!("predicted work {cost:.3e} (budget {budget:.3e})");
    Ok(())
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    budget: f64,
}

impl Context {
    fn csv(&self) -> bool {
        self.cfg.output.formats.contains(&Format::Csv)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn grid(&self) -> Result<SpatialGrid, Failure> {
        Ok(self.cfg.grid()?)
    }

    fn write_table(&self, name: &str, table: &ResultTable) -> Result<(), Failure> {
        if self.csv() {
            table.write(&self.path(name))?;
        }
        Ok(())
    }
}

/// Parses nothing: runs an already parsed command line and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_INVALID_CONFIG;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path, &cli.set)?,
        None => {
            let text = serde_json::to_string(&default_config()).expect("default config serializes");
            ExperimentConfig::from_json(&text, &cli.set)?
        }
    };
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    if !(cli.budget > 0.0) {
        return Err(Failure { code: EXIT_INVALID_CONFIG, message: "--budget must be positive".into() });
    }
    let cfg = load_config(cli)?;
    if cli.command == Command::ShowConfig {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(EXIT_OK);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&out)?;
    let ctx = Context { cfg, out, budget: cli.budget };
    match cli.command {
        Command::Zeno => run_zeno(&ctx),
        Command::Hierarchy => run_hierarchy(&ctx),
        Command::Wigner => run_wigner(&ctx),
        Command::Verify => run_verify(&ctx),
        Command::Sweep => run_sweep(&ctx),
        Command::ShowConfig => unreachable!("handled above"),
    }
}

/// Work units of one propagation step on `m` points.
fn fft_cost(m: usize) -> f64 {
    m as f64 * (m as f64).log2().max(1.0)
}

pub fn zeno_cost(cfg: &ExperimentConfig) -> f64 {
    let steps: usize = cfg.schedule.n_list.iter().sum();
    4.0 * cfg.schedule.times.len() as f64 * steps as f64 * fft_cost(cfg.grid.points)
}

fn run_zeno(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    check_budget(zeno_cost(cfg), ctx.budget)?;
    let params = cfg.params()?;
    let region = cfg.region()?;
    let policy = cfg.projector_policy();
    let psi = cfg.initial_state().map_err(refusal)?;
    check_study_inputs(&psi, &cfg.schedule.n_list).map_err(refusal)?;
    let basis = DirichletBasis::for_state(region, *psi.grid(), &params, &psi).map_err(refusal)?;
    let grid = ctx.grid()?;
    let eps: Vec<f64> = match policy {
        ProjectorPolicy::Sharp => vec![0.0],
        ProjectorPolicy::Mollified { eps } => cfg
            .schedule
            .n_list
            .iter()
            .map(|&n| build_mollifier(region, n, eps, &grid).map(|m| m.eps()))
            .collect::<crate::Result<_>>()
            .map_err(refusal)?,
    };
    let mut header = provenance(cfg, "zeno", &eps);
    header.push(format!("dirichlet_modes: {}", basis.len()));
    let columns = ["t", "N", "p_N", "e_N", "reg_residual", "eps", "wall_ms"];
    let mut table = ResultTable::new(header, &columns);
    let mut failure = None;
    let mut trends = Vec::new();
    'times: for &t in &cfg.schedule.times {
        let limit = match dirichlet_evolve(&psi, &basis, t) {
            Ok(l) => l,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let results: Vec<_> =
            cfg.schedule.n_list.par_iter().map(|&n| zeno_row(&psi, region, n, t, policy, &params, &limit)).collect();
        let mut rows = Vec::new();
        for r in results {
            match r {
                Ok(row) => {
                    let wall = if cfg.output.record_timing { Cell::Float(row.wall_ms) } else { Cell::Empty };
                    table.push(vec![
                        t.into(),
                        row.n.into(),
                        row.survival.into(),
                        row.zeno_error.into(),
                        row.regularization_residual.into(),
                        row.eps.into(),
                        wall,
                    ]);
                    rows.push(row);
                }
                Err(e) => {
                    failure = Some(e);
                    break 'times;
                }
            }
        }
        trends.push((t, empirically_converging(&rows)));
        println!("t = {t}: e_N decreasing over N list: {} (empirical)", empirically_converging(&rows));
    }
    if let Some(e) = failure {
        table.push_failure(&e.to_string());
        ctx.write_table("zeno.csv", &table)?;
        eprintln!("error: {e}");
        return Ok(EXIT_GUARD_TRIPPED);
    }
    ctx.write_table("zeno.csv", &table)?;
    Ok(EXIT_OK)
}

fn sweep_spec(cfg: &ExperimentConfig, eps: EpsPolicy) -> Result<SweepSpec, Failure> {
    let n_list = cfg.hierarchy_n_list();
    if n_list.is_empty() {
        return Err(refusal(Error::InvalidParameter("no N in the list is small enough for the hierarchy".into())));
    }
    Ok(SweepSpec {
        region: cfg.region()?,
        n_list,
        times: cfg.schedule.sweep_times.values(),
        xis: cfg.schedule.xi_list.clone(),
        order: cfg.schedule.order,
        eps,
    })
}

/// Runs one sweep per `N`, so a guard tripping late keeps the finished rows.
fn sweep_by_n(spec: &SweepSpec, ctx: &Context, grid: &SpatialGrid) -> (EscapeSweep, Option<Error>) {
    let params = ctx.cfg.params().expect("validated");
    let mut all = EscapeSweep { rows: Vec::new(), thresholds: Vec::new() };
    for &n in &spec.n_list {
        let sub = SweepSpec { n_list: vec![n], ..spec.clone() };
        match escape_sweep(&sub, &params, grid, f64::INFINITY) {
            Ok(s) => {
                all.rows.extend(s.rows);
                all.thresholds.extend(s.thresholds);
            }
            Err(e) => return (all, Some(e)),
        }
    }
    (all, None)
}

const SWEEP_COLUMNS: [&str; 11] =
    ["N", "j", "xi", "t", "eps", "sup_norm", "support_lo", "support_hi", "verdict", "T_xi", "T_xi_N"];
const THRESHOLD_COLUMNS: [&str; 7] = ["N", "j", "xi", "eps", "t_star", "T_xi_N", "t_star_minus_T_xi_N"];

fn push_sweep(rows: &mut ResultTable, thresholds: &mut ResultTable, sweep: &EscapeSweep) {
    for r in &sweep.rows {
        rows.push(vec![
            r.n.into(),
            r.j.into(),
            r.xi.into(),
            r.t.into(),
            r.eps.into(),
            r.sup_norm.into(),
            r.support.map(|s| s.0).into(),
            r.support.map(|s| s.1).into(),
            r.verdict.into(),
            r.escape.map(|e| e.0).into(),
            r.escape.map(|e| e.1).into(),
        ]);
    }
    for th in &sweep.thresholds {
        let offset = match (th.t_star, th.predicted) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        thresholds.push(vec![
            th.n.into(),
            th.j.into(),
            th.xi.into(),
            th.eps.into(),
            th.t_star.into(),
            th.predicted.into(),
            offset.into(),
        ]);
    }
}

fn resolved_eps(spec: &SweepSpec, grid: &SpatialGrid) -> Result<Vec<f64>, Failure> {
    let fixed = match spec.eps {
        EpsPolicy::Fixed(e) => Some(e),
        EpsPolicy::Auto => None,
    };
    spec.n_list
        .iter()
        .map(|&n| build_mollifier(spec.region, n, fixed, grid).map(|m| m.eps()))
        .collect::<crate::Result<_>>()
        .map_err(refusal)
}

fn finish_sweep(
    ctx: &Context,
    stem: &str,
    mut rows: ResultTable,
    mut thresholds: ResultTable,
    failure: Option<Error>,
    consistent: bool,
) -> Result<i32, Failure> {
    if let Some(e) = failure {
        rows.push_failure(&e.to_string());
        thresholds.push_failure(&e.to_string());
        ctx.write_table(&format!("{stem}.csv"), &rows)?;
        ctx.write_table(&format!("{stem}_thresholds.csv"), &thresholds)?;
        eprintln!("error: {e}");
        return Ok(EXIT_GUARD_TRIPPED);
    }
    ctx.write_table(&format!("{stem}.csv"), &rows)?;
    ctx.write_table(&format!("{stem}_thresholds.csv"), &thresholds)?;
    if !consistent {
        eprintln!("error: a coefficient survives past its predicted escape time");
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}

fn run_hierarchy(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    let grid = ctx.grid()?;
    let spec = sweep_spec(cfg, cfg.eps_policy())?;
    check_budget(spec.cost(&grid), ctx.budget)?;
    let eps = resolved_eps(&spec, &grid)?;
    let header = provenance(cfg, "hierarchy", &eps);
    let mut rows = ResultTable::new(header.clone(), &SWEEP_COLUMNS);
    let mut thresholds = ResultTable::new(header, &THRESHOLD_COLUMNS);
    let (sweep, failure) = sweep_by_n(&spec, ctx, &grid);
    push_sweep(&mut rows, &mut thresholds, &sweep);
    finish_sweep(ctx, "hierarchy", rows, thresholds, failure, sweep.all_consistent())
}

fn run_sweep(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    let grid = ctx.grid()?;
    if cfg.schedule.sweep_eps.is_empty() {
        return Err(Failure { code: EXIT_INVALID_CONFIG, message: "schedule.sweep_eps is empty".into() });
    }
    let specs = cfg
        .schedule
        .sweep_eps
        .iter()
        .map(|&e| sweep_spec(cfg, EpsPolicy::Fixed(e)))
        .collect::<Result<Vec<_>, _>>()?;
    let cost: f64 = specs.iter().map(|s| s.cost(&grid)).sum();
    check_budget(cost, ctx.budget)?;
    let mut eps = Vec::new();
    for s in &specs {
        eps.extend(resolved_eps(s, &grid)?);
    }
    eps.dedup();
    let header = provenance(cfg, "sweep", &eps);
    let mut rows = ResultTable::new(header.clone(), &SWEEP_COLUMNS);
    let mut thresholds = ResultTable::new(header, &THRESHOLD_COLUMNS);
    let mut consistent = true;
    for s in &specs {
        let (sweep, failure) = sweep_by_n(s, ctx, &grid);
        push_sweep(&mut rows, &mut thresholds, &sweep);
        consistent &= sweep.all_consistent();
        if failure.is_some() {
            return finish_sweep(ctx, "sweep", rows, thresholds, failure, consistent);
        }
    }
    finish_sweep(ctx, "sweep", rows, thresholds, None, consistent)
}

pub fn wigner_cost(cfg: &ExperimentConfig) -> f64 {
    let m = cfg.grid.points as f64;
    cfg.schedule.times.len() as f64 * m * (m / 2.0) * cfg.grid.xi_points as f64
}

fn wigner_grid(cfg: &ExperimentConfig, grid: SpatialGrid) -> Result<PhaseSpaceGrid, Failure> {
    let band = std::f64::consts::PI * cfg.physical.hbar / grid.spacing();
    let xi = make_grid(band, cfg.grid.xi_points).map_err(refusal)?;
    Ok(PhaseSpaceGrid::new(grid, xi))
}

fn run_wigner(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    if !cfg.output.formats.contains(&Format::Binary) {
        return Err(Failure { code: EXIT_INVALID_CONFIG, message: "wigner dumps need \"binary\" in output.formats".into() });
    }
    check_budget(wigner_cost(cfg), ctx.budget)?;
    let params = cfg.params()?;
    let region = cfg.region()?;
    let grid = ctx.grid()?;
    let pgrid = wigner_grid(cfg, grid)?;
    let psi = cfg.initial_state().map_err(refusal)?;
    let sha = cfg.sha256();
    write_f64_le(&ctx.path("wigner_x.bin"), &pgrid.x_axis().nodes())?;
    write_f64_le(&ctx.path("wigner_xi.bin"), &pgrid.xi_axis().nodes())?;
    let eps = match (cfg.schedule.wigner_n, cfg.projector_policy()) {
        (Some(n), ProjectorPolicy::Mollified { eps }) => vec![build_mollifier(region, n, eps, &grid).map_err(refusal)?.eps()],
        _ => vec![0.0],
    };
    let mut index = ResultTable::new(provenance(cfg, "wigner", &eps), &["t", "file", "integral", "min"]);
    for (k, &t) in cfg.schedule.times.iter().enumerate() {
        let state = match cfg.schedule.wigner_n {
            None => FreePropagator::new(grid, &params, t).apply(&psi),
            Some(n) => {
                let projector = match cfg.projector_policy() {
                    ProjectorPolicy::Sharp => crate::dynamics::Projector::Sharp(region),
                    ProjectorPolicy::Mollified { eps } => {
                        crate::dynamics::Projector::Mollified(build_mollifier(region, n, eps, &grid).map_err(refusal)?)
                    }
                };
                product_formula_state(&psi, n, t, &projector, &params)
            }
        };
        let field = state.and_then(|s| wigner_transform(&s, &params, &pgrid));
        let w = match field {
            Ok(w) => w,
            Err(e) => {
                index.push_failure(&e.to_string());
                ctx.write_table("wigner.csv", &index)?;
                eprintln!("error: {e}");
                return Ok(EXIT_GUARD_TRIPPED);
            }
        };
        let values: Vec<f64> = w.values().iter().map(|z| z.re).collect();
        let name = format!("wigner_t{k}.bin");
        write_f64_le(&ctx.path(&name), &values)?;
        let sidecar = FieldSidecar {
            data: name.clone(),
            dtype: "float64-le",
            shape: [pgrid.shape().0, pgrid.shape().1],
            x_axis: "wigner_x.bin".into(),
            xi_axis: "wigner_xi.bin".into(),
            t,
            measurements: cfg.schedule.wigner_n,
            hbar: params.hbar(),
            mass: params.mass(),
            config_sha256: sha.clone(),
            version: env!("CARGO_PKG_VERSION"),
        };
        write_json(&ctx.path(&format!("wigner_t{k}.json")), &sidecar)?;
        let integral = values.iter().sum::<f64>() * grid.spacing() * pgrid.xi_axis().spacing();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        index.push(vec![t.into(), Cell::Text(name), integral.into(), min.into()]);
    }
    ctx.write_table("wigner.csv", &index)?;
    Ok(EXIT_OK)
}

fn run_verify(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    let checks = match verify::run_suite(cfg) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_GUARD_TRIPPED);
        }
    };
    let mut table = ResultTable::new(provenance(cfg, "verify", &[]), &["check", "value", "tolerance", "passed"]);
    let mut all = true;
    for c in &checks {
        let ok = c.passed();
        all &= ok;
        println!("{} {} {} (tol {})", if ok { "PASS" } else { "FAIL" }, c.name, output::format_float(c.value), c.tolerance);
        table.push(vec![Cell::Text(c.name.into()), c.value.into(), c.tolerance.into(), ok.into()]);
    }
    ctx.write_table("verify.csv", &table)?;
    Ok(if all { EXIT_OK } else { EXIT_FAILED })
}

/// Writes the reference config to `path`.
pub fn write_default_config(path: &Path) -> std::io::Result<()> {
    write_json(path, &default_config())
}
