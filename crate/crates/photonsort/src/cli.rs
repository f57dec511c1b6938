//! `photonsort` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use photonsort_core::apps::sweeps::{log_spaced, mismatch_chain};
use photonsort_core::apps::time_reversal::{mode_reversal_overlap, reversed_input, second_scatter_overlap, time_reversal_fit};
use photonsort_core::apps::ns_gate::{ns_gate_with_tolerance, NS_TOLERANCE};
use photonsort_core::apps::bell_table;
use photonsort_core::modal::{sorting_report, SortingReport};
use photonsort_core::objective::ObjectiveKind;
use photonsort_core::optimize::{default_seeds, gradient_flow, iterative_filter_with_tol, time_reversal_defect, OptimizationTrace};
use photonsort_core::oracle::CascadeSystem;
use photonsort_core::{EmitterChain, Pulse};
use serde::Serialize;
use serde_json::{json, Value};

use crate::checks;
use crate::config::{Method, Objective, RunConfig};
use crate::error::{AppError, AppResult, EXIT_USAGE, EXIT_VALIDATION};
use crate::io::{self, Manifest};
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "photonsort", version, about = "Two-photon sorting with chirally coupled emitters")]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Format of the summary printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    /// Grid points (overrides `grid.n`).
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    /// Grid half-width in units of Γ₁ (overrides `grid.k_max`).
    #[arg(long, global = true)]
    pub k_max: Option<f64>,
    #[arg(long, global = true)]
    pub rng_seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimizerArgs {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub dtau: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also start from the built-in seeds and keep the best result.
    #[arg(long)]
    pub multi_seed: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PulseArgs {
    /// Input pulse CSV (`k,re,im`); optimized from the config if absent.
    #[arg(long, value_name = "FILE")]
    pub pulse: Option<PathBuf>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the input pulse for the configured emitter chain.
    Optimize {
        #[command(flatten)]
        optimizer: OptimizerArgs,
    },
    /// Sorting report for a pulse (the configured seed by default).
    Report {
        #[arg(long, value_name = "FILE")]
        pulse: Option<PathBuf>,
        /// Also write the two-photon output amplitude.
        #[arg(long)]
        dump_two_photon: bool,
    },
    /// Lorentzian inputs of varying width through the first emitter.
    SweepLorentzian {
        #[arg(long, default_value_t = 0.02)]
        sigma_min: f64,
        #[arg(long, default_value_t = 10.0)]
        sigma_max: f64,
        #[arg(long, default_value_t = 80)]
        points: usize,
    },
    /// Optimal fidelity against the number of identical emitters.
    SweepEmitters {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        ne: Vec<usize>,
        #[command(flatten)]
        optimizer: OptimizerArgs,
    },
    /// Two emitters with coupling ratio Γ₂/Γ₁ and detuning Δ of the second.
    SweepMismatch {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.95,1.0")]
        ratios: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.5,-0.2,0,0.2,0.5")]
        detunings: Vec<f64>,
        #[command(flatten)]
        optimizer: OptimizerArgs,
    },
    /// Lossy sorting: reuse the lossless optimum or re-optimize at each β.
    SweepBeta {
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.95,0.9")]
        betas: Vec<f64>,
        /// Objective used when re-optimizing; both by default.
        #[arg(long, value_enum)]
        kind: Option<LossyObjective>,
        #[command(flatten)]
        source: PulseArgs,
    },
    /// Nonlinear-sign gate fidelity and phase.
    NsGate {
        #[arg(long, default_value_t = NS_TOLERANCE)]
        tolerance: f64,
        #[command(flatten)]
        source: PulseArgs,
    },
    /// Bell-state analyzer success table for a sorting fidelity.
    BellTable {
        #[arg(long)]
        fidelity: f64,
    },
    /// Delay of the self-time-reversal after the first emitter.
    TimeReversal {
        #[command(flatten)]
        source: PulseArgs,
    },
    /// Master-equation fidelities with emitter dephasing.
    Dephasing {
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.1")]
        gamma_p: Vec<f64>,
        #[arg(long, default_value_t = photonsort_core::oracle::DEFAULT_DT)]
        dt: f64,
        #[command(flatten)]
        source: PulseArgs,
    },
    /// Unitarity, gradient and master-equation self-checks.
    Validate {
        /// Smaller grids and fewer samples; under a minute.
        #[arg(long)]
        fast: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossyObjective {
    Total,
    Conditional,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Optimize { .. } => "optimize",
            Command::Report { .. } => "report",
            Command::SweepLorentzian { .. } => "sweep-lorentzian",
            Command::SweepEmitters { .. } => "sweep-emitters",
            Command::SweepMismatch { .. } => "sweep-mismatch",
            Command::SweepBeta { .. } => "sweep-beta",
            Command::NsGate { .. } => "ns-gate",
            Command::BellTable { .. } => "bell-table",
            Command::TimeReversal { .. } => "time-reversal",
            Command::Dephasing { .. } => "dephasing",
            Command::Validate { .. } => "validate",
        }
    }
}

/// What a command produced.
struct Outcome {
    summary: Value,
    /// CSV rendering of the main table, if any.
    table: Option<String>,
    files: Vec<PathBuf>,
    failed: bool,
}

impl Outcome {
    fn new(summary: Value) -> Self {
        Outcome { summary, table: None, files: Vec::new(), failed: false }
    }
}

struct Ctx {
    cfg: RunConfig,
    dir: PathBuf,
}

/// Parses `args` (including the program name), runs and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, &argv) {
        Ok(0) => 0,
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(cli: &Cli) -> AppResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.grid_n {
        cfg.grid.n = n;
    }
    if let Some(k) = cli.k_max {
        cfg.grid.k_max = k;
    }
    if let Some(s) = cli.rng_seed {
        cfg.rng_seed = s;
    }
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    let opt = match &cli.command {
        Command::Optimize { optimizer }
        | Command::SweepEmitters { optimizer, .. }
        | Command::SweepMismatch { optimizer, .. } => Some(optimizer),
        Command::SweepBeta { source, .. }
        | Command::NsGate { source, .. }
        | Command::TimeReversal { source }
        | Command::Dephasing { source, .. } => Some(&source.optimizer),
        _ => None,
    };
    if let Some(o) = opt {
        let c = &mut cfg.optimizer;
        c.method = o.method.unwrap_or(c.method);
        c.objective = o.objective.unwrap_or(c.objective);
        c.dtau = o.dtau.unwrap_or(c.dtau);
        c.max_iters = o.max_iters.unwrap_or(c.max_iters);
        c.tol = o.tol.unwrap_or(c.tol);
        c.multi_seed |= o.multi_seed;
    }
    // flags bypass serde, so re-check
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli, argv: &[String]) -> AppResult<i32> {
    parallel::init_threads()?;
    let cfg = resolve_config(&cli)?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
    let ctx = Ctx { cfg, dir };
    let name = cli.command.name();
    let out = match &cli.command {
        Command::Optimize { .. } => cmd_optimize(&ctx)?,
        Command::Report { pulse, dump_two_photon } => cmd_report(&ctx, pulse.as_deref(), *dump_two_photon)?,
        Command::SweepLorentzian { sigma_min, sigma_max, points } => cmd_lorentzian(&ctx, *sigma_min, *sigma_max, *points)?,
        Command::SweepEmitters { ne, .. } => cmd_emitters(&ctx, ne)?,
        Command::SweepMismatch { ratios, detunings, .. } => cmd_mismatch(&ctx, ratios, detunings)?,
        Command::SweepBeta { betas, kind, source } => cmd_beta(&ctx, betas, *kind, source)?,
        Command::NsGate { tolerance, source } => cmd_ns_gate(&ctx, *tolerance, source)?,
        Command::BellTable { fidelity } => cmd_bell(&ctx, *fidelity)?,
        Command::TimeReversal { source } => cmd_time_reversal(&ctx, source)?,
        Command::Dephasing { gamma_p, dt, source } => cmd_dephasing(&ctx, gamma_p, *dt, source)?,
        Command::Validate { fast } => cmd_validate(&ctx, *fast)?,
    };
    let mut manifest = Manifest::new(name, argv, ctx.cfg.to_toml(), out.summary.clone());
    manifest.files = out.files.clone();
    manifest.write(&ctx.dir)?;
    match (cli.output, &out.table) {
        (OutputFormat::Csv, Some(t)) => print!("{t}"),
        (OutputFormat::Csv, None) => print!("{}", flatten_csv(&out.summary)),
        (OutputFormat::Json, _) => println!("{}", serde_json::to_string_pretty(&out.summary)?),
    }
    if out.failed {
        eprintln!("validation failed; see {}", ctx.dir.join("manifest.json").display());
        return Ok(EXIT_VALIDATION);
    }
    Ok(0)
}

/// `key,value` lines for scalar leaves of a JSON object.
fn flatten_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::Array(_) => {}
            Value::String(s) => out.push((prefix.into(), s.clone())),
            other => out.push((prefix.into(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"]).expect("in-memory write");
    for (k, x) in rows {
        w.write_record([k, x]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn table_csv<T: Serialize>(rows: &[T]) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf8"))
}

/// Writes the rows to `dir/name` and returns the CSV text.
fn emit_table<T: Serialize>(dir: &Path, name: &str, rows: &[T], files: &mut Vec<PathBuf>) -> AppResult<String> {
    let path = dir.join(name);
    io::write_csv_rows(&path, rows)?;
    files.push(path);
    table_csv(rows)
}

/// The configured seed, followed by the built-in seeds when several are asked for.
fn seeds(cfg: &RunConfig, multi: bool) -> AppResult<Vec<Pulse>> {
    let mut v = vec![cfg.seed()?];
    if multi {
        for s in default_seeds(cfg.grid()?)? {
            if !v.contains(&s) {
                v.push(s);
            }
        }
    }
    Ok(v)
}

fn run_optimizer(cfg: &RunConfig, chain: &EmitterChain) -> AppResult<(OptimizationTrace, Value)> {
    let o = &cfg.optimizer;
    match o.method {
        Method::Flow => {
            let seeds = seeds(cfg, o.multi_seed)?;
            let params = cfg.flow_params();
            if seeds.len() == 1 {
                Ok((gradient_flow(chain, &seeds[0], &params)?, json!({ "seeds": 1 })))
            } else {
                let m = parallel::multi_seed(chain, &seeds, &params)?;
                let info = json!({
                    "seeds": seeds.len(),
                    "best_seed": m.best_index,
                    "final_objectives": m.final_objectives,
                    "spread": m.spread(),
                });
                Ok((m.best, info))
            }
        }
        Method::Filter => {
            if o.objective != Objective::Plain {
                return Err(AppError::Config("the iterative filter minimizes the plain error only".into()));
            }
            Ok((iterative_filter_with_tol(chain, &cfg.seed()?, o.max_iters, o.tol)?, json!({ "seeds": 1 })))
        }
    }
}

fn report_json(r: &SortingReport, p: &Pulse) -> Value {
    let pops = r.takagi.populations();
    json!({
        "n1": r.n1,
        "n2": r.n2,
        "c1_sq": r.c1 * r.c1,
        "c2_sq": r.c2.norm_sqr(),
        "c2": [r.c2.re, r.c2.im],
        "error": r.error,
        "fidelity": r.fidelity,
        "total_fidelity": r.total_fidelity,
        "conditional_fidelity": r.conditional_fidelity,
        "leading_population": r.leading_population(),
        "takagi_populations": &pops[..pops.len().min(8)],
        "time_reversal_defect": time_reversal_defect(p),
    })
}

/// Writes pulse, output mode and leading Takagi mode next to `report.json`.
fn write_report(dir: &Path, r: &SortingReport, p: &Pulse, files: &mut Vec<PathBuf>) -> AppResult<Value> {
    files.extend(io::write_pulse_pair(dir, "input", p)?);
    files.extend(io::write_pulse_pair(dir, "output_mode", &r.psi_out)?);
    let (_, f1) = r.takagi.leading();
    files.extend(io::write_pulse_pair(dir, "leading_mode", f1)?);
    let v = report_json(r, p);
    let path = dir.join("report.json");
    io::write_json(&path, &v)?;
    files.push(path);
    Ok(v)
}

fn cmd_optimize(ctx: &Ctx) -> AppResult<Outcome> {
    let chain = ctx.cfg.chain()?;
    let (trace, seeds) = run_optimizer(&ctx.cfg, &chain)?;
    let mut files = io::write_trace(&ctx.dir, &trace)?;
    let p = &trace.final_pulse;
    let r = sorting_report(&chain, p)?;
    let report = write_report(&ctx.dir, &r, p, &mut files)?;
    files.extend(io::write_pulse_pair(&ctx.dir, "optimal", p)?);
    let summary = json!({
        "iterations": trace.last().iter,
        "converged": trace.converged,
        "objective": trace.final_objective(),
        "seeds": seeds,
        "report": report,
    });
    Ok(Outcome { files, ..Outcome::new(summary) })
}

fn cmd_report(ctx: &Ctx, pulse: Option<&Path>, dump: bool) -> AppResult<Outcome> {
    let chain = ctx.cfg.chain()?;
    let p = match pulse {
        Some(f) => io::read_pulse_csv(f)?.normalize()?,
        None => ctx.cfg.seed()?,
    };
    let r = sorting_report(&chain, &p)?;
    let mut files = Vec::new();
    let v = write_report(&ctx.dir, &r, &p, &mut files)?;
    if dump {
        let f = ctx.dir.join("two_photon_output.csv");
        io::write_two_photon(&f, &r.output)?;
        files.push(f);
    }
    Ok(Outcome { files, ..Outcome::new(v) })
}

/// Pulse from `--pulse`, or the optimum for the configured chain.
fn source_pulse(ctx: &Ctx, chain: &EmitterChain, src: &PulseArgs, files: &mut Vec<PathBuf>) -> AppResult<(Pulse, Value)> {
    match &src.pulse {
        Some(f) => {
            let p = io::read_pulse_csv(f)?;
            if p.grid() != &ctx.cfg.grid()? {
                return Err(AppError::Config(format!("{} is not on the configured grid", f.display())));
            }
            Ok((p.normalize()?, json!({ "file": f })))
        }
        None => {
            let (trace, _) = run_optimizer(&ctx.cfg, chain)?;
            files.extend(io::write_pulse_pair(&ctx.dir, "optimal", &trace.final_pulse)?);
            let info = json!({ "optimized": true, "iterations": trace.last().iter, "fidelity": trace.final_fidelity() });
            Ok((trace.final_pulse, info))
        }
    }
}

#[derive(Serialize)]
struct LorentzianCsv {
    sigma: f64,
    c1_sq: f64,
    c2_sq: f64,
    error: f64,
    n: usize,
    k_max: f64,
}

fn cmd_lorentzian(ctx: &Ctx, lo: f64, hi: f64, points: usize) -> AppResult<Outcome> {
    if !(lo > 0.0 && hi > lo && points >= 2) {
        return Err(AppError::Usage("need 0 < sigma-min < sigma-max and at least 2 points".into()));
    }
    let e = ctx.cfg.chain()?.emitters()[0];
    let s = parallel::sweep_lorentzian(&e, &log_spaced(lo, hi, points))?;
    let rows: Vec<LorentzianCsv> = s
        .rows
        .iter()
        .map(|r| LorentzianCsv { sigma: r.sigma, c1_sq: r.c1_sq, c2_sq: r.c2_sq, error: r.error(), n: r.n, k_max: r.k_max })
        .collect();
    let mut files = Vec::new();
    let table = emit_table(&ctx.dir, "lorentzian.csv", &rows, &mut files)?;
    let coincidences: Vec<Value> = s
        .coincidences
        .iter()
        .map(|c| json!({ "sigma_zero": c.sigma_zero, "c2_sq": c.c2_sq, "nearest_c1_max": c.nearest_c1_max, "coincides": c.coincides }))
        .collect();
    let summary = json!({
        "points": rows.len(),
        "min_error": { "sigma": s.min_error.0, "error": s.min_error.1 },
        "c2_zeros": s.c2_zeros.iter().map(|&i| s.rows[i].sigma).collect::<Vec<_>>(),
        "c1_maxima": s.c1_maxima.iter().map(|&i| s.rows[i].sigma).collect::<Vec<_>>(),
        "coincidences": coincidences,
        "all_zeros_coincide": s.all_zeros_coincide(),
    });
    Ok(Outcome { table: Some(table), files, ..Outcome::new(summary) })
}

#[derive(Serialize)]
struct EmitterCsv {
    ne: usize,
    fidelity: f64,
    leading_population: f64,
    converged: bool,
    best_seed: usize,
    spread: f64,
}

fn cmd_emitters(ctx: &Ctx, ne: &[usize]) -> AppResult<Outcome> {
    if ne.is_empty() || ne.contains(&0) {
        return Err(AppError::Usage("emitter counts must be positive".into()));
    }
    let seeds = seeds(&ctx.cfg, true)?;
    let rows = parallel::sweep_emitters(ne, &seeds, &ctx.cfg.flow_params());
    let mut files = Vec::new();
    for r in &rows {
        if let Some(p) = &r.pulse {
            files.extend(io::write_pulse_pair(&ctx.dir.join("pulses"), &format!("ne_{}", r.ne), p)?);
        }
    }
    let csv_rows: Vec<EmitterCsv> = rows
        .iter()
        .map(|r| EmitterCsv {
            ne: r.ne,
            fidelity: r.fidelity,
            leading_population: r.leading_population,
            converged: r.converged,
            best_seed: r.best_seed,
            spread: r.spread,
        })
        .collect();
    let table = emit_table(&ctx.dir, "emitters.csv", &csv_rows, &mut files)?;
    let failed_cells = rows.iter().filter(|r| r.pulse.is_none()).count();
    let summary = json!({ "rows": serde_json::to_value(&csv_rows)?, "failed_cells": failed_cells });
    Ok(Outcome { table: Some(table), files, failed: failed_cells > 0, ..Outcome::new(summary) })
}

#[derive(Serialize)]
struct MismatchCsv {
    ratio: f64,
    detuning: f64,
    fidelity: f64,
    converged: bool,
    warm_started: bool,
}

fn cmd_mismatch(ctx: &Ctx, ratios: &[f64], detunings: &[f64]) -> AppResult<Outcome> {
    for &r in ratios {
        mismatch_chain(r, 0.0).map_err(|e| AppError::Usage(format!("ratio {r}: {e}")))?;
    }
    let seeds = seeds(&ctx.cfg, true)?;
    let rows = parallel::sweep_mismatch(ratios, detunings, &seeds, &ctx.cfg.flow_params());
    let csv_rows: Vec<MismatchCsv> = rows
        .iter()
        .map(|r| MismatchCsv {
            ratio: r.ratio,
            detuning: r.detuning,
            fidelity: r.fidelity,
            converged: r.converged,
            warm_started: r.warm_started,
        })
        .collect();
    let mut files = Vec::new();
    let table = emit_table(&ctx.dir, "mismatch.csv", &csv_rows, &mut files)?;
    let failed_cells = rows.iter().filter(|r| r.pulse.is_none()).count();
    let summary = json!({ "rows": serde_json::to_value(&csv_rows)?, "failed_cells": failed_cells });
    Ok(Outcome { table: Some(table), files, failed: failed_cells > 0, ..Outcome::new(summary) })
}

#[derive(Serialize)]
struct BetaCsv {
    beta: f64,
    objective: &'static str,
    reuse_total: f64,
    reuse_conditional: f64,
    optimized_total: f64,
    optimized_conditional: f64,
    converged: bool,
}

fn cmd_beta(ctx: &Ctx, betas: &[f64], kind: Option<LossyObjective>, src: &PulseArgs) -> AppResult<Outcome> {
    if betas.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
        return Err(AppError::Usage("beta values must lie in (0, 1]".into()));
    }
    let base = ctx.cfg.chain()?.with_beta(1.0)?;
    let mut files = Vec::new();
    let (reference, source) = source_pulse(ctx, &base, src, &mut files)?;
    let kinds: Vec<(ObjectiveKind, &'static str)> = match kind {
        Some(LossyObjective::Total) => vec![(ObjectiveKind::TotalMinusSurvival, "total")],
        Some(LossyObjective::Conditional) => vec![(ObjectiveKind::Conditional, "conditional")],
        None => vec![(ObjectiveKind::TotalMinusSurvival, "total"), (ObjectiveKind::Conditional, "conditional")],
    };
    let mut csv_rows = Vec::new();
    let mut failed_cells = 0;
    for (k, label) in kinds {
        let params = photonsort_core::optimize::FlowParams { kind: k, ..ctx.cfg.flow_params() };
        for r in parallel::sweep_beta(&base, &reference, betas, k, &params) {
            match &r.pulse {
                Some(p) => files.extend(io::write_pulse_pair(&ctx.dir.join("pulses"), &format!("beta_{}_{label}", r.beta), p)?),
                None => failed_cells += 1,
            }
            csv_rows.push(BetaCsv {
                beta: r.beta,
                objective: label,
                reuse_total: r.reference_total,
                reuse_conditional: r.reference_conditional,
                optimized_total: r.total,
                optimized_conditional: r.conditional,
                converged: r.converged,
            });
        }
    }
    let table = emit_table(&ctx.dir, "beta.csv", &csv_rows, &mut files)?;
    let summary = json!({ "reference": source, "rows": serde_json::to_value(&csv_rows)?, "failed_cells": failed_cells });
    Ok(Outcome { table: Some(table), files, failed: failed_cells > 0, ..Outcome::new(summary) })
}

fn cmd_ns_gate(ctx: &Ctx, tolerance: f64, src: &PulseArgs) -> AppResult<Outcome> {
    let chain = ctx.cfg.chain()?;
    let mut files = Vec::new();
    let (p, source) = source_pulse(ctx, &chain, src, &mut files)?;
    let r = ns_gate_with_tolerance(&chain, &p, f64::INFINITY)?;
    let failed = !(r.deviation() <= tolerance);
    let summary = json!({
        "source": source,
        "fidelity": r.fidelity,
        "phase": r.phase,
        "phase_over_pi": r.phase / std::f64::consts::PI,
        "c1_sq": r.c1_sq,
        "c2_sq": r.c2_sq,
        "pipeline": [r.pipeline.re, r.pipeline.im],
        "closed_form": [r.closed_form.re, r.closed_form.im],
        "deviation": r.deviation(),
        "tolerance": tolerance,
        "agrees": !failed,
    });
    let path = ctx.dir.join("ns_gate.json");
    io::write_json(&path, &summary)?;
    files.push(path);
    Ok(Outcome { files, failed, ..Outcome::new(summary) })
}

#[derive(Serialize)]
struct BellCsv {
    input: &'static str,
    clicks: String,
    probability: f64,
}

fn cmd_bell(ctx: &Ctx, fidelity: f64) -> AppResult<Outcome> {
    let rows: Vec<BellCsv> = bell_table(fidelity)
        .map_err(|e| AppError::Usage(e.to_string()))?
        .iter()
        .map(|r| BellCsv { input: r.input.label(), clicks: r.clicks_label(), probability: r.probability })
        .collect();
    let mut files = Vec::new();
    let table = emit_table(&ctx.dir, "bell_table.csv", &rows, &mut files)?;
    let summary = json!({ "fidelity": fidelity, "rows": serde_json::to_value(&rows)? });
    Ok(Outcome { table: Some(table), files, ..Outcome::new(summary) })
}

fn cmd_time_reversal(ctx: &Ctx, src: &PulseArgs) -> AppResult<Outcome> {
    let chain = ctx.cfg.chain()?;
    let mut files = Vec::new();
    let (p, source) = source_pulse(ctx, &chain, src, &mut files)?;
    let e = chain.emitters()[0];
    let fit = time_reversal_fit(&e, &p)?;
    files.extend(io::write_pulse_pair(&ctx.dir, "reversed_input", &reversed_input(&p, fit.t_d))?);
    let summary = json!({
        "source": source,
        "t_d": fit.t_d,
        "overlap": fit.overlap,
        "second_scatter_overlap": second_scatter_overlap(&e, &p, fit.t_d)?,
        "mode_reversal_overlap": mode_reversal_overlap(&chain, &p, fit.t_d)?,
    });
    let path = ctx.dir.join("time_reversal.json");
    io::write_json(&path, &summary)?;
    files.push(path);
    Ok(Outcome { files, ..Outcome::new(summary) })
}

#[derive(Serialize)]
struct DephasingCsv {
    gamma_p: f64,
    #[serde(rename = "F1")]
    f1: f64,
    #[serde(rename = "F2")]
    f2: f64,
}

fn cmd_dephasing(ctx: &Ctx, gamma_p: &[f64], dt: f64, src: &PulseArgs) -> AppResult<Outcome> {
    if gamma_p.iter().any(|g| !(*g >= 0.0)) {
        return Err(AppError::Usage("gamma-p values must be non-negative".into()));
    }
    let chain = ctx.cfg.chain()?;
    let mut files = Vec::new();
    let (p, source) = source_pulse(ctx, &chain, src, &mut files)?;
    let sys = CascadeSystem::for_sorter(chain, p)?.with_dt(dt);
    let rows: Vec<DephasingCsv> = parallel::dephasing_sweep(&sys, gamma_p)?
        .into_iter()
        .map(|d| DephasingCsv { gamma_p: d.gamma_p, f1: d.f1, f2: d.f2 })
        .collect();
    let table = emit_table(&ctx.dir, "dephasing.csv", &rows, &mut files)?;
    let summary = json!({ "source": source, "dt": dt, "rows": serde_json::to_value(&rows)? });
    Ok(Outcome { table: Some(table), files, ..Outcome::new(summary) })
}

fn cmd_validate(ctx: &Ctx, fast: bool) -> AppResult<Outcome> {
    let seed = ctx.cfg.rng_seed;
    let (grid, states, pulses, stride) = if fast {
        (photonsort_core::Grid::fast(), 20, 2, 16)
    } else {
        (ctx.cfg.grid()?, 50, 5, 8)
    };
    let u = checks::unitarity(grid, states, seed)?;
    let mut all = if fast {
        // k_max = 16 truncates ~1e-4 of the bound part
        let mut v = checks::unitarity_checks(&u);
        v[0] = checks::Check::below("unitarity: norm deviation", u.max_deviation, 1e-3);
        v
    } else {
        checks::unitarity_checks(&u)
    };
    all.extend(checks::gradients(grid, pulses, stride, seed)?);
    let (oc, comparisons) = checks::oracle_checks(fast)?;
    all.extend(oc);
    let failed = all.iter().any(|c| !c.passed);
    let rows = serde_json::to_value(&all)?;
    let summary = json!({
        "fast": fast,
        "grid": { "n": grid.n(), "k_max": grid.k_max() },
        "unitarity": u,
        "oracle": comparisons,
        "checks": rows,
        "passed": !failed,
    });
    let mut files = Vec::new();
    let table = emit_table(&ctx.dir, "validate.csv", &all, &mut files)?;
    let path = ctx.dir.join("validate.json");
    io::write_json(&path, &summary)?;
    files.push(path);
    Ok(Outcome { summary, table: Some(table), files, failed })
}
