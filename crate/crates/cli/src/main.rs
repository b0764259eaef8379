//! `geosched` — generate, reduce, solve, check, and report on preemptive
//! scheduling instances and their covering reductions.
//!
//! Exit codes: 0 on success; 1 when well-formed input fails a feasibility
//! or consistency check; 2 on usage errors, including malformed JSON
//! (reported with line and column).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use geosched_core::audit::{
    audit_pipeline, brute_force_gsp, reports_to_csv, AuditParams, HeavySolver, RatioReport,
};
use geosched_core::gen::{generate, Family, GeneratorConfig};
use geosched_core::gsp::schedule_cost;
use geosched_core::jsonio::int53;
use geosched_core::r2c::{reduce_to_r2c, verify_cover, Cover};
use geosched_core::rounding::BETA_MAX;
use geosched_core::{Error, GspInstance, Schedule, Time};

#[derive(Parser)]
#[command(name = "geosched", version, about = "Scheduling through geometric covering")]
struct Cli {
    /// Cap the worker thread count (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random instance as JSON.
    Gen(GenArgs),
    /// Reduce an instance to its capacitated point-cover form.
    Reduce(ReduceArgs),
    /// Run the full pipeline: reduce, solve the LP, round, reconstruct.
    Solve(SolveArgs),
    /// Solve a tiny instance exactly and print `OPT <cost>`.
    Baseline(BaselineArgs),
    /// Check a solution file against its instance.
    Verify(VerifyArgs),
    /// Aggregate audit reports into CSV and Markdown tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Weight family: wflow, flow2, tardiness or mixed.
    #[arg(long, default_value_t = Family::Mixed)]
    family: Family,
    /// Number of jobs.
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    max_release: Time,
    #[arg(long, default_value_t = 4)]
    max_size: u64,
    #[arg(long, default_value_t = 5)]
    max_weight: u64,
    /// Allow tardiness deadlines before the release.
    #[arg(long)]
    allow_degenerate: bool,
    /// RNG seed; falls back to $GEOSCHED_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (stdout if omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Instance JSON.
    instance: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON.
    instance: PathBuf,
    /// LP threshold parameter; must stay in (0, 1/12].
    #[arg(long, default_value_t = BETA_MAX)]
    beta: f64,
    /// RNG seed; falls back to $GEOSCHED_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "greedy|exact", default_value_t = HeavySolver::Greedy)]
    heavy_solver: HeavySolver,
    /// Also write a full audit report (runs the exact oracles when the
    /// instance is small enough).
    #[arg(long, value_name = "PATH")]
    emit_audit: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Instance JSON.
    instance: PathBuf,
    /// Also write the optimal schedule as JSON.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instance JSON.
    instance: PathBuf,
    /// Solution JSON produced by `solve`.
    solution: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Audit JSON files (single reports or arrays of them).
    #[arg(required = true)]
    audits: Vec<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write a Markdown table.
    #[arg(long)]
    markdown: Option<PathBuf>,
}

/// Everything a `solve` run needs to be re-checked later.
#[derive(Serialize, Deserialize)]
struct SolutionFile {
    /// Chosen rectangles, by id.
    cover: Vec<String>,
    /// Per-job completion deadlines handed to EDF, in job order.
    deadlines: Vec<Time>,
    /// `(slot, job id)` assignments in time order.
    schedule: Vec<(Time, String)>,
    #[serde(with = "int53")]
    cover_weight: u128,
    #[serde(with = "int53")]
    schedule_cost: u128,
}

#[derive(Serialize, Deserialize)]
struct BaselineFile {
    schedule: Vec<(Time, String)>,
    #[serde(with = "int53")]
    cost: u128,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn check(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BadParameter(_) => Failure::usage(e.to_string()),
            _ => Failure::check(e.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            std::process::exit(2);
        }
    }
    if let Err(f) = run(cli.command) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let cfg = GeneratorConfig {
        family: args.family,
        jobs: args.n,
        max_release: args.max_release,
        max_size: args.max_size,
        max_weight: args.max_weight,
        allow_degenerate: args.allow_degenerate,
    };
    let inst = generate(&cfg, resolve_seed(args.seed)?)?;
    emit(args.out.as_deref(), &to_pretty(&inst)?)
}

fn cmd_reduce(args: ReduceArgs) -> Result<(), Failure> {
    let inst: GspInstance = load_json(&args.instance)?;
    let r2c = reduce_to_r2c(&inst)?;
    emit(args.out.as_deref(), &to_pretty(&r2c)?)
}

fn cmd_solve(args: SolveArgs) -> Result<(), Failure> {
    let inst: GspInstance = load_json(&args.instance)?;
    let params = AuditParams {
        beta: args.beta,
        seed: resolve_seed(args.seed)?,
        heavy_solver: args.heavy_solver,
        oracles: args.emit_audit.is_some(),
    };
    let outcome = audit_pipeline(&inst, &params)?;
    if let Some(path) = &args.emit_audit {
        fs::write(path, to_pretty(&outcome.report)?)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }

    let r2c = reduce_to_r2c(&inst)?;
    let solution = SolutionFile {
        cover: outcome.cover.iter().map(|&r| r2c.rects[r].id.clone()).collect(),
        deadlines: outcome.deadlines.clone(),
        schedule: name_slots(&inst, &outcome.schedule),
        cover_weight: outcome.report.cover_weight,
        schedule_cost: outcome.report.schedule_cost,
    };
    emit(args.out.as_deref(), &to_pretty(&solution)?)?;
    if args.out.is_some() {
        println!(
            "cover weight {}, schedule cost {}",
            outcome.report.cover_weight, outcome.report.schedule_cost
        );
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), Failure> {
    let inst: GspInstance = load_json(&args.instance)?;
    let (schedule, cost) = brute_force_gsp(&inst)?;
    println!("OPT {cost}");
    if let Some(path) = &args.out {
        let file = BaselineFile { schedule: name_slots(&inst, &schedule), cost };
        fs::write(path, to_pretty(&file)?)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let inst: GspInstance = load_json(&args.instance)?;
    let sol: SolutionFile = load_json(&args.solution)?;
    let r2c = reduce_to_r2c(&inst)?;

    let mut cover = Cover::new();
    for id in &sol.cover {
        cover.insert(r2c.rect_index(id)?);
    }
    let report = verify_cover(&r2c, &cover);
    if !report.feasible {
        let p = report.first_violation.unwrap_or(0);
        return Err(Failure::check(format!(
            "cover leaves point {p} short by {}",
            -report.slacks[p]
        )));
    }
    if report.total_weight != sol.cover_weight {
        return Err(Failure::check(format!(
            "cover weight {} does not match the claimed {}",
            report.total_weight, sol.cover_weight
        )));
    }

    let mut schedule = Schedule::new();
    for (t, id) in &sol.schedule {
        schedule.assign(*t, inst.job_index(id)?);
    }
    let cost = schedule_cost(&inst, &schedule)?;
    if cost != sol.schedule_cost {
        return Err(Failure::check(format!(
            "schedule cost {cost} does not match the claimed {}",
            sol.schedule_cost
        )));
    }
    if cost > report.total_weight {
        return Err(Failure::check(format!(
            "schedule cost {cost} exceeds the cover weight {}",
            report.total_weight
        )));
    }
    println!("ok: cover weight {}, schedule cost {cost}", report.total_weight);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let mut reports: Vec<RatioReport> = Vec::new();
    for path in &args.audits {
        // each file holds either one report or an array of them
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        match serde_json::from_str::<Vec<RatioReport>>(&text) {
            Ok(batch) => reports.extend(batch),
            Err(_) => reports.push(
                serde_json::from_str(&text)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
            ),
        }
    }

    let csv = reports_to_csv(&reports);
    match &args.csv {
        Some(path) => fs::write(path, &csv)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.markdown {
        fs::write(path, markdown_table(&reports))
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    if args.csv.is_some() || args.markdown.is_some() {
        let ratios: Vec<f64> = reports.iter().filter_map(|r| r.sched_over_opt).collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
        let max = ratios.iter().copied().fold(0.0, f64::max);
        println!(
            "{} reports; {} with exact optima (mean ratio {mean:.3}, max {max:.3})",
            reports.len(),
            ratios.len()
        );
    }
    Ok(())
}

fn markdown_table(reports: &[RatioReport]) -> String {
    let mut out = String::from(
        "| jobs | points | rects | lp value | cover | schedule | opt | sched/opt |\n\
         |---:|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in reports {
        let opt = r.opt_gsp.map_or(String::new(), |v| v.to_string());
        let ratio = r.sched_over_opt.map_or(String::new(), |v| format!("{v:.3}"));
        writeln!(
            out,
            "| {} | {} | {} | {:.3} | {} | {} | {opt} | {ratio} |",
            r.jobs, r.points, r.rects, r.lp_value, r.cover_weight, r.schedule_cost
        )
        .unwrap();
    }
    out
}

/// Per-slot assignments with job ids instead of indices.
fn name_slots(inst: &GspInstance, schedule: &Schedule) -> Vec<(Time, String)> {
    schedule.slots().iter().map(|(&t, &j)| (t, inst.jobs()[j].id.clone())).collect()
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("GEOSCHED_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("GEOSCHED_SEED must be an integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: invalid JSON: {e}", path.display())))
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::check(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
