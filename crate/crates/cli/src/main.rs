//! `mpsoc-dse`: run mapping experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpsoc_dse::harness::{
    self, emit_results, exhaustive, run_metadata, Experiment, ExperimentSpec, Seeds, ShapeParams,
};
use mpsoc_dse::metrics::pusage;
use mpsoc_dse::model::{has_errors, mapping_space_size, validate, Problem, ProblemFile};
use mpsoc_dse::simulator::{check_deadlock_free, simulate, simulate_traced, CsvTrace, SimConfig};
use mpsoc_dse::{Error, Result};
use serde_json::json;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "mpsoc-dse",
    version,
    about = "Task-mapping exploration for heterogeneous MPSoCs"
)]
struct Cli {
    /// Base seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (run, exhaustive) or file (gen).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the simulator event trace as CSV (eval).
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// No progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for evaluations [default: available cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write CSV results.
    Run { experiment: PathBuf },
    /// Simulate every mapping of a small problem.
    Exhaustive {
        problem: PathBuf,
        /// Largest mapping space to enumerate.
        #[arg(long, default_value_t = harness::exhaustive::DEFAULT_CAP)]
        cap: u64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Generate a benchmark from a preset (`mp3like`, `a+b` merges) or a
    /// parameter file.
    Gen { shape: String },
    /// Simulate one mapping, given as comma-separated processor ids.
    Eval {
        problem: PathBuf,
        mapping: String,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Check a problem file.
    Validate { problem: PathBuf },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        let d = SimConfig::default();
        SimConfig {
            frames: self.frames.unwrap_or(d.frames),
            warmup_frames: self.warmup.unwrap_or(d.warmup_frames),
            ..d
        }
    }
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if error.is_input_error() { 2 } else { 3 };
        Failure { code, error }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    if cli.trace.is_some() && !matches!(cli.command, Command::Eval { .. }) {
        eprintln!("error: --trace is only supported by `eval`");
        return ExitCode::from(1);
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match &f.error {
                Error::InvalidProblem(diags) => {
                    for d in diags {
                        eprintln!("{d}");
                    }
                }
                e => eprintln!("error[{}]: {e}", e.code()),
            }
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Run { experiment } => run(cli, experiment),
        Command::Exhaustive { problem, cap, sim } => run_exhaustive(cli, problem, *cap, sim.config()),
        Command::Gen { shape } => gen(cli, shape),
        Command::Eval { problem, mapping, sim } => eval(cli, problem, mapping, sim.config()),
        Command::Validate { problem } => run_validate(problem),
    }
}

fn progress(cli: &Cli, msg: impl FnOnce() -> String) {
    if !cli.quiet {
        eprintln!("{}", msg());
    }
}

fn run(cli: &Cli, path: &Path) -> Result<u8, Failure> {
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(seed) = cli.seed {
        spec.seeds = Seeds::Base { base: seed };
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let problem = spec.load_problem(dir)?;
    let exp = Experiment::from_spec(&spec)?;
    let out_dir = match (&cli.out, &spec.outputs) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => dir.join(o),
        (None, None) => PathBuf::from("results"),
    };
    progress(cli, || {
        format!(
            "{} algorithms x {} seeds on {} tasks / {} processors",
            exp.algorithms.len(),
            exp.seeds.len(),
            problem.num_tasks(),
            problem.num_procs()
        )
    });
    let quiet = cli.quiet;
    let outcome = exp.run(&problem, &|r| {
        if !quiet {
            match (&r.error, r.objective) {
                (Some(e), _) => eprintln!("{} rep {}: failed: {e}", r.algorithm, r.rep),
                (None, Some(obj)) => eprintln!(
                    "{} rep {}: {obj} after {} generations, {} evaluations",
                    r.algorithm, r.rep, r.generations, r.evaluations
                ),
                (None, None) => {}
            }
        }
    });
    let meta = run_metadata(&problem, Some(&exp), &outcome.runs, json!({ "experiment_file": path }));
    emit_results(&out_dir, &outcome.runs, None, &meta)?;
    out!("{}", outcome.table.to_string().trim_end());
    out!("results in {}", out_dir.display());
    let failed = outcome.runs.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} runs failed");
        return Ok(3);
    }
    Ok(0)
}

fn run_exhaustive(cli: &Cli, path: &Path, cap: u64, sim: SimConfig) -> Result<u8, Failure> {
    let problem = Problem::load(path)?;
    progress(cli, || format!("enumerating {} mappings", mapping_space_size(&problem)));
    let report = exhaustive(&problem, &sim, cap)?;
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let extra = json!({
        "problem_file": path,
        "sim": sim,
        "pearson_r": report.pearson_r,
        "optimum": problem.format_mapping(&report.optimum),
        "optimum_objective": report.optimum_objective,
        "quartile": report.quartile,
    });
    emit_results(&out_dir, &[], Some(&report), &run_metadata(&problem, None, &[], extra))?;
    out!("mappings: {}", report.records.len());
    out!(
        "optimum: {} ({})",
        problem.format_mapping(&report.optimum),
        report.optimum_objective
    );
    match report.pearson_r {
        Some(r) => out!("pearson r (makespan, objective): {r:.4}"),
        None => out!("pearson r (makespan, objective): undefined"),
    }
    if let Some(q) = &report.quartile {
        out!(
            "lowest-makespan quartile ({} mappings): low-imbalance mean {}, high-imbalance mean {}",
            q.count,
            q.low_imbalance_mean,
            q.high_imbalance_mean
        );
    }
    out!("results in {}", out_dir.display());
    Ok(0)
}

fn gen(cli: &Cli, shape: &str) -> Result<u8, Failure> {
    let file = if shape.ends_with(".json") || Path::new(shape).is_file() {
        let mut params: ShapeParams =
            serde_json::from_str(&fs::read_to_string(shape)?).map_err(|e| Error::BadShape(e.to_string()))?;
        if let Some(seed) = cli.seed {
            for (i, app) in params.apps.iter_mut().enumerate() {
                app.seed = seed.wrapping_add(i as u64);
            }
        }
        harness::gen_benchmark(&params)?
    } else {
        if cli.seed.is_some() {
            eprintln!("warning: presets are fixed; --seed applies to parameter files only");
        }
        harness::preset(shape)?
    };
    let text = file.to_json();
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn eval(cli: &Cli, path: &Path, mapping: &str, sim: SimConfig) -> Result<u8, Failure> {
    let problem = Problem::load(path)?;
    let m = problem.parse_mapping(mapping)?;
    let r = match &cli.trace {
        Some(trace) => {
            let mut sink = CsvTrace::new(&problem, fs::File::create(trace)?);
            let r = simulate_traced(&problem, &m, &sim, &mut sink)?;
            sink.finish()?;
            r
        }
        None => simulate(&problem, &m, &sim)?,
    };
    let usage = pusage(&problem, &m);
    out!("mapping: {}", problem.format_mapping(&m));
    out!("deadlocked: {}", r.deadlocked);
    out!("fet: {}", r.fet);
    out!("tet: {}", r.tet);
    out!("window: {}", r.window);
    out!("events: {}", r.events);
    out!(
        "objective ({:?}): {}",
        problem.objective_kind(),
        r.objective(problem.objective_kind())
    );
    out!("makespan: {}", usage.makespan());
    out!("imbalance: {}", usage.imbalance());
    for p in problem.procs() {
        out!("usage {}: {}", problem.proc_name(p), usage.get(p));
    }
    Ok(0)
}

fn run_validate(path: &Path) -> Result<u8, Failure> {
    let file = ProblemFile::load(path)?;
    let mut diags = validate(&file);
    if has_errors(&diags) {
        for d in &diags {
            eprintln!("{d}");
        }
        return Ok(2);
    }
    let problem = Problem::from_file(file)?;
    diags.extend(check_deadlock_free(&problem));
    for d in &diags {
        eprintln!("{d}");
    }
    out!(
        "ok: {} apps, {} tasks, {} processors, {} mappings",
        problem.apps().len(),
        problem.num_tasks(),
        problem.num_procs(),
        mapping_space_size(&problem)
    );
    Ok(0)
}
