//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible solve, 3 budget
//! exhausted without proving optimality.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::formulation::{build, BuildOptions, Variant};
use crate::harness::{self, StudyConfig, POINTS_CSV_HEADER, ROWS_CSV_HEADER};
use crate::instancegen::{fig1_fixtures, generate, GenConfig};
use crate::lp_format::write_lp;
use crate::mblp::{solve_mblp_with, Budget, MblpStatus, SolveOptions};
use crate::net_model::Instance;
use crate::solution::{decode, validate, SlicePlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "nfvslice",
    version,
    about = "Exact NFV slicing: placement, multi-path routing and latency-bounded allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance as JSON.
    Generate(GenerateArgs),
    /// Solve an instance and print the decoded plan as JSON.
    Solve(SolveArgs),
    /// Check a plan against an instance and print the report.
    Validate(ValidateArgs),
    /// Run a seeded comparative study and write CSV and JSON reports.
    Experiment(ExperimentArgs),
    /// Write the bundled toy example instances.
    Fig1(Fig1Args),
}

#[derive(Args, Debug)]
struct GenFlags {
    /// JSON file with a full generator configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total number of network nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Number of cloud nodes that can host functions.
    #[arg(long)]
    clouds: Option<usize>,
    /// Probability of a link between each node pair.
    #[arg(long)]
    link_probability: Option<f64>,
    /// Size of the function catalogue.
    #[arg(long)]
    functions: Option<usize>,
    /// Functions per service chain.
    #[arg(long)]
    chain_length: Option<usize>,
    /// Data rate of every service.
    #[arg(long)]
    rate: Option<f64>,
    /// Path budget recorded in the instance.
    #[arg(long)]
    paths: Option<usize>,
}

impl GenFlags {
    fn config(&self) -> Result<GenConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&read(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
            None => GenConfig::default(),
        };
        set(&mut cfg.node_count, self.nodes);
        set(&mut cfg.cloud_count, self.clouds);
        set(&mut cfg.link_probability, self.link_probability);
        set(&mut cfg.function_count, self.functions);
        set(&mut cfg.chain_length, self.chain_length);
        set(&mut cfg.rate, self.rate);
        set(&mut cfg.path_budget, self.paths);
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    gen: GenFlags,
    /// Random seed; equal seeds give identical instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of services to draw.
    #[arg(long, default_value_t = 1)]
    services: usize,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Full,
    SinglePath,
    NoLatency,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => Variant::Full,
            VariantArg::SinglePath => Variant::SinglePath,
            VariantArg::NoLatency => Variant::NoLatency,
        }
    }
}

#[derive(Args, Debug)]
struct BudgetFlags {
    /// Maximum branch-and-bound nodes per solve.
    #[arg(long, default_value_t = 200_000)]
    node_limit: u64,
    /// Wall-clock seconds per solve; 0 disables the limit.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
}

impl BudgetFlags {
    fn budget(&self) -> Result<Budget, CliError> {
        if !(self.time_limit >= 0.0 && self.time_limit.is_finite()) {
            return Err(CliError::input("--time-limit must be a non-negative number"));
        }
        Ok(Budget {
            node_limit: self.node_limit,
            time_limit: (self.time_limit > 0.0).then(|| Duration::from_secs_f64(self.time_limit)),
        })
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    variant: VariantArg,
    /// Path budget per segment; defaults to the instance's.
    #[arg(long)]
    paths: Option<usize>,
    #[command(flatten)]
    budget: BudgetFlags,
    /// Order the rates of interchangeable path slots.
    #[arg(long)]
    rate_ordering: bool,
    /// Write one line per branch-and-bound node to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also export the model in LP format.
    #[arg(long)]
    lp: Option<PathBuf>,
    /// Plan output file; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Validation report output file (JSON); the text report goes to
    /// standard error regardless.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Instance JSON file.
    instance: PathBuf,
    /// Plan JSON file.
    plan: PathBuf,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StudyKind {
    Feasibility,
    Delay,
}

#[derive(Args, Debug)]
#[command(after_help = concat!(
    "Row CSV columns (one line per instance and variant):\n  ",
    "seed,service_count,variant,status,objective,feasible,post_check,activated,nfv_delay,communication_delay,total_delay,validation_failures,nodes,lp_solves,lp_iterations",
    "\n\nPoint CSV columns (one line per service count):\n  ",
    "service_count,instances,feasible_full,feasible_single_path,feasible_no_latency_post_check,budget_exceeded,mean_activated,mean_nfv_delay,mean_communication_delay,mean_total_delay",
    "\n\nInstance i of every point uses seed base-seed + i. Set NFVSLICE_WORKERS to choose the default worker count."
))]
struct ExperimentArgs {
    #[arg(value_enum)]
    study: StudyKind,
    #[command(flatten)]
    gen: GenFlags,
    /// Comma-separated service counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    services: Vec<usize>,
    /// Instances per service count.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Seed of the first instance.
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[command(flatten)]
    budget: BudgetFlags,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for `<stem>.json`, `<stem>_rows.csv` and `<stem>_points.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File name stem; defaults to the study name.
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Args, Debug)]
struct Fig1Args {
    /// Directory to write one JSON file per fixture; standard output when
    /// omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            let res = out.write_all(body.as_bytes()).and_then(|_| {
                if body.ends_with('\n') {
                    Ok(())
                } else {
                    out.write_all(b"\n")
                }
            });
            match res {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    Instance::from_json(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Fig1(a) => cmd_fig1(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<i32, CliError> {
    let cfg = GenConfig {
        seed: a.seed,
        service_count: a.services,
        ..a.gen.config()?
    };
    let inst = generate(&cfg).map_err(|e| CliError::input(e.to_string()))?;
    write_out(a.out.as_deref(), &inst.to_json())?;
    Ok(EXIT_OK)
}

fn cmd_solve(a: SolveArgs) -> Result<i32, CliError> {
    let inst = load_instance(&a.instance)?;
    let opts = BuildOptions {
        variant: a.variant.into(),
        path_budget: a.paths,
        rate_ordering: a.rate_ordering,
        simple_paths: true,
    };
    if a.paths == Some(0) {
        return Err(CliError::input("--paths must be at least 1"));
    }
    let model = build(&inst, &opts).map_err(|e| CliError::input(e.to_string()))?;
    if let Some(p) = &a.lp {
        write_out(Some(p), &write_lp(&model))?;
    }
    let budget = a.budget.budget()?;
    let mut trace_file = match &a.trace {
        Some(p) => Some(BufWriter::new(
            File::create(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        )),
        None => None,
    };
    let sol = solve_mblp_with(
        &model,
        SolveOptions {
            budget,
            trace: trace_file.as_mut().map(|w| w as &mut dyn Write),
        },
    )
    .map_err(|e| CliError {
        code: EXIT_INPUT,
        message: format!("solver failure: {e}"),
    })?;
    if let Some(mut w) = trace_file {
        w.flush()?;
    }
    eprintln!(
        "status={} objective={} nodes={} lp_solves={} lp_iterations={}",
        sol.status.as_str(),
        sol.objective,
        sol.stats.nodes,
        sol.stats.lp_solves,
        sol.stats.lp_iterations
    );
    if sol.has_solution() {
        let plan = decode(&model, &sol, &inst).map_err(|e| CliError::input(e.to_string()))?;
        let report = validate(&plan, &inst);
        eprint!("{report}");
        if let Some(p) = &a.report {
            write_out(Some(p), &report.to_json())?;
        }
        write_out(a.out.as_deref(), &plan.to_json())?;
    }
    Ok(match sol.status {
        MblpStatus::Optimal => EXIT_OK,
        MblpStatus::Infeasible => EXIT_INFEASIBLE,
        MblpStatus::BudgetExceeded => EXIT_BUDGET,
    })
}

fn cmd_validate(a: ValidateArgs) -> Result<i32, CliError> {
    let inst = load_instance(&a.instance)?;
    let plan =
        SlicePlan::from_json(&read(&a.plan)?).map_err(|e| CliError::input(format!("{}: {e}", a.plan.display())))?;
    let report = validate(&plan, &inst);
    if a.json {
        write_out(None, &report.to_json())?;
    } else {
        print!("{report}");
    }
    Ok(EXIT_OK)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<i32, CliError> {
    let cfg = StudyConfig {
        template: a.gen.config()?,
        service_counts: a.services,
        instances_per_point: a.instances,
        base_seed: a.base_seed,
        node_limit: a.budget.node_limit,
        time_limit_secs: a.budget.budget()?.time_limit.map(|d| d.as_secs_f64()),
        workers: a.workers,
    };
    let (report, default_stem) = match a.study {
        StudyKind::Feasibility => (harness::run_feasibility_study(&cfg), "feasibility"),
        StudyKind::Delay => (harness::run_delay_study(&cfg), "delay"),
    };
    let report = report.map_err(|e| CliError::input(e.to_string()))?;
    let stem = a.stem.as_deref().unwrap_or(default_stem);
    let paths = report.write_files(&a.out_dir, stem)?;
    debug_assert_eq!(report.rows_csv().lines().next(), Some(ROWS_CSV_HEADER));
    debug_assert_eq!(report.points_csv().lines().next(), Some(POINTS_CSV_HEADER));
    print!("{}", report.points_csv());
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    for n in &report.notes {
        eprintln!("note: {n}");
    }
    Ok(EXIT_OK)
}

fn cmd_fig1(a: Fig1Args) -> Result<i32, CliError> {
    let fixtures = fig1_fixtures();
    match a.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            for (name, inst) in fixtures {
                let path = dir.join(format!("{name}.json"));
                write_out(Some(&path), &inst.to_json())?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let map: serde_json::Map<String, serde_json::Value> = fixtures
                .into_iter()
                .map(|(name, inst)| {
                    (
                        name.to_string(),
                        serde_json::to_value(inst).expect("instance serializes"),
                    )
                })
                .collect();
            write_out(None, &serde_json::to_string_pretty(&map).expect("map serializes"))?;
        }
    }
    Ok(EXIT_OK)
}
