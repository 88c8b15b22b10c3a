use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rmfs_core::allocation::{verify_allocation, AllocationOptions, ObjectiveMode, Status, Workload};
use rmfs_core::bench::{allocation_row, run_bench_suite, run_method, BenchSuite, Method, DEFAULT_TIME_LIMIT_S};
use rmfs_core::gen::{generate_instance, GenParams};
use rmfs_core::io::{
    append_results_csv, instance_to_json, read_allocation, read_instance, read_solution, write_allocation, write_results,
    write_results_csv, write_sequence, SequenceRecord, SolutionFile,
};
use rmfs_core::plan::derive_processing_plan;
use rmfs_core::sequencing::{derive_sequencing_instance, pool_greedy_sequence, solve_sequencing, SequenceResult, SequencingMode};
use rmfs_core::verify::verify_sequence;
use rmfs_milp::SolveParams;

const EXIT_USAGE: u8 = 64;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rmfs", version, about = "Rack allocation and sequencing for pickers in a robotic mobile fulfilment system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance
    Gen(GenArgs),
    /// Assign orders and racks to pickers
    Allocate(AllocateArgs),
    /// Sequence the racks of one picker
    Sequence(SequenceArgs),
    /// Check an allocation or sequence file
    Verify(VerifyArgs),
    /// Run a benchmark suite
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    products: usize,
    #[arg(long)]
    orders: usize,
    #[arg(long)]
    racks: usize,
    /// Orders per picker, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    capacities: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    name: Option<String>,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Exact,
    Spb,
    Pio,
    Portfolio,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ObjectiveArg {
    Racks,
    Visits,
}

#[derive(Args, Debug)]
struct AllocateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    /// Pickers kept integer per PIO stage
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    tau: u64,
    /// Let several pickers draw from one rack
    #[arg(long)]
    shared_racks: bool,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Racks)]
    objective: ObjectiveArg,
    /// Replace fixed capacities by a minimum total number of orders
    #[arg(long)]
    min_total: Option<usize>,
    /// Keep racks that hold no demanded product
    #[arg(long)]
    no_prune: bool,
    #[arg(long, env = "RMFS_TIME_LIMIT", default_value_t = DEFAULT_TIME_LIMIT_S)]
    time_limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allocation JSON output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Results CSV to append to; the row goes to stdout when absent
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SequenceArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    allocation: PathBuf,
    #[arg(long, default_value_t = 0)]
    picker: usize,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    bins: u64,
    #[arg(long, default_value_t = 0)]
    revisits: u32,
    /// One bin and no dedicated bin
    #[arg(long)]
    single_bin: bool,
    /// Solve with single-unit orders in place
    #[arg(long)]
    no_theorem2: bool,
    /// Build a sequence greedily with unlimited revisits instead of solving
    #[arg(long, conflicts_with_all = ["single_bin", "no_theorem2"])]
    pool_greedy: bool,
    #[arg(long, env = "RMFS_TIME_LIMIT", default_value_t = DEFAULT_TIME_LIMIT_S)]
    time_limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sequence JSON output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the bin sets and bin of every order
    #[arg(long)]
    plan: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    /// Allocation was built with a minimum total instead of fixed capacities
    #[arg(long)]
    min_total: Option<usize>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Suite JSON
    #[arg(long)]
    suite: PathBuf,
    /// Results CSV; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Overrides the suite's time limit
    #[arg(long, env = "RMFS_TIME_LIMIT")]
    time_limit: Option<f64>,
}

type Failure = Box<dyn std::error::Error>;

fn usage(msg: impl Into<String>) -> Failure {
    Box::new(UsageError(msg.into()))
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn check_time_limit(t: f64) -> Result<(), Failure> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("time limit must be positive, got {t}")))
    }
}

fn gen(args: GenArgs) -> Result<u8, Failure> {
    let mut params = GenParams::default();
    if let Some(mu) = args.mu {
        params.mu = mu;
    }
    let mut inst = generate_instance(args.seed, args.products, args.orders, args.racks, &args.capacities, &params)?;
    if let Some(name) = args.name {
        inst.name = name;
    }
    let text = instance_to_json(&inst);
    match args.out {
        Some(path) => fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn allocate(args: AllocateArgs) -> Result<u8, Failure> {
    check_time_limit(args.time_limit)?;
    if args.objective == ObjectiveArg::Visits && !args.shared_racks {
        return Err(usage("--objective visits needs --shared-racks"));
    }
    let inst = read_instance(&args.instance)?;
    let options = AllocationOptions {
        shared_racks: args.shared_racks,
        objective: match args.objective {
            ObjectiveArg::Racks => ObjectiveMode::RackCount,
            ObjectiveArg::Visits => ObjectiveMode::RackVisits,
        },
        workload: args.min_total.map_or(Workload::FixedCapacities, Workload::MinTotal),
        prune: !args.no_prune,
        ..AllocationOptions::default()
    };
    let tau = args.tau as usize;
    let method = match args.method {
        MethodArg::Exact => Method::Exact,
        MethodArg::Spb => Method::Spb,
        MethodArg::Pio => Method::Pio(tau),
        MethodArg::Portfolio => Method::Portfolio(tau),
    };
    let result = run_method(&inst, &options, method, args.time_limit)?;
    let row = allocation_row(&inst, &method.to_string(), &result);
    match &args.csv {
        Some(path) => append_results_csv(&[row], path)?,
        None => write_results(&[row], io::stdout())?,
    }
    if let (Some(path), Some(alloc)) = (&args.out, &result.allocation) {
        write_allocation(alloc, path)?;
    }
    Ok(match (&result.allocation, result.status) {
        (Some(_), _) => 0,
        (None, Status::Infeasible) => EXIT_INFEASIBLE,
        (None, _) => EXIT_UNKNOWN,
    })
}

fn sequence(args: SequenceArgs) -> Result<u8, Failure> {
    check_time_limit(args.time_limit)?;
    let inst = read_instance(&args.instance)?;
    let alloc = read_allocation(&args.allocation)?;
    let report = verify_allocation(&inst, &AllocationOptions {
        shared_racks: !alloc.draws.is_empty(),
        ..AllocationOptions::default()
    }, &alloc);
    if !report.ok() {
        return Err(format!("allocation does not fit the instance:\n{report}").into());
    }
    let seq = derive_sequencing_instance(&inst, &alloc, args.picker, args.bins as usize)?;
    let (mode, result, nodes, time_s) = if args.pool_greedy {
        let sol = pool_greedy_sequence(&seq)?;
        (SequencingMode::UNBOUNDED, SequenceResult::Feasible(sol), 0, 0.0)
    } else {
        let mode = SequencingMode {
            revisits: Some(args.revisits),
            single_bin: args.single_bin,
        };
        let params = SolveParams {
            seed: args.seed,
            ..SolveParams::with_time_limit(args.time_limit)
        };
        let out = solve_sequencing(&seq, mode, &params, !args.no_theorem2)?;
        (mode, out.result, out.nodes, out.time_s)
    };
    match result {
        SequenceResult::Feasible(solution) => {
            println!(
                "feasible picker={} slots={} racks={} nodes={nodes} time_s={time_s:.2}",
                args.picker,
                solution.slots(),
                solution.distinct_racks()
            );
            if args.plan {
                let plan = derive_processing_plan(&seq, &solution);
                for step in &plan.steps {
                    let ids = |v: &Vec<usize>| v.iter().map(|&o| seq.order_ids[o]).collect::<Vec<_>>();
                    println!(
                        "position {} rack {}: same-rack {:?} close {:?} open {:?} stay {:?}",
                        step.position,
                        seq.rack_ids[step.rack],
                        ids(&step.delta),
                        ids(&step.theta),
                        ids(&step.phi),
                        ids(&step.omega)
                    );
                }
            }
            if let Some(path) = &args.out {
                let record = SequenceRecord {
                    picker: args.picker,
                    mode,
                    instance: seq,
                    solution,
                };
                write_sequence(&record, path)?;
            }
            Ok(0)
        }
        SequenceResult::ProvenInfeasible => {
            println!("infeasible picker={} nodes={nodes} time_s={time_s:.2}", args.picker);
            Ok(EXIT_INFEASIBLE)
        }
        SequenceResult::Unknown => {
            println!("TL picker={} nodes={nodes} time_s={time_s:.2}", args.picker);
            Ok(EXIT_UNKNOWN)
        }
    }
}

fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let inst = read_instance(&args.instance)?;
    let report = match read_solution(&args.solution, &inst)? {
        SolutionFile::Allocation(alloc) => {
            let options = AllocationOptions {
                shared_racks: !alloc.draws.is_empty(),
                workload: args.min_total.map_or(Workload::FixedCapacities, Workload::MinTotal),
                ..AllocationOptions::default()
            };
            verify_allocation(&inst, &options, &alloc)
        }
        SolutionFile::Sequence(rec) => verify_sequence(&rec.instance, rec.mode, &rec.solution),
    };
    print!("{report}");
    Ok(if report.ok() { 0 } else { 1 })
}

fn bench(args: BenchArgs) -> Result<u8, Failure> {
    let text = fs::read_to_string(&args.suite).map_err(|e| format!("{}: {e}", args.suite.display()))?;
    let mut suite: BenchSuite = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.suite.display())))?;
    if let Some(t) = args.time_limit {
        check_time_limit(t)?;
        suite.time_limit_s = t;
    }
    let rows = run_bench_suite(&suite, args.jobs as usize)?;
    match &args.out {
        Some(path) => write_results_csv(&rows, path)?,
        None => write_results(&rows, io::stdout())?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Allocate(a) => allocate(a),
        Command::Sequence(a) => sequence(a),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is::<UsageError>() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
