//! Batch runs over generated or stored instances, one results row per cell.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rmfs_milp::SolveParams;
use serde::Deserialize;
use thiserror::Error;

use crate::allocation::{AllocationError, AllocationOptions, AllocationResult, ObjectiveMode, Status};
use crate::gen::{generate_instance, GenError, GenParams};
use crate::heuristics::{portfolio, run_approach, Approach, HeuristicParams};
use crate::instance::Instance;
use crate::io::{read_instance, IoError, ResultRow};
use crate::sequencing::{derive_sequencing_instance, solve_sequencing, SequenceResult, SequencingError, SequencingMode};

pub const DEFAULT_TIME_LIMIT_S: f64 = 300.0;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("suite has no {0}")]
    Empty(&'static str),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("time limit must be positive, got {0}")]
    BadTimeLimit(f64),
    #[error("bin counts must be at least 1")]
    ZeroBins,
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Sequencing(#[from] SequencingError),
}

/// Allocation method as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Spb,
    Pio(usize),
    Portfolio(usize),
}

impl FromStr for Method {
    type Err = BenchError;

    /// `exact`, `spb`, `pio`, `pio:<tau>`, `portfolio` or `portfolio:<tau>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::UnknownMethod(s.to_string());
        let (name, tau) = match s.split_once(':') {
            Some((n, t)) => (n, t.parse::<usize>().ok().filter(|&t| t >= 1).ok_or_else(bad)?),
            None => (s, 1),
        };
        match name {
            "exact" if tau == 1 && !s.contains(':') => Ok(Method::Exact),
            "spb" if !s.contains(':') => Ok(Method::Spb),
            "pio" => Ok(Method::Pio(tau)),
            "portfolio" => Ok(Method::Portfolio(tau)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::Spb => write!(f, "spb"),
            Method::Pio(t) => write!(f, "pio:{t}"),
            Method::Portfolio(t) => write!(f, "portfolio:{t}"),
        }
    }
}

/// Runs one allocation method. The portfolio races exact, SPB and PIO and
/// reports the best run.
pub fn run_method(
    instance: &Instance,
    options: &AllocationOptions,
    method: Method,
    time_limit_s: f64,
) -> Result<AllocationResult, AllocationError> {
    let params = HeuristicParams::new(time_limit_s);
    match method {
        Method::Exact => run_approach(instance, options, Approach::Exact, &params),
        Method::Spb => run_approach(instance, options, Approach::Spb, &params),
        Method::Pio(tau) => run_approach(instance, options, Approach::Pio(tau), &params),
        Method::Portfolio(tau) => {
            let result = portfolio(instance, options, &[Approach::Exact, Approach::Spb, Approach::Pio(tau)], &params)?;
            match result.best {
                Some(i) => Ok(result.runs[i].1.clone()),
                None => Ok(result.runs.into_iter().next().expect("three runs").1),
            }
        }
    }
}

pub fn allocation_row(instance: &Instance, method: &str, result: &AllocationResult) -> ResultRow {
    ResultRow {
        instance: instance.name.clone(),
        pickers: instance.num_pickers(),
        capacities: instance.capacities.clone(),
        method: method.to_string(),
        total_time_s: result.metrics.total_time_s,
        best_time_s: result.metrics.incumbent_time_s,
        ub: result.metrics.ub,
        lb: result.metrics.lb,
        flb: result.metrics.flb,
        nodes: result.metrics.nodes,
        status: result.status.label().to_string(),
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged, deny_unknown_fields)]
pub enum InstanceSpec {
    File { path: PathBuf },
    Generated {
        products: usize,
        orders: usize,
        racks: usize,
        capacities: Vec<usize>,
    },
}

/// Instances crossed with methods and, for `sequence`, with bins and revisits.
/// Generated instances are drawn once per seed.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchSuite {
    pub instances: Vec<InstanceSpec>,
    pub methods: Vec<String>,
    #[serde(default)]
    pub bins: Vec<usize>,
    #[serde(default)]
    pub revisits: Vec<u32>,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub shared_racks: bool,
}

fn default_time_limit() -> f64 {
    DEFAULT_TIME_LIMIT_S
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellKind {
    Allocate(Method),
    Sequence { bins: usize, revisits: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    instance: usize,
    kind: CellKind,
}

impl BenchSuite {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.instances.is_empty() {
            return Err(BenchError::Empty("instances"));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Empty("methods"));
        }
        if !(self.time_limit_s > 0.0) {
            return Err(BenchError::BadTimeLimit(self.time_limit_s));
        }
        if self.bins.contains(&0) {
            return Err(BenchError::ZeroBins);
        }
        for m in &self.methods {
            if m != "sequence" {
                m.parse::<Method>()?;
            }
        }
        Ok(())
    }

    fn load(&self) -> Result<Vec<Instance>, BenchError> {
        let seeds = if self.seeds.is_empty() { vec![0] } else { self.seeds.clone() };
        let mut out = Vec::new();
        for spec in &self.instances {
            match spec {
                InstanceSpec::File { path } => out.push(read_instance(path)?),
                InstanceSpec::Generated {
                    products,
                    orders,
                    racks,
                    capacities,
                } => {
                    for &seed in &seeds {
                        out.push(generate_instance(seed, *products, *orders, *racks, capacities, &GenParams::default())?);
                    }
                }
            }
        }
        Ok(out)
    }

    fn cells(&self, instances: usize) -> Vec<Cell> {
        let bins = if self.bins.is_empty() { vec![2] } else { self.bins.clone() };
        let revisits = if self.revisits.is_empty() { vec![0] } else { self.revisits.clone() };
        let mut cells = Vec::new();
        for instance in 0..instances {
            for m in &self.methods {
                if m == "sequence" {
                    for &b in &bins {
                        for &r in &revisits {
                            cells.push(Cell {
                                instance,
                                kind: CellKind::Sequence { bins: b, revisits: r },
                            });
                        }
                    }
                } else {
                    cells.push(Cell {
                        instance,
                        kind: CellKind::Allocate(m.parse().expect("validated")),
                    });
                }
            }
        }
        cells
    }

    fn options(&self) -> AllocationOptions {
        AllocationOptions {
            shared_racks: self.shared_racks,
            objective: ObjectiveMode::RackCount,
            ..AllocationOptions::default()
        }
    }
}

fn sequence_row(
    instance: &Instance,
    allocation: &AllocationResult,
    bins: usize,
    revisits: u32,
    time_limit_s: f64,
) -> Result<ResultRow, BenchError> {
    let started = Instant::now();
    let mut row = ResultRow {
        instance: instance.name.clone(),
        pickers: instance.num_pickers(),
        capacities: instance.capacities.clone(),
        method: format!("sequence-B{bins}-M{revisits}"),
        total_time_s: 0.0,
        best_time_s: None,
        ub: None,
        lb: None,
        flb: None,
        nodes: 0,
        status: String::new(),
    };
    let Some(alloc) = &allocation.allocation else {
        row.status = match allocation.status {
            Status::Infeasible => "infeasible",
            _ => "TL",
        }
        .to_string();
        return Ok(row);
    };
    let mode = SequencingMode::revisit(revisits);
    let mut status = "feasible";
    let mut slots = 0usize;
    for picker in 0..instance.num_pickers() {
        let seq = derive_sequencing_instance(instance, alloc, picker, bins)?;
        let left = (time_limit_s - started.elapsed().as_secs_f64()).max(1e-3);
        let outcome = solve_sequencing(&seq, mode, &SolveParams::with_time_limit(left), true)?;
        row.nodes += outcome.nodes;
        match outcome.result {
            SequenceResult::Feasible(sol) => slots += sol.slots(),
            SequenceResult::ProvenInfeasible => {
                status = "infeasible";
                break;
            }
            SequenceResult::Unknown => status = "TL",
        }
    }
    row.total_time_s = started.elapsed().as_secs_f64();
    if status == "feasible" {
        row.ub = Some(slots as f64);
    }
    row.status = status.to_string();
    Ok(row)
}

/// Runs every cell of the suite. With `jobs > 1` cells run on that many
/// threads; rows always come back in suite order.
pub fn run_bench_suite(suite: &BenchSuite, jobs: usize) -> Result<Vec<ResultRow>, BenchError> {
    suite.validate()?;
    let instances = suite.load()?;
    let cells = suite.cells(instances.len());
    let options = suite.options();
    let exact_for_sequencing: Vec<OnceLock<Result<AllocationResult, AllocationError>>> =
        (0..instances.len()).map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<Result<ResultRow, BenchError>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());

    let run_cell = |cell: &Cell| -> Result<ResultRow, BenchError> {
        let inst = &instances[cell.instance];
        match cell.kind {
            CellKind::Allocate(method) => {
                let result = run_method(inst, &options, method, suite.time_limit_s)?;
                Ok(allocation_row(inst, &method.to_string(), &result))
            }
            CellKind::Sequence { bins, revisits } => {
                let alloc = exact_for_sequencing[cell.instance]
                    .get_or_init(|| run_method(inst, &options, Method::Exact, suite.time_limit_s))
                    .as_ref()
                    .map_err(|e| BenchError::Allocation(e.clone()))?;
                sequence_row(inst, alloc, bins, revisits, suite.time_limit_s)
            }
        }
    };
    let worker = || loop {
        let at = next.fetch_add(1, Ordering::SeqCst);
        let Some(cell) = cells.get(at) else { break };
        let row = run_cell(cell);
        rows.lock().expect("row lock")[at] = Some(row);
    };
    std::thread::scope(|scope| {
        for _ in 1..jobs.max(1) {
            scope.spawn(worker);
        }
        worker();
    });
    rows.into_inner()
        .expect("row lock")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}
