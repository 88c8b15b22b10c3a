use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rmfs_milp::{solve, SolveOutcome, SolveParams, SolveStatus, VarKind};

use crate::allocation::{
    build_allocation_model, result_from_outcome, solve_allocation, stage_trace, Allocation, AllocationError,
    AllocationOptions, AllocationResult, Metrics, StageTrace, Status,
};
use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicParams {
    pub total_time_limit_s: f64,
    pub tau: usize,
    pub seed: u64,
    pub base: SolveParams,
}

impl HeuristicParams {
    pub fn new(total_time_limit_s: f64) -> Self {
        Self {
            total_time_limit_s,
            tau: 1,
            seed: 0,
            base: SolveParams::with_time_limit(total_time_limit_s),
        }
    }

    pub fn with_tau(mut self, tau: usize) -> Self {
        self.tau = tau;
        self
    }
}

/// Even split of what is left of the budget over the stages still to run. A
/// stage without an incumbent at the end of its share may keep going into the
/// later shares, leaving each of them a quarter.
struct Budget {
    started: Instant,
    total: f64,
    stages_left: usize,
}

impl Budget {
    fn new(total: f64, stages: usize) -> Self {
        Self {
            started: Instant::now(),
            total,
            stages_left: stages,
        }
    }

    fn next(&mut self, base: &SolveParams) -> SolveParams {
        let left = (self.total - self.started.elapsed().as_secs_f64()).max(1e-3);
        let stages = self.stages_left.max(1);
        let share = left / stages as f64;
        self.stages_left = self.stages_left.saturating_sub(1);
        SolveParams {
            time_limit_s: left - 0.25 * share * (stages - 1) as f64,
            soft_time_limit_s: Some(share),
            ..base.clone()
        }
    }

    fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }
}

/// Pickers in decreasing capacity, ties by lowest index.
pub fn picker_order(instance: &Instance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.num_pickers()).collect();
    order.sort_by_key(|&p| (std::cmp::Reverse(instance.capacities[p]), p));
    order
}

fn failure(stages: Vec<StageTrace>, failed_stage: usize, status: SolveStatus, started: &Budget) -> AllocationResult {
    let status = match status {
        SolveStatus::ProvenInfeasible => Status::Infeasible,
        _ => Status::Unknown,
    };
    AllocationResult {
        status,
        allocation: None,
        metrics: Metrics {
            nodes: stages.iter().map(|s| s.nodes).sum(),
            total_time_s: started.elapsed(),
            ..Metrics::default()
        },
        stages,
        failed_stage: Some(failed_stage),
    }
}

/// Solves the problem over all orders and pickers with the rack pool limited to
/// `racks`, falling back to `fallback` when no incumbent is found.
fn final_stage(
    instance: &Instance,
    options: &AllocationOptions,
    racks: &BTreeSet<usize>,
    fallback: Allocation,
    fallback_time: f64,
    budget: &mut Budget,
    base: &SolveParams,
    mut stages: Vec<StageTrace>,
) -> Result<AllocationResult, AllocationError> {
    let orders: Vec<usize> = (0..instance.num_orders()).collect();
    let pickers: Vec<usize> = (0..instance.num_pickers()).collect();
    let rack_list: Vec<usize> = racks.iter().copied().collect();
    let sub = instance.restrict(&orders, &rack_list, &pickers);
    let params = budget.next(base);
    let offset = budget.elapsed();
    let built = build_allocation_model(&sub, options)?;
    let outcome = solve(&built.model, &params)?;
    stages.push(stage_trace("final", &outcome));
    let any_timeout = stages
        .iter()
        .any(|s| matches!(s.status, SolveStatus::FeasibleTimeLimit | SolveStatus::UnknownTimeLimit));
    let (allocation, found_at) = match &outcome.incumbent {
        Some(inc) => {
            let local = built.extract(&inc.values);
            (map_racks(local, &rack_list), offset + outcome.incumbent_time_s.unwrap_or(0.0))
        }
        None => (fallback, fallback_time),
    };
    let ub = allocation.objective(options.objective) as f64;
    Ok(AllocationResult {
        status: if any_timeout { Status::TimeLimit } else { Status::Feasible },
        allocation: Some(allocation),
        metrics: Metrics {
            ub: Some(ub),
            lb: None,
            flb: None,
            nodes: stages.iter().map(|s| s.nodes).sum(),
            total_time_s: budget.elapsed(),
            incumbent_time_s: Some(found_at),
        },
        stages,
        failed_stage: None,
    })
}

fn map_racks(mut alloc: Allocation, racks: &[usize]) -> Allocation {
    for set in &mut alloc.racks_of_picker {
        for r in set.iter_mut() {
            *r = racks[*r];
        }
    }
    for d in &mut alloc.draws {
        d.rack = racks[d.rack];
    }
    alloc.normalise();
    alloc
}

fn check_supported(options: &AllocationOptions) -> Result<(), AllocationError> {
    if options.preassigned.is_some() || !options.pins.is_empty() {
        return Err(AllocationError::Preassigned(
            "heuristics decide order assignment themselves".into(),
        ));
    }
    if options.workload != crate::allocation::Workload::FixedCapacities {
        return Err(AllocationError::Preassigned("heuristics need fixed picker capacities".into()));
    }
    Ok(())
}

/// Single-picker-based heuristic: exact solves for one picker at a time on the
/// shrinking pools, then one all-picker solve over the racks chosen.
pub fn spb(
    instance: &Instance,
    options: &AllocationOptions,
    params: &HeuristicParams,
) -> Result<AllocationResult, AllocationError> {
    instance.validate()?;
    check_supported(options)?;
    let pickers = picker_order(instance);
    let mut budget = Budget::new(params.total_time_limit_s, pickers.len() + 1);
    let mut orders_left: Vec<usize> = (0..instance.num_orders()).collect();
    let mut racks_left: Vec<usize> = (0..instance.num_racks()).collect();
    let mut combined = Allocation {
        orders_of_picker: vec![Vec::new(); instance.num_pickers()],
        racks_of_picker: vec![Vec::new(); instance.num_pickers()],
        ..Allocation::default()
    };
    let mut stages = Vec::new();
    let mut last_found = 0.0;
    for (stage, &p) in pickers.iter().enumerate() {
        let stage_params = budget.next(&params.base);
        if orders_left.len() < instance.capacities[p] {
            stages.push(StageTrace {
                label: format!("picker {p}"),
                status: SolveStatus::ProvenInfeasible,
                objective: None,
                nodes: 0,
                time_s: 0.0,
            });
            return Ok(failure(stages, stage, SolveStatus::ProvenInfeasible, &budget));
        }
        let sub = instance.restrict(&orders_left, &racks_left, &[p]);
        let offset = budget.elapsed();
        let res = solve_allocation(&sub, options, &stage_params)?;
        let trace = res.stages[0].clone();
        stages.push(StageTrace {
            label: format!("picker {p}"),
            ..trace
        });
        let Some(local) = res.allocation else {
            return Ok(failure(stages, stage, stages_status(&res), &budget));
        };
        last_found = offset + res.metrics.incumbent_time_s.unwrap_or(0.0);
        let chosen_orders: Vec<usize> = local.orders_of_picker[0].iter().map(|&o| orders_left[o]).collect();
        let chosen_racks: Vec<usize> = local.racks_of_picker[0].iter().map(|&r| racks_left[r]).collect();
        for d in &local.draws {
            combined.draws.push(crate::allocation::Draw {
                rack: racks_left[d.rack],
                picker: p,
                ..*d
            });
        }
        orders_left.retain(|o| !chosen_orders.contains(o));
        racks_left.retain(|r| !chosen_racks.contains(r));
        combined.orders_of_picker[p] = chosen_orders;
        combined.racks_of_picker[p] = chosen_racks;
    }
    combined.normalise();
    let racks: BTreeSet<usize> = combined.used_racks.iter().copied().collect();
    final_stage(instance, options, &racks, combined, last_found, &mut budget, &params.base, stages)
}

fn stages_status(res: &AllocationResult) -> SolveStatus {
    res.stages.last().map_or(SolveStatus::UnknownTimeLimit, |s| s.status)
}

/// Partial integer optimisation: pickers become integral `tau` at a time,
/// later pickers and rack usage stay relaxed, each decided block is fixed.
pub fn pio(
    instance: &Instance,
    options: &AllocationOptions,
    params: &HeuristicParams,
) -> Result<AllocationResult, AllocationError> {
    instance.validate()?;
    check_supported(options)?;
    if params.tau == 0 {
        return Err(AllocationError::ZeroTau);
    }
    let pickers = picker_order(instance);
    let p_count = pickers.len();
    let blocks = p_count.div_ceil(params.tau).max(1);
    let mut budget = Budget::new(params.total_time_limit_s, blocks + 1);
    let mut built = build_allocation_model(instance, options)?;
    for &v in built.u.iter().flatten() {
        built.model.set_variable_kind(v, VarKind::Continuous)?;
    }
    let picker_vars = |built: &crate::allocation::AllocationModel, p: usize| {
        let mut vars: Vec<_> = built.x.iter().map(|row| row[p]).collect();
        vars.extend(built.y.iter().filter_map(|row| row[p]));
        vars.extend(built.pi.iter().filter(|(k, _)| k.2 == p).map(|(_, &v)| v));
        vars
    };
    // relax every picker first; blocks are switched back as they come up
    for &p in &pickers {
        for v in picker_vars(&built, p) {
            if built.model.variable(v).kind == VarKind::Binary {
                built.model.set_variable_kind(v, VarKind::Continuous)?;
            }
        }
    }
    let mut stages = Vec::new();
    let mut last: Option<SolveOutcome> = None;
    let mut last_found = 0.0;
    let mut t = 0;
    let mut stage = 0;
    while t < p_count || (p_count == 0 && stage == 0) {
        let block: Vec<usize> = pickers[t..(t + params.tau).min(p_count)].to_vec();
        for &p in &block {
            for v in picker_vars(&built, p) {
                if built.model.variable(v).kind == VarKind::Continuous {
                    built.model.set_variable_kind(v, VarKind::Binary)?;
                }
            }
        }
        let stage_params = budget.next(&params.base);
        let offset = budget.elapsed();
        let outcome = solve(&built.model, &stage_params)?;
        stages.push(stage_trace(format!("block {stage}"), &outcome));
        let Some(inc) = &outcome.incumbent else {
            return Ok(failure(stages, stage, outcome.status, &budget));
        };
        last_found = offset + outcome.incumbent_time_s.unwrap_or(0.0);
        for &p in &block {
            for v in picker_vars(&built, p) {
                built.model.fix_variable(v, inc.values[v.0].round())?;
            }
        }
        t += params.tau;
        stage += 1;
        last = Some(outcome);
    }
    let last = last.expect("at least one stage");
    let staged = built.extract(&last.incumbent.as_ref().expect("stage incumbent").values);
    let racks: BTreeSet<usize> = staged.used_racks.iter().copied().collect();
    final_stage(instance, options, &racks, staged, last_found, &mut budget, &params.base, stages)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approach {
    Exact,
    Spb,
    Pio(usize),
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Approach::Exact => write!(f, "exact"),
            Approach::Spb => write!(f, "spb"),
            Approach::Pio(tau) => write!(f, "pio{tau}"),
        }
    }
}

pub fn run_approach(
    instance: &Instance,
    options: &AllocationOptions,
    approach: Approach,
    params: &HeuristicParams,
) -> Result<AllocationResult, AllocationError> {
    match approach {
        Approach::Exact => {
            let solve_params = SolveParams {
                time_limit_s: params.total_time_limit_s,
                ..params.base.clone()
            };
            let built = build_allocation_model(instance, options)?;
            let outcome = solve(&built.model, &solve_params)?;
            Ok(result_from_outcome(&built, &outcome, "exact"))
        }
        Approach::Spb => spb(instance, options, params),
        Approach::Pio(tau) => pio(instance, options, &params.clone().with_tau(tau)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioResult {
    pub runs: Vec<(Approach, AllocationResult)>,
    /// Index into `runs` of the lowest-UB run, earliest incumbent on ties.
    pub best: Option<usize>,
}

impl PortfolioResult {
    pub fn best(&self) -> Option<&AllocationResult> {
        self.best.map(|i| &self.runs[i].1)
    }
}

/// Runs every approach concurrently, each with the full time budget.
pub fn portfolio(
    instance: &Instance,
    options: &AllocationOptions,
    approaches: &[Approach],
    params: &HeuristicParams,
) -> Result<PortfolioResult, AllocationError> {
    if approaches.is_empty() {
        return Err(AllocationError::EmptyPortfolio);
    }
    let results: Vec<Result<AllocationResult, AllocationError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = approaches
            .iter()
            .map(|&a| scope.spawn(move || run_approach(instance, options, a, params)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("approach thread panicked")).collect()
    });
    let mut runs = Vec::with_capacity(approaches.len());
    for (a, r) in approaches.iter().zip(results) {
        runs.push((*a, r?));
    }
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.allocation.is_some())
        .min_by(|(_, (_, a)), (_, (_, b))| {
            let key = |r: &AllocationResult| (r.metrics.ub.unwrap_or(f64::INFINITY), r.metrics.incumbent_time_s.unwrap_or(f64::INFINITY));
            let (ua, ta) = key(a);
            let (ub, tb) = key(b);
            ua.total_cmp(&ub).then(ta.total_cmp(&tb))
        })
        .map(|(i, _)| i);
    Ok(PortfolioResult { runs, best })
}
