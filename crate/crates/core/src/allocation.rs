use std::collections::{BTreeMap, BTreeSet};

use rmfs_milp::{
    solve, MilpModel, ModelError, ObjectiveSense, Sense, SolveOutcome, SolveParams, SolveStatus,
    VarRef, Variable,
};
use thiserror::Error;

use crate::instance::{Instance, InstanceError};
use crate::verify::VerifyReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveMode {
    /// Number of racks used.
    #[default]
    RackCount,
    /// Number of rack-to-picker assignments; only meaningful with shared racks.
    RackVisits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workload {
    #[default]
    FixedCapacities,
    /// At least this many orders in total, picker capacities ignored.
    MinTotal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pin {
    Order { order: usize, picker: usize, assigned: bool },
    Rack { rack: usize, picker: usize, assigned: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOptions {
    pub shared_racks: bool,
    pub objective: ObjectiveMode,
    pub workload: Workload,
    /// Picker of every order (None = not picked); fixes all order variables.
    pub preassigned: Option<Vec<Option<usize>>>,
    pub pins: Vec<Pin>,
    pub prune: bool,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self {
            shared_racks: false,
            objective: ObjectiveMode::RackCount,
            workload: Workload::FixedCapacities,
            preassigned: None,
            pins: Vec::new(),
            prune: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("rack-visit objective requires shared racks")]
    RackVisitsWithoutSharing,
    #[error("minimum total of {min_total} orders exceeds the {orders} available")]
    MinTotalTooLarge { min_total: usize, orders: usize },
    #[error("preassignment: {0}")]
    Preassigned(String),
    #[error("pin: {0}")]
    Pin(String),
    #[error("portfolio needs at least one approach")]
    EmptyPortfolio,
    #[error("tau must be at least 1")]
    ZeroTau,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A draw of `units` of `product` from `rack` at `picker` (shared-rack mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Draw {
    pub product: usize,
    pub rack: usize,
    pub picker: usize,
    pub units: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Allocation {
    pub orders_of_picker: Vec<Vec<usize>>,
    pub racks_of_picker: Vec<Vec<usize>>,
    pub used_racks: Vec<usize>,
    pub draws: Vec<Draw>,
}

impl Allocation {
    pub fn rack_count(&self) -> usize {
        self.used_racks.len()
    }

    pub fn rack_visits(&self) -> usize {
        self.racks_of_picker.iter().map(Vec::len).sum()
    }

    pub fn objective(&self, mode: ObjectiveMode) -> usize {
        match mode {
            ObjectiveMode::RackCount => self.rack_count(),
            ObjectiveMode::RackVisits => self.rack_visits(),
        }
    }

    /// Rebuilds `used_racks` as the union of the picker rack sets.
    pub fn normalise(&mut self) {
        for set in self.orders_of_picker.iter_mut().chain(self.racks_of_picker.iter_mut()) {
            set.sort_unstable();
            set.dedup();
        }
        let used: BTreeSet<usize> = self.racks_of_picker.iter().flatten().copied().collect();
        self.used_racks = used.into_iter().collect();
        self.draws.sort();
    }
}

/// Status of an allocation run, exact or heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    /// Heuristic result with every stage completed.
    Feasible,
    /// Incumbent available but the time limit stopped the search.
    TimeLimit,
    Infeasible,
    /// Nothing found within the time limit.
    Unknown,
}

impl Status {
    pub fn from_solve(status: SolveStatus) -> Self {
        match status {
            SolveStatus::Optimal => Status::Optimal,
            SolveStatus::FeasibleTimeLimit => Status::TimeLimit,
            SolveStatus::ProvenInfeasible => Status::Infeasible,
            SolveStatus::Unbounded | SolveStatus::UnknownTimeLimit => Status::Unknown,
        }
    }

    /// Label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::TimeLimit | Status::Unknown => "TL",
            Status::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub ub: Option<f64>,
    pub lb: Option<f64>,
    pub flb: Option<f64>,
    pub nodes: u64,
    pub total_time_s: f64,
    pub incumbent_time_s: Option<f64>,
}

impl Metrics {
    pub fn gap(&self) -> Option<f64> {
        percent_gap(self.ub?, self.lb?)
    }

    pub fn fgap(&self) -> Option<f64> {
        percent_gap(self.ub?, self.flb?)
    }
}

/// `100 (ub - bound) / ub`, undefined for a zero upper bound.
pub fn percent_gap(ub: f64, bound: f64) -> Option<f64> {
    (ub > 0.0).then(|| 100.0 * (ub - bound) / ub)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub label: String,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub nodes: u64,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub status: Status,
    pub allocation: Option<Allocation>,
    pub metrics: Metrics,
    pub stages: Vec<StageTrace>,
    pub failed_stage: Option<usize>,
}

impl AllocationResult {
    pub fn ub(&self) -> Option<f64> {
        self.metrics.ub
    }
}

pub struct PrunedInstance {
    pub instance: Instance,
    /// Original indices of the racks kept, in order.
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
}

/// Drops racks that hold none of the demanded products.
pub fn prune_redundant_racks(instance: &Instance) -> PrunedInstance {
    let demanded = instance.demanded_products();
    let (kept, removed): (Vec<usize>, Vec<usize>) =
        (0..instance.num_racks()).partition(|&r| instance.rack_is_useful(r, &demanded));
    let pickers: Vec<usize> = (0..instance.num_pickers()).collect();
    let orders: Vec<usize> = (0..instance.num_orders()).collect();
    PrunedInstance {
        instance: instance.restrict(&orders, &kept, &pickers),
        kept,
        removed,
    }
}

/// Allocation program plus the variable handles of each decision.
#[derive(Debug, Clone)]
pub struct AllocationModel {
    pub model: MilpModel,
    /// `x[o][p]`
    pub x: Vec<Vec<VarRef>>,
    /// `u[r]`, absent for pruned racks.
    pub u: Vec<Option<VarRef>>,
    /// `y[r][p]`, absent for pruned racks.
    pub y: Vec<Vec<Option<VarRef>>>,
    /// `(product, rack, picker)` to units drawn; shared-rack mode only.
    pub pi: BTreeMap<(usize, usize, usize), VarRef>,
    pub removed_racks: Vec<usize>,
}

impl AllocationModel {
    /// Reads an allocation off a solution vector, thresholding at 0.5.
    pub fn extract(&self, values: &[f64]) -> Allocation {
        let pickers = self.x.first().map_or(0, Vec::len);
        let mut alloc = Allocation {
            orders_of_picker: vec![Vec::new(); pickers],
            racks_of_picker: vec![Vec::new(); pickers],
            ..Allocation::default()
        };
        for (o, row) in self.x.iter().enumerate() {
            for (p, v) in row.iter().enumerate() {
                if values[v.0] > 0.5 {
                    alloc.orders_of_picker[p].push(o);
                }
            }
        }
        for (r, row) in self.y.iter().enumerate() {
            for (p, v) in row.iter().enumerate() {
                if v.is_some_and(|v| values[v.0] > 0.5) {
                    alloc.racks_of_picker[p].push(r);
                }
            }
        }
        for (&(product, rack, picker), v) in &self.pi {
            let units = values[v.0].round();
            if units >= 1.0 {
                alloc.draws.push(Draw {
                    product,
                    rack,
                    picker,
                    units: units as u32,
                });
            }
        }
        alloc.normalise();
        alloc
    }
}

fn check_options(instance: &Instance, options: &AllocationOptions) -> Result<(), AllocationError> {
    instance.validate()?;
    if options.objective == ObjectiveMode::RackVisits && !options.shared_racks {
        return Err(AllocationError::RackVisitsWithoutSharing);
    }
    if let Workload::MinTotal(min_total) = options.workload {
        if min_total > instance.num_orders() {
            return Err(AllocationError::MinTotalTooLarge {
                min_total,
                orders: instance.num_orders(),
            });
        }
    }
    let pickers = instance.num_pickers();
    if let Some(map) = &options.preassigned {
        if map.len() != instance.num_orders() {
            return Err(AllocationError::Preassigned(format!(
                "{} entries for {} orders",
                map.len(),
                instance.num_orders()
            )));
        }
        if let Some((o, p)) = map.iter().enumerate().find_map(|(o, p)| p.filter(|&p| p >= pickers).map(|p| (o, p))) {
            return Err(AllocationError::Preassigned(format!("order {o} sent to unknown picker {p}")));
        }
    }
    let mut order_owner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rack_owner: BTreeMap<usize, usize> = BTreeMap::new();
    for pin in &options.pins {
        match *pin {
            Pin::Order { order, picker, assigned } => {
                if order >= instance.num_orders() || picker >= pickers {
                    return Err(AllocationError::Pin(format!("order {order} / picker {picker} out of range")));
                }
                if assigned {
                    if let Some(other) = order_owner.insert(order, picker).filter(|&q| q != picker) {
                        return Err(AllocationError::Pin(format!(
                            "order {order} pinned to pickers {other} and {picker}"
                        )));
                    }
                }
            }
            Pin::Rack { rack, picker, assigned } => {
                if rack >= instance.num_racks() || picker >= pickers {
                    return Err(AllocationError::Pin(format!("rack {rack} / picker {picker} out of range")));
                }
                if assigned && !options.shared_racks {
                    if let Some(other) = rack_owner.insert(rack, picker).filter(|&q| q != picker) {
                        return Err(AllocationError::Pin(format!(
                            "rack {rack} pinned to pickers {other} and {picker}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn build_allocation_model(
    instance: &Instance,
    options: &AllocationOptions,
) -> Result<AllocationModel, AllocationError> {
    check_options(instance, options)?;
    let (o_count, r_count, p_count) = (instance.num_orders(), instance.num_racks(), instance.num_pickers());
    let demanded = instance.demanded_products();
    let mut model = MilpModel::new(ObjectiveSense::Minimize);

    let mut removed_racks = Vec::new();
    let mut u = vec![None; r_count];
    for (r, slot) in u.iter_mut().enumerate() {
        if options.prune && !instance.rack_is_useful(r, &demanded) {
            removed_racks.push(r);
            continue;
        }
        let priority = 1 + (r_count - r) as u32;
        *slot = Some(model.add_variable(Variable::binary(format!("u_{r}")).with_priority(priority))?);
    }
    let mut x = Vec::with_capacity(o_count);
    for o in 0..o_count {
        let row = (0..p_count)
            .map(|p| model.add_variable(Variable::binary(format!("x_{o}_{p}"))))
            .collect::<Result<Vec<_>, _>>()?;
        x.push(row);
    }
    let mut y = vec![vec![None; p_count]; r_count];
    for r in 0..r_count {
        if u[r].is_none() {
            continue;
        }
        for p in 0..p_count {
            y[r][p] = Some(model.add_variable(Variable::binary(format!("y_{r}_{p}")))?);
        }
    }
    let mut pi = BTreeMap::new();
    if options.shared_racks {
        for r in 0..r_count {
            if u[r].is_none() {
                continue;
            }
            for (&i, &s) in &instance.racks[r] {
                if s == 0 || !demanded.contains(&i) {
                    continue;
                }
                for p in 0..p_count {
                    let v = model.add_variable(Variable::integer(format!("pi_{i}_{r}_{p}"), 0.0, s as f64))?;
                    pi.insert((i, r, p), v);
                }
            }
        }
    }

    match options.workload {
        Workload::FixedCapacities => {
            for p in 0..p_count {
                let terms = (0..o_count).map(|o| (x[o][p], 1.0)).collect();
                model.add_constraint_terms(format!("capacity_{p}"), terms, Sense::Eq, instance.capacities[p] as f64)?;
            }
        }
        Workload::MinTotal(min_total) => {
            let terms = x.iter().flatten().map(|&v| (v, 1.0)).collect();
            model.add_constraint_terms("min_total", terms, Sense::Ge, min_total as f64)?;
        }
    }
    if p_count > 1 {
        for (o, row) in x.iter().enumerate() {
            let terms = row.iter().map(|&v| (v, 1.0)).collect();
            model.add_constraint_terms(format!("order_once_{o}"), terms, Sense::Le, 1.0)?;
        }
    }

    for &i in &demanded {
        for p in 0..p_count {
            let mut terms: Vec<(VarRef, f64)> = Vec::new();
            for r in 0..r_count {
                if options.shared_racks {
                    if let Some(&v) = pi.get(&(i, r, p)) {
                        terms.push((v, 1.0));
                    }
                } else if let Some(v) = y[r][p] {
                    let s = instance.supply(r, i);
                    if s > 0 {
                        terms.push((v, s as f64));
                    }
                }
            }
            for o in 0..o_count {
                let q = instance.demand(o, i);
                if q > 0 {
                    terms.push((x[o][p], -(q as f64)));
                }
            }
            model.add_constraint_terms(format!("supply_{i}_{p}"), terms, Sense::Ge, 0.0)?;
        }
    }

    for r in 0..r_count {
        let Some(ur) = u[r] else { continue };
        if options.shared_racks {
            for p in 0..p_count {
                let yv = y[r][p].expect("kept rack");
                model.add_constraint_terms(format!("rack_use_{r}_{p}"), vec![(yv, 1.0), (ur, -1.0)], Sense::Le, 0.0)?;
            }
            for (&i, &s) in &instance.racks[r] {
                if !pi.contains_key(&(i, r, 0)) {
                    continue;
                }
                for p in 0..p_count {
                    let yv = y[r][p].expect("kept rack");
                    model.add_constraint_terms(
                        format!("draw_needs_rack_{i}_{r}_{p}"),
                        vec![(pi[&(i, r, p)], 1.0), (yv, -(s as f64))],
                        Sense::Le,
                        0.0,
                    )?;
                }
                if p_count > 1 {
                    let terms = (0..p_count).map(|p| (pi[&(i, r, p)], 1.0)).collect();
                    model.add_constraint_terms(format!("rack_inventory_{i}_{r}"), terms, Sense::Le, s as f64)?;
                }
            }
        } else {
            let mut terms: Vec<(VarRef, f64)> = y[r].iter().map(|v| (v.expect("kept rack"), 1.0)).collect();
            terms.push((ur, -1.0));
            model.add_constraint_terms(format!("rack_once_{r}"), terms, Sense::Eq, 0.0)?;
        }
    }

    for (g, group) in instance.face_groups.iter().enumerate() {
        let terms: Vec<(VarRef, f64)> = group.iter().filter_map(|&r| u[r]).map(|v| (v, 1.0)).collect();
        if terms.len() > 1 {
            model.add_constraint_terms(format!("faces_{g}"), terms, Sense::Le, 1.0)?;
        }
    }

    let objective = match options.objective {
        ObjectiveMode::RackCount => u.iter().flatten().map(|&v| (v, 1.0)).collect(),
        ObjectiveMode::RackVisits => y.iter().flatten().flatten().map(|&v| (v, 1.0)).collect(),
    };
    model.set_objective(objective)?;

    let mut built = AllocationModel {
        model,
        x,
        u,
        y,
        pi,
        removed_racks,
    };
    if let Some(map) = &options.preassigned {
        for (o, owner) in map.iter().enumerate() {
            for p in 0..p_count {
                let v = built.x[o][p];
                built.model.fix_variable(v, if *owner == Some(p) { 1.0 } else { 0.0 })?;
            }
        }
    }
    for pin in &options.pins {
        if let Pin::Rack { rack, assigned: true, .. } = *pin {
            if built.u[rack].is_none() {
                return Err(AllocationError::Pin(format!("rack {rack} holds no demanded product")));
            }
        }
    }
    pin_assignments(&mut built, &options.pins)?;
    Ok(built)
}

/// Fixes order and rack assignment variables. Contradictory pins are left for
/// the solver to prove infeasible.
pub fn pin_assignments(model: &mut AllocationModel, pins: &[Pin]) -> Result<(), AllocationError> {
    for pin in pins {
        let (var, value) = match *pin {
            Pin::Order { order, picker, assigned } => {
                let var = model
                    .x
                    .get(order)
                    .and_then(|row| row.get(picker))
                    .copied()
                    .ok_or_else(|| AllocationError::Pin(format!("no variable for order {order} at picker {picker}")))?;
                (Some(var), assigned)
            }
            Pin::Rack { rack, picker, assigned } => {
                let row = model
                    .y
                    .get(rack)
                    .ok_or_else(|| AllocationError::Pin(format!("rack {rack} out of range")))?;
                let var = *row
                    .get(picker)
                    .ok_or_else(|| AllocationError::Pin(format!("picker {picker} out of range")))?;
                if var.is_none() && assigned {
                    return Err(AllocationError::Pin(format!("rack {rack} was pruned")));
                }
                (var, assigned)
            }
        };
        let Some(var) = var else { continue };
        let target = if value { 1.0 } else { 0.0 };
        let current = model.model.variable(var);
        if current.lower == current.upper && current.lower != target {
            // opposite fix: keep the bounds, record the clash as a row
            model.model.add_constraint_terms(format!("pin_clash_{}", var.0), vec![(var, 1.0)], Sense::Eq, target)?;
        } else {
            model.model.fix_variable(var, target)?;
        }
    }
    Ok(())
}

pub(crate) fn outcome_metrics(outcome: &SolveOutcome) -> Metrics {
    Metrics {
        ub: outcome.objective(),
        lb: outcome.best_bound,
        flb: outcome.root_bound,
        nodes: outcome.nodes,
        total_time_s: outcome.total_time_s,
        incumbent_time_s: outcome.incumbent_time_s,
    }
}

pub(crate) fn stage_trace(label: impl Into<String>, outcome: &SolveOutcome) -> StageTrace {
    StageTrace {
        label: label.into(),
        status: outcome.status,
        objective: outcome.objective(),
        nodes: outcome.nodes,
        time_s: outcome.total_time_s,
    }
}

pub fn solve_allocation(
    instance: &Instance,
    options: &AllocationOptions,
    params: &SolveParams,
) -> Result<AllocationResult, AllocationError> {
    let built = build_allocation_model(instance, options)?;
    let outcome = solve(&built.model, params)?;
    Ok(result_from_outcome(&built, &outcome, "exact"))
}

pub(crate) fn result_from_outcome(built: &AllocationModel, outcome: &SolveOutcome, label: &str) -> AllocationResult {
    AllocationResult {
        status: Status::from_solve(outcome.status),
        allocation: outcome.incumbent.as_ref().map(|inc| built.extract(&inc.values)),
        metrics: outcome_metrics(outcome),
        stages: vec![stage_trace(label, outcome)],
        failed_stage: None,
    }
}

/// Checks an allocation against the allocation constraints, independently of
/// any model.
pub fn verify_allocation(instance: &Instance, options: &AllocationOptions, alloc: &Allocation) -> VerifyReport {
    let mut report = VerifyReport::default();
    let (o_count, r_count, p_count) = (instance.num_orders(), instance.num_racks(), instance.num_pickers());
    if alloc.orders_of_picker.len() != p_count || alloc.racks_of_picker.len() != p_count {
        report.push(
            "shape",
            vec![],
            format!(
                "{} order sets and {} rack sets for {p_count} pickers",
                alloc.orders_of_picker.len(),
                alloc.racks_of_picker.len()
            ),
        );
        return report;
    }
    for (p, set) in alloc.orders_of_picker.iter().enumerate() {
        if let Some(&o) = set.iter().find(|&&o| o >= o_count) {
            report.push("shape", vec![p, o], "unknown order");
        }
    }
    for (p, set) in alloc.racks_of_picker.iter().enumerate() {
        if let Some(&r) = set.iter().find(|&&r| r >= r_count) {
            report.push("shape", vec![p, r], "unknown rack");
        }
    }
    for d in &alloc.draws {
        if d.rack >= r_count || d.picker >= p_count || d.product >= instance.num_products {
            report.push("shape", vec![d.product, d.rack, d.picker], "draw out of range");
        }
    }
    if !report.ok() {
        return report;
    }

    match options.workload {
        Workload::FixedCapacities => {
            for (p, set) in alloc.orders_of_picker.iter().enumerate() {
                let distinct: BTreeSet<_> = set.iter().collect();
                if distinct.len() != instance.capacities[p] || set.len() != distinct.len() {
                    report.push(
                        "picker_capacity",
                        vec![p],
                        format!("{} orders, capacity {}", set.len(), instance.capacities[p]),
                    );
                }
            }
        }
        Workload::MinTotal(min_total) => {
            let total: usize = alloc.orders_of_picker.iter().map(Vec::len).sum();
            if total < min_total {
                report.push("min_total", vec![], format!("{total} orders < {min_total}"));
            }
        }
    }
    let mut owner = vec![Vec::new(); o_count];
    for (p, set) in alloc.orders_of_picker.iter().enumerate() {
        for &o in set {
            owner[o].push(p);
        }
    }
    for (o, ps) in owner.iter().enumerate() {
        if ps.len() > 1 {
            report.push("order_once", vec![o], format!("order at pickers {ps:?}"));
        }
    }
    let mut rack_owner = vec![Vec::new(); r_count];
    for (p, set) in alloc.racks_of_picker.iter().enumerate() {
        for &r in set {
            rack_owner[r].push(p);
        }
    }
    let used: BTreeSet<usize> = alloc.used_racks.iter().copied().collect();
    for (r, ps) in rack_owner.iter().enumerate() {
        if !options.shared_racks && ps.len() > 1 {
            report.push("rack_once", vec![r], format!("rack at pickers {ps:?}"));
        }
        if !ps.is_empty() != used.contains(&r) {
            report.push("rack_usage", vec![r], "used flag disagrees with picker assignment");
        }
    }
    if let Some(&r) = used.iter().find(|&&r| r >= r_count) {
        report.push("shape", vec![r], "unknown used rack");
    }

    let demanded = instance.demanded_products();
    if options.shared_racks {
        let mut drawn: BTreeMap<(usize, usize, usize), u64> = BTreeMap::new();
        for d in &alloc.draws {
            *drawn.entry((d.product, d.rack, d.picker)).or_default() += d.units as u64;
        }
        for (&(i, r, p), &units) in &drawn {
            if !alloc.racks_of_picker[p].contains(&r) {
                report.push("draw_needs_rack", vec![i, r, p], format!("{units} units from a rack not at the picker"));
            }
            if units > instance.supply(r, i) as u64 {
                report.push("draw_needs_rack", vec![i, r, p], format!("{units} units > rack stock {}", instance.supply(r, i)));
            }
        }
        for r in 0..r_count {
            for (&i, &s) in &instance.racks[r] {
                let total: u64 = (0..p_count).map(|p| drawn.get(&(i, r, p)).copied().unwrap_or(0)).sum();
                if total > s as u64 {
                    report.push("rack_inventory", vec![i, r], format!("{total} units drawn > {s}"));
                }
            }
        }
        for &i in &demanded {
            for p in 0..p_count {
                let need: u64 = alloc.orders_of_picker[p].iter().map(|&o| instance.demand(o, i) as u64).sum();
                let have: u64 = (0..r_count).map(|r| drawn.get(&(i, r, p)).copied().unwrap_or(0)).sum();
                if have < need {
                    report.push("supply", vec![i, p], format!("drawn {have} < demand {need}"));
                }
            }
        }
    } else {
        if !alloc.draws.is_empty() {
            report.push("shape", vec![], "draws present without shared racks");
        }
        for &i in &demanded {
            for p in 0..p_count {
                let need: u64 = alloc.orders_of_picker[p].iter().map(|&o| instance.demand(o, i) as u64).sum();
                let have: u64 = alloc.racks_of_picker[p].iter().map(|&r| instance.supply(r, i) as u64).sum();
                if have < need {
                    report.push("supply", vec![i, p], format!("supply {have} < demand {need}"));
                }
            }
        }
    }

    for (g, group) in instance.face_groups.iter().enumerate() {
        let used_faces = group.iter().filter(|r| used.contains(r)).count();
        if used_faces > 1 {
            report.push("faces", vec![g], format!("{used_faces} faces of one rack used"));
        }
    }
    if let Some(map) = &options.preassigned {
        for (o, want) in map.iter().enumerate() {
            let got = owner.get(o).and_then(|ps| ps.first().copied());
            if got != *want {
                report.push("preassigned", vec![o], format!("order at {got:?}, expected {want:?}"));
            }
        }
    }
    for pin in &options.pins {
        let (family_ok, indices) = match *pin {
            Pin::Order { order, picker, assigned } => {
                (alloc.orders_of_picker[picker].contains(&order) == assigned, vec![order, picker])
            }
            Pin::Rack { rack, picker, assigned } => {
                (alloc.racks_of_picker[picker].contains(&rack) == assigned, vec![rack, picker])
            }
        };
        if !family_ok {
            report.push("pin", indices, format!("{pin:?} not respected"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::t1;

    fn exact(inst: &Instance) -> AllocationResult {
        solve_allocation(inst, &AllocationOptions::default(), &SolveParams::with_time_limit(30.0)).unwrap()
    }

    #[test]
    fn pruning_drops_undemanded_rack() {
        let pruned = prune_redundant_racks(&t1());
        assert_eq!(pruned.removed, vec![3]);
        assert_eq!(pruned.kept, vec![0, 1, 2]);
        assert_eq!(pruned.instance.orders, t1().orders);
    }

    #[test]
    fn t1_model_size() {
        let built = build_allocation_model(&t1(), &AllocationOptions::default()).unwrap();
        let count = |prefix: &str| built.model.variables().iter().filter(|v| v.name.starts_with(prefix)).count();
        assert_eq!((count("x_"), count("u_"), count("y_")), (3, 3, 3));
        let supply_rows = built.model.constraints().iter().filter(|c| c.name.starts_with("supply_")).count();
        assert_eq!(supply_rows, 2);
    }

    #[test]
    fn face_group_adds_one_row() {
        let mut inst = t1();
        inst.face_groups = vec![vec![0, 1]];
        let built = build_allocation_model(&inst, &AllocationOptions::default()).unwrap();
        let faces: Vec<_> = built.model.constraints().iter().filter(|c| c.name.starts_with("faces_")).collect();
        assert_eq!(faces.len(), 1);
        assert_eq!(faces[0].terms.len(), 2);
        assert_eq!(faces[0].rhs, 1.0);
    }

    #[test]
    fn t1_exact_values() {
        let res = exact(&t1());
        assert_eq!(res.status, Status::Optimal);
        assert_eq!(res.ub(), Some(3.0));
        let mut two = t1();
        two.capacities = vec![2];
        let res = exact(&two);
        assert_eq!(res.ub(), Some(1.0));
        let alloc = res.allocation.unwrap();
        assert_eq!(alloc.orders_of_picker[0], vec![0, 1]);
        assert_eq!(alloc.used_racks, vec![2]);
    }

    #[test]
    fn capacity_above_orders_rejected() {
        let mut inst = t1();
        inst.capacities = vec![4];
        assert!(matches!(
            solve_allocation(&inst, &AllocationOptions::default(), &SolveParams::default()),
            Err(AllocationError::Instance(InstanceError::CapacityExceedsOrders { .. }))
        ));
    }

    #[test]
    fn preassigned_fixes_every_order_variable() {
        let opts = AllocationOptions {
            preassigned: Some(vec![Some(0), Some(0), Some(0)]),
            ..AllocationOptions::default()
        };
        let built = build_allocation_model(&t1(), &opts).unwrap();
        for row in &built.x {
            for &v in row {
                let var = built.model.variable(v);
                assert_eq!(var.lower, var.upper);
            }
        }
        let res = solve_allocation(&t1(), &opts, &SolveParams::default()).unwrap();
        assert_eq!(res.ub(), Some(3.0));
    }

    #[test]
    fn double_pin_surfaces_at_solve() {
        let mut inst = t1();
        inst.capacities = vec![1, 1];
        let mut built = build_allocation_model(&inst, &AllocationOptions::default()).unwrap();
        pin_assignments(
            &mut built,
            &[
                Pin::Order { order: 0, picker: 0, assigned: true },
                Pin::Order { order: 0, picker: 1, assigned: true },
            ],
        )
        .unwrap();
        let out = solve(&built.model, &SolveParams::default()).unwrap();
        assert_eq!(out.status, SolveStatus::ProvenInfeasible);
    }

    #[test]
    fn pinned_order_lands_on_picker() {
        let mut inst = t1();
        inst.capacities = vec![1, 1];
        let opts = AllocationOptions {
            pins: vec![Pin::Order { order: 2, picker: 1, assigned: true }],
            ..AllocationOptions::default()
        };
        let res = solve_allocation(&inst, &opts, &SolveParams::default()).unwrap();
        let alloc = res.allocation.unwrap();
        assert!(alloc.orders_of_picker[1].contains(&2));
        assert!(verify_allocation(&inst, &opts, &alloc).ok());
    }

    #[test]
    fn verifier_flags_moved_order_and_missing_rack() {
        let inst = t1();
        let opts = AllocationOptions::default();
        let alloc = exact(&inst).allocation.unwrap();
        assert!(verify_allocation(&inst, &opts, &alloc).ok());

        let mut two = inst.clone();
        two.capacities = vec![2, 1];
        let mut moved = Allocation {
            orders_of_picker: vec![vec![0, 1], vec![2]],
            racks_of_picker: vec![vec![2], vec![0, 1]],
            used_racks: vec![0, 1, 2],
            draws: vec![],
        };
        assert!(verify_allocation(&two, &opts, &moved).ok());
        moved.orders_of_picker[1].push(0);
        let report = verify_allocation(&two, &opts, &moved);
        assert!(report.has("picker_capacity") && report.has("order_once"));

        let mut missing = alloc.clone();
        missing.racks_of_picker[0].retain(|&r| r != 0);
        missing.normalise();
        let report = verify_allocation(&inst, &opts, &missing);
        assert!(report.has("supply"));
        assert_eq!(report.violations[0].indices, vec![0, 0]);
    }

    #[test]
    fn shared_racks_split_inventory() {
        // one rack with two p0 units serves two pickers
        let inst = Instance {
            name: "share".into(),
            num_products: 1,
            orders: vec![crate::instance::units([(0, 1)]), crate::instance::units([(0, 1)])],
            racks: vec![crate::instance::units([(0, 2)]), crate::instance::units([(0, 1)])],
            capacities: vec![1, 1],
            face_groups: vec![],
        };
        let single = exact(&inst);
        assert_eq!(single.ub(), Some(2.0));
        let opts = AllocationOptions {
            shared_racks: true,
            ..AllocationOptions::default()
        };
        let shared = solve_allocation(&inst, &opts, &SolveParams::default()).unwrap();
        assert_eq!(shared.ub(), Some(1.0));
        let alloc = shared.allocation.unwrap();
        assert!(verify_allocation(&inst, &opts, &alloc).ok());
        assert_eq!(alloc.draws.len(), 2);

        let visits = AllocationOptions {
            objective: ObjectiveMode::RackVisits,
            ..opts
        };
        let res = solve_allocation(&inst, &visits, &SolveParams::default()).unwrap();
        assert_eq!(res.ub(), Some(2.0));
    }

    #[test]
    fn min_total_workload() {
        let mut inst = t1();
        inst.capacities = vec![0];
        let opts = AllocationOptions {
            workload: Workload::MinTotal(2),
            ..AllocationOptions::default()
        };
        let res = solve_allocation(&inst, &opts, &SolveParams::default()).unwrap();
        assert_eq!(res.ub(), Some(1.0));
        assert!(verify_allocation(&inst, &opts, res.allocation.as_ref().unwrap()).ok());
    }
}
