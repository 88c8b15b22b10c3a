use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::{ModelError, RelaxationError};
use crate::lp::{LpData, LpStatus, Simplex};
use crate::model::{MilpModel, ObjectiveSense, Sense, VarRef};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub time_limit_s: f64,
    pub integrality_tol: f64,
    pub feasibility_tol: f64,
    /// Relative gap at which an incumbent is declared optimal.
    pub rel_gap_tol: f64,
    /// Reserved; the search itself is deterministic.
    pub seed: u64,
    pub node_limit: Option<u64>,
    /// Stop once this many improving incumbents have been found.
    pub solution_limit: Option<u64>,
    /// Past this many seconds the search stops as soon as it has an incumbent.
    pub soft_time_limit_s: Option<f64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            time_limit_s: 300.0,
            integrality_tol: 1e-6,
            feasibility_tol: 1e-6,
            rel_gap_tol: 1e-9,
            seed: 0,
            node_limit: None,
            solution_limit: None,
            soft_time_limit_s: None,
        }
    }
}

impl SolveParams {
    pub fn with_time_limit(time_limit_s: f64) -> Self {
        Self {
            time_limit_s,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("time_limit_s", self.time_limit_s),
            ("integrality_tol", self.integrality_tol),
            ("feasibility_tol", self.feasibility_tol),
            ("rel_gap_tol", self.rel_gap_tol),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(ModelError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    ProvenInfeasible,
    Unbounded,
    UnknownTimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub incumbent: Option<Incumbent>,
    /// Best proven bound on the optimum, in the model's objective sense.
    pub best_bound: Option<f64>,
    /// LP relaxation value at the end of the root node.
    pub root_bound: Option<f64>,
    /// Explored nodes, root included.
    pub nodes: u64,
    pub lp_iterations: u64,
    pub total_time_s: f64,
    /// Wall clock at which the final incumbent was first found.
    pub incumbent_time_s: Option<f64>,
}

impl SolveOutcome {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|i| i.objective)
    }

    pub fn value(&self, var: VarRef) -> Option<f64> {
        self.incumbent.as_ref().map(|i| i.values[var.0])
    }

    fn empty(status: SolveStatus, started: Instant) -> Self {
        Self {
            status,
            incumbent: None,
            best_bound: None,
            root_bound: None,
            nodes: 0,
            lp_iterations: 0,
            total_time_s: started.elapsed().as_secs_f64(),
            incumbent_time_s: None,
        }
    }
}

/// LP data for `model` plus the presolve verdict.
struct Prepared {
    data: LpData,
    /// +1 for minimisation, -1 for maximisation.
    sign: f64,
    infeasible: bool,
}

fn prepare(model: &MilpModel, round_integer_bounds: bool, feas_tol: f64) -> Prepared {
    let n = model.num_variables();
    let sign = match model.sense() {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    let mut infeasible = false;
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for v in model.variables() {
        let (mut lo, mut hi) = (v.lower, v.upper);
        if round_integer_bounds && v.kind.is_integral() {
            lo = (lo - 1e-9).ceil();
            hi = (hi + 1e-9).floor();
        }
        if lo > hi {
            infeasible = true;
        }
        lower.push(lo);
        upper.push(hi);
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut row_lower = Vec::new();
    let mut row_upper = Vec::new();
    for c in model.constraints() {
        let live: Vec<(VarRef, f64)> = c.terms.iter().copied().filter(|&(_, a)| a != 0.0).collect();
        let fixed = live.iter().all(|&(v, _)| lower[v.0] == upper[v.0]);
        if fixed {
            // empty or fully fixed row: decide it now
            let lhs: f64 = live.iter().map(|&(v, a)| a * lower[v.0]).sum();
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + feas_tol,
                Sense::Ge => lhs >= c.rhs - feas_tol,
                Sense::Eq => (lhs - c.rhs).abs() <= feas_tol,
            };
            if !ok {
                infeasible = true;
            }
            continue;
        }
        let row = row_lower.len();
        for (v, a) in live {
            cols[v.0].push((row, a));
        }
        let (lo, hi) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, c.rhs),
            Sense::Ge => (c.rhs, f64::INFINITY),
            Sense::Eq => (c.rhs, c.rhs),
        };
        row_lower.push(lo);
        row_upper.push(hi);
    }
    let mut cost = vec![0.0; n];
    for &(v, c) in model.objective() {
        cost[v.0] += sign * c;
    }
    let rows = row_lower.len();
    lower.extend(row_lower);
    upper.extend(row_upper);
    Prepared {
        data: LpData {
            cols,
            cost,
            lower,
            upper,
            rows,
        },
        sign,
        infeasible,
    }
}

/// Optimal value of the LP relaxation (all integrality dropped).
pub fn lp_relaxation_bound(model: &MilpModel) -> Result<f64, RelaxationError> {
    let prepared = prepare(model, false, 1e-9);
    if prepared.infeasible {
        return Err(RelaxationError::Infeasible);
    }
    let sign = prepared.sign;
    let mut lp = Simplex::new(prepared.data);
    match lp.solve() {
        LpStatus::Optimal => Ok(sign * lp.objective()),
        LpStatus::Infeasible => Err(RelaxationError::Infeasible),
        LpStatus::Unbounded => Err(RelaxationError::Unbounded),
        LpStatus::Stopped => Err(RelaxationError::Numerical("iteration limit".into())),
        LpStatus::Numerical => Err(RelaxationError::Numerical("singular basis".into())),
    }
}

#[derive(Debug)]
struct BoundChange {
    var: usize,
    lower: f64,
    upper: f64,
    parent: Option<Rc<BoundChange>>,
}

#[derive(Debug)]
struct Node {
    id: u64,
    depth: usize,
    /// Lower bound inherited from the parent (internal minimisation sense).
    bound: f64,
    changes: Option<Rc<BoundChange>>,
}

#[derive(Debug, Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Default)]
struct OpenNodes {
    by_id: BTreeMap<u64, Node>,
    by_bound: BTreeSet<(Key, Reverse<usize>, u64)>,
}

impl OpenNodes {
    fn push(&mut self, node: Node) {
        self.by_bound.insert((Key(node.bound), Reverse(node.depth), node.id));
        self.by_id.insert(node.id, node);
    }

    fn take(&mut self, id: u64) -> Node {
        let node = self.by_id.remove(&id).expect("open node");
        self.by_bound.remove(&(Key(node.bound), Reverse(node.depth), node.id));
        node
    }

    /// Depth-first: the most recently created node.
    fn pop_newest(&mut self) -> Option<Node> {
        let id = *self.by_id.keys().next_back()?;
        Some(self.take(id))
    }

    fn pop_best(&mut self) -> Option<Node> {
        let &(_, _, id) = self.by_bound.iter().next()?;
        Some(self.take(id))
    }

    fn min_bound(&self) -> Option<f64> {
        self.by_bound.iter().next().map(|k| k.0 .0)
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    params: &'a SolveParams,
    integral: Vec<usize>,
    priority: Vec<u32>,
    integral_objective: bool,
    incumbent: Option<(Vec<f64>, f64)>,
    incumbent_time: Option<f64>,
    solutions: u64,
}

impl Search<'_> {
    fn effective_bound(&self, obj: f64) -> f64 {
        if self.integral_objective {
            (obj - 1e-6).ceil()
        } else {
            obj
        }
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((_, ub)) => ub - self.params.rel_gap_tol * ub.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    /// Highest priority, then most fractional, then lowest index.
    fn branching_candidate(&self, x: &[f64]) -> Option<(usize, f64)> {
        let tol = self.params.integrality_tol;
        let mut best: Option<(usize, f64, u32, f64)> = None;
        for &j in &self.integral {
            let v = x[j];
            let frac = v - v.floor();
            let dist = frac.min(1.0 - frac);
            if dist <= tol {
                continue;
            }
            let prio = self.priority[j];
            let better = match best {
                None => true,
                Some((_, _, bp, bd)) => prio > bp || (prio == bp && dist > bd + 1e-9),
            };
            if better {
                best = Some((j, v, prio, dist));
            }
        }
        best.map(|(j, v, _, _)| (j, v))
    }

    /// Accepts an integral LP point as incumbent when it satisfies the
    /// model within tolerance. Returns false when the point was rejected.
    fn try_incumbent(&mut self, x: &[f64], elapsed: f64, sign: f64) -> bool {
        let mut snapped = x.to_vec();
        for &j in &self.integral {
            snapped[j] = snapped[j].round();
        }
        let candidates = [snapped, x.to_vec()];
        for values in candidates {
            let (feas, integ) = self.model.max_violation(&values);
            if feas <= self.params.feasibility_tol && integ <= self.params.integrality_tol {
                let obj = sign * self.model.objective_value(&values);
                let internal = obj;
                let improves = match &self.incumbent {
                    None => true,
                    Some((_, ub)) => internal < *ub - 1e-9,
                };
                if improves {
                    self.incumbent = Some((values, internal));
                    self.incumbent_time = Some(elapsed);
                    self.solutions += 1;
                }
                return true;
            }
        }
        false
    }
}

fn apply_bounds(lp: &mut Simplex, changes: &Option<Rc<BoundChange>>, seen: &mut Vec<bool>) {
    lp.reset_bounds();
    seen.iter_mut().for_each(|s| *s = false);
    let mut cursor = changes.clone();
    // leaf-most change of each variable is the tightest one
    while let Some(change) = cursor {
        if !seen[change.var] {
            seen[change.var] = true;
            lp.lower[change.var] = change.lower;
            lp.upper[change.var] = change.upper;
        }
        cursor = change.parent.clone();
    }
}

/// Solves `model` by LP-based branch and bound.
pub fn solve(model: &MilpModel, params: &SolveParams) -> Result<SolveOutcome, ModelError> {
    params.validate()?;
    let started = Instant::now();
    let deadline = started + Duration::from_secs_f64(params.time_limit_s.min(1e9));
    let soft_deadline = params.soft_time_limit_s.map(|t| started + Duration::from_secs_f64(t.clamp(0.0, 1e9)));

    let prepared = prepare(model, true, params.feasibility_tol);
    if prepared.infeasible {
        return Ok(SolveOutcome::empty(SolveStatus::ProvenInfeasible, started));
    }
    let sign = prepared.sign;
    let n = model.num_variables();
    let vars = model.variables();
    let integral: Vec<usize> = (0..n).filter(|&j| vars[j].kind.is_integral()).collect();
    let integral_objective = model.objective().iter().all(|&(v, c)| {
        let kind = vars[v.0].kind;
        if kind.is_integral() {
            c == c.round()
        } else {
            c == 0.0
        }
    });
    let mut search = Search {
        model,
        params,
        integral,
        priority: vars.iter().map(|v| v.branch_priority).collect(),
        integral_objective,
        incumbent: None,
        incumbent_time: None,
        solutions: 0,
    };

    let mut lp = Simplex::new(prepared.data);
    lp.set_deadline(Some(deadline));
    let mut seen = vec![false; n];
    let mut open = OpenNodes::default();
    let mut next_id = 1u64;
    let mut next = Some(Node {
        id: 0,
        depth: 0,
        bound: f64::NEG_INFINITY,
        changes: None,
    });
    let mut nodes = 0u64;
    let mut root_bound = None;
    let mut stopped = false;
    let mut incomplete = false;

    loop {
        let node = match next.take() {
            Some(node) => node,
            None => {
                let picked = if search.incumbent.is_some() {
                    open.pop_best()
                } else {
                    open.pop_newest()
                };
                match picked {
                    Some(node) => node,
                    None => break,
                }
            }
        };
        if node.bound >= search.cutoff() {
            continue;
        }
        let out_of_nodes = params.node_limit.is_some_and(|limit| nodes >= limit)
            || params.solution_limit.is_some_and(|limit| search.solutions >= limit);
        let now = Instant::now();
        let soft_stop = search.incumbent.is_some() && soft_deadline.is_some_and(|soft| now >= soft);
        if out_of_nodes || soft_stop || now >= deadline {
            open.push(node);
            stopped = true;
            break;
        }
        apply_bounds(&mut lp, &node.changes, &mut seen);
        let status = lp.solve();
        if status != LpStatus::Stopped {
            nodes += 1;
        }
        match status {
            LpStatus::Infeasible => continue,
            LpStatus::Stopped => {
                open.push(node);
                stopped = true;
                break;
            }
            LpStatus::Numerical => {
                incomplete = true;
                continue;
            }
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    let mut out = SolveOutcome::empty(SolveStatus::Unbounded, started);
                    out.nodes = nodes;
                    out.lp_iterations = lp.iterations;
                    return Ok(out);
                }
                incomplete = true;
                continue;
            }
            LpStatus::Optimal => {}
        }
        let obj = lp.objective();
        if node.depth == 0 {
            root_bound = Some(obj);
        }
        let bound = search.effective_bound(obj).max(node.bound);
        if bound >= search.cutoff() {
            continue;
        }
        let x = lp.structural_values().to_vec();
        match search.branching_candidate(&x) {
            None => {
                let elapsed = started.elapsed().as_secs_f64();
                if !search.try_incumbent(&x, elapsed, sign) {
                    incomplete = true;
                }
            }
            Some((j, value)) => {
                let (lo, hi) = (lp.lower[j], lp.upper[j]);
                let down = Node {
                    id: next_id,
                    depth: node.depth + 1,
                    bound,
                    changes: Some(Rc::new(BoundChange {
                        var: j,
                        lower: lo,
                        upper: value.floor(),
                        parent: node.changes.clone(),
                    })),
                };
                let up = Node {
                    id: next_id + 1,
                    depth: node.depth + 1,
                    bound,
                    changes: Some(Rc::new(BoundChange {
                        var: j,
                        lower: value.ceil(),
                        upper: hi,
                        parent: node.changes.clone(),
                    })),
                };
                next_id += 2;
                // without an incumbent, dive towards the rounded-up side
                if search.incumbent.is_none() {
                    open.push(down);
                    next = Some(up);
                } else {
                    open.push(up);
                    next = Some(down);
                }
            }
        }
    }

    let total_time_s = started.elapsed().as_secs_f64();
    let ub = search.incumbent.as_ref().map(|(_, ub)| *ub);
    let internal_lb = if stopped || incomplete {
        let open_min = open.min_bound();
        match (open_min, ub) {
            (Some(b), Some(u)) => Some(b.min(u)),
            (Some(b), None) => Some(b),
            (None, u) => u,
        }
        .map(|b| match root_bound {
            Some(r) => b.max(search.effective_bound(r).min(ub.unwrap_or(f64::INFINITY))),
            None => b,
        })
        .filter(|b| b.is_finite())
    } else {
        ub
    };
    let status = match (stopped || incomplete, ub.is_some()) {
        (false, true) => SolveStatus::Optimal,
        (false, false) => SolveStatus::ProvenInfeasible,
        (true, true) => SolveStatus::FeasibleTimeLimit,
        (true, false) => SolveStatus::UnknownTimeLimit,
    };
    let incumbent = search.incumbent.take().map(|(values, internal)| Incumbent {
        objective: sign * internal,
        values,
    });
    Ok(SolveOutcome {
        status,
        incumbent,
        best_bound: internal_lb.map(|b| sign * b),
        root_bound: root_bound.map(|r| sign * r),
        nodes,
        lp_iterations: lp.iterations,
        total_time_s,
        incumbent_time_s: search.incumbent_time,
    })
}
