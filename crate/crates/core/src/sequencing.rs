use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rmfs_milp::{solve, MilpModel, ModelError, ObjectiveSense, Sense, SolveParams, SolveStatus, VarRef, Variable};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::instance::{Instance, Units};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequencingError {
    #[error("product {product}: demand {demand} exceeds supply {supply} at the picker")]
    SupplyShortfall { product: usize, demand: u64, supply: u64 },
    #[error("order {0} has no units")]
    EmptyOrder(usize),
    #[error("at least one bin position is required")]
    NoBins,
    #[error("picker {picker} out of range ({pickers} pickers)")]
    UnknownPicker { picker: usize, pickers: usize },
    #[error("the model needs a finite revisit limit")]
    UnboundedRevisits,
    #[error("single-unit order {order} could not be placed on the sequence")]
    ReinsertionFailed { order: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Orders and racks of one picker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencingInstance {
    pub orders: Vec<Units>,
    /// Original order index of each local order.
    pub order_ids: Vec<usize>,
    /// Supply per local rack (the per-picker draws in shared-rack mode).
    pub racks: Vec<Units>,
    pub rack_ids: Vec<usize>,
    pub bins: usize,
}

impl SequencingInstance {
    pub fn new(orders: Vec<Units>, racks: Vec<Units>, bins: usize) -> Result<Self, SequencingError> {
        let order_ids = (0..orders.len()).collect();
        let rack_ids = (0..racks.len()).collect();
        Self::with_ids(orders, order_ids, racks, rack_ids, bins)
    }

    pub fn with_ids(
        orders: Vec<Units>,
        order_ids: Vec<usize>,
        racks: Vec<Units>,
        rack_ids: Vec<usize>,
        bins: usize,
    ) -> Result<Self, SequencingError> {
        if bins == 0 {
            return Err(SequencingError::NoBins);
        }
        let inst = Self {
            orders: orders.into_iter().map(|o| o.into_iter().filter(|&(_, q)| q > 0).collect()).collect(),
            order_ids,
            racks: racks.into_iter().map(|r| r.into_iter().filter(|&(_, s)| s > 0).collect()).collect(),
            rack_ids,
            bins,
        };
        if let Some(o) = inst.orders.iter().position(|o| o.is_empty()) {
            return Err(SequencingError::EmptyOrder(o));
        }
        inst.check_supply()?;
        Ok(inst)
    }

    pub fn num_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn num_racks(&self) -> usize {
        self.racks.len()
    }

    /// Demanded products, ascending.
    pub fn products(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.orders.iter().flat_map(|o| o.keys().copied()).collect();
        set.into_iter().collect()
    }

    pub fn demand(&self, order: usize, product: usize) -> u32 {
        self.orders[order].get(&product).copied().unwrap_or(0)
    }

    pub fn supply(&self, rack: usize, product: usize) -> u32 {
        self.racks[rack].get(&product).copied().unwrap_or(0)
    }

    /// The product of an order made of a single unit.
    pub fn single_unit_product(&self, order: usize) -> Option<usize> {
        let o = &self.orders[order];
        if o.values().map(|&q| q as u64).sum::<u64>() == 1 {
            o.keys().next().copied()
        } else {
            None
        }
    }

    pub fn check_supply(&self) -> Result<(), SequencingError> {
        let mut demand: BTreeMap<usize, u64> = BTreeMap::new();
        for o in &self.orders {
            for (&i, &q) in o {
                *demand.entry(i).or_default() += q as u64;
            }
        }
        for (&product, &d) in &demand {
            let supply: u64 = self.racks.iter().map(|r| r.get(&product).copied().unwrap_or(0) as u64).sum();
            if d > supply {
                return Err(SequencingError::SupplyShortfall {
                    product,
                    demand: d,
                    supply,
                });
            }
        }
        Ok(())
    }
}

/// Orders and racks of `picker` under `allocation`. In shared-rack mode the
/// per-picker draws act as rack supply.
pub fn derive_sequencing_instance(
    instance: &Instance,
    allocation: &Allocation,
    picker: usize,
    bins: usize,
) -> Result<SequencingInstance, SequencingError> {
    let pickers = allocation.orders_of_picker.len();
    if picker >= pickers {
        return Err(SequencingError::UnknownPicker { picker, pickers });
    }
    let order_ids = allocation.orders_of_picker[picker].clone();
    let rack_ids = allocation.racks_of_picker[picker].clone();
    let orders: Vec<Units> = order_ids.iter().map(|&o| instance.orders[o].clone()).collect();
    let demanded: BTreeSet<usize> = orders.iter().flat_map(|o| o.keys().copied()).collect();
    let shared = !allocation.draws.is_empty();
    let racks: Vec<Units> = rack_ids
        .iter()
        .map(|&r| {
            if shared {
                let mut supply = Units::new();
                for d in allocation.draws.iter().filter(|d| d.rack == r && d.picker == picker) {
                    *supply.entry(d.product).or_insert(0) += d.units;
                }
                supply
            } else {
                instance.racks[r].iter().filter(|(i, _)| demanded.contains(i)).map(|(&i, &s)| (i, s)).collect()
            }
        })
        .collect();
    SequencingInstance::with_ids(orders, order_ids, racks, rack_ids, bins)
}

/// Revisit limit and bin regime of a sequencing run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SequencingMode {
    /// Extra presentations allowed per rack; `None` means unlimited and is only
    /// meaningful for checking constructed sequences.
    pub revisits: Option<u32>,
    pub single_bin: bool,
}

impl SequencingMode {
    pub const NO_REVISIT: Self = Self {
        revisits: Some(0),
        single_bin: false,
    };
    pub const SINGLE_BIN: Self = Self {
        revisits: Some(0),
        single_bin: true,
    };
    pub const UNBOUNDED: Self = Self {
        revisits: None,
        single_bin: false,
    };

    pub fn revisit(m: u32) -> Self {
        Self {
            revisits: Some(m),
            single_bin: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pick {
    pub product: usize,
    pub order: usize,
    pub position: usize,
    pub units: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSolution {
    /// Local rack index presented at each position.
    pub rack_order: Vec<usize>,
    pub picks: Vec<Pick>,
    /// `open[o][k]`: order o occupies a bin while position k is served.
    pub open: Vec<Vec<bool>>,
    /// `close[o][k]`: order o is completed at position k.
    pub close: Vec<Vec<bool>>,
}

impl SequenceSolution {
    /// Builds open/close flags from the picks: each order is open from its first
    /// pick to its last pick and closes at the last one.
    pub fn from_picks(num_orders: usize, rack_order: Vec<usize>, mut picks: Vec<Pick>) -> Self {
        let k = rack_order.len();
        let mut open = vec![vec![false; k]; num_orders];
        let mut close = vec![vec![false; k]; num_orders];
        let mut span: Vec<Option<(usize, usize)>> = vec![None; num_orders];
        for p in &picks {
            let s = span[p.order].get_or_insert((p.position, p.position));
            s.0 = s.0.min(p.position);
            s.1 = s.1.max(p.position);
        }
        for (o, s) in span.iter().enumerate() {
            if let Some((a, b)) = *s {
                for flag in &mut open[o][a..=b] {
                    *flag = true;
                }
                close[o][b] = true;
            }
        }
        picks.sort();
        Self {
            rack_order,
            picks,
            open,
            close,
        }
    }

    pub fn slots(&self) -> usize {
        self.rack_order.len()
    }

    /// Distinct racks presented at least once.
    pub fn distinct_racks(&self) -> usize {
        self.rack_order.iter().collect::<BTreeSet<_>>().len()
    }

    /// Orders holding a non-dedicated bin at position k.
    pub fn occupancy(&self, k: usize) -> usize {
        self.open.iter().zip(&self.close).filter(|(a, b)| a[k] && !b[k]).count()
    }
}

#[derive(Debug, Clone)]
pub struct SequencingModel {
    pub model: MilpModel,
    /// `z[k][c]`: rack slot c (a rack or one of its copies) at position k.
    pub z: Vec<Vec<VarRef>>,
    pub alpha: Vec<Vec<VarRef>>,
    pub beta: Vec<Vec<VarRef>>,
    /// `(product, order, position)`
    pub gamma: BTreeMap<(usize, usize, usize), VarRef>,
    /// `(product, order, rack slot)`; revisit mode only.
    pub taken: BTreeMap<(usize, usize, usize), VarRef>,
    /// `(product, order, position, rack slot)`; revisit mode only.
    pub linked: BTreeMap<(usize, usize, usize, usize), VarRef>,
    /// Original rack of each rack slot.
    pub rack_of_slot: Vec<usize>,
}

impl SequencingModel {
    pub fn extract(&self, values: &[f64]) -> SequenceSolution {
        let rack_order = self
            .z
            .iter()
            .map(|row| {
                let c = row.iter().position(|v| values[v.0] > 0.5).unwrap_or(0);
                self.rack_of_slot[c]
            })
            .collect();
        let picks = self
            .gamma
            .iter()
            .filter_map(|(&(product, order, position), v)| {
                let units = values[v.0].round();
                (units >= 1.0).then_some(Pick {
                    product,
                    order,
                    position,
                    units: units as u32,
                })
            })
            .collect();
        let flags = |m: &Vec<Vec<VarRef>>| m.iter().map(|row| row.iter().map(|v| values[v.0] > 0.5).collect()).collect();
        SequenceSolution {
            rack_order,
            picks,
            open: flags(&self.alpha),
            close: flags(&self.beta),
        }
    }
}

/// Feasibility program for rack order, order windows and picks.
pub fn build_sequencing_model(inst: &SequencingInstance, mode: SequencingMode) -> Result<SequencingModel, SequencingError> {
    let m = mode.revisits.ok_or(SequencingError::UnboundedRevisits)? as usize;
    let l = inst.num_racks();
    let k_count = (m + 1) * l;
    let rack_of_slot: Vec<usize> = (0..k_count).map(|c| c % l.max(1)).collect();
    let products = inst.products();
    let held: BTreeSet<usize> = inst.racks.iter().flat_map(|r| r.keys().copied()).collect();
    let o_count = inst.num_orders();
    let single: Vec<Option<usize>> = (0..o_count).map(|o| inst.single_unit_product(o)).collect();
    let slot_supply = |c: usize, i: usize| inst.supply(rack_of_slot[c], i);

    let mut model = MilpModel::new(ObjectiveSense::Minimize);
    let mut z = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let row = (0..k_count)
            .map(|c| model.add_variable(Variable::binary(format!("z_{k}_{c}")).with_priority(2)))
            .collect::<Result<Vec<_>, _>>()?;
        z.push(row);
    }
    let mut alpha = Vec::with_capacity(o_count);
    let mut beta = Vec::with_capacity(o_count);
    for o in 0..o_count {
        let mut a = Vec::with_capacity(k_count);
        let mut b = Vec::with_capacity(k_count);
        for k in 0..k_count {
            a.push(model.add_variable(Variable::binary(format!("alpha_{o}_{k}")).with_priority(1))?);
            b.push(model.add_variable(Variable::binary(format!("beta_{o}_{k}")).with_priority(1))?);
        }
        alpha.push(a);
        beta.push(b);
    }
    let mut gamma = BTreeMap::new();
    for (o, order) in inst.orders.iter().enumerate() {
        for (&i, &q) in order {
            if !held.contains(&i) {
                continue;
            }
            for k in 0..k_count {
                let v = model.add_variable(Variable::integer(format!("gamma_{i}_{o}_{k}"), 0.0, q as f64))?;
                gamma.insert((i, o, k), v);
            }
        }
    }

    for c in 0..k_count {
        let terms = (0..k_count).map(|k| (z[k][c], 1.0)).collect();
        model.add_constraint_terms(format!("slot_once_{c}"), terms, Sense::Eq, 1.0)?;
    }
    for (k, row) in z.iter().enumerate() {
        let terms = row.iter().map(|&v| (v, 1.0)).collect();
        model.add_constraint_terms(format!("position_once_{k}"), terms, Sense::Eq, 1.0)?;
    }
    for &i in &products {
        for k in 0..k_count {
            let mut terms: Vec<(VarRef, f64)> = (0..o_count).filter_map(|o| gamma.get(&(i, o, k)).map(|&v| (v, 1.0))).collect();
            if terms.is_empty() {
                continue;
            }
            for c in 0..k_count {
                let s = slot_supply(c, i);
                if s > 0 {
                    terms.push((z[k][c], -(s as f64)));
                }
            }
            model.add_constraint_terms(format!("slot_supply_{i}_{k}"), terms, Sense::Le, 0.0)?;
        }
    }
    for (o, order) in inst.orders.iter().enumerate() {
        for (&i, &q) in order {
            let terms = (0..k_count).filter_map(|k| gamma.get(&(i, o, k)).map(|&v| (v, 1.0))).collect();
            model.add_constraint_terms(format!("demand_{i}_{o}"), terms, Sense::Eq, q as f64)?;
            for k in 0..k_count {
                if let Some(&g) = gamma.get(&(i, o, k)) {
                    model.add_constraint_terms(format!("pick_when_open_{i}_{o}_{k}"), vec![(g, 1.0), (alpha[o][k], -(q as f64))], Sense::Le, 0.0)?;
                }
            }
        }
    }
    let capacity = if mode.single_bin { 1.0 } else { inst.bins as f64 - 1.0 };
    for k in 0..k_count {
        let terms = (0..o_count).flat_map(|o| [(alpha[o][k], 1.0), (beta[o][k], -1.0)]).collect();
        model.add_constraint_terms(format!("bins_{k}"), terms, Sense::Le, capacity)?;
    }
    for o in 0..o_count {
        let terms = (0..k_count).map(|k| (beta[o][k], 1.0)).collect();
        model.add_constraint_terms(format!("close_once_{o}"), terms, Sense::Eq, 1.0)?;
        if let Some(tau) = single[o] {
            for k in 0..k_count {
                model.add_constraint_terms(format!("same_rack_{o}_{k}"), vec![(alpha[o][k], 1.0), (beta[o][k], -1.0)], Sense::Eq, 0.0)?;
                let mut terms = vec![(alpha[o][k], -1.0)];
                if let Some(&g) = gamma.get(&(tau, o, k)) {
                    terms.push((g, 1.0));
                }
                model.add_constraint_terms(format!("single_pick_{o}_{k}"), terms, Sense::Eq, 0.0)?;
            }
            continue;
        }
        let gamma = &gamma;
        let picks_in = |range: std::ops::Range<usize>| -> Vec<(VarRef, f64)> {
            range
                .flat_map(|n| inst.orders[o].keys().filter_map(move |&i| gamma.get(&(i, o, n)).map(|&v| (v, 1.0))))
                .collect()
        };
        if k_count > 0 {
            let mut terms = vec![(beta[o][0], 1.0)];
            terms.extend(picks_in(1..k_count));
            model.add_constraint_terms(format!("close_first_{o}"), terms, Sense::Ge, 1.0)?;
        }
        for k in 1..k_count.saturating_sub(1) {
            let mut terms = vec![(beta[o][k], 1.0)];
            terms.extend(picks_in(k + 1..k_count));
            terms.extend((0..k).map(|n| (beta[o][n], 1.0)));
            model.add_constraint_terms(format!("close_when_done_{o}_{k}"), terms, Sense::Ge, 1.0)?;
        }
        for k in 0..k_count {
            let mut terms = vec![(alpha[o][k], 1.0)];
            terms.extend(picks_in(0..k + 1).into_iter().map(|(v, _)| (v, -1.0)));
            model.add_constraint_terms(format!("open_after_pick_{o}_{k}"), terms, Sense::Le, 0.0)?;
        }
        for k in 1..k_count {
            let mut terms = vec![(alpha[o][k], 1.0)];
            terms.extend((0..k).map(|n| (beta[o][n], 1.0)));
            model.add_constraint_terms(format!("no_reopen_{o}_{k}"), terms, Sense::Le, 1.0)?;
        }
        for k in 0..k_count.saturating_sub(1) {
            model.add_constraint_terms(
                format!("stay_open_{o}_{k}"),
                vec![(alpha[o][k + 1], 1.0), (alpha[o][k], -1.0), (beta[o][k], 1.0)],
                Sense::Ge,
                0.0,
            )?;
        }
    }
    if mode.single_bin {
        for k in 1..k_count.saturating_sub(1) {
            for d in (0..o_count).filter(|&d| single[d].is_none()) {
                for o in (0..o_count).filter(|&o| single[o].is_some()) {
                    let mut terms = vec![(alpha[o][k], 1.0), (alpha[d][k - 1], 1.0)];
                    terms.extend((k + 1..k_count).map(|n| (beta[d][n], 1.0)));
                    model.add_constraint_terms(format!("single_bin_{d}_{o}_{k}"), terms, Sense::Le, 2.0)?;
                }
            }
        }
    }

    let mut taken = BTreeMap::new();
    let mut linked = BTreeMap::new();
    if m >= 1 {
        for (o, order) in inst.orders.iter().enumerate() {
            for (&i, &q) in order {
                for c in 0..k_count {
                    let s = slot_supply(c, i);
                    if s == 0 {
                        continue;
                    }
                    let cap = q.min(s) as f64;
                    let g = model.add_variable(Variable::integer(format!("taken_{i}_{o}_{c}"), 0.0, cap))?;
                    taken.insert((i, o, c), g);
                    let mut sum = vec![(g, 1.0)];
                    for k in 0..k_count {
                        let lam = model.add_variable(Variable::integer(format!("link_{i}_{o}_{k}_{c}"), 0.0, cap))?;
                        linked.insert((i, o, k, c), lam);
                        sum.push((lam, -1.0));
                        let gk = gamma[&(i, o, k)];
                        model.add_constraint_terms(format!("link_on_{i}_{o}_{k}_{c}"), vec![(lam, 1.0), (z[k][c], -cap)], Sense::Le, 0.0)?;
                        model.add_constraint_terms(
                            format!("link_lo_{i}_{o}_{k}_{c}"),
                            vec![(lam, 1.0), (gk, -1.0), (z[k][c], -cap)],
                            Sense::Ge,
                            -cap,
                        )?;
                        model.add_constraint_terms(
                            format!("link_hi_{i}_{o}_{k}_{c}"),
                            vec![(lam, 1.0), (gk, -1.0), (z[k][c], cap)],
                            Sense::Le,
                            cap,
                        )?;
                    }
                    model.add_constraint_terms(format!("taken_sum_{i}_{o}_{c}"), sum, Sense::Eq, 0.0)?;
                }
            }
        }
        for &i in &products {
            for r in 0..l {
                let terms: Vec<(VarRef, f64)> = (0..=m)
                    .flat_map(|copy| {
                        let c = r + copy * l;
                        (0..o_count).filter_map(|o| taken.get(&(i, o, c)).map(|&v| (v, 1.0))).collect::<Vec<_>>()
                    })
                    .collect();
                if !terms.is_empty() {
                    model.add_constraint_terms(format!("rack_stock_{i}_{r}"), terms, Sense::Le, inst.supply(r, i) as f64)?;
                }
            }
        }
    }

    Ok(SequencingModel {
        model,
        z,
        alpha,
        beta,
        gamma,
        taken,
        linked,
        rack_of_slot,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceResult {
    Feasible(SequenceSolution),
    ProvenInfeasible,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutcome {
    pub result: SequenceResult,
    pub nodes: u64,
    pub time_s: f64,
    /// True when single-unit orders were set aside and reinserted.
    pub reduced: bool,
}

impl SequenceOutcome {
    pub fn solution(&self) -> Option<&SequenceSolution> {
        match &self.result {
            SequenceResult::Feasible(s) => Some(s),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.result {
            SequenceResult::Feasible(_) => "feasible",
            SequenceResult::ProvenInfeasible => "infeasible",
            SequenceResult::Unknown => "TL",
        }
    }
}

/// The instance without single-unit orders, and what was set aside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub instance: SequencingInstance,
    /// Full-instance index of each remaining order.
    pub kept: Vec<usize>,
    /// `(order, product)` of each removed single-unit order, ascending.
    pub deferred: Vec<(usize, usize)>,
}

pub fn reduce_single_unit_orders(inst: &SequencingInstance) -> Reduction {
    let mut kept = Vec::new();
    let mut deferred = Vec::new();
    for o in 0..inst.num_orders() {
        match inst.single_unit_product(o) {
            Some(i) => deferred.push((o, i)),
            None => kept.push(o),
        }
    }
    let instance = SequencingInstance {
        orders: kept.iter().map(|&o| inst.orders[o].clone()).collect(),
        order_ids: kept.iter().map(|&o| inst.order_ids[o]).collect(),
        racks: inst.racks.clone(),
        rack_ids: inst.rack_ids.clone(),
        bins: inst.bins,
    };
    Reduction {
        instance,
        kept,
        deferred,
    }
}

/// Walks the sequence and serves set-aside single-unit orders from whatever
/// stock is left, each opened and closed on one rack.
pub fn reinsert_single_unit_orders(
    reduced: &SequenceSolution,
    reduction: &Reduction,
    full: &SequencingInstance,
) -> Result<SequenceSolution, SequencingError> {
    let mut left: Vec<Units> = full.racks.clone();
    let mut picks: Vec<Pick> = Vec::with_capacity(reduced.picks.len() + reduction.deferred.len());
    for p in &reduced.picks {
        let rack = reduced.rack_order[p.position];
        if let Some(s) = left[rack].get_mut(&p.product) {
            *s = s.saturating_sub(p.units);
        }
        picks.push(Pick {
            order: reduction.kept[p.order],
            ..*p
        });
    }
    let mut placed = vec![false; reduction.deferred.len()];
    for (position, &rack) in reduced.rack_order.iter().enumerate() {
        for (slot, &(order, product)) in reduction.deferred.iter().enumerate() {
            if placed[slot] {
                continue;
            }
            if let Some(s) = left[rack].get_mut(&product).filter(|s| **s > 0) {
                *s -= 1;
                placed[slot] = true;
                picks.push(Pick {
                    product,
                    order,
                    position,
                    units: 1,
                });
            }
        }
    }
    if let Some(slot) = placed.iter().position(|p| !p) {
        return Err(SequencingError::ReinsertionFailed {
            order: reduction.deferred[slot].0,
        });
    }
    let k = reduced.slots();
    let o_count = full.num_orders();
    let mut open = vec![vec![false; k]; o_count];
    let mut close = vec![vec![false; k]; o_count];
    for (local, &o) in reduction.kept.iter().enumerate() {
        open[o] = reduced.open[local].clone();
        close[o] = reduced.close[local].clone();
    }
    for p in picks.iter().filter(|p| reduction.deferred.iter().any(|d| d.0 == p.order)) {
        open[p.order][p.position] = true;
        close[p.order][p.position] = true;
    }
    picks.sort();
    Ok(SequenceSolution {
        rack_order: reduced.rack_order.clone(),
        picks,
        open,
        close,
    })
}

fn identity_sequence(inst: &SequencingInstance, mode: SequencingMode) -> SequenceSolution {
    let copies = mode.revisits.unwrap_or(0) as usize + 1;
    let rack_order = (0..copies * inst.num_racks()).map(|c| c % inst.num_racks()).collect();
    SequenceSolution::from_picks(inst.num_orders(), rack_order, Vec::new())
}

/// Decides whether the picker can serve its orders with the given bins.
pub fn solve_sequencing(
    inst: &SequencingInstance,
    mode: SequencingMode,
    params: &SolveParams,
    use_theorem2: bool,
) -> Result<SequenceOutcome, SequencingError> {
    let started = Instant::now();
    inst.check_supply()?;
    let reduce = use_theorem2 && !mode.single_bin && inst.bins >= 2 && (0..inst.num_orders()).any(|o| inst.single_unit_product(o).is_some());
    let reduction = reduce.then(|| reduce_single_unit_orders(inst));
    let target = reduction.as_ref().map_or(inst, |r| &r.instance);

    let (solution, nodes) = if target.num_orders() == 0 {
        (Some(identity_sequence(target, mode)), 0)
    } else {
        let built = build_sequencing_model(target, mode)?;
        let outcome = solve(&built.model, params)?;
        let result = match outcome.status {
            SolveStatus::ProvenInfeasible => {
                return Ok(SequenceOutcome {
                    result: SequenceResult::ProvenInfeasible,
                    nodes: outcome.nodes,
                    time_s: started.elapsed().as_secs_f64(),
                    reduced: reduce,
                })
            }
            _ => outcome.incumbent.as_ref().map(|inc| built.extract(&inc.values)),
        };
        (result, outcome.nodes)
    };
    let result = match (solution, &reduction) {
        (None, _) => SequenceResult::Unknown,
        (Some(s), None) => SequenceResult::Feasible(s),
        (Some(s), Some(r)) => SequenceResult::Feasible(reinsert_single_unit_orders(&s, r, inst)?),
    };
    Ok(SequenceOutcome {
        result,
        nodes,
        time_s: started.elapsed().as_secs_f64(),
        reduced: reduce,
    })
}

/// Serves orders one at a time, repeatedly drawing the rack that covers most of
/// the current order's remaining need. Repeated draws become revisits; racks
/// never drawn are presented at the end.
pub fn pool_greedy_sequence(inst: &SequencingInstance) -> Result<SequenceSolution, SequencingError> {
    inst.check_supply()?;
    let mut left: Vec<Units> = inst.racks.clone();
    let mut rack_order: Vec<usize> = Vec::new();
    let mut picks: Vec<Pick> = Vec::new();
    for (o, order) in inst.orders.iter().enumerate() {
        let mut need = order.clone();
        while need.values().any(|&q| q > 0) {
            let cover = |r: usize| -> u32 { need.iter().map(|(i, &q)| q.min(left[r].get(i).copied().unwrap_or(0))).sum() };
            let (rack, best) = (0..inst.num_racks())
                .map(|r| (r, cover(r)))
                .fold((usize::MAX, 0), |acc, (r, c)| if c > acc.1 { (r, c) } else { acc });
            if best == 0 {
                let product = *need.iter().find(|(_, &q)| q > 0).expect("open need").0;
                return Err(SequencingError::SupplyShortfall {
                    product,
                    demand: need[&product] as u64,
                    supply: 0,
                });
            }
            if rack_order.last() != Some(&rack) {
                rack_order.push(rack);
            }
            let position = rack_order.len() - 1;
            for (&i, q) in need.iter_mut() {
                let stock = left[rack].entry(i).or_insert(0);
                let units = (*q).min(*stock);
                if units > 0 {
                    *q -= units;
                    *stock -= units;
                    picks.push(Pick {
                        product: i,
                        order: o,
                        position,
                        units,
                    });
                }
            }
        }
    }
    let drawn: BTreeSet<usize> = rack_order.iter().copied().collect();
    rack_order.extend((0..inst.num_racks()).filter(|r| !drawn.contains(r)));
    Ok(SequenceSolution::from_picks(inst.num_orders(), rack_order, picks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::s1;
    use crate::instance::units;

    fn params() -> SolveParams {
        SolveParams::with_time_limit(30.0)
    }

    #[test]
    fn single_unit_detection() {
        let inst = SequencingInstance::new(
            vec![units([(0, 1)]), units([(0, 1), (1, 1)]), units([(0, 2)])],
            vec![units([(0, 4), (1, 1)])],
            2,
        )
        .unwrap();
        assert_eq!(inst.single_unit_product(0), Some(0));
        assert_eq!(inst.single_unit_product(1), None);
        assert_eq!(inst.single_unit_product(2), None);
    }

    #[test]
    fn shortfall_rejected() {
        let err = SequencingInstance::new(vec![units([(0, 3)])], vec![units([(0, 2)])], 2).unwrap_err();
        assert!(matches!(err, SequencingError::SupplyShortfall { product: 0, demand: 3, supply: 2 }));
    }

    #[test]
    fn s1_model_sizes() {
        let built = build_sequencing_model(&s1(3), SequencingMode::NO_REVISIT).unwrap();
        assert_eq!(built.z.len(), 2);
        assert_eq!(built.gamma.len(), 8);
        let built = build_sequencing_model(&s1(2), SequencingMode::revisit(1)).unwrap();
        assert_eq!(built.z.len(), 4);
        let stock_rows: Vec<_> = built.model.constraints().iter().filter(|c| c.name.starts_with("rack_stock_")).map(|c| c.name.clone()).collect();
        assert_eq!(stock_rows, vec!["rack_stock_0_0", "rack_stock_1_1"]);
    }

    #[test]
    fn s1_decisions() {
        let decide = |bins, mode| solve_sequencing(&s1(bins), mode, &params(), true).unwrap().result;
        assert_eq!(decide(2, SequencingMode::NO_REVISIT), SequenceResult::ProvenInfeasible);
        assert!(matches!(decide(3, SequencingMode::NO_REVISIT), SequenceResult::Feasible(_)));
        assert!(matches!(decide(2, SequencingMode::revisit(1)), SequenceResult::Feasible(_)));
    }

    #[test]
    fn pool_greedy_on_s1() {
        let sol = pool_greedy_sequence(&s1(2)).unwrap();
        assert_eq!(sol.rack_order, vec![0, 1, 0, 1]);
    }

    #[test]
    fn pool_greedy_single_rack_many_single_orders() {
        let inst = SequencingInstance::new(
            vec![units([(0, 1)]), units([(1, 1)]), units([(0, 1)])],
            vec![units([(0, 2), (1, 1)]), units([(2, 1)])],
            1,
        )
        .unwrap();
        let sol = pool_greedy_sequence(&inst).unwrap();
        assert_eq!(sol.rack_order, vec![0, 1]);
        assert!(sol.close.iter().all(|c| c[0]));
    }

    #[test]
    fn reduction_partitions_orders() {
        let inst = SequencingInstance::new(
            vec![units([(0, 1)]), units([(0, 1), (1, 1)]), units([(1, 1)])],
            vec![units([(0, 2)]), units([(1, 2)])],
            2,
        )
        .unwrap();
        let red = reduce_single_unit_orders(&inst);
        assert_eq!(red.kept, vec![1]);
        assert_eq!(red.deferred, vec![(0, 0), (2, 1)]);
        assert_eq!(red.instance.racks, inst.racks);
    }

    #[test]
    fn reinsertion_uses_last_rack_when_forced() {
        // the only spare p1 unit sits on the rack presented last
        let inst = SequencingInstance::new(
            vec![units([(0, 1), (1, 1)]), units([(1, 1)])],
            vec![units([(0, 1)]), units([(1, 2)])],
            2,
        )
        .unwrap();
        let out = solve_sequencing(&inst, SequencingMode::NO_REVISIT, &params(), true).unwrap();
        assert!(out.reduced);
        let sol = out.solution().unwrap();
        let pick = sol.picks.iter().find(|p| p.order == 1).unwrap();
        assert_eq!(sol.rack_order[pick.position], 1);
        assert!(sol.open[1][pick.position] && sol.close[1][pick.position]);
    }
}
