use std::collections::BTreeMap;
use std::fmt;

use crate::sequencing::{SequenceSolution, SequencingInstance, SequencingMode};

/// One violated condition found by a verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub family: &'static str,
    pub indices: Vec<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, family: &'static str, indices: Vec<usize>, detail: impl Into<String>) {
        self.violations.push(Violation {
            family,
            indices,
            detail: detail.into(),
        });
    }

    pub fn has(&self, family: &str) -> bool {
        self.violations.iter().any(|v| v.family == family)
    }

    pub fn families(&self) -> Vec<&'static str> {
        let mut f: Vec<_> = self.violations.iter().map(|v| v.family).collect();
        f.dedup();
        f
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{} {:?}: {}", v.family, v.indices, v.detail)?;
        }
        Ok(())
    }
}

/// Checks a rack sequence against the picker's orders, racks and bins.
///
/// Orders occupy a bin from their first pick to their last pick and close at
/// the last pick. An order opened and closed at the same position uses the
/// dedicated bin; every other open order needs one of the `bins - 1` others.
pub fn verify_sequence(inst: &SequencingInstance, mode: SequencingMode, sol: &SequenceSolution) -> VerifyReport {
    let mut report = VerifyReport::default();
    let k_count = sol.rack_order.len();
    let l = inst.num_racks();
    let o_count = inst.num_orders();

    if sol.open.len() != o_count || sol.close.len() != o_count || sol.open.iter().chain(&sol.close).any(|row| row.len() != k_count) {
        report.push("shape", vec![], format!("open/close must be {o_count} x {k_count}"));
        return report;
    }
    if let Some((k, &r)) = sol.rack_order.iter().enumerate().find(|(_, &r)| r >= l) {
        report.push("shape", vec![k, r], format!("position {k} shows rack {r} of {l}"));
        return report;
    }
    let mut shown = vec![0usize; l];
    for &r in &sol.rack_order {
        shown[r] += 1;
    }
    for (r, &n) in shown.iter().enumerate() {
        let bad = match mode.revisits {
            Some(m) => n != m as usize + 1,
            None => n == 0,
        };
        if bad {
            report.push("rack_slots", vec![r], format!("rack {r} presented {n} times"));
        }
    }

    let mut got: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut at_position: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut from_rack: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut span: Vec<Option<(usize, usize)>> = vec![None; o_count];
    for p in &sol.picks {
        if p.order >= o_count || p.position >= k_count || p.units == 0 {
            report.push("pick", vec![p.order, p.position], format!("malformed pick {p:?}"));
            continue;
        }
        if inst.demand(p.order, p.product) == 0 {
            report.push("pick", vec![p.order, p.product], format!("order {} does not need product {}", p.order, p.product));
        }
        *got.entry((p.order, p.product)).or_default() += p.units as u64;
        *at_position.entry((p.position, p.product)).or_default() += p.units as u64;
        *from_rack.entry((sol.rack_order[p.position], p.product)).or_default() += p.units as u64;
        let s = span[p.order].get_or_insert((p.position, p.position));
        s.0 = s.0.min(p.position);
        s.1 = s.1.max(p.position);
        if !sol.open[p.order][p.position] {
            report.push("pick_when_open", vec![p.order, p.position], format!("order {} picks at {} while not open", p.order, p.position));
        }
    }
    for (o, order) in inst.orders.iter().enumerate() {
        for (&i, &q) in order {
            let n = got.get(&(o, i)).copied().unwrap_or(0);
            if n != q as u64 {
                report.push("demand", vec![o, i], format!("order {o} gets {n} of product {i}, needs {q}"));
            }
        }
    }
    for (&(k, i), &n) in &at_position {
        let s = inst.supply(sol.rack_order[k], i) as u64;
        if n > s {
            report.push("slot_supply", vec![k, i], format!("position {k} gives {n} of product {i}, rack holds {s}"));
        }
    }
    for (&(r, i), &n) in &from_rack {
        let s = inst.supply(r, i) as u64;
        if n > s {
            report.push("rack_stock", vec![r, i], format!("rack {r} gives {n} of product {i} in total, holds {s}"));
        }
    }

    for o in 0..o_count {
        let closes: Vec<usize> = (0..k_count).filter(|&k| sol.close[o][k]).collect();
        if closes.len() != 1 {
            report.push("close_once", vec![o], format!("order {o} closed {} times", closes.len()));
        }
        for &k in &closes {
            if !sol.open[o][k] {
                report.push("close_when_open", vec![o, k], format!("order {o} closes at {k} without being open"));
            }
        }
        let Some((a, b)) = span[o] else { continue };
        let window: Vec<usize> = (0..k_count).filter(|&k| sol.open[o][k]).collect();
        if window != (a..=b).collect::<Vec<_>>() {
            report.push("window", vec![o], format!("order {o} open at {window:?}, picks span {a}..={b}"));
        }
        if closes != [b] {
            report.push("close_at_last_pick", vec![o], format!("order {o} last picks at {b}, closes at {closes:?}"));
        }
    }

    let single: Vec<bool> = (0..o_count).map(|o| inst.single_unit_product(o).is_some()).collect();
    let capacity = if mode.single_bin { 1 } else { inst.bins.saturating_sub(1) };
    for k in 0..k_count {
        let held = sol.occupancy(k);
        if held > capacity {
            report.push("bins", vec![k], format!("{held} orders hold a bin at position {k}, {capacity} available"));
        }
    }
    if mode.single_bin {
        for k in 1..k_count.saturating_sub(1) {
            for d in (0..o_count).filter(|&d| !single[d]) {
                let lingering = sol.open[d][k - 1] && sol.close[d][k + 1..].iter().any(|&c| c);
                if !lingering {
                    continue;
                }
                for o in (0..o_count).filter(|&o| single[o] && sol.open[o][k]) {
                    report.push("single_bin", vec![d, o, k], format!("order {o} served at {k} while order {d} stays open"));
                }
            }
        }
    }
    report
}
