//! Exhaustive reference answers for tiny instances.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::instance::{Instance, Units};
use crate::sequencing::{SequenceSolution, SequencingInstance, SequencingMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error("enumeration needs a finite revisit limit")]
    UnboundedRevisits,
}

fn too_large(what: impl Into<String>) -> OracleError {
    OracleError::TooLarge(what.into())
}

fn subsets_of_size(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![vec![]];
    }
    if items.len() < size {
        return vec![];
    }
    let mut out = Vec::new();
    for (at, &first) in items.iter().enumerate() {
        for mut rest in subsets_of_size(&items[at + 1..], size - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Fewest racks over every order split and rack assignment, or `None` when no
/// assignment serves the orders. Each rack goes to at most one picker.
pub fn brute_force_allocation(instance: &Instance) -> Result<Option<usize>, OracleError> {
    let (o, r, p) = (instance.num_orders(), instance.num_racks(), instance.num_pickers());
    if o > 6 || r > 7 || p > 2 {
        return Err(too_large(format!("{o} orders, {r} racks, {p} pickers")));
    }
    let all: Vec<usize> = (0..o).collect();
    let mut splits: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for &c in &instance.capacities {
        let mut next = Vec::new();
        for split in &splits {
            let used: BTreeSet<usize> = split.iter().flatten().copied().collect();
            let free: Vec<usize> = all.iter().copied().filter(|x| !used.contains(x)).collect();
            for chosen in subsets_of_size(&free, c) {
                let mut s = split.clone();
                s.push(chosen);
                next.push(s);
            }
        }
        splits = next;
    }

    let n = instance.num_products;
    let face_of: BTreeMap<usize, usize> = instance
        .face_groups
        .iter()
        .enumerate()
        .flat_map(|(g, racks)| racks.iter().map(move |&rack| (rack, g)))
        .collect();
    let assignments = (p + 1).pow(r as u32);
    let mut best: Option<usize> = None;
    for split in &splits {
        let needs: Vec<Vec<u64>> = split
            .iter()
            .map(|orders| {
                let mut d = vec![0u64; n];
                for &x in orders {
                    for (&i, &q) in &instance.orders[x] {
                        d[i] += q as u64;
                    }
                }
                d
            })
            .collect();
        for code in 0..assignments {
            let mut owner = vec![0usize; r];
            let mut rest = code;
            for slot in owner.iter_mut() {
                *slot = rest % (p + 1);
                rest /= p + 1;
            }
            let used = owner.iter().filter(|&&w| w > 0).count();
            if best.is_some_and(|b| used >= b) {
                continue;
            }
            let mut faces_hit = BTreeSet::new();
            let faces_ok = (0..r)
                .filter(|&rack| owner[rack] > 0)
                .all(|rack| face_of.get(&rack).is_none_or(|&g| faces_hit.insert(g)));
            if !faces_ok {
                continue;
            }
            let served = needs.iter().enumerate().all(|(picker, need)| {
                need.iter().enumerate().all(|(i, &d)| {
                    d == 0 || (0..r).filter(|&rack| owner[rack] == picker + 1).map(|rack| instance.supply(rack, i) as u64).sum::<u64>() >= d
                })
            });
            if served {
                best = Some(used);
            }
        }
    }
    Ok(best)
}

/// Fewest racks whose pooled supply covers one order, or `None`.
pub fn min_rack_cover_oracle(order: &Units, racks: &[Units]) -> Result<Option<usize>, OracleError> {
    if racks.len() > 20 {
        return Err(too_large(format!("{} racks", racks.len())));
    }
    let mut best: Option<usize> = None;
    for mask in 0u32..(1 << racks.len()) {
        let size = mask.count_ones() as usize;
        if best.is_some_and(|b| size >= b) {
            continue;
        }
        let covers = order.iter().all(|(i, &q)| {
            let total: u64 = (0..racks.len())
                .filter(|r| mask & (1 << r) != 0)
                .map(|r| racks[r].get(i).copied().unwrap_or(0) as u64)
                .sum();
            total >= q as u64
        });
        if covers {
            best = Some(size);
        }
    }
    Ok(best)
}

struct SeqSearch<'a> {
    inst: &'a SequencingInstance,
    products: Vec<usize>,
    seq: Vec<usize>,
    capacity: u8,
    single_bin: bool,
    single: Vec<bool>,
    failed: HashSet<(usize, Vec<u8>, Vec<u32>, u32, u32)>,
}

impl SeqSearch<'_> {
    fn stock_index(&self, rack: usize, product_slot: usize) -> usize {
        rack * self.products.len() + product_slot
    }

    fn run(&mut self, o: usize, occ: Vec<u8>, stock: Vec<u32>, forbid: u32, used: u32) -> bool {
        if o == self.inst.num_orders() {
            return true;
        }
        let key = (o, occ.clone(), stock.clone(), forbid, used);
        if self.failed.contains(&key) {
            return false;
        }
        let k_count = self.seq.len();
        for a in 0..k_count {
            for b in a..k_count {
                if self.single[o] && a != b {
                    continue;
                }
                let mut occ2 = occ.clone();
                let mut fits = true;
                for slot in &mut occ2[a..b] {
                    *slot += 1;
                    fits &= *slot <= self.capacity;
                }
                if !fits {
                    continue;
                }
                let (mut forbid2, mut used2) = (forbid, used);
                if self.single_bin {
                    if self.single[o] {
                        used2 |= 1 << a;
                    } else {
                        for k in (a + 1)..b {
                            if k >= 1 && k + 2 <= k_count {
                                forbid2 |= 1 << k;
                            }
                        }
                    }
                    if forbid2 & used2 != 0 {
                        continue;
                    }
                }
                let racks: BTreeSet<usize> = self.seq[a..=b].iter().copied().collect();
                let racks: Vec<usize> = racks.into_iter().collect();
                let lines: Vec<(usize, u32)> = self.inst.orders[o]
                    .iter()
                    .map(|(i, &q)| (self.products.binary_search(i).expect("demanded product"), q))
                    .collect();
                let mut outcomes = Vec::new();
                self.distribute(&lines, &racks, stock.clone(), &mut outcomes);
                for s in outcomes {
                    if self.run(o + 1, occ2.clone(), s, forbid2, used2) {
                        return true;
                    }
                }
            }
        }
        self.failed.insert(key);
        false
    }

    /// Every way to take the order's units from the given racks.
    fn distribute(&self, lines: &[(usize, u32)], racks: &[usize], stock: Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let Some((&(slot, q), rest)) = lines.split_first() else {
            if !out.contains(&stock) {
                out.push(stock);
            }
            return;
        };
        let mut ways = Vec::new();
        self.take_units(slot, q, racks, 0, stock, &mut ways);
        for s in ways {
            self.distribute(rest, racks, s, out);
        }
    }

    fn take_units(&self, slot: usize, q: u32, racks: &[usize], from: usize, stock: Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if q == 0 {
            out.push(stock);
            return;
        }
        for at in from..racks.len() {
            let idx = self.stock_index(racks[at], slot);
            if stock[idx] > 0 {
                let mut s = stock.clone();
                s[idx] -= 1;
                self.take_units(slot, q - 1, racks, at, s, out);
            }
        }
    }
}

fn rack_sequences(counts: &mut [usize], seq: &mut Vec<usize>, len: usize, out: &mut Vec<Vec<usize>>) {
    if seq.len() == len {
        out.push(seq.clone());
        return;
    }
    for r in 0..counts.len() {
        if counts[r] > 0 {
            counts[r] -= 1;
            seq.push(r);
            rack_sequences(counts, seq, len, out);
            seq.pop();
            counts[r] += 1;
        }
    }
}

/// Whether any rack order, pick split and set of order windows satisfies the
/// picker's bin limits. Sequences that only relabel identical racks are
/// skipped.
pub fn brute_force_sequence_feasible(inst: &SequencingInstance, mode: SequencingMode) -> Result<bool, OracleError> {
    let m = mode.revisits.ok_or(OracleError::UnboundedRevisits)? as usize;
    let l = inst.num_racks();
    let k_count = (m + 1) * l;
    if k_count > 5 || inst.num_orders() > 5 || inst.orders.iter().flat_map(|o| o.values()).any(|&q| q > 2) {
        return Err(too_large(format!("{k_count} slots, {} orders", inst.num_orders())));
    }
    if inst.num_orders() == 0 {
        return Ok(true);
    }
    let products = inst.products();
    let profile = |r: usize| -> Vec<u32> { products.iter().map(|&i| inst.supply(r, i)).collect() };
    let profiles: Vec<Vec<u32>> = (0..l).map(profile).collect();
    let stock: Vec<u32> = profiles.iter().flatten().copied().collect();

    let mut sequences = Vec::new();
    rack_sequences(&mut vec![m + 1; l], &mut Vec::new(), k_count, &mut sequences);
    let canonical = |seq: &Vec<usize>| -> bool {
        let first = |r: usize| seq.iter().position(|&x| x == r).unwrap_or(usize::MAX);
        (0..l).all(|r| (r + 1..l).filter(|&t| profiles[t] == profiles[r]).all(|t| first(r) < first(t)))
    };
    let capacity = if mode.single_bin { 1 } else { inst.bins.saturating_sub(1) }.min(u8::MAX as usize) as u8;
    let single: Vec<bool> = (0..inst.num_orders()).map(|o| inst.single_unit_product(o).is_some()).collect();
    for seq in sequences.into_iter().filter(canonical) {
        let mut search = SeqSearch {
            inst,
            products: products.clone(),
            seq,
            capacity,
            single_bin: mode.single_bin,
            single: single.clone(),
            failed: HashSet::new(),
        };
        if search.run(0, vec![0; k_count], stock.clone(), 0, 0) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// What happened when the picks of a sequence were replayed unit by unit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BinSimulation {
    /// Most non-dedicated bins held after the bins of a rack were assigned.
    pub max_held: usize,
    /// Orders that went through the dedicated bin.
    pub dedicated: Vec<usize>,
    pub failure: Option<String>,
}

/// Replays the picks of `sol` one unit at a time. An order starting and
/// finishing on one rack uses the dedicated bin; any other order takes a bin
/// when its first unit arrives and frees it after its last one.
pub fn simulate_bins(inst: &SequencingInstance, sol: &SequenceSolution) -> BinSimulation {
    let mut sim = BinSimulation::default();
    let mut stock: Vec<Units> = inst.racks.clone();
    let mut remaining: Vec<u64> = inst.orders.iter().map(|o| o.values().map(|&q| q as u64).sum()).collect();
    let mut holding = vec![false; inst.num_orders()];
    for (k, &rack) in sol.rack_order.iter().enumerate() {
        let here: Vec<_> = sol.picks.iter().filter(|p| p.position == k).collect();
        let mut units_here: BTreeMap<usize, u64> = BTreeMap::new();
        for p in &here {
            *units_here.entry(p.order).or_default() += p.units as u64;
        }
        for p in &here {
            for _ in 0..p.units {
                let Some(s) = stock.get_mut(rack).and_then(|r| r.get_mut(&p.product)).filter(|s| **s > 0) else {
                    sim.failure = Some(format!("rack {rack} has no unit of product {} left at position {k}", p.product));
                    return sim;
                };
                *s -= 1;
            }
        }
        let finishing: Vec<usize> = units_here.iter().filter(|(&o, &n)| n >= remaining[o]).map(|(&o, _)| o).collect();
        for &o in &finishing {
            if holding[o] {
                holding[o] = false;
            } else {
                sim.dedicated.push(o);
            }
        }
        for (&o, &n) in &units_here {
            if n < remaining[o] && !holding[o] {
                holding[o] = true;
            }
            remaining[o] = remaining[o].saturating_sub(n);
        }
        let held = holding.iter().filter(|&&h| h).count();
        sim.max_held = sim.max_held.max(held);
        if held + 1 > inst.bins.max(1) {
            sim.failure.get_or_insert(format!("{held} orders hold a bin after position {k} with {} bins", inst.bins));
        }
    }
    if let Some(o) = remaining.iter().position(|&n| n > 0) {
        sim.failure.get_or_insert(format!("order {o} is incomplete"));
    }
    sim
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{s1, t1};
    use crate::instance::units;

    #[test]
    fn allocation_oracle_on_t1() {
        assert_eq!(brute_force_allocation(&t1()), Ok(Some(3)));
        let mut inst = t1();
        inst.capacities = vec![2];
        assert_eq!(brute_force_allocation(&inst), Ok(Some(1)));
    }

    #[test]
    fn allocation_oracle_refuses_large() {
        let mut inst = t1();
        inst.racks = vec![units([(0, 1)]); 8];
        assert!(matches!(brute_force_allocation(&inst), Err(OracleError::TooLarge(_))));
    }

    #[test]
    fn cover_oracle() {
        let order = units([(0, 1), (1, 1), (2, 1)]);
        let racks = vec![units([(0, 1), (1, 1)]), units([(1, 1), (2, 1)]), units([(2, 1)]), units([(0, 1), (2, 1)])];
        assert_eq!(min_rack_cover_oracle(&order, &racks), Ok(Some(2)));
        assert_eq!(min_rack_cover_oracle(&units([(1, 1)]), &racks), Ok(Some(1)));
        assert_eq!(min_rack_cover_oracle(&units([(5, 1)]), &racks), Ok(None));
    }

    #[test]
    fn sequence_oracle_on_s1() {
        assert_eq!(brute_force_sequence_feasible(&s1(2), SequencingMode::NO_REVISIT), Ok(false));
        assert_eq!(brute_force_sequence_feasible(&s1(3), SequencingMode::NO_REVISIT), Ok(true));
        assert_eq!(brute_force_sequence_feasible(&s1(2), SequencingMode::revisit(1)), Ok(true));
    }

    #[test]
    fn sequence_oracle_single_rack() {
        let inst = SequencingInstance::new(vec![units([(0, 2)]), units([(0, 1), (1, 1)])], vec![units([(0, 3), (1, 1)])], 1).unwrap();
        assert_eq!(brute_force_sequence_feasible(&inst, SequencingMode::NO_REVISIT), Ok(true));
    }

    #[test]
    fn simulator_matches_greedy_on_s1() {
        let sol = crate::sequencing::pool_greedy_sequence(&s1(2)).unwrap();
        let sim = simulate_bins(&s1(2), &sol);
        assert_eq!(sim.failure, None);
        assert_eq!(sim.max_held, 1);
    }
}
