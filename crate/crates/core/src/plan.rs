use crate::sequencing::{SequenceSolution, SequencingInstance};

/// Order sets at one rack position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlanStep {
    pub position: usize,
    pub rack: usize,
    /// Opened and closed with this rack.
    pub delta: Vec<usize>,
    /// Closed with this rack after being opened earlier.
    pub theta: Vec<usize>,
    /// Opened with this rack and left open.
    pub phi: Vec<usize>,
    /// Open before and after this rack.
    pub omega: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessingPlan {
    pub steps: Vec<PlanStep>,
    /// Bin of each order: 0 is the dedicated bin, 1.. the others.
    pub bin_of: Vec<Option<usize>>,
    /// Most non-dedicated bins held at once.
    pub max_occupancy: usize,
}

pub fn derive_processing_plan(inst: &SequencingInstance, sol: &SequenceSolution) -> ProcessingPlan {
    let o_count = inst.num_orders();
    let mut bin_of = vec![None; o_count];
    let mut taken: Vec<bool> = Vec::new();
    let mut steps = Vec::with_capacity(sol.slots());
    let mut max_occupancy = 0;
    for (k, &rack) in sol.rack_order.iter().enumerate() {
        let mut step = PlanStep {
            position: k,
            rack,
            ..PlanStep::default()
        };
        for o in 0..o_count {
            let open = sol.open[o][k];
            let close = sol.close[o][k];
            let before = k > 0 && sol.open[o][k - 1];
            match (open, close, before) {
                (true, true, false) => step.delta.push(o),
                (true, true, true) => step.theta.push(o),
                (true, false, false) => step.phi.push(o),
                (true, false, true) => step.omega.push(o),
                _ => {}
            }
        }
        for &o in &step.delta {
            bin_of[o] = Some(0);
        }
        for &o in &step.theta {
            if let Some(b) = bin_of[o].filter(|&b| b > 0) {
                taken[b - 1] = false;
            }
        }
        for &o in &step.phi {
            let slot = match taken.iter().position(|t| !t) {
                Some(s) => s,
                None => {
                    taken.push(false);
                    taken.len() - 1
                }
            };
            taken[slot] = true;
            bin_of[o] = Some(slot + 1);
        }
        max_occupancy = max_occupancy.max(taken.iter().filter(|&&t| t).count());
        steps.push(step);
    }
    ProcessingPlan {
        steps,
        bin_of,
        max_occupancy,
    }
}
