//! Bounded-variable revised simplex over `A x - w = 0`.
//!
//! Every row `i` owns a logical variable `w_i = a_i . x` whose bounds encode
//! the row sense, so the right-hand side is always zero and the all-logical
//! basis (`B = -I`) is a valid starting point. The basis inverse is kept as
//! an explicit dense matrix, updated by elementary row operations and
//! rebuilt by Gauss-Jordan elimination every [`REFACTOR_EVERY`] pivots.

use std::time::Instant;

const PRIMAL_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Deadline or iteration cap reached.
    Stopped,
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Column-sparse LP data in minimisation form.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    /// Structural columns as (row, coefficient).
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    /// Bounds of structural variables followed by row logicals.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: usize,
}

impl LpData {
    fn structurals(&self) -> usize {
        self.cols.len()
    }
}

pub(crate) struct Simplex {
    data: LpData,
    n: usize,
    m: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Column-major `B^-1`: entry (r, c) at `c * m + r`.
    binv: Vec<f64>,
    updates: usize,
    bland: bool,
    degenerate_run: usize,
    pub iterations: u64,
    deadline: Option<Instant>,
    /// Cost shifts applied while the dual simplex runs.
    perturb: Vec<f64>,
    // scratch
    y: Vec<f64>,
    d: Vec<f64>,
    w: Vec<f64>,
    rho: Vec<f64>,
}

impl Simplex {
    pub fn new(data: LpData) -> Self {
        let n = data.structurals();
        let m = data.rows;
        let total = n + m;
        let lower = data.lower.clone();
        let upper = data.upper.clone();
        let mut state = vec![VarState::AtLower; total];
        let mut x = vec![0.0; total];
        for j in 0..n {
            let (s, v) = nonbasic_position(lower[j], upper[j], 0.0);
            state[j] = s;
            x[j] = v;
        }
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            state[n + i] = VarState::Basic;
            basis.push(n + i);
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = -1.0;
        }
        let mut lp = Self {
            data,
            n,
            m,
            lower,
            upper,
            x,
            state,
            basis,
            binv,
            updates: 0,
            bland: false,
            degenerate_run: 0,
            iterations: 0,
            deadline: None,
            perturb: vec![0.0; total],
            y: vec![0.0; m],
            d: vec![0.0; total],
            w: vec![0.0; m],
            rho: vec![0.0; m],
        };
        lp.compute_basic_values();
        lp
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn structural_values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.data.cost[j] * self.x[j]).sum()
    }

    /// Restores the original bounds of every variable.
    pub fn reset_bounds(&mut self) {
        self.lower.copy_from_slice(&self.data.lower);
        self.upper.copy_from_slice(&self.data.upper);
    }

    pub fn solve(&mut self) -> LpStatus {
        let cap = 50_000 + 50 * (self.n + self.m) as u64;
        let start = self.iterations;
        if self.updates > 0 && !self.refactor() {
            return LpStatus::Numerical;
        }
        self.place_nonbasics(false);
        self.compute_basic_values();

        // Dual simplex when the current basis is dual feasible: the usual
        // situation after a bound change in the tree.
        self.compute_duals(None);
        self.place_nonbasics(true);
        self.compute_basic_values();
        if self.dual_feasible() && self.max_infeasibility().0 > PRIMAL_TOL {
            self.perturb_costs();
            let status = self.dual_loop(start, cap);
            self.perturb.iter_mut().for_each(|p| *p = 0.0);
            match status {
                LpStatus::Infeasible => return LpStatus::Infeasible,
                LpStatus::Stopped => return LpStatus::Stopped,
                _ => {}
            }
        }
        self.primal_loop(start, cap)
    }

    /// Shifts the cost of every nonbasic variable away from zero reduced cost
    /// in the direction that keeps it dual feasible. Zero-cost columns are
    /// otherwise dual degenerate and the dual simplex stalls on them.
    fn perturb_costs(&mut self) {
        for j in 0..self.n + self.m {
            self.perturb[j] = 0.0;
            if self.lower[j] == self.upper[j] {
                continue;
            }
            let base = if j < self.n { self.data.cost[j].abs() } else { 0.0 };
            let spread = 1.0 + ((j as f64 * 0.618_033_988_75).fract());
            let delta = 1e-7 * (1.0 + base) * spread;
            self.perturb[j] = match self.state[j] {
                VarState::AtLower => delta,
                VarState::AtUpper => -delta,
                _ => 0.0,
            };
        }
    }

    fn limit_hit(&self, start: u64, cap: u64) -> bool {
        if self.iterations - start > cap {
            return true;
        }
        if self.iterations % 32 == 0 {
            if let Some(deadline) = self.deadline {
                return Instant::now() >= deadline;
            }
        }
        false
    }

    fn after_pivot(&mut self) -> bool {
        self.updates += 1;
        if self.updates >= REFACTOR_EVERY {
            if !self.refactor() {
                return false;
            }
            self.compute_basic_values();
        }
        true
    }

    /// Nonbasic variables are moved onto their current bounds. With
    /// `by_duals`, boxed variables pick the bound matching the sign of their
    /// reduced cost.
    fn place_nonbasics(&mut self, by_duals: bool) {
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let preferred = if by_duals && lo.is_finite() && hi.is_finite() {
                if self.d[j] < 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                }
            } else {
                self.state[j]
            };
            let (s, v) = match preferred {
                VarState::AtUpper if hi.is_finite() => (VarState::AtUpper, hi),
                VarState::AtLower if lo.is_finite() => (VarState::AtLower, lo),
                _ => nonbasic_position(lo, hi, self.x[j]),
            };
            self.state[j] = s;
            self.x[j] = v;
        }
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n {
            ColumnIter::Structural(self.data.cols[j].iter())
        } else {
            ColumnIter::Logical(Some(j - self.n))
        }
    }

    fn cost(&self, j: usize) -> f64 {
        let base = if j < self.n { self.data.cost[j] } else { 0.0 };
        base + self.perturb[j]
    }

    /// x_B = -B^-1 (N x_N)
    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut r = vec![0.0; m];
        for j in 0..self.n + m {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for (i, a) in self.column(j) {
                r[i] += a * xj;
            }
        }
        let mut xb = vec![0.0; m];
        for (c, &rc) in r.iter().enumerate() {
            if rc == 0.0 {
                continue;
            }
            let col = &self.binv[c * m..(c + 1) * m];
            for (row, &b) in col.iter().enumerate() {
                xb[row] -= b * rc;
            }
        }
        for (row, &var) in self.basis.iter().enumerate() {
            self.x[var] = xb[row];
        }
    }

    /// Computes duals `y` and reduced costs `d` for the given basic costs
    /// (phase-2 costs when `None`).
    fn compute_duals(&mut self, basic_costs: Option<&[f64]>) {
        let m = self.m;
        let cb: Vec<f64> = match basic_costs {
            Some(cb) => cb.to_vec(),
            None => self.basis.iter().map(|&var| self.cost(var)).collect(),
        };
        for i in 0..m {
            let col = &self.binv[i * m..(i + 1) * m];
            self.y[i] = col.iter().zip(&cb).map(|(b, c)| b * c).sum();
        }
        for j in 0..self.n + m {
            if self.state[j] == VarState::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let cj = if basic_costs.is_some() { 0.0 } else { self.cost(j) };
            let mut s = cj;
            for (i, a) in self.column(j) {
                s -= self.y[i] * a;
            }
            self.d[j] = s;
        }
    }

    fn dual_feasible(&self) -> bool {
        (0..self.n + self.m).all(|j| match self.state[j] {
            VarState::Basic => true,
            _ if self.lower[j] == self.upper[j] => true,
            VarState::AtLower => self.d[j] >= -DUAL_TOL,
            VarState::AtUpper => self.d[j] <= DUAL_TOL,
            VarState::Free => self.d[j].abs() <= DUAL_TOL,
        })
    }

    /// (largest infeasibility, basis row holding it)
    fn max_infeasibility(&self) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (r, &var) in self.basis.iter().enumerate() {
            let v = self.x[var];
            let inf = (self.lower[var] - v).max(v - self.upper[var]);
            if inf > best.0 {
                best = (inf, Some(r));
            }
        }
        best
    }

    /// w = B^-1 a_j
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        self.w.iter_mut().for_each(|v| *v = 0.0);
        let entries: Vec<(usize, f64)> = self.column(j).collect();
        for (i, a) in entries {
            let col = &self.binv[i * m..(i + 1) * m];
            for (r, &b) in col.iter().enumerate() {
                self.w[r] += a * b;
            }
        }
    }

    fn row_of_inverse(&mut self, r: usize) {
        let m = self.m;
        for i in 0..m {
            self.rho[i] = self.binv[i * m + r];
        }
    }

    fn pivot_row_entry(&self, j: usize) -> f64 {
        self.column(j).map(|(i, a)| self.rho[i] * a).sum()
    }

    /// Replaces the basic variable in row `r` by `q`; `self.w` must hold B^-1 a_q.
    fn update_inverse(&mut self, r: usize) {
        let m = self.m;
        let pivot = self.w[r];
        for c in 0..m {
            let col = &mut self.binv[c * m..(c + 1) * m];
            let v = col[r] / pivot;
            if v == 0.0 {
                continue;
            }
            for (i, entry) in col.iter_mut().enumerate() {
                if i != r {
                    *entry -= self.w[i] * v;
                }
            }
            col[r] = v;
        }
    }

    /// Gauss-Jordan inversion of the current basis. Returns false when the
    /// basis is numerically singular.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.updates = 0;
        if m == 0 {
            return true;
        }
        // dense row-major B augmented with identity
        let mut a = vec![0.0; m * m];
        for (c, &var) in self.basis.iter().enumerate() {
            for (i, v) in self.column(var) {
                a[i * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for row in col + 1..m {
                let v = a[row * m + col].abs();
                if v > best {
                    best = v;
                    piv = row;
                }
            }
            if best < 1e-11 {
                return false;
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for row in 0..m {
                if row == col {
                    continue;
                }
                let f = a[row * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[row * m + k] -= f * a[col * m + k];
                    inv[row * m + k] -= f * inv[col * m + k];
                }
            }
        }
        // inv is row-major B^-1 (rows indexed by basis position); store column-major
        for r in 0..m {
            for c in 0..m {
                self.binv[c * m + r] = inv[r * m + c];
            }
        }
        true
    }

    fn note_step(&mut self, step: f64) {
        if step.abs() <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_LIMIT {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    fn primal_loop(&mut self, start: u64, cap: u64) -> LpStatus {
        let total = self.n + self.m;
        let mut phase_costs = vec![0.0; self.m];
        loop {
            if self.limit_hit(start, cap) {
                return LpStatus::Stopped;
            }
            let phase_one = self.max_infeasibility().0 > PRIMAL_TOL;
            if phase_one {
                for (r, &var) in self.basis.iter().enumerate() {
                    let v = self.x[var];
                    phase_costs[r] = if v < self.lower[var] - PRIMAL_TOL {
                        -1.0
                    } else if v > self.upper[var] + PRIMAL_TOL {
                        1.0
                    } else {
                        0.0
                    };
                }
                let costs = phase_costs.clone();
                self.compute_duals(Some(&costs));
            } else {
                self.compute_duals(None);
            }

            // pricing
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..total {
                let dj = self.d[j];
                let candidate = match self.state[j] {
                    VarState::Basic => false,
                    _ if self.lower[j] == self.upper[j] => false,
                    VarState::AtLower => dj < -DUAL_TOL,
                    VarState::AtUpper => dj > DUAL_TOL,
                    VarState::Free => dj.abs() > DUAL_TOL,
                };
                if !candidate {
                    continue;
                }
                if self.bland {
                    entering = Some(j);
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            let dir = if self.d[q] < 0.0 { 1.0 } else { -1.0 };
            self.ftran(q);

            // ratio test: x_B(t) = x_B - dir * t * w
            let mut step = f64::INFINITY;
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_pivot = 0.0;
            for r in 0..self.m {
                let rate = -dir * self.w[r];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let var = self.basis[r];
                let v = self.x[var];
                let (lo, hi) = (self.lower[var], self.upper[var]);
                let (limit, target) = if phase_one && v < lo - PRIMAL_TOL {
                    if rate > 0.0 {
                        ((lo - v) / rate, lo)
                    } else {
                        continue;
                    }
                } else if phase_one && v > hi + PRIMAL_TOL {
                    if rate < 0.0 {
                        ((v - hi) / -rate, hi)
                    } else {
                        continue;
                    }
                } else if rate > 0.0 {
                    if !hi.is_finite() {
                        continue;
                    }
                    (((hi - v) / rate).max(0.0), hi)
                } else {
                    if !lo.is_finite() {
                        continue;
                    }
                    (((v - lo) / -rate).max(0.0), lo)
                };
                let better = match leave {
                    None => true,
                    Some((prev, _)) => {
                        if limit < step - 1e-12 {
                            true
                        } else if limit <= step + 1e-12 {
                            if self.bland {
                                var < self.basis[prev]
                            } else {
                                rate.abs() > leave_pivot
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = limit;
                    leave = Some((r, target));
                    leave_pivot = rate.abs();
                }
            }
            let flip = self.upper[q] - self.lower[q];
            if flip.is_finite() && flip <= step {
                // bound flip, no basis change
                let delta = dir * flip;
                self.x[q] += delta;
                for r in 0..self.m {
                    let var = self.basis[r];
                    self.x[var] -= delta * self.w[r];
                }
                self.state[q] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                self.iterations += 1;
                self.note_step(flip);
                continue;
            }
            let Some((r, target)) = leave else {
                if phase_one {
                    return LpStatus::Numerical;
                }
                return LpStatus::Unbounded;
            };
            let delta = dir * step;
            self.x[q] += delta;
            for i in 0..self.m {
                let var = self.basis[i];
                self.x[var] -= delta * self.w[i];
            }
            let out = self.basis[r];
            self.x[out] = target;
            self.state[out] = if target == self.lower[out] {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.basis[r] = q;
            self.state[q] = VarState::Basic;
            self.update_inverse(r);
            self.iterations += 1;
            self.note_step(step);
            if !self.after_pivot() {
                return LpStatus::Numerical;
            }
        }
    }

    /// Squared norms of the rows of `B^-1`.
    fn row_weights(&self) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for c in 0..m {
            for (r, &b) in self.binv[c * m..(c + 1) * m].iter().enumerate() {
                w[r] += b * b;
            }
        }
        w
    }

    /// Moves nonbasic variables by the given amounts and updates the basics.
    fn shift_nonbasics(&mut self, moves: &[(usize, f64)]) {
        let m = self.m;
        let mut r = vec![0.0; m];
        for &(j, delta) in moves {
            self.x[j] += delta;
            for (i, a) in self.column(j) {
                r[i] += a * delta;
            }
        }
        for (c, &rc) in r.iter().enumerate() {
            if rc == 0.0 {
                continue;
            }
            for row in 0..m {
                let var = self.basis[row];
                self.x[var] -= self.binv[c * m + row] * rc;
            }
        }
    }

    /// Dual simplex with steepest-edge row choice and a bound-flipping ratio
    /// test.
    fn dual_loop(&mut self, start: u64, cap: u64) -> LpStatus {
        let total = self.n + self.m;
        let mut candidates: Vec<(f64, usize, f64)> = Vec::new();
        loop {
            if self.limit_hit(start, cap) {
                return LpStatus::Stopped;
            }
            let weights = self.row_weights();
            let mut leave = None;
            let mut best = 0.0;
            for (r, &var) in self.basis.iter().enumerate() {
                let v = self.x[var];
                let inf = (self.lower[var] - v).max(v - self.upper[var]);
                if inf <= PRIMAL_TOL {
                    continue;
                }
                if self.bland {
                    if leave.is_none_or(|prev: usize| var < self.basis[prev]) {
                        leave = Some(r);
                    }
                    continue;
                }
                let score = inf * inf / weights[r].max(1e-12);
                if score > best {
                    best = score;
                    leave = Some(r);
                }
            }
            let Some(r) = leave else {
                return LpStatus::Optimal;
            };
            let out = self.basis[r];
            let to_lower = self.x[out] < self.lower[out];
            let target = if to_lower { self.lower[out] } else { self.upper[out] };

            self.compute_duals(None);
            self.row_of_inverse(r);
            candidates.clear();
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let alpha = self.pivot_row_entry(j);
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let eligible = match st {
                    VarState::AtLower => (alpha < 0.0) == to_lower,
                    VarState::AtUpper => (alpha > 0.0) == to_lower,
                    VarState::Free => true,
                    VarState::Basic => false,
                };
                if eligible {
                    candidates.push((self.d[j].abs() / alpha.abs(), j, alpha));
                }
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.2.abs().total_cmp(&a.2.abs())).then(a.1.cmp(&b.1)));

            let mut slope = (self.x[out] - target).abs();
            let mut flips: Vec<(usize, f64)> = Vec::new();
            let mut entering = None;
            for &(ratio, j, alpha) in &candidates {
                let range = self.upper[j] - self.lower[j];
                if !self.bland && range.is_finite() && self.state[j] != VarState::Free {
                    let rest = slope - alpha.abs() * range;
                    if rest > PRIMAL_TOL {
                        slope = rest;
                        flips.push((j, if self.state[j] == VarState::AtLower { range } else { -range }));
                        continue;
                    }
                }
                entering = Some((j, ratio));
                break;
            }
            let Some((q, ratio)) = entering else {
                return LpStatus::Infeasible;
            };
            if !flips.is_empty() {
                self.shift_nonbasics(&flips);
                for &(j, delta) in &flips {
                    if delta > 0.0 {
                        self.state[j] = VarState::AtUpper;
                        self.x[j] = self.upper[j];
                    } else {
                        self.state[j] = VarState::AtLower;
                        self.x[j] = self.lower[j];
                    }
                }
            }
            self.ftran(q);
            let wr = self.w[r];
            if wr.abs() < PIVOT_TOL {
                return LpStatus::Numerical;
            }
            let delta = (self.x[out] - target) / wr;
            self.x[q] += delta;
            for i in 0..self.m {
                let var = self.basis[i];
                self.x[var] -= delta * self.w[i];
            }
            self.x[out] = target;
            self.state[out] = if to_lower {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.basis[r] = q;
            self.state[q] = VarState::Basic;
            self.update_inverse(r);
            self.iterations += 1;
            self.note_step(ratio);
            if !self.after_pivot() {
                return LpStatus::Numerical;
            }
        }
    }
}

fn nonbasic_position(lo: f64, hi: f64, current: f64) -> (VarState, f64) {
    if lo.is_finite() && hi.is_finite() {
        if (current - hi).abs() < (current - lo).abs() {
            (VarState::AtUpper, hi)
        } else {
            (VarState::AtLower, lo)
        }
    } else if lo.is_finite() {
        (VarState::AtLower, lo)
    } else if hi.is_finite() {
        (VarState::AtUpper, hi)
    } else {
        (VarState::Free, 0.0)
    }
}

enum ColumnIter<'a> {
    Structural(std::slice::Iter<'a, (usize, f64)>),
    Logical(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            ColumnIter::Structural(it) => it.next().copied(),
            ColumnIter::Logical(row) => row.take().map(|i| (i, -1.0)),
        }
    }
}
