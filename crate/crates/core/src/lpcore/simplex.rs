//! Dense revised simplex over `min c'x, A x (<=|=|>=) b, x >= 0`.
//!
//! The basis inverse is kept explicitly as a dense `m x m` matrix and updated
//! in place on each pivot; the constraint matrix is stored by sparse columns.
//! Phase 1 minimises the sum of artificials, phase 2 uses Dantzig pricing
//! with a Harris ratio test and falls back to Bland's rule after `3 m`
//! consecutive degenerate pivots. Rows appended after a solve are handled
//! by a dual simplex pass starting from the previous optimal basis; when the
//! dual pass stalls on degenerate pivots, nonbasic costs are perturbed
//! until it finishes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { feas_tol: 1e-9, opt_tol: 1e-7, pivot_tol: 1e-9, max_iter: 200_000 }
    }
}

/// Optimal primal/dual pair.
#[derive(Debug, Clone)]
pub struct LpOptimum {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row, in the caller's row orientation: `<=` rows
    /// carry nonpositive duals, `>=` rows nonnegative ones, and
    /// `c - A' duals >= 0` holds componentwise.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

// Column codes: structural j -> j; logical (slack/surplus) of row r -> n + 2r;
// artificial of row r -> n + 2r + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Struct(usize),
    Slack(usize),
    Art(usize),
}

#[derive(Debug, Clone)]
struct RowInfo {
    rhs: f64,
    /// +1 when stored as given, -1 when negated to make the rhs nonnegative.
    flip: f64,
    /// Coefficient of the logical column, or `None` for equality rows.
    slack: Option<f64>,
    has_art: bool,
}

/// Degenerate dual pivots in a row before costs are perturbed.
const DUAL_STALL_PIVOTS: usize = 50;

#[derive(Debug, Clone)]
pub struct Simplex {
    n: usize,
    cost: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<RowInfo>,
    binv: Vec<f64>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    pos: Vec<Option<usize>>,
    art_dead: bool,
    opts: SimplexOptions,
    iterations: usize,
    since_refactor: usize,
    solved: bool,
    /// Temporary phase-2 cost perturbation per column code (dual simplex
    /// anti-stalling); empty when inactive.
    shift: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

impl Simplex {
    pub fn new(n: usize, cost: Vec<f64>, opts: SimplexOptions) -> Self {
        assert_eq!(cost.len(), n);
        Simplex {
            n,
            cost,
            cols: vec![Vec::new(); n],
            rows: Vec::new(),
            binv: Vec::new(),
            basis: Vec::new(),
            xb: Vec::new(),
            pos: vec![None; n],
            art_dead: false,
            opts,
            iterations: 0,
            since_refactor: 0,
            solved: false,
            shift: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn decode(&self, code: usize) -> Col {
        if code < self.n {
            Col::Struct(code)
        } else {
            let r = (code - self.n) / 2;
            if (code - self.n).is_multiple_of(2) {
                Col::Slack(r)
            } else {
                Col::Art(r)
            }
        }
    }

    fn slack_code(&self, r: usize) -> usize {
        self.n + 2 * r
    }

    fn art_code(&self, r: usize) -> usize {
        self.n + 2 * r + 1
    }

    fn col_exists(&self, code: usize) -> bool {
        match self.decode(code) {
            Col::Struct(_) => true,
            Col::Slack(r) => self.rows[r].slack.is_some(),
            Col::Art(r) => self.rows[r].has_art,
        }
    }

    fn entries(&self, code: usize) -> ColIter<'_> {
        match self.decode(code) {
            Col::Struct(j) => ColIter::Sparse(self.cols[j].iter()),
            Col::Slack(r) => ColIter::Unit(Some((r, self.rows[r].slack.unwrap_or(0.0)))),
            Col::Art(r) => ColIter::Unit(Some((r, 1.0))),
        }
    }

    fn col_cost(&self, code: usize, phase: Phase) -> f64 {
        match (self.decode(code), phase) {
            (Col::Art(_), Phase::One) => 1.0,
            (Col::Struct(j), Phase::Two) => self.cost[j] + self.shift.get(code).copied().unwrap_or(0.0),
            (_, Phase::Two) => self.shift.get(code).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    fn num_codes(&self) -> usize {
        self.n + 2 * self.m()
    }

    fn grow_pos(&mut self) {
        let want = self.num_codes();
        self.pos.resize(want, None);
    }

    /// Appends a constraint. Before the first solve the row enters the
    /// phase-1 start basis; afterwards its logical column becomes basic and
    /// the next [`Simplex::solve`] repairs feasibility by dual simplex.
    pub fn add_row(&mut self, terms: &[(usize, f64)], sense: Sense, rhs: f64) -> Result<()> {
        if let Some(&(j, _)) = terms.iter().find(|&&(j, _)| j >= self.n) {
            return Err(Error::Schema(format!("row references variable {j} of {}", self.n)));
        }
        let r = self.m();
        let old_m = r;
        if !self.solved {
            let flip = if rhs < 0.0 { -1.0 } else { 1.0 };
            let sense = match (sense, flip < 0.0) {
                (Sense::Le, true) => Sense::Ge,
                (Sense::Ge, true) => Sense::Le,
                (s, _) => s,
            };
            let info = RowInfo {
                rhs: rhs * flip,
                flip,
                slack: match sense {
                    Sense::Le => Some(1.0),
                    Sense::Ge => Some(-1.0),
                    Sense::Eq => None,
                },
                has_art: sense != Sense::Le,
            };
            for &(j, v) in terms {
                if v != 0.0 {
                    self.cols[j].push((r, v * flip));
                }
            }
            let basic = if info.has_art { self.art_code(r) } else { self.slack_code(r) };
            let value = info.rhs;
            self.rows.push(info);
            self.grow_pos();
            self.extend_basis(old_m, basic, 1.0, &[]);
            self.xb.push(value);
            self.pos[basic] = Some(r);
            self.basis.push(basic);
            return Ok(());
        }
        let sigma = match sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => return Err(Error::Schema("equality rows cannot be appended after a solve".into())),
        };
        // New row: a x + sigma s = rhs with s basic.
        let mut a_basic = Vec::new();
        let mut activity = 0.0;
        for &(j, v) in terms {
            if v == 0.0 {
                continue;
            }
            self.cols[j].push((r, v));
            if let Some(row) = self.pos[j] {
                a_basic.push((row, v));
                activity += v * self.xb[row];
            }
        }
        self.rows.push(RowInfo { rhs, flip: 1.0, slack: Some(sigma), has_art: false });
        self.grow_pos();
        let basic = self.slack_code(r);
        self.extend_basis(old_m, basic, sigma, &a_basic);
        self.xb.push(sigma * (rhs - activity));
        self.pos[basic] = Some(r);
        self.basis.push(basic);
        Ok(())
    }

    /// Grows the inverse for a new basic logical column with coefficient
    /// `sigma`; `a_basic` lists the new row's entries on basic columns.
    fn extend_basis(&mut self, old_m: usize, _code: usize, sigma: f64, a_basic: &[(usize, f64)]) {
        let m = old_m + 1;
        let mut binv = vec![0.0; m * m];
        for i in 0..old_m {
            binv[i * m..i * m + old_m].copy_from_slice(&self.binv[i * old_m..(i + 1) * old_m]);
        }
        // last row = -sigma * a_B' B^{-1}, diagonal sigma
        for &(row, v) in a_basic {
            for k in 0..old_m {
                binv[old_m * m + k] -= sigma * v * self.binv[row * old_m + k];
            }
        }
        binv[old_m * m + old_m] = sigma;
        self.binv = binv;
    }

    fn ftran(&self, code: usize) -> Vec<f64> {
        let m = self.m();
        let mut w = vec![0.0; m];
        for (k, v) in self.entries(code) {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += self.binv[i * m + k] * v;
            }
        }
        w
    }

    fn duals(&self, phase: Phase) -> Vec<f64> {
        let m = self.m();
        let mut pi = vec![0.0; m];
        for (r, &code) in self.basis.iter().enumerate() {
            let c = self.col_cost(code, phase);
            if c != 0.0 {
                for (k, p) in pi.iter_mut().enumerate() {
                    *p += c * self.binv[r * m + k];
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, code: usize, pi: &[f64], phase: Phase) -> f64 {
        let mut d = self.col_cost(code, phase);
        for (k, v) in self.entries(code) {
            d -= pi[k] * v;
        }
        d
    }

    fn enterable(&self, code: usize, phase: Phase) -> bool {
        self.pos[code].is_none()
            && self.col_exists(code)
            && !(matches!(self.decode(code), Col::Art(_)) && (self.art_dead || phase == Phase::Two))
    }

    fn pivot(&mut self, r: usize, code: usize, w: &[f64]) {
        let m = self.m();
        let wr = w[r];
        let theta = self.xb[r] / wr;
        for (i, &wi) in w.iter().enumerate() {
            if i != r && wi != 0.0 {
                self.xb[i] -= theta * wi;
            }
        }
        self.xb[r] = theta;
        let (head, rest) = self.binv.split_at_mut(r * m);
        let (row_r, tail) = rest.split_at_mut(m);
        for v in row_r.iter_mut() {
            *v /= wr;
        }
        for (i, &wi) in w.iter().enumerate() {
            if i == r || wi == 0.0 {
                continue;
            }
            let target = if i < r { &mut head[i * m..(i + 1) * m] } else { &mut tail[(i - r - 1) * m..(i - r) * m] };
            for (t, &s) in target.iter_mut().zip(row_r.iter()) {
                *t -= wi * s;
            }
        }
        let leaving = self.basis[r];
        self.pos[leaving] = None;
        self.basis[r] = code;
        self.pos[code] = Some(r);
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Rebuilds the inverse from the basis columns by successive pivots with
    /// partial pivoting, then recomputes basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let old_basis = self.basis.clone();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut assigned: Vec<Option<usize>> = vec![None; m];
        let mut pending = Vec::new();
        for &code in &old_basis {
            match self.decode(code) {
                Col::Slack(r) | Col::Art(r) if assigned[r].is_none() => {
                    let coef = match self.decode(code) {
                        Col::Slack(_) => self.rows[r].slack.unwrap_or(1.0),
                        _ => 1.0,
                    };
                    for k in 0..m {
                        binv[r * m + k] /= coef;
                    }
                    assigned[r] = Some(code);
                }
                _ => pending.push(code),
            }
        }
        for code in pending {
            let mut w = vec![0.0; m];
            for (k, v) in self.entries(code) {
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi += binv[i * m + k] * v;
                }
            }
            let r = (0..m)
                .filter(|&i| assigned[i].is_none())
                .max_by(|&a, &b| w[a].abs().partial_cmp(&w[b].abs()).unwrap().then(b.cmp(&a)))
                .filter(|&i| w[i].abs() > 1e-11)
                .ok_or_else(|| Error::Internal("singular basis during refactorisation".into()))?;
            let wr = w[r];
            for k in 0..m {
                binv[r * m + k] /= wr;
            }
            for i in 0..m {
                if i != r && w[i] != 0.0 {
                    let f = w[i];
                    for k in 0..m {
                        binv[i * m + k] -= f * binv[r * m + k];
                    }
                }
            }
            assigned[r] = Some(code);
        }
        self.basis = assigned.into_iter().map(|c| c.expect("every row assigned")).collect();
        for p in self.pos.iter_mut() {
            *p = None;
        }
        for (r, &code) in self.basis.iter().enumerate() {
            self.pos[code] = Some(r);
        }
        self.binv = binv;
        self.xb = (0..m).map(|i| (0..m).map(|k| self.binv[i * m + k] * self.rows[k].rhs).sum()).collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn maybe_refactor(&mut self) -> Result<()> {
        if self.since_refactor >= self.m().max(100) {
            self.refactor()?;
        }
        Ok(())
    }

    fn check_iter(&self) -> Result<()> {
        if self.iterations > self.opts.max_iter {
            return Err(Error::Internal(format!("simplex exceeded {} iterations", self.opts.max_iter)));
        }
        Ok(())
    }

    fn primal(&mut self, phase: Phase) -> Result<()> {
        let m = self.m();
        let mut degenerate_run = 0usize;
        let mut pi = self.duals(phase);
        loop {
            self.check_iter()?;
            let bland = degenerate_run > 3 * m;
            let mut entering: Option<(usize, f64)> = None;
            for code in 0..self.num_codes() {
                if !self.enterable(code, phase) {
                    continue;
                }
                let d = self.reduced_cost(code, &pi, phase);
                if d < -self.opts.opt_tol {
                    if bland {
                        entering = Some((code, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((code, d));
                    }
                }
            }
            let Some((q, dq)) = entering else { return Ok(()) };
            let w = self.ftran(q);
            let r = if bland { self.ratio_bland(&w) } else { self.ratio_harris(&w) };
            let Some(r) = r else {
                return Err(Error::Unbounded);
            };
            let theta = (self.xb[r] / w[r]).max(0.0);
            if self.xb[r] < 0.0 {
                self.xb[r] = 0.0;
            }
            degenerate_run = if theta <= 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(r, q, &w);
            // pi' = pi + dq * (new row r of B^{-1})
            for (k, p) in pi.iter_mut().enumerate() {
                *p += dq * self.binv[r * m + k];
            }
            if self.since_refactor >= m.max(100) {
                self.refactor()?;
                pi = self.duals(phase);
            }
        }
    }

    fn ratio_bland(&self, w: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &wi) in w.iter().enumerate() {
            if wi > self.opts.pivot_tol {
                let ratio = self.xb[i].max(0.0) / wi;
                let better = match best {
                    None => true,
                    Some((b, br)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[b]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn ratio_harris(&self, w: &[f64]) -> Option<usize> {
        let tol = self.opts.feas_tol;
        let mut bound = f64::INFINITY;
        for (i, &wi) in w.iter().enumerate() {
            if wi > self.opts.pivot_tol {
                bound = bound.min((self.xb[i].max(0.0) + tol) / wi);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for (i, &wi) in w.iter().enumerate() {
            if wi > self.opts.pivot_tol && self.xb[i].max(0.0) / wi <= bound && best.is_none_or(|b| wi > w[b]) {
                best = Some(i);
            }
        }
        best
    }

    fn dual(&mut self) -> Result<()> {
        let result = self.dual_inner();
        // Perturbed costs are dropped here; the caller's primal pass repairs
        // any reduced cost that turns slightly negative.
        self.shift.clear();
        result
    }

    /// Raises the cost of every nonbasic column by a small, column-specific
    /// amount. Reduced costs only grow, so dual feasibility is kept, and
    /// ties in the dual ratio test are broken.
    fn perturb_costs(&mut self) {
        let scale = 1.0 + self.cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let golden = 0.618_033_988_749_894_9_f64;
        self.shift = (0..self.num_codes())
            .map(
                |code| {
                    if self.pos[code].is_some() {
                        0.0
                    } else {
                        1e-6 * scale * (0.5 + (code as f64 * golden).fract())
                    }
                },
            )
            .collect();
    }

    fn dual_inner(&mut self) -> Result<()> {
        let m = self.m();
        let mut degenerate_run = 0usize;
        loop {
            self.check_iter()?;
            if degenerate_run > DUAL_STALL_PIVOTS && self.shift.is_empty() {
                self.perturb_costs();
            }
            let mut leave: Option<usize> = None;
            for (i, &v) in self.xb.iter().enumerate() {
                if v < -self.opts.feas_tol && leave.is_none_or(|l| v < self.xb[l]) {
                    leave = Some(i);
                }
            }
            let Some(r) = leave else { return Ok(()) };
            let pi = self.duals(Phase::Two);
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64, f64)> = None;
            for code in 0..self.num_codes() {
                if !self.enterable(code, Phase::Two) {
                    continue;
                }
                let alpha: f64 = self.entries(code).map(|(k, v)| row[k] * v).sum();
                if alpha < -self.opts.pivot_tol {
                    let d = self.reduced_cost(code, &pi, Phase::Two).max(0.0);
                    let ratio = d / -alpha;
                    let better = match best {
                        None => true,
                        Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && alpha.abs() > ba),
                    };
                    if better {
                        best = Some((code, ratio, alpha.abs()));
                    }
                }
            }
            let Some((q, ratio, _)) = best else {
                return Err(Error::Infeasible("dual simplex found no entering column".into()));
            };
            degenerate_run = if ratio <= 1e-12 { degenerate_run + 1 } else { 0 };
            let w = self.ftran(q);
            self.pivot(r, q, &w);
            self.maybe_refactor()?;
        }
    }

    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m();
        for r in 0..m {
            if !matches!(self.decode(self.basis[r]), Col::Art(_)) {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for code in 0..self.num_codes() {
                if self.pos[code].is_some() || !self.col_exists(code) || matches!(self.decode(code), Col::Art(_)) {
                    continue;
                }
                let alpha: f64 = self.entries(code).map(|(k, v)| row[k] * v).sum();
                if alpha.abs() > 1e-7 && best.is_none_or(|(_, b)| alpha.abs() > b) {
                    best = Some((code, alpha.abs()));
                }
            }
            if let Some((q, _)) = best {
                let w = self.ftran(q);
                self.xb[r] = 0.0;
                self.pivot(r, q, &w);
            }
        }
        Ok(())
    }

    /// Solves (or re-solves after appended rows) and returns the optimum.
    pub fn solve(&mut self) -> Result<LpOptimum> {
        if !self.solved {
            if self.basis.iter().any(|&c| matches!(self.decode(c), Col::Art(_))) {
                self.primal(Phase::One)?;
                self.refactor()?;
                self.primal(Phase::One)?;
                let infeas: f64 = self
                    .basis
                    .iter()
                    .zip(&self.xb)
                    .filter(|(&c, _)| matches!(self.decode(c), Col::Art(_)))
                    .map(|(_, &v)| v.max(0.0))
                    .sum();
                let scale = 1.0 + self.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
                if infeas > 1e-7 * scale {
                    return Err(Error::Infeasible(format!("phase 1 ended with infeasibility {infeas:.3e}")));
                }
                self.drive_out_artificials()?;
            }
            self.art_dead = true;
            self.solved = true;
            self.primal(Phase::Two)?;
        } else {
            self.dual()?;
            self.primal(Phase::Two)?;
        }
        self.refactor()?;
        // Clean-up passes on the freshly factored basis.
        for _ in 0..3 {
            if self.xb.iter().any(|&v| v < -self.opts.feas_tol) {
                self.dual()?;
            }
            let before = self.iterations;
            self.primal(Phase::Two)?;
            if self.iterations == before && self.xb.iter().all(|&v| v >= -self.opts.feas_tol) {
                break;
            }
            self.refactor()?;
        }
        Ok(self.extract())
    }

    fn extract(&self) -> LpOptimum {
        let mut x = vec![0.0; self.n];
        for (r, &code) in self.basis.iter().enumerate() {
            if let Col::Struct(j) = self.decode(code) {
                x[j] = self.xb[r].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        let pi = self.duals(Phase::Two);
        let duals = pi.iter().zip(&self.rows).map(|(p, row)| p * row.flip).collect();
        LpOptimum { x, objective, duals, iterations: self.iterations }
    }
}

enum ColIter<'a> {
    Sparse(std::slice::Iter<'a, (usize, f64)>),
    Unit(Option<(usize, f64)>),
}

impl Iterator for ColIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Sparse(it) => it.next().copied(),
            ColIter::Unit(e) => e.take(),
        }
    }
}
