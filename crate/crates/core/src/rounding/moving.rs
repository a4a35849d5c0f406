//! Per-level moving operations inside one neighborhood tree.

use serde::{Deserialize, Serialize};

use super::reps::{LedgerEntry, MoveKind, TransportState, VoronoiPartition};
use super::trees::NeighborhoodTree;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::lpcore::FractionalSolution;
use crate::rectangle::{check_rectangle, cofrac, frac, RectangleCut, RECT_TOL};

/// Demand/supply values within this distance of an integer count as integral.
pub const INT_TOL: f64 = 1e-9;
const EPS: f64 = 1e-12;

pub(crate) fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= INT_TOL {
        r
    } else {
        v
    }
}

pub(crate) fn ceil_s(v: f64) -> f64 {
    snap(v).ceil()
}

fn floor_s(v: f64) -> f64 {
    snap(v).floor()
}

fn is_int(v: f64) -> bool {
    (v - v.round()).abs() <= INT_TOL
}

/// Everything the moving operations read but never modify.
pub struct MoveContext<'a> {
    pub inst: &'a Instance,
    pub sol: &'a FractionalSolution,
    pub d_av: &'a [f64],
    pub vor: &'a VoronoiPartition,
    /// All representatives, sorted.
    pub reps: &'a [usize],
    pub ell: usize,
}

impl MoveContext<'_> {
    /// `d(A, C* \ A)`.
    pub fn gap_to_rest(&self, set: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &w in self.reps.iter().filter(|w| !set.contains(w)) {
            for &a in set {
                best = best.min(self.inst.cc(a, w));
            }
        }
        best
    }
}

/// Counters for the analytical inequalities evaluated along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantStats {
    pub level_checks: usize,
    pub collections: usize,
    pub lemma2_checks: usize,
    pub lemma2_violations: usize,
    pub claim3_checks: usize,
    pub claim3_violations: usize,
    pub claim4_checks: usize,
    pub claim4_violations: usize,
}

impl InvariantStats {
    pub fn violations(&self) -> usize {
        self.lemma2_violations + self.claim3_violations + self.claim4_violations
    }
}

/// Both sides of the moving-cost bound for `S = U_{A'}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2 {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn lemma2_sides(ctx: &MoveContext<'_>, set: &[usize]) -> Lemma2 {
    let s = ctx.vor.union(set);
    let (u, nc) = (ctx.inst.u() as f64, ctx.sol.num_clients);
    let (mut yp, mut y, mut d, mut dp) = (0.0, 0.0, 0.0, 0.0);
    for &i in &s {
        y += ctx.sol.y[i];
        for j in 0..nc {
            let x = ctx.sol.x(i, j);
            yp += x / u;
            d += x * ctx.inst.fc(i, j);
            dp += x * ctx.d_av[j];
        }
    }
    let lhs = frac(yp) * cofrac(y) * ctx.gap_to_rest(set);
    let rhs = 4.0 / u * d + (4.0 * ctx.ell as f64 + 2.0) / u * dp;
    Lemma2 { lhs, rhs }
}

#[derive(Default)]
struct Holder {
    parcels: Vec<(usize, f64)>,
}

impl Holder {
    fn push(&mut self, origin: usize, amount: f64) {
        if amount > EPS {
            self.parcels.push((origin, amount));
        }
    }

    fn total(&self) -> f64 {
        self.parcels.iter().map(|p| p.1).sum()
    }

    /// Removes up to `amount`, oldest parcels first.
    fn take(&mut self, mut amount: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        while amount > EPS && !self.parcels.is_empty() {
            let (o, a) = self.parcels[0];
            if a <= amount + EPS {
                out.push((o, a));
                amount -= a;
                self.parcels.remove(0);
            } else {
                out.push((o, amount));
                self.parcels[0].1 -= amount;
                amount = 0.0;
            }
        }
        out
    }
}

struct Mover<'c, 'a> {
    ctx: &'c MoveContext<'a>,
    tree: usize,
    level: usize,
}

impl Mover<'_, '_> {
    fn deliver(&self, st: &mut TransportState, kind: MoveKind, parts: Vec<(usize, f64)>, to: usize) {
        let u = self.ctx.inst.u() as f64;
        for (from, amount) in parts {
            let distance = self.ctx.inst.cc(from, to);
            match kind {
                MoveKind::Demand => {
                    st.alpha[to] += amount;
                    st.moving_cost += u * amount * distance;
                }
                MoveKind::Supply => st.beta[to] += amount,
            }
            if from != to {
                st.ledger.push(LedgerEntry { tree: self.tree, level: self.level, kind, from, to, amount, distance });
            }
        }
    }
}

/// One moving operation on level-`level` set `set` of `tree`.
fn process_set(
    ctx: &MoveContext<'_>,
    tree_idx: usize,
    tree: &NeighborhoodTree,
    level: usize,
    set: &[usize],
    st: &mut TransportState,
    stats: &mut InvariantStats,
) -> Result<()> {
    let root = tree.root;
    let inv_l = 1.0 / ctx.ell as f64;
    let mover = Mover { ctx, tree: tree_idx, level };
    let sum = |st: &TransportState| -> (f64, f64) {
        set.iter().fold((0.0, 0.0), |(a, b), &v| (a + st.alpha[v], b + st.beta[v]))
    };
    let before = sum(st);
    let mut dem = Holder::default();
    let mut sup = Holder::default();
    for &v in set.iter().filter(|&&v| v != root) {
        let (a, b) = (st.alpha[v], st.beta[v]);
        if b < ceil_s(a) - inv_l - EPS {
            stats.collections += 1;
            let prev = tree.levels[level - 1].iter().find(|s| s.contains(&v)).expect("lower level set containing v");
            let l2 = lemma2_sides(ctx, prev);
            stats.lemma2_checks += 1;
            if l2.lhs > l2.rhs + 1e-9 * (1.0 + l2.rhs) {
                stats.lemma2_violations += 1;
            }
            let fl = floor_s(a);
            dem.push(v, a - fl);
            sup.push(v, b - fl);
            st.alpha[v] = fl;
            st.beta[v] = fl;
        }
    }
    for &v in set.iter().filter(|&&v| v != root) {
        let c = ceil_s(st.alpha[v]);
        if st.beta[v] > c + EPS {
            sup.push(v, st.beta[v] - c);
            st.beta[v] = c;
        }
    }
    if set.contains(&root) {
        let d = dem.take(f64::INFINITY);
        mover.deliver(st, MoveKind::Demand, d, root);
        let s = sup.take(f64::INFINITY);
        mover.deliver(st, MoveKind::Supply, s, root);
    } else {
        for &v in set {
            if dem.total() <= EPS {
                break;
            }
            let gap = st.beta[v] - st.alpha[v];
            if gap > EPS {
                let t = gap.min(dem.total());
                let d = dem.take(t);
                mover.deliver(st, MoveKind::Demand, d, v);
                if t < gap - EPS {
                    break;
                }
                st.alpha[v] = st.beta[v];
            }
            let target = ceil_s(st.beta[v]);
            let gap = target - st.beta[v];
            if gap > EPS {
                let t = gap.min(dem.total()).min(sup.total());
                let d = dem.take(t);
                mover.deliver(st, MoveKind::Demand, d, v);
                let s = sup.take(t);
                mover.deliver(st, MoveKind::Supply, s, v);
                if t < gap - EPS {
                    break;
                }
                st.alpha[v] = target;
                st.beta[v] = target;
            }
        }
        let low = set[0];
        let d = dem.take(f64::INFINITY);
        mover.deliver(st, MoveKind::Demand, d, low);
        let s = sup.take(f64::INFINITY);
        mover.deliver(st, MoveKind::Supply, s, low);
    }

    let after = sum(st);
    let scale = 1.0 + before.0.abs() + before.1.abs();
    if (after.0 - before.0).abs() > 1e-9 * scale || (after.1 - before.1).abs() > 1e-9 * scale {
        return Err(Error::Internal(format!("moving on {set:?} changed the set totals")));
    }
    for &v in set {
        if st.alpha[v] > st.beta[v] + INT_TOL {
            return Err(Error::Internal(format!("alpha {} exceeds beta {} at {v}", st.alpha[v], st.beta[v])));
        }
    }
    let good = |v: usize| st.beta[v] >= ceil_s(st.alpha[v]) - inv_l - INT_TOL;
    if set.contains(&root) {
        if let Some(&v) = set.iter().find(|&&v| v != root && !good(v)) {
            return Err(Error::Internal(format!("root set {set:?} breaks the margin at {v}")));
        }
    } else {
        let odd =
            set.iter().filter(|&&v| !((st.alpha[v] - st.beta[v]).abs() <= INT_TOL && is_int(st.alpha[v]))).count();
        if odd > 1 && !set.iter().all(|&v| good(v)) {
            return Err(Error::Internal(format!("set {set:?} satisfies neither N1 nor N2")));
        }
    }
    Ok(())
}

/// Runs the level-by-level moving process on one tree. `st` holds this
/// tree's demand and supply (indexed by client). Every level set `A` is
/// first checked against the rectangle constraint on `B = U_A` of the
/// original solution; the first violation aborts with that cut.
pub fn move_within_tree(
    ctx: &MoveContext<'_>,
    tree_idx: usize,
    tree: &NeighborhoodTree,
    st: &mut TransportState,
    stats: &mut InvariantStats,
) -> Result<Option<RectangleCut>> {
    let h = tree.height();
    let n = tree.len() as i32;
    let bound = 3f64.powi(n - 1) * (1.0 + 1e-12);
    for rank in 1..=h {
        let lens: Vec<f64> = tree.edges.iter().filter(|e| e.rank == rank).map(|e| e.length).collect();
        let (lo, hi) = lens.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
        stats.claim3_checks += 1;
        if hi > lo * bound {
            stats.claim3_violations += 1;
        }
    }
    let u = ctx.inst.u();
    for level in 0..=h {
        for set in &tree.levels[level] {
            stats.level_checks += 1;
            let b = ctx.vor.union(set);
            if let Some(cut) = check_rectangle(ctx.sol, &b, u, RECT_TOL) {
                return Ok(Some(cut));
            }
        }
        if level >= 1 {
            for set in &tree.levels[level] {
                process_set(ctx, tree_idx, tree, level, set, st, stats)?;
            }
        }
        if level < h {
            let next =
                tree.edges.iter().filter(|e| e.rank == level + 1).map(|e| e.length).fold(f64::INFINITY, f64::min);
            for set in tree.levels[level].iter().filter(|s| !s.contains(&tree.root)) {
                stats.claim4_checks += 1;
                if ctx.gap_to_rest(set) < next / 2.0 - 1e-9 * (1.0 + next) {
                    stats.claim4_violations += 1;
                }
            }
        }
    }
    Ok(None)
}
