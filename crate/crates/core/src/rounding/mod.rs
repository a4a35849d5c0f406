//! Round-or-separate: turn a Basic-LP solution on a co-located instance
//! into an integral solution with at most `ceil((1 + eps) k)` open
//! facilities, or return a violated rectangle constraint.

pub mod moving;
pub mod reps;
pub mod trees;

use serde::{Deserialize, Serialize};

pub use moving::{lemma2_sides, move_within_tree, InvariantStats, Lemma2, MoveContext};
pub use reps::{
    avg_costs, check_claim2, move_to_representatives, select_representatives, voronoi_partition, Claim2Report,
    LedgerEntry, MoveKind, RepresentativeSet, TransportState, VoronoiPartition,
};
pub use trees::{build_neighborhood_trees, mst_tree, rank_and_levels, NeighborhoodTree, TreeEdge};

use crate::error::{Error, Result};
use crate::flow::{min_cost_assignment, Assignment, OpeningMultiset};
use crate::instance::Instance;
use crate::lpcore::FractionalSolution;
use crate::rectangle::RectangleCut;
use moving::ceil_s;

/// Largest accepted `eps`.
pub const MAX_EPS: f64 = 2.0;

/// Smallest `ell >= max(2, ceil(3 / eps))` with `(2 ell - 1) / (ell - 1)^2 <= eps`,
/// so the forest-case opening count stays within `(1 + eps) k`.
pub fn ell_for_eps(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= MAX_EPS) {
        return Err(Error::Parameter(format!("eps = {eps} outside (0, {MAX_EPS}]")));
    }
    let mut ell = ((3.0 / eps).ceil() as usize).max(2);
    while (2 * ell - 1) as f64 / ((ell - 1) * (ell - 1)) as f64 > eps {
        ell += 1;
    }
    Ok(ell)
}

/// `ceil((1 + eps) k)`.
pub fn facility_bound(k: usize, eps: f64) -> usize {
    ((1.0 + eps) * k as f64 - 1e-9).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralSolution {
    pub opening: OpeningMultiset,
    pub assignment: Assignment,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingTrace {
    pub ell: usize,
    pub representatives: Vec<usize>,
    /// `(representative, |U_v|)`.
    pub region_sizes: Vec<(usize, usize)>,
    pub mst_fallback: bool,
    pub trees: Vec<NeighborhoodTree>,
    pub claim2: Claim2Report,
    pub stats: InvariantStats,
    pub transport_cost: f64,
    pub transport_bound: f64,
    pub ledger: Vec<LedgerEntry>,
    pub moving_cost: f64,
    /// `(location, copies)` for every opened location.
    pub openings: Vec<(usize, usize)>,
    /// Per tree: `(openings, beta_V + 1 + (|V| - 1)/ell)`.
    pub tree_counts: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RoundOutcome {
    Rounded { solution: IntegralSolution, trace: RoundingTrace },
    Separated { cut: RectangleCut, trace: RoundingTrace },
}

/// One round-or-separate attempt on a co-located instance.
pub fn round(inst: &Instance, sol: &FractionalSolution, eps: f64) -> Result<RoundOutcome> {
    if !inst.colocated() {
        return Err(Error::Precondition(
            "rounding needs facilities and clients at the same points; \
             solve the soft instance and apply the soft-to-hard reduction"
                .into(),
        ));
    }
    if sol.num_facilities != inst.num_facilities() || sol.num_clients != inst.num_clients() {
        return Err(Error::Shape("solution does not match the instance".into()));
    }
    let ell = ell_for_eps(eps)?;
    let d_av = avg_costs(inst, sol);
    let rep_set = select_representatives(inst, &d_av, ell);
    let vor = voronoi_partition(inst, &rep_set);
    let (global, transport_cost) = move_to_representatives(inst, sol, &vor);
    let transport_bound = 2.0 * (ell as f64 + 1.0) * sol.objective;
    if transport_cost > transport_bound + 1e-9 * (1.0 + transport_bound) {
        return Err(Error::Internal(format!("transport cost {transport_cost} exceeds 2(ell+1)LP = {transport_bound}")));
    }
    let claim2 = check_claim2(inst, sol, &d_av, &rep_set, &vor, 1e-9);
    let reps = rep_set.sorted();
    let mst_fallback = reps.len() < ell;
    let mut trees =
        if mst_fallback { vec![mst_tree(inst, &reps)] } else { build_neighborhood_trees(inst, &reps, ell)? };
    for t in &mut trees {
        rank_and_levels(t);
    }
    let mut trace = RoundingTrace {
        ell,
        representatives: rep_set.reps.clone(),
        region_sizes: vor.regions.iter().map(|(v, r)| (*v, r.len())).collect(),
        mst_fallback,
        trees: Vec::new(),
        claim2,
        stats: InvariantStats::default(),
        transport_cost,
        transport_bound,
        ledger: Vec::new(),
        moving_cost: 0.0,
        openings: Vec::new(),
        tree_counts: Vec::new(),
    };

    // Each representative's demand and supply live in the tree where it is
    // a non-root, or else in the first tree it roots.
    let nc = inst.num_clients();
    let mut owner = vec![usize::MAX; nc];
    for (t, tree) in trees.iter().enumerate() {
        for &v in tree.parent.keys() {
            owner[v] = t;
        }
    }
    for (t, tree) in trees.iter().enumerate() {
        if owner[tree.root] == usize::MAX {
            owner[tree.root] = t;
        }
    }
    let ctx = MoveContext { inst, sol, d_av: &d_av, vor: &vor, reps: &reps, ell };
    let mut copies = vec![0usize; inst.num_facilities()];
    for (t, tree) in trees.iter().enumerate() {
        let mut st = TransportState { alpha: vec![0.0; nc], beta: vec![0.0; nc], ledger: Vec::new(), moving_cost: 0.0 };
        for &v in &tree.vertices {
            if owner[v] == t {
                st.alpha[v] = global.alpha[v];
                st.beta[v] = global.beta[v];
            }
        }
        let beta_v: f64 = tree.vertices.iter().map(|&v| st.beta[v]).sum();
        let cut = move_within_tree(&ctx, t, tree, &mut st, &mut trace.stats)?;
        trace.ledger.extend(st.ledger.iter().cloned());
        trace.moving_cost += st.moving_cost;
        if let Some(cut) = cut {
            trace.trees = trees.clone();
            return Ok(RoundOutcome::Separated { cut, trace });
        }
        let count: usize = tree.vertices.iter().map(|&v| ceil_s(st.alpha[v]) as usize).sum();
        let limit = beta_v + 1.0 + (tree.len() as f64 - 1.0) / ell as f64;
        if count as f64 > limit + 1e-9 {
            return Err(Error::Internal(format!("tree {t} opens {count} > {limit}")));
        }
        trace.tree_counts.push((count, limit));
        for &v in &tree.vertices {
            // co-located: facility v sits at client v
            copies[v] += ceil_s(st.alpha[v]) as usize;
        }
    }
    trace.trees = trees;
    let opening = OpeningMultiset::new(copies);
    let bound = facility_bound(inst.k(), eps);
    if opening.total() > bound {
        return Err(Error::Internal(format!("{} openings exceed {bound}", opening.total())));
    }
    trace.openings = opening.open_locations().into_iter().map(|i| (i, opening.counts[i])).collect();
    let assignment = min_cost_assignment(inst, &opening)?;
    let budget = transport_cost + trace.moving_cost;
    if assignment.cost > budget + 1e-7 * (1.0 + budget) {
        return Err(Error::Internal(format!(
            "assignment cost {} exceeds transport + moving cost {budget}",
            assignment.cost
        )));
    }
    let cost = assignment.cost;
    Ok(RoundOutcome::Rounded { solution: IntegralSolution { opening, assignment, cost }, trace })
}
