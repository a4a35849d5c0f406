//! Exhaustive solvers for tiny instances, used as ground truth.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{min_cost_assignment, Assignment, OpeningMultiset};
use crate::instance::Instance;
use crate::par::{self, Exec};

/// Largest number of candidate openings `exact_opt` will enumerate.
pub const MAX_CANDIDATES: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub best_cost: f64,
    pub best_opening: OpeningMultiset,
    pub assignment: Assignment,
    pub enumerated: usize,
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of openings `exact_opt` would enumerate.
pub fn candidate_count(num_facilities: usize, k: usize, soft: bool) -> u128 {
    let n = num_facilities as u128;
    if soft {
        binomial(n + k as u128 - 1, k as u128)
    } else {
        binomial(n, k.min(num_facilities) as u128)
    }
}

/// Lexicographic list of nondecreasing (soft) or increasing (hard) index
/// tuples of length `k` over `0..n`.
fn enumerate(n: usize, k: usize, soft: bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, soft: bool, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, soft, if soft { i } else { i + 1 }, cur, out);
            cur.pop();
        }
    }
    rec(n, k, soft, 0, &mut cur, &mut out);
    out
}

/// Optimal cost over all openings of `k_prime` copies (distinct locations
/// unless `soft`), each evaluated by min-cost assignment. Opening more
/// copies never hurts, so "at most `k_prime`" and "exactly `k_prime`" agree.
pub fn exact_opt(inst: &Instance, k_prime: usize, soft: bool) -> Result<ExactResult> {
    exact_opt_with(inst, k_prime, soft, Exec::default())
}

pub fn exact_opt_with(inst: &Instance, k_prime: usize, soft: bool, exec: Exec) -> Result<ExactResult> {
    let nf = inst.num_facilities();
    if k_prime == 0 {
        return Err(Error::Parameter("k' must be positive".into()));
    }
    let size = if soft { k_prime } else { k_prime.min(nf) };
    let count = candidate_count(nf, k_prime, soft);
    if count > MAX_CANDIDATES {
        return Err(Error::Size(format!("{count} candidate openings exceed {MAX_CANDIDATES}")));
    }
    if size * inst.u() < inst.num_clients() {
        return Err(Error::Infeasible(format!(
            "{size} copies of capacity {} cannot serve {} clients",
            inst.u(),
            inst.num_clients()
        )));
    }
    let cands = enumerate(nf, size, soft);
    let incumbent = AtomicU64::new(f64::INFINITY.to_bits());
    let nc = inst.num_clients();
    let evaluate = |idx: usize| -> Option<(f64, usize, Assignment)> {
        let locs = &cands[idx];
        let lower: f64 = (0..nc).map(|j| locs.iter().map(|&i| inst.fc(i, j)).fold(f64::INFINITY, f64::min)).sum();
        let best = f64::from_bits(incumbent.load(Ordering::Relaxed));
        if lower > best + 1e-9 {
            return None;
        }
        let open = OpeningMultiset::from_locations(nf, locs);
        let a = min_cost_assignment(inst, &open).ok()?;
        incumbent.fetch_min(a.cost.to_bits(), Ordering::Relaxed);
        Some((a.cost, idx, a))
    };
    let chunk_best = par::map_chunks(exec, 0..cands.len() as u64, 256, |range| {
        let mut best: Option<(f64, usize, Assignment)> = None;
        for idx in range {
            if let Some(c) = evaluate(idx as usize) {
                if best.as_ref().is_none_or(|b| c.0 < b.0) {
                    best = Some(c);
                }
            }
        }
        best
    });
    let (best_cost, idx, assignment) = chunk_best
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .ok_or_else(|| Error::Infeasible("no feasible opening".into()))?;
    Ok(ExactResult {
        best_cost,
        best_opening: OpeningMultiset::from_locations(nf, &cands[idx]),
        assignment,
        enumerated: cands.len(),
    })
}

/// Cheapest assignment by enumerating every capacity-respecting map from
/// clients to open locations. Exponential; meant for `nC <= 8`.
pub fn brute_force_assignment(inst: &Instance, open: &OpeningMultiset) -> Result<Assignment> {
    let nc = inst.num_clients();
    let locs = open.open_locations();
    let mut room: Vec<usize> = locs.iter().map(|&i| open.counts[i] * inst.u()).collect();
    let mut cur = vec![0usize; nc];
    let mut best: Option<(f64, Vec<usize>)> = None;
    fn rec(
        j: usize,
        cost: f64,
        inst: &Instance,
        locs: &[usize],
        room: &mut [usize],
        cur: &mut [usize],
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if j == cur.len() {
            if best.as_ref().is_none_or(|b| cost < b.0) {
                *best = Some((cost, cur.to_vec()));
            }
            return;
        }
        for (l, &i) in locs.iter().enumerate() {
            if room[l] > 0 {
                room[l] -= 1;
                cur[j] = i;
                rec(j + 1, cost + inst.fc(i, j), inst, locs, room, cur, best);
                room[l] += 1;
            }
        }
    }
    rec(0, 0.0, inst, &locs, &mut room, &mut cur, &mut best);
    let (_, target) = best.ok_or_else(|| Error::Infeasible("no capacity-feasible assignment".into()))?;
    Ok(Assignment::from_targets(inst, target))
}
