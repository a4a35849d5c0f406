//! Average costs, client representatives, Voronoi regions and the initial
//! transport of demand to representatives.

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::lpcore::FractionalSolution;

/// `d_av(j) = Σ_i x_{i,j} d(i,j)` for every client.
pub fn avg_costs(inst: &Instance, sol: &FractionalSolution) -> Vec<f64> {
    (0..sol.num_clients).map(|j| (0..sol.num_facilities).map(|i| sol.x(i, j) * inst.fc(i, j)).sum()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    /// Representatives (client indices) in the order they were picked.
    pub reps: Vec<usize>,
    /// For every client, the representative whose pick removed it.
    pub removed_by: Vec<usize>,
    /// For every client, its removal radius `2 ell d_av(j)`.
    pub radius: Vec<f64>,
    pub ell: usize,
}

impl RepresentativeSet {
    /// Representatives sorted by client index.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.reps.clone();
        v.sort_unstable();
        v
    }

    pub fn is_rep(&self, j: usize) -> bool {
        self.removed_by[j] == j
    }
}

/// Greedy pick: repeatedly take the remaining client with the smallest
/// `d_av` (ties by index) and drop every remaining `j` with
/// `d(j, v) <= 2 ell d_av(j)`.
pub fn select_representatives(inst: &Instance, d_av: &[f64], ell: usize) -> RepresentativeSet {
    let nc = inst.num_clients();
    let mut order: Vec<usize> = (0..nc).collect();
    order.sort_by(|&a, &b| d_av[a].total_cmp(&d_av[b]).then(a.cmp(&b)));
    let radius: Vec<f64> = d_av.iter().map(|&d| 2.0 * ell as f64 * d).collect();
    let mut removed_by = vec![usize::MAX; nc];
    let mut reps = Vec::new();
    for &v in &order {
        if removed_by[v] != usize::MAX {
            continue;
        }
        reps.push(v);
        for j in 0..nc {
            if removed_by[j] == usize::MAX && inst.cc(j, v) <= radius[j] {
                removed_by[j] = v;
            }
        }
        removed_by[v] = v;
    }
    RepresentativeSet { reps, removed_by, radius, ell }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiPartition {
    /// Representative (client index) of each facility's region.
    pub region_of: Vec<usize>,
    /// `(representative, facilities)` in representative index order.
    pub regions: Vec<(usize, Vec<usize>)>,
}

impl VoronoiPartition {
    pub fn region(&self, v: usize) -> &[usize] {
        let pos = self.regions.binary_search_by_key(&v, |(r, _)| *r).expect("representative");
        &self.regions[pos].1
    }

    /// `U_A`: union of the regions of `set`, sorted.
    pub fn union(&self, set: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = set.iter().flat_map(|&v| self.region(v).iter().copied()).collect();
        out.sort_unstable();
        out
    }
}

/// Assigns every facility to its nearest representative; ties go to the
/// representative picked earlier.
pub fn voronoi_partition(inst: &Instance, reps: &RepresentativeSet) -> VoronoiPartition {
    let nf = inst.num_facilities();
    let region_of: Vec<usize> = (0..nf)
        .map(|i| {
            *reps
                .reps
                .iter()
                .min_by(|&&a, &&b| inst.fc(i, a).total_cmp(&inst.fc(i, b)))
                .expect("at least one representative")
        })
        .collect();
    let regions = reps.sorted().into_iter().map(|v| (v, (0..nf).filter(|&i| region_of[i] == v).collect())).collect();
    VoronoiPartition { region_of, regions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Demand,
    Supply,
}

/// One transfer between representatives during tree processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub tree: usize,
    pub level: usize,
    pub kind: MoveKind,
    pub from: usize,
    pub to: usize,
    pub amount: f64,
    pub distance: f64,
}

/// Demand `alpha` and supply `beta` per representative (in units of `u`
/// clients), plus the ledger of moves made between representatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub ledger: Vec<LedgerEntry>,
    /// `Σ u * amount * distance` over demand moves.
    pub moving_cost: f64,
}

/// Moves the demand `x_{i,j}` of every client to the representative of
/// `i`'s region. Returns the state indexed by client and the (unscaled)
/// cost of the move.
pub fn move_to_representatives(
    inst: &Instance,
    sol: &FractionalSolution,
    vor: &VoronoiPartition,
) -> (TransportState, f64) {
    let (nf, nc) = (sol.num_facilities, sol.num_clients);
    let u = inst.u() as f64;
    let mut alpha = vec![0.0; nc];
    let mut beta = vec![0.0; nc];
    let mut cost = 0.0;
    for i in 0..nf {
        let v = vor.region_of[i];
        beta[v] += sol.y[i];
        for j in 0..nc {
            let x = sol.x(i, j);
            if x != 0.0 {
                alpha[v] += x / u;
                cost += x * inst.cc(j, v);
            }
        }
    }
    (TransportState { alpha, beta, ledger: Vec::new(), moving_cost: 0.0 }, cost)
}

/// Counts of violated representative properties (all should be zero).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Claim2Report {
    /// Pairs of representatives closer than `2 ell max(d_av)`.
    pub separation: usize,
    /// Clients without a representative of no larger `d_av` within `2 ell d_av(j)`.
    pub coverage: usize,
    /// Regions with `y(U_v) < 1 - 1/ell`.
    pub region_mass: usize,
    /// Triples with `d(i, v) > d(i, j) + 2 ell d_av(j)` for `i` in `U_v`.
    pub nearness: usize,
}

impl Claim2Report {
    pub fn total(&self) -> usize {
        self.separation + self.coverage + self.region_mass + self.nearness
    }
}

/// Checks the representative properties directly from distances.
pub fn check_claim2(
    inst: &Instance,
    sol: &FractionalSolution,
    d_av: &[f64],
    reps: &RepresentativeSet,
    vor: &VoronoiPartition,
    tol: f64,
) -> Claim2Report {
    let ell = reps.ell as f64;
    let mut rep = Claim2Report::default();
    for (a, &v) in reps.reps.iter().enumerate() {
        for &w in &reps.reps[a + 1..] {
            if inst.cc(v, w) <= 2.0 * ell * d_av[v].max(d_av[w]) {
                rep.separation += 1;
            }
        }
    }
    for j in 0..inst.num_clients() {
        let ok = reps.reps.iter().any(|&v| d_av[v] <= d_av[j] && inst.cc(v, j) <= 2.0 * ell * d_av[j] + tol);
        if !ok {
            rep.coverage += 1;
        }
    }
    for (_, region) in &vor.regions {
        let mass: f64 = region.iter().map(|&i| sol.y[i]).sum();
        if mass < 1.0 - 1.0 / ell - tol {
            rep.region_mass += 1;
        }
    }
    for i in 0..inst.num_facilities() {
        let v = vor.region_of[i];
        for j in 0..inst.num_clients() {
            if inst.fc(i, v) > inst.fc(i, j) + 2.0 * ell * d_av[j] + tol {
                rep.nearness += 1;
            }
        }
    }
    rep
}
