//! Independent oracles shared by the integration suites (also pulled into
//! the CLI acceptance target). Checks recompute their quantities from
//! distances and LP values; library checkers are only compared against.

#![allow(dead_code)]

use ckm_core::flow::{min_cost_assignment, OpeningMultiset};
use ckm_core::instance::{gen_random_colocated, Instance};
use ckm_core::lpcore::FractionalSolution;
use ckm_core::rectangle::{f_value, lemma3_check};
use ckm_core::reduction::ReductionReport;
use ckm_core::rounding::{IntegralSolution, NeighborhoodTree, RoundingTrace};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Co-located instance with sizes drawn from the seed: `n <= max_n`,
/// `u <= 4`, and `k` at or slightly above the capacity minimum.
pub fn random_colocated(seed: u64, max_n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.gen_range(2..=max_n);
    let u = rng.gen_range(1..=4usize);
    let k = (n.div_ceil(u) + rng.gen_range(0..=1)).min(n);
    gen_random_colocated(n, u, k, seed).unwrap()
}

/// Facilities and clients at separate random grid points, L1 metric.
pub fn random_split(seed: u64, nf: usize, nc: usize, u: usize, k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(i64, i64)> = (0..nf + nc).map(|_| (rng.gen_range(0..6), rng.gen_range(0..6))).collect();
    let m = nf + nc;
    let mut dist = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            dist[a * m + b] = ((pts[a].0 - pts[b].0).abs() + (pts[a].1 - pts[b].1).abs()) as f64;
        }
    }
    Instance::new(nf, nc, k, u, false, dist).unwrap()
}

/// Smallest `ell >= max(2, ceil(3/eps))` whose forest-case count stays
/// within `(1 + eps) k`.
pub fn ell_oracle(eps: f64) -> usize {
    let mut ell = ((3.0 / eps).ceil() as usize).max(2);
    while (2 * ell - 1) as f64 / ((ell - 1) * (ell - 1)) as f64 > eps {
        ell += 1;
    }
    ell
}

/// Cheapest capacity-respecting assignment by plain enumeration of every
/// client-to-location map. `None` if no map fits.
pub fn brute_assignment_cost(inst: &Instance, open: &OpeningMultiset) -> Option<f64> {
    let nc = inst.num_clients();
    let locs: Vec<usize> = (0..open.counts.len()).filter(|&i| open.counts[i] > 0).collect();
    let mut best: Option<f64> = None;
    let total = locs.len().pow(nc as u32);
    for code in 0..total {
        let mut c = code;
        let mut load = vec![0usize; locs.len()];
        let mut cost = 0.0;
        for j in 0..nc {
            let l = c % locs.len();
            c /= locs.len();
            load[l] += 1;
            cost += inst.fc(locs[l], j);
        }
        let fits = load.iter().zip(&locs).all(|(&n, &i)| n <= open.counts[i] * inst.u());
        if fits && best.is_none_or(|b| cost < b) {
            best = Some(cost);
        }
    }
    best
}

/// A rectangle row `x_{B,J} <= piece(y_B)` written out over model variables.
pub struct RectRow {
    pub b: Vec<usize>,
    pub j: Vec<usize>,
    /// `(coefficient on y_B, constant)`.
    pub rhs: (f64, f64),
}

/// Every rectangle `(B, J)` and every linear piece of `f(|J|, .)`:
/// `p`, `u q` and the interpolation `u m + r (q - m)` when `r > 0`.
pub fn all_rectangle_rows(nf: usize, nc: usize, u: usize) -> Vec<RectRow> {
    let mut rows = Vec::new();
    for bm in 1u32..(1 << nf) {
        let b: Vec<usize> = (0..nf).filter(|i| bm >> i & 1 == 1).collect();
        for jm in 1u32..(1 << nc) {
            let j: Vec<usize> = (0..nc).filter(|c| jm >> c & 1 == 1).collect();
            let p = j.len();
            let (m, r) = (p / u, p % u);
            rows.push(RectRow { b: b.clone(), j: j.clone(), rhs: (0.0, p as f64) });
            rows.push(RectRow { b: b.clone(), j: j.clone(), rhs: (u as f64, 0.0) });
            if r > 0 {
                rows.push(RectRow { b: b.clone(), j, rhs: (r as f64, (u * m) as f64 - (r * m) as f64) });
            }
        }
    }
    rows
}

/// LP optimum computed by minilp: Basic LP, plus every rectangle row when
/// `rectangles` is set.
pub fn reference_lp(inst: &Instance, rectangles: bool) -> f64 {
    let (nf, nc, u) = (inst.num_facilities(), inst.num_clients(), inst.u());
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let x: Vec<Vec<_>> =
        (0..nf).map(|i| (0..nc).map(|j| pb.add_var(inst.fc(i, j), (0.0, f64::INFINITY))).collect()).collect();
    let y: Vec<_> = (0..nf).map(|_| pb.add_var(0.0, (0.0, f64::INFINITY))).collect();
    pb.add_constraint(y.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>().as_slice(), ComparisonOp::Le, inst.k() as f64);
    for j in 0..nc {
        pb.add_constraint((0..nf).map(|i| (x[i][j], 1.0)).collect::<Vec<_>>().as_slice(), ComparisonOp::Eq, 1.0);
    }
    for i in 0..nf {
        for j in 0..nc {
            pb.add_constraint([(x[i][j], 1.0), (y[i], -1.0)], ComparisonOp::Le, 0.0);
        }
        let mut cap: Vec<_> = (0..nc).map(|j| (x[i][j], 1.0)).collect();
        cap.push((y[i], -(u as f64)));
        pb.add_constraint(cap.as_slice(), ComparisonOp::Le, 0.0);
    }
    if rectangles {
        for row in all_rectangle_rows(nf, nc, u) {
            let mut terms = Vec::new();
            for &i in &row.b {
                for &j in &row.j {
                    terms.push((x[i][j], 1.0));
                }
                if row.rhs.0 != 0.0 {
                    terms.push((y[i], -row.rhs.0));
                }
            }
            pb.add_constraint(terms.as_slice(), ComparisonOp::Le, row.rhs.1);
        }
    }
    pb.solve().expect("reference LP solves").objective()
}

/// Average connection cost of every client.
pub fn d_av(inst: &Instance, sol: &FractionalSolution) -> Vec<f64> {
    (0..inst.num_clients()).map(|j| (0..inst.num_facilities()).map(|i| sol.x(i, j) * inst.fc(i, j)).sum()).collect()
}

/// Nearest representative of every facility (any nearest one).
pub fn nearest_rep(inst: &Instance, reps: &[usize]) -> Vec<usize> {
    (0..inst.num_facilities())
        .map(|i| *reps.iter().min_by(|&&a, &&b| inst.fc(i, a).total_cmp(&inst.fc(i, b))).unwrap())
        .collect()
}

/// Greedy representatives: repeatedly take the remaining client with the
/// smallest `d_av` (lowest index on ties) and drop every client `j` with
/// `d(j, v) <= 2 ell d_av(j)`.
pub fn greedy_reps(inst: &Instance, dav: &[f64], ell: usize) -> Vec<usize> {
    let mut left: Vec<usize> = (0..inst.num_clients()).collect();
    let mut reps = Vec::new();
    while let Some(&v) = left.iter().min_by(|&&a, &&b| dav[a].total_cmp(&dav[b]).then(a.cmp(&b))) {
        reps.push(v);
        left.retain(|&j| inst.cc(j, v) > 2.0 * ell as f64 * dav[j]);
    }
    reps
}

/// Tally of named checks and the failures among them.
#[derive(Default)]
pub struct Checks {
    pub counts: std::collections::BTreeMap<&'static str, usize>,
    pub violations: Vec<String>,
}

impl Checks {
    pub fn check(&mut self, name: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        *self.counts.entry(name).or_default() += 1;
        if !ok {
            self.violations.push(format!("{name}: {}", detail()));
        }
    }

    pub fn count(&self, name: &str) -> usize {
        self.counts.get(name).copied().unwrap_or(0)
    }

    pub fn summary(&self) -> String {
        let parts: Vec<String> = self.counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
        parts.join(", ")
    }
}

/// Representative properties, transport bound, rank rule and level-set
/// gaps for one successful rounding, recomputed from distances and the LP
/// solution. Moving-cost inequalities evaluated inside the rounding are
/// taken from its counters.
pub fn rounded_run_checks(inst: &Instance, sol: &FractionalSolution, tr: &RoundingTrace, eps: f64, c: &mut Checks) {
    let ell = ell_oracle(eps);
    c.check("ell", tr.ell == ell, || format!("{} != {ell}", tr.ell));
    let lf = ell as f64;
    let dav = d_av(inst, sol);
    let reps = &tr.representatives;
    let nc = inst.num_clients();

    for (a, &v) in reps.iter().enumerate() {
        for &w in &reps[a + 1..] {
            c.check("reps separated", inst.cc(v, w) > 2.0 * lf * dav[v].max(dav[w]), || format!("reps {v} {w}"));
        }
    }
    for j in 0..nc {
        let ok = reps.iter().any(|&v| dav[v] <= dav[j] + 1e-12 && inst.cc(v, j) <= 2.0 * lf * dav[j] + 1e-9);
        c.check("client near a rep", ok, || format!("client {j}"));
    }
    let owner = nearest_rep(inst, reps);
    for &v in reps {
        let y: f64 = (0..inst.num_facilities()).filter(|&i| owner[i] == v).map(|i| sol.y[i]).sum();
        c.check("region mass", y >= 1.0 - 1.0 / lf - 1e-9, || format!("rep {v}: y = {y}"));
    }
    for i in 0..inst.num_facilities() {
        for j in 0..nc {
            let ok = inst.fc(i, owner[i]) <= inst.fc(i, j) + 2.0 * lf * dav[j] + 1e-9;
            c.check("facility near own rep", ok, || format!("facility {i} client {j}"));
        }
    }

    let mut transport = 0.0;
    for i in 0..inst.num_facilities() {
        for j in 0..nc {
            transport += sol.x(i, j) * inst.cc(j, owner[i]);
        }
    }
    let bound = 2.0 * (lf + 1.0) * sol.objective;
    c.check("transport bound", transport <= bound + 1e-9 && tr.transport_cost <= bound + 1e-9, || {
        format!("{transport} / {} > {bound}", tr.transport_cost)
    });

    for t in &tr.trees {
        rank_checks(t, c);
        level_gap_checks(inst, reps, t, c);
    }
    *c.counts.entry("moving-cost bound at collections").or_default() += tr.stats.lemma2_checks;
    if tr.stats.lemma2_violations > 0 {
        c.violations.push(format!("moving-cost bound: {} violations inside rounding", tr.stats.lemma2_violations));
    }
}

/// Ranks follow the doubling rule on sorted lengths, and lengths within a
/// rank stay within a factor `3^(|V|-1)`.
pub fn rank_checks(t: &NeighborhoodTree, c: &mut Checks) {
    let mut lens: Vec<(f64, usize)> = t.edges.iter().map(|e| (e.length, e.rank)).collect();
    lens.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut prefix = 0.0;
    let mut rank = 0;
    for (idx, &(len, r)) in lens.iter().enumerate() {
        if idx == 0 || len > 2.0 * prefix {
            rank += 1;
        }
        c.check("rank rule", r == rank, || format!("edge of length {len} has rank {r}, expected {rank}"));
        prefix += len;
    }
    let factor = 3f64.powi(t.vertices.len() as i32 - 1);
    for r in 1..=rank {
        let of_rank: Vec<f64> = lens.iter().filter(|e| e.1 == r).map(|e| e.0).collect();
        let lo = of_rank.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = of_rank.iter().cloned().fold(0.0, f64::max);
        c.check("rank length ratio", hi <= lo * factor * (1.0 + 1e-12), || format!("rank {r} spans {lo}..{hi}"));
    }
}

/// Level-i sets away from the root are at least half the shortest
/// rank-(i+1) edge away from every other representative.
pub fn level_gap_checks(inst: &Instance, reps: &[usize], t: &NeighborhoodTree, c: &mut Checks) {
    let h = t.edges.iter().map(|e| e.rank).max().unwrap_or(0);
    for i in 0..h {
        let next = t.edges.iter().filter(|e| e.rank == i + 1).map(|e| e.length).fold(f64::INFINITY, f64::min);
        for set in t.levels[i].iter().filter(|s| !s.contains(&t.root)) {
            let gap = set
                .iter()
                .flat_map(|&a| reps.iter().filter(|w| !set.contains(w)).map(move |&w| inst.cc(a, w)))
                .fold(f64::INFINITY, f64::min);
            c.check("level set gap", gap >= next / 2.0 - 1e-9, || format!("level {i} set {set:?}: {gap} < {next}/2"));
        }
    }
}

/// Convex combination of random integral solutions (copies may stack). It
/// satisfies every rectangle row because `f` is concave in `q`.
pub fn mixed_integral(inst: &Instance, seed: u64) -> FractionalSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nf, nc, u) = (inst.num_facilities(), inst.num_clients(), inst.u());
    let parts = rng.gen_range(1..=3);
    let mut weights: Vec<f64> = (0..parts).map(|_| rng.gen_range(1..=4) as f64).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let (mut x, mut y) = (vec![0.0; nf * nc], vec![0.0; nf]);
    for w in weights {
        let mut counts = vec![0usize; nf];
        for _ in 0..nc.div_ceil(u) + rng.gen_range(0..=1) {
            counts[rng.gen_range(0..nf)] += 1;
        }
        let mut room: Vec<usize> = counts.iter().map(|c| c * u).collect();
        for j in 0..nc {
            let open: Vec<usize> = (0..nf).filter(|&i| room[i] > 0).collect();
            let i = open[rng.gen_range(0..open.len())];
            room[i] -= 1;
            x[i * nc + j] += w;
        }
        for i in 0..nf {
            y[i] += w * counts[i] as f64;
        }
    }
    FractionalSolution::new(inst, x, y)
}

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 {
        v.round()
    } else {
        v
    }
}

/// The variance inequality on every facility set `B` with
/// `y'_B >= floor(y_B)`, evaluated directly and compared with the library.
pub fn variance_checks(inst: &Instance, sol: &FractionalSolution, c: &mut Checks) {
    let (nf, nc, u) = (inst.num_facilities(), inst.num_clients(), inst.u());
    for mask in 1u32..(1 << nf) {
        let b: Vec<usize> = (0..nf).filter(|i| mask >> i & 1 == 1).collect();
        let xb: Vec<f64> = (0..nc).map(|j| b.iter().map(|&i| sol.x(i, j)).sum()).collect();
        let yb = snap(b.iter().map(|&i| sol.y[i]).sum());
        let yp = snap(xb.iter().sum::<f64>() / u as f64);
        if yp < yb.floor() {
            continue;
        }
        let lhs: f64 = xb.iter().map(|v| v * (1.0 - v)).sum();
        let rhs = u as f64 * (yp - yp.floor()) * (yb.ceil() - yb);
        c.check("variance inequality", lhs >= rhs - 1e-9, || format!("B {b:?}: {lhs} < {rhs}"));
        let agrees = match lemma3_check(sol, &b, u, 1e-9) {
            Ok(r) => r.holds && (r.lhs - lhs).abs() < 1e-9 && (r.rhs - rhs).abs() < 1e-9,
            Err(_) => false,
        };
        c.check("variance library agreement", agrees, || format!("B {b:?}"));
    }
}

/// The moving-cost bound on every proper subset `A` of greedily chosen
/// representatives with `y'_S >= floor(y_S)`, `S = U_A`.
pub fn moving_cost_checks(inst: &Instance, sol: &FractionalSolution, ell: usize, c: &mut Checks) {
    let (nf, nc, u) = (inst.num_facilities(), inst.num_clients(), inst.u() as f64);
    let lf = ell as f64;
    let dav = d_av(inst, sol);
    let reps = greedy_reps(inst, &dav, ell);
    if reps.len() < 2 || reps.len() > 12 {
        return;
    }
    let owner = nearest_rep(inst, &reps);
    for mask in 1u32..(1 << reps.len()) - 1 {
        let a: Vec<usize> = (0..reps.len()).filter(|t| mask >> t & 1 == 1).map(|t| reps[t]).collect();
        let s: Vec<usize> = (0..nf).filter(|&i| a.contains(&owner[i])).collect();
        let y = snap(s.iter().map(|&i| sol.y[i]).sum());
        let yp = snap(s.iter().map(|&i| (0..nc).map(|j| sol.x(i, j)).sum::<f64>()).sum::<f64>() / u);
        if yp < y.floor() {
            continue;
        }
        let d: f64 = s.iter().map(|&i| (0..nc).map(|j| sol.x(i, j) * inst.fc(i, j)).sum::<f64>()).sum();
        let dp: f64 = s.iter().map(|&i| (0..nc).map(|j| sol.x(i, j) * dav[j]).sum::<f64>()).sum();
        let gap = a
            .iter()
            .flat_map(|&v| reps.iter().filter(|w| !a.contains(w)).map(move |&w| inst.cc(v, w)))
            .fold(f64::INFINITY, f64::min);
        let lhs = (yp - yp.floor()) * (y.ceil() - y) * gap;
        let rhs = 4.0 / u * d + (4.0 * lf + 2.0) / u * dp;
        c.check("moving-cost bound", lhs <= rhs + 1e-9, || format!("ell {ell} A {a:?}: {lhs} > {rhs}"));
    }
}

/// Extremal configuration for the variance inequality: `u m` clients fully
/// on facility 0 and `u` clients split `phi / (1 - phi)`, so both sides equal
/// `u phi (1 - phi)`. Returns `(lhs, rhs, expected)`.
pub fn variance_extremal(u: usize, m: usize, phi: f64) -> (f64, f64, f64) {
    let nc = u * (m + 1);
    let inst = random_split(7, 2, nc, u, m + 1);
    let mut x = vec![0.0; 2 * nc];
    for j in 0..nc {
        if j < u * m {
            x[j] = 1.0;
        } else {
            x[j] = phi;
            x[nc + j] = 1.0 - phi;
        }
    }
    let sol = FractionalSolution::new(&inst, x, vec![m as f64 + phi, 1.0 - phi]);
    let r = lemma3_check(&sol, &[0], u, 1e-12).unwrap();
    (r.lhs, r.rhs, u as f64 * phi * (1.0 - phi))
}

/// Largest second difference of `f` over the grid `p <= 50`, `u <= 7`,
/// `q <= 10` in steps of 0.05, in both arguments.
pub fn max_second_difference() -> f64 {
    let h = 0.05;
    let mut worst = f64::NEG_INFINITY;
    for u in 1..=7 {
        for p in 0..=50 {
            for t in 1..200 {
                let q = t as f64 * h;
                worst = worst.max(f_value(p, q - h, u) + f_value(p, q + h, u) - 2.0 * f_value(p, q, u));
            }
            if (1..50).contains(&p) {
                for t in 0..=200 {
                    let q = t as f64 * h;
                    worst = worst.max(f_value(p - 1, q, u) + f_value(p + 1, q, u) - 2.0 * f_value(p, q, u));
                }
            }
        }
    }
    worst
}

/// Random hard instance with `nF, nC <= 8` plus a random soft solution on
/// its client points using at most `k` copies.
pub fn random_reduction_case(seed: u64) -> (Instance, IntegralSolution) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nc: usize = rng.gen_range(2..=8);
    let u: usize = rng.gen_range(1..=3);
    let k = (nc.div_ceil(u) + rng.gen_range(0..=1)).min(8);
    let nf = rng.gen_range(k.max(2)..=8);
    let hard = random_split(seed, nf, nc, u, k);
    let soft_inst = hard.soft_instance();
    let mut counts = vec![0usize; nc];
    for _ in 0..nc.div_ceil(u) + rng.gen_range(0..=k - nc.div_ceil(u)) {
        counts[rng.gen_range(0..nc)] += 1;
    }
    let opening = OpeningMultiset::new(counts);
    let assignment = min_cost_assignment(&soft_inst, &opening).unwrap();
    let cost = assignment.cost;
    (hard, IntegralSolution { opening, assignment, cost })
}

/// Output of the soft-to-hard reduction against its guarantees, with `C`
/// and `C'` recomputed by the flow oracle.
pub fn reduction_checks(hard: &Instance, soft: &IntegralSolution, rep: &ReductionReport, c: &mut Checks) {
    c.check("at most k locations", rep.opened.len() <= hard.k(), || {
        format!("opened {} > k {}", rep.opened.len(), hard.k())
    });
    let open = OpeningMultiset::from_locations(hard.num_facilities(), &rep.opened);
    let feasible = open.counts.iter().all(|&n| n <= 1) && rep.solution.assignment.is_feasible(hard, &open);
    c.check("hard capacity-feasible", feasible, || format!("opened {:?}", rep.opened));
    let direct: f64 = rep.solution.assignment.target.iter().enumerate().map(|(j, &i)| hard.fc(i, j)).sum();
    let base = min_cost_assignment(hard, &OpeningMultiset::new(vec![1; hard.num_facilities()])).unwrap();
    let soft_direct: f64 = soft.assignment.target.iter().enumerate().map(|(j, &v)| hard.cc(v, j)).sum();
    let bound = base.cost + 2.0 * soft_direct;
    c.check("cost <= C + 2C'", direct == rep.solution.cost && direct <= bound + 1e-9, || {
        format!("{direct} (reported {}) vs {bound}", rep.solution.cost)
    });
    c.check("forest after cycle canceling", rep.forest_after_cycles, String::new);
    c.check("<= 1 partial node per tree", rep.max_partial_per_tree <= 1, || rep.max_partial_per_tree.to_string());
}
