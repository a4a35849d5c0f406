//! Soft-to-hard capacity reduction.
//!
//! Given a capacity-feasible assignment of all clients to all facilities of
//! the hard instance (cost `C`) and a solution of the soft instance on the
//! client points (cost `C'`), builds a hard solution of cost at most
//! `C + 2C'` that opens no more locations than the soft solution has copies.
//! Every client contributes one edge between its hard facility and its soft
//! copy; cycles and then paths are canceled in that bipartite multigraph
//! until every tree has at most one partially matched hard facility.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{min_cost_assignment, Assignment, OpeningMultiset};
use crate::instance::Instance;
use crate::rounding::IntegralSolution;

/// Edge multiplicities between hard facilities (`F`) and soft copies (`S`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiMatching {
    pub num_f: usize,
    pub num_s: usize,
    /// `(f, s) -> multiplicity`, zero entries removed.
    pub multiplicity: BTreeMap<(usize, usize), usize>,
    pub cap_f: usize,
    /// Required degree of every `S` node.
    pub deg_s: Vec<usize>,
}

impl MultiMatching {
    pub fn deg_f(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_f];
        for (&(f, _), &m) in &self.multiplicity {
            d[f] += m;
        }
        d
    }

    fn current_deg_s(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_s];
        for (&(_, s), &m) in &self.multiplicity {
            d[s] += m;
        }
        d
    }

    pub fn cost(&self, length: &dyn Fn(usize, usize) -> f64) -> f64 {
        self.multiplicity.iter().map(|(&(f, s), &m)| m as f64 * length(f, s)).sum()
    }

    /// Caps on `F` and exact degrees on `S`.
    pub fn is_valid(&self) -> bool {
        self.deg_f().iter().all(|&d| d <= self.cap_f) && self.current_deg_s() == self.deg_s
    }

    // Nodes: F as 0..num_f, S as num_f + s.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_f + self.num_s];
        for &(f, s) in self.multiplicity.keys() {
            adj[f].push(self.num_f + s);
            adj[self.num_f + s].push(f);
        }
        adj
    }

    /// Connected components of the support, as a component id per node
    /// (isolated nodes get their own id).
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let n = adj.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// The support, ignoring multiplicities, has no cycle.
    pub fn is_forest(&self) -> bool {
        let comp = self.components();
        let num_comp = comp.iter().max().map_or(0, |&m| m + 1);
        self.multiplicity.len() + num_comp == self.num_f + self.num_s
    }

    fn edge_key(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.num_f {
            (a, b - self.num_f)
        } else {
            (b, a - self.num_f)
        }
    }

    /// Some cycle of the support as a closed node walk `v0 .. v_{m-1}`.
    fn find_cycle(&self) -> Option<Vec<usize>> {
        let adj = self.adjacency();
        let n = adj.len();
        let mut parent = vec![usize::MAX; n];
        let mut depth = vec![usize::MAX; n];
        for root in 0..n {
            if depth[root] != usize::MAX {
                continue;
            }
            depth[root] = 0;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if w == parent[v] {
                        continue;
                    }
                    if depth[w] == usize::MAX {
                        depth[w] = depth[v] + 1;
                        parent[w] = v;
                        stack.push(w);
                    } else {
                        // non-tree edge v-w closes a cycle through their common ancestor
                        let (mut a, mut b) = (v, w);
                        let (mut left, mut right) = (vec![a], vec![b]);
                        while depth[a] > depth[b] {
                            a = parent[a];
                            left.push(a);
                        }
                        while depth[b] > depth[a] {
                            b = parent[b];
                            right.push(b);
                        }
                        while a != b {
                            a = parent[a];
                            b = parent[b];
                            left.push(a);
                            right.push(b);
                        }
                        right.pop();
                        right.reverse();
                        left.extend(right);
                        return Some(left);
                    }
                }
            }
        }
        None
    }

    /// The unique support path between two nodes of one tree.
    fn tree_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let adj = self.adjacency();
        let mut prev = vec![usize::MAX; adj.len()];
        prev[from] = from;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for &w in &adj[v] {
                if prev[w] == usize::MAX {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        if prev[to] == usize::MAX {
            return None;
        }
        let mut path = vec![to];
        let mut v = to;
        while v != from {
            v = prev[v];
            path.push(v);
        }
        path.reverse();
        Some(path)
    }

    /// Adds `delta` to the edges at even positions of `walk` and subtracts it
    /// at odd positions (or the reverse when `flip`).
    fn shift(&mut self, walk_edges: &[(usize, usize)], flip: bool, delta: usize) {
        for (t, key) in walk_edges.iter().enumerate() {
            let up = (t % 2 == 0) != flip;
            let m = self.multiplicity.entry(*key).or_insert(0);
            if up {
                *m += delta;
            } else {
                *m -= delta;
            }
            if *m == 0 {
                self.multiplicity.remove(key);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub opened: Vec<usize>,
    pub solution: IntegralSolution,
    /// Cost of the base assignment (`C`).
    pub base_cost: f64,
    /// Cost of the soft solution (`C'`).
    pub soft_cost: f64,
    pub bound: f64,
    pub concatenated_cost: f64,
    pub after_cycles_cost: f64,
    pub after_paths_cost: f64,
    /// Cost of the assignment read off the final matching, before
    /// re-optimizing over the opened locations.
    pub constructed_cost: f64,
    pub cycle_rounds: usize,
    pub path_rounds: usize,
    pub forest_after_cycles: bool,
    /// Largest number of partially matched `F` nodes in one tree.
    pub max_partial_per_tree: usize,
}

fn rel_le(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * (1.0 + b.abs())
}

/// Converts a soft solution (on `hard.soft_instance()`, locations indexed by
/// client) into a hard solution that opens at most `hard.k()` locations.
pub fn soft_to_hard(hard: &Instance, soft: &IntegralSolution, base: &Assignment) -> Result<ReductionReport> {
    let (nf, nc, u) = (hard.num_facilities(), hard.num_clients(), hard.u());
    let all_open = OpeningMultiset::new(vec![1; nf]);
    if !base.is_feasible(hard, &all_open) {
        return Err(Error::Precondition("base matching must assign every client to a facility within capacity".into()));
    }
    if soft.opening.counts.len() != nc || !soft.assignment.is_feasible(&hard.soft_instance(), &soft.opening) {
        return Err(Error::Precondition(
            "soft solution must be a capacity-feasible solution on the client points".into(),
        ));
    }
    if soft.opening.total() > hard.k() {
        return Err(Error::Precondition(format!(
            "soft solution opens {} copies, budget is {}",
            soft.opening.total(),
            hard.k()
        )));
    }
    let base_cost: f64 = (0..nc).map(|j| hard.fc(base.target[j], j)).sum();
    let soft_cost: f64 = (0..nc).map(|j| hard.cc(j, soft.assignment.target[j])).sum();

    // Split each soft location's clients into its copies, u at a time.
    let mut copy_loc = Vec::new();
    let mut copy_of = vec![0usize; nc];
    for (loc, &count) in soft.opening.counts.iter().enumerate() {
        let clients: Vec<usize> = (0..nc).filter(|&j| soft.assignment.target[j] == loc).collect();
        let first = copy_loc.len();
        copy_loc.extend(std::iter::repeat_n(loc, count));
        for (t, &j) in clients.iter().enumerate() {
            copy_of[j] = first + t / u;
        }
    }
    let ns = copy_loc.len();
    let mut deg_s = vec![0; ns];
    let mut mm = MultiMatching { num_f: nf, num_s: ns, multiplicity: BTreeMap::new(), cap_f: u, deg_s: Vec::new() };
    for j in 0..nc {
        *mm.multiplicity.entry((base.target[j], copy_of[j])).or_insert(0) += 1;
        deg_s[copy_of[j]] += 1;
    }
    mm.deg_s = deg_s;
    let length = |f: usize, s: usize| hard.fc(f, copy_loc[s]);
    let concatenated_cost = mm.cost(&length);
    if !rel_le(concatenated_cost, base_cost + soft_cost) {
        return Err(Error::Internal(format!(
            "concatenated matching costs {concatenated_cost} > C + C' = {}",
            base_cost + soft_cost
        )));
    }

    let mut cycle_rounds = 0;
    while let Some(cycle) = mm.find_cycle() {
        let m = cycle.len();
        let edges: Vec<(usize, usize)> = (0..m).map(|t| mm.edge_key(cycle[t], cycle[(t + 1) % m])).collect();
        let (even, odd) = split_lengths(&edges, &length);
        // decrease the heavier colour
        let flip = even > odd;
        let delta = decreasing(&edges, flip).map(|e| mm.multiplicity[e]).min().expect("nonempty cycle");
        let before = mm.edge_count();
        mm.shift(&edges, flip, delta);
        if mm.edge_count() >= before || !mm.is_valid() {
            return Err(Error::Internal("cycle canceling did not remove an edge".into()));
        }
        cycle_rounds += 1;
    }
    let forest_after_cycles = mm.is_forest();
    let after_cycles_cost = mm.cost(&length);
    if !forest_after_cycles || !rel_le(after_cycles_cost, concatenated_cost) {
        return Err(Error::Internal("cycle canceling left a cycle or raised the cost".into()));
    }

    let mut path_rounds = 0;
    loop {
        let deg = mm.deg_f();
        let comp = mm.components();
        let mut partial: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for f in 0..nf {
            if deg[f] > 0 && deg[f] < u {
                partial.entry(comp[f]).or_default().push(f);
            }
        }
        let Some(pair) = partial.values().find(|v| v.len() >= 2) else { break };
        let (a, b) = (pair[0], pair[1]);
        let path = mm.tree_path(a, b).ok_or_else(|| Error::Internal("no path inside a tree".into()))?;
        let edges: Vec<(usize, usize)> = path.windows(2).map(|w| mm.edge_key(w[0], w[1])).collect();
        let (even, odd) = split_lengths(&edges, &length);
        // not flipped: `a` gains and `b` loses
        let flip = even > odd;
        let (gainer, loser) = if flip { (b, a) } else { (a, b) };
        let delta = decreasing(&edges, flip)
            .map(|e| mm.multiplicity[e])
            .chain([u - deg[gainer], deg[loser]])
            .min()
            .expect("nonempty path");
        mm.shift(&edges, flip, delta);
        if !mm.is_valid() {
            return Err(Error::Internal("path canceling broke a degree constraint".into()));
        }
        path_rounds += 1;
    }
    let after_paths_cost = mm.cost(&length);
    if !rel_le(after_paths_cost, after_cycles_cost) || !mm.is_forest() {
        return Err(Error::Internal("path canceling raised the cost or created a cycle".into()));
    }

    // Per tree: exactly ceil(t/u) matched F nodes, at most one partial.
    let deg = mm.deg_f();
    let comp = mm.components();
    let mut tree_stats: BTreeMap<usize, (usize, usize, usize, usize)> = BTreeMap::new();
    for f in 0..nf {
        if deg[f] > 0 {
            let e = tree_stats.entry(comp[f]).or_default();
            e.0 += 1;
            e.1 += usize::from(deg[f] < u);
        }
    }
    for s in 0..ns {
        let e = tree_stats.entry(comp[nf + s]).or_default();
        e.2 += mm.deg_s[s];
        e.3 += 1;
    }
    let mut max_partial_per_tree = 0;
    for &(matched, partial, t, copies) in tree_stats.values() {
        max_partial_per_tree = max_partial_per_tree.max(partial);
        if t > 0 && (matched != t.div_ceil(u) || matched > copies) {
            return Err(Error::Internal(format!(
                "tree with demand {t} and {copies} copies matches {matched} facilities"
            )));
        }
    }
    if max_partial_per_tree > 1 {
        return Err(Error::Internal("a tree keeps two partially matched facilities".into()));
    }

    let opened: Vec<usize> = (0..nf).filter(|&f| deg[f] > 0).collect();
    if opened.len() > hard.k() {
        return Err(Error::Internal(format!("{} locations opened, budget {}", opened.len(), hard.k())));
    }
    // Read the assignment off the matching: clients of copy s go to its
    // F neighbours in index order.
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); ns];
    for (&(f, s), &m) in &mm.multiplicity {
        slots[s].extend(std::iter::repeat_n(f, m));
    }
    let mut used = vec![0usize; ns];
    let target: Vec<usize> = (0..nc)
        .map(|j| {
            let s = copy_of[j];
            used[s] += 1;
            slots[s][used[s] - 1]
        })
        .collect();
    let constructed = Assignment::from_targets(hard, target);
    let bound = base_cost + 2.0 * soft_cost;
    let opening = OpeningMultiset::from_locations(nf, &opened);
    if !constructed.is_feasible(hard, &opening) || !rel_le(constructed.cost, bound) {
        return Err(Error::Internal(format!(
            "constructed assignment costs {} against bound {bound}",
            constructed.cost
        )));
    }
    let assignment = min_cost_assignment(hard, &opening)?;
    let cost = assignment.cost;
    Ok(ReductionReport {
        opened,
        solution: IntegralSolution { opening, assignment, cost },
        base_cost,
        soft_cost,
        bound,
        concatenated_cost,
        after_cycles_cost,
        after_paths_cost,
        constructed_cost: constructed.cost,
        cycle_rounds,
        path_rounds,
        forest_after_cycles,
        max_partial_per_tree,
    })
}

impl MultiMatching {
    fn edge_count(&self) -> usize {
        self.multiplicity.len()
    }
}

fn split_lengths(edges: &[(usize, usize)], length: &dyn Fn(usize, usize) -> f64) -> (f64, f64) {
    let mut sums = (0.0, 0.0);
    for (t, &(f, s)) in edges.iter().enumerate() {
        if t % 2 == 0 {
            sums.0 += length(f, s);
        } else {
            sums.1 += length(f, s);
        }
    }
    sums
}

fn decreasing(edges: &[(usize, usize)], flip: bool) -> impl Iterator<Item = &(usize, usize)> {
    edges.iter().enumerate().filter(move |(t, _)| (t % 2 == 0) == flip).map(|(_, e)| e)
}

/// Base matching with every facility open.
pub fn base_assignment(hard: &Instance) -> Result<Assignment> {
    min_cost_assignment(hard, &OpeningMultiset::new(vec![1; hard.num_facilities()]))
}
