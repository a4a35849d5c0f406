//! Optimal capacitated client assignment as a min-cost transportation
//! problem, solved by successive shortest paths with vertex potentials.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;

/// Number of copies opened at each facility location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningMultiset {
    pub counts: Vec<usize>,
}

impl OpeningMultiset {
    pub fn new(counts: Vec<usize>) -> Self {
        OpeningMultiset { counts }
    }

    /// One copy per listed location (repeats add copies).
    pub fn from_locations(num_facilities: usize, locations: &[usize]) -> Self {
        let mut counts = vec![0; num_facilities];
        for &i in locations {
            counts[i] += 1;
        }
        OpeningMultiset { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn open_locations(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&i| self.counts[i] > 0).collect()
    }
}

/// Client `j` is served by facility location `target[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub target: Vec<usize>,
    pub cost: f64,
}

impl Assignment {
    pub fn from_targets(inst: &Instance, target: Vec<usize>) -> Self {
        let cost = target.iter().enumerate().map(|(j, &i)| inst.fc(i, j)).sum();
        Assignment { target, cost }
    }

    pub fn loads(&self, num_facilities: usize) -> Vec<usize> {
        let mut loads = vec![0; num_facilities];
        for &i in &self.target {
            loads[i] += 1;
        }
        loads
    }

    /// Every client assigned to an open location within `u` per copy.
    pub fn is_feasible(&self, inst: &Instance, open: &OpeningMultiset) -> bool {
        self.target.len() == inst.num_clients()
            && self.target.iter().all(|&i| i < open.counts.len())
            && self.loads(open.counts.len()).iter().zip(&open.counts).all(|(&l, &c)| l <= c * inst.u())
    }
}

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: usize,
    cost: f64,
}

/// Small dense-Dijkstra min-cost flow network.
struct Network {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    potential: Vec<f64>,
}

impl Network {
    fn new(n: usize) -> Self {
        Network { adj: vec![Vec::new(); n], edges: Vec::new(), potential: vec![0.0; n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: usize, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    fn reduced(&self, from: usize, e: &Edge) -> f64 {
        e.cost + self.potential[from] - self.potential[e.to]
    }

    /// Shortest paths from `s` under reduced costs. Ties keep the first
    /// label found, and equal-distance nodes are settled in index order.
    fn dijkstra(&self, s: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut via: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        dist[s] = 0.0;
        loop {
            let mut best: Option<usize> = None;
            for v in 0..n {
                if !done[v] && dist[v].is_finite() && best.is_none_or(|b| dist[v] < dist[b]) {
                    best = Some(v);
                }
            }
            let Some(v) = best else { break };
            done[v] = true;
            for &id in &self.adj[v] {
                let e = &self.edges[id];
                if e.cap == 0 || done[e.to] {
                    continue;
                }
                let nd = dist[v] + self.reduced(v, e).max(0.0);
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    via[e.to] = Some(id);
                }
            }
        }
        (dist, via)
    }

    fn tail(&self, id: usize) -> usize {
        self.edges[id ^ 1].to
    }

    /// Pushes up to `demand` units from `s` to `t`; returns the amount sent.
    fn run(&mut self, s: usize, t: usize, demand: usize) -> usize {
        let mut sent = 0;
        while sent < demand {
            let (dist, via) = self.dijkstra(s);
            if !dist[t].is_finite() {
                break;
            }
            let reach_max = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
            for (p, d) in self.potential.iter_mut().zip(&dist) {
                *p += if d.is_finite() { *d } else { reach_max };
            }
            let mut push = demand - sent;
            let mut v = t;
            while v != s {
                let id = via[v].expect("path edge");
                push = push.min(self.edges[id].cap);
                v = self.tail(id);
            }
            let mut v = t;
            while v != s {
                let id = via[v].expect("path edge");
                self.edges[id].cap -= push;
                self.edges[id ^ 1].cap += push;
                v = self.tail(id);
            }
            sent += push;
        }
        sent
    }

    /// Largest negative reduced cost over residual edges (0 if none).
    fn worst_reduced_cost(&self) -> f64 {
        let mut worst = 0.0f64;
        for v in 0..self.adj.len() {
            for &id in &self.adj[v] {
                let e = &self.edges[id];
                if e.cap > 0 {
                    worst = worst.min(self.reduced(v, e));
                }
            }
        }
        worst
    }
}

/// Cost-optimal assignment of all clients to the open copies, at most `u`
/// clients per copy.
pub fn min_cost_assignment(inst: &Instance, open: &OpeningMultiset) -> Result<Assignment> {
    let (nf, nc, u) = (inst.num_facilities(), inst.num_clients(), inst.u());
    if open.counts.len() != nf {
        return Err(Error::Shape(format!("opening lists {} locations, instance has {nf}", open.counts.len())));
    }
    let capacity = open.total() * u;
    if capacity < nc {
        return Err(Error::Infeasible(format!(
            "{} open copies with capacity {u} cannot serve {nc} clients",
            open.total()
        )));
    }
    let locs = open.open_locations();
    // Clients with identical distance rows over the open locations are
    // interchangeable; route them as one supply node.
    let mut group_of: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..nc {
        let key: Vec<u64> = locs.iter().map(|&i| inst.fc(i, j).to_bits()).collect();
        let g = *group_of.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(j);
    }
    let (ng, nl) = (groups.len(), locs.len());
    let s = ng + nl;
    let t = s + 1;
    let mut net = Network::new(ng + nl + 2);
    for (g, members) in groups.iter().enumerate() {
        net.add_edge(s, g, members.len(), 0.0);
    }
    let mut pair_edge = vec![0usize; ng * nl];
    for (g, members) in groups.iter().enumerate() {
        for (l, &i) in locs.iter().enumerate() {
            pair_edge[g * nl + l] = net.add_edge(g, ng + l, members.len(), inst.fc(i, members[0]));
        }
    }
    for (l, &i) in locs.iter().enumerate() {
        net.add_edge(ng + l, t, open.counts[i] * u, 0.0);
    }
    let sent = net.run(s, t, nc);
    if sent != nc {
        return Err(Error::Internal(format!("flow routed {sent} of {nc} clients")));
    }
    let scale = 1.0 + inst.dist_matrix().iter().fold(0.0f64, |a, &d| a.max(d));
    let worst = net.worst_reduced_cost();
    if worst < -1e-9 * scale {
        return Err(Error::Internal(format!("flow optimality certificate failed ({worst:.3e})")));
    }
    let mut target = vec![usize::MAX; nc];
    for (g, members) in groups.iter().enumerate() {
        let mut it = members.iter();
        for (l, &i) in locs.iter().enumerate() {
            let flow = net.edges[pair_edge[g * nl + l] ^ 1].cap;
            for _ in 0..flow {
                target[*it.next().expect("flow within group size")] = i;
            }
        }
    }
    Ok(Assignment::from_targets(inst, target))
}
