//! Problem instances: facilities, clients, a metric over their union, the
//! facility budget `k` and the uniform capacity `u`.

mod generators;
mod io;

pub use generators::{
    build_expander_fractional, build_groups_fractional, edge_expansion, edge_expansion_with, expander_gamma,
    gen_expander_gap, gen_gap_groups, gen_random_colocated, Expansion, MAX_EXPANSION_VERTICES,
};
pub use io::{read_instance, write_instance, InstanceFile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for [`validate_metric`].
pub const METRIC_TOL: f64 = 1e-9;

/// An undirected simple graph, used to describe the expander behind the
/// graph-metric gap family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDescription {
    pub vertex_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub regular3: bool,
}

impl GraphDescription {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::Shape(format!("edge ({a},{b}) outside 0..{vertex_count}")));
            }
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Parameter(format!("graph is not simple at edge ({a},{b})")));
            }
        }
        let g = GraphDescription { vertex_count, edges, regular3: false };
        let regular3 = vertex_count > 0 && g.degrees().iter().all(|&d| d == 3);
        Ok(GraphDescription { regular3, ..g })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// All-pairs hop distances by BFS; `None` entries mark disconnected pairs.
    pub fn hop_distances(&self) -> Vec<Vec<Option<usize>>> {
        let adj = self.neighbors();
        (0..self.vertex_count)
            .map(|s| {
                let mut dist = vec![None; self.vertex_count];
                dist[s] = Some(0);
                let mut queue = std::collections::VecDeque::from([s]);
                while let Some(v) = queue.pop_front() {
                    let dv = dist[v].unwrap();
                    for &w in &adj[v] {
                        if dist[w].is_none() {
                            dist[w] = Some(dv + 1);
                            queue.push_back(w);
                        }
                    }
                }
                dist
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count == 0 || self.hop_distances()[0].iter().all(Option::is_some)
    }
}

/// The first failure found by [`validate_metric`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricViolation {
    NonzeroDiagonal {
        i: usize,
    },
    Negative {
        i: usize,
        j: usize,
    },
    Asymmetric {
        i: usize,
        j: usize,
    },
    /// `d(i, l) > d(i, j) + d(j, l) + tol`.
    Triangle {
        i: usize,
        j: usize,
        l: usize,
    },
}

/// Checks symmetry, zero diagonal, nonnegativity and the triangle inequality.
///
/// Returns `Ok(None)` for a metric and `Ok(Some(_))` with the first violation
/// in lexicographic `(i, j, l)` order otherwise.
pub fn validate_metric(dist: &[Vec<f64>], tol: f64) -> Result<Option<MetricViolation>> {
    let n = dist.len();
    if let Some(row) = dist.iter().position(|r| r.len() != n) {
        return Err(Error::Shape(format!("row {row} has length {} in a {n}-row matrix", dist[row].len())));
    }
    let flat: Vec<f64> = dist.iter().flatten().copied().collect();
    Ok(validate_metric_flat(n, &flat, tol))
}

pub(crate) fn validate_metric_flat(n: usize, d: &[f64], tol: f64) -> Option<MetricViolation> {
    let at = |a: usize, b: usize| d[a * n + b];
    for i in 0..n {
        if at(i, i).abs() > tol {
            return Some(MetricViolation::NonzeroDiagonal { i });
        }
    }
    for i in 0..n {
        for j in 0..n {
            if at(i, j).is_nan() || at(i, j) < -tol {
                return Some(MetricViolation::Negative { i, j });
            }
            if (at(i, j) - at(j, i)).abs() > tol {
                return Some(MetricViolation::Asymmetric { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if at(i, l) > at(i, j) + at(j, l) + tol {
                    return Some(MetricViolation::Triangle { i, j, l });
                }
            }
        }
    }
    None
}

/// A uniform capacitated k-median instance.
///
/// Points are indexed facilities-first: facility `i` is point `i`, client `j`
/// is point `num_facilities + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    num_facilities: usize,
    num_clients: usize,
    k: usize,
    u: usize,
    colocated: bool,
    dist: Vec<f64>,
    graph: Option<GraphDescription>,
}

impl Instance {
    /// Builds and validates an instance. `colocated` asserts that facility
    /// `i` and client `i` are the same point for every `i`.
    pub fn new(
        num_facilities: usize,
        num_clients: usize,
        k: usize,
        u: usize,
        colocated: bool,
        dist: Vec<f64>,
    ) -> Result<Self> {
        let n = num_facilities + num_clients;
        if dist.len() != n * n {
            return Err(Error::Shape(format!(
                "distance matrix has {} entries, expected ({num_facilities}+{num_clients})^2 = {}",
                dist.len(),
                n * n
            )));
        }
        if num_facilities == 0 || num_clients == 0 {
            return Err(Error::Parameter("instance needs at least one facility and one client".into()));
        }
        if k == 0 || u == 0 {
            return Err(Error::Parameter(format!("k = {k} and u = {u} must both be at least 1")));
        }
        if k * u < num_clients {
            return Err(Error::Infeasible(format!("k*u = {} cannot serve {num_clients} clients", k * u)));
        }
        if let Some(v) = validate_metric_flat(n, &dist, METRIC_TOL) {
            return Err(Error::Parameter(format!("distances are not a metric: {v:?}")));
        }
        let inst = Instance { num_facilities, num_clients, k, u, colocated, dist, graph: None };
        if colocated {
            let ok = num_facilities == num_clients && (0..num_clients).all(|j| inst.fc(j, j) == 0.0);
            if !ok {
                return Err(Error::Schema("colocated flag set but facility i and client i do not coincide".into()));
            }
        }
        Ok(inst)
    }

    pub fn with_graph(mut self, graph: GraphDescription) -> Self {
        self.graph = Some(graph);
        self
    }

    pub fn num_facilities(&self) -> usize {
        self.num_facilities
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn num_points(&self) -> usize {
        self.num_facilities + self.num_clients
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn colocated(&self) -> bool {
        self.colocated
    }

    pub fn graph(&self) -> Option<&GraphDescription> {
        self.graph.as_ref()
    }

    /// Raw row-major matrix over all points.
    pub fn dist_matrix(&self) -> &[f64] {
        &self.dist
    }

    /// Distance between two points.
    #[inline]
    pub fn point_dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.num_points() + b]
    }

    /// Facility-to-client distance.
    #[inline]
    pub fn fc(&self, i: usize, j: usize) -> f64 {
        self.point_dist(i, self.num_facilities + j)
    }

    /// Client-to-client distance.
    #[inline]
    pub fn cc(&self, a: usize, b: usize) -> f64 {
        self.point_dist(self.num_facilities + a, self.num_facilities + b)
    }

    /// Facility-to-facility distance.
    #[inline]
    pub fn ff(&self, a: usize, b: usize) -> f64 {
        self.point_dist(a, b)
    }

    /// Same points and metric with a different budget.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Instance::new(self.num_facilities, self.num_clients, k, self.u, self.colocated, self.dist.clone())
            .map(|inst| Instance { graph: self.graph.clone(), ..inst })
    }

    /// The soft instance `(k, u, C, C, d)`: one facility location at every
    /// client point.
    pub fn soft_instance(&self) -> Self {
        let nc = self.num_clients;
        let n = 2 * nc;
        let mut dist = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                dist[a * n + b] = self.cc(a % nc, b % nc);
            }
        }
        Instance {
            num_facilities: nc,
            num_clients: nc,
            k: self.k,
            u: self.u,
            colocated: true,
            dist,
            graph: self.graph.clone(),
        }
    }

    /// Collapses facility locations whose distance rows coincide into one
    /// location. Returns the reduced instance and, for every kept location,
    /// the original facility index it stands for.
    pub fn merge_identical_facilities(&self) -> (Self, Vec<usize>) {
        let nf = self.num_facilities;
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..nf {
            let dup =
                kept.iter().any(|&o| (0..self.num_points()).all(|p| self.point_dist(i, p) == self.point_dist(o, p)));
            if !dup {
                kept.push(i);
            }
        }
        let nc = self.num_clients;
        let points: Vec<usize> = kept.iter().copied().chain((0..nc).map(|j| nf + j)).collect();
        let n = points.len();
        let mut dist = vec![0.0; n * n];
        for (a, &pa) in points.iter().enumerate() {
            for (b, &pb) in points.iter().enumerate() {
                dist[a * n + b] = self.point_dist(pa, pb);
            }
        }
        let colocated = self.colocated && kept.len() == nf;
        let inst = Instance {
            num_facilities: kept.len(),
            num_clients: nc,
            k: self.k,
            u: self.u,
            colocated,
            dist,
            graph: self.graph.clone(),
        };
        (inst, kept)
    }
}
