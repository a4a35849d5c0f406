use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphDescription, Instance};
use crate::error::{Error, Result};
use crate::lpcore::FractionalSolution;
use crate::par::{self, Exec};

/// Largest graph accepted by [`edge_expansion`] (subset enumeration).
pub const MAX_EXPANSION_VERTICES: usize = 24;

const PAIRING_ATTEMPTS: usize = 10_000;

/// `u` groups of `u + 1` co-located points; distance 0 inside a group and 1
/// across groups. `k = u + 1`, facilities and clients coincide.
pub fn gen_gap_groups(u: usize) -> Result<Instance> {
    if u == 0 {
        return Err(Error::Parameter("u must be at least 1".into()));
    }
    let n = u * (u + 1);
    let group = |p: usize| (p % n) / (u + 1);
    let m = 2 * n;
    let mut dist = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            dist[a * m + b] = if group(a) == group(b) { 0.0 } else { 1.0 };
        }
    }
    Instance::new(n, n, u + 1, u, true, dist)
}

/// Random 3-regular simple connected graph on `n` vertices by the pairing
/// model, rejecting loops, multi-edges and disconnected outcomes.
fn random_cubic_graph(n: usize, rng: &mut ChaCha8Rng) -> Result<GraphDescription> {
    let mut stubs: Vec<usize> = (0..3 * n).map(|s| s / 3).collect();
    for _ in 0..PAIRING_ATTEMPTS {
        stubs.shuffle(rng);
        let mut edges: Vec<(usize, usize)> = stubs.chunks(2).map(|p| (p[0].min(p[1]), p[0].max(p[1]))).collect();
        if edges.iter().any(|&(a, b)| a == b) {
            continue;
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let g = GraphDescription::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Internal(format!("pairing model failed {PAIRING_ATTEMPTS} times for n = {n}")))
}

/// Graph-metric gap family: a random 3-regular graph on `u` vertices, one
/// facility per vertex, `u + 1` clients per vertex, `k = u + 1`, capacity `u`.
pub fn gen_expander_gap(u: usize, seed: u64) -> Result<(Instance, GraphDescription)> {
    if u < 4 || u % 2 == 1 {
        return Err(Error::Parameter(format!("a 3-regular simple graph needs an even vertex count >= 4, got u = {u}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_cubic_graph(u, &mut rng)?;
    let hops = graph.hop_distances();
    let nc = u * (u + 1);
    let vertex_of = |p: usize| if p < u { p } else { (p - u) / (u + 1) };
    let m = u + nc;
    let mut dist = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            dist[a * m + b] = hops[vertex_of(a)][vertex_of(b)].expect("connected graph") as f64;
        }
    }
    let inst = Instance::new(u, nc, u + 1, u, false, dist)?.with_graph(graph.clone());
    Ok((inst, graph))
}

/// Exact edge expansion as the minimising ratio `cut / size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expansion {
    pub cut: usize,
    pub size: usize,
}

impl Expansion {
    pub fn value(self) -> f64 {
        self.cut as f64 / self.size as f64
    }

    fn less_than(self, other: Expansion) -> bool {
        self.cut * other.size < other.cut * self.size
    }
}

/// `min |E(B, V \ B)| / |B|` over nonempty `B` with `|B| <= n/2`, by
/// enumerating every subset.
pub fn edge_expansion(g: &GraphDescription) -> Result<f64> {
    edge_expansion_with(g, Exec::default()).map(Expansion::value)
}

pub fn edge_expansion_with(g: &GraphDescription, exec: Exec) -> Result<Expansion> {
    let n = g.vertex_count;
    if n > MAX_EXPANSION_VERTICES {
        return Err(Error::Size(format!(
            "edge expansion enumerates 2^{n} subsets; limit is {MAX_EXPANSION_VERTICES} vertices"
        )));
    }
    if n < 2 {
        return Err(Error::Parameter("edge expansion needs at least 2 vertices".into()));
    }
    let adj: Vec<u32> = g.neighbors().iter().map(|ns| ns.iter().fold(0u32, |m, &w| m | (1 << w))).collect();
    let half = n / 2;
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let chunk_best = par::map_chunks(exec, 1..(1u64 << n), 1 << 14, |range| {
        let mut best: Option<Expansion> = None;
        for mask in range {
            let mask = mask as u32;
            let size = mask.count_ones() as usize;
            if size > half {
                continue;
            }
            let outside = full & !mask;
            let mut cut = 0usize;
            let mut rest = mask;
            while rest != 0 {
                let v = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                cut += (adj[v] & outside).count_ones() as usize;
            }
            let cand = Expansion { cut, size };
            if best.is_none_or(|b| cand.less_than(b)) {
                best = Some(cand);
            }
        }
        best
    });
    chunk_best
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.less_than(a) { b } else { a })
        .ok_or_else(|| Error::Internal("no subset enumerated".into()))
}

/// Default `gamma = 1 / chi` for the expander fractional solution.
pub fn expander_gamma(g: &GraphDescription) -> Result<f64> {
    let chi = edge_expansion(g)?;
    if chi <= 0.0 {
        return Err(Error::Parameter("graph is disconnected (expansion 0)".into()));
    }
    Ok(1.0 / chi)
}

/// Fractional solution on the graph-metric family: `y_i = 1 + 1/u`, each
/// client keeps `1 - 3 gamma / u` at its own vertex and sends `gamma / u` to
/// each of the three neighbours.
pub fn build_expander_fractional(inst: &Instance, g: &GraphDescription, gamma: f64) -> Result<FractionalSolution> {
    let u = inst.u();
    let nf = inst.num_facilities();
    if nf != g.vertex_count || inst.num_clients() != u * (u + 1) || nf != u || !g.regular3 {
        return Err(Error::Parameter("instance does not come from the 3-regular graph-metric family".into()));
    }
    let chi = edge_expansion(g)?;
    let uf = u as f64;
    if chi <= 0.0 || gamma * chi < 1.0 - 1e-12 {
        return Err(Error::Parameter(format!("gamma = {gamma} is below 1/chi (chi = {chi})")));
    }
    if 3.0 * gamma / uf > 1.0 + 1e-12 {
        return Err(Error::Parameter(format!("3*gamma/u = {} exceeds 1", 3.0 * gamma / uf)));
    }
    let adj = g.neighbors();
    let nc = inst.num_clients();
    let mut x = vec![0.0; nf * nc];
    for j in 0..nc {
        let home = j / (u + 1);
        x[home * nc + j] = (1.0 - 3.0 * gamma / uf).max(0.0);
        for &w in &adj[home] {
            x[w * nc + j] = gamma / uf;
        }
    }
    let y = vec![1.0 + 1.0 / uf; nf];
    Ok(FractionalSolution::new(inst, x, y))
}

/// The cost-0 Basic-LP solution on [`gen_gap_groups`]: `y_i = 1/u` and each
/// client spread evenly over the `u + 1` points of its group.
pub fn build_groups_fractional(u: usize) -> Result<(Instance, FractionalSolution)> {
    let inst = gen_gap_groups(u)?;
    let n = inst.num_facilities();
    let g = u + 1;
    let mut x = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i / g == j / g {
                x[i * n + j] = 1.0 / g as f64;
            }
        }
    }
    let y = vec![1.0 / u as f64; n];
    let sol = FractionalSolution::new(&inst, x, y);
    Ok((inst, sol))
}

/// Random co-located instance on small integer grid points under the L1
/// metric (exact arithmetic). Used by property and acceptance suites.
pub fn gen_random_colocated(n: usize, u: usize, k: usize, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(Error::Parameter("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(i64, i64)> = (0..n).map(|_| (rng.gen_range(0..8), rng.gen_range(0..8))).collect();
    let m = 2 * n;
    let mut dist = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            let (pa, pb) = (pts[a % n], pts[b % n]);
            dist[a * m + b] = ((pa.0 - pb.0).abs() + (pa.1 - pb.1).abs()) as f64;
        }
    }
    Instance::new(n, n, k, u, true, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_metric_flat;

    fn cycle(n: usize) -> GraphDescription {
        GraphDescription::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).unwrap()
    }

    #[test]
    fn gap_groups_shapes() {
        let g2 = gen_gap_groups(2).unwrap();
        assert_eq!((g2.k(), g2.num_facilities(), g2.num_clients()), (3, 6, 6));
        assert!(g2.colocated());
        let g1 = gen_gap_groups(1).unwrap();
        assert_eq!(g1.k(), 2);
        assert!(g1.dist_matrix().iter().all(|&d| d == 0.0));
        let g3 = gen_gap_groups(3).unwrap();
        assert_eq!((g3.k(), g3.num_clients()), (4, 12));
        assert_eq!(g3.cc(0, 3), 0.0);
        assert_eq!(g3.cc(0, 4), 1.0);
    }

    #[test]
    fn gap_groups_zero_pairs() {
        for u in 1..5 {
            let inst = gen_gap_groups(u).unwrap();
            let n = inst.num_clients();
            let zeros =
                (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| inst.cc(a, b) == 0.0).count();
            assert_eq!(zeros, u * (u + 1) * u / 2);
        }
    }

    #[test]
    fn expander_k4() {
        let (inst, g) = gen_expander_gap(4, 0).unwrap();
        assert_eq!(g.edges.len(), 6);
        assert_eq!((inst.num_clients(), inst.k()), (20, 5));
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(inst.ff(a, b), if a == b { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn expander_parameter_errors() {
        assert!(matches!(gen_expander_gap(3, 0), Err(Error::Parameter(_))));
        assert!(matches!(gen_expander_gap(2, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn expander_u8_is_connected_metric() {
        let (inst, g) = gen_expander_gap(8, 11).unwrap();
        assert!(g.regular3 && g.is_connected());
        assert_eq!(validate_metric_flat(inst.num_points(), inst.dist_matrix(), 0.0), None);
    }

    #[test]
    fn expansion_examples() {
        let k4 = GraphDescription::new(4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(edge_expansion(&k4).unwrap(), 2.0);
        assert!((edge_expansion(&cycle(6)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let two_triangles = GraphDescription::new(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert_eq!(edge_expansion(&two_triangles).unwrap(), 0.0);
        let big = cycle(25);
        assert!(matches!(edge_expansion(&big), Err(Error::Size(_))));
    }

    #[test]
    fn expansion_sequential_matches_parallel() {
        let (_, g) = gen_expander_gap(16, 5).unwrap();
        assert_eq!(
            edge_expansion_with(&g, Exec::Sequential).unwrap(),
            edge_expansion_with(&g, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn expander_fractional_k4() {
        let (inst, g) = gen_expander_gap(4, 0).unwrap();
        let sol = build_expander_fractional(&inst, &g, 0.5).unwrap();
        assert!((sol.objective - 7.5).abs() < 1e-12);
        for j in 0..inst.num_clients() {
            let cost: f64 = (0..4).map(|i| sol.x(i, j) * inst.fc(i, j)).sum();
            assert!((cost - 0.375).abs() < 1e-12);
        }
        assert!((sol.y.iter().sum::<f64>() - 5.0).abs() < 1e-12);
        assert!(sol.check_basic(&inst, 1e-9).is_ok());
        assert!(matches!(build_expander_fractional(&inst, &g, 0.4), Err(Error::Parameter(_))));
    }

    #[test]
    fn expander_fractional_boundary_gamma() {
        // chi(K4) = 2, so gamma = 4/3 gives 3*gamma/u = 1.
        let (inst, g) = gen_expander_gap(4, 0).unwrap();
        let sol = build_expander_fractional(&inst, &g, 4.0 / 3.0).unwrap();
        for j in 0..inst.num_clients() {
            assert_eq!(sol.x(j / 5, j), 0.0);
            let row: f64 = (0..4).map(|i| sol.x(i, j)).sum();
            assert!((row - 1.0).abs() < 1e-12);
        }
    }
}
