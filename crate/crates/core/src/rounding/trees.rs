//! Neighborhood trees over the representatives, edge ranks and level sets.
//!
//! Trees are built by repeatedly hanging a tree with fewer than `ell`
//! vertices from its root `r` onto the nearest representative outside it.
//! A tree that ends up with more than `ell^2` vertices is split along hang
//! events that were made directly into its final root's tree: removing such
//! a subtree never shrinks the subtree a vertex had when it was itself hung,
//! so every remaining vertex keeps its nearest-outside parent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub child: usize,
    pub parent: usize,
    pub length: f64,
    /// 1-based rank; 0 until [`rank_and_levels`] runs.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodTree {
    pub root: usize,
    /// Sorted vertex (client) indices, root included.
    pub vertices: Vec<usize>,
    /// Parent of every non-root vertex.
    pub parent: BTreeMap<usize, usize>,
    /// Edges sorted by `(length, min endpoint, max endpoint)` once ranked.
    pub edges: Vec<TreeEdge>,
    /// `levels[i]`: components of the rank-`<= i` edges, sorted.
    pub levels: Vec<Vec<Vec<usize>>>,
}

impl NeighborhoodTree {
    fn from_parent(root: usize, parent: BTreeMap<usize, usize>, inst: &Instance) -> Self {
        let mut vertices: Vec<usize> = parent.keys().copied().chain(std::iter::once(root)).collect();
        vertices.sort_unstable();
        let edges =
            parent.iter().map(|(&c, &p)| TreeEdge { child: c, parent: p, length: inst.cc(c, p), rank: 0 }).collect();
        NeighborhoodTree { root, vertices, parent, edges, levels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Number of ranks `h`.
    pub fn height(&self) -> usize {
        self.edges.iter().map(|e| e.rank).max().unwrap_or(0)
    }

    /// `Λ(v)`: `v` and its descendants.
    pub fn subtree(&self, v: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::from([v]);
        loop {
            let before = out.len();
            for (&c, &p) in &self.parent {
                if out.contains(&p) {
                    out.insert(c);
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct HangEvent {
    child: usize,
    target: usize,
    /// Vertices of the hung tree at the time of hanging.
    snapshot: Vec<usize>,
}

struct Growing {
    root: usize,
    parent: BTreeMap<usize, usize>,
    /// Hang events made directly into this tree while it was rooted at `root`.
    direct: Vec<HangEvent>,
}

fn argmin_outside(inst: &Instance, from: usize, reps: &[usize], inside: &BTreeSet<usize>) -> usize {
    *reps
        .iter()
        .filter(|w| !inside.contains(w))
        .min_by(|&&a, &&b| inst.cc(from, a).total_cmp(&inst.cc(from, b)).then(a.cmp(&b)))
        .expect("a representative outside the tree")
}

/// Builds trees covering `reps` (client indices, `|reps| >= ell`) with
/// `ell <= |V| <= ell^2` vertices each.
pub fn build_neighborhood_trees(inst: &Instance, reps: &[usize], ell: usize) -> Result<Vec<NeighborhoodTree>> {
    let mut reps = reps.to_vec();
    reps.sort_unstable();
    if reps.len() < ell {
        return Err(Error::Precondition(format!("{} representatives, need at least ell = {ell}", reps.len())));
    }
    // members[t], keyed by current root
    let mut members: BTreeMap<usize, Vec<usize>> = reps.iter().map(|&v| (v, vec![v])).collect();
    let mut tree_of: BTreeMap<usize, usize> = reps.iter().map(|&v| (v, v)).collect();
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut events: Vec<(usize, HangEvent)> = Vec::new(); // (receiving root, event)
    while let Some((&r, _)) = members.iter().find(|(_, m)| m.len() < ell) {
        let hung = members.remove(&r).expect("tree");
        let inside: BTreeSet<usize> = hung.iter().copied().collect();
        let target = argmin_outside(inst, r, &reps, &inside);
        let recv = tree_of[&target];
        parent.insert(r, target);
        for &w in &hung {
            tree_of.insert(w, recv);
        }
        events.push((recv, HangEvent { child: r, target, snapshot: hung.clone() }));
        members.get_mut(&recv).expect("receiving tree").extend(hung);
    }
    let mut trees = Vec::new();
    for (&root, verts) in &members {
        let set: BTreeSet<usize> = verts.iter().copied().collect();
        let tree_parent: BTreeMap<usize, usize> =
            parent.iter().filter(|(c, _)| set.contains(c)).map(|(&c, &p)| (c, p)).collect();
        let direct = events.iter().filter(|(recv, _)| *recv == root).map(|(_, e)| e.clone()).collect();
        let mut g = Growing { root, parent: tree_parent, direct };
        while g.parent.len() + 1 > ell * ell {
            let piece = split_once(&mut g, ell)?;
            trees.push(NeighborhoodTree::from_parent(piece.0, piece.1, inst));
        }
        trees.push(NeighborhoodTree::from_parent(g.root, g.parent, inst));
    }
    trees.sort_by_key(|t| (t.root, t.vertices.clone()));
    verify_forest(inst, &reps, &trees, ell)?;
    Ok(trees)
}

fn subtree_sizes(root: usize, parent: &BTreeMap<usize, usize>) -> BTreeMap<usize, usize> {
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&c, &p) in parent {
        children.entry(p).or_default().push(c);
    }
    let mut order = vec![root];
    let mut idx = 0;
    while idx < order.len() {
        if let Some(ch) = children.get(&order[idx]) {
            order.extend(ch.iter().copied());
        }
        idx += 1;
    }
    let mut size: BTreeMap<usize, usize> = order.iter().map(|&v| (v, 1)).collect();
    for &v in order.iter().rev() {
        if let Some(&p) = parent.get(&v) {
            let s = size[&v];
            *size.get_mut(&p).expect("parent") += s;
        }
    }
    size
}

fn detach(g: &mut Growing, roots: &[usize]) -> BTreeMap<usize, usize> {
    let mut moved = BTreeSet::new();
    for &r in roots {
        let tree = NeighborhoodTree {
            root: g.root,
            vertices: Vec::new(),
            parent: g.parent.clone(),
            edges: Vec::new(),
            levels: Vec::new(),
        };
        moved.extend(tree.subtree(r));
    }
    let piece: BTreeMap<usize, usize> =
        g.parent.iter().filter(|(c, _)| moved.contains(c)).map(|(&c, &p)| (c, p)).collect();
    g.parent.retain(|c, _| !moved.contains(c));
    g.direct.retain(|e| !moved.contains(&e.child));
    piece
}

/// Cuts one piece with between `ell` and `ell^2` vertices off `g`, leaving
/// at least `ell` behind. Returns `(piece root, piece parent map)`.
fn split_once(g: &mut Growing, ell: usize) -> Result<(usize, BTreeMap<usize, usize>)> {
    let size = subtree_sizes(g.root, &g.parent);
    let big = ell * (ell - 1);
    let mut treelet: Vec<usize> = vec![g.root];
    loop {
        let next =
            g.direct.iter().filter(|e| treelet.contains(&e.target) && size[&e.child] > big).min_by_key(|e| e.child);
        match next {
            Some(e) => treelet = e.snapshot.clone(),
            None => break,
        }
    }
    let at_treelet: Vec<&HangEvent> = {
        let mut v: Vec<&HangEvent> = g.direct.iter().filter(|e| treelet.contains(&e.target)).collect();
        v.sort_by_key(|e| e.child);
        v
    };
    if let Some(e) = at_treelet.iter().find(|e| size[&e.child] >= ell) {
        let root = e.child;
        let mut piece = detach(g, &[root]);
        piece.remove(&root);
        return Ok((root, piece));
    }
    let mut anchors = treelet.clone();
    anchors.sort_unstable();
    for v in anchors {
        let hanging: Vec<usize> = at_treelet.iter().filter(|e| e.target == v).map(|e| e.child).collect();
        let weight: usize = hanging.iter().map(|c| size[c]).sum();
        if weight < ell {
            continue;
        }
        let mut chosen = Vec::new();
        let mut acc = 0;
        for c in hanging {
            if acc >= ell - 1 {
                break;
            }
            acc += size[&c];
            chosen.push(c);
        }
        let piece = detach(g, &chosen);
        return Ok((v, piece));
    }
    Err(Error::Internal("no admissible split of an oversized neighborhood tree".into()))
}

/// Checks covering, disjoint non-root sets, size bounds and the
/// nearest-outside-parent property of every non-root vertex.
pub fn verify_forest(inst: &Instance, reps: &[usize], trees: &[NeighborhoodTree], ell: usize) -> Result<()> {
    let mut covered = BTreeSet::new();
    let mut non_roots = BTreeSet::new();
    for t in trees {
        if t.len() < ell || t.len() > ell * ell {
            return Err(Error::Internal(format!("tree of size {} outside [{ell}, {}]", t.len(), ell * ell)));
        }
        covered.extend(t.vertices.iter().copied());
        for &c in t.parent.keys() {
            if !non_roots.insert(c) {
                return Err(Error::Internal(format!("vertex {c} is a non-root in two trees")));
            }
        }
        verify_tree(inst, reps, t)?;
    }
    if covered.len() != reps.len() || !reps.iter().all(|v| covered.contains(v)) {
        return Err(Error::Internal("trees do not cover the representatives".into()));
    }
    Ok(())
}

/// `d(v, C* \ Λ(v)) = d(v, parent(v))` for every non-root `v`.
pub fn verify_tree(inst: &Instance, reps: &[usize], t: &NeighborhoodTree) -> Result<()> {
    for (&v, &p) in &t.parent {
        let sub = t.subtree(v);
        if sub.contains(&p) {
            return Err(Error::Internal(format!("parent cycle at {v}")));
        }
        let nearest = reps.iter().filter(|w| !sub.contains(w)).map(|&w| inst.cc(v, w)).fold(f64::INFINITY, f64::min);
        if inst.cc(v, p) > nearest + 1e-9 * (1.0 + nearest) {
            return Err(Error::Internal(format!(
                "vertex {v}: parent at {} but nearest outside vertex at {nearest}",
                inst.cc(v, p)
            )));
        }
    }
    Ok(())
}

/// Minimum spanning tree over `reps` (Prim from the lowest index, which is
/// also the root). Any MST is a neighborhood tree.
pub fn mst_tree(inst: &Instance, reps: &[usize]) -> NeighborhoodTree {
    let mut reps = reps.to_vec();
    reps.sort_unstable();
    let root = reps[0];
    let mut in_tree = BTreeSet::from([root]);
    let mut parent = BTreeMap::new();
    while in_tree.len() < reps.len() {
        let mut best: Option<(f64, usize, usize)> = None;
        for &w in reps.iter().filter(|w| !in_tree.contains(w)) {
            for &t in &in_tree {
                let d = inst.cc(w, t);
                if best.is_none_or(|(bd, bw, bt)| (d, w, t) < (bd, bw, bt)) {
                    best = Some((d, w, t));
                }
            }
        }
        let (_, w, t) = best.expect("vertex outside");
        parent.insert(w, t);
        in_tree.insert(w);
    }
    NeighborhoodTree::from_parent(root, parent, inst)
}

/// Sorts the edges, assigns doubling ranks and computes the level sets.
pub fn rank_and_levels(tree: &mut NeighborhoodTree) {
    tree.edges.sort_by(|a, b| {
        let ka = (a.child.min(a.parent), a.child.max(a.parent));
        let kb = (b.child.min(b.parent), b.child.max(b.parent));
        a.length.total_cmp(&b.length).then(ka.cmp(&kb))
    });
    let mut prefix = 0.0;
    let mut rank = 0;
    for (t, e) in tree.edges.iter_mut().enumerate() {
        if t == 0 || e.length > 2.0 * prefix {
            rank += 1;
        }
        e.rank = rank;
        prefix += e.length;
    }
    let pos: BTreeMap<usize, usize> = tree.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = tree.vertices.len();
    tree.levels = (0..=rank)
        .map(|i| {
            let mut uf: Vec<usize> = (0..n).collect();
            fn find(uf: &mut [usize], a: usize) -> usize {
                let mut a = a;
                while uf[a] != a {
                    uf[a] = uf[uf[a]];
                    a = uf[a];
                }
                a
            }
            for e in tree.edges.iter().filter(|e| e.rank <= i) {
                let (a, b) = (find(&mut uf, pos[&e.child]), find(&mut uf, pos[&e.parent]));
                uf[a.max(b)] = a.min(b);
            }
            let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for k in 0..n {
                let r = find(&mut uf, k);
                comps.entry(r).or_default().push(tree.vertices[k]);
            }
            comps.into_values().collect()
        })
        .collect();
}
