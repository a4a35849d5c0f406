//! Rectangle constraints `x_{B,J} <= f(|J|, y_B)` and their separation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpcore::{FractionalSolution, LinearConstraint};
use crate::par::{self, Exec};

/// Default violation tolerance for rectangle checks.
pub const RECT_TOL: f64 = 1e-7;
/// Largest facility count accepted by the exhaustive checkers.
pub const MAX_BRUTEFORCE_FACILITIES: usize = 20;

const INT_SNAP: f64 = 1e-9;

/// `f(p, q)`: the most clients `q` (fractionally opened) facilities can
/// serve among `p` clients, interpolated linearly between integer `q`.
pub fn f_value(p: usize, q: f64, u: usize) -> f64 {
    let (m, r) = (p / u, p % u);
    let (uf, pf) = (u as f64, p as f64);
    if q <= m as f64 {
        q * uf
    } else if q >= p.div_ceil(u) as f64 {
        pf
    } else {
        uf * m as f64 + r as f64 * (q - m as f64)
    }
}

/// One of the three linear pieces whose minimum is `f(p, .)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    /// `x_{B,J} <= p`
    CapP,
    /// `x_{B,J} <= u y_B`
    CapUq,
    /// `x_{B,J} <= u m + r (y_B - m)` with `m = p div u`, `r = p mod u`
    Interpolation,
}

impl Piece {
    pub const ALL: [Piece; 3] = [Piece::CapP, Piece::CapUq, Piece::Interpolation];

    pub fn value(self, p: usize, q: f64, u: usize) -> f64 {
        let (m, r) = ((p / u) as f64, (p % u) as f64);
        match self {
            Piece::CapP => p as f64,
            Piece::CapUq => u as f64 * q,
            Piece::Interpolation => u as f64 * m + r * (q - m),
        }
    }
}

/// A violated rectangle: facility set `B`, its top-`p` clients `J`, and the
/// linear piece of `f` that is violated the most.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleCut {
    pub num_facilities: usize,
    pub num_clients: usize,
    pub facilities: Vec<usize>,
    pub clients: Vec<usize>,
    pub p: usize,
    pub piece: Piece,
    /// `x_{B,J}` at the separated solution.
    pub lhs: f64,
    /// Value of the chosen piece at `y_B`.
    pub bound: f64,
}

impl RectangleCut {
    pub fn violation(&self) -> f64 {
        self.lhs - self.bound
    }

    /// The linear row over `(x, y)` variables in Basic-LP order.
    pub fn to_linear(&self, u: usize) -> LinearConstraint {
        let nc = self.num_clients;
        let y0 = self.num_facilities * nc;
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for &i in &self.facilities {
            for &j in &self.clients {
                terms.push((i * nc + j, 1.0));
            }
        }
        let (m, r) = ((self.p / u) as f64, (self.p % u) as f64);
        let rhs = match self.piece {
            Piece::CapP => self.p as f64,
            Piece::CapUq => {
                terms.extend(self.facilities.iter().map(|&i| (y0 + i, -(u as f64))));
                0.0
            }
            Piece::Interpolation => {
                if r != 0.0 {
                    terms.extend(self.facilities.iter().map(|&i| (y0 + i, -r)));
                }
                u as f64 * m - r * m
            }
        };
        LinearConstraint::le(terms, rhs)
    }
}

/// Free-function form of [`RectangleCut::to_linear`].
pub fn cut_to_linear(cut: &RectangleCut, u: usize) -> LinearConstraint {
    cut.to_linear(u)
}

/// `x_{B,j}` for every client.
pub fn client_mass(sol: &FractionalSolution, b: &[usize]) -> Vec<f64> {
    let mut xb = vec![0.0; sol.num_clients];
    for &i in b {
        for (j, v) in xb.iter_mut().enumerate() {
            *v += sol.x(i, j);
        }
    }
    xb
}

/// Checks every prefix `p` of the clients sorted by `x_{B,j}` against
/// `f(p, y_B)`. Returns the cut for the most violated `p` (ties: smallest
/// `p`) with the most violated piece, or `None` if all hold within `tol`.
pub fn check_rectangle(sol: &FractionalSolution, b: &[usize], u: usize, tol: f64) -> Option<RectangleCut> {
    if b.is_empty() {
        return None;
    }
    let xb = client_mass(sol, b);
    let yb: f64 = b.iter().map(|&i| sol.y[i]).sum();
    let mut order: Vec<usize> = (0..sol.num_clients).collect();
    order.sort_by(|&a, &c| xb[c].total_cmp(&xb[a]).then(a.cmp(&c)));
    let mut best: Option<(usize, f64, f64)> = None;
    let mut prefix = 0.0;
    for (idx, &j) in order.iter().enumerate() {
        prefix += xb[j];
        let p = idx + 1;
        let excess = prefix - f_value(p, yb, u);
        if excess > tol && best.is_none_or(|(_, e, _)| excess > e) {
            best = Some((p, excess, prefix));
        }
    }
    let (p, _, lhs) = best?;
    let piece =
        Piece::ALL.into_iter().min_by(|a, c| a.value(p, yb, u).total_cmp(&c.value(p, yb, u))).expect("three pieces");
    let mut facilities = b.to_vec();
    facilities.sort_unstable();
    let mut clients = order[..p].to_vec();
    clients.sort_unstable();
    Some(RectangleCut {
        num_facilities: sol.num_facilities,
        num_clients: sol.num_clients,
        facilities,
        clients,
        p,
        piece,
        lhs,
        bound: piece.value(p, yb, u),
    })
}

fn mask_members(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

fn check_size(sol: &FractionalSolution) -> Result<()> {
    if sol.num_facilities > MAX_BRUTEFORCE_FACILITIES {
        return Err(Error::Size(format!(
            "{} facilities exceed the exhaustive limit of {MAX_BRUTEFORCE_FACILITIES}",
            sol.num_facilities
        )));
    }
    Ok(())
}

/// Checks every nonempty facility set; returns the first violation in
/// increasing bitmask order.
pub fn bruteforce_feasibility(sol: &FractionalSolution, u: usize) -> Result<Option<RectangleCut>> {
    bruteforce_feasibility_with(sol, u, RECT_TOL, Exec::default())
}

pub fn bruteforce_feasibility_with(
    sol: &FractionalSolution,
    u: usize,
    tol: f64,
    exec: Exec,
) -> Result<Option<RectangleCut>> {
    check_size(sol)?;
    let n = sol.num_facilities;
    let found = par::map_chunks(exec, 1..1u64 << n, 1 << 10, |range| {
        range.into_iter().find_map(|mask| check_rectangle(sol, &mask_members(mask, n), u, tol))
    });
    Ok(found.into_iter().flatten().next())
}

/// Separates over every nonempty facility set and returns up to `limit`
/// cuts, most violated first (ties by bitmask order).
pub fn separate_exhaustive(
    sol: &FractionalSolution,
    u: usize,
    tol: f64,
    limit: usize,
    exec: Exec,
) -> Result<Vec<RectangleCut>> {
    check_size(sol)?;
    let n = sol.num_facilities;
    let chunks = par::map_chunks(exec, 1..1u64 << n, 1 << 10, |range| {
        range.into_iter().filter_map(|mask| check_rectangle(sol, &mask_members(mask, n), u, tol)).collect::<Vec<_>>()
    });
    let mut cuts: Vec<RectangleCut> = chunks.into_iter().flatten().collect();
    // stable sort keeps bitmask order among equal violations
    cuts.sort_by(|a, b| b.violation().total_cmp(&a.violation()));
    cuts.truncate(limit);
    Ok(cuts)
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= INT_SNAP {
        r
    } else {
        v
    }
}

pub fn frac(v: f64) -> f64 {
    let v = snap(v);
    v - v.floor()
}

pub fn cofrac(v: f64) -> f64 {
    let v = snap(v);
    v.ceil() - v
}

/// Both sides of `Σ_j x_{B,j}(1 - x_{B,j}) >= u frac(y'_B) cofrac(y_B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma3 {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the variance inequality for `B`. Requires the rectangle
/// constraints on `B` to hold and `y'_B >= floor(y_B)`, where
/// `y'_B = Σ_j x_{B,j} / u`.
pub fn lemma3_check(sol: &FractionalSolution, b: &[usize], u: usize, tol: f64) -> Result<Lemma3> {
    if let Some(cut) = check_rectangle(sol, b, u, RECT_TOL) {
        return Err(Error::Precondition(format!(
            "rectangle constraint violated on B (p = {}, excess {:.3e})",
            cut.p,
            cut.violation()
        )));
    }
    let xb = client_mass(sol, b);
    let yb = snap(b.iter().map(|&i| sol.y[i]).sum());
    let yp = snap(xb.iter().sum::<f64>() / u as f64);
    if yp < yb.floor() - INT_SNAP {
        return Err(Error::Precondition(format!("y'_B = {yp} is below floor(y_B) = {}", yb.floor())));
    }
    let lhs: f64 = xb.iter().map(|&v| v * (1.0 - v)).sum();
    let rhs = u as f64 * frac(yp) * cofrac(yb);
    Ok(Lemma3 { lhs, rhs, holds: lhs >= rhs - tol })
}
