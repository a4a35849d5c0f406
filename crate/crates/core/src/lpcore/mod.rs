//! The Basic LP model, fractional solutions, cut rows, and the simplex
//! driver that solves them.

pub mod simplex;

use serde::{Deserialize, Serialize};

pub use simplex::{LpOptimum, Sense, Simplex, SimplexOptions};

use crate::error::{Error, Result};
use crate::instance::Instance;

/// Values below this magnitude in a solver output are reported as 0.
const SNAP: f64 = 1e-11;

/// One sparse row `Σ coeff·var (sense) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn le(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        LinearConstraint { terms, sense: Sense::Le, rhs }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Variables `x_{i,j}` (index `i*nC + j`) followed by `y_i` (index
/// `nF*nC + i`), all bounded below by 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LPModel {
    num_facilities: usize,
    num_clients: usize,
    objective: Vec<f64>,
    rows: Vec<LinearConstraint>,
}

impl LPModel {
    pub fn num_facilities(&self) -> usize {
        self.num_facilities
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LinearConstraint] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn x_var(&self, i: usize, j: usize) -> usize {
        i * self.num_clients + j
    }

    pub fn y_var(&self, i: usize) -> usize {
        self.num_facilities * self.num_clients + i
    }

    fn check_row(&self, row: &LinearConstraint) -> Result<()> {
        match row.terms.iter().find(|&&(v, _)| v >= self.num_vars()) {
            Some(&(v, _)) => {
                Err(Error::Schema(format!("cut references variable {v} but the model has {}", self.num_vars())))
            }
            None => Ok(()),
        }
    }

    fn push_row(&mut self, row: LinearConstraint) -> Result<()> {
        self.check_row(&row)?;
        self.rows.push(row);
        Ok(())
    }
}

/// Builds the Basic LP rows: budget, connection, `x <= y`, capacity,
/// nonnegativity (implicit).
pub fn build_basic_lp(inst: &Instance) -> LPModel {
    let (nf, nc) = (inst.num_facilities(), inst.num_clients());
    let mut objective = vec![0.0; nf * nc + nf];
    for i in 0..nf {
        for j in 0..nc {
            objective[i * nc + j] = inst.fc(i, j);
        }
    }
    let mut model = LPModel { num_facilities: nf, num_clients: nc, objective, rows: Vec::new() };
    let y0 = nf * nc;
    model.rows.push(LinearConstraint::le((0..nf).map(|i| (y0 + i, 1.0)).collect(), inst.k() as f64));
    for j in 0..nc {
        let terms = (0..nf).map(|i| (i * nc + j, 1.0)).collect();
        model.rows.push(LinearConstraint { terms, sense: Sense::Eq, rhs: 1.0 });
    }
    for i in 0..nf {
        for j in 0..nc {
            model.rows.push(LinearConstraint::le(vec![(i * nc + j, 1.0), (y0 + i, -1.0)], 0.0));
        }
    }
    let u = inst.u() as f64;
    for i in 0..nf {
        let mut terms: Vec<(usize, f64)> = (0..nc).map(|j| (i * nc + j, 1.0)).collect();
        terms.push((y0 + i, -u));
        model.rows.push(LinearConstraint::le(terms, 0.0));
    }
    model
}

/// Returns `model` with `cuts` appended.
pub fn add_cuts(model: &LPModel, cuts: &[LinearConstraint]) -> Result<LPModel> {
    let mut out = model.clone();
    for cut in cuts {
        out.push_row(cut.clone())?;
    }
    Ok(out)
}

/// Solution of the Basic LP (possibly with cuts): `x` is row-major
/// facility × client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub num_facilities: usize,
    pub num_clients: usize,
    pub objective: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// First Basic-LP constraint found violated by a [`FractionalSolution`].
#[derive(Debug, Clone, PartialEq)]
pub enum BasicViolation {
    Negative { var: usize, value: f64 },
    Budget { total: f64 },
    Connection { client: usize, total: f64 },
    OpenBound { facility: usize, client: usize },
    Capacity { facility: usize, load: f64 },
}

impl FractionalSolution {
    /// Wraps `x` and `y`, computing the objective from `inst`.
    pub fn new(inst: &Instance, x: Vec<f64>, y: Vec<f64>) -> Self {
        let (nf, nc) = (inst.num_facilities(), inst.num_clients());
        assert_eq!(x.len(), nf * nc);
        assert_eq!(y.len(), nf);
        let mut objective = 0.0;
        for i in 0..nf {
            for j in 0..nc {
                objective += x[i * nc + j] * inst.fc(i, j);
            }
        }
        FractionalSolution { num_facilities: nf, num_clients: nc, objective, x, y }
    }

    /// Reads the solution out of an LP variable vector.
    pub fn from_vars(inst: &Instance, vars: &[f64]) -> Self {
        let nfc = inst.num_facilities() * inst.num_clients();
        let snap = |v: f64| if v.abs() < SNAP { 0.0 } else { v };
        let x = vars[..nfc].iter().map(|&v| snap(v)).collect();
        let y = vars[nfc..nfc + inst.num_facilities()].iter().map(|&v| snap(v)).collect();
        FractionalSolution::new(inst, x, y)
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.num_clients + j]
    }

    /// Concatenated `(x, y)` in model variable order.
    pub fn vars(&self) -> Vec<f64> {
        self.x.iter().chain(self.y.iter()).copied().collect()
    }

    pub fn total_open(&self) -> f64 {
        self.y.iter().sum()
    }

    /// Checks every Basic-LP row within `tol`.
    pub fn check_basic(&self, inst: &Instance, tol: f64) -> std::result::Result<(), BasicViolation> {
        let (nf, nc) = (self.num_facilities, self.num_clients);
        for (var, &value) in self.vars().iter().enumerate() {
            if value < -tol {
                return Err(BasicViolation::Negative { var, value });
            }
        }
        let total = self.total_open();
        if total > inst.k() as f64 + tol {
            return Err(BasicViolation::Budget { total });
        }
        for j in 0..nc {
            let total: f64 = (0..nf).map(|i| self.x(i, j)).sum();
            if (total - 1.0).abs() > tol {
                return Err(BasicViolation::Connection { client: j, total });
            }
        }
        for i in 0..nf {
            for j in 0..nc {
                if self.x(i, j) > self.y[i] + tol {
                    return Err(BasicViolation::OpenBound { facility: i, client: j });
                }
            }
            let load: f64 = (0..nc).map(|j| self.x(i, j)).sum();
            if load > inst.u() as f64 * self.y[i] + tol {
                return Err(BasicViolation::Capacity { facility: i, load });
            }
        }
        Ok(())
    }
}

/// Optimal solution together with its dual certificate.
#[derive(Debug, Clone)]
pub struct CertifiedSolution {
    pub solution: FractionalSolution,
    pub duals: Vec<f64>,
    /// `|c'x - b'duals|` at the returned pair.
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Verifies primal feasibility, dual feasibility and the duality gap of a
/// candidate pair, returning the absolute gap.
pub fn certify(model: &LPModel, vars: &[f64], duals: &[f64], tol: f64) -> Result<f64> {
    let scale = 1.0 + model.objective.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    for (r, row) in model.rows.iter().enumerate() {
        let viol = row.violation(vars);
        if viol > tol * (1.0 + row.rhs.abs()) {
            return Err(Error::Internal(format!("row {r} violated by {viol:.3e}")));
        }
        let wrong_sign = match row.sense {
            Sense::Le => duals[r] > tol * scale,
            Sense::Ge => duals[r] < -tol * scale,
            Sense::Eq => false,
        };
        if wrong_sign {
            return Err(Error::Internal(format!("dual {r} has the wrong sign: {}", duals[r])));
        }
    }
    let mut reduced = model.objective.clone();
    for (row, &d) in model.rows.iter().zip(duals) {
        for &(v, c) in &row.terms {
            reduced[v] -= c * d;
        }
    }
    if let Some((v, &d)) = reduced.iter().enumerate().find(|(_, &d)| d < -tol * scale) {
        return Err(Error::Internal(format!("reduced cost of variable {v} is {d:.3e}")));
    }
    let primal: f64 = model.objective.iter().zip(vars).map(|(c, x)| c * x).sum();
    let dual: f64 = model.rows.iter().zip(duals).map(|(row, d)| row.rhs * d).sum();
    Ok((primal - dual).abs())
}

/// Incremental solver: the simplex basis is kept between calls so that
/// appended cut rows are handled by dual simplex from the previous optimum.
#[derive(Debug, Clone)]
pub struct LpSession {
    model: LPModel,
    simplex: Simplex,
    tol: f64,
}

impl LpSession {
    pub fn new(model: LPModel, tol: f64) -> Result<Self> {
        let opts = SimplexOptions { opt_tol: tol, ..SimplexOptions::default() };
        let mut simplex = Simplex::new(model.num_vars(), model.objective.clone(), opts);
        for row in &model.rows {
            simplex.add_row(&row.terms, row.sense, row.rhs)?;
        }
        Ok(LpSession { model, simplex, tol })
    }

    pub fn model(&self) -> &LPModel {
        &self.model
    }

    pub fn add_cuts(&mut self, cuts: &[LinearConstraint]) -> Result<()> {
        for cut in cuts {
            self.model.check_row(cut)?;
            if cut.sense == Sense::Eq {
                return Err(Error::Schema("cuts must be inequalities".into()));
            }
        }
        for cut in cuts {
            self.simplex.add_row(&cut.terms, cut.sense, cut.rhs)?;
            self.model.rows.push(cut.clone());
        }
        Ok(())
    }

    pub fn solve(&mut self, inst: &Instance) -> Result<CertifiedSolution> {
        let opt = self.simplex.solve()?;
        let cert_tol = self.tol.max(1e-7);
        let gap = certify(&self.model, &opt.x, &opt.duals, cert_tol)?;
        if gap > cert_tol * (1.0 + opt.objective.abs()) * 10.0 {
            return Err(Error::Internal(format!("duality gap {gap:.3e} after simplex")));
        }
        Ok(CertifiedSolution {
            solution: FractionalSolution::from_vars(inst, &opt.x),
            duals: opt.duals,
            duality_gap: gap,
            iterations: opt.iterations,
        })
    }
}

/// Solves `model` from scratch.
pub fn solve_lp(inst: &Instance, model: &LPModel, tol: f64) -> Result<FractionalSolution> {
    solve_lp_certified(inst, model, tol).map(|c| c.solution)
}

pub fn solve_lp_certified(inst: &Instance, model: &LPModel, tol: f64) -> Result<CertifiedSolution> {
    if model.num_facilities != inst.num_facilities() || model.num_clients != inst.num_clients() {
        return Err(Error::Shape("model and instance dimensions differ".into()));
    }
    LpSession::new(model.clone(), tol)?.solve(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gen_gap_groups;

    fn tiny(nf: usize, nc: usize, k: usize, u: usize, colocated: bool, d: &[f64]) -> Instance {
        Instance::new(nf, nc, k, u, colocated, d.to_vec()).unwrap()
    }

    #[test]
    fn basic_lp_counts() {
        let inst = gen_gap_groups(2).unwrap();
        let m = build_basic_lp(&inst);
        assert_eq!((m.num_vars(), m.num_rows()), (42, 49));
        let one = tiny(1, 1, 1, 1, false, &[0.0, 5.0, 5.0, 0.0]);
        let m1 = build_basic_lp(&one);
        assert_eq!((m1.num_vars(), m1.num_rows()), (2, 4));
        let cut = LinearConstraint::le(vec![(0, 1.0)], 1.0);
        assert_eq!(add_cuts(&m1, &[cut]).unwrap().num_rows(), 5);
        assert_eq!(add_cuts(&m1, &[]).unwrap(), m1);
    }

    #[test]
    fn unknown_variable_is_schema_error() {
        let one = tiny(1, 1, 1, 1, false, &[0.0, 5.0, 5.0, 0.0]);
        let m = build_basic_lp(&one);
        let bad = LinearConstraint::le(vec![(7, 1.0)], 1.0);
        assert!(matches!(add_cuts(&m, &[bad]), Err(Error::Schema(_))));
    }

    #[test]
    fn gap_groups_basic_lp_is_zero() {
        let inst = gen_gap_groups(2).unwrap();
        let sol = solve_lp(&inst, &build_basic_lp(&inst), 1e-7).unwrap();
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.check_basic(&inst, 1e-7).is_ok());
    }

    #[test]
    fn forced_assignment() {
        let inst = tiny(1, 1, 1, 1, false, &[0.0, 5.0, 5.0, 0.0]);
        let sol = solve_lp(&inst, &build_basic_lp(&inst), 1e-7).unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn line_pair_k1() {
        // points 0 and 2, facilities = clients, k = 1, u = 2
        let d = [0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 2.0, 0.0, 0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 2.0, 0.0];
        let inst = tiny(2, 2, 1, 2, true, &d);
        let sol = solve_lp(&inst, &build_basic_lp(&inst), 1e-7).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9, "{}", sol.objective);
    }

    #[test]
    fn duplicate_cut_keeps_objective() {
        let inst = gen_gap_groups(2).unwrap();
        let model = build_basic_lp(&inst);
        let cut = LinearConstraint::le(vec![(model.y_var(0), 1.0)], 0.25);
        let once = solve_lp(&inst, &add_cuts(&model, std::slice::from_ref(&cut)).unwrap(), 1e-7).unwrap();
        let twice = solve_lp(&inst, &add_cuts(&model, &[cut.clone(), cut]).unwrap(), 1e-7).unwrap();
        assert!((once.objective - twice.objective).abs() < 1e-9);
    }

    #[test]
    fn session_matches_cold_solve() {
        let inst = gen_gap_groups(2).unwrap();
        let model = build_basic_lp(&inst);
        // Force the group {0,1,2} to carry at most 2 units of its own clients.
        let nc = inst.num_clients();
        let terms: Vec<(usize, f64)> = (0..3).flat_map(|i| (0..3).map(move |j| (i * nc + j, 1.0))).collect();
        let cut = LinearConstraint::le(terms, 2.0);
        let mut session = LpSession::new(model.clone(), 1e-7).unwrap();
        session.solve(&inst).unwrap();
        session.add_cuts(std::slice::from_ref(&cut)).unwrap();
        let warm = session.solve(&inst).unwrap();
        let cold = solve_lp(&inst, &add_cuts(&model, &[cut]).unwrap(), 1e-7).unwrap();
        assert!((warm.solution.objective - cold.objective).abs() < 1e-7);
        assert!(warm.solution.objective > 0.5);
    }
}
