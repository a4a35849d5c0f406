//! Cutting-plane driver for the rectangle LP.
//!
//! Two separators are available. Round-or-separate (co-located instances)
//! solves the current LP, attempts a rounding and adds the violated rectangle
//! the rounding reports, stopping at the first integral solution. Exhaustive
//! separation (at most [`MAX_BRUTEFORCE_FACILITIES`] facilities) checks every
//! facility set and stops when none is violated, which yields the rectangle
//! LP optimum itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::lpcore::{build_basic_lp, FractionalSolution, LpSession};
use crate::par::Exec;
use crate::rectangle::{separate_exhaustive, RectangleCut, MAX_BRUTEFORCE_FACILITIES, RECT_TOL};
use crate::rounding::{round, IntegralSolution, RoundOutcome, RoundingTrace};

pub const DEFAULT_MAX_ROUNDS: usize = 200;
pub const DEFAULT_CUTS_PER_ROUND: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separator {
    RoundOrSeparate,
    Exhaustive,
}

#[derive(Debug, Clone, Copy)]
pub struct LoopConfig {
    pub eps: f64,
    /// Cap on LP solves after the first one.
    pub max_rounds: usize,
    pub tol: f64,
    /// Exhaustive separation only.
    pub cuts_per_round: usize,
    pub exec: Exec,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            eps: 0.5,
            max_rounds: DEFAULT_MAX_ROUNDS,
            tol: RECT_TOL,
            cuts_per_round: DEFAULT_CUTS_PER_ROUND,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoopResult {
    pub separator: Separator,
    pub lp_basic: f64,
    pub lp_final: f64,
    /// LP objective after every solve, starting with the Basic LP.
    pub objectives: Vec<f64>,
    pub cuts: Vec<RectangleCut>,
    /// Number of rounds that added cuts.
    pub cut_rounds: usize,
    pub simplex_iterations: usize,
    pub solution: FractionalSolution,
    /// Present when round-or-separate finished with an integral solution.
    pub rounded: Option<(IntegralSolution, RoundingTrace)>,
}

/// Picks round-or-separate for co-located instances and exhaustive
/// separation otherwise.
pub fn solve_rect(inst: &Instance, cfg: &LoopConfig) -> Result<LoopResult> {
    if inst.colocated() {
        round_or_separate(inst, cfg)
    } else {
        rectangle_lp_exhaustive(inst, cfg)
    }
}

pub fn round_or_separate(inst: &Instance, cfg: &LoopConfig) -> Result<LoopResult> {
    run(inst, cfg, Separator::RoundOrSeparate)
}

pub fn rectangle_lp_exhaustive(inst: &Instance, cfg: &LoopConfig) -> Result<LoopResult> {
    if inst.num_facilities() > MAX_BRUTEFORCE_FACILITIES {
        return Err(Error::Size(format!(
            "exhaustive separation needs at most {MAX_BRUTEFORCE_FACILITIES} facilities, got {}",
            inst.num_facilities()
        )));
    }
    run(inst, cfg, Separator::Exhaustive)
}

fn run(inst: &Instance, cfg: &LoopConfig, separator: Separator) -> Result<LoopResult> {
    let u = inst.u();
    let mut session = LpSession::new(build_basic_lp(inst), cfg.tol)?;
    let mut objectives = Vec::new();
    let mut cuts = Vec::new();
    let mut iterations = 0;
    for round_no in 0..=cfg.max_rounds {
        let cert = session.solve(inst)?;
        iterations += cert.iterations;
        let sol = cert.solution;
        if let Some(&prev) = objectives.last() {
            let prev: f64 = prev;
            if sol.objective < prev - 1e-7 * (1.0 + prev.abs()) {
                return Err(Error::Internal(format!(
                    "LP objective dropped from {prev} to {} after adding cuts",
                    sol.objective
                )));
            }
        }
        objectives.push(sol.objective);
        let (found, rounded) = match separator {
            Separator::RoundOrSeparate => match round(inst, &sol, cfg.eps)? {
                RoundOutcome::Rounded { solution, trace } => (Vec::new(), Some((solution, trace))),
                RoundOutcome::Separated { cut, .. } => (vec![cut], None),
            },
            Separator::Exhaustive => (separate_exhaustive(&sol, u, cfg.tol, cfg.cuts_per_round, cfg.exec)?, None),
        };
        if found.is_empty() {
            return Ok(LoopResult {
                separator,
                lp_basic: objectives[0],
                lp_final: sol.objective,
                cut_rounds: round_no,
                objectives,
                cuts,
                simplex_iterations: iterations,
                solution: sol,
                rounded,
            });
        }
        if round_no == cfg.max_rounds {
            break;
        }
        let vars = sol.vars();
        let rows: Vec<_> = found.iter().map(|c| c.to_linear(u)).collect();
        if let Some(row) = rows.iter().find(|r| r.violation(&vars) <= 1e-9) {
            return Err(Error::Internal(format!("separated cut is not violated by the current LP solution: {row:?}")));
        }
        session.add_cuts(&rows)?;
        cuts.extend(found);
    }
    Err(Error::CutRoundLimit { rounds: cfg.max_rounds })
}
