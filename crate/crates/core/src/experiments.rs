//! End-to-end drivers behind the CLI: LP solves, rounding runs, the two gap
//! experiments and per-file benchmark rows. Every report is plain data with
//! snake_case keys; wall-clock times are only filled in on request so that
//! reports stay byte-identical across runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cutloop::{rectangle_lp_exhaustive, round_or_separate, solve_rect, LoopConfig, LoopResult};
use crate::error::{Error, Result};
use crate::instance::{build_expander_fractional, edge_expansion_with, gen_expander_gap, gen_gap_groups, Instance};
use crate::lpcore::{build_basic_lp, solve_lp};
use crate::oracle::{candidate_count, exact_opt_with, MAX_CANDIDATES};
use crate::par::{self, Exec};
use crate::rectangle::{bruteforce_feasibility_with, RECT_TOL};
use crate::rounding::{facility_bound, IntegralSolution, RoundingTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub num_facilities: usize,
    pub num_clients: usize,
    pub k: usize,
    pub u: usize,
    pub colocated: bool,
}

impl From<&Instance> for InstanceSummary {
    fn from(inst: &Instance) -> Self {
        InstanceSummary {
            num_facilities: inst.num_facilities(),
            num_clients: inst.num_clients(),
            k: inst.k(),
            u: inst.u(),
            colocated: inst.colocated(),
        }
    }
}

/// Milliseconds per stage; present only when timings were requested.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

struct Clock {
    on: bool,
    timings: Timings,
}

impl Clock {
    fn new(on: bool) -> Self {
        Clock { on, timings: Timings::default() }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.on {
            self.timings.stages.push((stage.to_string(), start.elapsed().as_secs_f64() * 1e3));
        }
        out
    }

    fn finish(self) -> Option<Timings> {
        self.on.then_some(self.timings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Basic,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Solved,
    Rounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub status: RunStatus,
    pub instance: InstanceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub lp_basic_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_rect_value: Option<f64>,
    pub cuts_added: usize,
    pub cut_rounds: usize,
    /// LP objective after every solve of the cut loop.
    pub objective_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub openings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_opt: Option<f64>,
    /// `integral_cost / lp_rect_value`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_lp: Option<f64>,
    /// `integral_cost / exact_opt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<IntegralSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn loop_fields(report: &mut RunReport, res: &LoopResult) {
    report.lp_basic_value = res.lp_basic;
    report.lp_rect_value = Some(res.lp_final);
    report.cuts_added = res.cuts.len();
    report.cut_rounds = res.cut_rounds;
    report.objective_history = res.objectives.clone();
}

fn empty_report(command: &str, inst: &Instance, status: RunStatus) -> RunReport {
    RunReport {
        command: command.to_string(),
        status,
        instance: inst.into(),
        eps: None,
        lp_basic_value: 0.0,
        lp_rect_value: None,
        cuts_added: 0,
        cut_rounds: 0,
        objective_history: Vec::new(),
        integral_cost: None,
        openings: None,
        bound: None,
        exact_opt: None,
        ratio_lp: None,
        ratio_exact: None,
        solution: None,
        timings: None,
    }
}

/// Basic LP, or the rectangle cut loop (round-or-separate when co-located,
/// exhaustive separation otherwise).
pub fn run_solve(inst: &Instance, mode: SolveMode, cfg: &LoopConfig, timings: bool) -> Result<RunReport> {
    let mut clock = Clock::new(timings);
    let mut report = empty_report("solve", inst, RunStatus::Solved);
    match mode {
        SolveMode::Basic => {
            let sol = clock.time("lp", || solve_lp(inst, &build_basic_lp(inst), cfg.tol))?;
            report.lp_basic_value = sol.objective;
            report.objective_history = vec![sol.objective];
        }
        SolveMode::Rect => {
            let res = clock.time("cut_loop", || solve_rect(inst, cfg))?;
            loop_fields(&mut report, &res);
            if let Some((sol, _)) = res.rounded {
                report.eps = Some(cfg.eps);
                report.status = RunStatus::Rounded;
                fill_rounded(&mut report, inst, cfg.eps, sol);
            }
        }
    }
    report.timings = clock.finish();
    Ok(report)
}

fn fill_rounded(report: &mut RunReport, inst: &Instance, eps: f64, sol: IntegralSolution) {
    report.integral_cost = Some(sol.cost);
    report.openings = Some(sol.opening.total());
    report.bound = Some(facility_bound(inst.k(), eps));
    report.ratio_lp = report.lp_rect_value.and_then(|lp| ratio(sol.cost, lp));
    report.solution = Some(sol);
}

/// Round-or-separate to an integral solution on a co-located instance.
pub fn run_round(inst: &Instance, cfg: &LoopConfig, timings: bool) -> Result<(RunReport, RoundingTrace)> {
    let mut clock = Clock::new(timings);
    let res = clock.time("cut_loop", || round_or_separate(inst, cfg))?;
    let mut report = empty_report("round", inst, RunStatus::Rounded);
    report.eps = Some(cfg.eps);
    loop_fields(&mut report, &res);
    let (sol, trace) = res.rounded.ok_or_else(|| Error::Internal("loop ended without rounding".into()))?;
    fill_rounded(&mut report, inst, cfg.eps, sol);
    report.timings = clock.finish();
    Ok((report, trace))
}

/// Exact optimum if the enumeration fits under [`MAX_CANDIDATES`].
pub fn exact_if_small(inst: &Instance, k: usize, soft: bool, exec: Exec) -> Result<Option<f64>> {
    if candidate_count(inst.num_facilities(), k, soft) > MAX_CANDIDATES {
        return Ok(None);
    }
    match exact_opt_with(inst, k, soft, exec) {
        Ok(r) => Ok(Some(r.best_cost)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsReport {
    pub u: usize,
    pub k: usize,
    pub points: usize,
    /// LPs and the exact optimum ran on the instance with identical
    /// facility points merged into one location per group.
    pub merged: bool,
    pub lp_basic_value: f64,
    pub lp_rect_value: f64,
    pub cuts_added: usize,
    pub cut_rounds: usize,
    pub objective_history: Vec<f64>,
    pub exact_opt: f64,
    /// Exact optimum with `2k - 3` facilities.
    pub exact_opt_2k_minus_3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpanderReport {
    pub u: usize,
    pub seed: u64,
    pub edges: Vec<(usize, usize)>,
    pub expansion_cut: usize,
    pub expansion_size: usize,
    pub expansion: f64,
    pub gamma: f64,
    pub fractional_cost: f64,
    /// `3 gamma (u + 1)`.
    pub fractional_cost_formula: f64,
    pub rectangle_feasible: bool,
    pub checked_sets: u64,
    pub lp_basic_value: f64,
    pub lp_rect_value: f64,
    pub cuts_added: usize,
    pub cut_rounds: usize,
    /// Soft optimum with `k = u + 1` copies over the `u` vertices.
    pub exact_opt: f64,
    pub ratio_exact_fractional: f64,
    pub ratio_exact_rect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDemoReport {
    pub u: usize,
    pub seed: u64,
    pub groups: GroupsReport,
    /// Absent when `u` is odd or below 4 (no 3-regular graph on `u` vertices).
    pub expander: Option<ExpanderReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Largest group count run on the unmerged groups instance.
const GROUPS_UNMERGED_MAX_U: usize = 3;

pub fn groups_experiment(u: usize, exec: Exec) -> Result<GroupsReport> {
    let full = gen_gap_groups(u)?;
    let merged = u > GROUPS_UNMERGED_MAX_U;
    let (inst, soft) = if merged { (full.merge_identical_facilities().0, true) } else { (full.clone(), false) };
    let cfg = LoopConfig { exec, ..LoopConfig::default() };
    let res = rectangle_lp_exhaustive(&inst, &cfg)?;
    let k = full.k();
    let exact = |kk: usize| -> Result<f64> { exact_opt_with(&inst, kk, soft, exec).map(|r| r.best_cost) };
    Ok(GroupsReport {
        u,
        k,
        points: full.num_facilities(),
        merged,
        lp_basic_value: res.lp_basic,
        lp_rect_value: res.lp_final,
        cuts_added: res.cuts.len(),
        cut_rounds: res.cut_rounds,
        objective_history: res.objectives,
        exact_opt: exact(k)?,
        exact_opt_2k_minus_3: exact(2 * k - 3)?,
    })
}

pub fn expander_experiment(u: usize, seed: u64, exec: Exec) -> Result<ExpanderReport> {
    let (inst, g) = gen_expander_gap(u, seed)?;
    let chi = edge_expansion_with(&g, exec)?;
    let gamma = 1.0 / chi.value();
    let sol = build_expander_fractional(&inst, &g, gamma)?;
    let feasible = bruteforce_feasibility_with(&sol, u, RECT_TOL, exec)?.is_none();
    let cfg = LoopConfig { exec, ..LoopConfig::default() };
    let res = rectangle_lp_exhaustive(&inst, &cfg)?;
    let exact = exact_opt_with(&inst, u + 1, true, exec)?.best_cost;
    let formula = 3.0 * gamma * (u as f64 + 1.0);
    Ok(ExpanderReport {
        u,
        seed,
        edges: g.edges.clone(),
        expansion_cut: chi.cut,
        expansion_size: chi.size,
        expansion: chi.value(),
        gamma,
        fractional_cost: sol.objective,
        fractional_cost_formula: formula,
        rectangle_feasible: feasible,
        checked_sets: (1u64 << u) - 1,
        lp_basic_value: res.lp_basic,
        lp_rect_value: res.lp_final,
        cuts_added: res.cuts.len(),
        cut_rounds: res.cut_rounds,
        exact_opt: exact,
        ratio_exact_fractional: exact / formula,
        ratio_exact_rect: exact / res.lp_final,
    })
}

/// Both gap experiments for one `u`.
pub fn gapdemo(u: usize, seed: u64, exec: Exec, timings: bool) -> Result<GapDemoReport> {
    if u < 2 {
        return Err(Error::Parameter(format!("gapdemo needs u >= 2 (2k - 3 >= 1), got {u}")));
    }
    let mut clock = Clock::new(timings);
    let groups = clock.time("groups", || groups_experiment(u, exec))?;
    let expander = if u >= 4 && u.is_multiple_of(2) {
        Some(clock.time("expander", || expander_experiment(u, seed, exec))?)
    } else {
        None
    };
    Ok(GapDemoReport { u, seed, groups, expander, timings: clock.finish() })
}

/// One CSV row of `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub n: usize,
    pub k: usize,
    pub u: usize,
    pub eps: f64,
    pub lp_basic: f64,
    pub lp_rect: f64,
    pub cuts: usize,
    pub integral_cost: f64,
    pub openings: usize,
    pub bound: usize,
    pub exact: Option<f64>,
    pub ratio_lp: Option<f64>,
    pub ratio_exact: Option<f64>,
    pub ms: f64,
}

pub const BENCH_HEADER: &str =
    "instance,n,k,u,eps,lp_basic,lp_rect,cuts,integral_cost,openings,bound,exact,ratio_lp,ratio_exact,ms";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.instance,
            self.n,
            self.k,
            self.u,
            self.eps,
            self.lp_basic,
            self.lp_rect,
            self.cuts,
            self.integral_cost,
            self.openings,
            self.bound,
            opt(self.exact),
            opt(self.ratio_lp),
            opt(self.ratio_exact),
            self.ms
        )
    }
}

/// Rounds one instance; non-co-located instances are replaced by their soft
/// instance on the client points. The exact column is the soft optimum.
pub fn bench_instance(name: &str, inst: &Instance, eps: f64) -> Result<BenchRow> {
    let start = Instant::now();
    let inst = if inst.colocated() { inst.clone() } else { inst.soft_instance() };
    // files are processed in parallel, so everything inside runs sequentially
    let cfg = LoopConfig { eps, exec: Exec::Sequential, ..LoopConfig::default() };
    let res = round_or_separate(&inst, &cfg)?;
    let (sol, _) = res.rounded.ok_or_else(|| Error::Internal("loop ended without rounding".into()))?;
    let exact = exact_if_small(&inst, inst.k(), true, Exec::Sequential)?;
    Ok(BenchRow {
        instance: name.to_string(),
        n: inst.num_clients(),
        k: inst.k(),
        u: inst.u(),
        eps,
        lp_basic: res.lp_basic,
        lp_rect: res.lp_final,
        cuts: res.cuts.len(),
        integral_cost: sol.cost,
        openings: sol.opening.total(),
        bound: facility_bound(inst.k(), eps),
        exact,
        ratio_lp: ratio(sol.cost, res.lp_final),
        ratio_exact: exact.and_then(|e| ratio(sol.cost, e)),
        ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Benchmarks named instances, in input order.
pub fn bench_all(items: &[(String, Instance)], eps: f64, exec: Exec) -> Vec<Result<BenchRow>> {
    par::map(exec, items, |(name, inst)| bench_instance(name, inst, eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gapdemo_u2() {
        let rep = gapdemo(2, 0, Exec::Sequential, false).unwrap();
        assert!(rep.groups.lp_basic_value.abs() < 1e-6);
        assert!(rep.groups.lp_rect_value > 1e-6);
        assert_eq!(rep.groups.exact_opt, 1.0);
        assert!(rep.expander.is_none());
        assert!(rep.timings.is_none());
    }

    #[test]
    fn merged_groups_agree_with_full_instance() {
        let full = gen_gap_groups(3).unwrap();
        let merged = full.merge_identical_facilities().0;
        for kk in [4, 5] {
            let a = exact_opt_with(&full, kk, false, Exec::Sequential).unwrap().best_cost;
            let b = exact_opt_with(&merged, kk, true, Exec::Sequential).unwrap().best_cost;
            assert_eq!(a, b);
        }
        let cfg = LoopConfig::default();
        let a = rectangle_lp_exhaustive(&full, &cfg).unwrap();
        let b = rectangle_lp_exhaustive(&merged, &cfg).unwrap();
        assert!((a.lp_basic - b.lp_basic).abs() < 1e-9);
        assert!(b.lp_final <= a.lp_final + 1e-6);
    }
}
