//! `ckm`: command-line front end for uniform capacitated k-median.
//!
//! Machine output is JSON on stdout (CSV for `bench`); a one-line human
//! summary and structured errors go to stderr. Exit codes: 0 success,
//! 2 infeasible, 3 cut-round cap reached, 1 anything else.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ckm_core::cutloop::{LoopConfig, DEFAULT_MAX_ROUNDS};
use ckm_core::experiments::{bench_all, gapdemo, run_round, run_solve, InstanceSummary, SolveMode, BENCH_HEADER};
use ckm_core::instance::{gen_expander_gap, gen_gap_groups, read_instance, write_instance, Instance};
use ckm_core::oracle::exact_opt_with;
use ckm_core::par::Exec;
use ckm_core::reduction::{base_assignment, soft_to_hard};
use ckm_core::rounding::IntegralSolution;
use ckm_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ckm",
    version,
    about = "Uniform capacitated k-median: rectangle LP, round-or-separate, gap experiments"
)]
struct Cli {
    /// Run every data-parallel sweep on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Groups,
    Expander,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Basic,
    Rect,
}

#[derive(Subcommand)]
enum Command {
    /// Write a gap-family instance as JSON
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        u: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the Basic LP or run the rectangle cut loop
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
        max_cut_rounds: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Include wall-clock times (makes the report non-deterministic)
        #[arg(long)]
        timings: bool,
    },
    /// Round-or-separate to an integral solution (co-located instances)
    Round {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Write the rounding trace JSON here
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
        max_cut_rounds: usize,
        #[arg(long)]
        timings: bool,
    },
    /// Exact optimum by enumerating openings
    Exact {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Allow several copies per location
        #[arg(long)]
        soft: bool,
    },
    /// Turn a soft solution on the client points into a hard solution
    Reduce {
        #[arg(long)]
        hard: PathBuf,
        /// Integral solution JSON, or a `round` report containing one
        #[arg(long)]
        soft_solution: PathBuf,
    },
    /// Run both gap experiments end to end
    Gapdemo {
        #[arg(long)]
        u: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        timings: bool,
    },
    /// Round every instance file in a directory; CSV on stdout
    Bench {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        eps: f64,
    },
}

enum Output {
    Json(Value),
    Text(String),
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialise")
}

fn loop_config(eps: f64, max_rounds: usize, tol: f64, exec: Exec) -> LoopConfig {
    LoopConfig { eps, max_rounds, tol, exec, ..LoopConfig::default() }
}

fn read_soft_solution(path: &Path) -> Result<IntegralSolution> {
    let text = std::fs::read_to_string(path)?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("solution") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn instance_files(dir: &Path) -> Result<Vec<(String, Instance)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            read_instance(&p).map(|inst| (name, inst))
        })
        .collect()
}

fn run(cli: Cli) -> Result<Output> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Gen { family, u, seed, out } => {
            let (inst, name) = match family {
                Family::Groups => (gen_gap_groups(u)?, "groups"),
                Family::Expander => (gen_expander_gap(u, seed)?.0, "expander"),
            };
            write_instance(&inst, &out)?;
            eprintln!("wrote {name} instance with u = {u} to {}", out.display());
            Ok(Output::Json(json!({
                "family": name,
                "u": u,
                "seed": seed,
                "out": out.display().to_string(),
                "instance": to_value(&InstanceSummary::from(&inst)),
            })))
        }
        Command::Solve { input, mode, eps, max_cut_rounds, tol, timings } => {
            let inst = read_instance(&input)?;
            let mode = match mode {
                Mode::Basic => SolveMode::Basic,
                Mode::Rect => SolveMode::Rect,
            };
            let report = run_solve(&inst, mode, &loop_config(eps, max_cut_rounds, tol, exec), timings)?;
            eprintln!(
                "basic LP {:.6}, final LP {:.6}, {} cuts",
                report.lp_basic_value,
                report.lp_rect_value.unwrap_or(report.lp_basic_value),
                report.cuts_added
            );
            Ok(Output::Json(to_value(&report)))
        }
        Command::Round { input, eps, trace, max_cut_rounds, timings } => {
            let inst = read_instance(&input)?;
            let cfg = loop_config(eps, max_cut_rounds, LoopConfig::default().tol, exec);
            let (report, tr) = run_round(&inst, &cfg, timings)?;
            if let Some(path) = trace {
                std::fs::write(&path, serde_json::to_string_pretty(&tr).expect("trace serialises") + "\n")?;
            }
            eprintln!(
                "rounded: cost {}, {} openings (bound {})",
                report.integral_cost.unwrap_or_default(),
                report.openings.unwrap_or_default(),
                report.bound.unwrap_or_default()
            );
            Ok(Output::Json(to_value(&report)))
        }
        Command::Exact { input, k, soft } => {
            let inst = read_instance(&input)?;
            let res = exact_opt_with(&inst, k, soft, exec)?;
            eprintln!("exact optimum {} over {} openings", res.best_cost, res.enumerated);
            let mut value = to_value(&res);
            value["k"] = json!(k);
            value["soft"] = json!(soft);
            Ok(Output::Json(value))
        }
        Command::Reduce { hard, soft_solution } => {
            let inst = read_instance(&hard)?;
            let soft = read_soft_solution(&soft_solution)?;
            let base = base_assignment(&inst)?;
            let report = soft_to_hard(&inst, &soft, &base)?;
            eprintln!(
                "{} locations opened, cost {} <= C + 2C' = {}",
                report.opened.len(),
                report.solution.cost,
                report.bound
            );
            Ok(Output::Json(to_value(&report)))
        }
        Command::Gapdemo { u, seed, timings } => {
            let report = gapdemo(u, seed, exec, timings)?;
            eprintln!(
                "groups: basic {:.6}, rect {:.6}, exact {}",
                report.groups.lp_basic_value, report.groups.lp_rect_value, report.groups.exact_opt
            );
            Ok(Output::Json(to_value(&report)))
        }
        Command::Bench { dir, eps } => {
            let items = instance_files(&dir)?;
            let mut csv = String::from(BENCH_HEADER);
            csv.push('\n');
            for (row, (name, _)) in bench_all(&items, eps, exec).into_iter().zip(&items) {
                let row = row.map_err(|e| annotate(e, name))?;
                csv.push_str(&row.to_csv());
                csv.push('\n');
            }
            eprintln!("benchmarked {} instances", items.len());
            Ok(Output::Text(csv))
        }
    }
}

fn annotate(e: Error, name: &str) -> Error {
    match e {
        Error::Infeasible(m) => Error::Infeasible(format!("{name}: {m}")),
        Error::Internal(m) => Error::Internal(format!("{name}: {m}")),
        Error::Precondition(m) => Error::Precondition(format!("{name}: {m}")),
        other => other,
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 2,
        Error::CutRoundLimit { .. } => 3,
        _ => 1,
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = write!(std::io::stdout().lock(), "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string(), 1),
    };
    let text = match run(cli) {
        Ok(Output::Json(v)) => serde_json::to_string_pretty(&v).expect("json") + "\n",
        Ok(Output::Text(t)) => t,
        Err(e) => return fail(e.kind(), e.to_string(), exit_code(&e)),
    };
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    ExitCode::SUCCESS
}
