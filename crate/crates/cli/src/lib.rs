//! The `pistack` command line: validate, run, routes, oracle, report.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use pistack_core::ids::{Minutes, NodeId};
use pistack_core::metrics::summarize;
use pistack_core::routing::{
    oracle, pareto_paths, route_cost, shortest_path_scalarized, CriteriaWeights, LogisticsGraph, Route, RoutingError,
};
use pistack_core::scenario::{parse_scenario, validate_scenario, Scenario};
use pistack_core::sim::{run, RunOptions};
use pistack_core::trace_io::{emit_trace, parse_trace};

/// Exit codes. Scripts depend on these; never renumber.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID: i32 = 1;
    pub const ABORTED: i32 = 2;
    pub const IO: i32 = 3;
}

/// Largest graph the brute-force oracle will enumerate.
pub const ORACLE_MAX_NODES: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "pistack", version, about = "Seven-layer container logistics simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and cross-check a scenario; exit 1 on any error finding.
    Validate {
        scenario: PathBuf,
    },
    /// Simulate a scenario up to its horizon.
    Run(RunArgs),
    /// Print the best route between two nodes, or the Pareto front.
    Routes(RouteArgs),
    /// Compare the router against exhaustive enumeration (graphs of at most 12 nodes).
    Oracle(OracleArgs),
    /// Recompute the metrics report from a trace file alone.
    Report {
        trace: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    /// Seed for randomized fault times [default: the scenario's params.seed]
    #[arg(long, env = "PI_STACK_SEED", hide_env_values = true)]
    pub seed: Option<u64>,
    /// Events strictly before this minute run [default: the scenario's params.horizon]
    #[arg(long)]
    pub horizon: Option<Minutes>,
    /// Write the JSON Lines trace here
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Write the JSON metrics report here
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Ignore the scenario's fault plan (baseline for paired runs)
    #[arg(long)]
    pub no_faults: bool,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    /// Criteria weights time,cost,risk [default: the scenario's params.weights]
    #[arg(long, value_name = "T,C,R", value_parser = parse_weights)]
    pub weights: Option<CriteriaWeights>,
    /// Print every non-dominated route instead of the single best one
    #[arg(long)]
    pub pareto: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub scenario: PathBuf,
    /// Source node [default: every node]
    #[arg(long)]
    pub from: Option<String>,
    /// Destination node [default: every node]
    #[arg(long)]
    pub to: Option<String>,
    /// Criteria weights time,cost,risk [default: the scenario's params.weights]
    #[arg(long, value_name = "T,C,R", value_parser = parse_weights)]
    pub weights: Option<CriteriaWeights>,
}

pub fn parse_weights(s: &str) -> Result<CriteriaWeights, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [t, c, r] = parts.as_slice() else {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    };
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    CriteriaWeights::new(num(t)?, num(c)?, num(r)?).map_err(|e| e.to_string())
}

/// The router the oracle checks. Swappable so tests can plant a broken one.
pub type Router = dyn Fn(&LogisticsGraph, &NodeId, &NodeId, &CriteriaWeights, bool) -> Result<Route, RoutingError>;

pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::INVALID } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    dispatch(cli.command, out, err)
}

pub fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match command {
        Command::Validate { scenario } => cmd_validate(&scenario, out),
        Command::Run(a) => cmd_run(&a, out),
        Command::Routes(a) => cmd_routes(&a, out),
        Command::Oracle(a) => cmd_oracle(&a, &shortest_path_scalarized, out),
        Command::Report { trace } => cmd_report(&trace, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

/// A command that could not finish: exit code plus what to tell the user.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: exit::INVALID,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: &io::Error) -> Self {
        Self {
            code: exit::IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

type CmdResult = Result<i32, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, &e))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = read(path)?;
    parse_scenario(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn put(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure {
        code: exit::IO,
        message: format!("stdout: {e}"),
    })
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> CmdResult {
    let s = load_scenario(path)?;
    let report = validate_scenario(&s);
    put(out, &report.to_string())?;
    Ok(if report.passed() { exit::OK } else { exit::INVALID })
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> CmdResult {
    let s = load_scenario(&a.scenario)?;
    let report = validate_scenario(&s);
    if !report.passed() {
        put(out, &report.to_string())?;
        return Ok(exit::INVALID);
    }
    let opts = RunOptions {
        seed: a.seed,
        horizon: a.horizon,
        no_faults: a.no_faults,
    };
    let result = run(&s, &opts);
    if let Some(path) = &a.trace {
        let file = fs::File::create(path).map_err(|e| Failure::io(path, &e))?;
        let mut w = io::BufWriter::new(file);
        emit_trace(&result.trace, &mut w).map_err(|e| Failure::io(path, &e))?;
    }
    if let Some(e) = &result.aborted {
        return Err(Failure {
            code: exit::ABORTED,
            message: format!("run aborted at t={}: {e}", result.clock),
        });
    }
    let metrics = summarize(&result.trace).map_err(|e| Failure {
        code: exit::ABORTED,
        message: format!("run produced an unreadable trace: {e}"),
    })?;
    if let Some(path) = &a.report {
        fs::write(path, metrics.to_json()).map_err(|e| Failure::io(path, &e))?;
    }
    put(out, &metrics.to_table())?;
    Ok(exit::OK)
}

fn weights_or_default(w: Option<CriteriaWeights>, s: &Scenario) -> CriteriaWeights {
    w.unwrap_or(s.params.weights)
}

fn graph_of(s: &Scenario) -> Result<LogisticsGraph, Failure> {
    s.build_graph().map_err(|e| Failure::invalid(e.to_string()))
}

fn node_arg(g: &LogisticsGraph, id: &str) -> Result<NodeId, Failure> {
    let n = NodeId::new(id);
    if g.contains(&n) {
        Ok(n)
    } else {
        Err(Failure::invalid(format!("unresolved_reference: node {id}")))
    }
}

/// One line per hop, then totals; numbers print in shortest round-trip form.
pub fn format_route(r: &Route, w: &CriteriaWeights) -> String {
    let mut s = String::new();
    let names: Vec<String> = r.nodes().iter().map(ToString::to_string).collect();
    let _ = writeln!(s, "route {}", names.join(" -> "));
    for h in &r.hops {
        let mode = format!("{:?}", h.mode).to_lowercase();
        let _ = writeln!(s, "  {} -> {} {mode} time {} cost {} risk {}", h.edge.from, h.edge.to, h.time(), h.cost(), h.edge.risk);
    }
    let _ = writeln!(
        s,
        "  total time {} cost {} risk {} score {}",
        r.total_time,
        r.total_cost,
        r.total_risk,
        route_cost(r, w)
    );
    s
}

pub fn cmd_routes(a: &RouteArgs, out: &mut dyn Write) -> CmdResult {
    let s = load_scenario(&a.scenario)?;
    let g = graph_of(&s)?;
    let (src, dst) = (node_arg(&g, &a.from)?, node_arg(&g, &a.to)?);
    let w = weights_or_default(a.weights, &s);
    let expedite = s.params.allow_expedite;
    let routes = if a.pareto {
        pareto_paths(&g, &src, &dst, usize::MAX, &w, expedite, s.params.pareto_bound)
    } else {
        shortest_path_scalarized(&g, &src, &dst, &w, expedite).map(|r| vec![r])
    };
    match routes {
        Ok(rs) => {
            for r in &rs {
                put(out, &format_route(r, &w))?;
            }
            Ok(exit::OK)
        }
        Err(RoutingError::NoPath { .. }) => {
            put(out, &format!("UNREACHABLE {src} -> {dst}\n"))?;
            Ok(exit::OK)
        }
        Err(e) => Err(Failure::invalid(e.to_string())),
    }
}

pub fn cmd_oracle(a: &OracleArgs, router: &Router, out: &mut dyn Write) -> CmdResult {
    let s = load_scenario(&a.scenario)?;
    let g = graph_of(&s)?;
    if g.node_count() > ORACLE_MAX_NODES {
        return Err(Failure::invalid(format!(
            "instance_too_large: {} nodes > {ORACLE_MAX_NODES}",
            g.node_count()
        )));
    }
    let w = weights_or_default(a.weights, &s);
    let expedite = s.params.allow_expedite;
    let all: Vec<NodeId> = g.nodes().map(|n| n.node_id.clone()).collect();
    let pick = |arg: &Option<String>| -> Result<Vec<NodeId>, Failure> {
        match arg {
            Some(id) => Ok(vec![node_arg(&g, id)?]),
            None => Ok(all.clone()),
        }
    };
    let (sources, targets) = (pick(&a.from)?, pick(&a.to)?);
    let mut disagreements = 0;
    for src in &sources {
        for dst in targets.iter().filter(|d| *d != src) {
            let truth = oracle::best_route(&g, src, dst, &w, expedite, ORACLE_MAX_NODES);
            let got = router(&g, src, dst, &w, expedite);
            let line = match (&truth, &got) {
                (Ok(t), Ok(r)) if route_cost(t, &w) == route_cost(r, &w) => {
                    format!("AGREE {src} -> {dst} score {}\n", route_cost(t, &w))
                }
                (Err(RoutingError::NoPath { .. }), Err(RoutingError::NoPath { .. })) => {
                    format!("AGREE {src} -> {dst} UNREACHABLE\n")
                }
                _ => {
                    disagreements += 1;
                    let show = |r: &Result<Route, RoutingError>| match r {
                        Ok(r) => format!("score {}", route_cost(r, &w)),
                        Err(e) => e.to_string(),
                    };
                    format!("DISAGREE {src} -> {dst} oracle {} router {}\n", show(&truth), show(&got))
                }
            };
            put(out, &line)?;
        }
    }
    Ok(if disagreements == 0 { exit::OK } else { exit::ABORTED })
}

pub fn cmd_report(path: &Path, out: &mut dyn Write) -> CmdResult {
    let text = read(path)?;
    let trace = parse_trace(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let m = summarize(&trace).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    put(out, &m.to_table())?;
    put(out, "\n")?;
    put(out, &m.to_json())?;
    Ok(exit::OK)
}
