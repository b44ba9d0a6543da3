use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use roademd::dpdp::{critical_rate, predicted_service_time, simulate, Scenario};
use roademd::emd_approx::{build_approx_network, emd_bounds_prepared, emd_path_prepared, tessellate};
use roademd::emd_exact::{emd_exact, interpret_flow, prepare, Prepared};
use roademd::flow::{min_cost_flow_linear, ConvexSolverOptions, FlowNetwork};
use roademd::instance::Instance;

const AFTER_EMD: &str = "\
Flow dump columns (--dump-flow):
  edge    edge index in the solved network
  tail    label of the tail vertex
  head    label of the head vertex
  flow    flow on the edge
  cost    cost incurred on the edge";

const AFTER_CONVERGENCE: &str = "\
Output columns:
  epsilon          tessellation resolution
  w_lower          lower bound
  w_upper          upper bound
  w_path           path network value
  exact            exact EMD (same on every row)
  gap              w_upper - w_lower
  exact_vertices   vertices of the exact network
  exact_edges      edges of the exact network
  bounds_vertices  vertices of the bipartite cell network
  bounds_edges     edges of the bipartite cell network
  path_vertices    vertices of the path network
  path_edges       edges of the path network";

const AFTER_SIMULATE: &str = "\
Time series columns (--out):
  time         event time
  outstanding  demands arrived but not yet delivered, after the event";

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 invalid input, 2 infeasible problem or unequal masses,
3 solver tolerance not reached.";

#[derive(Parser)]
#[command(name = "roademd", version, about = "Earth Mover's Distance on road networks", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an instance file and check every invariant.
    Validate { path: PathBuf },
    /// Distance between the source and target measures.
    #[command(after_help = AFTER_EMD)]
    Emd(EmdArgs),
    /// Bounds and path values over a range of resolutions, as CSV.
    #[command(after_help = AFTER_CONVERGENCE)]
    Convergence(ConvergenceArgs),
    /// Simulate the pickup-and-delivery system of the instance pmf.
    #[command(after_help = AFTER_SIMULATE)]
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Tolerance {
    /// Duality gap target of the convex solver.
    #[arg(long, env = "ROADEMD_TOL", default_value_t = 1e-7)]
    tol: f64,
    /// Iteration cap of the convex solver.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

impl Tolerance {
    fn options(&self) -> Result<ConvexSolverOptions, Failure> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Failure::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(ConvexSolverOptions { tol: self.tol, max_iter: self.max_iter })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Lower,
    Upper,
    Path,
}

#[derive(Args)]
struct EmdArgs {
    path: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    /// Cell length bound for the approximate modes.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[command(flatten)]
    tol: Tolerance,
    /// Write the optimal edge flows to this CSV file.
    #[arg(long)]
    dump_flow: Option<PathBuf>,
    /// Also print how each road splits its mass and the routes used (exact mode).
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct ConvergenceArgs {
    path: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.25, 0.1, 0.05, 0.02])]
    epsilons: Vec<f64>,
    #[command(flatten)]
    tol: Tolerance,
    /// CSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    path: PathBuf,
    /// Number of vehicles.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Arrival rate.
    #[arg(long, group = "rate")]
    lambda: Option<f64>,
    /// Arrival rate as a multiple of the critical rate.
    #[arg(long, group = "rate")]
    lambda_mult: Option<f64>,
    /// Arrival rate as the critical rate plus this offset.
    #[arg(long, group = "rate", allow_negative_numbers = true)]
    lambda_offset: Option<f64>,
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tol: Tolerance,
    /// Write the (time, outstanding) series to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<roademd::Error> for Failure {
    fn from(e: roademd::Error) -> Self {
        use roademd::Error::*;
        let code = match e {
            UnequalMass { .. } | Infeasible(_) | Unbalanced(_) => 2,
            NotConverged { .. } | Unparted(_) | Inadmissible(_) | OutsideDomain { .. } => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::invalid(format!("writing csv: {e}"))
    }
}

/// `x` with 9 significant digits.
fn fmt9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let mag: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..15).contains(&mag) {
        format!("{:.*}", (8 - mag).max(0) as usize, x)
    } else {
        sci
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    Instance::parse(&text).map_err(|e| Failure { message: format!("{}: {e}", path.display()), ..e.into() })
}

fn writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn std::io::Write>>, Failure> {
    let sink: Box<dyn std::io::Write> = match path {
        Some(p) => Box::new(
            std::fs::File::create(p).map_err(|e| Failure::invalid(format!("cannot create {}: {e}", p.display())))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn check_epsilon(eps: f64) -> Result<(), Failure> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(roademd::Error::InvalidEpsilon(eps).into())
    }
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let inst = load(path)?;
    println!("OK {}", path.display());
    println!("vertices: {}", inst.map.num_vertices());
    println!(
        "roads: {} (total length {})",
        inst.map.num_roads(),
        fmt9(inst.map.roads().iter().map(|r| r.length).sum())
    );
    for (name, m) in [("source", &inst.source), ("target", &inst.target)] {
        match m {
            Some(m) => println!("{name}: mass {} on {} roads", fmt9(m.total()), m.iter().count()),
            None => println!("{name}: absent"),
        }
    }
    match &inst.pmf {
        Some(p) => println!("pmf: {} entries", p.entries().len()),
        None => println!("pmf: absent"),
    }
    Ok(())
}

fn dump_flow(path: &Path, net: &FlowNetwork, flow: &[f64], cost: impl Fn(usize, f64) -> f64) -> Result<(), Failure> {
    let mut w = writer(Some(path))?;
    w.write_record(["edge", "tail", "head", "flow", "cost"])?;
    for (e, &x) in flow.iter().enumerate() {
        let edge = net.edge(e);
        w.write_record([
            e.to_string(),
            net.label(edge.tail).into(),
            net.label(edge.head).into(),
            fmt9(x),
            fmt9(cost(e, x)),
        ])?;
    }
    w.flush().map_err(|e| Failure::invalid(format!("writing {}: {e}", path.display())))
}

fn cmd_emd(a: &EmdArgs) -> Result<(), Failure> {
    let inst = load(&a.path)?;
    let (src, dst) = inst.measures()?;
    let opts = a.tol.options()?;
    match a.mode {
        Mode::Exact => {
            let r = emd_exact(&inst.map, src, dst, &opts)?;
            println!("{}", fmt9(r.value));
            eprintln!(
                "exact: {} vertices, {} edges, {} iterations, gap {}",
                r.network.net.num_vertices(),
                r.network.net.num_edges(),
                r.iterations,
                fmt9(r.gap)
            );
            if a.explain {
                let report = interpret_flow(&r.network, &r.flow)?;
                for s in &report.splits {
                    let road = &r.prepared.map.road(s.road).id;
                    println!(
                        "road {road}: {} via tail, {} via head, split at {}",
                        fmt9(s.via_tail),
                        fmt9(s.via_head),
                        fmt9(s.split)
                    );
                }
                for route in &report.routes {
                    println!("{} along {}", fmt9(route.volume), route.path.join(" > "));
                }
            }
            if let Some(out) = &a.dump_flow {
                dump_flow(out, &r.network.net, &r.flow, |e, x| r.network.costs[e].value(x))?;
            }
        }
        Mode::Lower | Mode::Upper => {
            check_epsilon(a.epsilon)?;
            let p = prepare(&inst.map, src, dst)?;
            let tess = tessellate(&p.map, a.epsilon)?;
            let an = build_approx_network(&p.map, &p.src, &p.dst, &tess)?;
            let weights = if matches!(a.mode, Mode::Lower) { &an.lower } else { &an.upper };
            let sol = min_cost_flow_linear(&an.net, weights)?;
            println!("{}", fmt9(sol.cost));
            eprintln!(
                "cells: {}, network: {} vertices, {} edges",
                tess.cells.len(),
                an.net.num_vertices(),
                an.net.num_edges()
            );
            if let Some(out) = &a.dump_flow {
                dump_flow(out, &an.net, &sol.flow, |e, x| weights[e] * x)?;
            }
        }
        Mode::Path => {
            check_epsilon(a.epsilon)?;
            let p = prepare(&inst.map, src, dst)?;
            let s = emd_path_prepared(&p, a.epsilon)?;
            println!("{}", fmt9(s.value));
            eprintln!(
                "path network: {} vertices, {} edges, {} devices parted",
                s.network.net.num_vertices(),
                s.network.net.num_edges(),
                s.partings.len()
            );
            if let Some(out) = &a.dump_flow {
                dump_flow(out, &s.network.net, &s.flow, |e, x| s.network.weights[e] * x)?;
            }
        }
    }
    Ok(())
}

struct Row {
    eps: f64,
    lower: f64,
    upper: f64,
    path: f64,
    bounds_size: (usize, usize),
    path_size: (usize, usize),
}

fn convergence_row(p: &Prepared, eps: f64) -> Result<Row, Failure> {
    let b = emd_bounds_prepared(p, eps)?;
    let s = emd_path_prepared(p, eps)?;
    Ok(Row {
        eps,
        lower: b.lower,
        upper: b.upper,
        path: s.value,
        bounds_size: (b.vertices, b.edges),
        path_size: (s.network.net.num_vertices(), s.network.net.num_edges()),
    })
}

fn cmd_convergence(a: &ConvergenceArgs) -> Result<(), Failure> {
    let inst = load(&a.path)?;
    let (src, dst) = inst.measures()?;
    if a.epsilons.is_empty() {
        return Err(Failure::invalid("no epsilons given"));
    }
    for &eps in &a.epsilons {
        check_epsilon(eps)?;
    }
    let exact = emd_exact(&inst.map, src, dst, &a.tol.options()?)?;
    let p = &exact.prepared;
    let rows = a.epsilons.par_iter().map(|&eps| convergence_row(p, eps)).collect::<Result<Vec<_>, _>>()?;
    let exact_size = (exact.network.net.num_vertices(), exact.network.net.num_edges());

    let mut w = writer(a.out.as_deref())?;
    w.write_record([
        "epsilon",
        "w_lower",
        "w_upper",
        "w_path",
        "exact",
        "gap",
        "exact_vertices",
        "exact_edges",
        "bounds_vertices",
        "bounds_edges",
        "path_vertices",
        "path_edges",
    ])?;
    for r in rows {
        w.write_record([
            fmt9(r.eps),
            fmt9(r.lower),
            fmt9(r.upper),
            fmt9(r.path),
            fmt9(exact.value),
            fmt9(r.upper - r.lower),
            exact_size.0.to_string(),
            exact_size.1.to_string(),
            r.bounds_size.0.to_string(),
            r.bounds_size.1.to_string(),
            r.path_size.0.to_string(),
            r.path_size.1.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Failure::invalid(format!("writing csv: {e}")))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let inst = load(&a.path)?;
    let pmf = inst.demand_pmf()?.clone();
    if a.m == 0 {
        return Err(Failure::invalid("need at least one vehicle"));
    }
    let pred = predicted_service_time(&inst.map, &pmf, &a.tol.options()?)?;
    let lambda_star = critical_rate(pred.service_time, a.m);
    let rate = match (a.lambda, a.lambda_mult, a.lambda_offset) {
        (Some(l), _, _) => l,
        (_, Some(x), _) => x * lambda_star,
        (_, _, Some(d)) => lambda_star + d,
        _ => lambda_star,
    };
    let sc = Scenario { map: inst.map, pmf, vehicles: a.m, rate, horizon: a.horizon, seed: a.seed };
    let res = simulate(&sc)?;

    if let Some(out) = &a.out {
        let mut w = writer(Some(out))?;
        w.write_record(["time", "outstanding"])?;
        for &(t, n) in &res.series {
            w.write_record([fmt9(t), n.to_string()])?;
        }
        w.flush().map_err(|e| Failure::invalid(format!("writing {}: {e}", out.display())))?;
    }

    let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), fmt9);
    println!("loaded travel per demand E[D]: {}", fmt9(pred.loaded));
    println!("empty travel per demand W: {}", fmt9(pred.empty));
    println!("predicted service time: {}", fmt9(pred.service_time));
    println!("critical rate: {}", fmt9(lambda_star));
    println!("arrival rate: {}", fmt9(rate));
    println!("vehicles: {}", a.m);
    println!("horizon: {}", fmt9(a.horizon));
    println!("arrived: {}", res.arrived);
    println!("completed: {}", res.completed);
    println!("outstanding at horizon: {}", res.outstanding());
    println!("max outstanding: {}", res.max_outstanding());
    println!("completion rate S_T/T: {}", fmt9(res.completion_rate()));
    println!(
        "backlog growth (outstanding/T): {}",
        fmt9(if a.horizon > 0.0 { res.outstanding() as f64 / a.horizon } else { 0.0 })
    );
    println!("renewals: {}", res.renewals.len());
    println!("last renewal: {}", opt(res.renewals.last().copied()));
    println!("mean service time: {}", opt(res.mean_service_time()));
    println!("service time over completed batches: {}", opt(res.batch_service_time()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { path } => cmd_validate(path),
        Command::Emd(a) => cmd_emd(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
