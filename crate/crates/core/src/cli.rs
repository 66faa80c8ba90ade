//! Command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 bad input, 3 size guard,
//! 4 every grid point infeasible.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{self, BoundReport};
use crate::error::{Error, Result};
use crate::fading::FadingModel;
use crate::powerchain::{self, ChainDecomposition, PowerChain};
use crate::simulate::{self, Sampling, SweepConfig, SweepRecord, DEFAULT_INNER, DEFAULT_OUTER};
use crate::topology::{GeneratorSpec, Topology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SIZE_GUARD: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "fadenet", version, about = "High-SNR analysis of non-coherent fading networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Longest power chain of a topology
    Kappa(TopologyArgs),
    /// Chain and blocks induced by an ordering permutation
    Decompose {
        #[command(flatten)]
        topology: TopologyArgs,
        /// Comma-separated permutation of 1..n_t, strongest first
        #[arg(long, value_delimiter = ',', required = true)]
        perm: Vec<usize>,
    },
    /// Monte Carlo rates and analytic bounds over an SNR grid
    Sweep(RunArgs),
    /// Analytic bounds over an SNR grid
    Bounds(RunArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TopologyArgs {
    /// Topology JSON file
    #[arg(long)]
    pub topo: Option<PathBuf>,
    /// Generated topology, e.g. full:3,3 or random:5,5,0.5,7
    #[arg(long)]
    pub gen: Option<GeneratorSpec>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub topology: TopologyArgs,
    /// Fading model JSON file (default: IID CN(0,1) on every non-zero entry)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Base-10 exponents START,STOP,POINTS of a log-spaced SNR grid
    #[arg(long)]
    pub grid: GridSpec,
    #[arg(long, default_value_t = DEFAULT_OUTER)]
    pub outer: usize,
    #[arg(long, default_value_t = DEFAULT_INNER)]
    pub inner: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (default: standard output)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write two-column `loglog_E,value` data here
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `START,STOP,POINTS` in base-10 exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("grid `{s}` must be START,STOP,POINTS")));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|e| Error::Parse(format!("grid `{s}`: {e}")));
        let g = GridSpec {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            points: parts[2].parse().map_err(|e| Error::Parse(format!("grid `{s}`: {e}")))?,
        };
        if g.points == 0 || !g.start.is_finite() || !g.stop.is_finite() {
            return Err(Error::Parse(format!("grid `{s}` needs finite exponents and at least one point")));
        }
        if g.points > 1 && !(g.start < g.stop) {
            return Err(Error::Parse(format!("grid `{s}` must be strictly increasing")));
        }
        Ok(g)
    }
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![10f64.powf(self.start)];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| 10f64.powf(self.start + step * i as f64)).collect()
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SizeGuard { .. } => EXIT_SIZE_GUARD,
        Error::InfeasibleAllocation { .. } => EXIT_INFEASIBLE,
        Error::NonConvergence(_) | Error::Fit(_) => EXIT_FAILURE,
        _ => EXIT_INPUT,
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Kappa(t) => cmd_kappa(&t),
        Command::Decompose { topology, perm } => cmd_decompose(&topology, &perm),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Bounds(a) => cmd_bounds(&a),
    }
}

fn load_topology(args: &TopologyArgs) -> Result<Topology> {
    match (&args.topo, &args.gen) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Topology::from_json(&text)
        }
        (None, Some(spec)) => Topology::generate(spec),
        _ => Err(Error::InvalidParameter("give exactly one of --topo and --gen".into())),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct KappaOutput {
    kappa_star: usize,
    chain: Vec<usize>,
    witnesses: Vec<usize>,
    removed_transmitters: Vec<usize>,
    removed_receivers: Vec<usize>,
}

fn cmd_kappa(args: &TopologyArgs) -> Result<i32> {
    let topo = load_topology(args)?;
    let pruned = topo.prune();
    let (kappa, chain) = if pruned.degenerate {
        (0, None)
    } else {
        let (k, c) = powerchain::longest_chain(&pruned.topology)?;
        (k, Some(c.remap(&pruned.transmitter_map, &pruned.receiver_map)))
    };
    print_json(&KappaOutput {
        kappa_star: kappa,
        chain: chain.as_ref().map_or_else(Vec::new, |c| c.transmitters().to_vec()),
        witnesses: chain.as_ref().map_or_else(Vec::new, |c| c.witnesses().to_vec()),
        removed_transmitters: pruned.removed_transmitters,
        removed_receivers: pruned.removed_receivers,
    })?;
    Ok(EXIT_OK)
}

fn cmd_decompose(args: &TopologyArgs, perm: &[usize]) -> Result<i32> {
    let topo = load_topology(args)?;
    let dec: ChainDecomposition = powerchain::decompose(&topo, perm)?;
    print_json(&dec)?;
    Ok(EXIT_OK)
}

/// Topology and model for the grid commands. Without a model file the
/// topology is pruned and given IID `CN(0, 1)` fading; a model file must
/// describe an already pruned topology.
fn load_channel(args: &RunArgs) -> Result<(Topology, FadingModel)> {
    let topo = load_topology(&args.topology)?;
    match &args.model {
        Some(path) => {
            topo.require_pruned()?;
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let model = FadingModel::from_json(topo.clone(), &text)?;
            Ok((topo, model))
        }
        None => {
            let pruned = topo.prune();
            if pruned.degenerate {
                return Err(Error::Degenerate);
            }
            let model = FadingModel::rayleigh(pruned.topology.clone())?;
            Ok((pruned.topology, model))
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_plot(path: &PathBuf, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["loglog_E", "value"])?;
    for &(e, v) in points {
        w.serialize((e.ln().ln(), v))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<i32> {
    let seed = args
        .seed
        .ok_or_else(|| Error::InvalidParameter("sweep is stochastic and requires --seed".into()))?;
    let (topo, model) = load_channel(args)?;
    let cfg = SweepConfig {
        sampling: Sampling { n_outer: args.outer, m_inner: args.inner },
        seed,
        workers: args.workers,
        bounds_only: false,
    };
    let records = simulate::snr_sweep(&topo, &model, &args.grid.values(), &cfg)?;
    emit_records(args, &records, args.format.unwrap_or(Format::Csv))?;
    let points = simulate::mc_points(&records);
    if let Some(p) = &args.plot {
        write_plot(p, &points)?;
    }
    let kappa = records.first().map_or(0, |r| r.kappa_star);
    let summary = match simulate::fit_loglog_slope(&points) {
        Ok(fit) => format!(
            "kappa_star={kappa} slope={:.4} intercept={:.4} residual={:.4}",
            fit.slope, fit.intercept, fit.residual
        ),
        Err(e) => format!("kappa_star={kappa} slope=unavailable ({e})"),
    };
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(if records.iter().any(|r| r.feasible) { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn emit_records(args: &RunArgs, records: &[SweepRecord], format: Format) -> Result<()> {
    let out = output(&args.out)?;
    match format {
        Format::Csv => simulate::write_csv(records, out),
        Format::Json => simulate::write_json(records, out),
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum BoundsEntry {
    Report(Box<BoundReport>),
    Infeasible { snr: f64, error: String },
}

fn cmd_bounds(args: &RunArgs) -> Result<i32> {
    let (topo, model) = load_channel(args)?;
    let grid = args.grid.values();
    if args.format == Some(Format::Csv) {
        let mut cfg = SweepConfig::new(args.seed.unwrap_or(0));
        cfg.bounds_only = true;
        cfg.workers = args.workers;
        let records = simulate::snr_sweep(&topo, &model, &grid, &cfg)?;
        emit_records(args, &records, Format::Csv)?;
        if let Some(p) = &args.plot {
            write_plot(p, &simulate::lower_points(&records))?;
        }
        return Ok(if records.iter().any(|r| r.feasible) { EXIT_OK } else { EXIT_INFEASIBLE });
    }
    let (_, chain): (usize, PowerChain) = powerchain::longest_chain(&topo)?;
    let mut entries = Vec::with_capacity(grid.len());
    let mut points = Vec::new();
    for &snr in &grid {
        match bounds::bound_report(&topo, &chain, &model, snr) {
            Ok(r) => {
                points.push((snr, r.lower_bound));
                entries.push(BoundsEntry::Report(Box::new(r)));
            }
            Err(e @ Error::InfeasibleAllocation { .. }) => {
                entries.push(BoundsEntry::Infeasible { snr, error: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    let mut out = output(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &entries)?;
    writeln!(out)?;
    out.flush()?;
    if let Some(p) = &args.plot {
        write_plot(p, &points)?;
    }
    Ok(if points.is_empty() { EXIT_INFEASIBLE } else { EXIT_OK })
}
