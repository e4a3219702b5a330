//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis;
use crate::constructive::run_protocol;
use crate::error::{invalid, Error, Result};
use crate::geometry::PointSet;
use crate::harness::{self, ExperimentConfig, ExperimentRecord, Mode, RadiusSpec};
use crate::irrigation::IrrigationGraph;
use crate::rgg::NeighborIndex;
use crate::theory::{self, TheoryParams, DEFAULT_EPS};

#[derive(Debug, Parser)]
#[command(name = "bluegraph", version, about = "Random irrigation graphs on the unit torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the budget constants and thresholds as JSON.
    Theory(Opts),
    /// Single trial: connectivity of one sample, or a protocol report with --delta.
    Connect(Opts),
    /// Connectivity probability for each c in --c-list.
    SweepC(Opts),
    /// Connectivity probability for each radius in --r-list or --penrose-list.
    SweepR(Opts),
    /// Frequency of isolated (c+1)-cliques for each c in --c-list.
    CliqueScan(Opts),
    /// Ball and cube regularity audit.
    Regularity(Opts),
    /// Batch runs of the four-phase growth protocol.
    Protocol(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Explicit connection radius.
    #[arg(long)]
    pub r: Option<f64>,
    /// Radius as a multiple of the connectivity radius of G_n(r).
    #[arg(long)]
    pub penrose: Option<f64>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub c_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub r_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub penrose_list: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

impl Opts {
    fn n_or(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    fn require_n(&self) -> Result<usize> {
        self.n.ok_or_else(|| Error::InvalidArgument("--n is required".into()))
    }

    /// Exactly one of --r, --delta, --penrose.
    fn radius_spec(&self) -> Result<RadiusSpec> {
        match (self.r, self.delta, self.penrose) {
            (Some(r), None, None) => Ok(RadiusSpec::Explicit { r }),
            (None, Some(delta), None) => Ok(RadiusSpec::Delta { delta, gamma: self.gamma }),
            (None, None, Some(multiple)) => Ok(RadiusSpec::Penrose { multiple }),
            (None, None, None) => invalid("one of --r, --delta or --penrose is required"),
            _ => invalid("--r, --delta and --penrose are mutually exclusive"),
        }
    }

    fn c_values(&self) -> Result<Vec<usize>> {
        match (&self.c_list, self.c) {
            (Some(_), Some(_)) => invalid("--c and --c-list are mutually exclusive"),
            (Some(list), None) => {
                if list.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("--c-list must be strictly ascending");
                }
                Ok(list.clone())
            }
            (None, Some(c)) => Ok(vec![c]),
            (None, None) => Ok(Vec::new()),
        }
    }

    fn config(&self, mode: Mode, radius_spec: RadiusSpec) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(mode, self.require_n()?, self.d, radius_spec);
        cfg.c_values = self.c_values()?;
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        cfg.eps = self.eps;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct TheoryOutput {
    delta: f64,
    eps: f64,
    d: usize,
    n: usize,
    k1: usize,
    k2: usize,
    k3: usize,
    c_total: usize,
    alpha_d: f64,
    p_d: f64,
    eta_d: f64,
    cstar: Option<f64>,
    penrose_radius: Option<f64>,
    lower_bound_c: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ConnectOutput {
    n: usize,
    d: usize,
    r: f64,
    c: usize,
    seed: u64,
    connected: bool,
    components: usize,
    largest_component: usize,
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(opts: &Opts, value: &T) -> Result<()> {
    let mut w = open_out(&opts.out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn emit_record(opts: &Opts, rec: &ExperimentRecord) -> Result<()> {
    let mut w = open_out(&opts.out)?;
    match opts.format {
        Format::Csv => rec.write_csv(&mut w)?,
        Format::Json => rec.write_json(&mut w)?,
    }
    w.flush()?;
    eprintln!("wall time: {:.3} s", rec.wall_time.as_secs_f64());
    Ok(())
}

fn theory_cmd(opts: &Opts) -> Result<()> {
    let n = opts.n_or(10_000);
    let delta = opts.delta.unwrap_or(0.5);
    let params = TheoryParams::new(n, opts.d, delta, opts.gamma, opts.eps)?;
    let plan = theory::budget_plan(&params)?;
    let lower = theory::lower_bound_c(n, params.radius(), opts.d, opts.eps).ok().and_then(|l| l.c);
    let out = TheoryOutput {
        delta,
        eps: opts.eps,
        d: opts.d,
        n,
        k1: plan.k1,
        k2: plan.k2,
        k3: plan.k3,
        c_total: plan.c_total,
        alpha_d: plan.alpha_d,
        p_d: plan.p_d,
        eta_d: plan.eta_d,
        cstar: theory::cstar(n).ok(),
        penrose_radius: theory::penrose_radius(n, opts.d).ok(),
        lower_bound_c: lower,
    };
    emit_json(opts, &out)
}

fn connect_cmd(opts: &Opts) -> Result<()> {
    let n = opts.require_n()?;
    if opts.delta.is_some() && opts.c.is_none() {
        let delta = opts.delta.unwrap_or_default();
        let params = TheoryParams::new(n, opts.d, delta, opts.gamma, opts.eps)?;
        let points = PointSet::sample(n, opts.d, opts.seed)?;
        let report = run_protocol(&points, &params, opts.seed)?;
        return emit_json(opts, &report);
    }
    let c = opts.c.ok_or_else(|| Error::InvalidArgument("--c is required".into()))?;
    if c == 0 {
        return invalid("--c must be >= 1");
    }
    let r = opts.radius_spec()?.resolve(n, opts.d)?;
    if r <= 0.0 {
        return invalid(format!("connection radius must be positive, got {r}"));
    }
    let points = PointSet::sample(n, opts.d, opts.seed)?;
    let index = NeighborIndex::build(&points, r)?;
    let graph = IrrigationGraph::sample(&index, &[c], opts.seed)?;
    let lab = analysis::components(&graph.full_view());
    let out = ConnectOutput {
        n,
        d: opts.d,
        r,
        c,
        seed: opts.seed,
        connected: lab.is_connected(),
        components: lab.count,
        largest_component: lab.largest(),
    };
    emit_json(opts, &out)
}

fn sweep_r_cmd(opts: &Opts) -> Result<()> {
    let radii: Vec<RadiusSpec> = match (&opts.r_list, &opts.penrose_list) {
        (Some(rs), None) => rs.iter().map(|&r| RadiusSpec::Explicit { r }).collect(),
        (None, Some(ms)) => ms.iter().map(|&multiple| RadiusSpec::Penrose { multiple }).collect(),
        (None, None) => return invalid("one of --r-list or --penrose-list is required"),
        _ => return invalid("--r-list and --penrose-list are mutually exclusive"),
    };
    let mut cfg = ExperimentConfig::new(Mode::SweepR, opts.require_n()?, opts.d, radii[0]);
    cfg.radii = radii;
    cfg.c_values = opts.c_values()?;
    cfg.trials = opts.trials;
    cfg.seed = opts.seed;
    cfg.eps = opts.eps;
    emit_record(opts, &harness::sweep_r(&cfg)?)
}

fn protocol_cmd(opts: &Opts) -> Result<()> {
    let spec = opts.radius_spec()?;
    let cfg = opts.config(Mode::Protocol, spec)?;
    let (rec, reports) = harness::protocol_batch(&cfg)?;
    match opts.format {
        Format::Csv => emit_record(opts, &rec),
        Format::Json => {
            #[derive(Serialize)]
            struct Batch<'a> {
                #[serde(flatten)]
                record: &'a ExperimentRecord,
                reports: &'a [crate::constructive::ProtocolReport],
            }
            eprintln!("wall time: {:.3} s", rec.wall_time.as_secs_f64());
            emit_json(opts, &Batch { record: &rec, reports: &reports })
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Theory(o) => theory_cmd(o),
        Command::Connect(o) => connect_cmd(o),
        Command::SweepC(o) => {
            let cfg = o.config(Mode::Connectivity, o.radius_spec()?)?;
            emit_record(o, &harness::sweep_c(&cfg)?)
        }
        Command::SweepR(o) => sweep_r_cmd(o),
        Command::CliqueScan(o) => {
            let cfg = o.config(Mode::CliqueScan, o.radius_spec()?)?;
            emit_record(o, &harness::clique_scan(&cfg)?)
        }
        Command::Regularity(o) => {
            let spec = o.radius_spec().or_else(|_| {
                o.delta
                    .map(|delta| RadiusSpec::Delta { delta, gamma: o.gamma })
                    .ok_or_else(|| Error::InvalidArgument("a radius is required".into()))
            })?;
            let cfg = o.config(Mode::Regularity, spec)?;
            emit_record(o, &harness::regularity_audit(&cfg)?)
        }
        Command::Protocol(o) => protocol_cmd(o),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on invalid arguments, 1 otherwise.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e @ (Error::InvalidArgument(_) | Error::Domain(_) | Error::Parse(_))) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
