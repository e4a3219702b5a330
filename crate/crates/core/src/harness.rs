//! Monte Carlo experiment driver.
//!
//! Every experiment runs `trials` independent trials with seeds
//! `seed ^ trial`. Trials run in parallel and are collected in trial order, so
//! a record is a pure function of its config. The worker count can be pinned
//! with the `BLUEGRAPH_THREADS` environment variable.

use std::io::{Read, Write};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::constructive::{run_protocol, ProtocolReport};
use crate::error::{invalid, Error, Result};
use crate::geometry::PointSet;
use crate::irrigation::IrrigationGraph;
use crate::rgg::NeighborIndex;
use crate::rng::trial_seed;
use crate::stats::wilson95;
use crate::theory::{self, check_regularity, TheoryParams, DEFAULT_EPS};

pub const THREADS_ENV: &str = "BLUEGRAPH_THREADS";

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
            b = b.num_threads(k);
        }
        b.build().expect("thread pool")
    })
}

/// Runs `f` on every trial seed in parallel; results are in trial order.
pub fn run_trials<T, F>(trials: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    pool().install(|| {
        (0..trials as u64).into_par_iter().map(|t| f(trial_seed(seed, t))).collect()
    })
}

/// How the connection radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusSpec {
    Explicit { r: f64 },
    /// `r = γ n^{-(1-δ)/d}`.
    Delta { delta: f64, gamma: f64 },
    /// A multiple of the connectivity radius of `G_n(r)`.
    Penrose { multiple: f64 },
}

impl RadiusSpec {
    pub fn resolve(&self, n: usize, d: usize) -> Result<f64> {
        let r = match *self {
            RadiusSpec::Explicit { r } => r,
            RadiusSpec::Delta { delta, gamma } => {
                if !(delta > 0.0 && delta <= 1.0) || !(gamma > 0.0) {
                    return invalid(format!("need 0 < delta <= 1 and gamma > 0, got {delta}, {gamma}"));
                }
                theory::radius_from_delta(n, d, delta, gamma)
            }
            RadiusSpec::Penrose { multiple } => multiple * theory::penrose_radius(n, d)?,
        };
        if !(r >= 0.0) || !r.is_finite() {
            return invalid(format!("radius must be finite and non-negative, got {r}"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Connectivity,
    SweepR,
    CliqueScan,
    Protocol,
    Regularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    pub d: usize,
    pub radius_spec: RadiusSpec,
    /// Radii for `SweepR`, in ascending order of resolved value.
    #[serde(default)]
    pub radii: Vec<RadiusSpec>,
    /// Connection budgets. Empty in `SweepR` means unbounded.
    #[serde(default)]
    pub c_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub eps: f64,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, n: usize, d: usize, radius_spec: RadiusSpec) -> Self {
        ExperimentConfig {
            mode,
            n,
            d,
            radius_spec,
            radii: Vec::new(),
            c_values: Vec::new(),
            trials: 100,
            seed: 0,
            eps: DEFAULT_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return invalid("n and d must be >= 1");
        }
        if self.trials == 0 {
            return invalid("trials must be >= 1");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return invalid(format!("eps must lie in (0,1), got {}", self.eps));
        }
        if self.c_values.contains(&0) {
            return invalid("connection budgets must be >= 1");
        }
        match self.mode {
            Mode::Connectivity | Mode::CliqueScan if self.c_values.is_empty() => {
                invalid("c_values must be non-empty")
            }
            Mode::SweepR if self.radii.is_empty() => invalid("radii must be non-empty"),
            Mode::SweepR if self.c_values.len() > 1 => invalid("sweep over r takes at most one c"),
            Mode::Protocol if !matches!(self.radius_spec, RadiusSpec::Delta { .. }) => {
                invalid("the protocol needs a delta radius")
            }
            _ => Ok(()),
        }
    }

    fn sorted_c(&self) -> Vec<usize> {
        let mut cs = self.c_values.clone();
        cs.sort_unstable();
        cs.dedup();
        cs
    }
}

/// One line of a record: a proportion estimated at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub param: String,
    pub value: f64,
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_count: Option<f64>,
}

impl Row {
    pub fn new(param: &str, value: f64, successes: u64, trials: u64) -> Self {
        let p = wilson95(successes, trials);
        Row {
            param: param.to_string(),
            value,
            successes,
            trials,
            p_hat: p.p_hat,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
            mean_count: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    /// Smallest `c` with `p_hat >= 0.5`.
    pub empirical_threshold: Option<usize>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for ExperimentRecord {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.rows == other.rows
            && self.empirical_threshold == other.empirical_threshold
    }
}

impl ExperimentRecord {
    fn finish(config: &ExperimentConfig, rows: Vec<Row>, started: Instant) -> Self {
        let empirical_threshold = match config.mode {
            Mode::Connectivity => {
                rows.iter().find(|r| r.p_hat >= 0.5).map(|r| r.value as usize)
            }
            _ => None,
        };
        ExperimentRecord {
            config: config.clone(),
            rows,
            empirical_threshold,
            wall_time: started.elapsed(),
        }
    }

    /// CSV with columns `param,value,successes,trials,p_hat,ci_low,ci_high`,
    /// plus `mean_count` when any row carries one.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let with_mean = self.rows.iter().any(|r| r.mean_count.is_some());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["param", "value", "successes", "trials", "p_hat", "ci_low", "ci_high"];
        if with_mean {
            header.push("mean_count");
        }
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.param.clone(),
                r.value.to_string(),
                r.successes.to_string(),
                r.trials.to_string(),
                r.p_hat.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
            ];
            if with_mean {
                rec.push(r.mean_count.map(|m| m.to_string()).unwrap_or_default());
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

/// Parses rows written by [`ExperimentRecord::write_csv`].
pub fn read_rows_csv<R: Read>(r: R) -> Result<Vec<Row>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

fn resolve_positive(spec: &RadiusSpec, n: usize, d: usize) -> Result<f64> {
    let r = spec.resolve(n, d)?;
    if r <= 0.0 {
        return invalid(format!("connection radius must be positive, got {r}"));
    }
    Ok(r)
}

/// Stage budgets whose prefix sums are the ascending `cs`.
fn staged_budgets(cs: &[usize]) -> Vec<usize> {
    let mut prev = 0;
    cs.iter()
        .map(|&c| {
            let b = c - prev;
            prev = c;
            b
        })
        .collect()
}

/// Per-trial connectivity for every `c` in ascending order, from one staged
/// sample per trial: outcome `[t][k]` is for the `k`-th smallest `c`.
pub fn connectivity_outcomes(config: &ExperimentConfig) -> Result<Vec<Vec<bool>>> {
    config.validate()?;
    let r = resolve_positive(&config.radius_spec, config.n, config.d)?;
    let budgets = staged_budgets(&config.sorted_c());
    run_trials(config.trials, config.seed, |ts| {
        let points = PointSet::sample(config.n, config.d, ts)?;
        let index = NeighborIndex::build(&points, r)?;
        let graph = IrrigationGraph::sample(&index, &budgets, ts)?;
        let counts = analysis::component_counts_by_stage(&graph);
        Ok(counts[1..].iter().map(|&k| k <= 1).collect())
    })
}

fn tally(outcomes: &[Vec<bool>], k: usize) -> u64 {
    outcomes.iter().filter(|o| o[k]).count() as u64
}

/// Connectivity probability of `Γ_n(r, c)` for each `c`, with Wilson 95%
/// intervals and the median-rule empirical threshold.
pub fn estimate_connectivity(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let started = Instant::now();
    if config.mode != Mode::Connectivity {
        return invalid("estimate_connectivity needs connectivity mode");
    }
    let outcomes = connectivity_outcomes(config)?;
    let rows = config
        .sorted_c()
        .iter()
        .enumerate()
        .map(|(k, &c)| Row::new("c", c as f64, tally(&outcomes, k), config.trials as u64))
        .collect();
    Ok(ExperimentRecord::finish(config, rows, started))
}

/// Threshold sweep over `c`; the budgets are coupled through staged reveals,
/// so each trial's connectivity is non-decreasing in `c`.
pub fn sweep_c(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    estimate_connectivity(config)
}

/// Connectivity probability against the radius at a fixed `c` (unbounded
/// when `c_values` is empty). Each trial reuses one point set for all radii.
pub fn sweep_r(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let started = Instant::now();
    config.validate()?;
    if config.mode != Mode::SweepR {
        return invalid("sweep_r needs sweep_r mode");
    }
    let radii: Vec<f64> =
        config.radii.iter().map(|s| s.resolve(config.n, config.d)).collect::<Result<_>>()?;
    if radii.windows(2).any(|w| w[1] < w[0]) {
        return invalid("radii must be ascending");
    }
    let c = config.c_values.first().copied().unwrap_or(config.n.saturating_sub(1).max(1));
    let outcomes: Vec<Vec<bool>> = run_trials(config.trials, config.seed, |ts| {
        let points = PointSet::sample(config.n, config.d, ts)?;
        radii
            .iter()
            .map(|&r| {
                if r == 0.0 {
                    return Ok(config.n == 1);
                }
                let index = NeighborIndex::build(&points, r)?;
                let graph = IrrigationGraph::sample(&index, &[c], ts)?;
                Ok(analysis::is_connected(&graph.full_view()))
            })
            .collect()
    })?;
    let rows = radii
        .iter()
        .enumerate()
        .map(|(k, &r)| Row::new("r", r, tally(&outcomes, k), config.trials as u64))
        .collect();
    Ok(ExperimentRecord::finish(config, rows, started))
}

/// Per-trial isolated `(c+1)`-clique counts for each ascending `c`.
pub fn clique_counts(config: &ExperimentConfig) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    let r = resolve_positive(&config.radius_spec, config.n, config.d)?;
    let cs = config.sorted_c();
    let budgets = staged_budgets(&cs);
    run_trials(config.trials, config.seed, |ts| {
        let points = PointSet::sample(config.n, config.d, ts)?;
        let index = NeighborIndex::build(&points, r)?;
        let graph = IrrigationGraph::sample(&index, &budgets, ts)?;
        cs.iter()
            .enumerate()
            .map(|(k, &c)| Ok(analysis::find_isolated_cliques(&graph.view(k + 1)?, c).len()))
            .collect()
    })
}

/// Frequency of at least one isolated `(c+1)`-clique, with the mean count.
pub fn clique_scan(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let started = Instant::now();
    if config.mode != Mode::CliqueScan {
        return invalid("clique_scan needs clique_scan mode");
    }
    let counts = clique_counts(config)?;
    let trials = config.trials as u64;
    let rows = config
        .sorted_c()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let hits = counts.iter().filter(|t| t[k] > 0).count() as u64;
            let total: usize = counts.iter().map(|t| t[k]).sum();
            let mut row = Row::new("c", c as f64, hits, trials);
            row.mean_count = Some(total as f64 / trials as f64);
            row
        })
        .collect();
    Ok(ExperimentRecord::finish(config, rows, started))
}

/// Per-trial regularity reports at the config's radius and `eps`.
pub fn regularity_reports(config: &ExperimentConfig) -> Result<Vec<theory::RegularityReport>> {
    config.validate()?;
    let r = resolve_positive(&config.radius_spec, config.n, config.d)?;
    run_trials(config.trials, config.seed, |ts| {
        let points = PointSet::sample(config.n, config.d, ts)?;
        check_regularity(&points, r, config.eps)
    })
}

/// Rows `regular` (both families within `eps`), `ball_family` and
/// `cube_family`, each valued at `eps`.
pub fn regularity_audit(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let started = Instant::now();
    if config.mode != Mode::Regularity {
        return invalid("regularity_audit needs regularity mode");
    }
    let reports = regularity_reports(config)?;
    let eps = config.eps;
    let inside = |x: f64| x > 1.0 - eps && x < 1.0 + eps;
    let count = |f: &dyn Fn(&theory::RegularityReport) -> bool| {
        reports.iter().filter(|r| f(r)).count() as u64
    };
    let trials = config.trials as u64;
    let rows = vec![
        Row::new("regular", eps, count(&|r| r.holds), trials),
        Row::new(
            "ball_family",
            eps,
            count(&|r| inside(r.ball_ratio_min) && inside(r.ball_ratio_max)),
            trials,
        ),
        Row::new(
            "cube_family",
            eps,
            count(&|r| inside(r.cube_ratio_min) && inside(r.cube_ratio_max)),
            trials,
        ),
    ];
    Ok(ExperimentRecord::finish(config, rows, started))
}

/// Per-trial protocol reports.
pub fn protocol_reports(config: &ExperimentConfig) -> Result<Vec<ProtocolReport>> {
    config.validate()?;
    let RadiusSpec::Delta { delta, gamma } = config.radius_spec else {
        return invalid("the protocol needs a delta radius");
    };
    let params = TheoryParams::new(config.n, config.d, delta, gamma, config.eps)?;
    run_trials(config.trials, config.seed, |ts| {
        let points = PointSet::sample(config.n, config.d, ts)?;
        run_protocol(&points, &params, ts)
    })
}

/// Batch protocol run with one row per phase outcome, valued at `δ`.
pub fn protocol_batch(config: &ExperimentConfig) -> Result<(ExperimentRecord, Vec<ProtocolReport>)> {
    let started = Instant::now();
    if config.mode != Mode::Protocol {
        return invalid("protocol_batch needs protocol mode");
    }
    let reports = protocol_reports(config)?;
    let RadiusSpec::Delta { delta, .. } = config.radius_spec else {
        return Err(Error::InvalidArgument("the protocol needs a delta radius".into()));
    };
    let trials = config.trials as u64;
    let count = |f: fn(&ProtocolReport) -> bool| reports.iter().filter(|r| f(r)).count() as u64;
    let rows = vec![
        Row::new("phase1", delta, count(|r| r.phase1_success()), trials),
        Row::new("phase2", delta, count(|r| r.phase2_success()), trials),
        Row::new("phase3", delta, count(|r| r.phase3_success()), trials),
        Row::new("stitched", delta, count(|r| r.stitched), trials),
        Row::new("connected", delta, count(|r| r.connected), trials),
        Row::new("degenerate", delta, count(|r| r.degenerate()), trials),
    ];
    Ok((ExperimentRecord::finish(config, rows, started), reports))
}

/// Dispatches on the config's mode.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    match config.mode {
        Mode::Connectivity => estimate_connectivity(config),
        Mode::SweepR => sweep_r(config),
        Mode::CliqueScan => clique_scan(config),
        Mode::Regularity => regularity_audit(config),
        Mode::Protocol => protocol_batch(config).map(|(rec, _)| rec),
    }
}
