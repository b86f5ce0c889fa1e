//! Batch command-line front end: simulate cascades, fit parameters, and emit
//! plot-ready intensity and residual data.
//!
//! Every subcommand writes a `manifest.json` next to its outputs recording the
//! subcommand, inputs, outputs, seed, tool version, and wall-clock duration,
//! so any artifact can be regenerated exactly. The CLI emits CSV/JSON only;
//! rendering is left to external tools.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::em::{self, EmConfig, HistoryMode};
use crate::error::{HawkesError, Result};
use crate::io;
use crate::model::{rescaled_interarrivals, total_intensity, Cascade, FollowerGraph, ModelParams};
use crate::sim;
use crate::stats;

/// Marked Hawkes processes for fake-news cascades: simulation, EM fitting,
/// intensity curves, and time-rescaling residuals.
#[derive(Debug, Parser)]
#[command(name = "cascade-hawkes", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HistoryArg {
    /// All earlier events are admissible ancestors.
    Full,
    /// Restrict attribution to the resolved parent chain.
    Network,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a cascade over a follower network and write the event log.
    Simulate {
        /// Flat parameter JSON (mu_s ... T, U).
        params: PathBuf,
        /// Follower edge CSV; when absent a heavy-tailed network with U users
        /// is generated from the seed.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Mean follower count for the generated network.
        #[arg(long, default_value_t = 20.0)]
        mean_followers: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hard cap on generated events.
        #[arg(long, default_value_t = 1_000_000)]
        max_events: usize,
        /// Proceed even if the parameters are supercritical.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Fit model parameters to an event log with the EM algorithm.
    Fit {
        /// JSONL event log.
        events: PathBuf,
        /// Follower edge CSV used to resolve audience reach.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Observation window length; defaults to the last event time.
        #[arg(long)]
        horizon: Option<f64>,
        /// Convergence threshold on the Q difference.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, value_enum, default_value_t = HistoryArg::Full)]
        history: HistoryArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Evaluate the per-stance intensities on a uniform time grid.
    Intensity {
        /// JSONL event log.
        events: PathBuf,
        /// Flat parameter JSON.
        params: PathBuf,
        /// Follower edge CSV used to resolve audience reach.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Number of grid points over [0, T].
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Time-rescaling residuals and a KS test against Exp(1).
    Residuals {
        /// JSONL event log.
        events: PathBuf,
        /// Flat parameter JSON.
        params: PathBuf,
        /// Follower edge CSV used to resolve audience reach.
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct RunManifest {
    subcommand: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seed: Option<u64>,
    version: String,
    duration_secs: f64,
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let file = File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(file), manifest)
        .map_err(|e| HawkesError::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| HawkesError::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn load_params(path: &Path) -> Result<(ModelParams, u64)> {
    let file = io::read_params(BufReader::new(File::open(path)?))?;
    Ok((file.to_model()?, file.user_count))
}

fn load_graph(edges: Option<&Path>) -> Result<Option<FollowerGraph>> {
    match edges {
        Some(path) => {
            let (graph, _) = io::parse_edges(BufReader::new(File::open(path)?))?;
            Ok(Some(graph))
        }
        None => Ok(None),
    }
}

/// Loads the event log and caches audience reach from the optional network.
fn load_resolved(
    events: &Path,
    edges: Option<&Path>,
    horizon_override: Option<f64>,
) -> Result<(Cascade, io::IngestReport)> {
    let (cascade, mut report) = io::parse_events(BufReader::new(File::open(events)?), horizon_override)?;
    let graph = load_graph(edges)?;
    let resolved = io::resolve_influence(&cascade, graph.as_ref(), None, &mut report)?;
    Ok((resolved, report))
}

fn cmd_simulate(
    params_path: &Path,
    edges: Option<&Path>,
    mean_followers: f64,
    seed: u64,
    max_events: usize,
    force: bool,
    out_dir: &Path,
) -> Result<i32> {
    let started = Instant::now();
    let (params, user_count) = load_params(params_path)?;
    let graph = match load_graph(edges)? {
        Some(g) => g,
        None => sim::generate_network(user_count as usize, mean_followers, seed)?,
    };
    let ratio = sim::branching_ratio(&params, &graph);
    if ratio >= 1.0 && !force {
        return Err(HawkesError::InvalidParams(format!(
            "supercritical parameters: expected descendants per event is {ratio:.4} >= 1; \
             pass --force to simulate anyway (output may hit --max-events)"
        )));
    }
    let report = sim::simulate_cascade(&sim::SimConfig {
        params: &params,
        graph: &graph,
        seed,
        max_events,
        user_assignment: sim::UserAssignment::FollowerProportional,
    })?;
    std::fs::create_dir_all(out_dir)?;
    let events_path = out_dir.join("events.jsonl");
    io::write_events(&report.cascade, BufWriter::new(File::create(&events_path)?))?;
    #[derive(Serialize)]
    struct SimSummary<'a> {
        events: usize,
        truncated: bool,
        branching_ratio: f64,
        counts: &'a crate::model::CountsTable,
    }
    let counts_path = out_dir.join("counts.json");
    write_json(
        &counts_path,
        &SimSummary {
            events: report.cascade.len(),
            truncated: report.truncated,
            branching_ratio: ratio,
            counts: &report.counts,
        },
    )?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "simulate".into(),
            inputs: vec![params_path.display().to_string()]
                .into_iter()
                .chain(edges.map(|p| p.display().to_string()))
                .collect(),
            outputs: vec![
                events_path.display().to_string(),
                counts_path.display().to_string(),
            ],
            seed: Some(seed),
            version: env!("CARGO_PKG_VERSION").into(),
            duration_secs: started.elapsed().as_secs_f64(),
        },
    )?;
    println!(
        "simulated {} events (truncated: {}, branching ratio {ratio:.4}) -> {}",
        report.cascade.len(),
        report.truncated,
        events_path.display()
    );
    Ok(0)
}

fn cmd_fit(
    events: &Path,
    edges: Option<&Path>,
    horizon: Option<f64>,
    epsilon: f64,
    max_iters: usize,
    history: HistoryArg,
    out_dir: &Path,
) -> Result<i32> {
    let started = Instant::now();
    let (cascade, ingest) = load_resolved(events, edges, horizon)?;
    let config = EmConfig {
        epsilon,
        max_iters,
        history_mode: match history {
            HistoryArg::Full => HistoryMode::Full,
            HistoryArg::Network => HistoryMode::NetworkRestricted,
        },
        ..EmConfig::default()
    };
    let fitted = em::fit(&cascade, None, &config)?;
    std::fs::create_dir_all(out_dir)?;
    #[derive(Serialize)]
    struct FitOutput {
        params: io::ParamsFile,
        loglik: f64,
        iterations: usize,
        converged: bool,
        q_trace: Vec<f64>,
        warnings: Vec<String>,
        ingest: io::IngestReport,
    }
    let report_path = out_dir.join("fit_report.json");
    write_json(
        &report_path,
        &FitOutput {
            params: io::ParamsFile::from_model(&fitted.params, 0),
            loglik: fitted.loglik,
            iterations: fitted.iterations,
            converged: fitted.converged,
            q_trace: fitted.q_trace.clone(),
            warnings: fitted.warnings.clone(),
            ingest,
        },
    )?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "fit".into(),
            inputs: vec![events.display().to_string()]
                .into_iter()
                .chain(edges.map(|p| p.display().to_string()))
                .collect(),
            outputs: vec![report_path.display().to_string()],
            seed: None,
            version: env!("CARGO_PKG_VERSION").into(),
            duration_secs: started.elapsed().as_secs_f64(),
        },
    )?;
    println!(
        "fit {} iterations, converged: {}, log-likelihood {:.4} -> {}",
        fitted.iterations,
        fitted.converged,
        fitted.loglik,
        report_path.display()
    );
    Ok(if fitted.converged { 0 } else { 3 })
}

fn cmd_intensity(
    events: &Path,
    params_path: &Path,
    edges: Option<&Path>,
    grid: usize,
    out_dir: &Path,
) -> Result<i32> {
    if grid < 2 {
        return Err(HawkesError::Usage(format!(
            "--grid must be at least 2, got {grid}"
        )));
    }
    let started = Instant::now();
    let (params, _) = load_params(params_path)?;
    let (cascade, _) = load_resolved(events, edges, Some(params.horizon_t))?;
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("intensity.csv");
    let mut out = BufWriter::new(File::create(&csv_path)?);
    writeln!(out, "t,lambda_s,lambda_n,lambda")?;
    for i in 0..grid {
        let t = params.horizon_t * i as f64 / (grid - 1) as f64;
        let b = total_intensity(&params, &cascade, t)?;
        writeln!(
            out,
            "{t},{},{},{}",
            b.immigrant[0] + b.excitation[0],
            b.immigrant[1] + b.excitation[1],
            b.total
        )?;
    }
    out.flush()?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "intensity".into(),
            inputs: [Some(events), Some(params_path), edges]
                .into_iter()
                .flatten()
                .map(|p| p.display().to_string())
                .collect(),
            outputs: vec![csv_path.display().to_string()],
            seed: None,
            version: env!("CARGO_PKG_VERSION").into(),
            duration_secs: started.elapsed().as_secs_f64(),
        },
    )?;
    println!("wrote {grid}-point intensity grid -> {}", csv_path.display());
    Ok(0)
}

fn cmd_residuals(
    events: &Path,
    params_path: &Path,
    edges: Option<&Path>,
    out_dir: &Path,
) -> Result<i32> {
    let started = Instant::now();
    let (params, _) = load_params(params_path)?;
    let (cascade, _) = load_resolved(events, edges, Some(params.horizon_t))?;
    if cascade.len() < 10 {
        return Err(HawkesError::Usage(format!(
            "residual analysis needs at least 10 events, got {} (test underpowered)",
            cascade.len()
        )));
    }
    let increments = rescaled_interarrivals(&params, &cascade)?;
    let ks = stats::ks_test_exp1(&increments)?;
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("residuals.csv");
    let mut out = BufWriter::new(File::create(&csv_path)?);
    writeln!(out, "index,rescaled_interarrival")?;
    for (i, dz) in increments.iter().enumerate() {
        writeln!(out, "{i},{dz}")?;
    }
    out.flush()?;
    let ks_path = out_dir.join("ks.json");
    write_json(&ks_path, &ks)?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "residuals".into(),
            inputs: [Some(events), Some(params_path), edges]
                .into_iter()
                .flatten()
                .map(|p| p.display().to_string())
                .collect(),
            outputs: vec![
                csv_path.display().to_string(),
                ks_path.display().to_string(),
            ],
            seed: None,
            version: env!("CARGO_PKG_VERSION").into(),
            duration_secs: started.elapsed().as_secs_f64(),
        },
    )?;
    println!(
        "KS statistic {:.4}, p-value {:.4} over {} increments -> {}",
        ks.statistic,
        ks.p_value,
        ks.n,
        ks_path.display()
    );
    Ok(0)
}

/// Runs a parsed command, returning the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate {
            params,
            edges,
            mean_followers,
            seed,
            max_events,
            force,
            out_dir,
        } => cmd_simulate(
            &params,
            edges.as_deref(),
            mean_followers,
            seed,
            max_events,
            force,
            &out_dir,
        ),
        Command::Fit {
            events,
            edges,
            horizon,
            epsilon,
            max_iters,
            history,
            out_dir,
        } => cmd_fit(
            &events,
            edges.as_deref(),
            horizon,
            epsilon,
            max_iters,
            history,
            &out_dir,
        ),
        Command::Intensity {
            events,
            params,
            edges,
            grid,
            out_dir,
        } => cmd_intensity(&events, &params, edges.as_deref(), grid, &out_dir),
        Command::Residuals {
            events,
            params,
            edges,
            out_dir,
        } => cmd_residuals(&events, &params, edges.as_deref(), &out_dir),
    }
}
