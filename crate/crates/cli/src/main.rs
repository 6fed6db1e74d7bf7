use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vnembed::sim::{self, SimConfig};
use vnembed::topogen::Workload;
use vnembed::SubstrateNetwork;
use vnembed_cli::output::write_json;
use vnembed_cli::{run_experiment, scaling_report, verify_dir, CliError, ExperimentSpec, Overrides, VERSION};

#[derive(Parser)]
#[command(name = "vnembed", version, about = "Virtual network embedding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell and replication of an experiment.
    Run {
        /// Spec file, or a preset name: paper-small, paper-large.
        spec: String,
        #[command(flatten)]
        common: Common,
    },
    /// Time each embedder on batches of requests across substrate sizes.
    Scaling {
        spec: String,
        #[command(flatten)]
        common: Common,
        /// Comma-separated substrate sizes, ascending.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Requests per batch.
        #[arg(long)]
        requests: Option<usize>,
    },
    /// Dump a generated substrate and workload as JSON.
    Gen {
        #[arg(long, default_value = "paper-small")]
        preset: String,
        /// Substrate node count.
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        arrivals: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the invariants of a recorded run directory.
    Verify {
        dir: PathBuf,
        /// Also rerun every simulation and compare its outputs.
        #[arg(long)]
        rerun: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Seed of the first replication.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-request wall-clock limit in seconds, or "none".
    #[arg(long, value_parser = parse_limit::<f64>)]
    time_limit_s: Option<Limit<f64>>,
    /// Per-request simplex-iteration budget of the exact searches, or "none".
    #[arg(long, value_parser = parse_limit::<usize>)]
    work_limit: Option<Limit<usize>>,
    /// Pricing rounds of the path-generation embedder.
    #[arg(long)]
    iterations: Option<usize>,
    /// Requests per simulation.
    #[arg(long)]
    arrivals: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
}

/// A limit given on the command line; `none` removes it.
#[derive(Debug, Clone, Copy)]
struct Limit<T>(Option<T>);

fn parse_limit<T: std::str::FromStr>(s: &str) -> Result<Limit<T>, String>
where
    T::Err: std::fmt::Display,
{
    if s == "none" {
        return Ok(Limit(None));
    }
    s.parse().map(|v| Limit(Some(v))).map_err(|e: T::Err| e.to_string())
}

impl Common {
    fn spec(&self, source: &str) -> Result<ExperimentSpec, CliError> {
        let mut spec = ExperimentSpec::load(source)?;
        spec.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            time_limit_s: self.time_limit_s.map(|l| l.0),
            work_limit: self.work_limit.map(|l| l.0),
            iterations: self.iterations,
            arrivals: self.arrivals,
            replications: self.replications,
        })?;
        Ok(spec)
    }
}

fn out_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&spec.name))
}

#[derive(Serialize)]
struct Instance<'a> {
    version: &'a str,
    config: &'a SimConfig,
    substrate: &'a SubstrateNetwork,
    workload: &'a Workload,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { spec, common } => {
            let spec = common.spec(&spec)?;
            let out = out_dir(&spec);
            let agg = run_experiment(&spec, &out, common.jobs)?;
            for c in &agg.cells {
                println!(
                    "{:<16} runs {:>3}  acceptance {:.4}  node util {:.4}  link util {:.4}  s/request {:.4}  censored {}",
                    c.name,
                    c.runs,
                    c.acceptance_ratio.mean,
                    c.node_utilization.mean,
                    c.link_utilization.mean,
                    c.request_seconds.mean,
                    c.censored
                );
            }
            println!("wrote {}", out.display());
            if !agg.complete {
                for f in &agg.failures {
                    eprintln!("failed: cell {} replication {} seed {}: {}", f.cell, f.replication, f.seed, f.error);
                }
                let total = spec.cells.len() * spec.replications;
                return Err(CliError::Incomplete { failed: agg.failures.len(), total, out });
            }
            Ok(())
        }
        Command::Scaling { spec, common, sizes, requests } => {
            let mut spec = common.spec(&spec)?;
            if let Some(s) = sizes {
                spec.scaling.sizes = s;
            }
            if let Some(r) = requests {
                spec.scaling.requests = r;
            }
            let out = out_dir(&spec);
            let rows = scaling_report(&spec, &out, common.jobs)?;
            for r in &rows {
                println!(
                    "size {:>4}  {:<16} mean {:.4}s  ± {}  censored {}/{}",
                    r.size,
                    r.cell,
                    r.mean_seconds,
                    r.half_width.map_or("-".into(), |h| format!("{h:.4}")),
                    r.censored,
                    r.requests
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Gen { preset, nodes, arrivals, seed, out } => {
            let mut config =
                SimConfig::preset(&preset).ok_or_else(|| CliError::Spec(format!("unknown preset {preset:?}")))?;
            config.seed = seed;
            if let Some(n) = nodes {
                config.substrate.n_nodes = n;
            }
            if let Some(n) = arrivals {
                config.workload.n_arrivals = n;
            }
            let (substrate, workload) = sim::generate(&config)?;
            let doc = Instance { version: VERSION, config: &config, substrate: &substrate, workload: &workload };
            match out {
                Some(path) => write_json(&path, &doc),
                None => {
                    let text = serde_json::to_string_pretty(&doc)? + "\n";
                    match std::io::stdout().write_all(text.as_bytes()) {
                        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                            Err(CliError::io(Path::new("<stdout>"), e))
                        }
                        _ => Ok(()),
                    }
                }
            }
        }
        Command::Verify { dir, rerun } => {
            let report = verify_dir(&dir, rerun)?;
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            println!(
                "verified {} runs, {} events, {} reruns: {} violations",
                report.runs,
                report.events,
                report.replayed,
                report.violations.len()
            );
            if report.ok() {
                Ok(())
            } else {
                Err(CliError::Violations(report.violations.len()))
            }
        }
    }
}
