//! Command-line interface: one binary for every role.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    emit_report, parse_records_csv, run_sweep, BenchRecord, SweepBackend, SweepConfig, SweepRun,
};
use crate::dispatch::{run_master, run_worker, MasterOptions, Strategy};
use crate::files;
use crate::portfolio::{generate, job_files, PortfolioConfig, Preset};
use crate::pricing::{JobRunner, MarketConfig, PricingRunner};
use crate::transport;
use riskbench_core::codec::ResultRecord;

/// Environment variable carrying the master's listen/connect address.
pub const MASTER_ADDR_ENV: &str = "RISKBENCH_MASTER_ADDR";
const DEFAULT_ADDR: &str = "127.0.0.1:7931";

/// Exit codes: 0 success, 2 usage (from clap), then one per failure
/// class.
pub mod exit_code {
    pub const CONFIG: u8 = 3;
    pub const IO: u8 = 4;
    pub const TRANSPORT: u8 = 5;
    pub const NUMERIC: u8 = 6;
}

#[derive(Parser)]
#[command(
    name = "riskbench",
    version,
    about = "Distributed portfolio valuation benchmark"
)]
pub struct Cli {
    /// Log level for stderr diagnostics.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    command: CommandKind,
}

#[derive(Args, Clone, Copy, Debug)]
struct MarketArgs {
    /// Spot level per asset.
    #[arg(long, default_value_t = 100.0)]
    spot: f64,
    /// Continuously compounded rate per annum.
    #[arg(long, default_value_t = 0.05)]
    rate: f64,
    /// Volatility per asset, annualized.
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Equicorrelation between basket assets.
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
}

impl MarketArgs {
    fn config(&self) -> Result<MarketConfig, CliError> {
        if !(self.spot > 0.0) || !(self.sigma > 0.0) {
            return Err(CliError::Config("spot and sigma must be > 0".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(CliError::Config("rho must be in [-1, 1]".into()));
        }
        Ok(MarketConfig {
            spot: self.spot,
            rate: self.rate,
            sigma: self.sigma,
            dividend_yield: 0.0,
            correlation_rho: self.rho,
        })
    }
}

#[derive(Subcommand)]
enum CommandKind {
    /// Generate a problem portfolio into a directory.
    Generate {
        /// Output directory for the problem files.
        #[arg(long)]
        out: PathBuf,
        /// Portfolio preset: full, mini, toy or vanilla.
        #[arg(long, default_value = "full")]
        preset: String,
        /// Job count for the toy and vanilla presets.
        #[arg(long, default_value_t = 2000)]
        jobs: usize,
        /// Base seed for the per-problem seeds.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Barrier level as a fraction of spot.
        #[arg(long, default_value_t = 0.8)]
        barrier_fraction: f64,
        /// Write compressed .rbz problem files.
        #[arg(long)]
        compress: bool,
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Print the decoded fields of a problem file.
    Inspect { file: PathBuf },
    /// Price one problem file locally.
    Price {
        file: PathBuf,
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Run the master: farm a jobs directory out to TCP workers.
    Master {
        #[arg(long)]
        jobs: PathBuf,
        #[arg(long, default_value = "sload")]
        strategy: Strategy,
        /// Number of workers that will connect.
        #[arg(long)]
        workers: usize,
        /// Problems per payload frame.
        #[arg(long, default_value_t = 1)]
        batch: usize,
        /// Listen address (falls back to RISKBENCH_MASTER_ADDR).
        #[arg(long)]
        listen: Option<String>,
        /// Seconds to wait for the worker cohort.
        #[arg(long, default_value_t = 30)]
        accept_timeout: u64,
        /// Reassign jobs of lost workers instead of aborting.
        #[arg(long)]
        reassign_on_failure: bool,
        /// Results file.
        #[arg(long, default_value = "pb-res.rbr")]
        out: PathBuf,
    },
    /// Run a worker: connect to a master and price until told to stop.
    Worker {
        /// Master address (falls back to RISKBENCH_MASTER_ADDR).
        #[arg(long)]
        connect: Option<String>,
        /// Must match the master's strategy.
        #[arg(long, default_value = "sload")]
        strategy: Strategy,
        /// Seconds to keep trying to reach the master.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Sweep strategies over worker counts and write a speedup report.
    Bench {
        #[arg(long)]
        jobs: PathBuf,
        /// Comma-separated: full,nfs,sload.
        #[arg(long, default_value = "full,nfs,sload", value_delimiter = ',')]
        strategies: Vec<Strategy>,
        /// Comma-separated worker counts.
        #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
        workers: Vec<u32>,
        #[arg(long, default_value_t = 3)]
        repeat: u32,
        /// Report directory (records.csv + report.md).
        #[arg(long)]
        out: PathBuf,
        /// threads: in-process workers; procs: worker processes over TCP.
        #[arg(long, default_value = "threads")]
        backend: String,
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Rebuild the Markdown report from a records CSV.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Transport(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit_code::CONFIG,
            CliError::Io(_) => exit_code::IO,
            CliError::Transport(_) => exit_code::TRANSPORT,
            CliError::Numeric(_) => exit_code::NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Io(m)
            | CliError::Transport(m)
            | CliError::Numeric(m) => m,
        }
    }
}

impl From<files::FileError> for CliError {
    fn from(e: files::FileError) -> Self {
        match e {
            files::FileError::Io { .. } => CliError::Io(e.to_string()),
            files::FileError::Codec { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<crate::dispatch::DispatchError> for CliError {
    fn from(e: crate::dispatch::DispatchError) -> Self {
        use crate::dispatch::DispatchError::*;
        match e {
            NoJobs | NoWorkers(_) => CliError::Config(e.to_string()),
            Transport(_) | WorkerLost { .. } | BadResultPayload { .. } => {
                CliError::Transport(e.to_string())
            }
            File(inner) => inner.into(),
        }
    }
}

fn master_addr(flag: Option<String>) -> String {
    flag.or_else(|| std::env::var(MASTER_ADDR_ENV).ok())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string())
}

/// Parses argv, runs the selected command and maps failures to exit
/// codes. Usage errors exit with code 2 through clap.
pub fn main_with(args: Vec<String>) -> ExitCode {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2u8 } else { 0u8 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(&cli.log_level);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", e.message());
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn init_logging(level: &str) {
    let mut builder = env_logger::Builder::from_default_env();
    if let Ok(filter) = level.parse::<log::LevelFilter>() {
        builder.filter_level(filter);
    }
    let _ = builder.format_timestamp_millis().try_init();
}

fn run(command: CommandKind) -> Result<(), CliError> {
    match command {
        CommandKind::Generate {
            out,
            preset,
            jobs,
            seed,
            barrier_fraction,
            compress,
            market,
        } => {
            let preset = match preset.as_str() {
                "full" => Preset::Full,
                "mini" => Preset::Mini,
                "toy" => Preset::Toy { jobs },
                "vanilla" => Preset::VanillaOnly { jobs },
                other => {
                    return Err(CliError::Config(format!(
                        "unknown preset '{other}' (expected full, mini, toy or vanilla)"
                    )))
                }
            };
            if !(barrier_fraction > 0.0 && barrier_fraction < 1.0) {
                return Err(CliError::Config(
                    "barrier fraction must be in (0, 1)".into(),
                ));
            }
            let mcfg = market.config()?;
            let cfg = PortfolioConfig {
                spot0: mcfg.spot,
                rate: mcfg.rate,
                sigma: mcfg.sigma,
                barrier_fraction,
                correlation_rho: mcfg.correlation_rho,
                output_dir: out.clone(),
                seed0: seed,
                compress,
            };
            let problems = generate(&cfg, preset).map_err(|e| CliError::Io(e.to_string()))?;
            println!("generated {} problems in {}", problems.len(), out.display());
            Ok(())
        }
        CommandKind::Inspect { file } => {
            let blob = files::sload(&file)?;
            let spec = riskbench_core::codec::decode(&blob)
                .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
            println!("file:       {}", file.display());
            println!("compressed: {}", blob.compressed);
            println!("id:         {}", spec.id);
            println!("kind:       {}", spec.kind.name());
            println!("strike:     {}", spec.strike);
            println!("maturity:   {} years", spec.maturity);
            if let Some(b) = spec.barrier {
                println!("barrier:    {b}");
            }
            println!("dimension:  {}", spec.dimension);
            println!("seed:       {}", spec.seed);
            if !spec.method_params.is_empty() {
                println!("method params:");
                for (k, v) in &spec.method_params {
                    println!("  {k} = {v}");
                }
            }
            Ok(())
        }
        CommandKind::Price { file, market } => {
            let spec = files::load(&file)?;
            let runner = PricingRunner::new(market.config()?);
            let result = runner
                .run(&spec)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            println!("id:        {}", result.problem_id);
            println!("price:     {:.10}", result.price);
            if let Some(se) = result.std_error {
                println!("std_error: {se:.10}");
            }
            if let Some(d) = result.delta {
                println!("delta:     {d:.10}");
            }
            println!("wall_time: {:.6}s", result.wall_time);
            if result.degraded_dates > 0 {
                println!("degraded_dates: {}", result.degraded_dates);
            }
            Ok(())
        }
        CommandKind::Master {
            jobs,
            strategy,
            workers,
            batch,
            listen,
            accept_timeout,
            reassign_on_failure,
            out,
        } => {
            if workers == 0 {
                return Err(CliError::Config("need at least one worker".into()));
            }
            let job_list = job_files(&jobs).map_err(|e| CliError::Io(e.to_string()))?;
            if job_list.is_empty() {
                return Err(CliError::Config(format!(
                    "no .rbp/.rbz files under {}",
                    jobs.display()
                )));
            }
            let addr = master_addr(listen);
            log::info!("listening on {addr} for {workers} workers");
            let ep = transport::listen(addr.as_str(), workers, Duration::from_secs(accept_timeout))
                .map_err(|e| CliError::Transport(e.to_string()))?;
            let opts = MasterOptions {
                batch,
                reassign_on_failure,
                results_path: Some(out.clone()),
            };
            let run = run_master(&ep, &job_list, strategy, &opts)?;
            let failed = run
                .outcomes
                .iter()
                .filter(|o| matches!(o.record, ResultRecord::Failed { .. }))
                .count();
            println!(
                "priced {} jobs ({} failed) in {:.6}s with {} workers, strategy {}",
                run.outcomes.len(),
                failed,
                run.wall_time,
                workers,
                strategy
            );
            println!("results: {}", out.display());
            Ok(())
        }
        CommandKind::Worker {
            connect,
            strategy,
            timeout,
            market,
        } => {
            let addr = master_addr(connect);
            log::info!("connecting to {addr}");
            let ep = transport::connect(addr.as_str(), Duration::from_secs(timeout))
                .map_err(|e| CliError::Transport(e.to_string()))?;
            log::info!("assigned rank {} of {}", ep.rank(), ep.size());
            let runner = PricingRunner::new(market.config()?);
            let handled = run_worker(&ep, strategy, &runner)?;
            log::info!("worker rank {} handled {handled} jobs", ep.rank());
            Ok(())
        }
        CommandKind::Bench {
            jobs,
            strategies,
            workers,
            repeat,
            out,
            backend,
            market,
        } => {
            let job_list = job_files(&jobs).map_err(|e| CliError::Io(e.to_string()))?;
            if job_list.is_empty() {
                return Err(CliError::Config(format!(
                    "no .rbp/.rbz files under {}",
                    jobs.display()
                )));
            }
            if workers.contains(&0) {
                return Err(CliError::Config("worker counts must be >= 1".into()));
            }
            let backend = match backend.as_str() {
                "threads" => SweepBackend::Threads,
                "procs" => SweepBackend::WorkerProcesses {
                    bin: std::env::current_exe().map_err(|e| CliError::Io(e.to_string()))?,
                },
                other => {
                    return Err(CliError::Config(format!(
                        "unknown backend '{other}' (expected threads or procs)"
                    )))
                }
            };
            let cfg = SweepConfig {
                strategies,
                worker_counts: workers,
                repeats: repeat,
                backend,
            };
            let runner: Arc<dyn JobRunner> = Arc::new(PricingRunner::new(market.config()?));
            let runs = run_sweep(&job_list, &cfg, runner);
            let mut records: Vec<BenchRecord> = Vec::new();
            let mut failures = Vec::new();
            for r in runs {
                match r {
                    SweepRun::Done(rec) => {
                        log::info!(
                            "{}: {} jobs on {} cpus in {:.3}s",
                            rec.run_id,
                            rec.job_count,
                            rec.n_cpus,
                            rec.wall_time
                        );
                        records.push(rec);
                    }
                    SweepRun::Failed {
                        strategy,
                        workers,
                        repeat,
                        error,
                    } => failures.push(format!("{strategy} w={workers} r={repeat}: {error}")),
                }
            }
            if records.is_empty() {
                return Err(CliError::Transport(format!(
                    "every run failed; first: {}",
                    failures.first().cloned().unwrap_or_default()
                )));
            }
            let (csv, md) =
                emit_report(&records, &failures, &out).map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {} and {}", csv.display(), md.display());
            if !failures.is_empty() {
                println!("{} failed runs recorded in the report", failures.len());
            }
            Ok(())
        }
        CommandKind::Report { records, out } => {
            let rows = parse_records_csv(&records).map_err(|e| CliError::Io(e.to_string()))?;
            if rows.is_empty() {
                return Err(CliError::Config("records file has no rows".into()));
            }
            let records: Vec<BenchRecord> = rows
                .iter()
                .enumerate()
                .map(|(i, &(n_cpus, strategy, time_s, _))| BenchRecord {
                    n_cpus,
                    strategy,
                    wall_time: time_s,
                    job_count: 0,
                    run_id: format!("row-{i}"),
                    warm: None,
                })
                .collect();
            let (csv, md) =
                emit_report(&records, &[], &out).map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {} and {}", csv.display(), md.display());
            Ok(())
        }
    }
}
