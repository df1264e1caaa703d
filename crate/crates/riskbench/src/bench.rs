//! Timing harness: strategy/worker-count sweeps, normalized speedup
//! ratios, CSV and Markdown reports.
//!
//! The speedup ratio of a run against the base configuration is
//!
//! ```text
//! ratio = (T_base * W_base) / (W * T)        where W = n_cpus - 1
//! ```
//!
//! i.e. normalization is by worker count, not total CPU count: rank 0
//! only dispatches. A ratio near 1 means linear scaling.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::dispatch::{run_master, run_worker, MasterOptions, Strategy};
use crate::pricing::JobRunner;
use crate::transport::{listen_on, spawn_local};

/// One timed dispatch run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    /// Master plus workers.
    pub n_cpus: u32,
    pub strategy: Strategy,
    /// Master wall clock, first send to last result, seconds.
    pub wall_time: f64,
    pub job_count: usize,
    pub run_id: String,
    /// Cache state documentation for shared-filesystem runs: false on
    /// the first touch of a job set, true on repeats, None elsewhere.
    pub warm: Option<bool>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("records are not comparable: {0}")]
    Mismatch(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Ratio of `r` against `base`, normalized by worker count.
pub fn speedup_ratio(base: &BenchRecord, r: &BenchRecord) -> Result<f64, BenchError> {
    if base.strategy != r.strategy {
        return Err(BenchError::Mismatch(format!(
            "strategies differ: {} vs {}",
            base.strategy, r.strategy
        )));
    }
    if base.job_count != r.job_count {
        return Err(BenchError::Mismatch(format!(
            "job sets differ: {} vs {} jobs",
            base.job_count, r.job_count
        )));
    }
    if base.n_cpus < 2 || r.n_cpus < 2 {
        return Err(BenchError::Mismatch("need at least one worker".into()));
    }
    let base_workers = (base.n_cpus - 1) as f64;
    let workers = (r.n_cpus - 1) as f64;
    Ok(base.wall_time * base_workers / (workers * r.wall_time))
}

/// Aggregated speedup rows for one strategy, base first.
#[derive(Clone, Debug)]
pub struct SpeedupTable {
    pub base: BenchRecord,
    /// (n_cpus, representative time, ratio); the base row has ratio 1.
    pub rows: Vec<(u32, f64, f64)>,
}

impl SpeedupTable {
    /// Builds a table from every record of one strategy over one job
    /// set, aggregating repeats by their minimum time.
    pub fn from_records(records: &[BenchRecord]) -> Result<SpeedupTable, BenchError> {
        let first = records
            .first()
            .ok_or_else(|| BenchError::Mismatch("no records".into()))?;
        let mut by_cpus: Vec<(u32, f64)> = Vec::new();
        for r in records {
            if r.strategy != first.strategy || r.job_count != first.job_count {
                return Err(BenchError::Mismatch(
                    "records mix strategies or job sets".into(),
                ));
            }
            match by_cpus.iter_mut().find(|(n, _)| *n == r.n_cpus) {
                Some((_, t)) => *t = t.min(r.wall_time),
                None => by_cpus.push((r.n_cpus, r.wall_time)),
            }
        }
        by_cpus.sort_by_key(|(n, _)| *n);
        let (base_n, base_t) = by_cpus[0];
        let base = BenchRecord {
            n_cpus: base_n,
            strategy: first.strategy,
            wall_time: base_t,
            job_count: first.job_count,
            run_id: format!("{}-base", first.strategy),
            warm: None,
        };
        let rows = by_cpus
            .iter()
            .map(|&(n, t)| {
                if n == base_n {
                    (n, t, 1.0)
                } else {
                    let r = BenchRecord {
                        n_cpus: n,
                        wall_time: t,
                        ..base.clone()
                    };
                    (
                        n,
                        t,
                        speedup_ratio(&base, &r).expect("same strategy and jobs"),
                    )
                }
            })
            .collect();
        Ok(SpeedupTable { base, rows })
    }
}

/// How sweep runs host their workers.
#[derive(Clone, Debug)]
pub enum SweepBackend {
    /// Workers are threads on the in-process transport.
    Threads,
    /// Workers are OS processes of the given binary, connected over TCP
    /// loopback; the sweep runs the master loop itself.
    WorkerProcesses { bin: PathBuf },
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub strategies: Vec<Strategy>,
    pub worker_counts: Vec<u32>,
    pub repeats: u32,
    pub backend: SweepBackend,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            strategies: Strategy::ALL.to_vec(),
            worker_counts: vec![1, 2, 4, 8],
            repeats: 3,
            backend: SweepBackend::Threads,
        }
    }
}

/// Outcome of one sweep cell; failures are recorded, never dropped.
#[derive(Debug)]
pub enum SweepRun {
    Done(BenchRecord),
    Failed {
        strategy: Strategy,
        workers: u32,
        repeat: u32,
        error: String,
    },
}

/// Runs every (strategy, worker count, repeat) cell sequentially, each
/// on a fresh worker set, so timings never overlap.
pub fn run_sweep(jobs: &[PathBuf], cfg: &SweepConfig, runner: Arc<dyn JobRunner>) -> Vec<SweepRun> {
    let mut runs = Vec::new();
    let mut shared_fs_touched = false;
    for &strategy in &cfg.strategies {
        for &workers in &cfg.worker_counts {
            for repeat in 0..cfg.repeats.max(1) {
                let warm = if strategy == Strategy::SharedFs {
                    let w = shared_fs_touched;
                    shared_fs_touched = true;
                    Some(w)
                } else {
                    None
                };
                let run_id = format!("{strategy}-w{workers}-r{repeat}");
                let result = match &cfg.backend {
                    SweepBackend::Threads => {
                        run_once_threads(jobs, strategy, workers, Arc::clone(&runner))
                    }
                    SweepBackend::WorkerProcesses { bin } => {
                        run_once_procs(jobs, strategy, workers, bin)
                    }
                };
                match result {
                    Ok(wall_time) => runs.push(SweepRun::Done(BenchRecord {
                        n_cpus: workers + 1,
                        strategy,
                        wall_time,
                        job_count: jobs.len(),
                        run_id,
                        warm,
                    })),
                    Err(e) => runs.push(SweepRun::Failed {
                        strategy,
                        workers,
                        repeat,
                        error: e.to_string(),
                    }),
                }
            }
        }
    }
    runs
}

fn run_once_threads(
    jobs: &[PathBuf],
    strategy: Strategy,
    workers: u32,
    runner: Arc<dyn JobRunner>,
) -> Result<f64, BenchError> {
    let mut eps = spawn_local(workers as usize).map_err(|e| BenchError::Run(e.to_string()))?;
    let master = eps.remove(0);
    let handles: Vec<_> = eps
        .into_iter()
        .map(|ep| {
            let runner = Arc::clone(&runner);
            thread::spawn(move || run_worker(&ep, strategy, runner.as_ref()))
        })
        .collect();
    let run = run_master(&master, jobs, strategy, &MasterOptions::default())
        .map_err(|e| BenchError::Run(e.to_string()));
    drop(master);
    for h in handles {
        h.join()
            .map_err(|_| BenchError::Run("worker thread panicked".into()))?
            .map_err(|e| BenchError::Run(e.to_string()))?;
    }
    run.map(|r| r.wall_time)
}

fn run_once_procs(
    jobs: &[PathBuf],
    strategy: Strategy,
    workers: u32,
    bin: &Path,
) -> Result<f64, BenchError> {
    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;

    let mut children: Vec<Child> = Vec::new();
    for _ in 0..workers {
        children.push(
            Command::new(bin)
                .args([
                    "worker",
                    "--connect",
                    &addr.to_string(),
                    "--strategy",
                    strategy.token(),
                ])
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .spawn()?,
        );
    }
    let ep = match listen_on(listener, workers as usize, Duration::from_secs(30)) {
        Ok(ep) => ep,
        Err(e) => {
            for mut c in children {
                let _ = c.kill();
            }
            return Err(BenchError::Run(e.to_string()));
        }
    };
    let run = run_master(&ep, jobs, strategy, &MasterOptions::default())
        .map_err(|e| BenchError::Run(e.to_string()));
    drop(ep);
    for mut c in children {
        match run {
            Ok(_) => {
                let _ = c.wait();
            }
            Err(_) => {
                let _ = c.kill();
                let _ = c.wait();
            }
        }
    }
    run.map(|r| r.wall_time)
}

/// Writes `records.csv` (every run) and `report.md` (aggregated tables)
/// under `out_dir`; returns both paths.
pub fn emit_report(
    records: &[BenchRecord],
    failures: &[String],
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf), BenchError> {
    if records.is_empty() {
        return Err(BenchError::Mismatch("no records to report".into()));
    }
    fs::create_dir_all(out_dir)?;

    // Strategy-major ordering, matching the report column order.
    let order = |s: Strategy| Strategy::ALL.iter().position(|&x| x == s).unwrap();
    let mut sorted: Vec<&BenchRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (order(r.strategy), r.n_cpus, r.run_id.clone()));

    let tables: Vec<SpeedupTable> = Strategy::ALL
        .iter()
        .filter_map(|&s| {
            let of_s: Vec<BenchRecord> = records
                .iter()
                .filter(|r| r.strategy == s)
                .cloned()
                .collect();
            if of_s.is_empty() {
                None
            } else {
                Some(SpeedupTable::from_records(&of_s).expect("homogeneous by construction"))
            }
        })
        .collect();

    let mut csv = String::from("n_cpus,strategy,time_s,ratio\n");
    for r in &sorted {
        let table = tables
            .iter()
            .find(|t| t.base.strategy == r.strategy)
            .unwrap();
        let ratio = speedup_ratio(&table.base, r).expect("same strategy and jobs");
        let ratio = if r.n_cpus == table.base.n_cpus && r.wall_time == table.base.wall_time {
            1.0
        } else {
            ratio
        };
        writeln!(csv, "{},{},{},{}", r.n_cpus, r.strategy, r.wall_time, ratio).unwrap();
    }
    let csv_path = out_dir.join("records.csv");
    fs::write(&csv_path, csv)?;

    let md_path = out_dir.join("report.md");
    fs::write(&md_path, render_markdown(records, &tables, failures))?;
    Ok((csv_path, md_path))
}

fn render_markdown(
    records: &[BenchRecord],
    tables: &[SpeedupTable],
    failures: &[String],
) -> String {
    let mut md = String::from("# Speedup report\n\n");
    let job_count = records.first().map(|r| r.job_count).unwrap_or(0);
    writeln!(
        md,
        "{} jobs per run; repeats aggregated by minimum time.\n",
        job_count
    )
    .unwrap();

    // One paired Time/ratio column block per strategy: full load, NFS,
    // serialized load.
    let mut all_cpus: Vec<u32> = records.iter().map(|r| r.n_cpus).collect();
    all_cpus.sort_unstable();
    all_cpus.dedup();

    let mut header = String::from("| number of CPUs |");
    let mut rule = String::from("|---|");
    for t in tables {
        let name = match t.base.strategy {
            Strategy::FullLoad => "full load",
            Strategy::SharedFs => "NFS",
            Strategy::SerializedLoad => "serialized load",
        };
        write!(header, " Time {name} | Speedup ratio {name} |").unwrap();
        rule.push_str("---|---|");
    }
    md.push_str(&header);
    md.push('\n');
    md.push_str(&rule);
    md.push('\n');
    for &n in &all_cpus {
        write!(md, "| {n} |").unwrap();
        for t in tables {
            match t.rows.iter().find(|(rn, _, _)| *rn == n) {
                Some((_, time, ratio)) => write!(md, " {time:.6} | {ratio:.6} |").unwrap(),
                None => write!(md, " | |").unwrap(),
            }
        }
        md.push('\n');
    }

    // Repeat statistics per (strategy, n_cpus).
    md.push_str("\n## Repeats\n\n| strategy | n_cpus | runs | min_s | mean_s | max_s |\n|---|---|---|---|---|---|\n");
    for t in tables {
        for &(n, _, _) in &t.rows {
            let times: Vec<f64> = records
                .iter()
                .filter(|r| r.strategy == t.base.strategy && r.n_cpus == n)
                .map(|r| r.wall_time)
                .collect();
            let min = times.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            writeln!(
                md,
                "| {} | {} | {} | {:.6} | {:.6} | {:.6} |",
                t.base.strategy,
                n,
                times.len(),
                min,
                mean,
                max
            )
            .unwrap();
        }
    }

    md.push_str(
        "\n## Runs\n\n| run | n_cpus | strategy | time_s | cache |\n|---|---|---|---|---|\n",
    );
    for r in records {
        let cache = match r.warm {
            Some(true) => "warm",
            Some(false) => "cold",
            None => "-",
        };
        writeln!(
            md,
            "| {} | {} | {} | {:.6} | {} |",
            r.run_id, r.n_cpus, r.strategy, r.wall_time, cache
        )
        .unwrap();
    }

    if !failures.is_empty() {
        md.push_str("\n## Failed runs\n\n");
        for f in failures {
            writeln!(md, "- {f}").unwrap();
        }
    }

    md.push_str(
        "\nSpeedup ratio = (T_base x W_base) / (W x T) with W = n_cpus - 1: \
         normalization is by worker count, not total CPU count, since rank 0 \
         only dispatches. NFS rows are cache-sensitive; cold/warm state is \
         recorded per run above.\n",
    );
    md
}

/// Parses a `records.csv` back into (n_cpus, strategy, time, ratio) rows.
pub fn parse_records_csv(path: &Path) -> Result<Vec<(u32, Strategy, f64, f64)>, BenchError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(BenchError::Mismatch(format!("bad CSV row: {line}")));
        }
        rows.push((
            parts[0]
                .parse()
                .map_err(|e| BenchError::Mismatch(format!("{e}")))?,
            parts[1].parse().map_err(BenchError::Mismatch)?,
            parts[2]
                .parse()
                .map_err(|e| BenchError::Mismatch(format!("{e}")))?,
            parts[3]
                .parse()
                .map_err(|e| BenchError::Mismatch(format!("{e}")))?,
        ));
    }
    Ok(rows)
}
