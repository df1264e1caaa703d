#![allow(dead_code)]

//! Shared helpers for the integration suites.

use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use riskbench::dispatch::{run_master, run_worker, MasterOptions, MasterRun, Strategy};
use riskbench::pricing::{JobRunner, MarketConfig, PricingRunner};
use riskbench::transport::spawn_local;
use riskbench_core::{EngineKind, PricingError, PricingResult, ProblemSpec};

/// Runner that sleeps for `method_params["sleep_ms"]` and returns a
/// fixed price; used to simulate job durations for scheduling checks.
pub struct SleepRunner;

impl JobRunner for SleepRunner {
    fn run(&self, spec: &ProblemSpec) -> Result<PricingResult, PricingError> {
        let ms = spec.param_or("sleep_ms", 0.0);
        if ms > 0.0 {
            thread::sleep(Duration::from_millis(ms as u64));
        }
        Ok(PricingResult::new(spec.id.clone(), 1.0))
    }
}

/// Writes one sleep-job file per duration and returns the paths.
pub fn write_sleep_jobs(dir: &std::path::Path, durations_ms: &[u64]) -> Vec<PathBuf> {
    durations_ms
        .iter()
        .enumerate()
        .map(|(i, &ms)| {
            let spec =
                ProblemSpec::new(format!("Sleep_{i:04}"), EngineKind::VanillaCall, 100.0, 1.0)
                    .with_param("sleep_ms", ms as f64);
            let path = dir.join(format!("{}.rbp", spec.id));
            riskbench::files::save(&path, &spec).unwrap();
            path
        })
        .collect()
}

/// Runs a full master/worker cycle on the in-process backend. Worker
/// threads all use `runner`.
pub fn run_in_proc(
    jobs: &[PathBuf],
    strategy: Strategy,
    workers: usize,
    runner: &'static dyn JobRunner,
    opts: &MasterOptions,
) -> Result<MasterRun, riskbench::dispatch::DispatchError> {
    let mut eps = spawn_local(workers).unwrap();
    let master = eps.remove(0);
    let handles: Vec<_> = eps
        .into_iter()
        .map(|ep| thread::spawn(move || run_worker(&ep, strategy, runner)))
        .collect();
    let run = run_master(&master, jobs, strategy, opts);
    drop(master);
    for h in handles {
        let _ = h.join().expect("worker thread panicked");
    }
    run
}

/// The default pricing runner with benchmark market settings.
pub fn pricing_runner() -> &'static PricingRunner {
    static RUNNER: PricingRunner = PricingRunner {
        market: MarketConfig {
            spot: 100.0,
            rate: 0.05,
            sigma: 0.2,
            dividend_yield: 0.0,
            correlation_rho: 0.3,
        },
    };
    &RUNNER
}

pub static SLEEP_RUNNER: SleepRunner = SleepRunner;
