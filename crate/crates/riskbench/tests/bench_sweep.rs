//! Bench harness integration: sweeps over synthetic sleep jobs.

mod common;

use std::sync::Arc;

use riskbench::bench::{run_sweep, SpeedupTable, SweepBackend, SweepConfig, SweepRun};
use riskbench::dispatch::Strategy;
use riskbench::pricing::JobRunner;

#[test]
fn sweep_produces_one_record_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = common::write_sleep_jobs(dir.path(), &[1; 8]);
    let cfg = SweepConfig {
        strategies: vec![Strategy::FullLoad, Strategy::SharedFs],
        worker_counts: vec![1, 2, 3],
        repeats: 1,
        backend: SweepBackend::Threads,
    };
    let runner: Arc<dyn JobRunner> = Arc::new(common::SleepRunner);
    let runs = run_sweep(&jobs, &cfg, runner);
    assert_eq!(runs.len(), 6);
    let mut nfs_cold = 0;
    for r in &runs {
        match r {
            SweepRun::Done(rec) => {
                assert_eq!(rec.job_count, 8);
                if rec.warm == Some(false) {
                    nfs_cold += 1;
                }
            }
            SweepRun::Failed { error, .. } => panic!("unexpected failure: {error}"),
        }
    }
    // Exactly the first shared-filesystem run is labeled cold.
    assert_eq!(nfs_cold, 1);
}

#[test]
fn sleep_jobs_scale_nearly_linearly() {
    // 64 jobs of 100 ms across 1, 2 and 4 workers: with negligible
    // dispatch cost the greedy schedule keeps every ratio above 0.9.
    let dir = tempfile::tempdir().unwrap();
    let jobs = common::write_sleep_jobs(dir.path(), &[100; 64]);
    let cfg = SweepConfig {
        strategies: vec![Strategy::SerializedLoad],
        worker_counts: vec![1, 2, 4],
        repeats: 1,
        backend: SweepBackend::Threads,
    };
    let runner: Arc<dyn JobRunner> = Arc::new(common::SleepRunner);
    let runs = run_sweep(&jobs, &cfg, runner);
    let records: Vec<_> = runs
        .into_iter()
        .map(|r| match r {
            SweepRun::Done(rec) => rec,
            SweepRun::Failed { error, .. } => panic!("{error}"),
        })
        .collect();
    let table = SpeedupTable::from_records(&records).unwrap();
    for &(n, time, ratio) in &table.rows {
        assert!(ratio >= 0.9, "n_cpus={n} time={time:.3} ratio={ratio:.3}");
    }
    // Homogeneous jobs: wall time nonincreasing in worker count.
    for pair in table.rows.windows(2) {
        assert!(
            pair[1].1 <= pair[0].1,
            "wall time rose with workers: {:?}",
            table.rows
        );
    }
}

#[test]
fn failed_runs_are_recorded_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = common::write_sleep_jobs(dir.path(), &[1; 4]);
    let cfg = SweepConfig {
        strategies: vec![Strategy::SerializedLoad],
        worker_counts: vec![1],
        repeats: 2,
        backend: SweepBackend::WorkerProcesses {
            bin: "/nonexistent/riskbench-binary".into(),
        },
    };
    let runner: Arc<dyn JobRunner> = Arc::new(common::SleepRunner);
    let runs = run_sweep(&jobs, &cfg, runner);
    assert_eq!(runs.len(), 2);
    for r in runs {
        assert!(matches!(r, SweepRun::Failed { .. }));
    }
}
