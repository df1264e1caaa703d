//! Dispatch integration: exactly-once outcomes, strategy invariance,
//! greedy reassignment timing, failure handling.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{pricing_runner, run_in_proc, write_sleep_jobs, SLEEP_RUNNER};
use riskbench::dispatch::{
    failure_code, run_master, run_worker, send_job, DispatchError, MasterOptions, Strategy,
};
use riskbench::files::JobOutcome;
use riskbench::portfolio::{generate, job_files, PortfolioConfig, Preset};
use riskbench::pricing::JobRunner;
use riskbench::transport::{spawn_local, tag, ANY};
use riskbench_core::codec::ResultRecord;

fn price_map(outcomes: &[JobOutcome]) -> BTreeMap<String, u64> {
    outcomes
        .iter()
        .map(|o| match &o.record {
            ResultRecord::Priced(r) => (r.problem_id.clone(), r.price.to_bits()),
            ResultRecord::Failed {
                problem_id, code, ..
            } => (problem_id.clone(), *code as u64),
        })
        .collect()
}

#[test]
fn one_job_three_workers() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = write_sleep_jobs(dir.path(), &[1]);
    let run = run_in_proc(
        &jobs,
        Strategy::SerializedLoad,
        3,
        &SLEEP_RUNNER,
        &MasterOptions::default(),
    )
    .unwrap();
    assert_eq!(run.outcomes.len(), 1);
    // run_in_proc joins all three workers: each saw its sentinel and exited.
}

#[test]
fn single_worker_is_sequential_in_job_order() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = write_sleep_jobs(dir.path(), &[0, 0, 0, 0, 0, 0, 0, 0]);
    let run = run_in_proc(
        &jobs,
        Strategy::FullLoad,
        1,
        &SLEEP_RUNNER,
        &MasterOptions::default(),
    )
    .unwrap();
    let ids: Vec<&str> = run.outcomes.iter().map(|o| o.problem_id()).collect();
    let expected: Vec<String> = (0..8).map(|i| format!("Sleep_{i:04}")).collect();
    assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
    for o in &run.outcomes {
        assert_eq!(o.worker_rank, 1);
        assert!(o.complete >= o.assign && o.assign >= o.enqueue);
    }
}

#[test]
fn long_job_does_not_block_short_ones() {
    // Durations {500,100,100,100,100,100} ms on two workers: greedy
    // reassignment keeps the makespan near the long job, not the sum.
    let dir = tempfile::tempdir().unwrap();
    let jobs = write_sleep_jobs(dir.path(), &[500, 100, 100, 100, 100, 100]);
    let started = Instant::now();
    let run = run_in_proc(
        &jobs,
        Strategy::SerializedLoad,
        2,
        &SLEEP_RUNNER,
        &MasterOptions::default(),
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(run.outcomes.len(), 6);
    assert!(elapsed < 0.8, "makespan {elapsed}s, greedy bound violated");
    assert!(run.wall_time >= 0.5);
}

#[test]
fn results_arrive_in_completion_order() {
    let dir = tempfile::tempdir().unwrap();
    // First job long, second short: with two workers the second finishes
    // first even though it was assigned second.
    let jobs = write_sleep_jobs(dir.path(), &[300, 30]);
    let run = run_in_proc(
        &jobs,
        Strategy::SerializedLoad,
        2,
        &SLEEP_RUNNER,
        &MasterOptions::default(),
    )
    .unwrap();
    let ids: Vec<&str> = run.outcomes.iter().map(|o| o.problem_id()).collect();
    assert_eq!(ids, vec!["Sleep_0001", "Sleep_0000"]);
}

#[test]
fn strategies_agree_exactly_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PortfolioConfig::new(dir.path());
    generate(&cfg, Preset::Toy { jobs: 30 }).unwrap();
    let jobs = job_files(dir.path()).unwrap();

    let mut maps = Vec::new();
    for strategy in Strategy::ALL {
        for workers in [1usize, 2] {
            let run = run_in_proc(
                &jobs,
                strategy,
                workers,
                pricing_runner(),
                &MasterOptions::default(),
            )
            .unwrap();
            assert_eq!(run.outcomes.len(), jobs.len(), "{strategy} w={workers}");
            maps.push(price_map(&run.outcomes));
        }
    }
    for m in &maps[1..] {
        assert_eq!(m, &maps[0], "strategy or worker count changed a price");
    }
}

#[test]
fn batched_dispatch_is_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PortfolioConfig::new(dir.path());
    generate(&cfg, Preset::Toy { jobs: 23 }).unwrap();
    let jobs = job_files(dir.path()).unwrap();

    let single = run_in_proc(
        &jobs,
        Strategy::SerializedLoad,
        2,
        pricing_runner(),
        &MasterOptions::default(),
    )
    .unwrap();
    let batched_opts = MasterOptions {
        batch: 4,
        ..Default::default()
    };
    let batched = run_in_proc(
        &jobs,
        Strategy::SerializedLoad,
        2,
        pricing_runner(),
        &batched_opts,
    )
    .unwrap();
    assert_eq!(price_map(&single.outcomes), price_map(&batched.outcomes));
}

#[test]
fn corrupt_job_becomes_a_failure_record_and_the_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = write_sleep_jobs(dir.path(), &[0, 0, 0]);
    // Corrupt the middle file in place.
    std::fs::write(&jobs[1], b"RBP1garbage").unwrap();

    for strategy in [Strategy::SerializedLoad, Strategy::SharedFs] {
        let run =
            run_in_proc(&jobs, strategy, 2, &SLEEP_RUNNER, &MasterOptions::default()).unwrap();
        assert_eq!(run.outcomes.len(), 3, "{strategy}");
        let failed: Vec<&JobOutcome> = run
            .outcomes
            .iter()
            .filter(|o| matches!(o.record, ResultRecord::Failed { .. }))
            .collect();
        assert_eq!(failed.len(), 1, "{strategy}");
        assert_eq!(failed[0].problem_id(), "Sleep_0001");
    }
}

#[test]
fn missing_file_fails_on_the_master_without_worker_contact() {
    let dir = tempfile::tempdir().unwrap();
    let mut jobs = write_sleep_jobs(dir.path(), &[0, 0]);
    jobs.push(dir.path().join("Ghost_0000.rbp"));

    for strategy in Strategy::ALL {
        let run =
            run_in_proc(&jobs, strategy, 1, &SLEEP_RUNNER, &MasterOptions::default()).unwrap();
        assert_eq!(run.outcomes.len(), 3);
        let ghost = run
            .outcomes
            .iter()
            .find(|o| o.problem_id() == "Ghost_0000")
            .unwrap();
        assert_eq!(
            ghost.worker_rank, 0,
            "{strategy}: failed on the master side"
        );
        match &ghost.record {
            ResultRecord::Failed { code, .. } => assert_eq!(*code, failure_code::IO),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}

#[test]
fn shared_fs_frames_are_strictly_smaller_than_blob_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PortfolioConfig::new(dir.path());
    generate(&cfg, Preset::Toy { jobs: 12 }).unwrap();
    let jobs = job_files(dir.path()).unwrap();

    for path in &jobs {
        let unit = vec![path.clone()];
        let mut sizes = BTreeMap::new();
        for strategy in Strategy::ALL {
            let eps = spawn_local(1).unwrap();
            send_job(&eps[0], &unit, 1, strategy).unwrap();
            let mut total = 0usize;
            let name = eps[1].recv(0, tag::NAME as i32).unwrap();
            total += name.payload.len();
            if strategy != Strategy::SharedFs {
                let blob = eps[1].recv(0, tag::BLOB as i32).unwrap();
                total += blob.payload.len();
                sizes.insert(format!("{strategy}-blob"), blob.payload.clone());
            }
            sizes.insert(format!("{strategy}-total"), total.to_be_bytes().to_vec());
        }
        let nfs = usize::from_be_bytes(sizes["nfs-total"][..8].try_into().unwrap());
        let full = usize::from_be_bytes(sizes["full-total"][..8].try_into().unwrap());
        let sload = usize::from_be_bytes(sizes["sload-total"][..8].try_into().unwrap());
        assert!(
            nfs < full && nfs < sload,
            "{path:?}: nfs={nfs} full={full} sload={sload}"
        );
        // Canonical encoding: both blob strategies ship identical bytes.
        assert_eq!(sizes["full-blob"], sizes["sload-blob"], "{path:?}");
    }
}

#[test]
fn immediate_sentinel_exits_worker_with_nothing_priced() {
    let eps = spawn_local(1).unwrap();
    eps[0].send(1, tag::NAME, b"").unwrap();
    let priced = run_worker(&eps[1], Strategy::SerializedLoad, &SLEEP_RUNNER).unwrap();
    assert_eq!(priced, 0);
}

#[test]
fn worker_loss_aborts_with_a_precise_report() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = write_sleep_jobs(dir.path(), &[0, 200, 0, 0, 0, 0]);

    let mut eps = spawn_local(2).unwrap();
    let master = eps.remove(0);
    let w1 = eps.remove(0);
    let w2 = eps.remove(0);
    // Worker 1 processes jobs normally; worker 2 dies after its first job.
    let h1 = std::thread::spawn(move || {
        let _ = run_worker(&w1, Strategy::SerializedLoad, &SLEEP_RUNNER);
    });
    let h2 = std::thread::spawn(move || {
        // Handle exactly one job, then vanish without answering further.
        let name = w2.recv(0, tag::NAME as i32).unwrap();
        assert!(!name.payload.is_empty());
        let _blob = w2.recv(0, tag::BLOB as i32).unwrap();
        drop(w2);
    });

    let err = run_master(
        &master,
        &jobs,
        Strategy::SerializedLoad,
        &MasterOptions::default(),
    )
    .unwrap_err();
    match err {
        DispatchError::WorkerLost { rank, missing, .. } => {
            assert_eq!(rank, 2);
            assert!(!missing.is_empty());
        }
        other => panic!("expected WorkerLost, got {other}"),
    }
    drop(master);
    h1.join().unwrap();
    h2.join().unwrap();
}

#[test]
fn lenient_mode_reassigns_after_a_loss() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = write_sleep_jobs(dir.path(), &[0, 100, 0, 0, 0, 0]);

    let mut eps = spawn_local(2).unwrap();
    let master = eps.remove(0);
    let w1 = eps.remove(0);
    let w2 = eps.remove(0);
    let h1 = std::thread::spawn(move || {
        let _ = run_worker(&w1, Strategy::SerializedLoad, &SLEEP_RUNNER);
    });
    let h2 = std::thread::spawn(move || {
        let name = w2.recv(0, tag::NAME as i32).unwrap();
        assert!(!name.payload.is_empty());
        let _blob = w2.recv(0, tag::BLOB as i32).unwrap();
        drop(w2);
    });

    let opts = MasterOptions {
        reassign_on_failure: true,
        ..Default::default()
    };
    let run = run_master(&master, &jobs, Strategy::SerializedLoad, &opts).unwrap();
    assert_eq!(run.outcomes.len(), jobs.len());
    // Every job has exactly one outcome despite the loss.
    let mut ids: Vec<&str> = run.outcomes.iter().map(|o| o.problem_id()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), jobs.len());
    drop(master);
    h1.join().unwrap();
    h2.join().unwrap();
}

#[test]
fn outcomes_persist_to_the_results_file() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = write_sleep_jobs(dir.path(), &[0, 0, 0, 0]);
    let results = dir.path().join("pb-res.rbr");
    let opts = MasterOptions {
        results_path: Some(results.clone()),
        ..Default::default()
    };
    let run = run_in_proc(&jobs, Strategy::SerializedLoad, 2, &SLEEP_RUNNER, &opts).unwrap();
    let loaded = riskbench::files::load_outcomes(&results).unwrap();
    assert_eq!(loaded.len(), run.outcomes.len());
    assert_eq!(price_map(&loaded), price_map(&run.outcomes));
}

#[test]
fn dispatched_price_equals_a_direct_engine_call() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PortfolioConfig::new(dir.path());
    let problems = generate(&cfg, Preset::Toy { jobs: 6 }).unwrap();
    let jobs = job_files(dir.path()).unwrap();
    let run = run_in_proc(
        &jobs,
        Strategy::FullLoad,
        2,
        pricing_runner(),
        &MasterOptions::default(),
    )
    .unwrap();
    for spec in &problems {
        let direct = pricing_runner().run(spec).map(|r| r.price).ok();
        let dispatched = run
            .outcomes
            .iter()
            .find(|o| o.problem_id() == spec.id)
            .unwrap();
        match (&dispatched.record, direct) {
            (ResultRecord::Priced(r), Some(p)) => {
                assert_eq!(r.price.to_bits(), p.to_bits(), "{}", spec.id)
            }
            (record, direct) => panic!("{}: {record:?} vs {direct:?}", spec.id),
        }
    }
}

#[test]
fn any_source_receive_uses_the_minus_one_convention() {
    let eps = spawn_local(2).unwrap();
    eps[1].send(0, tag::RESULT, b"x").unwrap();
    let (src, tg, len) = eps[0].probe(ANY, ANY).unwrap();
    assert_eq!(ANY, -1);
    assert_eq!((src, tg, len), (1, tag::RESULT, 1));
}

#[test]
fn compressed_portfolio_prices_identically_under_every_strategy() {
    let plain_dir = tempfile::tempdir().unwrap();
    let packed_dir = tempfile::tempdir().unwrap();
    let plain_cfg = PortfolioConfig::new(plain_dir.path());
    let packed_cfg = PortfolioConfig {
        compress: true,
        ..PortfolioConfig::new(packed_dir.path())
    };
    generate(&plain_cfg, Preset::Toy { jobs: 18 }).unwrap();
    generate(&packed_cfg, Preset::Toy { jobs: 18 }).unwrap();
    let plain_jobs = job_files(plain_dir.path()).unwrap();
    let packed_jobs = job_files(packed_dir.path()).unwrap();
    assert!(packed_jobs.iter().all(|p| p.extension().unwrap() == "rbz"));

    let reference = run_in_proc(
        &plain_jobs,
        Strategy::SerializedLoad,
        2,
        pricing_runner(),
        &MasterOptions::default(),
    )
    .unwrap();
    for strategy in Strategy::ALL {
        let run = run_in_proc(&packed_jobs, strategy, 2, pricing_runner(), &MasterOptions::default())
            .unwrap();
        assert_eq!(
            price_map(&run.outcomes),
            price_map(&reference.outcomes),
            "{strategy} diverged on the compressed portfolio"
        );
    }
}
