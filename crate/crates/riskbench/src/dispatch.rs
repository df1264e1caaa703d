//! Greedy master/worker portfolio pricer.
//!
//! The master seeds every worker with one job, then reassigns on each
//! completion until the job list drains, collects the outstanding
//! results, and shuts every worker down with an empty-name sentinel.
//! How the problem payload travels is the strategy:
//!
//! * `FullLoad` — master loads and validates the file, re-serializes it
//!   and ships name + bytes;
//! * `SharedFs` — master ships only the file name; the worker reads the
//!   file itself (requires a shared filesystem);
//! * `SerializedLoad` — master maps the file straight to its serialized
//!   image and ships name + bytes without constructing the problem.
//!
//! All three produce identical results for seeded engines; they differ
//! only in where the bytes are read and parsed.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use riskbench_core::codec::{self, CodecError, ResultRecord, SerialBlob};
use thiserror::Error;

use crate::files::{self, FileError, JobOutcome};
use crate::pricing::JobRunner;
use crate::transport::{tag, Endpoint, TransportError, ANY};

/// Payload-transmission strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    FullLoad,
    SharedFs,
    SerializedLoad,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::FullLoad,
        Strategy::SharedFs,
        Strategy::SerializedLoad,
    ];

    /// Short CLI name.
    pub fn token(self) -> &'static str {
        match self {
            Strategy::FullLoad => "full",
            Strategy::SharedFs => "nfs",
            Strategy::SerializedLoad => "sload",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Strategy::FullLoad),
            "nfs" => Ok(Strategy::SharedFs),
            "sload" => Ok(Strategy::SerializedLoad),
            other => Err(format!(
                "unknown strategy '{other}' (expected full, nfs or sload)"
            )),
        }
    }
}

/// Failure codes for result records that did not come out of an engine.
pub mod failure_code {
    /// File could not be read.
    pub const IO: u32 = 40;
    /// Worker returned no record for an assigned job.
    pub const MISSING_RESULT: u32 = 41;
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("job list is empty")]
    NoJobs,
    #[error("no workers attached (collective size {0})")]
    NoWorkers(u32),
    #[error(
        "worker {rank} lost mid-run: {completed} jobs completed, {} missing ({first_missing}...)",
        missing.len(),
    )]
    WorkerLost {
        rank: u32,
        completed: usize,
        missing: Vec<String>,
        first_missing: String,
    },
    #[error("malformed result payload from worker {rank}: {source}")]
    BadResultPayload { rank: u32, source: CodecError },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    File(#[from] FileError),
}

/// Master-side knobs.
#[derive(Clone, Debug)]
pub struct MasterOptions {
    /// Problems per payload frame. 1 reproduces the one-job-per-message
    /// protocol; larger values trade latency for fewer messages.
    pub batch: usize,
    /// Reassign the lost job instead of aborting when a worker dies.
    /// Off by default: silent reassignment would corrupt timing runs.
    pub reassign_on_failure: bool,
    /// Where to persist the outcome records (`pb-res.rbr`).
    pub results_path: Option<PathBuf>,
}

impl Default for MasterOptions {
    fn default() -> Self {
        MasterOptions {
            batch: 1,
            reassign_on_failure: false,
            results_path: None,
        }
    }
}

/// Outcome of a master run.
#[derive(Debug)]
pub struct MasterRun {
    pub outcomes: Vec<JobOutcome>,
    /// Master wall clock from first send to last result, seconds.
    pub wall_time: f64,
}

fn pack_container(items: &[Vec<u8>]) -> Vec<u8> {
    let mut w = codec::ByteWriter::new();
    w.put_u32(items.len() as u32);
    for item in items {
        w.put_u32(item.len() as u32);
        w.put_bytes(item);
    }
    w.into_bytes()
}

fn unpack_container(payload: &[u8]) -> Result<Vec<Vec<u8>>, CodecError> {
    let mut r = codec::ByteReader::new(payload);
    let count = r.get_u32()? as usize;
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.get_u32()? as usize;
        let mut item = vec![0u8; len];
        for b in item.iter_mut() {
            *b = r.get_u8()?;
        }
        items.push(item);
    }
    r.expect_end()?;
    Ok(items)
}

/// Problem id embedded in a job file path (the file stem).
pub fn job_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

struct PreparedUnit {
    names: Vec<String>,
    blobs: Vec<Vec<u8>>,
    sent_ids: Vec<String>,
    failed: Vec<ResultRecord>,
}

fn prepare_unit(unit: &[PathBuf], strategy: Strategy) -> PreparedUnit {
    let mut prepared = PreparedUnit {
        names: Vec::new(),
        blobs: Vec::new(),
        sent_ids: Vec::new(),
        failed: Vec::new(),
    };
    for path in unit {
        let id = job_id_of(path);
        let built: Result<Option<Vec<u8>>, ResultRecord> = match strategy {
            Strategy::SharedFs => {
                if path.is_file() {
                    Ok(None)
                } else {
                    Err(ResultRecord::Failed {
                        problem_id: id.clone(),
                        code: failure_code::IO,
                        message: format!("{} is not readable", path.display()),
                    })
                }
            }
            Strategy::SerializedLoad => match files::sload(path) {
                Ok(blob) => Ok(Some(blob.payload)),
                Err(e) => Err(ResultRecord::Failed {
                    problem_id: id.clone(),
                    code: failure_code::IO,
                    message: e.to_string(),
                }),
            },
            Strategy::FullLoad => match files::load(path) {
                // The object is constructed and validated on the master,
                // then serialized again for the wire.
                Ok(spec) => Ok(Some(codec::encode(&spec).payload)),
                Err(FileError::Codec { source, .. }) => Err(ResultRecord::Failed {
                    problem_id: id.clone(),
                    code: source.code(),
                    message: source.to_string(),
                }),
                Err(e) => Err(ResultRecord::Failed {
                    problem_id: id.clone(),
                    code: failure_code::IO,
                    message: e.to_string(),
                }),
            },
        };
        match built {
            Ok(maybe_blob) => {
                prepared.names.push(path.display().to_string());
                if let Some(blob) = maybe_blob {
                    prepared.blobs.push(blob);
                }
                prepared.sent_ids.push(id);
            }
            Err(record) => prepared.failed.push(record),
        }
    }
    prepared
}

/// Ships one job (or batch) to a worker: a NAME frame, then for the
/// byte-carrying strategies a BLOB frame. Master-side file failures are
/// returned as failed records without contacting the worker.
pub fn send_job(
    ep: &Endpoint,
    unit: &[PathBuf],
    worker: u32,
    strategy: Strategy,
) -> Result<(Vec<String>, Vec<ResultRecord>), TransportError> {
    let prepared = prepare_unit(unit, strategy);
    if prepared.sent_ids.is_empty() {
        return Ok((prepared.sent_ids, prepared.failed));
    }
    ep.send(worker, tag::NAME, prepared.names.join("\n").as_bytes())?;
    if strategy != Strategy::SharedFs {
        ep.send(worker, tag::BLOB, &pack_container(&prepared.blobs))?;
    }
    Ok((prepared.sent_ids, prepared.failed))
}

/// Blocks for the earliest completed result: probes any source, then
/// receives that worker's RESULT frame. The caller reuses the returned
/// rank for the next assignment.
pub fn receive_result(ep: &Endpoint) -> Result<(u32, Vec<ResultRecord>), DispatchError> {
    let (source, _, _) = ep.probe(ANY, ANY)?;
    let frame = ep.recv(source as i32, tag::RESULT as i32)?;
    let records = unpack_container(&frame.payload)
        .and_then(|items| {
            items
                .iter()
                .map(|bytes| ResultRecord::decode(bytes))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(|source_err| DispatchError::BadResultPayload {
            rank: source,
            source: source_err,
        })?;
    Ok((source, records))
}

struct Outstanding {
    ids: Vec<String>,
    assign: f64,
}

/// Runs the master loop over `jobs` and returns every outcome exactly
/// once. Worker loss aborts with a precise report unless
/// `reassign_on_failure` is set.
pub fn run_master(
    ep: &Endpoint,
    jobs: &[PathBuf],
    strategy: Strategy,
    opts: &MasterOptions,
) -> Result<MasterRun, DispatchError> {
    if jobs.is_empty() {
        return Err(DispatchError::NoJobs);
    }
    let workers = ep.size().saturating_sub(1);
    if workers == 0 {
        return Err(DispatchError::NoWorkers(ep.size()));
    }
    let batch = opts.batch.max(1);

    let started = Instant::now();
    let now = |t0: &Instant| t0.elapsed().as_secs_f64();

    let mut pending: VecDeque<Vec<PathBuf>> = jobs.chunks(batch).map(|c| c.to_vec()).collect();
    let mut outcomes: Vec<JobOutcome> = Vec::with_capacity(jobs.len());
    let mut outstanding: HashMap<u32, Outstanding> = HashMap::new();
    let mut live: BTreeSet<u32> = (1..=workers).collect();
    let mut last_complete = 0.0f64;

    let assign_to = |worker: u32,
                     pending: &mut VecDeque<Vec<PathBuf>>,
                     outstanding: &mut HashMap<u32, Outstanding>,
                     outcomes: &mut Vec<JobOutcome>|
     -> Result<(), DispatchError> {
        while let Some(unit) = pending.pop_front() {
            let (sent, failed) = send_job(ep, &unit, worker, strategy)?;
            let stamp = now(&started);
            for record in failed {
                outcomes.push(JobOutcome {
                    record,
                    worker_rank: 0,
                    enqueue: 0.0,
                    assign: stamp,
                    complete: stamp,
                });
            }
            if !sent.is_empty() {
                outstanding.insert(
                    worker,
                    Outstanding {
                        ids: sent,
                        assign: stamp,
                    },
                );
                return Ok(());
            }
        }
        Ok(())
    };

    // Phase 1: one job to each worker.
    for worker in 1..=workers {
        assign_to(worker, &mut pending, &mut outstanding, &mut outcomes)?;
    }

    // Phases 2 and 3: collect results, reassigning while jobs remain.
    while !outstanding.is_empty() {
        match receive_result(ep) {
            Ok((source, records)) => {
                let unit = match outstanding.remove(&source) {
                    Some(u) => u,
                    None => {
                        return Err(DispatchError::BadResultPayload {
                            rank: source,
                            source: CodecError::BadStatus(255),
                        })
                    }
                };
                let complete = now(&started);
                last_complete = complete;
                let returned: BTreeSet<String> =
                    records.iter().map(|r| r.problem_id().to_owned()).collect();
                for record in records {
                    outcomes.push(JobOutcome {
                        record,
                        worker_rank: source,
                        enqueue: 0.0,
                        assign: unit.assign,
                        complete,
                    });
                }
                for id in &unit.ids {
                    if !returned.contains(id) {
                        outcomes.push(JobOutcome {
                            record: ResultRecord::Failed {
                                problem_id: id.clone(),
                                code: failure_code::MISSING_RESULT,
                                message: "worker returned no record for this job".into(),
                            },
                            worker_rank: source,
                            enqueue: 0.0,
                            assign: unit.assign,
                            complete,
                        });
                    }
                }
                if !pending.is_empty() {
                    assign_to(source, &mut pending, &mut outstanding, &mut outcomes)?;
                }
            }
            Err(DispatchError::Transport(
                TransportError::PeerLost(rank) | TransportError::Protocol { rank, .. },
            )) => {
                live.remove(&rank);
                let lost = outstanding.remove(&rank);
                if !opts.reassign_on_failure {
                    let mut missing: Vec<String> = lost.map(|u| u.ids).unwrap_or_default();
                    for unit in outstanding.values() {
                        missing.extend(unit.ids.iter().cloned());
                    }
                    for unit in &pending {
                        missing.extend(unit.iter().map(|p| job_id_of(p)));
                    }
                    // Let the survivors exit instead of hanging in recv.
                    for w in &live {
                        let _ = ep.send(*w, tag::NAME, b"");
                    }
                    let first_missing = missing.first().cloned().unwrap_or_default();
                    return Err(DispatchError::WorkerLost {
                        rank,
                        completed: outcomes.len(),
                        missing,
                        first_missing,
                    });
                }
                if let Some(unit) = lost {
                    // Requeue the lost assignment at the front; ids map back
                    // to paths through the job naming convention.
                    let paths: Vec<PathBuf> = jobs
                        .iter()
                        .filter(|p| unit.ids.contains(&job_id_of(p)))
                        .cloned()
                        .collect();
                    pending.push_front(paths);
                }
                if live.is_empty() {
                    let missing: Vec<String> = pending
                        .iter()
                        .flat_map(|u| u.iter().map(|p| job_id_of(p)))
                        .collect();
                    let first_missing = missing.first().cloned().unwrap_or_default();
                    return Err(DispatchError::WorkerLost {
                        rank,
                        completed: outcomes.len(),
                        missing,
                        first_missing,
                    });
                }
                // Hand the requeued work to any idle survivor.
                let idle: Vec<u32> = live
                    .iter()
                    .copied()
                    .filter(|w| !outstanding.contains_key(w))
                    .collect();
                for w in idle {
                    if pending.is_empty() {
                        break;
                    }
                    assign_to(w, &mut pending, &mut outstanding, &mut outcomes)?;
                }
            }
            Err(e) => return Err(e),
        }
    }

    // Phase 4: tell every worker to stop.
    for worker in 1..=workers {
        match ep.send(worker, tag::NAME, b"") {
            Ok(()) | Err(TransportError::PeerLost(_)) => {}
            Err(e) if opts.reassign_on_failure => {
                log::warn!("sentinel to worker {worker} failed: {e}");
            }
            Err(e) => return Err(e.into()),
        }
    }

    if let Some(path) = &opts.results_path {
        files::save_outcomes(path, &outcomes)?;
    }

    Ok(MasterRun {
        outcomes,
        wall_time: if last_complete > 0.0 {
            last_complete
        } else {
            now(&started)
        },
    })
}

/// Worker loop: receive a name, obtain the problem per strategy, price
/// it, answer with a RESULT frame; an empty name is the exit signal.
/// Undecodable payloads and unreadable files become failure records, not
/// worker crashes.
pub fn run_worker(
    ep: &Endpoint,
    strategy: Strategy,
    runner: &dyn JobRunner,
) -> Result<usize, DispatchError> {
    let mut priced = 0usize;
    loop {
        let name_frame = ep.recv(0, tag::NAME as i32)?;
        if name_frame.payload.is_empty() {
            return Ok(priced);
        }
        let names: Vec<String> = String::from_utf8_lossy(&name_frame.payload)
            .split('\n')
            .map(str::to_owned)
            .collect();

        let mut records: Vec<ResultRecord> = Vec::with_capacity(names.len());
        match strategy {
            Strategy::SharedFs => {
                for name in &names {
                    records.push(price_one(runner, files::load(Path::new(name)), name));
                    priced += 1;
                }
            }
            Strategy::FullLoad | Strategy::SerializedLoad => {
                let blob_frame = ep.recv(0, tag::BLOB as i32)?;
                let blobs = unpack_container(&blob_frame.payload)
                    .map_err(|source| DispatchError::BadResultPayload { rank: 0, source })?;
                for (i, name) in names.iter().enumerate() {
                    let decoded = blobs
                        .get(i)
                        .ok_or(CodecError::Truncated)
                        .and_then(|bytes| codec::decode(&SerialBlob::from_bytes(bytes.clone())));
                    records.push(price_one(
                        runner,
                        decoded.map_err(RecordableError::Codec),
                        name,
                    ));
                    priced += 1;
                }
            }
        }

        let payload: Vec<Vec<u8>> = records.iter().map(|r| r.encode()).collect();
        ep.send(0, tag::RESULT, &pack_container(&payload))?;
    }
}

enum RecordableError {
    Codec(CodecError),
    File(FileError),
}

impl RecordableError {
    fn code(&self) -> u32 {
        match self {
            RecordableError::Codec(e) => e.code(),
            RecordableError::File(FileError::Codec { source, .. }) => source.code(),
            RecordableError::File(FileError::Io { .. }) => failure_code::IO,
        }
    }

    fn message(&self) -> String {
        match self {
            RecordableError::Codec(e) => e.to_string(),
            RecordableError::File(e) => e.to_string(),
        }
    }
}

impl From<FileError> for RecordableError {
    fn from(e: FileError) -> Self {
        RecordableError::File(e)
    }
}

fn price_one<E: Into<RecordableError>>(
    runner: &dyn JobRunner,
    spec: Result<riskbench_core::ProblemSpec, E>,
    name: &str,
) -> ResultRecord {
    let problem_id = job_id_of(Path::new(name));
    match spec {
        Ok(spec) => match runner.run(&spec) {
            Ok(result) => ResultRecord::Priced(result),
            Err(e) => ResultRecord::Failed {
                problem_id: spec.id,
                code: e.code(),
                message: e.to_string(),
            },
        },
        Err(e) => {
            let e = e.into();
            ResultRecord::Failed {
                problem_id,
                code: e.code(),
                message: e.message(),
            }
        }
    }
}

impl From<CodecError> for RecordableError {
    fn from(e: CodecError) -> Self {
        RecordableError::Codec(e)
    }
}
