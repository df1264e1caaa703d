//! Problem and result files.
//!
//! A `.rbp` file is exactly the canonical problem image; a `.rbz` file is
//! the compressed container around one. `save`/`load` construct and
//! validate the in-memory problem, while `sload` maps a file straight
//! into its byte image without parsing — the cheap path the serialized
//! dispatch strategy relies on. Result files (`.rbr`) hold the outcome
//! records of a dispatch run.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use riskbench_core::codec::{self, CodecError, ResultRecord, SerialBlob};
use riskbench_core::ProblemSpec;
use thiserror::Error;

pub const RESULTS_MAGIC: [u8; 4] = *b"RBR1";
pub const RESULTS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Codec { path: String, source: CodecError },
}

impl FileError {
    fn io(path: &Path, source: io::Error) -> Self {
        FileError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn codec(path: &Path, source: CodecError) -> Self {
        FileError::Codec {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Writes the canonical image of a problem. Compression is opt-in via
/// `save_compressed`; the dispatcher never compresses on its own.
pub fn save(path: &Path, spec: &ProblemSpec) -> Result<(), FileError> {
    let blob = codec::encode(spec);
    write_atomically(path, &blob.payload)
}

/// Writes the compressed container around the canonical image.
pub fn save_compressed(path: &Path, spec: &ProblemSpec) -> Result<(), FileError> {
    let blob = codec::compress(&codec::encode(spec)).expect("fresh encoding is uncompressed");
    write_atomically(path, &blob.payload)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| FileError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| FileError::io(&tmp, e))?;
    f.sync_data().ok();
    drop(f);
    fs::rename(&tmp, path).map_err(|e| FileError::io(path, e))
}

/// Reads, decodes and validates a problem file.
pub fn load(path: &Path) -> Result<ProblemSpec, FileError> {
    let blob = sload(path)?;
    codec::decode(&blob).map_err(|e| FileError::codec(path, e))
}

/// Reads a problem file straight into its serialized image: one read,
/// no parse, no validation. `decode(sload(p)) == load(p)` by definition.
pub fn sload(path: &Path) -> Result<SerialBlob, FileError> {
    let bytes = fs::read(path).map_err(|e| FileError::io(path, e))?;
    Ok(SerialBlob::from_bytes(bytes))
}

/// One dispatched job with its result and master-side timeline
/// (seconds since the run started; complete >= assign >= enqueue).
#[derive(Clone, Debug, PartialEq)]
pub struct JobOutcome {
    pub record: ResultRecord,
    pub worker_rank: u32,
    pub enqueue: f64,
    pub assign: f64,
    pub complete: f64,
}

impl JobOutcome {
    pub fn problem_id(&self) -> &str {
        self.record.problem_id()
    }
}

/// Writes the outcome records of a run (`pb-res.rbr`).
pub fn save_outcomes(path: &Path, outcomes: &[JobOutcome]) -> Result<(), FileError> {
    let mut w = codec::ByteWriter::new();
    w.put_bytes(&RESULTS_MAGIC);
    w.put_u32(RESULTS_VERSION);
    w.put_u32(outcomes.len() as u32);
    for o in outcomes {
        let rec = o.record.encode();
        let mut body = codec::ByteWriter::new();
        body.put_u32(o.worker_rank);
        body.put_f64(o.enqueue);
        body.put_f64(o.assign);
        body.put_f64(o.complete);
        body.put_bytes(&rec);
        let body = body.into_bytes();
        w.put_u32(body.len() as u32);
        w.put_bytes(&body);
    }
    write_atomically(path, &w.into_bytes())
}

/// Reads an outcome file back.
pub fn load_outcomes(path: &Path) -> Result<Vec<JobOutcome>, FileError> {
    let bytes = fs::read(path).map_err(|e| FileError::io(path, e))?;
    parse_outcomes(&bytes).map_err(|e| FileError::codec(path, e))
}

fn parse_outcomes(bytes: &[u8]) -> Result<Vec<JobOutcome>, CodecError> {
    let mut r = codec::ByteReader::new(bytes);
    let mut magic = [0u8; 4];
    for b in &mut magic {
        *b = r.get_u8()?;
    }
    if magic != RESULTS_MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = r.get_u32()?;
    if version != RESULTS_VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let count = r.get_u32()? as usize;
    let mut outcomes = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.get_u32()? as usize;
        if r.remaining() < len {
            return Err(CodecError::Truncated);
        }
        let worker_rank = r.get_u32()?;
        let enqueue = r.get_f64()?;
        let assign = r.get_f64()?;
        let complete = r.get_f64()?;
        let record = ResultRecord::read_from(&mut r)?;
        outcomes.push(JobOutcome {
            record,
            worker_rank,
            enqueue,
            assign,
            complete,
        });
    }
    r.expect_end()?;
    Ok(outcomes)
}
