//! Architecture-independent binary encoding of problems and results.
//!
//! The format is canonical: every multi-byte integer and real is
//! big-endian, strings and sequences are u32-length-prefixed, and maps
//! serialize as their keys in strictly ascending order. Encoding the same
//! value therefore produces the same bytes on every platform, and a
//! decoded value re-encodes to the original image.
//!
//! Problem image layout (`.rbp`):
//!
//! ```text
//! magic "RBP1" | version u32 | kind u32 | id str | strike f64
//! | maturity f64 | dimension u32 | seed u64
//! | barrier f64                      (down-and-out kind only)
//! | params: count u32, then (key str, value f64) per entry, keys ascending
//! ```
//!
//! Compressed container (`.rbz`): `magic "RBZ1" | original_length u64 |
//! DEFLATE (RFC 1951) stream`. Decoding auto-detects the container by
//! magic, so compressed and uncompressed blobs are interchangeable.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::SpecError;
use crate::problem::{EngineKind, ProblemSpec};
use crate::result::PricingResult;

pub const PROBLEM_MAGIC: [u8; 4] = *b"RBP1";
pub const COMPRESSED_MAGIC: [u8; 4] = *b"RBZ1";
pub const FORMAT_VERSION: u32 = 1;

/// Byte image of a serialized value, possibly compressed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SerialBlob {
    pub payload: Vec<u8>,
    pub compressed: bool,
    /// Length in bytes of the uncompressed image.
    pub original_length: u64,
}

impl SerialBlob {
    /// Wraps raw bytes, classifying them by magic. This is what `sload`
    /// uses: no parsing, no validation.
    pub fn from_bytes(payload: Vec<u8>) -> Self {
        if payload.len() >= 12 && payload[..4] == COMPRESSED_MAGIC {
            let mut len = [0u8; 8];
            len.copy_from_slice(&payload[4..12]);
            SerialBlob {
                original_length: u64::from_be_bytes(len),
                payload,
                compressed: true,
            }
        } else {
            SerialBlob {
                original_length: payload.len() as u64,
                payload,
                compressed: false,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodecError {
    /// Leading magic is neither a problem image nor a compressed container.
    BadMagic,
    /// Input ended before the declared content.
    Truncated,
    /// Image was written by an unknown format version.
    UnsupportedVersion(u32),
    /// Kind tag does not name an engine family.
    UnknownKind(u32),
    /// Bytes left over after a complete value.
    TrailingBytes,
    /// String field is not valid UTF-8.
    BadUtf8,
    /// Map keys are not strictly ascending (non-canonical image).
    NonCanonicalMap,
    /// Option tag byte is neither 0 nor 1.
    BadOptionTag(u8),
    /// Record status byte is unknown.
    BadStatus(u8),
    /// Decoded value violates its own invariants.
    Invalid(SpecError),
    /// compress on a compressed blob, or decompress on an uncompressed one.
    CompressionState,
    /// DEFLATE stream is corrupt.
    Inflate,
    /// Decompressed size differs from the recorded original length.
    LengthMismatch { expected: u64, got: u64 },
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::BadMagic => write!(f, "bad magic"),
            CodecError::Truncated => write!(f, "truncated image"),
            CodecError::UnsupportedVersion(v) => write!(f, "unsupported format version {v}"),
            CodecError::UnknownKind(k) => write!(f, "unknown kind tag {k}"),
            CodecError::TrailingBytes => write!(f, "trailing bytes after value"),
            CodecError::BadUtf8 => write!(f, "string field is not valid UTF-8"),
            CodecError::NonCanonicalMap => write!(f, "map keys out of order"),
            CodecError::BadOptionTag(t) => write!(f, "bad option tag {t}"),
            CodecError::BadStatus(s) => write!(f, "bad record status {s}"),
            CodecError::Invalid(e) => write!(f, "invalid value: {e}"),
            CodecError::CompressionState => write!(f, "blob is already in the requested state"),
            CodecError::Inflate => write!(f, "corrupt DEFLATE stream"),
            CodecError::LengthMismatch { expected, got } => {
                write!(f, "decompressed {got} bytes, expected {expected}")
            }
        }
    }
}

impl core::error::Error for CodecError {}

/// Stable numeric code per error variant, for wire reports.
impl CodecError {
    pub fn code(&self) -> u32 {
        match self {
            CodecError::BadMagic => 20,
            CodecError::Truncated => 21,
            CodecError::UnsupportedVersion(_) => 22,
            CodecError::UnknownKind(_) => 23,
            CodecError::TrailingBytes => 24,
            CodecError::BadUtf8 => 25,
            CodecError::NonCanonicalMap => 26,
            CodecError::BadOptionTag(_) => 27,
            CodecError::BadStatus(_) => 28,
            CodecError::Invalid(_) => 29,
            CodecError::CompressionState => 30,
            CodecError::Inflate => 31,
            CodecError::LengthMismatch { .. } => 32,
        }
    }
}

/// Big-endian byte sink.
#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_be_bytes());
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn put_opt_f64(&mut self, v: Option<f64>) {
        match v {
            None => self.put_u8(0),
            Some(x) => {
                self.put_u8(1);
                self.put_f64(x);
            }
        }
    }

    pub fn put_bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
}

/// Big-endian byte source with fail-closed reads.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn get_u64(&mut self) -> Result<u64, CodecError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_be_bytes(a))
    }

    pub fn get_f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_bits(self.get_u64()?))
    }

    pub fn get_str(&mut self) -> Result<String, CodecError> {
        let len = self.get_u32()? as usize;
        let bytes = self.take(len)?;
        core::str::from_utf8(bytes)
            .map(String::from)
            .map_err(|_| CodecError::BadUtf8)
    }

    pub fn get_opt_f64(&mut self) -> Result<Option<f64>, CodecError> {
        match self.get_u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.get_f64()?)),
            t => Err(CodecError::BadOptionTag(t)),
        }
    }

    pub fn expect_end(&self) -> Result<(), CodecError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(CodecError::TrailingBytes)
        }
    }
}

/// Canonical byte image of a problem. Same spec, same bytes, everywhere.
pub fn encode(spec: &ProblemSpec) -> SerialBlob {
    let mut w = ByteWriter::new();
    w.put_bytes(&PROBLEM_MAGIC);
    w.put_u32(FORMAT_VERSION);
    w.put_u32(spec.kind.wire_tag());
    w.put_str(&spec.id);
    w.put_f64(spec.strike);
    w.put_f64(spec.maturity);
    w.put_u32(spec.dimension);
    w.put_u64(spec.seed);
    if spec.kind == EngineKind::BarrierDownOutCall {
        w.put_f64(spec.barrier.unwrap_or(f64::NAN));
    }
    w.put_u32(spec.method_params.len() as u32);
    for (k, v) in &spec.method_params {
        w.put_str(k);
        w.put_f64(*v);
    }
    SerialBlob::from_bytes(w.into_bytes())
}

/// Inverse of [`encode`]. Accepts compressed and uncompressed blobs
/// transparently and validates the decoded spec's invariants.
pub fn decode(blob: &SerialBlob) -> Result<ProblemSpec, CodecError> {
    let plain;
    let bytes: &[u8] = if blob.payload.len() >= 4 && blob.payload[..4] == COMPRESSED_MAGIC {
        plain = decompress(blob)?;
        &plain.payload
    } else {
        &blob.payload
    };
    decode_image(bytes)
}

fn decode_image(bytes: &[u8]) -> Result<ProblemSpec, CodecError> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4).map_err(|_| CodecError::Truncated)?;
    if magic != PROBLEM_MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = r.get_u32()?;
    if version != FORMAT_VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let kind_tag = r.get_u32()?;
    let kind = EngineKind::from_wire_tag(kind_tag).ok_or(CodecError::UnknownKind(kind_tag))?;
    let id = r.get_str()?;
    let strike = r.get_f64()?;
    let maturity = r.get_f64()?;
    let dimension = r.get_u32()?;
    let seed = r.get_u64()?;
    let barrier = if kind == EngineKind::BarrierDownOutCall {
        Some(r.get_f64()?)
    } else {
        None
    };
    let count = r.get_u32()? as usize;
    let mut method_params = alloc::collections::BTreeMap::new();
    let mut last_key: Option<String> = None;
    for _ in 0..count {
        let key = r.get_str()?;
        if let Some(prev) = &last_key {
            if *prev >= key {
                return Err(CodecError::NonCanonicalMap);
            }
        }
        let value = r.get_f64()?;
        last_key = Some(key.clone());
        method_params.insert(key, value);
    }
    r.expect_end()?;
    let spec = ProblemSpec {
        id,
        kind,
        strike,
        maturity,
        barrier,
        dimension,
        method_params,
        seed,
    };
    spec.validate().map_err(CodecError::Invalid)?;
    Ok(spec)
}

/// Wraps an uncompressed blob in the DEFLATE container.
pub fn compress(blob: &SerialBlob) -> Result<SerialBlob, CodecError> {
    if blob.compressed {
        return Err(CodecError::CompressionState);
    }
    let deflated = miniz_oxide::deflate::compress_to_vec(&blob.payload, 6);
    let mut w = ByteWriter::new();
    w.put_bytes(&COMPRESSED_MAGIC);
    w.put_u64(blob.payload.len() as u64);
    w.put_bytes(&deflated);
    Ok(SerialBlob {
        payload: w.into_bytes(),
        compressed: true,
        original_length: blob.payload.len() as u64,
    })
}

/// Inverse of [`compress`].
pub fn decompress(blob: &SerialBlob) -> Result<SerialBlob, CodecError> {
    if blob.payload.len() < 12 || blob.payload[..4] != COMPRESSED_MAGIC {
        return Err(CodecError::CompressionState);
    }
    let mut r = ByteReader::new(&blob.payload[4..]);
    let original_length = r.get_u64()?;
    let inflated = miniz_oxide::inflate::decompress_to_vec(&blob.payload[12..])
        .map_err(|_| CodecError::Inflate)?;
    if inflated.len() as u64 != original_length {
        return Err(CodecError::LengthMismatch {
            expected: original_length,
            got: inflated.len() as u64,
        });
    }
    Ok(SerialBlob {
        original_length,
        payload: inflated,
        compressed: false,
    })
}

/// Outcome of pricing one problem, as carried in result frames and the
/// results file: either a priced result or a failure report.
#[derive(Clone, Debug, PartialEq)]
pub enum ResultRecord {
    Priced(PricingResult),
    Failed {
        problem_id: String,
        code: u32,
        message: String,
    },
}

impl ResultRecord {
    pub fn problem_id(&self) -> &str {
        match self {
            ResultRecord::Priced(r) => &r.problem_id,
            ResultRecord::Failed { problem_id, .. } => problem_id,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        match self {
            ResultRecord::Priced(r) => {
                w.put_u8(0);
                w.put_str(&r.problem_id);
                w.put_f64(r.price);
                w.put_opt_f64(r.std_error);
                w.put_opt_f64(r.delta);
                w.put_f64(r.wall_time);
                w.put_u32(r.degraded_dates);
            }
            ResultRecord::Failed {
                problem_id,
                code,
                message,
            } => {
                w.put_u8(1);
                w.put_str(problem_id);
                w.put_u32(*code);
                w.put_str(message);
            }
        }
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = ByteReader::new(bytes);
        let rec = Self::read_from(&mut r)?;
        r.expect_end()?;
        Ok(rec)
    }

    pub fn read_from(r: &mut ByteReader<'_>) -> Result<Self, CodecError> {
        match r.get_u8()? {
            0 => {
                let problem_id = r.get_str()?;
                let price = r.get_f64()?;
                let std_error = r.get_opt_f64()?;
                let delta = r.get_opt_f64()?;
                let wall_time = r.get_f64()?;
                let degraded_dates = r.get_u32()?;
                Ok(ResultRecord::Priced(PricingResult {
                    problem_id,
                    price,
                    std_error,
                    delta,
                    wall_time,
                    degraded_dates,
                }))
            }
            1 => Ok(ResultRecord::Failed {
                problem_id: r.get_str()?,
                code: r.get_u32()?,
                message: r.get_str()?,
            }),
            s => Err(CodecError::BadStatus(s)),
        }
    }
}
