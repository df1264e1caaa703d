//! Rank-addressed, reliable, ordered message passing with probe
//! semantics, over two interchangeable backends: in-process queues for
//! tests and single-machine sweeps, TCP for clusters.
//!
//! Rank 0 is the master. Wildcards follow the -1 convention at the API
//! surface: `probe(ANY, ANY)` blocks until any frame is available and
//! reports it without consuming it. Delivery is FIFO per (source,
//! destination, tag) channel, and the byte count reported by a probe is
//! exactly what the matching `recv` returns.

mod inproc;
mod tcp;

pub use inproc::spawn_local;
pub use tcp::{connect, listen, listen_on};

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use thiserror::Error;

/// Source/tag wildcard.
pub const ANY: i32 = -1;

/// Frame tags used by the dispatch protocol.
pub mod tag {
    /// Job file name (empty payload is the shutdown sentinel).
    pub const NAME: u32 = 1;
    /// Serialized problem payload.
    pub const BLOB: u32 = 2;
    /// Serialized pricing results.
    pub const RESULT: u32 = 3;
}

/// Hard cap on a single frame payload.
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;

/// One transport message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub tag: u32,
    pub source: u32,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("unknown destination rank {0}")]
    UnknownRank(u32),
    #[error("payload of {len} bytes exceeds the {max}-byte frame limit")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("tag {0} is not a valid frame tag")]
    BadTag(u32),
    #[error("peer rank {0} was lost")]
    PeerLost(u32),
    #[error("protocol violation from rank {rank}: {detail}")]
    Protocol { rank: u32, detail: String },
    #[error("handshake rejected: bad magic")]
    HandshakeMagic,
    #[error("handshake rejected: protocol version {0}")]
    HandshakeVersion(u32),
    #[error("handshake rejected: role {0}")]
    HandshakeRole(u32),
    #[error("timed out waiting for workers to connect")]
    AcceptTimeout,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which backend an endpoint runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    InProcess,
    Tcp,
}

/// Why a peer stopped being reachable.
#[derive(Clone, Debug)]
enum LossCause {
    Disconnected,
    Protocol(String),
}

struct Death {
    rank: u32,
    cause: LossCause,
    /// ANY-probes report each death once; probes naming the rank always
    /// report it.
    reported: bool,
}

/// Receive-side state shared with whatever feeds the endpoint.
struct InboxState {
    queue: VecDeque<Frame>,
    deaths: Vec<Death>,
}

pub(crate) struct Inbox {
    state: Mutex<InboxState>,
    cv: Condvar,
}

impl Inbox {
    fn new() -> Arc<Self> {
        Arc::new(Inbox {
            state: Mutex::new(InboxState {
                queue: VecDeque::new(),
                deaths: Vec::new(),
            }),
            cv: Condvar::new(),
        })
    }

    fn push_frame(&self, frame: Frame) {
        let mut st = self.state.lock().unwrap();
        st.queue.push_back(frame);
        self.cv.notify_all();
    }

    fn push_death(&self, rank: u32, cause: LossCause) {
        let mut st = self.state.lock().unwrap();
        if st.deaths.iter().any(|d| d.rank == rank) {
            return;
        }
        st.deaths.push(Death {
            rank,
            cause,
            reported: false,
        });
        self.cv.notify_all();
    }

    fn is_dead(&self, rank: u32) -> bool {
        self.state
            .lock()
            .unwrap()
            .deaths
            .iter()
            .any(|d| d.rank == rank)
    }

    fn loss_error(death: &Death) -> TransportError {
        match &death.cause {
            LossCause::Disconnected => TransportError::PeerLost(death.rank),
            LossCause::Protocol(detail) => TransportError::Protocol {
                rank: death.rank,
                detail: detail.clone(),
            },
        }
    }

    /// Blocks until a frame matches, reporting it without consuming.
    fn probe(&self, src: i32, tagsel: i32) -> Result<(u32, u32, usize), TransportError> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(f) = st.queue.iter().find(|f| matches(f, src, tagsel)) {
                return Ok((f.source, f.tag, f.payload.len()));
            }
            if let Some(err) = Self::pending_loss(&mut st, src) {
                return Err(err);
            }
            st = self.cv.wait(st).unwrap();
        }
    }

    /// Blocks until a frame matches, consuming and returning it.
    fn recv(&self, src: i32, tagsel: i32) -> Result<Frame, TransportError> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(idx) = st.queue.iter().position(|f| matches(f, src, tagsel)) {
                return Ok(st.queue.remove(idx).unwrap());
            }
            if let Some(err) = Self::pending_loss(&mut st, src) {
                return Err(err);
            }
            st = self.cv.wait(st).unwrap();
        }
    }

    fn pending_loss(st: &mut InboxState, src: i32) -> Option<TransportError> {
        if src >= 0 {
            let rank = src as u32;
            return st
                .deaths
                .iter()
                .find(|d| d.rank == rank)
                .map(Self::loss_error);
        }
        for d in st.deaths.iter_mut() {
            if !d.reported {
                d.reported = true;
                return Some(Self::loss_error(d));
            }
        }
        None
    }

    #[cfg(test)]
    fn queued(&self) -> usize {
        self.state.lock().unwrap().queue.len()
    }
}

fn matches(frame: &Frame, src: i32, tagsel: i32) -> bool {
    (src < 0 || frame.source == src as u32) && (tagsel < 0 || frame.tag == tagsel as u32)
}

fn check_sendable(tag: u32, payload: &[u8]) -> Result<(), TransportError> {
    if !(1..=3).contains(&tag) {
        return Err(TransportError::BadTag(tag));
    }
    if payload.len() > MAX_PAYLOAD {
        return Err(TransportError::PayloadTooLarge {
            len: payload.len(),
            max: MAX_PAYLOAD,
        });
    }
    Ok(())
}

enum EndpointInner {
    InProc(inproc::InProcEndpoint),
    Tcp(tcp::TcpEndpoint),
}

/// One participant of a run. Owned by a single logical control flow;
/// frames from all peers are matched through the internal receive queue.
pub struct Endpoint {
    rank: u32,
    size: u32,
    inner: EndpointInner,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Endpoint")
            .field("rank", &self.rank)
            .field("size", &self.size)
            .field("backend", &self.backend())
            .finish()
    }
}

impl Endpoint {
    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Total participant count, master included.
    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn backend(&self) -> Backend {
        match self.inner {
            EndpointInner::InProc(_) => Backend::InProcess,
            EndpointInner::Tcp(_) => Backend::Tcp,
        }
    }

    /// Bound address of a TCP master endpoint.
    pub fn local_addr(&self) -> Option<std::net::SocketAddr> {
        match &self.inner {
            EndpointInner::InProc(_) => None,
            EndpointInner::Tcp(ep) => ep.local_addr(),
        }
    }

    /// Reliable, ordered send of one frame.
    pub fn send(&self, dest: u32, tag: u32, payload: &[u8]) -> Result<(), TransportError> {
        check_sendable(tag, payload)?;
        match &self.inner {
            EndpointInner::InProc(ep) => ep.send(self.rank, dest, tag, payload),
            EndpointInner::Tcp(ep) => ep.send(self.rank, dest, tag, payload),
        }
    }

    /// Blocks until a matching frame is queued; reports (source, tag,
    /// byte count) without consuming it.
    pub fn probe(&self, src: i32, tagsel: i32) -> Result<(u32, u32, usize), TransportError> {
        self.inbox().probe(src, tagsel)
    }

    /// Blocks until a matching frame is queued; consumes and returns it.
    pub fn recv(&self, src: i32, tagsel: i32) -> Result<Frame, TransportError> {
        self.inbox().recv(src, tagsel)
    }

    fn inbox(&self) -> &Inbox {
        match &self.inner {
            EndpointInner::InProc(ep) => ep.inbox(),
            EndpointInner::Tcp(ep) => ep.inbox(),
        }
    }
}

/// Polling interval for accept loops.
pub(crate) const POLL_INTERVAL: Duration = Duration::from_millis(2);
