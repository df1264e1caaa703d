//! TCP backend: a star topology with the master at rank 0.
//!
//! Wire framing, big-endian: `total_length u32 | tag u32 | source u32 |
//! payload`, where `total_length` counts everything after the length
//! field (8 + payload bytes). The handshake is `"RBW1" | version u32 |
//! role u32` from the worker, answered after the whole cohort has
//! connected with `"RBW1" | version u32 | rank u32 | size u32`.

use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{
    Endpoint, EndpointInner, Frame, Inbox, LossCause, TransportError, MAX_PAYLOAD, POLL_INTERVAL,
};

pub const WIRE_MAGIC: [u8; 4] = *b"RBW1";
pub const WIRE_VERSION: u32 = 1;
pub const ROLE_WORKER: u32 = 1;

pub(super) struct TcpEndpoint {
    inbox: Arc<Inbox>,
    /// Write halves by destination rank; `None` where no link exists.
    peers: Vec<Option<Mutex<TcpStream>>>,
    local_addr: Option<SocketAddr>,
}

impl TcpEndpoint {
    pub(super) fn inbox(&self) -> &Inbox {
        &self.inbox
    }

    pub(super) fn local_addr(&self) -> Option<SocketAddr> {
        self.local_addr
    }

    pub(super) fn send(
        &self,
        from: u32,
        dest: u32,
        tag: u32,
        payload: &[u8],
    ) -> Result<(), TransportError> {
        if dest == from {
            self.inbox.push_frame(Frame {
                tag,
                source: from,
                payload: payload.to_vec(),
            });
            return Ok(());
        }
        let slot = self
            .peers
            .get(dest as usize)
            .ok_or(TransportError::UnknownRank(dest))?;
        let stream = slot.as_ref().ok_or(TransportError::UnknownRank(dest))?;
        if self.inbox.is_dead(dest) {
            return Err(TransportError::PeerLost(dest));
        }
        let mut buf = Vec::with_capacity(12 + payload.len());
        buf.extend_from_slice(&((payload.len() + 8) as u32).to_be_bytes());
        buf.extend_from_slice(&tag.to_be_bytes());
        buf.extend_from_slice(&from.to_be_bytes());
        buf.extend_from_slice(payload);
        stream
            .lock()
            .unwrap()
            .write_all(&buf)
            .map_err(|_| TransportError::PeerLost(dest))
    }
}

impl Drop for TcpEndpoint {
    fn drop(&mut self) {
        for peer in self.peers.iter().flatten() {
            let _ = peer.lock().unwrap().shutdown(std::net::Shutdown::Both);
        }
    }
}

fn read_exact_or_eof(stream: &mut TcpStream, buf: &mut [u8]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match stream.read(&mut buf[filled..]) {
            Ok(0) => return Ok(false),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Feeds one connection's frames into the shared inbox until the peer
/// disappears or violates the protocol.
fn reader_loop(mut stream: TcpStream, expect_source: u32, inbox: Arc<Inbox>) {
    loop {
        let mut len_buf = [0u8; 4];
        match read_exact_or_eof(&mut stream, &mut len_buf) {
            Ok(true) => {}
            _ => {
                inbox.push_death(expect_source, LossCause::Disconnected);
                return;
            }
        }
        if len_buf == WIRE_MAGIC {
            inbox.push_death(expect_source, LossCause::Protocol("duplicate hello".into()));
            return;
        }
        let total = u32::from_be_bytes(len_buf) as usize;
        if !(8..=8 + MAX_PAYLOAD).contains(&total) {
            inbox.push_death(
                expect_source,
                LossCause::Protocol(format!("bad frame length {total}")),
            );
            return;
        }
        let mut head = [0u8; 8];
        if !matches!(read_exact_or_eof(&mut stream, &mut head), Ok(true)) {
            inbox.push_death(expect_source, LossCause::Disconnected);
            return;
        }
        let tag = u32::from_be_bytes([head[0], head[1], head[2], head[3]]);
        let source = u32::from_be_bytes([head[4], head[5], head[6], head[7]]);
        if source != expect_source {
            inbox.push_death(
                expect_source,
                LossCause::Protocol(format!("frame claims source {source}")),
            );
            return;
        }
        let mut payload = vec![0u8; total - 8];
        if !matches!(read_exact_or_eof(&mut stream, &mut payload), Ok(true)) {
            inbox.push_death(expect_source, LossCause::Disconnected);
            return;
        }
        inbox.push_frame(Frame {
            tag,
            source,
            payload,
        });
    }
}

/// Binds `addr`, waits for `workers` hello handshakes, assigns ranks in
/// connection order, and returns the master endpoint once every worker
/// holds its rank and the collective size.
pub fn listen(
    addr: impl ToSocketAddrs,
    workers: usize,
    accept_timeout: Duration,
) -> Result<Endpoint, TransportError> {
    listen_on(TcpListener::bind(addr)?, workers, accept_timeout)
}

/// [`listen`] on an already-bound listener, so callers can learn the
/// port before the workers exist.
pub fn listen_on(
    listener: TcpListener,
    workers: usize,
    accept_timeout: Duration,
) -> Result<Endpoint, TransportError> {
    listener.set_nonblocking(true)?;
    let local_addr = listener.local_addr()?;
    let deadline = Instant::now() + accept_timeout;

    let mut streams: Vec<TcpStream> = Vec::with_capacity(workers);
    while streams.len() < workers {
        match listener.accept() {
            Ok((mut stream, _)) => {
                stream.set_nonblocking(false)?;
                stream.set_read_timeout(Some(Duration::from_secs(5)))?;
                stream.set_nodelay(true)?;
                let mut hello = [0u8; 12];
                if !matches!(read_exact_or_eof(&mut stream, &mut hello), Ok(true)) {
                    return Err(TransportError::HandshakeMagic);
                }
                if hello[0..4] != WIRE_MAGIC {
                    return Err(TransportError::HandshakeMagic);
                }
                let version = u32::from_be_bytes([hello[4], hello[5], hello[6], hello[7]]);
                if version != WIRE_VERSION {
                    return Err(TransportError::HandshakeVersion(version));
                }
                let role = u32::from_be_bytes([hello[8], hello[9], hello[10], hello[11]]);
                if role != ROLE_WORKER {
                    return Err(TransportError::HandshakeRole(role));
                }
                stream.set_read_timeout(None)?;
                streams.push(stream);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(TransportError::AcceptTimeout);
                }
                thread::sleep(POLL_INTERVAL);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let size = (workers + 1) as u32;
    let inbox = Inbox::new();
    let mut peers: Vec<Option<Mutex<TcpStream>>> = Vec::with_capacity(workers + 1);
    peers.push(None); // rank 0 is us
    for (i, stream) in streams.into_iter().enumerate() {
        let rank = (i + 1) as u32;
        let mut assignment = Vec::with_capacity(16);
        assignment.extend_from_slice(&WIRE_MAGIC);
        assignment.extend_from_slice(&WIRE_VERSION.to_be_bytes());
        assignment.extend_from_slice(&rank.to_be_bytes());
        assignment.extend_from_slice(&size.to_be_bytes());
        let mut stream = stream;
        stream.write_all(&assignment)?;
        let reader = stream.try_clone()?;
        let inbox_for_reader = Arc::clone(&inbox);
        thread::Builder::new()
            .name(format!("rb-read-{rank}"))
            .spawn(move || reader_loop(reader, rank, inbox_for_reader))?;
        peers.push(Some(Mutex::new(stream)));
    }

    Ok(Endpoint {
        rank: 0,
        size,
        inner: EndpointInner::Tcp(TcpEndpoint {
            inbox,
            peers,
            local_addr: Some(local_addr),
        }),
    })
}

/// Connects to a master, retrying until it binds, and blocks until the
/// whole cohort is assembled and a rank is assigned.
pub fn connect(
    addr: impl ToSocketAddrs + Clone,
    timeout: Duration,
) -> Result<Endpoint, TransportError> {
    let deadline = Instant::now() + timeout;
    let mut stream = loop {
        match TcpStream::connect(addr.clone()) {
            Ok(s) => break s,
            Err(e) => {
                if Instant::now() >= deadline {
                    return Err(e.into());
                }
                thread::sleep(Duration::from_millis(20));
            }
        }
    };
    stream.set_nodelay(true)?;

    let mut hello = Vec::with_capacity(12);
    hello.extend_from_slice(&WIRE_MAGIC);
    hello.extend_from_slice(&WIRE_VERSION.to_be_bytes());
    hello.extend_from_slice(&ROLE_WORKER.to_be_bytes());
    stream.write_all(&hello)?;

    let mut assignment = [0u8; 16];
    if !matches!(read_exact_or_eof(&mut stream, &mut assignment), Ok(true)) {
        return Err(TransportError::HandshakeMagic);
    }
    if assignment[0..4] != WIRE_MAGIC {
        return Err(TransportError::HandshakeMagic);
    }
    let version = u32::from_be_bytes([assignment[4], assignment[5], assignment[6], assignment[7]]);
    if version != WIRE_VERSION {
        return Err(TransportError::HandshakeVersion(version));
    }
    let rank = u32::from_be_bytes([assignment[8], assignment[9], assignment[10], assignment[11]]);
    let size = u32::from_be_bytes([
        assignment[12],
        assignment[13],
        assignment[14],
        assignment[15],
    ]);

    let inbox = Inbox::new();
    let reader = stream.try_clone()?;
    let inbox_for_reader = Arc::clone(&inbox);
    thread::Builder::new()
        .name(format!("rb-read-m{rank}"))
        .spawn(move || reader_loop(reader, 0, inbox_for_reader))?;

    // A worker only ever talks to the master.
    let peers = vec![Some(Mutex::new(stream))];

    Ok(Endpoint {
        rank,
        size,
        inner: EndpointInner::Tcp(TcpEndpoint {
            inbox,
            peers,
            local_addr: None,
        }),
    })
}
