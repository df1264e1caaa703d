//! In-process backend: one shared router, one inbox per rank.

use std::sync::Arc;

use super::{Endpoint, EndpointInner, Frame, Inbox, LossCause, TransportError};

pub(super) struct Router {
    inboxes: Vec<Arc<Inbox>>,
}

pub(super) struct InProcEndpoint {
    router: Arc<Router>,
    rank: u32,
}

impl InProcEndpoint {
    pub(super) fn inbox(&self) -> &Inbox {
        &self.router.inboxes[self.rank as usize]
    }

    pub(super) fn send(
        &self,
        from: u32,
        dest: u32,
        tag: u32,
        payload: &[u8],
    ) -> Result<(), TransportError> {
        let inbox = self
            .router
            .inboxes
            .get(dest as usize)
            .ok_or(TransportError::UnknownRank(dest))?;
        if dest != from && self.inbox().is_dead(dest) {
            return Err(TransportError::PeerLost(dest));
        }
        inbox.push_frame(Frame {
            tag,
            source: from,
            payload: payload.to_vec(),
        });
        Ok(())
    }
}

impl Drop for InProcEndpoint {
    fn drop(&mut self) {
        for (rank, inbox) in self.router.inboxes.iter().enumerate() {
            if rank as u32 != self.rank {
                inbox.push_death(self.rank, LossCause::Disconnected);
            }
        }
    }
}

/// Wires one master (rank 0) and `n` workers (ranks 1..=n) pairwise over
/// in-process queues. Every endpoint can be moved to its own thread.
pub fn spawn_local(n: usize) -> Result<Vec<Endpoint>, TransportError> {
    if n < 1 {
        return Err(TransportError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "at least one worker endpoint is required",
        )));
    }
    let router = Arc::new(Router {
        inboxes: (0..=n).map(|_| Inbox::new()).collect(),
    });
    Ok((0..=n as u32)
        .map(|rank| Endpoint {
            rank,
            size: (n + 1) as u32,
            inner: EndpointInner::InProc(InProcEndpoint {
                router: Arc::clone(&router),
                rank,
            }),
        })
        .collect())
}
