use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use super::packet::{peek_header, Hop};
use crate::{Error, Result};

/// A packet as received, tagged with the endpoint that sent it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub src: u32,
    pub bytes: Vec<u8>,
}

/// Message passing between the endpoints (ranks, and brokers when present)
/// of one simulation.
///
/// Delivery is reliable and in order per `(src, dst)` pair. Every packet an
/// endpoint sends before entering [`Transport::barrier`] is visible to its
/// destination once that barrier returns.
pub trait Transport: Send {
    fn endpoint(&self) -> u32;

    fn n_endpoints(&self) -> u32;

    fn send(&mut self, dst: u32, packet: Vec<u8>) -> Result<()>;

    /// Blocks until every endpoint has entered the same barrier.
    fn barrier(&mut self) -> Result<()>;

    /// Removes and returns the packets stamped `(step, hop)` that have
    /// reached this endpoint, ordered by source endpoint. Packets stamped
    /// with a later step stay queued and are never returned early; one
    /// stamped with an earlier step is a protocol violation.
    fn receive_all_for_step(&mut self, step: u32, hop: Hop) -> Result<Vec<Envelope>>;

    /// Releases peers blocked on this endpoint after a local failure.
    fn abort(&mut self);

    /// Marks a clean shutdown; dropping without it aborts.
    fn close(&mut self) {}
}

/// Splits the packets stamped `(step, hop)` out of `pending`.
pub(crate) fn take_matching(
    pending: &mut Vec<Envelope>,
    step: u32,
    hop: Hop,
) -> Result<Vec<Envelope>> {
    let mut out = Vec::new();
    let mut keep = Vec::with_capacity(pending.len());
    for env in pending.drain(..) {
        let (s, h) = peek_header(&env.bytes)?;
        if s < step {
            return Err(Error::StepSkew {
                expected: step,
                observed: s,
            });
        }
        if s == step && h == hop {
            out.push(env);
        } else {
            keep.push(env);
        }
    }
    *pending = keep;
    out.sort_by_key(|e| e.src);
    Ok(out)
}

#[derive(Debug, Default)]
struct BarrierState {
    arrived: u32,
    generation: u64,
    aborted: bool,
}

/// Reusable barrier that can be torn down when a participant fails.
#[derive(Debug)]
struct AbortableBarrier {
    parties: u32,
    state: Mutex<BarrierState>,
    cvar: Condvar,
}

impl AbortableBarrier {
    fn new(parties: u32) -> Self {
        AbortableBarrier {
            parties,
            state: Mutex::new(BarrierState::default()),
            cvar: Condvar::new(),
        }
    }

    fn lock(&self) -> MutexGuard<'_, BarrierState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn wait(&self) -> Result<()> {
        let mut st = self.lock();
        if st.aborted {
            return Err(Error::Transport("barrier aborted by a failed peer".into()));
        }
        st.arrived += 1;
        if st.arrived == self.parties {
            st.arrived = 0;
            st.generation += 1;
            self.cvar.notify_all();
            return Ok(());
        }
        let gen = st.generation;
        while st.generation == gen && !st.aborted {
            st = self.cvar.wait(st).unwrap_or_else(|p| p.into_inner());
        }
        if st.generation == gen {
            return Err(Error::Transport("barrier aborted by a failed peer".into()));
        }
        Ok(())
    }

    fn abort(&self) {
        self.lock().aborted = true;
        self.cvar.notify_all();
    }
}

#[derive(Debug)]
struct Fabric {
    mailboxes: Vec<Mutex<Vec<Envelope>>>,
    barrier: AbortableBarrier,
}

/// In-process transport: one mailbox per endpoint behind a mutex, and a
/// shared barrier. Endpoints may be moved to and driven from separate
/// threads.
#[derive(Debug)]
pub struct LoopbackEndpoint {
    id: u32,
    fabric: Arc<Fabric>,
    closed: bool,
}

/// Creates `n` connected loopback endpoints with ids `0..n`.
pub fn loopback(n: u32) -> Vec<LoopbackEndpoint> {
    let fabric = Arc::new(Fabric {
        mailboxes: (0..n).map(|_| Mutex::new(Vec::new())).collect(),
        barrier: AbortableBarrier::new(n),
    });
    (0..n)
        .map(|id| LoopbackEndpoint {
            id,
            fabric: Arc::clone(&fabric),
            closed: false,
        })
        .collect()
}

impl Transport for LoopbackEndpoint {
    fn endpoint(&self) -> u32 {
        self.id
    }

    fn n_endpoints(&self) -> u32 {
        self.fabric.mailboxes.len() as u32
    }

    fn send(&mut self, dst: u32, packet: Vec<u8>) -> Result<()> {
        let mailbox = self
            .fabric
            .mailboxes
            .get(dst as usize)
            .ok_or_else(|| Error::Transport(format!("no endpoint {dst}")))?;
        mailbox
            .lock()
            .map_err(|_| Error::Transport(format!("mailbox {dst} poisoned")))?
            .push(Envelope {
                src: self.id,
                bytes: packet,
            });
        Ok(())
    }

    fn barrier(&mut self) -> Result<()> {
        self.fabric.barrier.wait()
    }

    fn receive_all_for_step(&mut self, step: u32, hop: Hop) -> Result<Vec<Envelope>> {
        let mut mailbox = self.fabric.mailboxes[self.id as usize]
            .lock()
            .map_err(|_| Error::Transport(format!("mailbox {} poisoned", self.id)))?;
        take_matching(&mut mailbox, step, hop)
    }

    fn abort(&mut self) {
        self.fabric.barrier.abort();
    }

    fn close(&mut self) {
        self.closed = true;
    }
}

impl Drop for LoopbackEndpoint {
    fn drop(&mut self) {
        if !self.closed {
            self.fabric.barrier.abort();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::packet::{pack_packets, unpack_packet, AxonalSpike};

    #[test]
    fn future_packets_stay_queued() {
        let mut eps = loopback(2);
        let (a, b) = eps.split_at_mut(1);
        let (a, b) = (&mut a[0], &mut b[0]);
        for p in pack_packets(6, Hop::Direct, &[AxonalSpike::new(1, 6)]) {
            a.send(1, p).unwrap();
        }
        for p in pack_packets(5, Hop::Direct, &[AxonalSpike::new(2, 5)]) {
            a.send(1, p).unwrap();
        }
        let got = b.receive_all_for_step(5, Hop::Direct).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(unpack_packet(&got[0].bytes).unwrap().step, 5);
        assert!(b.receive_all_for_step(5, Hop::Relay).unwrap().is_empty());
        let got = b.receive_all_for_step(6, Hop::Direct).unwrap();
        assert_eq!(got.len(), 1);
        for e in eps.iter_mut() {
            e.close();
        }
    }

    #[test]
    fn stale_packet_is_step_skew() {
        let mut eps = loopback(2);
        let p = pack_packets(3, Hop::Direct, &[]).remove(0);
        eps[0].send(1, p).unwrap();
        let err = eps[1].receive_all_for_step(4, Hop::Direct).unwrap_err();
        assert!(matches!(
            err,
            Error::StepSkew {
                expected: 4,
                observed: 3
            }
        ));
    }

    #[test]
    fn barrier_orders_sends_before_receives() {
        let eps = loopback(4);
        std::thread::scope(|s| {
            for mut ep in eps {
                s.spawn(move || {
                    for step in 0..50u32 {
                        for dst in 0..4 {
                            if dst != ep.endpoint() {
                                let sp = [AxonalSpike::new(ep.endpoint(), step)];
                                for p in pack_packets(step, Hop::Direct, &sp) {
                                    ep.send(dst, p).unwrap();
                                }
                            }
                        }
                        ep.barrier().unwrap();
                        let got = ep.receive_all_for_step(step, Hop::Direct).unwrap();
                        let srcs: Vec<u32> = got.iter().map(|e| e.src).collect();
                        let want: Vec<u32> = (0..4).filter(|&r| r != ep.endpoint()).collect();
                        assert_eq!(srcs, want);
                    }
                    ep.close();
                });
            }
        });
    }

    #[test]
    fn dropped_peer_releases_barrier() {
        let mut eps = loopback(2);
        let b = eps.pop().unwrap();
        let mut a = eps.pop().unwrap();
        drop(b);
        assert!(a.barrier().is_err());
    }
}
