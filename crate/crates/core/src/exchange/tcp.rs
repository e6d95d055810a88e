//! Stream-socket transport: one TCP connection per endpoint pair.
//!
//! Each frame on a connection is a 4-byte little-endian length followed by
//! that many bytes of spike packet. A zero-length frame is a barrier token:
//! an endpoint enters a barrier by sending one token to every peer and
//! leaves it once it has read the matching token from every peer. Since
//! connections are ordered, all packets a peer sent before its token have
//! been read by then.

use std::io::{BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::Duration;

use super::packet::Hop;
use super::transport::{take_matching, Envelope, Transport};
use crate::{Error, Result};

const BARRIER_TIMEOUT: Duration = Duration::from_secs(120);

enum Frame {
    Packet(Vec<u8>),
    Token,
    Closed(String),
}

pub struct TcpEndpoint {
    id: u32,
    n: u32,
    writers: Vec<Option<BufWriter<TcpStream>>>,
    inbox: Receiver<(u32, Frame)>,
    readers: Vec<JoinHandle<()>>,
    pending: Vec<Envelope>,
    tokens: Vec<u64>,
    closed: Vec<Option<String>>,
    generation: u64,
}

fn io_err(what: &str, e: std::io::Error) -> Error {
    Error::Transport(format!("{what}: {e}"))
}

fn spawn_reader(peer: u32, mut stream: TcpStream, tx: Sender<(u32, Frame)>) -> JoinHandle<()> {
    std::thread::spawn(move || loop {
        let mut len = [0u8; 4];
        if let Err(e) = stream.read_exact(&mut len) {
            let _ = tx.send((peer, Frame::Closed(e.to_string())));
            return;
        }
        let len = u32::from_le_bytes(len) as usize;
        if len == 0 {
            if tx.send((peer, Frame::Token)).is_err() {
                return;
            }
            continue;
        }
        let mut buf = vec![0u8; len];
        if let Err(e) = stream.read_exact(&mut buf) {
            let _ = tx.send((peer, Frame::Closed(e.to_string())));
            return;
        }
        if tx.send((peer, Frame::Packet(buf))).is_err() {
            return;
        }
    })
}

impl TcpEndpoint {
    /// Joins a mesh of `addrs.len()` endpoints as endpoint `id`, listening
    /// on `listener` (bound to `addrs[id]`). Lower ids are dialled, higher
    /// ids are accepted; each new connection starts with the dialler's id.
    pub fn join_mesh(id: u32, listener: TcpListener, addrs: &[SocketAddr]) -> Result<Self> {
        let n = addrs.len() as u32;
        let mut streams: Vec<Option<TcpStream>> = (0..n).map(|_| None).collect();
        for peer in 0..id {
            let mut s = dial(addrs[peer as usize])?;
            s.write_all(&id.to_le_bytes())
                .map_err(|e| io_err("hello", e))?;
            streams[peer as usize] = Some(s);
        }
        for _ in id + 1..n {
            let (mut s, _) = listener.accept().map_err(|e| io_err("accept", e))?;
            let mut hello = [0u8; 4];
            s.read_exact(&mut hello).map_err(|e| io_err("hello", e))?;
            let peer = u32::from_le_bytes(hello);
            if peer <= id || peer >= n || streams[peer as usize].is_some() {
                return Err(Error::Transport(format!(
                    "unexpected hello from endpoint {peer}"
                )));
            }
            streams[peer as usize] = Some(s);
        }

        let (tx, inbox) = mpsc::channel();
        let mut writers = Vec::with_capacity(n as usize);
        let mut readers = Vec::new();
        for (peer, s) in streams.into_iter().enumerate() {
            match s {
                None => writers.push(None),
                Some(s) => {
                    s.set_nodelay(true).map_err(|e| io_err("nodelay", e))?;
                    let r = s.try_clone().map_err(|e| io_err("clone", e))?;
                    readers.push(spawn_reader(peer as u32, r, tx.clone()));
                    writers.push(Some(BufWriter::new(s)));
                }
            }
        }
        Ok(TcpEndpoint {
            id,
            n,
            writers,
            inbox,
            readers,
            pending: Vec::new(),
            tokens: vec![0; n as usize],
            closed: vec![None; n as usize],
            generation: 0,
        })
    }

    fn writer(&mut self, dst: u32) -> Result<&mut BufWriter<TcpStream>> {
        self.writers
            .get_mut(dst as usize)
            .and_then(Option::as_mut)
            .ok_or_else(|| Error::Transport(format!("no connection to endpoint {dst}")))
    }

    // A closed peer only matters if a barrier still needs its token.
    fn absorb(&mut self, src: u32, frame: Frame) {
        match frame {
            Frame::Packet(bytes) => self.pending.push(Envelope { src, bytes }),
            Frame::Token => self.tokens[src as usize] += 1,
            Frame::Closed(why) => self.closed[src as usize] = Some(why),
        }
    }

    fn poll(&mut self) {
        while let Ok((src, frame)) = self.inbox.try_recv() {
            self.absorb(src, frame);
        }
    }

    fn shutdown(&mut self) {
        for w in self.writers.iter_mut().flatten() {
            let _ = w.flush();
            let _ = w.get_ref().shutdown(Shutdown::Both);
        }
    }
}

fn dial(addr: SocketAddr) -> Result<TcpStream> {
    let mut last = None;
    for _ in 0..200 {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) => {
                last = Some(e);
                std::thread::sleep(Duration::from_millis(25));
            }
        }
    }
    Err(io_err(
        &format!("connect {addr}"),
        last.expect("at least one attempt"),
    ))
}

/// Builds a fully connected mesh of `n` endpoints on the loopback interface,
/// for running all ranks of a simulation in one process over real sockets.
pub fn tcp_local_mesh(n: u32) -> Result<Vec<TcpEndpoint>> {
    let listeners: Vec<TcpListener> = (0..n)
        .map(|_| TcpListener::bind("127.0.0.1:0").map_err(|e| io_err("bind", e)))
        .collect::<Result<_>>()?;
    let addrs: Vec<SocketAddr> = listeners
        .iter()
        .map(|l| l.local_addr().map_err(|e| io_err("local_addr", e)))
        .collect::<Result<_>>()?;
    std::thread::scope(|s| {
        let handles: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(id, l)| {
                let addrs = &addrs;
                s.spawn(move || TcpEndpoint::join_mesh(id as u32, l, addrs))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .map_err(|_| Error::Transport("mesh setup thread panicked".into()))?
            })
            .collect()
    })
}

impl Transport for TcpEndpoint {
    fn endpoint(&self) -> u32 {
        self.id
    }

    fn n_endpoints(&self) -> u32 {
        self.n
    }

    fn send(&mut self, dst: u32, packet: Vec<u8>) -> Result<()> {
        if dst == self.id {
            self.pending.push(Envelope {
                src: self.id,
                bytes: packet,
            });
            return Ok(());
        }
        let len = u32::try_from(packet.len())
            .ok()
            .filter(|&l| l > 0)
            .ok_or_else(|| {
                Error::Transport(format!("unframeable packet of {} bytes", packet.len()))
            })?;
        let w = self.writer(dst)?;
        w.write_all(&len.to_le_bytes())
            .and_then(|_| w.write_all(&packet))
            .map_err(|e| io_err(&format!("send to {dst}"), e))
    }

    fn barrier(&mut self) -> Result<()> {
        self.generation += 1;
        for dst in 0..self.n {
            if dst == self.id {
                continue;
            }
            let w = self.writer(dst)?;
            w.write_all(&0u32.to_le_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| io_err(&format!("barrier token to {dst}"), e))?;
        }
        loop {
            let missing =
                (0..self.n).find(|&p| p != self.id && self.tokens[p as usize] < self.generation);
            let Some(peer) = missing else {
                return Ok(());
            };
            if let Some(why) = &self.closed[peer as usize] {
                return Err(Error::Transport(format!(
                    "endpoint {peer} disconnected: {why}"
                )));
            }
            match self.inbox.recv_timeout(BARRIER_TIMEOUT) {
                Ok((src, frame)) => self.absorb(src, frame),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Transport("barrier timed out".into()))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Transport("all peers disconnected".into()))
                }
            }
        }
    }

    fn receive_all_for_step(&mut self, step: u32, hop: Hop) -> Result<Vec<Envelope>> {
        self.poll();
        take_matching(&mut self.pending, step, hop)
    }

    fn abort(&mut self) {
        self.shutdown();
    }
}

impl Drop for TcpEndpoint {
    fn drop(&mut self) {
        self.shutdown();
        self.writers.clear();
        for r in self.readers.drain(..) {
            let _ = r.join();
        }
    }
}
