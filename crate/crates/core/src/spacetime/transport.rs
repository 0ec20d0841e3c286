//! TCP transport for running the roles as separate endpoints.
//!
//! This mode exercises the wire format and role wiring over real sockets. It
//! cannot enforce relativistic separation on one machine, so runs over it
//! should use a relaxed `tau_ns` and carry no cryptographic meaning.

use std::io::{self, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Instant;

use thiserror::Error;

use super::wire::{Frame, FrameError, Phase, DEFAULT_MAX_ELEMENTS};
use super::Role;
use crate::field::Field;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("connection lost: {0}")]
    ConnectionLost(io::Error),
    #[error("io: {0}")]
    Io(io::Error),
    #[error("frame: {0}")]
    Frame(FrameError),
    #[error("{role} cannot send a {phase:?} frame")]
    WrongSender { role: Role, phase: Phase },
    #[error("expected a {expected:?} reply for round {round}, got {got:?} for round {got_round}")]
    UnexpectedReply {
        expected: Phase,
        round: u64,
        got: Phase,
        got_round: u64,
    },
}

fn is_disconnect(e: &io::Error) -> bool {
    matches!(
        e.kind(),
        io::ErrorKind::UnexpectedEof
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::BrokenPipe
    )
}

impl From<io::Error> for TransportError {
    fn from(e: io::Error) -> Self {
        if is_disconnect(&e) {
            TransportError::ConnectionLost(e)
        } else {
            TransportError::Io(e)
        }
    }
}

impl From<FrameError> for TransportError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::Io(io) => io.into(),
            other => TransportError::Frame(other),
        }
    }
}

/// Nanoseconds since construction, from the OS monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    epoch: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock { epoch: Instant::now() }
    }

    pub fn now_ns(&self) -> f64 {
        self.epoch.elapsed().as_nanos() as f64
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

/// A TCP stream speaking whole frames.
#[derive(Debug)]
pub struct FramedStream {
    stream: TcpStream,
    field: Field,
    max_elements: u32,
}

impl FramedStream {
    pub fn new(stream: TcpStream, field: Field) -> Self {
        // frames are small and latency matters more than throughput
        let _ = stream.set_nodelay(true);
        FramedStream {
            stream,
            field,
            max_elements: DEFAULT_MAX_ELEMENTS,
        }
    }

    pub fn connect(addr: impl ToSocketAddrs, field: Field) -> Result<Self, TransportError> {
        Ok(FramedStream::new(TcpStream::connect(addr)?, field))
    }

    pub fn with_max_elements(mut self, max_elements: u32) -> Self {
        self.max_elements = max_elements;
        self
    }

    pub fn send(&mut self, frame: &Frame) -> Result<(), TransportError> {
        self.stream.write_all(&frame.encode())?;
        self.stream.flush()?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Frame, TransportError> {
        Ok(Frame::read_from(&mut self.stream, &self.field, self.max_elements)?)
    }
}

/// One verifier-side exchange with local send/receive times.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub reply: Frame,
    pub sent_ns: f64,
    pub received_ns: f64,
}

fn reply_phase(role: Role, phase: Phase) -> Option<Phase> {
    match (role, phase) {
        (Role::V1, Phase::Query) => Some(Phase::Commit),
        (Role::V2, Phase::Challenge) => Some(Phase::Reveal),
        _ => None,
    }
}

/// Send `frame` as `role` and wait for the matching reply, stamping both
/// ends on the verifier's clock. Only V1 (query) and V2 (challenge) initiate.
pub fn socket_transport(
    role: Role,
    endpoint: &mut FramedStream,
    frame: &Frame,
    clock: &MonotonicClock,
) -> Result<Exchange, TransportError> {
    let expected = reply_phase(role, frame.phase).ok_or(TransportError::WrongSender {
        role,
        phase: frame.phase,
    })?;
    let sent_ns = clock.now_ns();
    endpoint.send(frame)?;
    let reply = endpoint.recv()?;
    let received_ns = clock.now_ns();
    if reply.phase != expected || reply.round != frame.round {
        return Err(TransportError::UnexpectedReply {
            expected,
            round: frame.round,
            got: reply.phase,
            got_round: reply.round,
        });
    }
    Ok(Exchange {
        reply,
        sent_ns,
        received_ns,
    })
}

/// Accept one connection and answer each frame with `handler` until the
/// peer disconnects. Returns the number of frames served.
pub fn serve_one<F>(listener: &TcpListener, field: Field, mut handler: F) -> Result<u64, TransportError>
where
    F: FnMut(Frame) -> Result<Frame, TransportError>,
{
    let (stream, _) = listener.accept()?;
    let mut conn = FramedStream::new(stream, field);
    let mut served = 0;
    loop {
        let frame = match conn.recv() {
            Ok(f) => f,
            Err(TransportError::ConnectionLost(_)) => return Ok(served),
            Err(e) => return Err(e),
        };
        conn.send(&handler(frame)?)?;
        served += 1;
    }
}
