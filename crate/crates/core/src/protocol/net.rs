//! Rounds over real loopback sockets.
//!
//! Each role runs on its own thread and speaks only through its socket. The
//! provers derive the same per-round tape from the shared seed instead of
//! talking to each other. Both verifiers read one process-wide monotonic
//! clock, so there is no skew; `tau_ns` must be relaxed to OS latencies.

use std::net::TcpListener;
use std::sync::{Arc, Barrier};
use std::thread;

use super::{
    draw_tape, provers, verifier_challenge, verifier_check, verifier_query, CheatStrategy, Mode, ProtocolError,
    RoundStreams, RoundTranscript, Verdict,
};
use crate::field::Field;
use crate::graph::ColoredGraph;
use crate::spacetime::transport::{serve_one, socket_transport, FramedStream, MonotonicClock, TransportError};
use crate::spacetime::wire::{Frame, Phase};
use crate::spacetime::{Role, Timestamps};

fn handler_error(e: ProtocolError) -> TransportError {
    TransportError::Io(std::io::Error::other(e.to_string()))
}

fn join<T>(h: thread::JoinHandle<Result<T, ProtocolError>>) -> Result<T, ProtocolError> {
    h.join()
        .unwrap_or_else(|_| Err(ProtocolError::ProtocolViolation("role thread panicked".into())))
}

/// Play `rounds` rounds with each role on its own thread over TCP loopback.
/// The relay strategy needs a prover-to-prover channel and is not supported.
pub fn run_networked(
    graph: &ColoredGraph,
    field: &Field,
    mode: Mode,
    rounds: u64,
    seed: u64,
    tau_ns: f64,
) -> Result<Vec<RoundTranscript>, ProtocolError> {
    if mode == Mode::Cheat(CheatStrategy::Relay) {
        return Err(ProtocolError::InvalidConfig("relay strategy has no networked form".into()));
    }
    let public = graph.graph().clone();
    let n = public.num_vertices();
    let (mut p1, mut p2) = provers(graph, field, mode)?;

    let l1 = TcpListener::bind("127.0.0.1:0")?;
    let l2 = TcpListener::bind("127.0.0.1:0")?;
    let (addr1, addr2) = (l1.local_addr()?, l2.local_addr()?);

    let f = field.clone();
    let p1_thread = thread::spawn(move || -> Result<u64, ProtocolError> {
        Ok(serve_one(&l1, f.clone(), |frame| {
            if frame.phase != Phase::Query {
                return Err(handler_error(ProtocolError::ProtocolViolation("P1 only answers queries".into())));
            }
            let streams = RoundStreams { seed, round: frame.round };
            p1.prepare(draw_tape(&f, n, &mut streams.tape()));
            let a = p1.commit(&frame.elements, &mut streams.p1()).map_err(handler_error)?;
            Ok(Frame::new(frame.round, Phase::Commit, a))
        })?)
    });
    let f = field.clone();
    let p2_thread = thread::spawn(move || -> Result<u64, ProtocolError> {
        Ok(serve_one(&l2, f.clone(), |frame| {
            let edge = frame.challenge_edge()?;
            let streams = RoundStreams { seed, round: frame.round };
            p2.prepare(draw_tape(&f, n, &mut streams.tape()));
            let b = p2.reveal(edge, None, &mut streams.p2()).map_err(handler_error)?;
            Ok(Frame::new(frame.round, Phase::Reveal, b.to_vec()))
        })?)
    });

    let clock = MonotonicClock::new();
    let trigger = Arc::new(Barrier::new(2));

    let (f, go) = (field.clone(), trigger.clone());
    let v1_thread = thread::spawn(move || -> Result<Vec<_>, ProtocolError> {
        let mut conn = FramedStream::connect(addr1, f.clone())?;
        let mut out = Vec::new();
        for round in 0..rounds {
            let x = verifier_query(&f, n, &mut RoundStreams { seed, round }.v1());
            let query = Frame::new(round, Phase::Query, x.clone());
            go.wait();
            let ex = socket_transport(Role::V1, &mut conn, &query, &clock)?;
            out.push((x, ex));
        }
        Ok(out)
    });
    let (f, g, go) = (field.clone(), public.clone(), trigger);
    let v2_thread = thread::spawn(move || -> Result<Vec<_>, ProtocolError> {
        let mut conn = FramedStream::connect(addr2, f.clone())?;
        let mut out = Vec::new();
        for round in 0..rounds {
            let c = verifier_challenge(&g, &mut RoundStreams { seed, round }.v2())?;
            let challenge = Frame::challenge(round, c, &f)?;
            go.wait();
            let ex = socket_transport(Role::V2, &mut conn, &challenge, &clock)?;
            out.push((c, ex));
        }
        Ok(out)
    });

    let v1 = join(v1_thread);
    let v2 = join(v2_thread);
    // verifiers hang up on return, which ends the prover loops
    let p1_served = join(p1_thread)?;
    let p2_served = join(p2_thread)?;
    let (v1, v2) = (v1?, v2?);
    if p1_served != rounds || p2_served != rounds {
        return Err(ProtocolError::ProtocolViolation(format!(
            "provers served {p1_served}/{p2_served} of {rounds} rounds"
        )));
    }

    v1.into_iter()
        .zip(v2)
        .enumerate()
        .map(|(round, ((x, q), (c, ch)))| {
            let b_c: [_; 2] = ch
                .reply
                .elements
                .as_slice()
                .try_into()
                .map_err(|_| ProtocolError::ProtocolViolation("reveal must carry two keys".into()))?;
            let mut t = RoundTranscript {
                round_index: round as u64,
                x,
                a: q.reply.elements,
                c,
                b_c,
                timestamps: Timestamps {
                    t1: q.sent_ns,
                    t2: q.received_ns,
                    t3: ch.sent_ns,
                    t4: ch.received_ns,
                },
                verdict: Verdict::Accept,
            };
            t.verdict = verifier_check(field, &public, &t, tau_ns, 0.0, false)?;
            Ok(t)
        })
        .collect()
}
