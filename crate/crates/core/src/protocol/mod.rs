//! The four roles and the round structure.
//!
//! Every round runs: prepare (provers draw `π` and `B`), query (V1 → P1:
//! `X`), commit (P1 → V1: `A`), challenge (V2 → P2: an edge `C`), reveal
//! (P2 → V2: `B(C)`), check. Query and challenge are triggered at the same
//! instant unless the spacetime config offsets them.
//!
//! Randomness is split per round into independent streams so that rounds can
//! run on any thread and a transcript is a pure function of the seed.

pub mod net;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commitment::{commit, embed_color, reveal_verify, CommitError};
use crate::field::{Field, FieldElement, FieldError, FieldSpec};
use crate::graph::{Color, ColorPermutation, ColoredGraph, Coloring, Edge, Graph};
use crate::rng::SeededRng;
use crate::spacetime::{
    simulate_round_timing, timing_check, ClockModel, ProverSignaling, SpacetimeConfig, SpacetimeError, Timestamps,
};

/// Rounds processed per parallel batch; bounds memory on long runs.
const BATCH: u64 = 4096;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("prover needs a witness coloring")]
    NotAProver,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("no coloring with exactly one monochromatic edge is reachable by recoloring one vertex")]
    NoCheatPossible,
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("bad transcript line {line}: {reason}")]
    BadTranscript { line: usize, reason: String },
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error(transparent)]
    Transport(#[from] crate::spacetime::transport::TransportError),
    #[error(transparent)]
    Frame(#[from] crate::spacetime::wire::FrameError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// How the provers behave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Honest,
    Cheat(CheatStrategy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheatStrategy {
    /// Commit to a fixed coloring with exactly one monochromatic edge.
    OneBadEdge,
    /// Commit to a fresh uniformly random coloring every round.
    RandomColoring,
    /// Random commitments; after the challenge P2 fetches `x` and `a` for the
    /// challenged endpoints from P1 and solves for keys that open to two
    /// distinct colors.
    Relay,
    /// Same fixed coloring as `OneBadEdge`; when the bad edge is challenged
    /// P2 shifts one key by `x_g·(y' - y)` for a guessed `x_g`, trying to open
    /// that endpoint to a different color without knowing `x`.
    Equivocation,
}

impl CheatStrategy {
    pub const ALL: [CheatStrategy; 4] = [
        CheatStrategy::OneBadEdge,
        CheatStrategy::RandomColoring,
        CheatStrategy::Relay,
        CheatStrategy::Equivocation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheatStrategy::OneBadEdge => "one-bad-edge",
            CheatStrategy::RandomColoring => "random-coloring",
            CheatStrategy::Relay => "relay",
            CheatStrategy::Equivocation => "equivocation",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Honest => f.write_str("honest"),
            Mode::Cheat(s) => write!(f, "cheat:{}", s.name()),
        }
    }
}

impl FromStr for Mode {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, ProtocolError> {
        if s == "honest" {
            return Ok(Mode::Honest);
        }
        let name = s.strip_prefix("cheat:").unwrap_or(s);
        CheatStrategy::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .map(Mode::Cheat)
            .ok_or_else(|| {
                ProtocolError::InvalidConfig(format!(
                    "unknown mode {s:?}; expected honest or cheat:{{one-bad-edge,random-coloring,relay,equivocation}}"
                ))
            })
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Timing,
    ColorRange,
    Monochrome,
}

impl RejectReason {
    pub fn name(&self) -> &'static str {
        match self {
            RejectReason::Timing => "timing",
            RejectReason::ColorRange => "color_range",
            RejectReason::Monochrome => "monochrome",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::Reject(r) => write!(f, "reject:{}", r.name()),
        }
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "accept" => Verdict::Accept,
            "reject:timing" => Verdict::Reject(RejectReason::Timing),
            "reject:color_range" => Verdict::Reject(RejectReason::ColorRange),
            "reject:monochrome" => Verdict::Reject(RejectReason::Monochrome),
            other => return Err(format!("unknown verdict {other:?}")),
        })
    }
}

/// Everything the verifiers saw in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTranscript {
    pub round_index: u64,
    pub x: Vec<FieldElement>,
    pub a: Vec<FieldElement>,
    pub c: Edge,
    pub b_c: [FieldElement; 2],
    pub timestamps: Timestamps,
    pub verdict: Verdict,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct TranscriptLine {
    round_index: u64,
    X: Vec<String>,
    A: Vec<String>,
    C: Edge,
    B_C: [String; 2],
    t1: f64,
    t2: f64,
    t3: f64,
    t4: f64,
    verdict: String,
}

impl RoundTranscript {
    /// One JSON object, no trailing newline. Elements are little-endian hex.
    pub fn to_json_line(&self) -> String {
        let hex = |v: &[FieldElement]| v.iter().map(FieldElement::to_hex).collect::<Vec<_>>();
        let line = TranscriptLine {
            round_index: self.round_index,
            X: hex(&self.x),
            A: hex(&self.a),
            C: self.c,
            B_C: [self.b_c[0].to_hex(), self.b_c[1].to_hex()],
            t1: self.timestamps.t1,
            t2: self.timestamps.t2,
            t3: self.timestamps.t3,
            t4: self.timestamps.t4,
            verdict: self.verdict.to_string(),
        };
        serde_json::to_string(&line).expect("transcript line serializes")
    }

    pub fn from_json_line(s: &str, field: &Field) -> Result<Self, String> {
        let line: TranscriptLine = serde_json::from_str(s).map_err(|e| e.to_string())?;
        let elems = |v: &[String]| {
            v.iter()
                .map(|h| field.from_hex(h))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())
        };
        let b_c = elems(&line.B_C)?;
        Ok(RoundTranscript {
            round_index: line.round_index,
            x: elems(&line.X)?,
            a: elems(&line.A)?,
            c: line.C,
            b_c: [b_c[0], b_c[1]],
            timestamps: Timestamps {
                t1: line.t1,
                t2: line.t2,
                t3: line.t3,
                t4: line.t4,
            },
            verdict: line.verdict.parse()?,
        })
    }
}

/// Read a JSONL transcript back.
pub fn read_transcripts<R: BufRead>(reader: R, field: &Field) -> Result<Vec<RoundTranscript>, ProtocolError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            RoundTranscript::from_json_line(&line, field)
                .map_err(|reason| ProtocolError::BadTranscript { line: i + 1, reason })?,
        );
    }
    Ok(out)
}

/// The provers' pre-shared randomness for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProverTape {
    pub pi: ColorPermutation,
    pub keys: Vec<FieldElement>,
}

/// Draw a fresh `(π, B)`. Only a prover holding a witness may prepare.
pub fn round_prepare<R: Rng + ?Sized>(
    graph: &ColoredGraph,
    field: &Field,
    rng: &mut R,
) -> Result<ProverTape, ProtocolError> {
    graph.witness().ok_or(ProtocolError::NotAProver)?;
    Ok(draw_tape(field, graph.graph().num_vertices(), rng))
}

fn draw_tape<R: Rng + ?Sized>(field: &Field, n: usize, rng: &mut R) -> ProverTape {
    let pi = ColorPermutation::random(rng);
    let keys = (0..n).map(|_| field.sample_uniform(rng)).collect();
    ProverTape { pi, keys }
}

/// `|V|` independent uniform nonzero elements.
pub fn verifier_query<R: Rng + ?Sized>(field: &Field, num_vertices: usize, rng: &mut R) -> Vec<FieldElement> {
    (0..num_vertices).map(|_| field.sample_uniform_nonzero(rng)).collect()
}

/// A uniform edge.
pub fn verifier_challenge<R: Rng + ?Sized>(graph: &Graph, rng: &mut R) -> Result<Edge, ProtocolError> {
    graph
        .edges()
        .choose(rng)
        .copied()
        .ok_or_else(|| ProtocolError::InvalidGraph("no edges to challenge".into()))
}

/// Timing first, then both decodes, then distinctness.
pub fn verifier_check(
    field: &Field,
    graph: &Graph,
    transcript: &RoundTranscript,
    tau_ns: f64,
    skew_ns: f64,
    worst_case: bool,
) -> Result<Verdict, ProtocolError> {
    let n = graph.num_vertices();
    if transcript.x.len() != n || transcript.a.len() != n {
        return Err(ProtocolError::ProtocolViolation(format!(
            "transcript has |X| = {}, |A| = {} for {n} vertices",
            transcript.x.len(),
            transcript.a.len()
        )));
    }
    if !graph.contains_edge(transcript.c) {
        return Err(ProtocolError::ProtocolViolation(format!("challenge {:?} is not an edge", transcript.c)));
    }
    if !timing_check(&transcript.timestamps, tau_ns, skew_ns, worst_case).pass {
        return Ok(Verdict::Reject(RejectReason::Timing));
    }
    let (i, j) = transcript.c.endpoints();
    let decode = |v: u32, b: FieldElement| {
        let v = v as usize;
        reveal_verify(field, transcript.x[v], transcript.a[v], b, None)
    };
    let (yi, yj) = match (decode(i, transcript.b_c[0]), decode(j, transcript.b_c[1])) {
        (Ok(yi), Ok(yj)) => (yi, yj),
        (Err(CommitError::RevealRejected(_)), _) | (_, Err(CommitError::RevealRejected(_))) => {
            return Ok(Verdict::Reject(RejectReason::ColorRange))
        }
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };
    Ok(if yi == yj {
        Verdict::Reject(RejectReason::Monochrome)
    } else {
        Verdict::Accept
    })
}

/// Recolor a single vertex of `witness` so that exactly one edge becomes
/// monochromatic.
pub fn one_bad_edge_coloring(graph: &Graph, witness: &[Color]) -> Result<(Coloring, Edge), ProtocolError> {
    for v in 0..graph.num_vertices() {
        for c in Color::ALL {
            if c == witness[v] {
                continue;
            }
            let mut coloring = witness.to_vec();
            coloring[v] = c;
            let mut bad = graph.monochromatic_edges(&coloring);
            if let (Some(e), None) = (bad.next(), bad.next()) {
                drop(bad);
                return Ok((coloring, e));
            }
        }
    }
    Err(ProtocolError::NoCheatPossible)
}

/// A message one prover received during a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inbound {
    /// From V1.
    Query,
    /// From V2.
    Challenge,
    /// From P2, naming the challenged edge.
    RelayRequest,
    /// From P1, carrying query-dependent data.
    RelayAnswer,
}

/// What P1 hands P2 in the relay attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayAnswer {
    pub x: [FieldElement; 2],
    pub a: [FieldElement; 2],
}

/// Fixed per-run prover plan, derived from the mode.
#[derive(Debug, Clone)]
enum Plan {
    Fixed(Coloring),
    Random,
    Relay,
    Equivocate { coloring: Coloring, bad: Edge },
}

/// P1: answers the query with commitments.
#[derive(Debug, Clone)]
pub struct Committer {
    field: Field,
    plan: Plan,
    tape: Option<ProverTape>,
    last: Option<(Vec<FieldElement>, Vec<FieldElement>)>,
    inbox: Vec<Inbound>,
}

/// P2: answers the challenge with two keys.
#[derive(Debug, Clone)]
pub struct Revealer {
    field: Field,
    graph: Graph,
    plan: Plan,
    tape: Option<ProverTape>,
    inbox: Vec<Inbound>,
}

/// Build the two provers for `mode`. Every mode except `RandomColoring` and
/// `Relay` needs the witness.
pub fn provers(graph: &ColoredGraph, field: &Field, mode: Mode) -> Result<(Committer, Revealer), ProtocolError> {
    let witness = || graph.witness().map(<[Color]>::to_vec).ok_or(ProtocolError::NotAProver);
    let plan = match mode {
        Mode::Honest => Plan::Fixed(witness()?),
        Mode::Cheat(CheatStrategy::OneBadEdge) => Plan::Fixed(one_bad_edge_coloring(graph.graph(), &witness()?)?.0),
        Mode::Cheat(CheatStrategy::RandomColoring) => Plan::Random,
        Mode::Cheat(CheatStrategy::Relay) => Plan::Relay,
        Mode::Cheat(CheatStrategy::Equivocation) => {
            let (coloring, bad) = one_bad_edge_coloring(graph.graph(), &witness()?)?;
            Plan::Equivocate { coloring, bad }
        }
    };
    embed_color(field, Color::ALL[2])?;
    Ok((
        Committer {
            field: field.clone(),
            plan: plan.clone(),
            tape: None,
            last: None,
            inbox: Vec::new(),
        },
        Revealer {
            field: field.clone(),
            graph: graph.graph().clone(),
            plan,
            tape: None,
            inbox: Vec::new(),
        },
    ))
}

impl Committer {
    /// Start a round with fresh shared randomness.
    pub fn prepare(&mut self, tape: ProverTape) {
        self.tape = Some(tape);
        self.last = None;
        self.inbox.clear();
    }

    /// `a_k = x_k·π(y_k) - b_k`. `rng` is P1's private stream.
    pub fn commit<R: Rng + ?Sized>(&mut self, x: &[FieldElement], rng: &mut R) -> Result<Vec<FieldElement>, ProtocolError> {
        self.inbox.push(Inbound::Query);
        let tape = self
            .tape
            .as_ref()
            .ok_or_else(|| ProtocolError::ProtocolViolation("commit before prepare".into()))?;
        if x.len() != tape.keys.len() {
            return Err(ProtocolError::ProtocolViolation(format!(
                "query has {} elements for {} vertices",
                x.len(),
                tape.keys.len()
            )));
        }
        let random_coloring;
        let coloring: &[Color] = match &self.plan {
            Plan::Fixed(c) | Plan::Equivocate { coloring: c, .. } => c,
            Plan::Random => {
                random_coloring = (0..x.len()).map(|_| Color::ALL[rng.random_range(0..3)]).collect::<Vec<_>>();
                &random_coloring
            }
            Plan::Relay => {
                let a: Vec<_> = x.iter().map(|_| self.field.sample_uniform(rng)).collect();
                self.last = Some((x.to_vec(), a.clone()));
                return Ok(a);
            }
        };
        let a = x
            .iter()
            .zip(coloring)
            .zip(&tape.keys)
            .map(|((&xk, &yk), &bk)| commit(&self.field, xk, tape.pi.apply(yk), bk))
            .collect::<Result<Vec<_>, _>>()?;
        self.last = Some((x.to_vec(), a.clone()));
        Ok(a)
    }

    /// Relay attack only: hand over `x` and `a` at the challenged endpoints.
    pub fn answer_relay(&mut self, c: Edge) -> Result<RelayAnswer, ProtocolError> {
        self.inbox.push(Inbound::RelayRequest);
        let (x, a) = self
            .last
            .as_ref()
            .ok_or_else(|| ProtocolError::ProtocolViolation("relay request before commit".into()))?;
        let (i, j) = c.endpoints();
        let (i, j) = (i as usize, j as usize);
        Ok(RelayAnswer {
            x: [x[i], x[j]],
            a: [a[i], a[j]],
        })
    }

    pub fn inbox(&self) -> &[Inbound] {
        &self.inbox
    }
}

impl Revealer {
    pub fn prepare(&mut self, tape: ProverTape) {
        self.tape = Some(tape);
        self.inbox.clear();
    }

    /// The keys at the challenged endpoints. `partner` is consulted only by
    /// the relay attack; `rng` is P2's private stream.
    pub fn reveal<R: Rng + ?Sized>(
        &mut self,
        c: Edge,
        partner: Option<&mut Committer>,
        rng: &mut R,
    ) -> Result<[FieldElement; 2], ProtocolError> {
        self.inbox.push(Inbound::Challenge);
        if !self.graph.contains_edge(c) {
            return Err(ProtocolError::ProtocolViolation(format!("challenge {c:?} is not an edge")));
        }
        let tape = self
            .tape
            .as_ref()
            .ok_or_else(|| ProtocolError::ProtocolViolation("reveal before prepare".into()))?;
        let (i, j) = c.endpoints();
        let honest = [tape.keys[i as usize], tape.keys[j as usize]];
        match &self.plan {
            Plan::Fixed(_) | Plan::Random => Ok(honest),
            Plan::Equivocate { coloring, bad } => {
                if c != *bad {
                    return Ok(honest);
                }
                // shift b_j so that it would open to y' if x_j were x_g
                let y = tape.pi.apply(coloring[j as usize]);
                let y_target = Color::ALL[(y.value() as usize + 1) % 3];
                let diff = self.field.sub(embed_color(&self.field, y_target)?, embed_color(&self.field, y)?)?;
                let x_guess = self.field.sample_uniform_nonzero(rng);
                let shifted = self.field.add(honest[1], self.field.mul(x_guess, diff)?)?;
                Ok([honest[0], shifted])
            }
            Plan::Relay => {
                let p1 = partner
                    .ok_or_else(|| ProtocolError::ProtocolViolation("relay strategy needs its partner".into()))?;
                let ans = p1.answer_relay(c)?;
                self.inbox.push(Inbound::RelayAnswer);
                // open endpoint i to color 0 and j to color 1: b = x·y - a
                let mut out = [self.field.zero(); 2];
                for (k, y) in [Color::ALL[0], Color::ALL[1]].into_iter().enumerate() {
                    let xy = self.field.mul(ans.x[k], embed_color(&self.field, y)?)?;
                    out[k] = self.field.sub(xy, ans.a[k])?;
                }
                Ok(out)
            }
        }
    }

    pub fn inbox(&self) -> &[Inbound] {
        &self.inbox
    }
}

/// Which prover-to-prover traffic actually happened in a round, read off the
/// provers' inboxes.
pub fn audit_signaling(p1: &Committer, p2: &Revealer) -> ProverSignaling {
    let p2_got_query_data = p2.inbox().contains(&Inbound::RelayAnswer);
    let p1_got_challenge_data = p1.inbox().contains(&Inbound::RelayRequest);
    match (p1_got_challenge_data, p2_got_query_data) {
        (false, false) => ProverSignaling::None,
        (true, true) => ProverSignaling::RevealRelay,
        (true, false) => ProverSignaling::ChallengeToP1,
        (false, true) => ProverSignaling::QueryToP2,
    }
}

/// Independent per-round random streams.
#[derive(Debug, Clone, Copy)]
pub struct RoundStreams {
    pub seed: u64,
    pub round: u64,
}

impl RoundStreams {
    pub fn v1(&self) -> SeededRng {
        SeededRng::derive(self.seed, "v1", self.round)
    }
    pub fn v2(&self) -> SeededRng {
        SeededRng::derive(self.seed, "v2", self.round)
    }
    pub fn tape(&self) -> SeededRng {
        SeededRng::derive(self.seed, "prover", self.round)
    }
    pub fn p1(&self) -> SeededRng {
        SeededRng::derive(self.seed, "p1", self.round)
    }
    pub fn p2(&self) -> SeededRng {
        SeededRng::derive(self.seed, "p2", self.round)
    }
    pub fn timing(&self) -> SeededRng {
        SeededRng::derive(self.seed, "timing", self.round)
    }
}

/// Per-run settings shared by every round.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub mode: Mode,
    pub spacetime: SpacetimeConfig,
    pub seed: u64,
    pub worst_case_timing: bool,
}

/// A round's transcript plus what the harness observed about the provers.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub transcript: RoundTranscript,
    pub signaling: ProverSignaling,
}

/// Run round `round` in simulated spacetime.
pub fn play_round(
    field: &Field,
    graph: &Graph,
    p1: &mut Committer,
    p2: &mut Revealer,
    settings: &RunSettings,
    clocks: &ClockModel,
    round: u64,
) -> Result<RoundOutcome, ProtocolError> {
    let streams = RoundStreams {
        seed: settings.seed,
        round,
    };
    let tape = draw_tape(field, graph.num_vertices(), &mut streams.tape());
    p1.prepare(tape.clone());
    p2.prepare(tape);

    let x = verifier_query(field, graph.num_vertices(), &mut streams.v1());
    let c = verifier_challenge(graph, &mut streams.v2())?;
    let a = p1.commit(&x, &mut streams.p1())?;
    let b_c = p2.reveal(c, Some(p1), &mut streams.p2())?;
    let signaling = audit_signaling(p1, p2);

    let cfg = &settings.spacetime;
    let start = round as f64 * cfg.round_interval_ns;
    let timing = simulate_round_timing(cfg, clocks, signaling, start, &mut streams.timing());
    let mut transcript = RoundTranscript {
        round_index: round,
        x,
        a,
        c,
        b_c,
        timestamps: timing.timestamps,
        verdict: Verdict::Accept,
    };
    transcript.verdict = verifier_check(
        field,
        graph,
        &transcript,
        cfg.tau_ns(),
        cfg.clock_skew_ns,
        settings.worst_case_timing,
    )?;
    Ok(RoundOutcome { transcript, signaling })
}

/// Parameters echoed into the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub vertices: usize,
    pub edges: usize,
    pub field: FieldSpec,
    pub mode: Mode,
    pub seed: u64,
    pub tau_ns: f64,
    pub worst_case_timing: bool,
    pub spacetime: SpacetimeConfig,
    pub clocks: ClockModel,
    /// Monochromatic edges in the coloring the provers commit to, when fixed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bad_edges: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rounds: u64,
    pub accepts: u64,
    pub rejects_by_reason: BTreeMap<RejectReason, u64>,
    pub wall_time_ns: u64,
    /// True iff every round was accepted.
    pub accept: bool,
    pub params: ReportParams,
}

impl RunReport {
    pub fn rejects(&self) -> u64 {
        self.rejects_by_reason.values().sum()
    }
}

/// Read `RELZKP_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("RELZKP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Run `rounds` independent rounds. Rounds execute in parallel batches;
/// transcripts, if a sink is given, are written one JSON line per round in
/// round order. `threads` caps the worker count.
pub fn run_protocol(
    graph: &ColoredGraph,
    field: &Field,
    rounds: u64,
    settings: &RunSettings,
    mut sink: Option<&mut dyn Write>,
    threads: Option<usize>,
) -> Result<RunReport, ProtocolError> {
    settings.spacetime.validate()?;
    let public = graph.graph();
    if public.num_edges() == 0 {
        return Err(ProtocolError::InvalidGraph("no edges to challenge".into()));
    }
    let (p1, p2) = provers(graph, field, settings.mode)?;
    let bad_edges = match &p1.plan {
        Plan::Fixed(c) | Plan::Equivocate { coloring: c, .. } => Some(public.monochromatic_edges(c).count()),
        Plan::Random | Plan::Relay => None,
    };
    let clocks = ClockModel::draw(&settings.spacetime, &mut SeededRng::derive(settings.seed, "skew", 0));

    let pool = threads
        .map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build())
        .transpose()
        .map_err(|e| ProtocolError::InvalidConfig(format!("thread pool: {e}")))?;
    let batch = |range: std::ops::Range<u64>| -> Result<Vec<RoundOutcome>, ProtocolError> {
        let work = || {
            range
                .into_par_iter()
                .map_init(
                    || (p1.clone(), p2.clone()),
                    |(a, b), r| play_round(field, public, a, b, settings, &clocks, r),
                )
                .collect()
        };
        match &pool {
            Some(p) => p.install(work),
            None => work(),
        }
    };

    let started = Instant::now();
    let mut accepts = 0u64;
    let mut rejects_by_reason = BTreeMap::new();
    let mut next = 0;
    while next < rounds {
        let end = (next + BATCH).min(rounds);
        for o in batch(next..end)? {
            match o.transcript.verdict {
                Verdict::Accept => accepts += 1,
                Verdict::Reject(r) => *rejects_by_reason.entry(r).or_insert(0) += 1,
            }
            if let Some(w) = sink.as_deref_mut() {
                writeln!(w, "{}", o.transcript.to_json_line())?;
            }
        }
        next = end;
    }
    if let Some(w) = sink.as_deref_mut() {
        w.flush()?;
    }

    Ok(RunReport {
        rounds,
        accepts,
        accept: accepts == rounds,
        rejects_by_reason,
        wall_time_ns: started.elapsed().as_nanos() as u64,
        params: ReportParams {
            vertices: public.num_vertices(),
            edges: public.num_edges(),
            field: *field.spec(),
            mode: settings.mode,
            seed: settings.seed,
            tau_ns: settings.spacetime.tau_ns(),
            worst_case_timing: settings.worst_case_timing,
            spacetime: settings.spacetime.clone(),
            clocks,
            bad_edges,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn triangle() -> ColoredGraph {
        let g = Graph::new(3, [Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)]).unwrap();
        ColoredGraph::with_witness(g, Color::ALL.to_vec()).unwrap()
    }

    fn settings(mode: Mode) -> RunSettings {
        RunSettings {
            mode,
            spacetime: SpacetimeConfig::zero(),
            seed: 7,
            worst_case_timing: false,
        }
    }

    #[test]
    fn mode_round_trips_through_strings() {
        for m in [Mode::Honest]
            .into_iter()
            .chain(CheatStrategy::ALL.into_iter().map(Mode::Cheat))
        {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("relay".parse::<Mode>().unwrap(), Mode::Cheat(CheatStrategy::Relay));
        assert!("cheat:teleport".parse::<Mode>().is_err());
        let json = serde_json::to_string(&Mode::Cheat(CheatStrategy::OneBadEdge)).unwrap();
        assert_eq!(json, "\"cheat:one-bad-edge\"");
    }

    #[test]
    fn verdict_strings() {
        for v in [
            Verdict::Accept,
            Verdict::Reject(RejectReason::Timing),
            Verdict::Reject(RejectReason::ColorRange),
            Verdict::Reject(RejectReason::Monochrome),
        ] {
            assert_eq!(v.to_string().parse::<Verdict>().unwrap(), v);
        }
    }

    #[test]
    fn prepare_requires_witness() {
        let f = Field::preset(8).unwrap();
        let public = triangle().strip_witness();
        let mut rng = SeededRng::from_seed(1);
        assert!(matches!(round_prepare(&public, &f, &mut rng), Err(ProtocolError::NotAProver)));
        assert!(matches!(provers(&public, &f, Mode::Honest), Err(ProtocolError::NotAProver)));
        assert!(provers(&public, &f, Mode::Cheat(CheatStrategy::RandomColoring)).is_ok());
    }

    #[test]
    fn consecutive_tapes_differ() {
        let f = Field::preset(112).unwrap();
        let g = triangle();
        let mut rng = SeededRng::from_seed(3);
        let a = round_prepare(&g, &f, &mut rng).unwrap();
        let b = round_prepare(&g, &f, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn honest_round_accepts_and_commitments_decode() {
        let f = Field::preset(112).unwrap();
        let g = triangle();
        let (mut p1, mut p2) = provers(&g, &f, Mode::Honest).unwrap();
        let out = play_round(&f, g.graph(), &mut p1, &mut p2, &settings(Mode::Honest), &ClockModel::ideal(), 0).unwrap();
        let t = &out.transcript;
        assert_eq!(t.verdict, Verdict::Accept);
        assert_eq!(out.signaling, ProverSignaling::None);
        let tape = draw_tape(&f, 3, &mut RoundStreams { seed: 7, round: 0 }.tape());
        for v in 0..3 {
            let y = reveal_verify(&f, t.x[v], t.a[v], tape.keys[v], None).unwrap();
            assert_eq!(y, tape.pi.apply(Color::ALL[v]));
        }
        let (i, j) = t.c.endpoints();
        assert_eq!(t.b_c, [tape.keys[i as usize], tape.keys[j as usize]]);
        assert_eq!(p1.inbox(), [Inbound::Query]);
        assert_eq!(p2.inbox(), [Inbound::Challenge]);
    }

    #[test]
    fn commit_rejects_wrong_length_and_reveal_rejects_non_edge() {
        let f = Field::preset(8).unwrap();
        let g = Graph::new(3, [Edge::new(0, 1), Edge::new(1, 2)]).unwrap();
        let g = ColoredGraph::with_witness(g, vec![Color::ALL[0], Color::ALL[1], Color::ALL[0]]).unwrap();
        let (mut p1, mut p2) = provers(&g, &f, Mode::Honest).unwrap();
        let mut rng = SeededRng::from_seed(0);
        let tape = round_prepare(&g, &f, &mut rng).unwrap();
        p1.prepare(tape.clone());
        p2.prepare(tape);
        assert!(matches!(p1.commit(&[f.one(); 2], &mut rng), Err(ProtocolError::ProtocolViolation(_))));
        assert!(matches!(
            p2.reveal(Edge::new(0, 2), None, &mut rng),
            Err(ProtocolError::ProtocolViolation(_))
        ));
    }

    fn forged(f: &Field, yi: u128, yj: u128) -> RoundTranscript {
        // x = 1 and b = 0 make a the decoded value
        RoundTranscript {
            round_index: 0,
            x: vec![f.one(); 3],
            a: vec![f.element(yi).unwrap(), f.element(yj).unwrap(), f.zero()],
            c: Edge::new(0, 1),
            b_c: [f.zero(), f.zero()],
            timestamps: Timestamps {
                t1: 0.0,
                t2: 10.0,
                t3: 0.0,
                t4: 10.0,
            },
            verdict: Verdict::Accept,
        }
    }

    #[test]
    fn check_order_and_reasons() {
        let f = Field::preset(8).unwrap();
        let g = triangle();
        let check = |t: &RoundTranscript| verifier_check(&f, g.graph(), t, 1000.0, 0.0, false).unwrap();
        assert_eq!(check(&forged(&f, 0, 2)), Verdict::Accept);
        assert_eq!(check(&forged(&f, 1, 1)), Verdict::Reject(RejectReason::Monochrome));
        assert_eq!(check(&forged(&f, 1, 7)), Verdict::Reject(RejectReason::ColorRange));
        // timing is checked before anything else
        let mut t = forged(&f, 1, 7);
        t.timestamps.t4 = 1000.0;
        assert_eq!(check(&t), Verdict::Reject(RejectReason::Timing));
        let mut t = forged(&f, 0, 1);
        t.timestamps.t4 = 999.999;
        assert_eq!(check(&t), Verdict::Accept);
    }

    #[test]
    fn transcript_json_round_trip() {
        let f = Field::preset(112).unwrap();
        let g = triangle();
        let (mut p1, mut p2) = provers(&g, &f, Mode::Honest).unwrap();
        let t = play_round(&f, g.graph(), &mut p1, &mut p2, &settings(Mode::Honest), &ClockModel::ideal(), 5)
            .unwrap()
            .transcript;
        let line = t.to_json_line();
        assert!(line.starts_with("{\"round_index\":5,\"X\":["));
        for key in ["\"A\":", "\"C\":", "\"B_C\":", "\"t1\":", "\"t4\":", "\"verdict\":\"accept\""] {
            assert!(line.contains(key), "{key} missing from {line}");
        }
        assert_eq!(RoundTranscript::from_json_line(&line, &f).unwrap(), t);
    }

    #[test]
    fn one_bad_edge_search() {
        let g = triangle();
        let (c, e) = one_bad_edge_coloring(g.graph(), g.witness().unwrap()).unwrap();
        assert_eq!(g.graph().monochromatic_edges(&c).collect::<Vec<_>>(), vec![e]);
        // K4 minus an edge: only the degree-2 vertex can be recolored alone
        let k4m = Graph::new(
            4,
            [Edge::new(0, 1), Edge::new(0, 2), Edge::new(0, 3), Edge::new(1, 2), Edge::new(1, 3)],
        )
        .unwrap();
        let w = vec![Color::ALL[0], Color::ALL[1], Color::ALL[2], Color::ALL[2]];
        let (c, _) = one_bad_edge_coloring(&k4m, &w).unwrap();
        assert_eq!(k4m.monochromatic_edges(&c).count(), 1);
    }

    #[test]
    fn relay_passes_colors_but_fails_timing() {
        let f = Field::preset(112).unwrap();
        let g = triangle();
        let mode = Mode::Cheat(CheatStrategy::Relay);
        let (mut p1, mut p2) = provers(&g, &f, mode).unwrap();
        for r in 0..20 {
            let out = play_round(&f, g.graph(), &mut p1, &mut p2, &settings(mode), &ClockModel::ideal(), r).unwrap();
            assert_eq!(out.signaling, ProverSignaling::RevealRelay);
            assert_eq!(out.transcript.verdict, Verdict::Reject(RejectReason::Timing));
            // with the timing check waived the forged keys would open
            let v = verifier_check(&f, g.graph(), &out.transcript, 1e9, 0.0, false).unwrap();
            assert_eq!(v, Verdict::Accept);
        }
    }

    #[test]
    fn run_report_counts() {
        let f = Field::preset(16).unwrap();
        let g = triangle();
        let mut buf = Vec::new();
        let r = run_protocol(&g, &f, 50, &settings(Mode::Honest), Some(&mut buf), Some(2)).unwrap();
        assert!(r.accept);
        assert_eq!((r.rounds, r.accepts, r.rejects()), (50, 50, 0));
        let lines = read_transcripts(buf.as_slice(), &f).unwrap();
        assert_eq!(lines.len(), 50);
        assert!(lines.iter().enumerate().all(|(i, t)| t.round_index == i as u64));
        let json = serde_json::to_value(&r).unwrap();
        for key in ["rounds", "accepts", "rejects_by_reason", "wall_time_ns", "params"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
