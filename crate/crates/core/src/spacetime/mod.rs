//! Simulated spacetime for one proof round.
//!
//! V1/P1 and V2/P2 are two verifier–prover pairs a distance `d` apart. Each
//! verifier stamps its own events with a local clock that is off from true
//! time by a fixed skew in `[-Δ, +Δ]`. The check phase only accepts a round if
//! `|t1 - t4| < τ` and `|t2 - t3| < τ`, where `τ` does not exceed `d/c`; any
//! message the provers pass between each other costs at least `d/c` of true
//! time, and the simulator charges it.

pub mod transport;
pub mod wire;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpacetimeError {
    #[error("invalid spacetime config: {0}")]
    InvalidConfig(String),
    #[error("unknown spacetime profile {0:?} (expected \"testbed\" or \"zero\")")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    V1,
    V2,
    P1,
    P2,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Geometry, clocks and hardware latencies.
///
/// Pair 0 is V1–P1, pair 1 is V2–P2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimeConfig {
    /// Prover separation `d` in meters.
    pub distance_m: f64,
    /// Check threshold. Defaults to `floor(d/c)` in ns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_ns: Option<f64>,
    /// Bound `Δ` on each verifier clock's offset from true time.
    pub clock_skew_ns: f64,
    /// Mean one-way verifier↔prover delay per pair (fiber, conversion, response).
    pub link_latency_ns: [f64; 2],
    /// Standard deviation of each one-way hop around its mean.
    pub link_jitter_ns: f64,
    /// Hop jitter is truncated to `±jitter_clip_ns`.
    pub jitter_clip_ns: f64,
    /// Prover response computation time.
    pub compute_ns: f64,
    /// True-time start of V2's challenge minus start of V1's query.
    pub trigger_offset_ns: f64,
    /// True time between consecutive round triggers.
    pub round_interval_ns: f64,
}

impl SpacetimeConfig {
    /// 300 m separation, τ = 1000 ns, Δ = 30 ns, one FPGA clock cycle
    /// (6.4 ns) of compute, and per-pair delays whose round trips center on
    /// 676.3 ns (V1–P1) and 708.0 ns (V2–P2).
    pub fn testbed() -> Self {
        SpacetimeConfig {
            distance_m: 300.0,
            tau_ns: None,
            clock_skew_ns: 30.0,
            link_latency_ns: [334.95, 350.81],
            link_jitter_ns: 7.9,
            jitter_clip_ns: 40.0,
            compute_ns: 6.4,
            trigger_offset_ns: 0.0,
            round_interval_ns: 1000.0,
        }
    }

    /// Same geometry as [`SpacetimeConfig::testbed`] with ideal hardware and clocks.
    pub fn zero() -> Self {
        SpacetimeConfig {
            distance_m: 300.0,
            tau_ns: None,
            clock_skew_ns: 0.0,
            link_latency_ns: [0.0, 0.0],
            link_jitter_ns: 0.0,
            jitter_clip_ns: 0.0,
            compute_ns: 0.0,
            trigger_offset_ns: 0.0,
            round_interval_ns: 1000.0,
        }
    }

    pub fn profile(name: &str) -> Result<Self, SpacetimeError> {
        match name {
            "testbed" => Ok(Self::testbed()),
            "zero" => Ok(Self::zero()),
            other => Err(SpacetimeError::UnknownProfile(other.to_string())),
        }
    }

    /// `d/c` in nanoseconds.
    pub fn light_delay_ns(&self) -> f64 {
        self.distance_m / SPEED_OF_LIGHT * 1e9
    }

    pub fn tau_ns(&self) -> f64 {
        self.tau_ns.unwrap_or_else(|| self.light_delay_ns().floor())
    }

    pub fn validate(&self) -> Result<(), SpacetimeError> {
        let fields = [
            ("distance_m", self.distance_m),
            ("clock_skew_ns", self.clock_skew_ns),
            ("link_latency_ns[0]", self.link_latency_ns[0]),
            ("link_latency_ns[1]", self.link_latency_ns[1]),
            ("link_jitter_ns", self.link_jitter_ns),
            ("jitter_clip_ns", self.jitter_clip_ns),
            ("compute_ns", self.compute_ns),
            ("round_interval_ns", self.round_interval_ns),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SpacetimeError::InvalidConfig(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !self.trigger_offset_ns.is_finite() {
            return Err(SpacetimeError::InvalidConfig("trigger_offset_ns must be finite".into()));
        }
        match self.tau_ns {
            Some(t) if !(t.is_finite() && t > 0.0) => {
                Err(SpacetimeError::InvalidConfig(format!("tau_ns = {t} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the timing checks alone rule out prover signaling: `τ <= d/c`
    /// and the hardware path is long enough to absorb both clock errors.
    pub fn enforces_non_signaling(&self) -> bool {
        let min_path = self.link_latency_ns[0].min(self.link_latency_ns[1]) - self.jitter_clip_ns;
        self.tau_ns() <= self.light_delay_ns() && min_path.max(0.0) * 2.0 + self.compute_ns >= 2.0 * self.clock_skew_ns
    }
}

/// Per-run verifier clock offsets, each in `[-Δ, +Δ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    pub skew_v1_ns: f64,
    pub skew_v2_ns: f64,
}

impl ClockModel {
    pub fn ideal() -> Self {
        ClockModel {
            skew_v1_ns: 0.0,
            skew_v2_ns: 0.0,
        }
    }

    pub fn draw<R: Rng + ?Sized>(config: &SpacetimeConfig, rng: &mut R) -> Self {
        let delta = config.clock_skew_ns;
        if delta == 0.0 {
            return Self::ideal();
        }
        ClockModel {
            skew_v1_ns: rng.random_range(-delta..=delta),
            skew_v2_ns: rng.random_range(-delta..=delta),
        }
    }

    pub fn skew(&self, role: Role) -> f64 {
        match role {
            Role::V1 => self.skew_v1_ns,
            Role::V2 => self.skew_v2_ns,
            // provers' clocks play no part in any check
            Role::P1 | Role::P2 => 0.0,
        }
    }
}

/// Information the provers exchange with each other during a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProverSignaling {
    /// Honest: no communication between provers.
    #[default]
    None,
    /// P1 forwards the query to P2 on receipt; P2 waits for it.
    QueryToP2,
    /// P2 forwards the challenge to P1 on receipt; P1 waits for it.
    ChallengeToP1,
    /// After seeing the challenge, P2 asks P1 for what it needs and waits for
    /// the answer (one round trip between the provers).
    RevealRelay,
}

impl ProverSignaling {
    /// True if P2's reveal can depend on the query.
    pub fn reveal_sees_query(&self) -> bool {
        matches!(self, ProverSignaling::QueryToP2 | ProverSignaling::RevealRelay)
    }

    /// True if P1's commitment can depend on the challenge.
    pub fn commit_sees_challenge(&self) -> bool {
        matches!(self, ProverSignaling::ChallengeToP1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    QuerySent,
    QueryReceived,
    CommitSent,
    CommitReceived,
    ChallengeSent,
    ChallengeReceived,
    RevealSent,
    RevealReceived,
    CrossProverSent,
    CrossProverReceived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: Event,
    pub role: Role,
    pub true_time_ns: f64,
    pub observed_time_ns: f64,
}

/// Everything that happened in one simulated round, in true-time order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    fn push(&mut self, clocks: &ClockModel, role: Role, event: Event, true_time_ns: f64) {
        self.records.push(EventRecord {
            event,
            role,
            true_time_ns,
            observed_time_ns: true_time_ns + clocks.skew(role),
        });
    }

    fn sort(&mut self) {
        self.records
            .sort_by(|a, b| a.true_time_ns.total_cmp(&b.true_time_ns));
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn find(&self, role: Role, event: Event) -> Option<&EventRecord> {
        self.records.iter().find(|r| r.role == role && r.event == event)
    }
}

/// The four verifier timestamps, each on its verifier's local clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl Timestamps {
    /// `|t1 - t4|`
    pub fn query_reveal_gap(&self) -> f64 {
        (self.t1 - self.t4).abs()
    }

    /// `|t2 - t3|`
    pub fn commit_challenge_gap(&self) -> f64 {
        (self.t2 - self.t3).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTiming {
    pub timestamps: Timestamps,
    pub log: EventLog,
}

fn hop<R: Rng + ?Sized>(config: &SpacetimeConfig, pair: usize, rng: &mut R) -> f64 {
    let mean = config.link_latency_ns[pair];
    if config.link_jitter_ns == 0.0 {
        return mean;
    }
    let normal = Normal::new(0.0, config.link_jitter_ns).expect("jitter is finite and positive");
    let clip = config.jitter_clip_ns;
    (mean + normal.sample(rng).clamp(-clip, clip)).max(0.0)
}

/// Simulate one round starting at true time `start_ns`.
///
/// V1 sends the query at `start_ns`; V2 sends the challenge
/// `trigger_offset_ns` later. Each message takes one jittered hop on its
/// pair's link, provers take `compute_ns` to respond, and any prover-to-prover
/// message takes exactly `d/c`.
pub fn simulate_round_timing<R: Rng + ?Sized>(
    config: &SpacetimeConfig,
    clocks: &ClockModel,
    signaling: ProverSignaling,
    start_ns: f64,
    rng: &mut R,
) -> RoundTiming {
    let light = config.light_delay_ns();
    let mut log = EventLog::default();

    let query_sent = start_ns;
    let challenge_sent = start_ns + config.trigger_offset_ns;
    let query_received = query_sent + hop(config, 0, rng);
    let challenge_received = challenge_sent + hop(config, 1, rng);
    log.push(clocks, Role::V1, Event::QuerySent, query_sent);
    log.push(clocks, Role::P1, Event::QueryReceived, query_received);
    log.push(clocks, Role::V2, Event::ChallengeSent, challenge_sent);
    log.push(clocks, Role::P2, Event::ChallengeReceived, challenge_received);

    let (p1_ready, p2_ready) = match signaling {
        ProverSignaling::None => (query_received, challenge_received),
        ProverSignaling::QueryToP2 => {
            log.push(clocks, Role::P1, Event::CrossProverSent, query_received);
            log.push(clocks, Role::P2, Event::CrossProverReceived, query_received + light);
            (query_received, challenge_received.max(query_received + light))
        }
        ProverSignaling::ChallengeToP1 => {
            log.push(clocks, Role::P2, Event::CrossProverSent, challenge_received);
            log.push(clocks, Role::P1, Event::CrossProverReceived, challenge_received + light);
            (query_received.max(challenge_received + light), challenge_received)
        }
        ProverSignaling::RevealRelay => {
            let request_at_p1 = challenge_received + light;
            let answer_sent = request_at_p1.max(query_received) + config.compute_ns;
            log.push(clocks, Role::P2, Event::CrossProverSent, challenge_received);
            log.push(clocks, Role::P1, Event::CrossProverReceived, request_at_p1);
            log.push(clocks, Role::P1, Event::CrossProverSent, answer_sent);
            log.push(clocks, Role::P2, Event::CrossProverReceived, answer_sent + light);
            (query_received, answer_sent + light)
        }
    };

    let commit_sent = p1_ready + config.compute_ns;
    let reveal_sent = p2_ready + config.compute_ns;
    let commit_received = commit_sent + hop(config, 0, rng);
    let reveal_received = reveal_sent + hop(config, 1, rng);
    log.push(clocks, Role::P1, Event::CommitSent, commit_sent);
    log.push(clocks, Role::V1, Event::CommitReceived, commit_received);
    log.push(clocks, Role::P2, Event::RevealSent, reveal_sent);
    log.push(clocks, Role::V2, Event::RevealReceived, reveal_received);
    log.sort();

    let timestamps = Timestamps {
        t1: query_sent + clocks.skew_v1_ns,
        t2: commit_received + clocks.skew_v1_ns,
        t3: challenge_sent + clocks.skew_v2_ns,
        t4: reveal_received + clocks.skew_v2_ns,
    };
    RoundTiming { timestamps, log }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingVerdict {
    /// `|t1 - t4|` plus the worst-case margin, if applied.
    pub query_reveal_ns: f64,
    /// `|t2 - t3|` plus the worst-case margin, if applied.
    pub commit_challenge_ns: f64,
    pub pass: bool,
}

/// Strict check `|t1 - t4| < τ` and `|t2 - t3| < τ`. With `worst_case`, each
/// observed gap is first widened by `2Δ` (both clocks off in the bad direction).
pub fn timing_check(ts: &Timestamps, tau_ns: f64, skew_ns: f64, worst_case: bool) -> TimingVerdict {
    let margin = if worst_case { 2.0 * skew_ns } else { 0.0 };
    let query_reveal_ns = ts.query_reveal_gap() + margin;
    let commit_challenge_ns = ts.commit_challenge_gap() + margin;
    TimingVerdict {
        query_reveal_ns,
        commit_challenge_ns,
        pass: query_reveal_ns < tau_ns && commit_challenge_ns < tau_ns,
    }
}
