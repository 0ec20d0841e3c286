//! Analytic bounds: CHSH_Q(P) game values, soundness after `m` rounds, and the
//! round/resource arithmetic for a full proof.
//!
//! Field orders are always powers of two here, so `Q` is passed as `q_bits`.
//! Everything with large exponents is evaluated in log space.

use serde::Serialize;
use thiserror::Error;

use crate::commitment::{self, CommitError, DyadicEpsilon, COLORS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl From<CommitError> for BoundsError {
    fn from(e: CommitError) -> Self {
        BoundsError::InvalidParameter(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Game {
    /// CHSH_Q(P).
    Chsh,
    /// n-fold parallel CHSH_Q(P).
    ParallelChsh,
}

/// An upper bound on a game's quantum value, kept as
/// `leading + excess` with `leading = 1/P^n`.
///
/// Keeping the two terms apart lets callers use the excess directly; for large
/// `Q` it is many orders of magnitude below `leading` and would not survive a
/// floating-point subtraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameBound {
    pub game: Game,
    pub colors: u32,
    pub q_bits: u32,
    pub n: u32,
    pub classical_value: Option<f64>,
    pub leading: f64,
    pub excess: f64,
    /// False when the parameters fall outside the regime in which the bound
    /// was derived.
    pub approximation_valid: bool,
}

impl GameBound {
    pub fn quantum_upper(&self) -> f64 {
        self.leading + self.excess
    }

    /// A bound above 1 says nothing.
    pub fn is_vacuous(&self) -> bool {
        self.quantum_upper() > 1.0
    }
}

fn q_greater_than(q_bits: u32, p: u32) -> bool {
    q_bits >= 32 || (1u64 << q_bits) > u64::from(p)
}

/// `w*(CHSH_Q(P)) <= 1/P + 4 / Q^(1/3)` for `P >= 2`, `Q > P`.
pub fn chsh_quantum_upper(colors: u32, q_bits: u32) -> Result<GameBound, BoundsError> {
    if colors < 2 {
        return Err(BoundsError::InvalidParameter(format!("P = {colors} < 2")));
    }
    if !q_greater_than(q_bits, colors) {
        return Err(BoundsError::InvalidParameter(format!("need Q = 2^{q_bits} > P = {colors}")));
    }
    Ok(GameBound {
        game: Game::Chsh,
        colors,
        q_bits,
        n: 1,
        classical_value: None,
        leading: 1.0 / f64::from(colors),
        excess: 4.0 * (-f64::from(q_bits) / 3.0).exp2(),
        approximation_valid: true,
    })
}

/// `w*(CHSH^n_Q(P)) <= 1/P^n + 4 [2n(P-1) / (P^n Q)]^(1/3)`.
///
/// The coupled-game step uses `(1 + (P-1)/Q)^n - 1 <= 2n(P-1)/Q`, which holds
/// whenever `n(P-1)/Q <= 1`; outside that range `approximation_valid` is false.
pub fn chsh_parallel_quantum_upper(colors: u32, q_bits: u32, n: u32) -> Result<GameBound, BoundsError> {
    if colors < 2 {
        return Err(BoundsError::InvalidParameter(format!("P = {colors} < 2")));
    }
    if n < 1 {
        return Err(BoundsError::InvalidParameter("n must be at least 1".into()));
    }
    if !(q_bits >= 32 || (1u64 << q_bits) >= u64::from(colors)) {
        return Err(BoundsError::InvalidParameter(format!("need Q = 2^{q_bits} >= P = {colors}")));
    }
    let p = f64::from(colors);
    let nf = f64::from(n);
    let q = f64::from(q_bits);
    let log2_excess = 2.0 + ((2.0 * nf * (p - 1.0)).log2() - nf * p.log2() - q) / 3.0;
    let log2_ratio = (nf * (p - 1.0)).log2() - q;
    Ok(GameBound {
        game: Game::ParallelChsh,
        colors,
        q_bits,
        n,
        classical_value: None,
        leading: (-nf * p.log2()).exp2(),
        excess: log2_excess.exp2(),
        approximation_valid: log2_ratio <= 0.0,
    })
}

/// Exact quantum value of the coupled n-fold game under the non-signaling
/// guessing bound: `((1 + (P-1)/Q)^n - 1) / P^n`.
pub fn parallel_coupled_value(colors: u32, q_bits: u32, n: u32) -> f64 {
    let p = f64::from(colors);
    let x = (p - 1.0) * (-f64::from(q_bits)).exp2();
    (f64::from(n) * x.ln_1p()).exp_m1() / p.powi(n as i32)
}

/// Lower bound on the coupled game's value, `(w* - 1/|I_B|) / (64 S)`.
/// Can be negative.
pub fn coupled_game_lower(quantum_value: f64, projectivity: u32, bob_inputs: u32) -> Result<f64, BoundsError> {
    if projectivity < 1 || bob_inputs < 1 {
        return Err(BoundsError::InvalidParameter(format!(
            "need S >= 1 and |I_B| >= 1, got S={projectivity}, |I_B|={bob_inputs}"
        )));
    }
    if !(0.0..=1.0).contains(&quantum_value) {
        return Err(BoundsError::InvalidParameter(format!("value {quantum_value} outside [0, 1]")));
    }
    Ok((quantum_value - 1.0 / f64::from(bob_inputs)) / (64.0 * f64::from(projectivity)))
}

/// `(1 - 1/|E|)^m`, held as its natural log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Soundness {
    pub ln_value: f64,
}

impl Soundness {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

pub fn soundness_after_rounds(num_edges: u64, rounds: u64) -> Result<Soundness, BoundsError> {
    if num_edges < 1 {
        return Err(BoundsError::InvalidParameter("graph has no edges".into()));
    }
    if rounds == 0 {
        return Ok(Soundness { ln_value: 0.0 });
    }
    let per_round = (-1.0 / num_edges as f64).ln_1p();
    Ok(Soundness {
        ln_value: rounds as f64 * per_round,
    })
}

/// `m = k |E|`.
pub fn rounds_for_soundness(num_edges: u64, k: u64) -> u64 {
    k * num_edges
}

/// Total bits exchanged as commitments over a run: `N |V| m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResourceUsage {
    pub bits: u128,
    pub bytes: u128,
    /// Bytes / 2^20.
    pub megabytes: f64,
}

pub fn resource_bytes(n_bits: u32, num_vertices: u64, rounds: u64) -> ResourceUsage {
    let bits = u128::from(n_bits) * u128::from(num_vertices) * u128::from(rounds);
    let bytes = bits.div_ceil(8);
    ResourceUsage {
        bits,
        bytes,
        megabytes: bytes as f64 / f64::from(1u32 << 20),
    }
}

/// Rounds needed by the earlier quantum-secure protocol, `k (11|E|)^4`.
pub fn prior_work_rounds(num_edges: u64, k: u64) -> f64 {
    k as f64 * (11.0 * num_edges as f64).powi(4)
}

/// `k * 11 * |E|^4`, the other reading of the same expression. It does not
/// reproduce the quoted `2e18`; kept for comparison only.
pub fn prior_work_rounds_alt_reading(num_edges: u64, k: u64) -> f64 {
    k as f64 * 11.0 * (num_edges as f64).powi(4)
}

/// Everything the `params` table reports for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolParameters {
    pub vertices: u64,
    pub edges: u64,
    pub k: u64,
    pub epsilon_b: DyadicEpsilon,
    /// Field width N.
    pub n_bits: u32,
    /// m = k |E|.
    pub rounds: u64,
    pub ln_soundness: f64,
    pub soundness: f64,
    /// Achieved sum-binding parameter at `n_bits`.
    pub binding_epsilon: f64,
    pub resource_bits: u128,
    pub resource_bytes: u128,
    pub resource_megabytes: f64,
    pub prior_work_rounds: f64,
}

/// Sizing for a 3-coloring proof: `|D| = 2` commitments opened per round.
pub fn protocol_parameters(
    vertices: u64,
    edges: u64,
    k: u64,
    epsilon_b: DyadicEpsilon,
) -> Result<ProtocolParameters, BoundsError> {
    let n_bits = commitment::required_bits(COLORS, 2, epsilon_b)?;
    let rounds = rounds_for_soundness(edges, k);
    let soundness = soundness_after_rounds(edges, rounds)?;
    let resources = resource_bytes(n_bits, vertices, rounds);
    Ok(ProtocolParameters {
        vertices,
        edges,
        k,
        epsilon_b,
        n_bits,
        rounds,
        ln_soundness: soundness.ln_value,
        soundness: soundness.value(),
        binding_epsilon: commitment::binding_epsilon(COLORS, 2, n_bits)?,
        resource_bits: resources.bits,
        resource_bytes: resources.bytes,
        resource_megabytes: resources.megabytes,
        prior_work_rounds: prior_work_rounds(edges, k),
    })
}
