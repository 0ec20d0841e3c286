//! Subset relativistic bit commitment over GF(2^N).
//!
//! A color `y` is committed under query `x != 0` and key `b` as
//! `a = x*y - b`. Opening reveals `b`; the verifier recovers
//! `y = (a + b) / x` and accepts only if it is one of the embedded colors.
//!
//! The sizing helpers give the smallest `N` for which revealing a subset of
//! `|D|` commitments over a `P`-letter alphabet is `eps_b`-sum-binding.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Field, FieldElement, FieldError};
use crate::graph::Color;

/// Alphabet size for graph 3-coloring.
pub const COLORS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitError {
    #[error("query x must be nonzero")]
    InvalidQuery,
    #[error("reveal rejected: {0}")]
    RevealRejected(RejectReason),
    #[error("field GF(2^{0}) too small to embed three colors")]
    FieldTooSmall(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// `(a + b) / x` is not the embedding of a color.
    NotAColor { decoded: u128 },
    /// Decoded to a color other than the claimed one.
    ClaimMismatch { decoded: Color, claimed: Color },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NotAColor { decoded } => write!(f, "decoded value {decoded:#x} is not a color"),
            RejectReason::ClaimMismatch { decoded, claimed } => {
                write!(f, "decoded color {decoded} but {claimed} was claimed")
            }
        }
    }
}

/// Colors map to the field elements with integer representation 0, 1, 2.
pub fn embed_color(field: &Field, y: Color) -> Result<FieldElement, CommitError> {
    field
        .element(u128::from(y.value()))
        .map_err(|_| CommitError::FieldTooSmall(field.width_bits()))
}

/// Inverse of [`embed_color`] on its image.
pub fn extract_color(e: FieldElement) -> Option<Color> {
    u8::try_from(e.bits()).ok().and_then(Color::new)
}

/// `a = x*y - b`.
pub fn commit(field: &Field, x: FieldElement, y: Color, b: FieldElement) -> Result<FieldElement, CommitError> {
    if x.is_zero() {
        return Err(CommitError::InvalidQuery);
    }
    let xy = field.mul(x, embed_color(field, y)?)?;
    Ok(field.sub(xy, b)?)
}

/// Decode `(a + b) / x` and accept iff it is a color (equal to `claimed`, if given).
pub fn reveal_verify(
    field: &Field,
    x: FieldElement,
    a: FieldElement,
    b: FieldElement,
    claimed: Option<Color>,
) -> Result<Color, CommitError> {
    if x.is_zero() {
        return Err(CommitError::InvalidQuery);
    }
    let decoded = field.div(field.add(a, b)?, x)?;
    let color = extract_color(decoded).ok_or(CommitError::RevealRejected(RejectReason::NotAColor {
        decoded: decoded.bits(),
    }))?;
    match claimed {
        Some(c) if c != color => Err(CommitError::RevealRejected(RejectReason::ClaimMismatch {
            decoded: color,
            claimed: c,
        })),
        _ => Ok(color),
    }
}

/// One vertex's `(x, a, b, y)` with `a = x*y - b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitmentRecord {
    pub x: FieldElement,
    pub a: FieldElement,
    pub b: FieldElement,
    pub y: Color,
}

impl CommitmentRecord {
    pub fn new(field: &Field, x: FieldElement, y: Color, b: FieldElement) -> Result<Self, CommitError> {
        let a = commit(field, x, y, b)?;
        Ok(CommitmentRecord { x, a, b, y })
    }

    /// Re-checks the binding relation.
    pub fn verify(&self, field: &Field) -> Result<(), CommitError> {
        reveal_verify(field, self.x, self.a, self.b, Some(self.y)).map(|_| ())
    }
}

/// A binding parameter restricted to `2^-e`, so that `-3*log2(eps)` is an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DyadicEpsilon {
    neg_log2: u32,
}

impl DyadicEpsilon {
    /// `2^-neg_log2`.
    pub const fn pow2(neg_log2: u32) -> Self {
        DyadicEpsilon { neg_log2 }
    }

    pub fn neg_log2(&self) -> u32 {
        self.neg_log2
    }

    pub fn value(&self) -> f64 {
        (-f64::from(self.neg_log2)).exp2()
    }

    /// Accepts only exact powers of two in `(0, 1]`.
    pub fn from_f64(eps: f64) -> Option<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return None;
        }
        let e = -eps.log2();
        let rounded = e.round();
        ((-rounded).exp2() == eps && rounded <= f64::from(u32::MAX)).then(|| DyadicEpsilon::pow2(rounded as u32))
    }
}

impl fmt::Display for DyadicEpsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.neg_log2 {
            0 => f.write_str("1"),
            e => write!(f, "2^-{e}"),
        }
    }
}

impl FromStr for DyadicEpsilon {
    type Err = String;

    /// `2^-32`, `2^0`, or a decimal power of two such as `0.25`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(exp) = s.strip_prefix("2^") {
            let e: i64 = exp.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
            return u32::try_from(-e)
                .map(DyadicEpsilon::pow2)
                .map_err(|_| format!("epsilon {s} must be at most 1"));
        }
        let v: f64 = s.parse().map_err(|_| format!("cannot parse epsilon {s:?}"))?;
        DyadicEpsilon::from_f64(v).ok_or_else(|| format!("epsilon {s} is not a power of two in (0, 1]"))
    }
}

impl TryFrom<String> for DyadicEpsilon {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DyadicEpsilon> for String {
    fn from(e: DyadicEpsilon) -> String {
        e.to_string()
    }
}

/// Parameters of the subset commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentParams {
    /// Alphabet size `P`.
    pub colors: u32,
    /// `N = log2 Q`.
    pub q_bits: u32,
    /// `|D|`, how many commitments are opened together.
    pub subset_size: u32,
    pub epsilon_b: DyadicEpsilon,
}

impl CommitmentParams {
    /// Smallest field meeting `epsilon_b` for the given alphabet and subset.
    pub fn certified(colors: u32, subset_size: u32, epsilon_b: DyadicEpsilon) -> Result<Self, CommitError> {
        Ok(CommitmentParams {
            colors,
            q_bits: required_bits(colors, subset_size, epsilon_b)?,
            subset_size,
            epsilon_b,
        })
    }

    /// Whether `q_bits` meets the sizing bound for `epsilon_b`.
    pub fn is_binding_certified(&self) -> bool {
        required_bits(self.colors, self.subset_size, self.epsilon_b)
            .map(|n| self.q_bits >= n && q_exceeds(self.q_bits, self.colors))
            .unwrap_or(false)
    }
}

fn q_exceeds(q_bits: u32, p: u32) -> bool {
    q_bits >= 32 || (1u64 << q_bits) > u64::from(p)
}

/// Smallest integer `N` with
/// `N >= 7 + log|D| + log(P-1) + 2|D| log P - 3 log(eps_b)` (logs base 2).
///
/// Evaluated exactly: `N = 3e + ceil(log2(128 |D| (P-1) P^(2|D|)))` for
/// `eps_b = 2^-e`.
pub fn required_bits(colors: u32, subset_size: u32, epsilon_b: DyadicEpsilon) -> Result<u32, CommitError> {
    if colors < 2 {
        return Err(CommitError::InvalidParameter(format!("alphabet size {colors} < 2")));
    }
    if subset_size < 1 {
        return Err(CommitError::InvalidParameter("subset size must be at least 1".into()));
    }
    let m = BigUint::from(128u32)
        * BigUint::from(subset_size)
        * BigUint::from(colors - 1)
        * BigUint::from(colors).pow(2 * subset_size);
    let ceil_log2 = (m - 1u32).bits() as u32;
    Ok(ceil_log2 + 3 * epsilon_b.neg_log2())
}

/// `log2` of `eps_b = 4 [2|D|(P-1) P^(2|D|)]^(1/3) / Q^(1/3)`.
pub fn binding_epsilon_log2(colors: u32, subset_size: u32, q_bits: u32) -> Result<f64, CommitError> {
    if colors < 2 || subset_size < 1 {
        return Err(CommitError::InvalidParameter(format!(
            "need P >= 2 and |D| >= 1, got P={colors}, |D|={subset_size}"
        )));
    }
    if !q_exceeds(q_bits, colors) {
        return Err(CommitError::InvalidParameter(format!("Q = 2^{q_bits} must exceed P = {colors}")));
    }
    let d = f64::from(subset_size);
    let p = f64::from(colors);
    let inner = (2.0 * d * (p - 1.0)).log2() + 2.0 * d * p.log2();
    Ok(2.0 + (inner - f64::from(q_bits)) / 3.0)
}

/// The sum-binding parameter for a field of `2^q_bits` elements. Values above
/// 1 mean the field is too small to bind at all.
pub fn binding_epsilon(colors: u32, subset_size: u32, q_bits: u32) -> Result<f64, CommitError> {
    binding_epsilon_log2(colors, subset_size, q_bits).map(f64::exp2)
}
