//! Binary frame format for the networked mode.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RZKP" (0x52 0x5A 0x4B 0x50)
//! 4       1     version (1)
//! 5       8     round index, little-endian
//! 13      1     phase: 0 query, 1 commit, 2 challenge, 3 reveal
//! 14      4     element count, little-endian
//! 18      ...   count * ceil(N/8) bytes, each a little-endian field element
//! ```
//!
//! A challenge carries the two edge endpoints as field elements whose integer
//! representation is the vertex index. Timestamps never travel on the wire.

use std::io::Read;

use thiserror::Error;

use crate::field::{Field, FieldElement, FieldError};
use crate::graph::Edge;

pub const MAGIC: [u8; 4] = *b"RZKP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;
/// Default cap on elements per frame.
pub const DEFAULT_MAX_ELEMENTS: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported frame version {0}")]
    BadVersion(u8),
    #[error("unknown phase byte {0}")]
    BadPhase(u8),
    #[error("frame declares {count} elements, limit is {limit}")]
    Oversized { count: u32, limit: u32 },
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("element: {0}")]
    Element(#[from] FieldError),
    #[error("challenge must carry exactly two distinct vertex indices")]
    BadChallenge,
    #[error("vertex index {0} does not fit in the field")]
    IndexTooLarge(u32),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Query = 0,
    Commit = 1,
    Challenge = 2,
    Reveal = 3,
}

impl TryFrom<u8> for Phase {
    type Error = FrameError;

    fn try_from(b: u8) -> Result<Self, FrameError> {
        Ok(match b {
            0 => Phase::Query,
            1 => Phase::Commit,
            2 => Phase::Challenge,
            3 => Phase::Reveal,
            other => return Err(FrameError::BadPhase(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub round: u64,
    pub phase: Phase,
    pub elements: Vec<FieldElement>,
}

/// Parsed fixed-size header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub round: u64,
    pub phase: Phase,
    pub count: u32,
}

impl Header {
    pub fn parse(bytes: &[u8; HEADER_LEN], max_elements: u32) -> Result<Header, FrameError> {
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FrameError::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(FrameError::BadVersion(bytes[4]));
        }
        let round = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
        let phase = Phase::try_from(bytes[13])?;
        let count = u32::from_le_bytes(bytes[14..18].try_into().unwrap());
        if count > max_elements {
            return Err(FrameError::Oversized {
                count,
                limit: max_elements,
            });
        }
        Ok(Header { round, phase, count })
    }
}

impl Frame {
    pub fn new(round: u64, phase: Phase, elements: Vec<FieldElement>) -> Self {
        Frame { round, phase, elements }
    }

    pub fn challenge(round: u64, edge: Edge, field: &Field) -> Result<Self, FrameError> {
        let (u, v) = edge.endpoints();
        let to_elem = |i: u32| field.element(u128::from(i)).map_err(|_| FrameError::IndexTooLarge(i));
        Ok(Frame::new(round, Phase::Challenge, vec![to_elem(u)?, to_elem(v)?]))
    }

    /// The edge carried by a challenge frame.
    pub fn challenge_edge(&self) -> Result<Edge, FrameError> {
        if self.phase != Phase::Challenge || self.elements.len() != 2 {
            return Err(FrameError::BadChallenge);
        }
        let idx = |e: &FieldElement| u32::try_from(e.bits()).map_err(|_| FrameError::BadChallenge);
        let (u, v) = (idx(&self.elements[0])?, idx(&self.elements[1])?);
        if u == v {
            return Err(FrameError::BadChallenge);
        }
        Ok(Edge::new(u, v))
    }

    pub fn encode(&self) -> Vec<u8> {
        let elem_len = self.elements.first().map(|e| e.to_bytes().len()).unwrap_or(0);
        let mut out = Vec::with_capacity(HEADER_LEN + elem_len * self.elements.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.phase as u8);
        out.extend_from_slice(&(self.elements.len() as u32).to_le_bytes());
        for e in &self.elements {
            out.extend_from_slice(&e.to_bytes());
        }
        out
    }

    /// Decode exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8], field: &Field, max_elements: u32) -> Result<Frame, FrameError> {
        let header_bytes: &[u8; HEADER_LEN] = bytes
            .get(..HEADER_LEN)
            .and_then(|h| h.try_into().ok())
            .ok_or(FrameError::Truncated {
                need: HEADER_LEN,
                have: bytes.len(),
            })?;
        let header = Header::parse(header_bytes, max_elements)?;
        let body = &bytes[HEADER_LEN..];
        let need = header.count as usize * field.byte_len();
        if body.len() < need {
            return Err(FrameError::Truncated {
                need: HEADER_LEN + need,
                have: bytes.len(),
            });
        }
        if body.len() > need {
            return Err(FrameError::TrailingBytes(body.len() - need));
        }
        Self::from_body(header, body, field)
    }

    /// Read one frame from a byte stream.
    pub fn read_from<R: Read>(reader: &mut R, field: &Field, max_elements: u32) -> Result<Frame, FrameError> {
        let mut header_bytes = [0u8; HEADER_LEN];
        reader.read_exact(&mut header_bytes)?;
        let header = Header::parse(&header_bytes, max_elements)?;
        let mut body = vec![0u8; header.count as usize * field.byte_len()];
        reader.read_exact(&mut body)?;
        Self::from_body(header, &body, field)
    }

    fn from_body(header: Header, body: &[u8], field: &Field) -> Result<Frame, FrameError> {
        let elements = body
            .chunks_exact(field.byte_len())
            .map(|c| field.from_bytes(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Frame {
            round: header.round,
            phase: header.phase,
            elements,
        })
    }
}
