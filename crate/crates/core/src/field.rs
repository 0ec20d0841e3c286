//! Arithmetic in binary extension fields GF(2^N), 1 <= N <= 127.
//!
//! Elements are polynomials over GF(2) of degree < N, stored as the low `N`
//! bits of a `u128` (bit `i` is the coefficient of `x^i`). Addition is XOR;
//! multiplication is a carry-less product reduced modulo the field's
//! irreducible polynomial.
//!
//! Small fields (N <= 8) multiply through log/antilog tables. Larger fields use
//! a 4-bit windowed carry-less multiply on 64-bit halves (Karatsuba-combined
//! into a 256-bit product) followed by folding reduction with the low part of
//! the modulus.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported extension degree.
pub const MAX_WIDTH: u32 = 127;

/// Widths with a shipped irreducible polynomial.
pub const PRESET_WIDTHS: [u32; 6] = [3, 4, 8, 16, 32, 112];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("field width mismatch: {left} bits vs {right} bits")]
    FieldSpecMismatch { left: u32, right: u32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unsupported field width {0} (supported: 1..=127)")]
    UnsupportedWidth(u32),
    #[error("reduction polynomial {poly:#x} must have degree {width} and constant term 1")]
    InvalidPolynomial { width: u32, poly: u128 },
    #[error("reduction polynomial {0:#x} is reducible")]
    Reducible(u128),
    #[error("no preset reduction polynomial for width {0}")]
    NoPreset(u32),
    #[error("value {value:#x} has bits set at or above position {width}")]
    OutOfRange { width: u32, value: u128 },
    #[error("expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("invalid hex encoding: {0}")]
    BadHex(String),
}

/// Width `N` and reduction polynomial of GF(2^N).
///
/// The polynomial includes the leading `x^N` term, so for N = 3 and
/// `x^3 + x + 1` it is `0b1011`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FieldSpecRepr", into = "FieldSpecRepr")]
pub struct FieldSpec {
    width_bits: u32,
    reduction_poly: u128,
}

impl FieldSpec {
    pub fn new(width_bits: u32, reduction_poly: u128) -> Result<Self, FieldError> {
        if width_bits == 0 || width_bits > MAX_WIDTH {
            return Err(FieldError::UnsupportedWidth(width_bits));
        }
        if degree(reduction_poly) != Some(width_bits) || reduction_poly & 1 == 0 {
            return Err(FieldError::InvalidPolynomial {
                width: width_bits,
                poly: reduction_poly,
            });
        }
        Ok(FieldSpec {
            width_bits,
            reduction_poly,
        })
    }

    /// Shipped polynomial for one of [`PRESET_WIDTHS`].
    pub fn preset(width_bits: u32) -> Result<Self, FieldError> {
        let poly: u128 = match width_bits {
            // x^3 + x + 1
            3 => 0b1011,
            // x^4 + x + 1
            4 => 0b1_0011,
            // x^8 + x^4 + x^3 + x + 1
            8 => 0x11B,
            // x^16 + x^5 + x^3 + x + 1
            16 => 0x1_002B,
            // x^32 + x^7 + x^3 + x^2 + 1
            32 => 0x1_0000_008D,
            // x^112 + x^5 + x^4 + x^3 + 1
            112 => (1u128 << 112) | 0b11_1001,
            w => return Err(FieldError::NoPreset(w)),
        };
        FieldSpec::new(width_bits, poly)
    }

    pub fn width_bits(&self) -> u32 {
        self.width_bits
    }

    pub fn reduction_poly(&self) -> u128 {
        self.reduction_poly
    }

    /// Encoded element length, `ceil(N / 8)`.
    pub fn byte_len(&self) -> usize {
        self.width_bits.div_ceil(8) as usize
    }

    /// Mask of the `N` low bits.
    pub fn mask(&self) -> u128 {
        low_mask(self.width_bits)
    }

    /// Rabin's test: `f` of degree N is irreducible iff `x^(2^N) = x mod f`
    /// and `gcd(x^(2^(N/q)) - x, f) = 1` for every prime `q | N`.
    pub fn is_irreducible(&self) -> bool {
        let n = self.width_bits;
        let f = self.reduction_poly;
        if n == 1 {
            return true;
        }
        let x = 0b10u128;
        let frobenius = |k: u32| {
            let mut acc = x;
            for _ in 0..k {
                acc = mulmod_generic(acc, acc, f, n);
            }
            acc
        };
        if frobenius(n) != x {
            return false;
        }
        prime_factors(n).into_iter().all(|q| {
            let h = frobenius(n / q) ^ x;
            poly_gcd(h, f) == 1
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FieldSpecRepr {
    width_bits: u32,
    reduction_poly: String,
}

impl TryFrom<FieldSpecRepr> for FieldSpec {
    type Error = FieldError;

    fn try_from(repr: FieldSpecRepr) -> Result<Self, Self::Error> {
        let digits = repr.reduction_poly.trim_start_matches("0x");
        let poly = u128::from_str_radix(digits, 16)
            .map_err(|e| FieldError::BadHex(format!("{}: {e}", repr.reduction_poly)))?;
        FieldSpec::new(repr.width_bits, poly)
    }
}

impl From<FieldSpec> for FieldSpecRepr {
    fn from(spec: FieldSpec) -> Self {
        FieldSpecRepr {
            width_bits: spec.width_bits,
            reduction_poly: format!("{:x}", spec.reduction_poly),
        }
    }
}

/// An element of GF(2^N). Carries its width so that mixing elements of
/// different fields is caught.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    bits: u128,
    width: u8,
}

impl FieldElement {
    /// Integer representation of the coefficient vector.
    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn width_bits(&self) -> u32 {
        u32::from(self.width)
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Little-endian bytes, `ceil(N / 8)` long, unused high bits zero.
    pub fn to_bytes(&self) -> Vec<u8> {
        let len = u32::from(self.width).div_ceil(8) as usize;
        self.bits.to_le_bytes()[..len].to_vec()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{})[{:#x}]", self.width, self.bits)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Log/antilog tables for N <= 8.
#[derive(Debug, Clone)]
struct SmallTables {
    log: Vec<u16>,
    exp: Vec<u8>,
}

/// A concrete field: a [`FieldSpec`] plus precomputed multiplication data.
#[derive(Debug, Clone)]
pub struct Field {
    spec: FieldSpec,
    /// `f - x^N`, the folding constant for reduction.
    fold: u128,
    tables: Option<SmallTables>,
}

impl Field {
    /// Fails with [`FieldError::Reducible`] unless the polynomial passes
    /// [`FieldSpec::is_irreducible`].
    pub fn new(spec: FieldSpec) -> Result<Self, FieldError> {
        if !spec.is_irreducible() {
            return Err(FieldError::Reducible(spec.reduction_poly));
        }
        let fold = spec.reduction_poly ^ (1u128 << spec.width_bits);
        let mut field = Field {
            spec,
            fold,
            tables: None,
        };
        if spec.width_bits <= 8 {
            field.tables = field.build_tables();
        }
        Ok(field)
    }

    pub fn preset(width_bits: u32) -> Result<Self, FieldError> {
        Field::new(FieldSpec::preset(width_bits)?)
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn width_bits(&self) -> u32 {
        self.spec.width_bits
    }

    pub fn byte_len(&self) -> usize {
        self.spec.byte_len()
    }

    /// Number of elements as `log2`, i.e. `N`.
    pub fn order_bits(&self) -> u32 {
        self.spec.width_bits
    }

    pub fn zero(&self) -> FieldElement {
        self.wrap(0)
    }

    pub fn one(&self) -> FieldElement {
        self.wrap(1)
    }

    pub fn element(&self, bits: u128) -> Result<FieldElement, FieldError> {
        if bits & !self.spec.mask() != 0 {
            return Err(FieldError::OutOfRange {
                width: self.spec.width_bits,
                value: bits,
            });
        }
        Ok(self.wrap(bits))
    }

    /// All `2^N` elements in integer order. Only sensible for small N.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        assert!(self.spec.width_bits <= 24, "refusing to enumerate GF(2^{})", self.spec.width_bits);
        (0..(1u128 << self.spec.width_bits)).map(|b| self.wrap(b))
    }

    pub fn from_bytes(&self, bytes: &[u8]) -> Result<FieldElement, FieldError> {
        let expected = self.byte_len();
        if bytes.len() != expected {
            return Err(FieldError::BadLength {
                expected,
                actual: bytes.len(),
            });
        }
        let mut buf = [0u8; 16];
        buf[..expected].copy_from_slice(bytes);
        self.element(u128::from_le_bytes(buf))
    }

    pub fn from_hex(&self, s: &str) -> Result<FieldElement, FieldError> {
        let bytes = hex::decode(s).map_err(|e| FieldError::BadHex(e.to_string()))?;
        self.from_bytes(&bytes)
    }

    pub fn add(&self, u: FieldElement, v: FieldElement) -> Result<FieldElement, FieldError> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.wrap(u.bits ^ v.bits))
    }

    /// Same as [`Field::add`] in characteristic 2.
    pub fn sub(&self, u: FieldElement, v: FieldElement) -> Result<FieldElement, FieldError> {
        self.add(u, v)
    }

    pub fn mul(&self, u: FieldElement, v: FieldElement) -> Result<FieldElement, FieldError> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.wrap(self.mul_bits(u.bits, v.bits)))
    }

    /// Multiplicative inverse by the extended Euclidean algorithm over GF(2)[x].
    pub fn inv(&self, u: FieldElement) -> Result<FieldElement, FieldError> {
        self.check(u)?;
        if u.bits == 0 {
            return Err(FieldError::DivisionByZero);
        }
        Ok(self.wrap(poly_inv(u.bits, self.spec.reduction_poly)))
    }

    pub fn div(&self, u: FieldElement, v: FieldElement) -> Result<FieldElement, FieldError> {
        let v_inv = self.inv(v)?;
        self.mul(u, v_inv)
    }

    pub fn pow(&self, u: FieldElement, mut exp: u128) -> Result<FieldElement, FieldError> {
        self.check(u)?;
        let mut base = u.bits;
        let mut acc = 1u128;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul_bits(acc, base);
            }
            base = self.mul_bits(base, base);
            exp >>= 1;
        }
        Ok(self.wrap(acc))
    }

    /// Uniform over all `2^N` elements.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let raw = (u128::from(rng.next_u64()) << 64) | u128::from(rng.next_u64());
        self.wrap(raw & self.spec.mask())
    }

    /// Uniform over the `2^N - 1` nonzero elements (rejection sampling).
    pub fn sample_uniform_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        loop {
            let e = self.sample_uniform(rng);
            if !e.is_zero() {
                return e;
            }
        }
    }

    fn wrap(&self, bits: u128) -> FieldElement {
        FieldElement {
            bits,
            width: self.spec.width_bits as u8,
        }
    }

    fn check(&self, e: FieldElement) -> Result<(), FieldError> {
        if u32::from(e.width) != self.spec.width_bits {
            return Err(FieldError::FieldSpecMismatch {
                left: self.spec.width_bits,
                right: u32::from(e.width),
            });
        }
        Ok(())
    }

    fn mul_bits(&self, a: u128, b: u128) -> u128 {
        if let Some(t) = &self.tables {
            if a == 0 || b == 0 {
                return 0;
            }
            let order = t.exp.len();
            let idx = (usize::from(t.log[a as usize]) + usize::from(t.log[b as usize])) % order;
            return u128::from(t.exp[idx]);
        }
        let (hi, lo) = clmul128(a, b);
        reduce_fold(hi, lo, self.fold, self.spec.width_bits)
    }

    fn build_tables(&self) -> Option<SmallTables> {
        let n = self.spec.width_bits;
        let size = 1usize << n;
        let order = size - 1;
        let f = self.spec.reduction_poly;
        // find a generator of the multiplicative group
        for g in 1..size as u128 {
            let mut exp = Vec::with_capacity(order);
            let mut log = vec![0u16; size];
            let mut acc = 1u128;
            let mut ok = true;
            for i in 0..order {
                if i > 0 && acc == 1 {
                    ok = false;
                    break;
                }
                exp.push(acc as u8);
                log[acc as usize] = i as u16;
                acc = mulmod_generic(acc, g, f, n);
            }
            if ok && acc == 1 {
                return Some(SmallTables { log, exp });
            }
        }
        None
    }
}

fn low_mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

fn degree(p: u128) -> Option<u32> {
    if p == 0 {
        None
    } else {
        Some(127 - p.leading_zeros())
    }
}

/// Carry-less 64x64 -> 128 product, 4 bits of `b` at a time.
fn clmul64(a: u64, b: u64) -> u128 {
    let a = u128::from(a);
    let mut table = [0u128; 16];
    for i in 1..16usize {
        table[i] = if i & 1 == 1 {
            table[i - 1] ^ a
        } else {
            table[i >> 1] << 1
        };
    }
    let mut acc = 0u128;
    for shift in (0..16).rev() {
        acc = (acc << 4) ^ table[((b >> (shift * 4)) & 0xF) as usize];
    }
    acc
}

/// Carry-less 128x128 -> 256 product as `(hi, lo)`.
fn clmul128(a: u128, b: u128) -> (u128, u128) {
    let (a1, a0) = ((a >> 64) as u64, a as u64);
    let (b1, b0) = ((b >> 64) as u64, b as u64);
    let lo = clmul64(a0, b0);
    let hi = clmul64(a1, b1);
    let mid = clmul64(a0 ^ a1, b0 ^ b1) ^ lo ^ hi;
    (hi ^ (mid >> 64), lo ^ (mid << 64))
}

/// Reduce a 256-bit product modulo `x^n + fold`.
///
/// Uses `x^n = fold`: the part above bit `n` is multiplied by `fold` and
/// xored back in, repeated until the value fits in `n` bits.
fn reduce_fold(mut hi: u128, mut lo: u128, fold: u128, n: u32) -> u128 {
    let mask = low_mask(n);
    loop {
        // high = (hi:lo) >> n
        let high = if n == 0 {
            lo
        } else if n >= 128 {
            hi >> (n - 128)
        } else {
            (lo >> n) | (hi << (128 - n))
        };
        let high_hi = if n >= 128 || n == 0 { 0 } else { hi >> n };
        if high == 0 && high_hi == 0 {
            return lo & mask;
        }
        let (p_hi, p_lo) = clmul128(high, fold);
        // high_hi is only nonzero when the product spans more than 128 + n bits,
        // which cannot happen for inputs below 2^n.
        debug_assert_eq!(high_hi, 0);
        lo = (lo & mask) ^ p_lo;
        hi = p_hi;
    }
}

/// `a * b mod f` for any `f` of degree `n`, bit-serial. Used for table
/// construction and the irreducibility test.
fn mulmod_generic(a: u128, b: u128, f: u128, n: u32) -> u128 {
    let top = 1u128 << (n - 1);
    let fold = f ^ (1u128 << n);
    let mut acc = 0u128;
    for i in (0..n).rev() {
        let carry = acc & top != 0;
        acc = (acc << 1) & low_mask(n);
        if carry {
            acc ^= fold;
        }
        if (b >> i) & 1 == 1 {
            acc ^= a;
        }
    }
    acc
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let db = degree(b).unwrap();
        while let Some(da) = degree(a) {
            if da < db {
                break;
            }
            a ^= b << (da - db);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

/// Inverse of `a` modulo `f`; `a` nonzero and coprime to `f`.
fn poly_inv(a: u128, f: u128) -> u128 {
    let (mut r0, mut r1) = (f, a);
    let (mut s0, mut s1) = (0u128, 1u128);
    while r1 != 0 {
        let d1 = degree(r1).unwrap();
        while let Some(d0) = degree(r0) {
            if d0 < d1 {
                break;
            }
            let shift = d0 - d1;
            r0 ^= r1 << shift;
            s0 ^= s1 << shift;
        }
        std::mem::swap(&mut r0, &mut r1);
        std::mem::swap(&mut s0, &mut s1);
    }
    debug_assert_eq!(r0, 1, "element not invertible modulo f");
    s0
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}
