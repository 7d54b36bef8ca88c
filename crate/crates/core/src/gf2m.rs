//! Arithmetic in the binary extension fields GF(2^233) and GF(2^283).
//!
//! Elements are polynomials over GF(2), stored little-endian in 64-bit limbs
//! and kept reduced modulo the field polynomial: t^233 + t^74 + 1 for the
//! 233-bit field, t^283 + t^12 + t^7 + t^5 + 1 for the 283-bit field.
//! Addition is XOR. Squaring spreads the bits (a_i lands on bit 2i) and
//! reduces. `mul_classical` is the shift-and-XOR reference multiplier; the
//! cycle-scheduled segmented multiplier lives in [`crate::karatsuba`] and is
//! checked against it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Limbs needed for the widest supported element (283 bits).
pub(crate) const MAX_LIMBS: usize = 5;
/// Limbs of an unreduced polynomial. Covers products of two reduced elements
/// (degree <= 564) plus headroom for segment-aligned fold offsets up to 426
/// of 141-bit partial products (bit 566 < 576).
pub(crate) const POLY_LIMBS: usize = 9;

/// Identifies which binary field an element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldId {
    B233,
    B283,
}

impl FieldId {
    /// Extension degree l; elements are polynomials of degree < l.
    pub fn bit_len(self) -> usize {
        match self {
            FieldId::B233 => 233,
            FieldId::B283 => 283,
        }
    }

    /// Number of 64-bit limbs occupied by a reduced element.
    pub fn limbs(self) -> usize {
        match self {
            FieldId::B233 => 4,
            FieldId::B283 => 5,
        }
    }

    /// Exponents of the field polynomial below the leading term:
    /// f(t) = t^l + sum of t^e over these taps.
    pub fn reduction_taps(self) -> &'static [usize] {
        match self {
            FieldId::B233 => &[74, 0],
            FieldId::B283 => &[12, 7, 5, 0],
        }
    }

    /// Hex digits in the canonical text form of an element.
    pub fn hex_len(self) -> usize {
        (self.bit_len() + 3) / 4
    }

    /// The field polynomial f(t) as an unreduced polynomial of degree l.
    pub fn modulus(self) -> Polynomial {
        let mut p = Polynomial::zero();
        p.set_bit(self.bit_len());
        for &tap in self.reduction_taps() {
            p.set_bit(tap);
        }
        p
    }

    /// Mask for the top occupied limb of a reduced element.
    fn top_mask(self) -> u64 {
        let used = self.bit_len() % 64; // 41 and 27: never 0 for these fields
        (1u64 << used) - 1
    }

    pub fn parse(s: &str) -> Result<FieldId> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B233" | "B-233" | "SECT233R1" | "233" => Ok(FieldId::B233),
            "B283" | "B-283" | "SECT283R1" | "283" => Ok(FieldId::B283),
            other => Err(Error::InvalidParams(format!("unknown field {other:?}"))),
        }
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldId::B233 => write!(f, "B233"),
            FieldId::B283 => write!(f, "B283"),
        }
    }
}

/// A reduced element of GF(2^233) or GF(2^283), tagged with its field.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    field: FieldId,
    limbs: [u64; MAX_LIMBS],
}

impl FieldElement {
    pub fn zero(field: FieldId) -> FieldElement {
        FieldElement { field, limbs: [0; MAX_LIMBS] }
    }

    pub fn one(field: FieldId) -> FieldElement {
        let mut limbs = [0; MAX_LIMBS];
        limbs[0] = 1;
        FieldElement { field, limbs }
    }

    /// Wraps raw limbs, rejecting values with bits at or above position l.
    pub fn from_limbs(field: FieldId, limbs: [u64; MAX_LIMBS]) -> Result<FieldElement> {
        let n = field.limbs();
        let in_range = limbs[n..].iter().all(|&w| w == 0)
            && limbs[n - 1] & !field.top_mask() == 0;
        if !in_range {
            return Err(Error::InvalidHex(format!(
                "value does not fit in {} bits",
                field.bit_len()
            )));
        }
        Ok(FieldElement { field, limbs })
    }

    /// Internal constructor for limbs already known to be in range.
    pub(crate) fn from_reduced(field: FieldId, limbs: [u64; MAX_LIMBS]) -> FieldElement {
        debug_assert!(limbs[field.limbs()..].iter().all(|&w| w == 0));
        debug_assert_eq!(limbs[field.limbs() - 1] & !field.top_mask(), 0);
        FieldElement { field, limbs }
    }

    pub fn field(&self) -> FieldId {
        self.field
    }

    /// Occupied limbs, little-endian.
    pub fn limbs(&self) -> &[u64] {
        &self.limbs[..self.field.limbs()]
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&w| w == 0)
    }

    pub fn is_one(&self) -> bool {
        self.limbs[0] == 1 && self.limbs[1..].iter().all(|&w| w == 0)
    }

    /// Coefficient of t^i.
    pub fn bit(&self, i: usize) -> bool {
        if i >= 64 * MAX_LIMBS {
            return false;
        }
        self.limbs[i / 64] >> (i % 64) & 1 == 1
    }

    /// Degree of the polynomial, or None for the zero element.
    pub fn degree(&self) -> Option<usize> {
        Polynomial::from_element(self).degree()
    }

    /// Uniform random element: l independent coefficient bits.
    pub fn random<R: rand::RngCore + ?Sized>(field: FieldId, rng: &mut R) -> FieldElement {
        let mut limbs = [0u64; MAX_LIMBS];
        for w in limbs[..field.limbs()].iter_mut() {
            *w = rng.next_u64();
        }
        limbs[field.limbs() - 1] &= field.top_mask();
        FieldElement { field, limbs }
    }

    fn check_same_field(&self, other: &FieldElement) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch { left: self.field, right: other.field });
        }
        Ok(())
    }

    /// Field addition: coefficient-wise XOR. Also the subtraction.
    pub fn add(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check_same_field(other)?;
        let mut limbs = self.limbs;
        for (w, o) in limbs.iter_mut().zip(other.limbs.iter()) {
            *w ^= o;
        }
        Ok(FieldElement { field: self.field, limbs })
    }

    /// Squaring: bit i of the input lands on bit 2i, then one reduction.
    /// Linear over GF(2), and much cheaper than a general multiplication.
    pub fn square(&self) -> FieldElement {
        let mut limbs = [0u64; POLY_LIMBS];
        for (i, &w) in self.limbs().iter().enumerate() {
            limbs[2 * i] = spread_u32(w as u32);
            let hi = (w >> 32) as u32;
            // The top limb of a B283 element has no high half (27 bits used),
            // so this write never lands past the scratch capacity.
            if hi != 0 {
                limbs[2 * i + 1] = spread_u32(hi);
            }
        }
        Polynomial { limbs }.reduce_full(self.field)
    }

    /// Shift-and-XOR schoolbook product. Reference implementation: the
    /// segmented multiplier in [`crate::karatsuba`] must agree with it.
    pub fn mul_classical(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check_same_field(other)?;
        let mut acc = Polynomial::zero();
        for (i, &w) in self.limbs().iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                acc.xor_shifted(other.limbs(), 64 * i + j);
                bits &= bits - 1;
            }
        }
        Ok(acc.reduce_full(self.field))
    }

    /// Multiplicative inverse by the binary extended Euclidean algorithm.
    pub fn invert(&self) -> Result<FieldElement> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let f = self.field.modulus();
        let mut u = Polynomial::from_element(self);
        let mut v = f;
        let mut g1 = Polynomial::one();
        let mut g2 = Polynomial::zero();
        // Invariants: g1 * a = u (mod f), g2 * a = v (mod f), gcd(u, v) = 1.
        while !u.is_one() && !v.is_one() {
            while !u.bit(0) {
                u = u.shr1();
                if g1.bit(0) {
                    g1.xor_assign(&f);
                }
                g1 = g1.shr1();
            }
            while !v.bit(0) {
                v = v.shr1();
                if g2.bit(0) {
                    g2.xor_assign(&f);
                }
                g2 = g2.shr1();
            }
            if u.degree() >= v.degree() {
                u.xor_assign(&v);
                g1.xor_assign(&g2);
            } else {
                v.xor_assign(&u);
                g2.xor_assign(&g1);
            }
        }
        let g = if u.is_one() { g1 } else { g2 };
        Ok(g.reduce_full(self.field))
    }

    /// Canonical fixed-width big-endian hex, one digit per 4 bits of l.
    pub fn to_hex(&self) -> String {
        let n = self.field.hex_len();
        let mut s = String::with_capacity(n);
        for j in (0..n).rev() {
            let nib = (self.limbs[4 * j / 64] >> (4 * j % 64)) & 0xF;
            s.push(char::from_digit(nib as u32, 16).expect("nibble"));
        }
        s
    }

    /// Parses big-endian hex (optional 0x prefix, any length that fits).
    pub fn from_hex(field: FieldId, s: &str) -> Result<FieldElement> {
        let t = s.trim();
        let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
        if t.is_empty() {
            return Err(Error::InvalidHex("empty string".into()));
        }
        let mut limbs = [0u64; MAX_LIMBS];
        for (j, c) in t.bytes().rev().enumerate() {
            let nib = (c as char)
                .to_digit(16)
                .ok_or_else(|| Error::InvalidHex(format!("bad digit {:?}", c as char)))?
                as u64;
            if nib == 0 {
                continue;
            }
            if 4 * j >= 64 * MAX_LIMBS {
                return Err(Error::InvalidHex(format!(
                    "value does not fit in {} bits",
                    field.bit_len()
                )));
            }
            limbs[4 * j / 64] |= nib << (4 * j % 64);
        }
        FieldElement::from_limbs(field, limbs)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElement({}, {})", self.field, self.to_hex())
    }
}

/// Morton spread: bit i of a 32-bit word moves to bit 2i of a 64-bit word.
fn spread_u32(x: u32) -> u64 {
    let mut v = x as u64;
    v = (v | (v << 16)) & 0x0000_FFFF_0000_FFFF;
    v = (v | (v << 8)) & 0x00FF_00FF_00FF_00FF;
    v = (v | (v << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    v = (v | (v << 2)) & 0x3333_3333_3333_3333;
    v = (v | (v << 1)) & 0x5555_5555_5555_5555;
    v
}

/// An unreduced polynomial over GF(2) of degree < 64 * POLY_LIMBS.
///
/// Wide scratch type for products, fold accumulation and the Euclidean
/// inversion loop. Little-endian limbs like [`FieldElement`].
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Polynomial {
    pub(crate) limbs: [u64; POLY_LIMBS],
}

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial { limbs: [0; POLY_LIMBS] }
    }

    pub fn one() -> Polynomial {
        let mut p = Polynomial::zero();
        p.limbs[0] = 1;
        p
    }

    pub fn from_element(e: &FieldElement) -> Polynomial {
        let mut limbs = [0u64; POLY_LIMBS];
        limbs[..MAX_LIMBS].copy_from_slice(&e.limbs);
        Polynomial { limbs }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&w| w == 0)
    }

    pub fn is_one(&self) -> bool {
        self.limbs[0] == 1 && self.limbs[1..].iter().all(|&w| w == 0)
    }

    pub fn bit(&self, i: usize) -> bool {
        if i >= 64 * POLY_LIMBS {
            return false;
        }
        self.limbs[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize) {
        assert!(i < 64 * POLY_LIMBS, "bit index {i} out of range");
        self.limbs[i / 64] |= 1 << (i % 64);
    }

    /// Degree, or None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        for (i, &w) in self.limbs.iter().enumerate().rev() {
            if w != 0 {
                return Some(64 * i + 63 - w.leading_zeros() as usize);
            }
        }
        None
    }

    pub fn xor_assign(&mut self, other: &Polynomial) {
        for (w, o) in self.limbs.iter_mut().zip(other.limbs.iter()) {
            *w ^= o;
        }
    }

    /// XORs `src << shift` into self. Panics if the shifted value would
    /// overflow the fixed capacity; callers keep offsets in range.
    pub(crate) fn xor_shifted(&mut self, src: &[u64], shift: usize) {
        let word = shift / 64;
        let bits = shift % 64;
        for (j, &v) in src.iter().enumerate() {
            if v == 0 {
                continue;
            }
            self.limbs[word + j] ^= v << bits;
            if bits != 0 {
                let hi = v >> (64 - bits);
                if hi != 0 {
                    self.limbs[word + j + 1] ^= hi;
                }
            }
        }
    }

    /// Division by t; the caller ensures the constant coefficient is zero.
    fn shr1(mut self) -> Polynomial {
        for i in 0..POLY_LIMBS {
            self.limbs[i] >>= 1;
            if i + 1 < POLY_LIMBS {
                self.limbs[i] |= self.limbs[i + 1] << 63;
            }
        }
        self
    }

    /// Splits off the coefficients at positions >= l, returned shifted down
    /// by l; `self` keeps only the low part.
    fn split_high(&mut self, l: usize) -> Polynomial {
        let word = l / 64;
        let bits = l % 64;
        let mut high = Polynomial::zero();
        for i in word..POLY_LIMBS {
            let mut v = self.limbs[i] >> bits;
            if bits != 0 && i + 1 < POLY_LIMBS {
                v |= self.limbs[i + 1] << (64 - bits);
            }
            high.limbs[i - word] = v;
        }
        for w in self.limbs[word + 1..].iter_mut() {
            *w = 0;
        }
        if bits != 0 {
            self.limbs[word] &= (1u64 << bits) - 1;
        } else {
            self.limbs[word] = 0;
        }
        high
    }

    /// Reduces modulo the field polynomial. Rejects inputs above the
    /// degree bound 2l - 2 that a product of reduced elements can reach.
    pub fn reduce(self, field: FieldId) -> Result<FieldElement> {
        if let Some(d) = self.degree() {
            let max = 2 * field.bit_len() - 2;
            if d > max {
                return Err(Error::DegreeOverflow { degree: d, max });
            }
        }
        Ok(self.reduce_full(field))
    }

    /// Reduction without the degree precondition; folds high parts down
    /// (t^l = sum of t^tap) until nothing remains above bit l-1.
    pub(crate) fn reduce_full(mut self, field: FieldId) -> FieldElement {
        let l = field.bit_len();
        loop {
            let high = self.split_high(l);
            if high.is_zero() {
                break;
            }
            for &tap in field.reduction_taps() {
                self.xor_shifted(&high.limbs, tap);
            }
        }
        let mut limbs = [0u64; MAX_LIMBS];
        limbs.copy_from_slice(&self.limbs[..MAX_LIMBS]);
        FieldElement::from_reduced(field, limbs)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial(deg {:?})", self.degree())
    }
}
