//! ECDSA over the binary NIST curves, plus the nonce-compromise key
//! recovery that motivates the side-channel half of this crate.
//!
//! All integer arithmetic here is modulo the group order; field arithmetic
//! happens in [`crate::curve`]. Digests enter as integers already reduced
//! mod the order, so any external hash can feed the scheme.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::RngCore;

use crate::curve::{self, AffinePoint, CurveParams};
use crate::error::{Error, Result};
use crate::gf2m::{FieldElement, FieldId};

/// A residue modulo a curve's group order, tagged with the curve's field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scalar {
    value: BigUint,
    field: FieldId,
}

impl Scalar {
    /// Reduces an arbitrary integer modulo the order.
    pub fn reduced(params: &CurveParams, value: BigUint) -> Scalar {
        Scalar { value: value % &params.order, field: params.field }
    }

    /// Accepts only canonical residues, rejecting values >= order.
    pub fn checked(params: &CurveParams, value: BigUint) -> Result<Scalar> {
        if value >= params.order {
            return Err(Error::ScalarOutOfRange(format!(
                "{value:x} is not below the group order"
            )));
        }
        Ok(Scalar { value, field: params.field })
    }

    pub fn zero(params: &CurveParams) -> Scalar {
        Scalar { value: BigUint::zero(), field: params.field }
    }

    /// Parses hex and reduces mod the order (digest entry point).
    pub fn from_hex_reduced(params: &CurveParams, s: &str) -> Result<Scalar> {
        Ok(Scalar::reduced(params, parse_hex_int(s)?))
    }

    /// Parses hex, rejecting non-canonical values (signature entry point).
    pub fn from_hex_checked(params: &CurveParams, s: &str) -> Result<Scalar> {
        Scalar::checked(params, parse_hex_int(s)?)
    }

    /// Interprets a field element's bit vector as an integer, reduced
    /// mod the order. This is how an x coordinate becomes r.
    pub fn from_x_coordinate(params: &CurveParams, x: &FieldElement) -> Scalar {
        let mut bytes = Vec::with_capacity(8 * x.limbs().len());
        for &w in x.limbs() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        Scalar::reduced(params, BigUint::from_bytes_le(&bytes))
    }

    /// Uniform draw from [1, order - 1] by rejection sampling.
    pub fn random_nonzero<R: RngCore + ?Sized>(params: &CurveParams, rng: &mut R) -> Scalar {
        let bits = params.order.bits();
        let nbytes = ((bits + 7) / 8) as usize;
        let top_mask = 0xffu8 >> ((8 - bits % 8) % 8);
        loop {
            let mut buf = vec![0u8; nbytes];
            rng.fill_bytes(&mut buf);
            buf[0] &= top_mask;
            let v = BigUint::from_bytes_be(&buf);
            if !v.is_zero() && v < params.order {
                return Scalar { value: v, field: params.field };
            }
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn field(&self) -> FieldId {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    /// Fixed-width big-endian hex, padded to the order's byte length.
    pub fn to_hex(&self, params: &CurveParams) -> String {
        let nbytes = ((params.order.bits() + 7) / 8) as usize;
        let mut s = self.value.to_str_radix(16);
        while s.len() < 2 * nbytes {
            s.insert(0, '0');
        }
        s
    }

    fn check_tag(&self, other: &Scalar) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch { left: self.field, right: other.field });
        }
        Ok(())
    }

    pub fn add(&self, other: &Scalar, params: &CurveParams) -> Result<Scalar> {
        self.check_tag(other)?;
        Ok(Scalar::reduced(params, &self.value + &other.value))
    }

    pub fn sub(&self, other: &Scalar, params: &CurveParams) -> Result<Scalar> {
        self.check_tag(other)?;
        let v = (&params.order + &self.value - (&other.value % &params.order)) % &params.order;
        Ok(Scalar { value: v, field: self.field })
    }

    pub fn mul(&self, other: &Scalar, params: &CurveParams) -> Result<Scalar> {
        self.check_tag(other)?;
        Ok(Scalar::reduced(params, &self.value * &other.value))
    }

    /// Inverse mod the (prime) order.
    pub fn invert(&self, params: &CurveParams) -> Result<Scalar> {
        let inv = self.value.modinv(&params.order).ok_or(Error::DivisionByZero)?;
        Ok(Scalar { value: inv, field: self.field })
    }
}

fn parse_hex_int(s: &str) -> Result<BigUint> {
    let t = s.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    if t.is_empty() {
        return Err(Error::InvalidHex("empty string".into()));
    }
    BigUint::parse_bytes(t.as_bytes(), 16)
        .ok_or_else(|| Error::InvalidHex(format!("bad integer {t:?}")))
}

/// A private scalar and its public point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub private: Scalar,
    pub public: AffinePoint,
}

/// A signature with both components in [1, order - 1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub r: Scalar,
    pub s: Scalar,
}

impl Signature {
    /// `r:s` in fixed-width hex.
    pub fn encode(&self, params: &CurveParams) -> String {
        format!("{}:{}", self.r.to_hex(params), self.s.to_hex(params))
    }

    /// Strict decode: exactly two hex fields, both in [1, order - 1].
    pub fn decode(params: &CurveParams, text: &str) -> Result<Signature> {
        let (r, s) = text
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidHex("expected r:s".into()))?;
        let r = Scalar::from_hex_checked(params, r)?;
        let s = Scalar::from_hex_checked(params, s)?;
        if r.is_zero() || s.is_zero() {
            return Err(Error::ScalarOutOfRange("signature component is zero".into()));
        }
        Ok(Signature { r, s })
    }
}

/// Generates a key pair; the public point comes from the ladder.
pub fn keygen<R: RngCore + ?Sized>(params: &CurveParams, rng: &mut R) -> Result<KeyPair> {
    loop {
        let private = Scalar::random_nonzero(params, rng);
        match curve::montgomery_kp(&private.value, &params.generator, params) {
            Ok((public, _)) => return Ok(KeyPair { private, public }),
            // d = order - 1 cannot be recovered to affine; draw again.
            Err(Error::DegenerateLadder) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Signs a reduced digest. Returns the signature and the ephemeral nonce k;
/// the nonce is deliberately exposed because this engine exists to study
/// what its leakage costs, and [`recover_private_key`] needs it.
pub fn sign<R: RngCore + ?Sized>(
    params: &CurveParams,
    private: &Scalar,
    digest: &Scalar,
    rng: &mut R,
) -> Result<(Signature, Scalar)> {
    loop {
        let k = Scalar::random_nonzero(params, rng);
        let t = match curve::montgomery_kp(&k.value, &params.generator, params) {
            Ok((t, _)) => t,
            Err(Error::DegenerateLadder) => continue,
            Err(e) => return Err(e),
        };
        let (x, _) = match t.xy() {
            Some(xy) => xy,
            None => continue,
        };
        let r = Scalar::from_x_coordinate(params, x);
        if r.is_zero() {
            continue;
        }
        let s = digest
            .add(&r.mul(private, params)?, params)?
            .mul(&k.invert(params)?, params)?;
        if s.is_zero() {
            continue;
        }
        return Ok((Signature { r, s }, k));
    }
}

/// Verifies a signature against a reduced digest and a public point.
///
/// Out-of-range or zero components make the signature invalid, never a
/// panic or an error; a ladder degeneracy during u1*G + u2*Q also just
/// fails verification.
pub fn verify(
    params: &CurveParams,
    public: &AffinePoint,
    digest: &Scalar,
    sig: &Signature,
) -> Result<bool> {
    if sig.r.is_zero() || sig.s.is_zero() {
        return Ok(false);
    }
    if sig.r.value >= params.order || sig.s.value >= params.order {
        return Ok(false);
    }
    let w = sig.s.invert(params)?;
    let u1 = digest.mul(&w, params)?;
    let u2 = sig.r.mul(&w, params)?;
    let t = match curve::multi_scalar(&u1.value, &u2.value, public, params) {
        Ok(t) => t,
        Err(Error::DegenerateLadder) => return Ok(false),
        Err(e) => return Err(e),
    };
    match t.xy() {
        None => Ok(false),
        Some((x, _)) => Ok(Scalar::from_x_coordinate(params, x) == sig.r),
    }
}

/// Recovers the private key from one signature and its ephemeral nonce:
/// d = (s*k - e) / r. One leaked nonce costs the whole key.
pub fn recover_private_key(
    params: &CurveParams,
    sig: &Signature,
    digest: &Scalar,
    nonce: &Scalar,
) -> Result<Scalar> {
    if sig.r.is_zero() {
        return Err(Error::DivisionByZero);
    }
    sig.s
        .mul(nonce, params)?
        .sub(digest, params)?
        .mul(&sig.r.invert(params)?, params)
}
