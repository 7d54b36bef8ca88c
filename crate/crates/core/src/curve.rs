//! Elliptic-curve arithmetic on the NIST binary curves B-233 and B-283.
//!
//! Curves have the short Weierstrass form y^2 + xy = x^3 + a*x^2 + b over
//! GF(2^l). Affine addition and doubling are the reference group law used
//! by tests and by parameter validation. Scalar multiplication for the
//! engine proper is [`montgomery_kp`]: a Montgomery ladder in Lopez-Dahab
//! projective (X, Z) coordinates that performs exactly six field
//! multiplications and five squarings per scalar bit and records every one
//! of them in a [`LadderTranscript`], the raw material for trace synthesis.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::gf2m::{FieldElement, FieldId};

/// Field multiplications per ladder slot (one slot per processed bit).
pub const MULTS_PER_SLOT: usize = 6;
/// Squarings per ladder slot.
pub const SQUARINGS_PER_SLOT: usize = 5;

/// A point in affine coordinates, or the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffinePoint {
    Infinity,
    Point { x: FieldElement, y: FieldElement },
}

impl AffinePoint {
    pub fn is_infinity(&self) -> bool {
        matches!(self, AffinePoint::Infinity)
    }

    /// Coordinates of a finite point.
    pub fn xy(&self) -> Option<(&FieldElement, &FieldElement)> {
        match self {
            AffinePoint::Infinity => None,
            AffinePoint::Point { x, y } => Some((x, y)),
        }
    }
}

/// Domain parameters of one curve, validated at construction.
#[derive(Debug, Clone)]
pub struct CurveParams {
    pub field: FieldId,
    pub a: FieldElement,
    pub b: FieldElement,
    pub generator: AffinePoint,
    /// Prime order of the generator's subgroup.
    pub order: BigUint,
    pub cofactor: u32,
}

impl CurveParams {
    /// Built-in NIST parameters, loaded and validated once per process.
    pub fn builtin(field: FieldId) -> &'static CurveParams {
        static B233: OnceLock<CurveParams> = OnceLock::new();
        static B283: OnceLock<CurveParams> = OnceLock::new();
        let (cell, text) = match field {
            FieldId::B233 => (&B233, include_str!("../params/nist-b233.params")),
            FieldId::B283 => (&B283, include_str!("../params/nist-b283.params")),
        };
        cell.get_or_init(|| {
            CurveParams::parse(text).expect("built-in curve parameters are valid")
        })
    }

    /// Parses the key-value parameter format: one `key: value` per line,
    /// `#` comments, hex values. Runs the full consistency checks.
    pub fn parse(text: &str) -> Result<CurveParams> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or_else(|| {
                Error::InvalidParams(format!("line {}: expected 'key: value'", n + 1))
            })?;
            kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::InvalidParams(format!("missing key {k:?}")))
        };
        let field = FieldId::parse(get("field")?)?;
        let a = FieldElement::from_hex(field, get("a")?)?;
        let b = FieldElement::from_hex(field, get("b")?)?;
        let x = FieldElement::from_hex(field, get("gx")?)?;
        let y = FieldElement::from_hex(field, get("gy")?)?;
        let order = BigUint::parse_bytes(get("order")?.as_bytes(), 16)
            .ok_or_else(|| Error::InvalidParams("order is not valid hex".into()))?;
        let cofactor: u32 = get("cofactor")?
            .parse()
            .map_err(|_| Error::InvalidParams("cofactor is not a decimal integer".into()))?;
        let params = CurveParams {
            field,
            a,
            b,
            generator: AffinePoint::Point { x, y },
            order,
            cofactor,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if self.b.is_zero() {
            return Err(Error::InvalidParams("b = 0 gives a singular curve".into()));
        }
        if self.cofactor == 0 {
            return Err(Error::InvalidParams("cofactor must be positive".into()));
        }
        if self.order.bits() < 2 || !self.order.bit(0) {
            return Err(Error::InvalidParams(
                "order must be odd and greater than one".into(),
            ));
        }
        if !is_on_curve(&self.generator, self) {
            return Err(Error::InvalidParams("generator is not on the curve".into()));
        }
        if kp_double_and_add(&self.order, &self.generator, self)? != AffinePoint::Infinity {
            return Err(Error::InvalidParams(
                "order does not annihilate the generator".into(),
            ));
        }
        Ok(())
    }
}

/// Checks y^2 + xy = x^3 + a*x^2 + b. The point at infinity is on the curve.
pub fn is_on_curve(p: &AffinePoint, params: &CurveParams) -> bool {
    let (x, y) = match p.xy() {
        None => return true,
        Some(xy) => xy,
    };
    let check = || -> Result<bool> {
        let lhs = y.square().add(&x.mul_classical(y)?)?;
        let x2 = x.square();
        let rhs = x2
            .mul_classical(x)?
            .add(&params.a.mul_classical(&x2)?)?
            .add(&params.b)?;
        Ok(lhs == rhs)
    };
    check().unwrap_or(false)
}

/// The group negation: -(x, y) = (x, x + y).
pub fn negate(p: &AffinePoint) -> AffinePoint {
    match p {
        AffinePoint::Infinity => AffinePoint::Infinity,
        AffinePoint::Point { x, y } => AffinePoint::Point {
            x: *x,
            y: x.add(y).expect("same field"),
        },
    }
}

/// Affine group addition (reference implementation).
pub fn affine_add(p: &AffinePoint, q: &AffinePoint, params: &CurveParams) -> Result<AffinePoint> {
    let (x1, y1) = match p.xy() {
        None => return Ok(*q),
        Some(xy) => xy,
    };
    let (x2, y2) = match q.xy() {
        None => return Ok(*p),
        Some(xy) => xy,
    };
    if x1 == x2 {
        return if y1 == y2 {
            affine_double(p, params)
        } else {
            // q = -p: the y coordinates are (y, x + y) in some order.
            Ok(AffinePoint::Infinity)
        };
    }
    let lambda = y1.add(y2)?.mul_classical(&x1.add(x2)?.invert()?)?;
    let x3 = lambda
        .square()
        .add(&lambda)?
        .add(&x1.add(x2)?)?
        .add(&params.a)?;
    let y3 = lambda.mul_classical(&x1.add(&x3)?)?.add(&x3)?.add(y1)?;
    Ok(AffinePoint::Point { x: x3, y: y3 })
}

/// Affine point doubling (reference implementation).
pub fn affine_double(p: &AffinePoint, params: &CurveParams) -> Result<AffinePoint> {
    let (x, y) = match p.xy() {
        None => return Ok(AffinePoint::Infinity),
        Some(xy) => xy,
    };
    if x.is_zero() {
        // (0, sqrt(b)) is the unique point of order two.
        return Ok(AffinePoint::Infinity);
    }
    let lambda = x.add(&y.mul_classical(&x.invert()?)?)?;
    let x3 = lambda.square().add(&lambda)?.add(&params.a)?;
    let y3 = x.square().add(&lambda.add(&FieldElement::one(params.field))?.mul_classical(&x3)?)?;
    Ok(AffinePoint::Point { x: x3, y: y3 })
}

/// Left-to-right double-and-add. The transcript-free oracle that
/// [`montgomery_kp`] is checked against.
pub fn kp_double_and_add(k: &BigUint, p: &AffinePoint, params: &CurveParams) -> Result<AffinePoint> {
    let mut acc = AffinePoint::Infinity;
    let bits = k.bits();
    for i in (0..bits).rev() {
        acc = affine_double(&acc, params)?;
        if k.bit(i) {
            acc = affine_add(&acc, p, params)?;
        }
    }
    Ok(acc)
}

/// One recorded field multiplication inside a ladder slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultRecord {
    /// Which of the six multiplier activations this is, 1-based.
    pub position: u8,
    pub left: FieldElement,
    pub right: FieldElement,
    pub result: FieldElement,
    /// True when the left operand is the curve constant b (position 3).
    pub involves_b: bool,
    /// True when the left operand is the base-point x coordinate (position 5).
    pub involves_base_x: bool,
}

/// One recorded squaring inside a ladder slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquareRecord {
    /// Clock cycle within the 54-cycle slot at which the output appears.
    pub slot_cycle: usize,
    pub input: FieldElement,
    pub output: FieldElement,
}

/// Ladder registers at the end of a slot, plus the scratch register T.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderState {
    pub x1: FieldElement,
    pub z1: FieldElement,
    pub x2: FieldElement,
    pub z2: FieldElement,
    pub t: FieldElement,
}

/// Everything that happened while processing one scalar bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderSlot {
    /// Slot number in processing order, starting at 0.
    pub index: usize,
    /// The scalar bit this slot processed.
    pub bit: bool,
    /// The six multiplications, in schedule order (positions 1..=6).
    pub mults: Vec<MultRecord>,
    /// The five squaring-unit activations, by slot cycle.
    pub squarings: Vec<SquareRecord>,
    pub state_after: LadderState,
}

/// Complete record of a ladder run: the setup squarings that load the
/// squaring unit before the first slot, then one slot per processed bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderTranscript {
    pub field: FieldId,
    /// Bit length of the scalar that was processed.
    pub scalar_bits: u64,
    /// Outputs of the squaring unit during setup: x^2 then x^4.
    pub setup_square_outputs: Vec<FieldElement>,
    pub slots: Vec<LadderSlot>,
}

impl LadderTranscript {
    fn empty(field: FieldId, scalar_bits: u64) -> LadderTranscript {
        LadderTranscript { field, scalar_bits, setup_square_outputs: Vec::new(), slots: Vec::new() }
    }
}

struct SlotOutput {
    ax: FieldElement,
    az: FieldElement,
    bx: FieldElement,
    bz: FieldElement,
    mults: Vec<MultRecord>,
    squarings: Vec<SquareRecord>,
}

/// One ladder slot. The a-side registers receive the differential addition,
/// the b-side registers are doubled; the caller picks which of (X1,Z1) and
/// (X2,Z2) plays which role, so both scalar-bit branches execute the same
/// six-multiplication, five-squaring schedule.
///
/// Multiplication positions occupy nine clock cycles each (cycles
/// 9*(p-1)..9*p of the 54-cycle slot). The squaring unit runs alongside:
/// b.z^2 and b.z^4 are ready at cycles 0 and 1 (b.z^4 feeds position 3),
/// b.x^2 and b.x^4 at cycles 2 and 3, and (m1+m2)^2 at cycle 18, after
/// position 2 has produced m2 and in time to feed position 5.
fn ladder_slot(
    params: &CurveParams,
    base_x: &FieldElement,
    ax: FieldElement,
    az: FieldElement,
    bx: FieldElement,
    bz: FieldElement,
) -> Result<SlotOutput> {
    let bz2 = bz.square();
    let bz4 = bz2.square();
    let bx2 = bx.square();
    let bx4 = bx2.square();
    let m1 = ax.mul_classical(&bz)?;
    let m2 = bx.mul_classical(&az)?;
    let m3 = params.b.mul_classical(&bz4)?;
    let m4 = m1.mul_classical(&m2)?;
    let az_new = m1.add(&m2)?.square();
    let m5 = base_x.mul_classical(&az_new)?;
    let m6 = bx2.mul_classical(&bz2)?;
    let ax_new = m5.add(&m4)?;
    let bx_new = bx4.add(&m3)?;

    let rec = |position: u8, left: FieldElement, right: FieldElement, result: FieldElement| {
        MultRecord {
            position,
            left,
            right,
            result,
            involves_b: position == 3,
            involves_base_x: position == 5,
        }
    };
    let mults = vec![
        rec(1, ax, bz, m1),
        rec(2, bx, az, m2),
        rec(3, params.b, bz4, m3),
        rec(4, m1, m2, m4),
        rec(5, *base_x, az_new, m5),
        rec(6, bx2, bz2, m6),
    ];
    let squarings = vec![
        SquareRecord { slot_cycle: 0, input: bz, output: bz2 },
        SquareRecord { slot_cycle: 1, input: bz2, output: bz4 },
        SquareRecord { slot_cycle: 2, input: bx, output: bx2 },
        SquareRecord { slot_cycle: 3, input: bx2, output: bx4 },
        SquareRecord { slot_cycle: 18, input: m1.add(&m2)?, output: az_new },
    ];
    Ok(SlotOutput { ax: ax_new, az: az_new, bx: bx_new, bz: m6, mults, squarings })
}

/// Montgomery ladder scalar multiplication with full transcript.
///
/// Processes the scalar from the bit below the most significant one down to
/// bit zero, one slot per bit; a scalar of bit length n yields n-1 slots.
/// Works for any non-negative k, including k larger than the point order.
///
/// Special cases: k = 0 or P at infinity return infinity with an empty
/// transcript. A base point with x = 0 has order two, so the result is P or
/// infinity by scalar parity, again with an empty transcript (the ladder's
/// difference-point invariant needs x != 0). A final state with Z1 = 0
/// means kP is infinity. Z2 = 0 (k = -1 mod ord(P)) leaves the y-recovery
/// denominator zero and returns [`Error::DegenerateLadder`].
pub fn montgomery_kp(
    k: &BigUint,
    p: &AffinePoint,
    params: &CurveParams,
) -> Result<(AffinePoint, LadderTranscript)> {
    let field = params.field;
    if !is_on_curve(p, params) {
        return Err(Error::PointNotOnCurve);
    }
    let (px, py) = match p.xy() {
        None => return Ok((AffinePoint::Infinity, LadderTranscript::empty(field, k.bits()))),
        Some((x, y)) => (*x, *y),
    };
    if k.is_zero() {
        return Ok((AffinePoint::Infinity, LadderTranscript::empty(field, 0)));
    }
    if px.is_zero() {
        let result = if k.bit(0) { *p } else { AffinePoint::Infinity };
        return Ok((result, LadderTranscript::empty(field, k.bits())));
    }

    let x_sq = px.square();
    let x_4th = x_sq.square();
    let mut x1 = px;
    let mut z1 = FieldElement::one(field);
    let mut x2 = x_4th.add(&params.b)?;
    let mut z2 = x_sq;

    let bits = k.bits();
    let mut transcript = LadderTranscript {
        field,
        scalar_bits: bits,
        setup_square_outputs: vec![x_sq, x_4th],
        slots: Vec::with_capacity((bits - 1) as usize),
    };

    for (index, i) in (0..bits - 1).rev().enumerate() {
        let bit = k.bit(i);
        // T ends the slot holding the doubled side's old X register.
        let t = if bit { x2 } else { x1 };
        let out = if bit {
            ladder_slot(params, &px, x1, z1, x2, z2)?
        } else {
            ladder_slot(params, &px, x2, z2, x1, z1)?
        };
        if bit {
            x1 = out.ax;
            z1 = out.az;
            x2 = out.bx;
            z2 = out.bz;
        } else {
            x2 = out.ax;
            z2 = out.az;
            x1 = out.bx;
            z1 = out.bz;
        }
        transcript.slots.push(LadderSlot {
            index,
            bit,
            mults: out.mults,
            squarings: out.squarings,
            state_after: LadderState { x1, z1, x2, z2, t },
        });
    }

    if z1.is_zero() {
        return Ok((AffinePoint::Infinity, transcript));
    }
    let x_l = x1.mul_classical(&z1.invert()?)?;
    if z2.is_zero() {
        return Err(Error::DegenerateLadder);
    }
    // y recovery from the final (X1, Z1), (X2, Z2) pair.
    let t1 = x1.add(&px.mul_classical(&z1)?)?;
    let t2 = x2.add(&px.mul_classical(&z2)?)?;
    let z1z2 = z1.mul_classical(&z2)?;
    let num = t1
        .mul_classical(&t2)?
        .add(&x_sq.add(&py)?.mul_classical(&z1z2)?)?;
    let denom_inv = px.mul_classical(&z1z2)?.invert()?;
    let y_l = px
        .add(&x_l)?
        .mul_classical(&num.mul_classical(&denom_inv)?)?
        .add(&py)?;
    Ok((AffinePoint::Point { x: x_l, y: y_l }, transcript))
}

/// u1*G + u2*Q, computed as two ladder runs and one affine addition.
pub fn multi_scalar(
    u1: &BigUint,
    u2: &BigUint,
    q: &AffinePoint,
    params: &CurveParams,
) -> Result<AffinePoint> {
    let (t1, _) = montgomery_kp(u1, &params.generator, params)?;
    let (t2, _) = montgomery_kp(u2, q, params)?;
    affine_add(&t1, &t2, params)
}
