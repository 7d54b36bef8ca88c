//! Cycle-accurate model of a 4-segment Karatsuba multiplier.
//!
//! Operands are split into four 71-bit segments. One clock cycle computes a
//! single 71x71-bit carry-less product of segment XOR combinations, folds
//! the 141-bit result into the accumulator at segment-aligned offsets and
//! reduces. Nine cycles complete a field multiplication; the schedule of
//! which combinations are multiplied when, and where each product is folded,
//! is a [`PartialProductPlan`]. Plans are validated algebraically at
//! construction, so every accepted plan computes the exact field product.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gf2m::{FieldElement, FieldId, Polynomial};

/// Width of one operand segment in bits.
pub const SEGMENT_BITS: usize = 71;
/// Segments per operand.
pub const NUM_SEGMENTS: usize = 4;
/// Clock cycles (= partial products) per multiplication.
pub const MULT_CYCLES: usize = 9;

/// An operand split into four 71-bit segments, low segment first.
///
/// 4 x 71 = 284 bits covers both supported fields; the segments of a
/// reduced element always reassemble to that element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentedOperand {
    field: FieldId,
    segments: [u128; NUM_SEGMENTS],
}

impl SegmentedOperand {
    pub fn field(&self) -> FieldId {
        self.field
    }

    pub fn segments(&self) -> &[u128; NUM_SEGMENTS] {
        &self.segments
    }

    /// Concatenates the segments back into a field element.
    pub fn reassemble(&self) -> FieldElement {
        let mut p = Polynomial::zero();
        for (i, &seg) in self.segments.iter().enumerate() {
            let words = [seg as u64, (seg >> 64) as u64];
            p.xor_shifted(&words, SEGMENT_BITS * i);
        }
        // Segments of a reduced element never reach bit l, so this cannot
        // actually wrap anything.
        p.reduce_full(self.field)
    }

    /// XOR of the segments selected by `set`.
    fn combine(&self, set: SegmentSet) -> u128 {
        let mut acc = 0u128;
        for i in set.iter() {
            acc ^= self.segments[i];
        }
        acc
    }
}

/// Splits a field element into 71-bit segments.
pub fn segment(a: &FieldElement) -> SegmentedOperand {
    let mut segments = [0u128; NUM_SEGMENTS];
    for (i, seg) in segments.iter_mut().enumerate() {
        let mut v = 0u128;
        for b in 0..SEGMENT_BITS {
            if a.bit(SEGMENT_BITS * i + b) {
                v |= 1u128 << b;
            }
        }
        *seg = v;
    }
    SegmentedOperand { field: a.field(), segments }
}

/// A subset of the four operand segments, e.g. {0,2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSet(u8);

impl SegmentSet {
    /// Builds a set from a bitmask over segments 0..4.
    pub fn from_mask(mask: u8) -> Result<SegmentSet> {
        if mask == 0 || mask >= 1 << NUM_SEGMENTS {
            return Err(Error::InvalidPlan(format!(
                "segment mask {mask:#06b} must select between one and {NUM_SEGMENTS} segments"
            )));
        }
        Ok(SegmentSet(mask))
    }

    pub fn from_indices(indices: &[usize]) -> Result<SegmentSet> {
        let mut mask = 0u8;
        for &i in indices {
            if i >= NUM_SEGMENTS {
                return Err(Error::InvalidPlan(format!("segment index {i} out of range")));
            }
            mask |= 1 << i;
        }
        SegmentSet::from_mask(mask)
    }

    pub fn contains(&self, i: usize) -> bool {
        i < NUM_SEGMENTS && self.0 >> i & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_SEGMENTS).filter(move |&i| self.contains(i))
    }
}

impl fmt::Display for SegmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromStr for SegmentSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<SegmentSet> {
        let body = s
            .trim()
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| Error::InvalidPlan(format!("segment set {s:?} is not brace-delimited")))?;
        let mut indices = Vec::new();
        for part in body.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let i: usize = part
                .parse()
                .map_err(|_| Error::InvalidPlan(format!("bad segment index {part:?}")))?;
            indices.push(i);
        }
        SegmentSet::from_indices(&indices)
    }
}

/// One clock cycle of the schedule: multiply the XOR of the `left` segments
/// of operand A by the XOR of the `right` segments of operand B, then XOR
/// the 141-bit product into the accumulator at each offset in `folds`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub left: SegmentSet,
    pub right: SegmentSet,
    /// Bit offsets, each a multiple of [`SEGMENT_BITS`].
    pub folds: Vec<usize>,
}

/// A validated 9-cycle multiplication schedule.
///
/// Construction checks the plan shape and then proves, coefficient by
/// coefficient, that the folded partial products sum to the full product:
/// for every segment pair (i, j) and every segment position k, the parity
/// of cycles that multiply i by j and fold at position k must be 1 exactly
/// when k = i + j. Any plan that passes computes the correct product for
/// all operands, so permuting cycle order or re-deriving fold positions
/// cannot silently change results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialProductPlan {
    steps: Vec<PlanStep>,
}

impl PartialProductPlan {
    pub fn new(steps: Vec<PlanStep>) -> Result<PartialProductPlan> {
        if steps.len() != MULT_CYCLES {
            return Err(Error::InvalidPlan(format!(
                "expected {MULT_CYCLES} cycles, got {}",
                steps.len()
            )));
        }
        let max_fold = SEGMENT_BITS * (2 * NUM_SEGMENTS - 2);
        for (c, step) in steps.iter().enumerate() {
            let mut seen = [false; 2 * NUM_SEGMENTS - 1];
            for &fold in &step.folds {
                if fold % SEGMENT_BITS != 0 {
                    return Err(Error::InvalidPlan(format!(
                        "cycle {c}: fold offset {fold} is not segment-aligned"
                    )));
                }
                if fold > max_fold {
                    return Err(Error::InvalidPlan(format!(
                        "cycle {c}: fold offset {fold} exceeds product width (max {max_fold})"
                    )));
                }
                let k = fold / SEGMENT_BITS;
                if seen[k] {
                    return Err(Error::InvalidPlan(format!(
                        "cycle {c}: duplicate fold offset {fold}"
                    )));
                }
                seen[k] = true;
            }
        }
        let plan = PartialProductPlan { steps };
        plan.check_bilinear_identity()?;
        Ok(plan)
    }

    /// The symbolic correctness proof described on the type.
    fn check_bilinear_identity(&self) -> Result<()> {
        for i in 0..NUM_SEGMENTS {
            for j in 0..NUM_SEGMENTS {
                for k in 0..2 * NUM_SEGMENTS - 1 {
                    let mut parity = false;
                    for step in &self.steps {
                        if step.left.contains(i)
                            && step.right.contains(j)
                            && step.folds.contains(&(SEGMENT_BITS * k))
                        {
                            parity = !parity;
                        }
                    }
                    if parity != (i + j == k) {
                        return Err(Error::InvalidPlan(format!(
                            "coefficient A{i}*B{j} at segment position {k} has wrong parity"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }
}

impl Default for PartialProductPlan {
    fn default() -> Self {
        default_plan()
    }
}

/// The canonical two-level schedule: Karatsuba over 142-bit halves, each
/// half (and the half-sum) multiplied by one level of 71-bit Karatsuba.
/// Low-half products come first, then high, then the cross terms.
pub fn default_plan() -> PartialProductPlan {
    const S: usize = SEGMENT_BITS;
    let step = |mask: u8, folds: &[usize]| -> PlanStep {
        let set = SegmentSet::from_mask(mask).expect("static mask");
        PlanStep { left: set, right: set, folds: folds.iter().map(|&k| S * k).collect() }
    };
    PartialProductPlan::new(vec![
        step(0b0001, &[0, 1, 2, 3]),    // A0*B0
        step(0b0010, &[1, 2, 3, 4]),    // A1*B1
        step(0b0011, &[1, 3]),          // (A0+A1)*(B0+B1)
        step(0b0100, &[2, 3, 4, 5]),    // A2*B2
        step(0b1000, &[3, 4, 5, 6]),    // A3*B3
        step(0b1100, &[3, 5]),          // (A2+A3)*(B2+B3)
        step(0b0101, &[2, 3]),          // (A0+A2)*(B0+B2)
        step(0b1010, &[3, 4]),          // (A1+A3)*(B1+B3)
        step(0b1111, &[3]),             // full cross sum
    ])
    .expect("canonical plan is algebraically valid")
}

impl fmt::Display for PartialProductPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# segmented multiplier schedule: one line per clock cycle")?;
        for (c, step) in self.steps.iter().enumerate() {
            write!(f, "cycle {c}: left={} right={} fold=[", step.left, step.right)?;
            for (n, fold) in step.folds.iter().enumerate() {
                if n > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{fold}")?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

impl FromStr for PartialProductPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<PartialProductPlan> {
        let mut steps = Vec::new();
        for line in s.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rest = line
                .strip_prefix("cycle")
                .ok_or_else(|| Error::InvalidPlan(format!("unrecognized line {line:?}")))?;
            let (index, rest) = rest
                .split_once(':')
                .ok_or_else(|| Error::InvalidPlan(format!("missing ':' in {line:?}")))?;
            let index: usize = index
                .trim()
                .parse()
                .map_err(|_| Error::InvalidPlan(format!("bad cycle index in {line:?}")))?;
            if index != steps.len() {
                return Err(Error::InvalidPlan(format!(
                    "cycle {index} out of order (expected {})",
                    steps.len()
                )));
            }
            let mut left = None;
            let mut right = None;
            let mut folds = None;
            for field in rest.split_whitespace() {
                if let Some(v) = field.strip_prefix("left=") {
                    left = Some(v.parse::<SegmentSet>()?);
                } else if let Some(v) = field.strip_prefix("right=") {
                    right = Some(v.parse::<SegmentSet>()?);
                } else if let Some(v) = field.strip_prefix("fold=") {
                    let body = v
                        .strip_prefix('[')
                        .and_then(|t| t.strip_suffix(']'))
                        .ok_or_else(|| {
                            Error::InvalidPlan(format!("fold list {v:?} is not bracketed"))
                        })?;
                    let mut list = Vec::new();
                    for part in body.split(',') {
                        let part = part.trim();
                        if part.is_empty() {
                            continue;
                        }
                        list.push(part.parse::<usize>().map_err(|_| {
                            Error::InvalidPlan(format!("bad fold offset {part:?}"))
                        })?);
                    }
                    folds = Some(list);
                } else {
                    return Err(Error::InvalidPlan(format!("unrecognized field {field:?}")));
                }
            }
            match (left, right, folds) {
                (Some(left), Some(right), Some(folds)) => {
                    steps.push(PlanStep { left, right, folds })
                }
                _ => {
                    return Err(Error::InvalidPlan(format!(
                        "cycle {index} needs left=, right= and fold="
                    )))
                }
            }
        }
        PartialProductPlan::new(steps)
    }
}

/// A raw 71x71 carry-less product: at most 141 bits in three limbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialProduct {
    limbs: [u64; 3],
}

impl PartialProduct {
    pub fn limbs(&self) -> &[u64; 3] {
        &self.limbs
    }

    pub fn is_zero(&self) -> bool {
        self.limbs == [0; 3]
    }
}

/// Carry-less product of two 71-bit values. Panics if an operand has bits
/// at position 71 or above; segment extraction guarantees the bound.
pub fn partial_mul_71(x: u128, y: u128) -> PartialProduct {
    assert!(x >> SEGMENT_BITS == 0, "left operand wider than {SEGMENT_BITS} bits");
    assert!(y >> SEGMENT_BITS == 0, "right operand wider than {SEGMENT_BITS} bits");
    let yw = [y as u64, (y >> 64) as u64];
    let mut limbs = [0u64; 3];
    let mut bits = x;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        let word = i / 64;
        let sh = i % 64;
        for (j, &v) in yw.iter().enumerate() {
            if v == 0 {
                continue;
            }
            limbs[word + j] ^= v << sh;
            if sh != 0 {
                let hi = v >> (64 - sh);
                if hi != 0 {
                    limbs[word + j + 1] ^= hi;
                }
            }
        }
        bits &= bits - 1;
    }
    PartialProduct { limbs }
}

/// Everything the datapath holds at the end of one multiplier clock cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultCycleState {
    pub cycle_index: usize,
    /// XOR combination fed to the left multiplier port.
    pub left: u128,
    /// XOR combination fed to the right multiplier port.
    pub right: u128,
    /// Raw partial product of this cycle.
    pub partial: PartialProduct,
    /// Accumulator content after folding and reducing this cycle.
    pub accumulator: FieldElement,
}

/// Runs the segmented multiplier, returning the product and the complete
/// per-cycle state sequence. The accumulator starts at zero; each cycle
/// folds its partial product at the plan's offsets and reduces, so
/// `states[8].accumulator` equals [`FieldElement::mul_classical`].
pub fn mul_karatsuba(
    a: &FieldElement,
    b: &FieldElement,
    plan: &PartialProductPlan,
) -> Result<(FieldElement, Vec<MultCycleState>)> {
    if a.field() != b.field() {
        return Err(Error::FieldMismatch { left: a.field(), right: b.field() });
    }
    let sa = segment(a);
    let sb = segment(b);
    let mut acc = FieldElement::zero(a.field());
    let mut states = Vec::with_capacity(MULT_CYCLES);
    for (cycle_index, step) in plan.steps().iter().enumerate() {
        let left = sa.combine(step.left);
        let right = sb.combine(step.right);
        let partial = partial_mul_71(left, right);
        let mut wide = Polynomial::from_element(&acc);
        for &fold in &step.folds {
            wide.xor_shifted(&partial.limbs, fold);
        }
        // Plan validation bounds fold offsets, so the fold never overflows
        // the scratch polynomial; reduction runs unconditionally each cycle.
        acc = wide.reduce_full(a.field());
        states.push(MultCycleState { cycle_index, left, right, partial, accumulator: acc });
    }
    Ok((acc, states))
}
