//! Synthetic per-sample power traces for the segmented multiplier and for
//! full ladder runs.
//!
//! The leakage function is a declared linear Hamming model, not a claim
//! about any physical device: cycle c of a multiplication leaks
//! alpha * HD(acc_{c-1}, acc_c) + beta * HW(partial_c), the parallel
//! squaring unit adds gamma * HD(out_prev, out) in the cycles where the
//! ladder schedule places a squaring, and each cycle's level is spread over
//! `samples_per_cycle` samples by a fixed shape template plus optional
//! Gaussian noise. Every attack conclusion downstream is therefore a
//! statement "under this model".

use std::collections::BTreeMap;

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curve::{self, AffinePoint, CurveParams, LadderTranscript};
use crate::error::{Error, Result};
use crate::gf2m::{FieldElement, FieldId};
use crate::karatsuba::{mul_karatsuba, PartialProductPlan, MULT_CYCLES};

/// Samples per clock cycle used throughout unless overridden.
pub const DEFAULT_SAMPLES_PER_CYCLE: u32 = 625;
/// Clock cycles in one ladder slot: six multiplications of nine cycles.
pub const SLOT_CYCLES: usize = curve::MULTS_PER_SLOT * MULT_CYCLES;

/// The linear HD/HW leakage model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageModel {
    /// Weight of the accumulator-register Hamming distance per cycle.
    pub alpha: f64,
    /// Weight of the partial-product Hamming weight per cycle.
    pub beta: f64,
    /// Weight of the squaring-unit output-register Hamming distance.
    pub gamma: f64,
    /// Gaussian noise standard deviation; zero disables noise entirely.
    pub sigma: f64,
    pub samples_per_cycle: u32,
    /// Per-sample template distributing one cycle's level; length equals
    /// `samples_per_cycle`, entries nonnegative.
    pub shape: Vec<f64>,
}

impl LeakageModel {
    /// Model with the standard raised-cosine shape.
    pub fn new(alpha: f64, beta: f64, gamma: f64, sigma: f64, samples_per_cycle: u32) -> Result<LeakageModel> {
        let model = LeakageModel {
            alpha,
            beta,
            gamma,
            sigma,
            samples_per_cycle,
            shape: raised_cosine(samples_per_cycle),
        };
        model.validate()?;
        Ok(model)
    }

    /// Model with a caller-supplied shape template.
    pub fn with_shape(
        alpha: f64,
        beta: f64,
        gamma: f64,
        sigma: f64,
        shape: Vec<f64>,
    ) -> Result<LeakageModel> {
        let model = LeakageModel {
            alpha,
            beta,
            gamma,
            sigma,
            samples_per_cycle: shape.len() as u32,
            shape,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_cycle == 0 {
            return Err(Error::InvalidModel("samples_per_cycle must be positive".into()));
        }
        if self.shape.len() != self.samples_per_cycle as usize {
            return Err(Error::InvalidModel(format!(
                "shape has {} entries, expected {}",
                self.shape.len(),
                self.samples_per_cycle
            )));
        }
        for (i, &w) in self.shape.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidModel(format!("shape[{i}] = {w} is not a nonnegative finite value")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("{name} = {v} is not finite")));
            }
        }
        if self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0 {
            return Err(Error::InvalidModel(
                "at least one of alpha, beta, gamma must be nonzero".into(),
            ));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::InvalidModel(format!("sigma = {} must be nonnegative", self.sigma)));
        }
        Ok(())
    }
}

impl Default for LeakageModel {
    /// alpha 1.0, beta 0.5, gamma 1.0, no noise, 625 samples per cycle.
    fn default() -> Self {
        LeakageModel::new(1.0, 0.5, 1.0, 0.0, DEFAULT_SAMPLES_PER_CYCLE)
            .expect("default model is valid")
    }
}

/// Single-peak raised-cosine template sampled at bin centers, so it is
/// strictly positive and needs no special case at n = 1.
pub fn raised_cosine(n: u32) -> Vec<f64> {
    let n_f = n as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * (i as f64 + 0.5) / n_f).cos()))
        .collect()
}

/// Number of set bits in a word vector.
pub fn hamming_weight(words: &[u64]) -> u32 {
    words.iter().map(|w| w.count_ones()).sum()
}

/// Number of differing bits between two equal-length word vectors.
pub fn hamming_distance(a: &[u64], b: &[u64]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum())
}

/// Ground-truth label for a cycle range of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub start_cycle: u64,
    pub num_cycles: u64,
    /// Operation kind, e.g. "mult".
    pub label: String,
    /// Ladder slot index for kP traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<u64>,
    /// Multiplication position within the slot, 1..=6.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<u8>,
    /// Operand identity tags; equal tags mean equal operand values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub operands: Vec<String>,
}

impl Annotation {
    pub fn involves(&self, tag: &str) -> bool {
        self.operands.iter().any(|t| t == tag)
    }
}

/// Reproducibility metadata carried inside a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<LeakageModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Free-form config echo (kind of run, scalar bit length, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub context: BTreeMap<String, String>,
}

/// A sampled power trace plus its ground-truth annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// num_cycles * samples_per_cycle power values.
    pub samples: Vec<f64>,
    pub samples_per_cycle: u32,
    pub annotations: Vec<Annotation>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn num_cycles(&self) -> u64 {
        self.samples.len() as u64 / self.samples_per_cycle as u64
    }

    /// Structural checks: sample count divisibility, annotation bounds and
    /// disjointness, and for slot-indexed annotations the six contiguous
    /// 9-cycle multiplication windows that make up one 54-cycle slot.
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_cycle == 0 {
            return Err(Error::InvalidTrace("samples_per_cycle is zero".into()));
        }
        if self.samples.len() % self.samples_per_cycle as usize != 0 {
            return Err(Error::InvalidTrace(format!(
                "{} samples is not a whole number of {}-sample cycles",
                self.samples.len(),
                self.samples_per_cycle
            )));
        }
        let cycles = self.num_cycles();
        let mut ranges: Vec<(u64, u64)> = Vec::with_capacity(self.annotations.len());
        let mut slots: BTreeMap<u64, Vec<&Annotation>> = BTreeMap::new();
        for ann in &self.annotations {
            let end = ann
                .start_cycle
                .checked_add(ann.num_cycles)
                .ok_or_else(|| Error::InvalidTrace("annotation range overflows".into()))?;
            if ann.num_cycles == 0 || end > cycles {
                return Err(Error::InvalidTrace(format!(
                    "annotation [{}, {end}) is outside the {cycles}-cycle trace",
                    ann.start_cycle
                )));
            }
            if let Some(p) = ann.position {
                if !(1..=curve::MULTS_PER_SLOT as u8).contains(&p) {
                    return Err(Error::InvalidTrace(format!("position {p} out of 1..=6")));
                }
            }
            ranges.push((ann.start_cycle, end));
            if let Some(slot) = ann.slot {
                slots.entry(slot).or_default().push(ann);
            }
        }
        ranges.sort_unstable();
        for pair in ranges.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::InvalidTrace(format!(
                    "annotations overlap at cycle {}",
                    pair[1].0
                )));
            }
        }
        for (slot, mut anns) in slots {
            anns.sort_by_key(|a| a.start_cycle);
            let ok = anns.len() == curve::MULTS_PER_SLOT
                && anns.iter().all(|a| a.num_cycles == MULT_CYCLES as u64)
                && anns
                    .windows(2)
                    .all(|w| w[1].start_cycle == w[0].start_cycle + MULT_CYCLES as u64)
                && anns
                    .iter()
                    .enumerate()
                    .all(|(i, a)| a.position == Some(i as u8 + 1));
            if !ok {
                return Err(Error::InvalidTrace(format!(
                    "slot {slot} does not consist of six contiguous 9-cycle windows"
                )));
            }
        }
        Ok(())
    }
}

/// Per-cycle noiseless levels of one multiplication run.
fn mult_cycle_levels(
    a: &FieldElement,
    b: &FieldElement,
    plan: &PartialProductPlan,
    model: &LeakageModel,
) -> Result<Vec<f64>> {
    let (_, states) = mul_karatsuba(a, b, plan)?;
    let mut prev = FieldElement::zero(a.field());
    let mut levels = Vec::with_capacity(MULT_CYCLES);
    for st in &states {
        let hd = hamming_distance(prev.limbs(), st.accumulator.limbs())?;
        let hw = hamming_weight(st.partial.limbs());
        levels.push(model.alpha * hd as f64 + model.beta * hw as f64);
        prev = st.accumulator;
    }
    Ok(levels)
}

/// Expands per-cycle levels into per-sample values via the shape template
/// and optional Gaussian noise.
fn spread_levels<R: RngCore + ?Sized>(
    levels: &[f64],
    model: &LeakageModel,
    rng: &mut R,
) -> Vec<f64> {
    let mut samples = Vec::with_capacity(levels.len() * model.shape.len());
    if model.sigma > 0.0 {
        let noise = Normal::new(0.0, model.sigma).expect("validated sigma");
        for &level in levels {
            for &w in &model.shape {
                samples.push(level * w + noise.sample(rng));
            }
        }
    } else {
        for &level in levels {
            for &w in &model.shape {
                samples.push(level * w);
            }
        }
    }
    samples
}

/// Simulates one standalone multiplication under the default plan.
pub fn simulate_mult_trace<R: RngCore + ?Sized>(
    a: &FieldElement,
    b: &FieldElement,
    model: &LeakageModel,
    rng: &mut R,
) -> Result<Trace> {
    simulate_mult_trace_with_plan(a, b, &PartialProductPlan::default(), model, rng)
}

/// Simulates one standalone multiplication under a custom schedule.
pub fn simulate_mult_trace_with_plan<R: RngCore + ?Sized>(
    a: &FieldElement,
    b: &FieldElement,
    plan: &PartialProductPlan,
    model: &LeakageModel,
    rng: &mut R,
) -> Result<Trace> {
    model.validate()?;
    let levels = mult_cycle_levels(a, b, plan, model)?;
    let samples = spread_levels(&levels, model, rng);
    let mut context = BTreeMap::new();
    context.insert("kind".to_string(), "mult".to_string());
    Ok(Trace {
        samples,
        samples_per_cycle: model.samples_per_cycle,
        annotations: vec![Annotation {
            start_cycle: 0,
            num_cycles: MULT_CYCLES as u64,
            label: "mult".into(),
            slot: None,
            position: None,
            operands: Vec::new(),
        }],
        meta: TraceMeta {
            field: Some(a.field()),
            model: Some(model.clone()),
            seed: None,
            context,
        },
    })
}

/// Simulates the main-loop trace of a full kP run under the default plan.
pub fn simulate_kp_trace<R: RngCore + ?Sized>(
    k: &num_bigint::BigUint,
    p: &AffinePoint,
    params: &CurveParams,
    model: &LeakageModel,
    rng: &mut R,
) -> Result<Trace> {
    simulate_kp_trace_with_plan(k, p, params, &PartialProductPlan::default(), model, rng)
}

/// Simulates the main-loop trace of a full kP run: 54 cycles per processed
/// scalar bit (six multiplications of nine cycles), with the squaring-unit
/// register chained across slots, plus per-window ground-truth annotations.
pub fn simulate_kp_trace_with_plan<R: RngCore + ?Sized>(
    k: &num_bigint::BigUint,
    p: &AffinePoint,
    params: &CurveParams,
    plan: &PartialProductPlan,
    model: &LeakageModel,
    rng: &mut R,
) -> Result<Trace> {
    model.validate()?;
    let (_, transcript) = curve::montgomery_kp(k, p, params)?;
    trace_from_transcript(&transcript, plan, model, rng)
}

/// Renders a ladder transcript into a trace. Exposed so callers that
/// already ran the ladder need not run it twice.
pub fn trace_from_transcript<R: RngCore + ?Sized>(
    transcript: &LadderTranscript,
    plan: &PartialProductPlan,
    model: &LeakageModel,
    rng: &mut R,
) -> Result<Trace> {
    model.validate()?;
    let num_cycles = transcript.slots.len() * SLOT_CYCLES;
    let mut levels = vec![0.0f64; num_cycles];
    let mut annotations = Vec::with_capacity(transcript.slots.len() * curve::MULTS_PER_SLOT);

    // The squaring unit's output register carries over between slots; its
    // content entering the first slot is the last setup squaring (x^4).
    let mut sq_reg = transcript
        .setup_square_outputs
        .last()
        .copied()
        .unwrap_or_else(|| FieldElement::zero(transcript.field));

    for (s, slot) in transcript.slots.iter().enumerate() {
        let slot_start = s * SLOT_CYCLES;
        for m in &slot.mults {
            let window_start = slot_start + (m.position as usize - 1) * MULT_CYCLES;
            let window = mult_cycle_levels(&m.left, &m.right, plan, model)?;
            levels[window_start..window_start + MULT_CYCLES].copy_from_slice(&window);
            let operands = if m.involves_b {
                vec!["b".to_string(), format!("s{s}.z4")]
            } else if m.involves_base_x {
                vec!["base_x".to_string(), format!("s{s}.znew")]
            } else {
                vec![format!("s{s}.p{}.l", m.position), format!("s{s}.p{}.r", m.position)]
            };
            annotations.push(Annotation {
                start_cycle: window_start as u64,
                num_cycles: MULT_CYCLES as u64,
                label: "mult".into(),
                slot: Some(s as u64),
                position: Some(m.position),
                operands,
            });
        }
        for sq in &slot.squarings {
            if model.gamma != 0.0 {
                let hd = hamming_distance(sq_reg.limbs(), sq.output.limbs())?;
                levels[slot_start + sq.slot_cycle] += model.gamma * hd as f64;
            }
            sq_reg = sq.output;
        }
    }

    let samples = spread_levels(&levels, model, rng);
    let mut context = BTreeMap::new();
    context.insert("kind".to_string(), "kp".to_string());
    context.insert("slots".to_string(), transcript.slots.len().to_string());
    context.insert("scalar_bits".to_string(), transcript.scalar_bits.to_string());
    let trace = Trace {
        samples,
        samples_per_cycle: model.samples_per_cycle,
        annotations,
        meta: TraceMeta {
            field: Some(transcript.field),
            model: Some(model.clone()),
            seed: None,
            context,
        },
    };
    debug_assert!(trace.validate().is_ok());
    Ok(trace)
}
