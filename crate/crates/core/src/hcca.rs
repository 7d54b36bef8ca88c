//! Horizontal collision-correlation analysis on simulated traces.
//!
//! The pipeline reduces a per-sample trace to one value per clock cycle
//! (mean of squared samples), slices the reduced trace into ladder slots,
//! averages a chosen multiplication window across slots into a profile,
//! and correlates that profile against every window in the trace. When
//! ground-truth annotations are present, each window is labelled as
//! sharing an operand with the profiled position ("common") or not, and
//! the two coefficient populations are compared with Welch's t and the
//! Mann-Whitney AUC. Missing coefficients (zero-variance windows) stay in
//! the report as explicit gaps rather than being dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as IoWrite;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::curve::MULTS_PER_SLOT;
use crate::error::{Error, Result};
use crate::gf2m::{FieldElement, FieldId};
use crate::karatsuba::MULT_CYCLES;
use crate::leakage::{
    simulate_mult_trace, Annotation, LeakageModel, Trace, TraceMeta, SLOT_CYCLES,
};

/// Kahan-Neumaier compensated sum.
fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One value per clock cycle: the mean of the squared samples of that
/// cycle. Annotations and metadata are carried over from the source trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedTrace {
    pub values: Vec<f64>,
    pub annotations: Vec<Annotation>,
    pub meta: TraceMeta,
}

/// Reduces a trace to per-cycle power: mean over the cycle's samples of
/// the squared sample value.
pub fn compress(trace: &Trace) -> Result<CompressedTrace> {
    trace.validate()?;
    let n = trace.samples_per_cycle as usize;
    let values = trace
        .samples
        .chunks_exact(n)
        .map(|cycle| neumaier(cycle.iter().map(|&v| v * v)) / n as f64)
        .collect();
    Ok(CompressedTrace {
        values,
        annotations: trace.annotations.clone(),
        meta: trace.meta.clone(),
    })
}

/// Splits a compressed trace into consecutive `slot_len`-cycle slots.
///
/// A trailing partial slot is an error unless `allow_truncate` is set, in
/// which case the remainder is dropped. At least one complete slot must
/// remain.
pub fn slice_slots(
    compressed: &CompressedTrace,
    slot_len: usize,
    allow_truncate: bool,
) -> Result<Vec<&[f64]>> {
    if slot_len == 0 {
        return Err(Error::InvalidParams("slot length must be positive".into()));
    }
    let remainder = compressed.values.len() % slot_len;
    if remainder != 0 && !allow_truncate {
        return Err(Error::InvalidTrace(format!(
            "{} cycles is not a whole number of {slot_len}-cycle slots ({remainder} left over)",
            compressed.values.len()
        )));
    }
    let slots: Vec<&[f64]> = compressed.values.chunks_exact(slot_len).collect();
    if slots.is_empty() {
        return Err(Error::InvalidTrace(format!(
            "trace has {} cycles, shorter than one {slot_len}-cycle slot",
            compressed.values.len()
        )));
    }
    Ok(slots)
}

/// Averages the 9-cycle window of multiplication `mult_index` (1-based)
/// across all slots. Window w covers slot cycles (w-1)*9 .. w*9, so
/// window 3 is 1-based cycles 19..=27 and window 5 is 37..=45.
pub fn average_profile(slots: &[&[f64]], mult_index: usize) -> Result<Vec<f64>> {
    if slots.is_empty() {
        return Err(Error::EmptyGroup("slots"));
    }
    if mult_index == 0 {
        return Err(Error::InvalidParams("multiplication index is 1-based".into()));
    }
    let start = (mult_index - 1) * MULT_CYCLES;
    let end = mult_index * MULT_CYCLES;
    if end > slots[0].len() {
        return Err(Error::InvalidParams(format!(
            "multiplication {mult_index} needs {end} cycles but slots have {}",
            slots[0].len()
        )));
    }
    let inv = 1.0 / slots.len() as f64;
    Ok((start..end)
        .map(|c| neumaier(slots.iter().map(|s| s[c])) * inv)
        .collect())
}

/// Pearson correlation coefficient, two-pass with compensated sums.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParams("correlation needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = neumaier(x.iter().copied()) / n;
    let my = neumaier(y.iter().copied()) / n;
    let sxx = neumaier(x.iter().map(|&v| (v - mx) * (v - mx)));
    let syy = neumaier(y.iter().map(|&v| (v - my) * (v - my)));
    if sxx <= 0.0 {
        return Err(Error::ConstantInput("left series has zero variance"));
    }
    if syy <= 0.0 {
        return Err(Error::ConstantInput("right series has zero variance"));
    }
    let sxy = neumaier(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of one trace window against the averaged profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCorrelation {
    pub window_index: usize,
    pub slot: usize,
    /// Multiplication position within the slot, 1-based.
    pub position: usize,
    /// None when the window has zero variance.
    pub coefficient: Option<f64>,
    /// Ground truth: does this window share an operand with the profiled
    /// position? None when the window carries no annotation.
    pub common: Option<bool>,
}

/// Distribution comparison between common-operand and different-operand
/// coefficient populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationStats {
    pub n_common: usize,
    pub n_different: usize,
    pub mean_common: f64,
    pub mean_different: f64,
    /// Welch's t statistic; None when a group has fewer than two values
    /// or both groups are constant.
    pub welch_t: Option<f64>,
    /// Two-sided p-value for `welch_t`.
    pub p_value: Option<f64>,
    /// Mann-Whitney AUC: probability that a random common coefficient
    /// exceeds a random different one (ties count half).
    pub auc: f64,
}

/// Output of one full horizontal attack pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldId>,
    pub target_position: usize,
    pub slot_len: usize,
    pub num_slots: usize,
    pub windows: Vec<WindowCorrelation>,
    /// None when either labelled group is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationStats>,
    /// Windows whose coefficient could not be computed.
    pub num_missing: usize,
    /// Windows without ground-truth labels.
    pub num_unlabeled: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub context: BTreeMap<String, String>,
}

impl AttackReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per window: window_index,slot,position,coefficient,label.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> Result<()> {
        writeln!(out, "window_index,slot,position,coefficient,label")?;
        for w in &self.windows {
            let coeff = w.coefficient.map(|c| c.to_string()).unwrap_or_default();
            let label = match w.common {
                Some(true) => "common",
                Some(false) => "different",
                None => "unlabeled",
            };
            writeln!(out, "{},{},{},{},{}", w.window_index, w.slot, w.position, coeff, label)?;
        }
        Ok(())
    }
}

/// Correlates every 9-cycle window against the profile averaged over all
/// windows at `target_position` (1-based within the slot).
pub fn correlate_all(
    compressed: &CompressedTrace,
    slot_len: usize,
    target_position: usize,
    allow_truncate: bool,
) -> Result<AttackReport> {
    if slot_len % MULT_CYCLES != 0 {
        return Err(Error::InvalidParams(format!(
            "slot length {slot_len} is not a multiple of the {MULT_CYCLES}-cycle window"
        )));
    }
    let windows_per_slot = slot_len / MULT_CYCLES;
    if !(1..=windows_per_slot).contains(&target_position) {
        return Err(Error::InvalidParams(format!(
            "target position {target_position} out of 1..={windows_per_slot}"
        )));
    }
    let slots = slice_slots(compressed, slot_len, allow_truncate)?;
    let profile = average_profile(&slots, target_position)?;

    // Ground truth: a window is "common" when it shares an operand tag
    // with every window at the profiled position.
    let mut by_window: BTreeMap<(usize, usize), &Annotation> = BTreeMap::new();
    for ann in &compressed.annotations {
        if let (Some(slot), Some(pos)) = (ann.slot, ann.position) {
            by_window.insert((slot as usize, pos as usize), ann);
        }
    }
    let mut profile_tags: Option<BTreeSet<&str>> = None;
    for slot in 0..slots.len() {
        if let Some(ann) = by_window.get(&(slot, target_position)) {
            let tags: BTreeSet<&str> = ann.operands.iter().map(String::as_str).collect();
            profile_tags = Some(match profile_tags {
                None => tags,
                Some(acc) => acc.intersection(&tags).copied().collect(),
            });
        }
    }
    let profile_tags = profile_tags.unwrap_or_default();

    let mut windows = Vec::with_capacity(slots.len() * windows_per_slot);
    let mut num_missing = 0;
    let mut num_unlabeled = 0;
    for (slot_idx, slot) in slots.iter().enumerate() {
        for pos in 1..=windows_per_slot {
            let window = &slot[(pos - 1) * MULT_CYCLES..pos * MULT_CYCLES];
            let coefficient = match pearson(&profile, window) {
                Ok(r) => Some(r),
                Err(Error::ConstantInput(_)) => {
                    num_missing += 1;
                    None
                }
                Err(e) => return Err(e),
            };
            let common = match by_window.get(&(slot_idx, pos)) {
                Some(ann) => Some(ann.operands.iter().any(|t| profile_tags.contains(t.as_str()))),
                None => {
                    num_unlabeled += 1;
                    None
                }
            };
            windows.push(WindowCorrelation {
                window_index: slot_idx * windows_per_slot + (pos - 1),
                slot: slot_idx,
                position: pos,
                coefficient,
                common,
            });
        }
    }

    let common_vals: Vec<f64> = windows
        .iter()
        .filter(|w| w.common == Some(true))
        .filter_map(|w| w.coefficient)
        .collect();
    let different_vals: Vec<f64> = windows
        .iter()
        .filter(|w| w.common == Some(false))
        .filter_map(|w| w.coefficient)
        .collect();
    let separation = if common_vals.is_empty() || different_vals.is_empty() {
        None
    } else {
        Some(separation_stats(&common_vals, &different_vals)?)
    };

    Ok(AttackReport {
        field: compressed.meta.field,
        target_position,
        slot_len,
        num_slots: slots.len(),
        windows,
        separation,
        num_missing,
        num_unlabeled,
        context: compressed.meta.context.clone(),
    })
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Compares the two labelled coefficient groups.
///
/// Welch's t (and its two-sided p-value from the t distribution with
/// Welch-Satterthwaite degrees of freedom) requires at least two values
/// per group and some variance; the AUC is defined whenever both groups
/// are nonempty.
pub fn separation_stats(common: &[f64], different: &[f64]) -> Result<SeparationStats> {
    if common.is_empty() {
        return Err(Error::EmptyGroup("common"));
    }
    if different.is_empty() {
        return Err(Error::EmptyGroup("different"));
    }
    if common.iter().chain(different).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("coefficients must be finite".into()));
    }
    let n1 = common.len() as f64;
    let n2 = different.len() as f64;
    let mean_common = neumaier(common.iter().copied()) / n1;
    let mean_different = neumaier(different.iter().copied()) / n2;

    let mut welch_t = None;
    let mut p_value = None;
    if common.len() >= 2 && different.len() >= 2 {
        let v1 = neumaier(common.iter().map(|&v| (v - mean_common) * (v - mean_common))) / (n1 - 1.0);
        let v2 = neumaier(different.iter().map(|&v| (v - mean_different) * (v - mean_different)))
            / (n2 - 1.0);
        let se2 = v1 / n1 + v2 / n2;
        if se2 > 0.0 {
            let t = (mean_common - mean_different) / se2.sqrt();
            let df = se2 * se2
                / ((v1 / n1) * (v1 / n1) / (n1 - 1.0) + (v2 / n2) * (v2 / n2) / (n2 - 1.0));
            let dist = StudentsT::new(0.0, 1.0, df)
                .map_err(|e| Error::InvalidParams(format!("t distribution: {e}")))?;
            welch_t = Some(t);
            p_value = Some(2.0 * (1.0 - dist.cdf(t.abs())));
        }
    }

    // Mann-Whitney U from average ranks; AUC = U / (n1 * n2).
    let mut all: Vec<f64> = Vec::with_capacity(common.len() + different.len());
    all.extend_from_slice(common);
    all.extend_from_slice(different);
    let ranks = average_ranks(&all);
    let r1: f64 = ranks[..common.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let auc = u1 / (n1 * n2);

    Ok(SeparationStats {
        n_common: common.len(),
        n_different: different.len(),
        mean_common,
        mean_different,
        welch_t,
        p_value,
        auc,
    })
}

/// One repetition of the multiplier collision experiment: correlations
/// between the compressed profiles of four multiplications, where only
/// the first pair shares an operand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRound {
    /// rho(a*b, a*e): shared left operand.
    pub k1: Option<f64>,
    /// rho(c*d, f*g): all operands distinct.
    pub k2: Option<f64>,
    /// rho(a*b, c*d): all operands distinct.
    pub k3: Option<f64>,
    /// rho(a*b, f*g): all operands distinct.
    pub k4: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionExperimentResult {
    pub field: FieldId,
    pub bit_length: u32,
    pub repetitions: u32,
    pub rounds: Vec<CollisionRound>,
}

impl CollisionExperimentResult {
    /// Mean of each correlation statistic over the rounds where it exists.
    pub fn means(&self) -> [Option<f64>; 4] {
        let pick = |f: fn(&CollisionRound) -> Option<f64>| {
            let vals: Vec<f64> = self.rounds.iter().filter_map(f).collect();
            if vals.is_empty() {
                None
            } else {
                Some(neumaier(vals.iter().copied()) / vals.len() as f64)
            }
        };
        [
            pick(|r| r.k1),
            pick(|r| r.k2),
            pick(|r| r.k3),
            pick(|r| r.k4),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per repetition: repetition,k1,k2,k3,k4,bitlength.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> Result<()> {
        writeln!(out, "repetition,k1,k2,k3,k4,bitlength")?;
        self.append_csv_rows(&mut out)
    }

    /// Data rows only, so results for several operand lengths can share
    /// one file.
    pub fn append_csv_rows<W: IoWrite>(&self, out: &mut W) -> Result<()> {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, r) in self.rounds.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                i,
                fmt(r.k1),
                fmt(r.k2),
                fmt(r.k3),
                fmt(r.k4),
                self.bit_length
            )?;
        }
        Ok(())
    }
}

/// Compressed 9-value profile of one standalone multiplication.
fn mult_profile<R: RngCore + ?Sized>(
    a: &FieldElement,
    b: &FieldElement,
    model: &LeakageModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let trace = simulate_mult_trace(a, b, model, rng)?;
    Ok(compress(&trace)?.values)
}

/// Runs the operand-collision experiment on standalone multiplications.
///
/// Per repetition, seven fresh field elements a..g feed four products:
/// a*b, c*d, a*e, f*g. k1 correlates the pair sharing operand a; k2, k3
/// and k4 correlate operand-disjoint pairs as controls. Whether k1
/// separates from the controls depends entirely on the leakage model.
pub fn mult_collision_experiment<R: RngCore + ?Sized>(
    field: FieldId,
    model: &LeakageModel,
    repetitions: u32,
    rng: &mut R,
) -> Result<CollisionExperimentResult> {
    if repetitions == 0 {
        return Err(Error::InvalidParams("repetitions must be positive".into()));
    }
    model.validate()?;
    let mut rounds = Vec::with_capacity(repetitions as usize);
    for _ in 0..repetitions {
        let a = FieldElement::random(field, rng);
        let b = FieldElement::random(field, rng);
        let c = FieldElement::random(field, rng);
        let d = FieldElement::random(field, rng);
        let e = FieldElement::random(field, rng);
        let f = FieldElement::random(field, rng);
        let g = FieldElement::random(field, rng);
        let m1 = mult_profile(&a, &b, model, rng)?;
        let m2 = mult_profile(&c, &d, model, rng)?;
        let m3 = mult_profile(&a, &e, model, rng)?;
        let m4 = mult_profile(&f, &g, model, rng)?;
        let corr = |x: &[f64], y: &[f64]| match pearson(x, y) {
            Ok(r) => Ok(Some(r)),
            Err(Error::ConstantInput(_)) => Ok(None),
            Err(e) => Err(e),
        };
        rounds.push(CollisionRound {
            k1: corr(&m1, &m3)?,
            k2: corr(&m2, &m4)?,
            k3: corr(&m1, &m2)?,
            k4: corr(&m1, &m4)?,
        });
    }
    Ok(CollisionExperimentResult {
        field,
        bit_length: field.bit_len() as u32,
        repetitions,
        rounds,
    })
}

/// Synthetic compressed trace with a known collision structure, for
/// validating the attack pipeline end to end.
///
/// Every cycle gets independent U(0,1) power; the windows at
/// `target_position` additionally share one fixed 9-value template scaled
/// by `strength`, and only those windows carry the shared operand tag.
pub fn planted_collision_trace<R: RngCore + ?Sized>(
    num_slots: usize,
    target_position: usize,
    strength: f64,
    rng: &mut R,
) -> Result<CompressedTrace> {
    if num_slots == 0 {
        return Err(Error::InvalidParams("need at least one slot".into()));
    }
    if !(1..=MULTS_PER_SLOT).contains(&target_position) {
        return Err(Error::InvalidParams(format!(
            "target position {target_position} out of 1..={MULTS_PER_SLOT}"
        )));
    }
    let mut values: Vec<f64> = (0..num_slots * SLOT_CYCLES).map(|_| rng.random::<f64>()).collect();
    let template: Vec<f64> = (0..MULT_CYCLES).map(|_| strength * rng.random::<f64>()).collect();
    let mut annotations = Vec::with_capacity(num_slots * MULTS_PER_SLOT);
    for slot in 0..num_slots {
        for pos in 1..=MULTS_PER_SLOT {
            let start = slot * SLOT_CYCLES + (pos - 1) * MULT_CYCLES;
            let operands = if pos == target_position {
                for (c, t) in template.iter().enumerate() {
                    values[start + c] += t;
                }
                vec!["planted".to_string()]
            } else {
                vec![format!("s{slot}.p{pos}")]
            };
            annotations.push(Annotation {
                start_cycle: start as u64,
                num_cycles: MULT_CYCLES as u64,
                label: "mult".into(),
                slot: Some(slot as u64),
                position: Some(pos as u8),
                operands,
            });
        }
    }
    let mut context = BTreeMap::new();
    context.insert("kind".to_string(), "planted".to_string());
    context.insert("strength".to_string(), strength.to_string());
    Ok(CompressedTrace {
        values,
        annotations,
        meta: TraceMeta { field: None, model: None, seed: None, context },
    })
}
