//! Trace serialization: a compact binary container and a CSV exchange
//! format.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic   "HCT1"                        4 bytes
//! version u16                           2 bytes
//! samples_per_cycle u32                 4 bytes
//! num_cycles u64                        8 bytes
//! metadata_len u32                      4 bytes
//! metadata UTF-8 JSON                   metadata_len bytes
//! samples f64[num_cycles * samples_per_cycle]
//! ```
//!
//! The metadata document carries the leakage model, field, seed, context
//! and annotations, so a trace file is self-describing. Decoding checks
//! every header field, detects truncation and trailing bytes, and
//! revalidates the annotation structure before handing back a `Trace`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2m::FieldId;
use crate::leakage::{Annotation, LeakageModel, Trace, TraceMeta};

pub const MAGIC: [u8; 4] = *b"HCT1";
pub const VERSION: u16 = 1;

/// JSON metadata block embedded in the binary container and mirrored in
/// the CSV sidecar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct MetaDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<FieldId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<LeakageModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    context: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    annotations: Vec<Annotation>,
}

impl MetaDoc {
    fn from_trace(trace: &Trace) -> MetaDoc {
        MetaDoc {
            field: trace.meta.field,
            model: trace.meta.model.clone(),
            seed: trace.meta.seed,
            context: trace.meta.context.clone(),
            annotations: trace.annotations.clone(),
        }
    }

    fn into_parts(self) -> (TraceMeta, Vec<Annotation>) {
        (
            TraceMeta {
                field: self.field,
                model: self.model,
                seed: self.seed,
                context: self.context,
            },
            self.annotations,
        )
    }
}

fn format_err(section: &'static str, detail: impl Into<String>) -> Error {
    Error::TraceFormat { section, detail: detail.into() }
}

/// Serializes a trace into the binary container.
pub fn encode_trace(trace: &Trace) -> Result<Vec<u8>> {
    trace.validate()?;
    let metadata = serde_json::to_vec(&MetaDoc::from_trace(trace))?;
    if metadata.len() > u32::MAX as usize {
        return Err(format_err("metadata", "metadata block exceeds u32 length"));
    }
    let mut out = Vec::with_capacity(22 + metadata.len() + trace.samples.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&trace.samples_per_cycle.to_le_bytes());
    out.extend_from_slice(&trace.num_cycles().to_le_bytes());
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(&metadata);
    for v in &trace.samples {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Consumes `n` bytes from the front of the slice or reports which
/// section ran short.
fn take<'a>(bytes: &mut &'a [u8], n: usize, section: &'static str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(format_err(
            section,
            format!("needs {n} bytes, only {} left", bytes.len()),
        ));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

/// Parses a binary container, validating every section.
pub fn decode_trace(mut bytes: &[u8]) -> Result<Trace> {
    let magic = take(&mut bytes, 4, "magic")?;
    if magic != MAGIC {
        return Err(format_err("magic", format!("found {magic:02x?}, expected {MAGIC:02x?}")));
    }
    let version = u16::from_le_bytes(take(&mut bytes, 2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(format_err("version", format!("unsupported version {version}")));
    }
    let samples_per_cycle =
        u32::from_le_bytes(take(&mut bytes, 4, "header")?.try_into().unwrap());
    let num_cycles = u64::from_le_bytes(take(&mut bytes, 8, "header")?.try_into().unwrap());
    let metadata_len =
        u32::from_le_bytes(take(&mut bytes, 4, "header")?.try_into().unwrap()) as usize;
    if samples_per_cycle == 0 {
        return Err(format_err("header", "samples_per_cycle is zero"));
    }
    let num_samples = num_cycles
        .checked_mul(samples_per_cycle as u64)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| usize::try_from(n).ok())
        .map(|n| n / 8)
        .ok_or_else(|| format_err("header", "sample count overflows"))?;

    let metadata_bytes = take(&mut bytes, metadata_len, "metadata")?;
    let metadata_str = std::str::from_utf8(metadata_bytes)
        .map_err(|e| format_err("metadata", format!("not UTF-8: {e}")))?;
    let doc: MetaDoc = serde_json::from_str(metadata_str)
        .map_err(|e| format_err("metadata", format!("bad JSON: {e}")))?;

    let sample_bytes = take(&mut bytes, num_samples * 8, "samples")?;
    if !bytes.is_empty() {
        return Err(format_err(
            "trailer",
            format!("{} unexpected bytes after the sample block", bytes.len()),
        ));
    }
    let samples: Vec<f64> = sample_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let (meta, annotations) = doc.into_parts();
    let trace = Trace { samples, samples_per_cycle, annotations, meta };
    trace.validate()?;
    Ok(trace)
}

pub fn write_trace<P: AsRef<Path>>(path: P, trace: &Trace) -> Result<()> {
    fs::write(path, encode_trace(trace)?)?;
    Ok(())
}

pub fn read_trace<P: AsRef<Path>>(path: P) -> Result<Trace> {
    decode_trace(&fs::read(path)?)
}

/// CSV sidecar: everything the sample column cannot carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    samples_per_cycle: u32,
    num_cycles: u64,
    metadata: MetaDoc,
}

/// Writes a trace as a one-sample-per-line CSV plus a JSON sidecar.
/// Sample values use the shortest decimal form that parses back to the
/// identical bits, so the CSV is as lossless as the binary container.
pub fn write_trace_csv<P: AsRef<Path>, Q: AsRef<Path>>(
    csv_path: P,
    sidecar_path: Q,
    trace: &Trace,
) -> Result<()> {
    trace.validate()?;
    let mut csv = String::with_capacity(trace.samples.len() * 20 + 8);
    csv.push_str("sample\n");
    for v in &trace.samples {
        csv.push_str(&v.to_string());
        csv.push('\n');
    }
    fs::write(csv_path, csv)?;
    let sidecar = Sidecar {
        samples_per_cycle: trace.samples_per_cycle,
        num_cycles: trace.num_cycles(),
        metadata: MetaDoc::from_trace(trace),
    };
    fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a CSV + sidecar pair back into a trace.
pub fn read_trace_csv<P: AsRef<Path>, Q: AsRef<Path>>(
    csv_path: P,
    sidecar_path: Q,
) -> Result<Trace> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)
        .map_err(|e| format_err("metadata", format!("bad sidecar JSON: {e}")))?;
    let text = fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("sample") => {}
        other => {
            return Err(format_err(
                "header",
                format!("expected 'sample' header line, found {other:?}"),
            ))
        }
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|e| format_err("samples", format!("line {}: {e}", i + 2)))?;
        samples.push(v);
    }
    let expected = sidecar
        .num_cycles
        .checked_mul(sidecar.samples_per_cycle as u64)
        .ok_or_else(|| format_err("header", "sample count overflows"))?;
    if samples.len() as u64 != expected {
        return Err(format_err(
            "samples",
            format!("{} sample lines, sidecar promises {expected}", samples.len()),
        ));
    }
    let (meta, annotations) = sidecar.metadata.into_parts();
    let trace = Trace {
        samples,
        samples_per_cycle: sidecar.samples_per_cycle,
        annotations,
        meta,
    };
    trace.validate()?;
    Ok(trace)
}
