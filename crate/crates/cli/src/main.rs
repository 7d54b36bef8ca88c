//! Command-line front end: key and signature operations, scalar
//! multiplication, trace synthesis, and the collision-correlation
//! analyses, glued together with reproducible seeding.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 negative
//! outcomes (INVALID signature, failed oracle cross-check, degenerate
//! ladder, attack below a requested threshold), 2 usage errors, 3 I/O or
//! file-format errors. Every produced file embeds the seed and the
//! configuration that made it, so identical invocations produce identical
//! bytes.

use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use hccalab::curve::{
    is_on_curve, kp_double_and_add, montgomery_kp, AffinePoint, CurveParams, LadderTranscript,
};
use hccalab::ecdsa::{self, Scalar, Signature};
use hccalab::gf2m::{FieldElement, FieldId};
use hccalab::hcca::{
    compress, correlate_all, mult_collision_experiment, planted_collision_trace, AttackReport,
    CollisionExperimentResult,
};
use hccalab::karatsuba::PartialProductPlan;
use hccalab::leakage::{
    simulate_kp_trace_with_plan, simulate_mult_trace_with_plan, LeakageModel, Trace, TraceMeta,
    SLOT_CYCLES,
};
use hccalab::trace_io::{read_trace, read_trace_csv, write_trace, write_trace_csv};
use hccalab::Error;

#[derive(Parser)]
#[command(
    name = "hccalab",
    version,
    about = "Binary-curve ECDSA engine with a leakage-simulation and collision-analysis lab"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CurveArg {
    B233,
    B283,
}

impl CurveArg {
    fn field(self) -> FieldId {
        match self {
            CurveArg::B233 => FieldId::B233,
            CurveArg::B283 => FieldId::B283,
        }
    }

    fn name(self) -> &'static str {
        match self {
            CurveArg::B233 => "b233",
            CurveArg::B283 => "b283",
        }
    }

    fn from_name(name: &str) -> Result<CurveArg, Error> {
        match name {
            "b233" => Ok(CurveArg::B233),
            "b283" => Ok(CurveArg::B283),
            other => Err(Error::InvalidParams(format!("unknown curve {other:?}"))),
        }
    }
}

#[derive(Copy, Clone, Default, ValueEnum)]
enum TraceFormatArg {
    /// Binary container (self-describing, bit-exact).
    #[default]
    Hct1,
    /// One sample per line plus a JSON sidecar next to it.
    Csv,
}

/// Leakage-model flags shared by the simulation and analysis commands.
#[derive(Args)]
struct ModelArgs {
    /// Weight of the multiplier accumulator Hamming distance.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Weight of the partial-product Hamming weight.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Weight of the squaring-unit register Hamming distance.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Gaussian noise standard deviation (0 disables noise).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 625)]
    samples_per_cycle: u32,
}

impl ModelArgs {
    fn model(&self) -> Result<LeakageModel, Error> {
        LeakageModel::new(self.alpha, self.beta, self.gamma, self.sigma, self.samples_per_cycle)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a key pair and write it as a hex key file.
    Keygen {
        #[arg(long)]
        curve: CurveArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sign a hex digest with the private key from a key file.
    Sign {
        #[arg(long)]
        key: PathBuf,
        /// Message digest as hex; reduced modulo the group order.
        #[arg(long)]
        digest: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also record the ephemeral nonce in the signature file.
        #[arg(long)]
        disclose_nonce: bool,
    },
    /// Check a signature file; prints VALID or INVALID.
    Verify {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        sig: PathBuf,
        #[arg(long)]
        digest: String,
    },
    /// Scalar multiplication via the Montgomery ladder.
    Kp {
        #[arg(long)]
        curve: CurveArg,
        /// Scalar as hex.
        #[arg(long)]
        k: String,
        /// Base point x (defaults to the generator).
        #[arg(long, requires = "y")]
        x: Option<String>,
        /// Base point y.
        #[arg(long, requires = "x")]
        y: Option<String>,
        /// Cross-check against double-and-add.
        #[arg(long)]
        oracle: bool,
        /// Write a per-slot register dump to this path.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Produce annotated leakage traces.
    Simulate {
        #[command(subcommand)]
        what: SimulateCmd,
    },
    /// Horizontal collision-correlation analysis of a trace file.
    AttackHcca {
        #[arg(long)]
        trace: PathBuf,
        /// Read the trace as CSV with this JSON sidecar instead of HCT1.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Profiled multiplication position within each slot.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
        position: u8,
        /// Drop a trailing partial slot instead of failing.
        #[arg(long)]
        truncate: bool,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Exit 1 unless the labelled separation reaches this AUC.
        #[arg(long)]
        min_auc: Option<f64>,
    },
    /// Repeated operand-collision measurement on standalone
    /// multiplications; runs both operand lengths unless --curve is given.
    MultExperiment {
        #[arg(long)]
        curve: Option<CurveArg>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        reps: u32,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Full ladder run: 54 cycles per processed scalar bit.
    Kp {
        #[arg(long)]
        curve: CurveArg,
        /// Scalar as hex; a full-bit-length scalar is drawn from the seed
        /// when omitted.
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
        /// Custom partial-product schedule file.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: TraceFormatArg,
    },
    /// One standalone 9-cycle multiplication.
    Mult {
        #[arg(long)]
        curve: CurveArg,
        /// Left operand as hex; random when omitted.
        #[arg(long)]
        a: Option<String>,
        /// Right operand as hex; random when omitted.
        #[arg(long)]
        b: Option<String>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: TraceFormatArg,
    },
    /// Synthetic trace with one known collision class planted per slot,
    /// for validating the attack end to end.
    Planted {
        #[arg(long, default_value_t = 64)]
        slots: usize,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6), default_value_t = 3)]
        position: u8,
        #[arg(long, default_value_t = 10.0)]
        strength: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: TraceFormatArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Maps library errors onto the documented exit-code contract.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Json(_) | Error::TraceFormat { .. } | Error::InvalidTrace(_) => 3,
        Error::InvalidHex(_)
        | Error::ScalarOutOfRange(_)
        | Error::InvalidPlan(_)
        | Error::InvalidParams(_)
        | Error::InvalidModel(_)
        | Error::PointNotOnCurve => 2,
        _ => 1,
    }
}

fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn parse_hex_scalar(s: &str) -> Result<BigUint, Error> {
    let t = s.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    if t.is_empty() {
        return Err(Error::InvalidHex("empty scalar".into()));
    }
    BigUint::parse_bytes(t.as_bytes(), 16)
        .ok_or_else(|| Error::InvalidHex(format!("bad scalar {s:?}")))
}

/// Parses `key: value` lines; `#` starts a comment.
fn parse_kv(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once(':') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    map
}

fn kv_get<'a>(map: &'a BTreeMap<String, String>, key: &str, what: &str) -> Result<&'a str, Error> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::InvalidParams(format!("{what} is missing the {key:?} line")))
}

struct KeyFile {
    curve: CurveArg,
    private: Option<Scalar>,
    public: AffinePoint,
}

fn read_key_file(path: &Path) -> Result<KeyFile, Error> {
    let map = parse_kv(&fs::read_to_string(path)?);
    let curve = CurveArg::from_name(kv_get(&map, "curve", "key file")?)?;
    let params = CurveParams::builtin(curve.field());
    let x = FieldElement::from_hex(curve.field(), kv_get(&map, "x", "key file")?)?;
    let y = FieldElement::from_hex(curve.field(), kv_get(&map, "y", "key file")?)?;
    let public = AffinePoint::Point { x, y };
    if !is_on_curve(&public, params) {
        return Err(Error::PointNotOnCurve);
    }
    let private = match map.get("d") {
        Some(d) => {
            let d = Scalar::from_hex_checked(params, d)?;
            if d.is_zero() {
                return Err(Error::ScalarOutOfRange("private key is zero".into()));
            }
            Some(d)
        }
        None => None,
    };
    Ok(KeyFile { curve, private, public })
}

fn cmd_keygen(curve: CurveArg, seed: u64, out: &Path) -> Result<u8, Error> {
    let params = CurveParams::builtin(curve.field());
    let mut rng = rng_from_seed(seed);
    let pair = ecdsa::keygen(params, &mut rng)?;
    let (x, y) = pair.public.xy().expect("keygen never returns infinity");
    let mut text = String::new();
    let _ = writeln!(text, "# hccalab key file");
    let _ = writeln!(text, "curve: {}", curve.name());
    let _ = writeln!(text, "seed: {seed}");
    let _ = writeln!(text, "d: {}", pair.private.to_hex(params));
    let _ = writeln!(text, "x: {}", x.to_hex());
    let _ = writeln!(text, "y: {}", y.to_hex());
    fs::write(out, text)?;
    println!("wrote {}: {} key pair", out.display(), curve.name());
    Ok(0)
}

fn cmd_sign(
    key: &Path,
    digest: &str,
    seed: u64,
    out: &Path,
    disclose_nonce: bool,
) -> Result<u8, Error> {
    let key = read_key_file(key)?;
    let private = key
        .private
        .ok_or_else(|| Error::InvalidParams("key file has no private key line".into()))?;
    let params = CurveParams::builtin(key.curve.field());
    let e = Scalar::from_hex_reduced(params, digest)?;
    let mut rng = rng_from_seed(seed);
    let (sig, nonce) = ecdsa::sign(params, &private, &e, &mut rng)?;
    let mut text = String::new();
    let _ = writeln!(text, "# hccalab signature file");
    let _ = writeln!(text, "curve: {}", key.curve.name());
    let _ = writeln!(text, "seed: {seed}");
    let _ = writeln!(text, "digest: {}", digest.trim());
    let _ = writeln!(text, "r: {}", sig.r.to_hex(params));
    let _ = writeln!(text, "s: {}", sig.s.to_hex(params));
    if disclose_nonce {
        let _ = writeln!(text, "k: {}", nonce.to_hex(params));
    }
    fs::write(out, text)?;
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_verify(key: &Path, sig: &Path, digest: &str) -> Result<u8, Error> {
    let key = read_key_file(key)?;
    let params = CurveParams::builtin(key.curve.field());
    let map = parse_kv(&fs::read_to_string(sig)?);
    if let Some(c) = map.get("curve") {
        if CurveArg::from_name(c)? != key.curve {
            return Err(Error::InvalidParams(format!(
                "signature is for curve {c}, key is for {}",
                key.curve.name()
            )));
        }
    }
    let e = Scalar::from_hex_reduced(params, digest)?;
    // Out-of-range components are an invalid signature, not a usage error.
    let parse_component = |name: &str| -> Result<Option<Scalar>, Error> {
        let raw = parse_hex_scalar(kv_get(&map, name, "signature file")?)?;
        Ok(Scalar::checked(params, raw).ok())
    };
    let verdict = match (parse_component("r")?, parse_component("s")?) {
        (Some(r), Some(s)) if !r.is_zero() && !s.is_zero() => {
            ecdsa::verify(params, &key.public, &e, &Signature { r, s })?
        }
        _ => false,
    };
    if verdict {
        println!("VALID");
        Ok(0)
    } else {
        println!("INVALID");
        Ok(1)
    }
}

fn base_point(
    curve: CurveArg,
    x: Option<&str>,
    y: Option<&str>,
) -> Result<AffinePoint, Error> {
    let params = CurveParams::builtin(curve.field());
    match (x, y) {
        (None, None) => Ok(params.generator.clone()),
        (Some(x), Some(y)) => {
            let p = AffinePoint::Point {
                x: FieldElement::from_hex(curve.field(), x)?,
                y: FieldElement::from_hex(curve.field(), y)?,
            };
            if !is_on_curve(&p, params) {
                return Err(Error::PointNotOnCurve);
            }
            Ok(p)
        }
        // clap's `requires` already enforces the pairing.
        _ => Err(Error::InvalidParams("--x and --y must be given together".into())),
    }
}

fn dump_transcript(path: &Path, curve: CurveArg, k: &str, t: &LadderTranscript) -> Result<(), Error> {
    let mut text = String::new();
    let _ = writeln!(text, "# ladder transcript");
    let _ = writeln!(text, "curve: {}", curve.name());
    let _ = writeln!(text, "k: {}", k.trim());
    let _ = writeln!(text, "scalar_bits: {}", t.scalar_bits);
    for (i, sq) in t.setup_square_outputs.iter().enumerate() {
        let _ = writeln!(text, "setup_square_{}: {}", i + 1, sq.to_hex());
    }
    for slot in &t.slots {
        let s = &slot.state_after;
        let _ = writeln!(
            text,
            "slot {} bit {}: x1={} z1={} x2={} z2={} t={}",
            slot.index,
            slot.bit as u8,
            s.x1.to_hex(),
            s.z1.to_hex(),
            s.x2.to_hex(),
            s.z2.to_hex(),
            s.t.to_hex()
        );
    }
    fs::write(path, text)?;
    Ok(())
}

fn cmd_kp(
    curve: CurveArg,
    k: &str,
    x: Option<&str>,
    y: Option<&str>,
    oracle: bool,
    transcript: Option<&Path>,
) -> Result<u8, Error> {
    let params = CurveParams::builtin(curve.field());
    let scalar = parse_hex_scalar(k)?;
    let point = base_point(curve, x, y)?;
    let (result, ladder) = montgomery_kp(&scalar, &point, params)?;
    println!("curve: {}", curve.name());
    println!("k: {}", k.trim());
    match result.xy() {
        Some((rx, ry)) => {
            println!("x: {}", rx.to_hex());
            println!("y: {}", ry.to_hex());
        }
        None => println!("INFINITY"),
    }
    if let Some(path) = transcript {
        dump_transcript(path, curve, k, &ladder)?;
    }
    if oracle {
        let check = kp_double_and_add(&scalar, &point, params)?;
        if check == result {
            println!("oracle: match");
        } else {
            eprintln!("oracle: MISMATCH between ladder and double-and-add");
            return Ok(1);
        }
    }
    Ok(0)
}

fn load_plan(path: Option<&Path>) -> Result<PartialProductPlan, Error> {
    match path {
        None => Ok(PartialProductPlan::default()),
        Some(p) => fs::read_to_string(p)?.parse(),
    }
}

/// Writes a trace in the requested format; returns a short description.
fn write_trace_out(out: &Path, format: TraceFormatArg, trace: &Trace) -> Result<String, Error> {
    match format {
        TraceFormatArg::Hct1 => {
            write_trace(out, trace)?;
            Ok(format!("{}", out.display()))
        }
        TraceFormatArg::Csv => {
            let sidecar = out.with_extension("json");
            write_trace_csv(out, &sidecar, trace)?;
            Ok(format!("{} (+ sidecar {})", out.display(), sidecar.display()))
        }
    }
}

/// Random scalar with the top bit of the full field length forced, so a
/// ladder over it processes bit_len - 1 slots.
fn full_length_scalar(field: FieldId, rng: &mut ChaCha12Rng) -> BigUint {
    let bits = field.bit_len();
    let mut bytes = vec![0u8; (bits + 7) / 8];
    rng.fill_bytes(&mut bytes);
    let mut k = BigUint::from_bytes_be(&bytes) >> (bytes.len() * 8 - bits + 1);
    k |= BigUint::from(1u32) << (bits - 1);
    k
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate_kp(
    curve: CurveArg,
    k: Option<&str>,
    seed: u64,
    model: &ModelArgs,
    plan: Option<&Path>,
    out: &Path,
    format: TraceFormatArg,
) -> Result<u8, Error> {
    let params = CurveParams::builtin(curve.field());
    let model = model.model()?;
    let plan = load_plan(plan)?;
    let mut rng = rng_from_seed(seed);
    let scalar = match k {
        Some(hex) => parse_hex_scalar(hex)?,
        None => full_length_scalar(curve.field(), &mut rng),
    };
    let mut trace =
        simulate_kp_trace_with_plan(&scalar, &params.generator, params, &plan, &model, &mut rng)?;
    trace.meta.seed = Some(seed);
    trace.meta.context.insert("curve".into(), curve.name().into());
    trace.meta.context.insert("k".into(), format!("{scalar:x}"));
    trace.meta.context.insert("plan".into(), plan.to_string());
    let where_ = write_trace_out(out, format, &trace)?;
    println!(
        "wrote {where_}: {} cycles, {} slots, {} samples",
        trace.num_cycles(),
        trace.num_cycles() as usize / SLOT_CYCLES,
        trace.samples.len()
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate_mult(
    curve: CurveArg,
    a: Option<&str>,
    b: Option<&str>,
    seed: u64,
    model: &ModelArgs,
    plan: Option<&Path>,
    out: &Path,
    format: TraceFormatArg,
) -> Result<u8, Error> {
    let field = curve.field();
    let model = model.model()?;
    let plan = load_plan(plan)?;
    let mut rng = rng_from_seed(seed);
    let a = match a {
        Some(hex) => FieldElement::from_hex(field, hex)?,
        None => FieldElement::random(field, &mut rng),
    };
    let b = match b {
        Some(hex) => FieldElement::from_hex(field, hex)?,
        None => FieldElement::random(field, &mut rng),
    };
    let mut trace = simulate_mult_trace_with_plan(&a, &b, &plan, &model, &mut rng)?;
    trace.meta.seed = Some(seed);
    trace.meta.context.insert("curve".into(), curve.name().into());
    trace.meta.context.insert("a".into(), a.to_hex());
    trace.meta.context.insert("b".into(), b.to_hex());
    trace.meta.context.insert("plan".into(), plan.to_string());
    let where_ = write_trace_out(out, format, &trace)?;
    println!("wrote {where_}: {} cycles, {} samples", trace.num_cycles(), trace.samples.len());
    Ok(0)
}

fn cmd_simulate_planted(
    slots: usize,
    position: u8,
    strength: f64,
    seed: u64,
    out: &Path,
    format: TraceFormatArg,
) -> Result<u8, Error> {
    let mut rng = rng_from_seed(seed);
    let ct = planted_collision_trace(slots, position as usize, strength, &mut rng)?;
    // Per-cycle compression squares each sample and averages; with one
    // sample per cycle, sqrt here makes the compressed trace reproduce
    // the planted values.
    let mut context = ct.meta.context.clone();
    context.insert("position".into(), position.to_string());
    let trace = Trace {
        samples: ct.values.iter().map(|v| v.sqrt()).collect(),
        samples_per_cycle: 1,
        annotations: ct.annotations,
        meta: TraceMeta { field: None, model: None, seed: Some(seed), context },
    };
    let where_ = write_trace_out(out, format, &trace)?;
    println!("wrote {where_}: {} slots, planted position {position}", slots);
    Ok(0)
}

fn summarize_separation(report: &AttackReport) {
    println!(
        "windows: {} ({} missing, {} unlabeled)",
        report.windows.len(),
        report.num_missing,
        report.num_unlabeled
    );
    match &report.separation {
        None => println!("separation: n/a (needs both labelled groups)"),
        Some(sep) => {
            println!("common:    n={} mean r={}", sep.n_common, sep.mean_common);
            println!("different: n={} mean r={}", sep.n_different, sep.mean_different);
            match (sep.welch_t, sep.p_value) {
                (Some(t), Some(p)) => println!("welch t: {t}  p: {p}"),
                _ => println!("welch t: n/a"),
            }
            println!("auc: {}", sep.auc);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_attack(
    trace_path: &Path,
    sidecar: Option<&Path>,
    position: u8,
    truncate: bool,
    out_json: Option<&Path>,
    out_csv: Option<&Path>,
    min_auc: Option<f64>,
) -> Result<u8, Error> {
    let trace = match sidecar {
        Some(sc) => read_trace_csv(trace_path, sc)?,
        None => read_trace(trace_path)?,
    };
    let mut compressed = compress(&trace)?;
    if let Some(seed) = compressed.meta.seed {
        compressed.meta.context.insert("seed".into(), seed.to_string());
    }
    let report = correlate_all(&compressed, SLOT_CYCLES, position as usize, truncate)?;
    if let Some(path) = out_json {
        fs::write(path, report.to_json()? + "\n")?;
    }
    if let Some(path) = out_csv {
        let mut buf = Vec::new();
        let field = report
            .field
            .map(|f| f.to_string())
            .unwrap_or_else(|| "unknown".into());
        let seed = compressed
            .meta
            .context
            .get("seed")
            .cloned()
            .unwrap_or_else(|| "none".into());
        use std::io::Write;
        writeln!(buf, "# field={field} position={position} slots={} seed={seed}", report.num_slots)
            .map_err(Error::Io)?;
        report.write_csv(&mut buf)?;
        fs::write(path, buf)?;
    }
    summarize_separation(&report);
    if let Some(threshold) = min_auc {
        let reached = report.separation.as_ref().is_some_and(|s| s.auc >= threshold);
        if !reached {
            eprintln!("attack negative: separation below AUC {threshold}");
            return Ok(1);
        }
    }
    Ok(0)
}

fn cmd_mult_experiment(
    curve: Option<CurveArg>,
    seed: u64,
    reps: u32,
    model_args: &ModelArgs,
    out_csv: Option<&Path>,
    out_json: Option<&Path>,
) -> Result<u8, Error> {
    let model = model_args.model()?;
    let fields: Vec<FieldId> = match curve {
        Some(c) => vec![c.field()],
        None => vec![FieldId::B233, FieldId::B283],
    };
    let mut rng = rng_from_seed(seed);
    let mut results: Vec<CollisionExperimentResult> = Vec::new();
    for field in fields {
        results.push(mult_collision_experiment(field, &model, reps, &mut rng)?);
    }
    for res in &results {
        let fmt = |m: Option<f64>| m.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
        let [k1, k2, k3, k4] = res.means();
        println!(
            "{} ({} bits): mean K1={} K2={} K3={} K4={}",
            res.field,
            res.bit_length,
            fmt(k1),
            fmt(k2),
            fmt(k3),
            fmt(k4)
        );
    }
    if let Some(path) = out_csv {
        let mut buf = Vec::new();
        use std::io::Write;
        writeln!(buf, "# seed={seed} reps={reps}").map_err(Error::Io)?;
        writeln!(buf, "repetition,k1,k2,k3,k4,bitlength").map_err(Error::Io)?;
        for res in &results {
            res.append_csv_rows(&mut buf)?;
        }
        fs::write(path, buf)?;
    }
    if let Some(path) = out_json {
        let means: Vec<serde_json::Value> = results
            .iter()
            .map(|r| {
                let [k1, k2, k3, k4] = r.means();
                serde_json::json!({
                    "field": r.field,
                    "bit_length": r.bit_length,
                    "k1": k1, "k2": k2, "k3": k3, "k4": k4,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "seed": seed,
            "repetitions": reps,
            "model": model,
            "results": results,
            "means": means,
        });
        fs::write(path, serde_json::to_string_pretty(&doc).map_err(Error::Json)? + "\n")?;
    }
    Ok(0)
}

fn run(cmd: Cmd) -> Result<u8, Error> {
    match cmd {
        Cmd::Keygen { curve, seed, out } => cmd_keygen(curve, seed, &out),
        Cmd::Sign { key, digest, seed, out, disclose_nonce } => {
            cmd_sign(&key, &digest, seed, &out, disclose_nonce)
        }
        Cmd::Verify { key, sig, digest } => cmd_verify(&key, &sig, &digest),
        Cmd::Kp { curve, k, x, y, oracle, transcript } => cmd_kp(
            curve,
            &k,
            x.as_deref(),
            y.as_deref(),
            oracle,
            transcript.as_deref(),
        ),
        Cmd::Simulate { what } => match what {
            SimulateCmd::Kp { curve, k, seed, model, plan, out, format } => {
                cmd_simulate_kp(curve, k.as_deref(), seed, &model, plan.as_deref(), &out, format)
            }
            SimulateCmd::Mult { curve, a, b, seed, model, plan, out, format } => cmd_simulate_mult(
                curve,
                a.as_deref(),
                b.as_deref(),
                seed,
                &model,
                plan.as_deref(),
                &out,
                format,
            ),
            SimulateCmd::Planted { slots, position, strength, seed, out, format } => {
                cmd_simulate_planted(slots, position, strength, seed, &out, format)
            }
        },
        Cmd::AttackHcca { trace, sidecar, position, truncate, out_json, out_csv, min_auc } => {
            cmd_attack(
                &trace,
                sidecar.as_deref(),
                position,
                truncate,
                out_json.as_deref(),
                out_csv.as_deref(),
                min_auc,
            )
        }
        Cmd::MultExperiment { curve, seed, reps, model, out_csv, out_json } => {
            cmd_mult_experiment(curve, seed, reps, &model, out_csv.as_deref(), out_json.as_deref())
        }
    }
}
