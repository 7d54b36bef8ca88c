//! Behavioral tests of the command-line surface: exit-code contract,
//! output formats, and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hccalab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn keygen_sign_verify_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["keygen", "--curve", "b233", "--seed", "7", "--out", "key.txt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(
        d,
        &["sign", "--key", "key.txt", "--digest", "a1b2c3d4", "--seed", "9", "--out", "sig.txt"],
    );
    assert_eq!(code(&out), 0);
    let out = run(d, &["verify", "--key", "key.txt", "--sig", "sig.txt", "--digest", "a1b2c3d4"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "VALID");

    // Tampered digest: INVALID and exit 1.
    let out = run(d, &["verify", "--key", "key.txt", "--sig", "sig.txt", "--digest", "a1b2c3d5"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout(&out).trim(), "INVALID");
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["k1.txt", "k2.txt"] {
        let out = run(d, &["keygen", "--curve", "b283", "--seed", "42", "--out", name]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(fs::read(d.join("k1.txt")).unwrap(), fs::read(d.join("k2.txt")).unwrap());
    for name in ["s1.txt", "s2.txt"] {
        let out = run(
            d,
            &["sign", "--key", "k1.txt", "--digest", "ff00ff00", "--seed", "5", "--out", name],
        );
        assert_eq!(code(&out), 0);
    }
    assert_eq!(fs::read(d.join("s1.txt")).unwrap(), fs::read(d.join("s2.txt")).unwrap());
}

#[test]
fn signature_files_are_scoped_to_their_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["keygen", "--curve", "b233", "--seed", "1", "--out", "k233.txt"]);
    run(d, &["keygen", "--curve", "b283", "--seed", "1", "--out", "k283.txt"]);
    run(d, &["sign", "--key", "k233.txt", "--digest", "aa", "--seed", "2", "--out", "sig.txt"]);
    let out = run(d, &["verify", "--key", "k283.txt", "--sig", "sig.txt", "--digest", "aa"]);
    assert_eq!(code(&out), 2, "curve mismatch is a usage error");
}

#[test]
fn sign_requires_private_key_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["keygen", "--curve", "b233", "--seed", "3", "--out", "key.txt"]);
    let text = fs::read_to_string(d.join("key.txt")).unwrap();
    let public_only: String = text.lines().filter(|l| !l.starts_with("d:")).collect::<Vec<_>>().join("\n");
    fs::write(d.join("pub.txt"), public_only).unwrap();
    let out = run(d, &["sign", "--key", "pub.txt", "--digest", "aa", "--seed", "4", "--out", "x"]);
    assert_eq!(code(&out), 2);
    // The stripped file still verifies.
    run(d, &["sign", "--key", "key.txt", "--digest", "aa", "--seed", "4", "--out", "sig.txt"]);
    let out = run(d, &["verify", "--key", "pub.txt", "--sig", "sig.txt", "--digest", "aa"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn verify_rejects_corrupt_signature_components() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["keygen", "--curve", "b233", "--seed", "8", "--out", "key.txt"]);
    run(d, &["sign", "--key", "key.txt", "--digest", "0abc", "--seed", "2", "--out", "sig.txt"]);

    // r beyond the group order: INVALID, not a crash or usage error.
    let text = fs::read_to_string(d.join("sig.txt")).unwrap();
    let oversize = text
        .lines()
        .map(|l| {
            if l.starts_with("r:") {
                "r: ffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(d.join("bad.txt"), oversize).unwrap();
    let out = run(d, &["verify", "--key", "key.txt", "--sig", "bad.txt", "--digest", "0abc"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout(&out).trim(), "INVALID");

    // Missing s line: malformed file, usage error.
    let missing = text
        .lines()
        .filter(|l| !l.starts_with("s:"))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(d.join("missing.txt"), missing).unwrap();
    let out = run(d, &["verify", "--key", "key.txt", "--sig", "missing.txt", "--digest", "0abc"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn kp_prints_generator_for_one_and_infinity_for_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["kp", "--curve", "b233", "--k", "1", "--oracle"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let params = hccalab::curve::CurveParams::builtin(hccalab::gf2m::FieldId::B233);
    let (gx, gy) = params.generator.xy().unwrap();
    assert!(text.contains(&format!("x: {}", gx.to_hex())));
    assert!(text.contains(&format!("y: {}", gy.to_hex())));
    assert!(text.contains("oracle: match"));

    let out = run(d, &["kp", "--curve", "b283", "--k", "0"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("INFINITY"));
}

#[test]
fn kp_oracle_agrees_on_random_scalars() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (curve, k) in [
        ("b233", "3a91c2f4e8d1"),
        ("b283", "f0e1d2c3b4a5968778695a4b3c2d1e0f"),
        ("b233", "ffffffffffffffffffffffffffffff"),
    ] {
        let out = run(d, &["kp", "--curve", curve, "--k", k, "--oracle"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("oracle: match"));
    }
}

#[test]
fn kp_transcript_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["kp", "--curve", "b233", "--k", "b5", "--transcript", "tr.txt"]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(d.join("tr.txt")).unwrap();
    assert!(text.contains("scalar_bits: 8"));
    // 8-bit scalar: 7 slots after the top bit.
    assert_eq!(text.lines().filter(|l| l.starts_with("slot ")).count(), 7);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Unknown curve value.
    assert_eq!(code(&run(d, &["kp", "--curve", "b163", "--k", "1"])), 2);
    // Bad scalar hex.
    assert_eq!(code(&run(d, &["kp", "--curve", "b233", "--k", "xyz"])), 2);
    // --x without --y.
    assert_eq!(code(&run(d, &["kp", "--curve", "b233", "--k", "1", "--x", "0"])), 2);
    // Attack position outside 1..=6.
    for pos in ["0", "7"] {
        let out = run(d, &["attack-hcca", "--trace", "t.hct1", "--position", pos]);
        assert_eq!(code(&out), 2, "position {pos}");
    }
    // Unknown subcommand.
    assert_eq!(code(&run(d, &["frobnicate"])), 2);
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Missing trace file.
    let out = run(d, &["attack-hcca", "--trace", "nope.hct1", "--position", "3"]);
    assert_eq!(code(&out), 3);
    // Corrupt trace file.
    fs::write(d.join("junk.hct1"), b"this is not a trace").unwrap();
    let out = run(d, &["attack-hcca", "--trace", "junk.hct1", "--position", "3"]);
    assert_eq!(code(&out), 3);
    // Trace whose length is not slot-aligned.
    let out = run(
        d,
        &["simulate", "mult", "--curve", "b233", "--seed", "1", "--samples-per-cycle", "4", "--out", "m.hct1"],
    );
    assert_eq!(code(&out), 0);
    let out = run(d, &["attack-hcca", "--trace", "m.hct1", "--position", "3"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn simulate_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = [
        "simulate", "kp", "--curve", "b233", "--k", "1d7", "--seed", "6",
        "--samples-per-cycle", "3",
    ];
    let mut bin_args = common.to_vec();
    bin_args.extend(["--out", "t.hct1"]);
    assert_eq!(code(&run(d, &bin_args)), 0);
    let mut csv_args = common.to_vec();
    csv_args.extend(["--out", "t.csv", "--format", "csv"]);
    assert_eq!(code(&run(d, &csv_args)), 0);

    let from_bin = hccalab::trace_io::read_trace(d.join("t.hct1")).unwrap();
    let from_csv = hccalab::trace_io::read_trace_csv(d.join("t.csv"), d.join("t.json")).unwrap();
    assert_eq!(from_bin, from_csv);
    assert_eq!(from_bin.meta.seed, Some(6));
    assert_eq!(from_bin.meta.context.get("k").map(String::as_str), Some("1d7"));

    // The attack accepts both representations and agrees with itself.
    let out_b = run(
        d,
        &["attack-hcca", "--trace", "t.hct1", "--position", "3", "--out-csv", "rb.csv"],
    );
    assert_eq!(code(&out_b), 0);
    let out_c = run(
        d,
        &[
            "attack-hcca", "--trace", "t.csv", "--sidecar", "t.json", "--position", "3",
            "--out-csv", "rc.csv",
        ],
    );
    assert_eq!(code(&out_c), 0);
    assert_eq!(fs::read(d.join("rb.csv")).unwrap(), fs::read(d.join("rc.csv")).unwrap());
}

#[test]
fn simulate_rejects_bad_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(
        d,
        &[
            "simulate", "mult", "--curve", "b233", "--seed", "1", "--alpha", "0", "--beta", "0",
            "--gamma", "0", "--out", "t.hct1",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn planted_attack_separates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(
        d,
        &["simulate", "planted", "--seed", "5", "--slots", "64", "--out", "p.hct1"],
    );
    assert_eq!(code(&out), 0);
    let out = run(
        d,
        &["attack-hcca", "--trace", "p.hct1", "--position", "3", "--min-auc", "0.99"],
    );
    assert_eq!(code(&out), 0, "planted separation under 0.99 AUC");
    // An impossible threshold flips the exit code to attack-negative.
    let out = run(
        d,
        &["attack-hcca", "--trace", "p.hct1", "--position", "3", "--min-auc", "1.01"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn experiment_single_curve_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(
        d,
        &[
            "mult-experiment", "--curve", "b283", "--seed", "13", "--reps", "5",
            "--samples-per-cycle", "9", "--out-csv", "e.csv", "--out-json", "e.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(d.join("e.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",283")));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("e.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 13);
    assert_eq!(json["results"].as_array().unwrap().len(), 1);
}
