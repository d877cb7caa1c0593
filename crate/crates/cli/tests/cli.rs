//! End-to-end behaviour of the `thadc` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn thadc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thadc"))
        .args(args)
        .current_dir(root())
        .env_remove("THADC_COLOR")
        .output()
        .expect("thadc runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn satisfied_program_exits_zero() {
    let out = thadc(&["check", "corpus/io-expander.c"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn violated_program_exits_one_with_witness() {
    let out = thadc(&[
        "check",
        "--format",
        "json",
        "--no-timing",
        "corpus/accelerometer-faulty.c",
    ]);
    assert_eq!(code(&out), 1);
    let report = json(&out);
    let d24 = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["id"] == "d24")
        .expect("d24 reported");
    assert_eq!(d24["status"], "violated");
    let witness = d24["witness"].as_array().unwrap();
    assert_eq!(witness.last().unwrap()["routine"], "read");
}

#[test]
fn unresolved_request_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(
        dir.path(),
        "p.c",
        "int main(int req) {\n    ioctl(3, req, 0);\n    int fd = open(\"/dev/spidev0.0\", 2);\n    return fd;\n}\n",
    );
    let out = thadc(&["check", "--thads", "d3", &prog]);
    assert_eq!(code(&out), 3, "{}", stdout(&out));
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(code(&thadc(&["check", "--format", "yaml", "x.c"])), 2);
    assert_eq!(code(&thadc(&["check", "no-such-file.c"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let prog = write(
        dir.path(),
        "bad.c",
        "int main(void) {\n    return ;;; }\n}\n",
    );
    let out = thadc(&["check", &prog]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.c:"), "{err}");
    let spec = write(dir.path(), "bad.thad", "routine open(\ndep d1 requires\n");
    let out = thadc(&["check", "--spec", &spec, "corpus/io-expander.c"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn json_reports_are_deterministic_without_timing() {
    let args = [
        "check",
        "--format",
        "json",
        "--no-timing",
        "corpus/spidev-test.c",
    ];
    let a = thadc(&args);
    let b = thadc(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(json(&a).get("wall_time_ms").is_none());
    let timed = thadc(&["check", "--format", "json", "corpus/spidev-test.c"]);
    assert!(json(&timed).get("wall_time_ms").is_some());
}

#[test]
fn corpus_mode_matches_expected_verdicts() {
    let out = thadc(&["check", "--corpus", "corpus"]);
    assert_eq!(
        code(&out),
        0,
        "{}{}",
        stdout(&out),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unroll_records_oracle_outcome() {
    let out = thadc(&[
        "check",
        "--format",
        "json",
        "--no-timing",
        "--unroll",
        "2",
        "corpus/io-expander.c",
    ]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert!(report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e["oracle"] == true));
}

#[test]
fn annotate_writes_to_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("out.c");
    let out = thadc(&[
        "annotate",
        "--spec",
        "corpus/hal/d3.thad",
        "-o",
        dest.to_str().unwrap(),
        "corpus/hal/single-thad-hal.c",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dest).unwrap();
    assert!(text.contains("/*@ ghost int state_d3 = 0; */"), "{text}");
}

#[test]
fn annotate_wrapper_in_assert_mode() {
    let out = thadc(&["annotate", "--wrapper", "--mode", "assert"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("#include <assert.h>"));
    assert!(text.contains("__real_ioctl("));
    assert_eq!(code(&thadc(&["annotate"])), 2);
}

#[test]
fn explain_prints_a_dot_graph() {
    let out = thadc(&["explain", "--format", "dot"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("digraph thads {\n"));
    assert_eq!(text.matches(" -> ").count(), 26);
    let plain = stdout(&thadc(&["explain"]));
    assert!(plain.contains("open enables:"), "{plain}");
}

#[test]
fn color_follows_environment() {
    let run = |value: &str| {
        Command::new(env!("CARGO_BIN_EXE_thadc"))
            .args(["check", "corpus/io-expander.c"])
            .current_dir(root())
            .env("THADC_COLOR", value)
            .output()
            .unwrap()
    };
    assert!(stdout(&run("always")).contains('\x1b'));
    assert!(!stdout(&run("never")).contains('\x1b'));
}

#[test]
fn json_reports_validate_against_the_bundled_schema() {
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(root().join("schemas/report.schema.json")).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    for name in [
        "io-expander",
        "accelerometer",
        "accelerometer-faulty",
        "spidev-test",
    ] {
        let file = format!("corpus/{name}.c");
        // The path oracle is only practical on the smaller programs.
        let oracle: &[&str] = if name == "spidev-test" {
            &[]
        } else {
            &["--unroll", "1"]
        };
        for extra in [&["--no-timing"][..], oracle] {
            let mut args = vec!["check", "--format", "json"];
            args.extend_from_slice(extra);
            args.push(&file);
            let report = json(&thadc(&args));
            let errors: Vec<String> = validator
                .iter_errors(&report)
                .map(|e| e.to_string())
                .collect();
            assert!(errors.is_empty(), "{file}: {errors:?}");
        }
    }
    let bad = serde_json::json!({"tool": "thadc", "entries": []});
    assert!(!validator.is_valid(&bad));
}
