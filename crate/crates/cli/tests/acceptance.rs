//! Acceptance suite: one PASS/FAIL line per criterion, with the pinned
//! tolerance in the line. Runs sequentially (no libtest harness) so the
//! timing bounds are not distorted by concurrent tests.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use thadc_core::annotate::{
    emit_annotated_source, emit_wrapper, plan_annotations, EmitOptions, Mode,
};
use thadc_core::checker::{brute_force_paths, check, enumerate_paths, Status, DEFAULT_PATH_CAP};
use thadc_core::frontend::{load, parse_program, ResolvedProgram};
use thadc_core::model::ThadSet;
use thadc_core::report::Report;
use thadc_core::spec::{parse_thad_spec, serialize_spec, spidev, spidev_fd};
use thadc_testkit::{random_program, random_thad_set, rng, run_wrapper, ProgramShape};

const PER_PROGRAM_BOUND: Duration = Duration::from_secs(1);
const RANDOM_SUITE_BOUND: Duration = Duration::from_secs(60);
const LOOP_FREE_PROGRAMS: u64 = 500;
const LOOP_PROGRAMS: u64 = 100;
const RANDOM_SETS: u64 = 100;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(root().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

type Outcome = Result<String, String>;

/// Check a corpus program the way `thadc check` does: directives select
/// the relevant THADs and add aliases.
fn check_corpus(name: &str) -> Result<(Report, Duration), String> {
    let start = Instant::now();
    let file = format!("corpus/{name}.c");
    let src = read(&file);
    let model = parse_program(&src, &file).map_err(|e| e.render(&file))?;
    let set = model.directives.apply(&spidev())?;
    let cfg = model.inline(16).map_err(|e| e.render(&file))?;
    let prog = ResolvedProgram::new(&file, cfg, &set);
    let report = Report::new("spidev", &file, &set, &check(&prog, &set));
    Ok((report, start.elapsed()))
}

fn relevance_matrix() -> Outcome {
    let expected: [(&str, &[&str], &[&str]); 3] = [
        ("io-expander", &["d3", "d4", "d14", "d26"], &[]),
        (
            "accelerometer",
            &["d3", "d4", "d8", "d14", "d17", "d26"],
            &["d8", "d17"],
        ),
        (
            "spidev-test",
            &[
                "d3", "d4", "d7", "d8", "d11", "d12", "d13", "d14", "d17", "d23", "d26",
            ],
            &[],
        ),
    ];
    let mut notes = Vec::new();
    for (name, ids, aliased) in expected {
        let (report, took) = check_corpus(name)?;
        let checked: BTreeSet<&str> = report
            .entries
            .iter()
            .filter(|e| !e.trivial)
            .map(|e| e.id.as_str())
            .collect();
        let want: BTreeSet<&str> = ids.iter().copied().collect();
        if checked != want {
            return Err(format!(
                "{name}: non-trivially checked {checked:?}, expected {want:?}"
            ));
        }
        if let Some(e) = report
            .entries
            .iter()
            .find(|e| !e.trivial && e.status != Status::Satisfied)
        {
            return Err(format!("{name}: {} is {}", e.id, e.status));
        }
        let via: BTreeSet<&str> = report
            .entries
            .iter()
            .filter(|e| !e.via_alias.is_empty())
            .map(|e| e.id.as_str())
            .collect();
        if via != aliased.iter().copied().collect() {
            return Err(format!(
                "{name}: alias-satisfied {via:?}, expected {aliased:?}"
            ));
        }
        if report.exit_code() != 0 {
            return Err(format!("{name}: exit {}", report.exit_code()));
        }
        if took >= PER_PROGRAM_BOUND {
            return Err(format!("{name}: {took:?}"));
        }
        notes.push(format!("{name} {} ms", took.as_millis()));
    }
    Ok(notes.join(", "))
}

fn faulty_variant() -> Outcome {
    let (report, took) = check_corpus("accelerometer-faulty")?;
    let d24 = report
        .entries
        .iter()
        .find(|e| e.id == "d24")
        .ok_or("d24 not reported")?;
    if d24.status != Status::Violated {
        return Err(format!("d24 is {}", d24.status));
    }
    let last = d24
        .witness
        .as_ref()
        .and_then(|w| w.last())
        .ok_or("d24 has no witness")?;
    if last.routine != "read" {
        return Err(format!("witness ends at `{}`", last.routine));
    }
    if took >= PER_PROGRAM_BOUND {
        return Err(format!("took {took:?}"));
    }
    Ok(format!(
        "witness ends at {} in {} ms",
        last.location,
        took.as_millis()
    ))
}

/// Whitespace-insensitive C tokens, comment delimiters split into
/// punctuation.
fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn annotation_fidelity() -> Outcome {
    for (spec, hal) in [
        ("d3.thad", "single-thad-hal.c"),
        ("d1-d8-d15.thad", "thad-set-hal.c"),
    ] {
        let set = parse_thad_spec(&read(&format!("corpus/hal/{spec}")))
            .map_err(|d| format!("{spec}: {d:?}"))?;
        let out = emit_annotated_source(
            &plan_annotations(&set),
            &set,
            &read(&format!("corpus/hal/{hal}")),
            Mode::Acsl,
            EmitOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let want = read(&format!("corpus/hal/expected/{hal}"));
        let (got, want) = (tokens(&out.text), tokens(&want));
        if got != want {
            let at = got
                .iter()
                .zip(&want)
                .position(|(a, b)| a != b)
                .unwrap_or(got.len().min(want.len()));
            return Err(format!("{hal}: first token difference at {at}"));
        }
    }
    Ok("both references token-equal".into())
}

fn oracle_equivalence() -> Outcome {
    let set = spidev();
    let start = Instant::now();
    let mut verdicts = 0;
    for seed in 0..LOOP_FREE_PROGRAMS {
        let src = random_program(&mut rng(seed), ProgramShape::LOOP_FREE);
        let prog = load(&src, "gen.c", &set, 16).map_err(|e| format!("seed {seed}: {e}"))?;
        let oracle =
            brute_force_paths(&prog, &set, 0, DEFAULT_PATH_CAP).map_err(|e| e.to_string())?;
        for v in check(&prog, &set) {
            verdicts += 1;
            let agrees = match v.status {
                Status::Satisfied => oracle[&v.id],
                Status::Violated => !oracle[&v.id],
                Status::Inconclusive => false,
            };
            if !agrees {
                return Err(format!(
                    "seed {seed} {}: {} vs oracle {}",
                    v.id, v.status, oracle[&v.id]
                ));
            }
        }
    }
    let took = start.elapsed();
    if took >= RANDOM_SUITE_BOUND {
        return Err(format!("took {took:?}"));
    }
    Ok(format!(
        "{LOOP_FREE_PROGRAMS} programs, {verdicts} verdicts, 100% agreement in {:.1} s",
        took.as_secs_f64()
    ))
}

/// The bound set uses programs with a single `open`: the wrapper keeps one
/// descriptor ghost per THAD.
fn wrapper_correctness() -> Outcome {
    let single_open = ProgramShape {
        max_opens: 1,
        ..ProgramShape::LOOP_FREE
    };
    let suites: [(ThadSet, ProgramShape); 2] = [
        (spidev(), ProgramShape::LOOP_FREE),
        (spidev_fd(), single_open),
    ];
    let mut paths = 0;
    let mut failure = None;
    for (set, shape) in suites {
        let wrapper = emit_wrapper(&set, Mode::Assert);
        for seed in 0..LOOP_FREE_PROGRAMS {
            let src = random_program(&mut rng(seed), shape);
            let prog = load(&src, "gen.c", &set, 16).map_err(|e| format!("seed {seed}: {e}"))?;
            enumerate_paths(&prog, &set, 0, DEFAULT_PATH_CAP, |p| {
                paths += 1;
                if failure.is_some() {
                    return;
                }
                match run_wrapper(&set, &wrapper, &p.events) {
                    Ok(failed) => {
                        if let Some(t) = set
                            .thads
                            .iter()
                            .find(|t| set.trace_satisfies(t, &p.events) == failed.contains(&t.id))
                        {
                            failure = Some(format!("seed {seed} {} on {:?}", t.id, p.events));
                        }
                    }
                    Err(e) => failure = Some(format!("seed {seed}: {e}")),
                }
            })
            .map_err(|e| e.to_string())?;
        }
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(format!(
            "{paths} paths, unbound and descriptor-bound sets, 100% agreement"
        )),
    }
}

fn loop_soundness() -> Outcome {
    let mut satisfied = 0;
    for set in [spidev(), spidev_fd()] {
        for seed in 0..LOOP_PROGRAMS {
            let src = random_program(&mut rng(10_000 + seed), ProgramShape::ONE_LOOP);
            let prog = load(&src, "gen.c", &set, 16).map_err(|e| format!("seed {seed}: {e}"))?;
            let verdicts = check(&prog, &set);
            for k in 1..=3 {
                let oracle = brute_force_paths(&prog, &set, k, DEFAULT_PATH_CAP)
                    .map_err(|e| e.to_string())?;
                for v in verdicts.iter().filter(|v| v.status == Status::Satisfied) {
                    if k == 1 {
                        satisfied += 1;
                    }
                    if !oracle[&v.id] {
                        return Err(format!("seed {seed} {} refuted at unroll {k}", v.id));
                    }
                }
            }
        }
    }
    Ok(format!(
        "{LOOP_PROGRAMS} programs x 2 sets, {satisfied} satisfied verdicts, 0 contradictions"
    ))
}

const SPIDEV_PAIRS: [(&str, &str); 26] = [
    ("open", "read"),
    ("open", "write"),
    ("open", "ioctl[request=MSG]"),
    ("open", "close"),
    ("open", "ioctl[request=RD_MODE]"),
    ("open", "ioctl[request=WR_MODE]"),
    ("open", "ioctl[request=RD_MODE32]"),
    ("open", "ioctl[request=WR_MODE32]"),
    ("open", "ioctl[request=RD_LSB_FIRST]"),
    ("open", "ioctl[request=WR_LSB_FIRST]"),
    ("open", "ioctl[request=RD_BITS_PER_WORD]"),
    ("open", "ioctl[request=WR_BITS_PER_WORD]"),
    ("open", "ioctl[request=RD_MAX_SPEED_HZ]"),
    ("open", "ioctl[request=WR_MAX_SPEED_HZ]"),
    ("ioctl[request=WR_MODE32]", "read"),
    ("ioctl[request=WR_MODE32]", "write"),
    ("ioctl[request=WR_MODE32]", "ioctl[request=MSG]"),
    ("ioctl[request=WR_LSB_FIRST]", "read"),
    ("ioctl[request=WR_LSB_FIRST]", "write"),
    ("ioctl[request=WR_LSB_FIRST]", "ioctl[request=MSG]"),
    ("ioctl[request=WR_BITS_PER_WORD]", "read"),
    ("ioctl[request=WR_BITS_PER_WORD]", "write"),
    ("ioctl[request=WR_BITS_PER_WORD]", "ioctl[request=MSG]"),
    ("ioctl[request=WR_MAX_SPEED_HZ]", "read"),
    ("ioctl[request=WR_MAX_SPEED_HZ]", "write"),
    ("ioctl[request=WR_MAX_SPEED_HZ]", "ioctl[request=MSG]"),
];

fn spec_round_trip() -> Outcome {
    for seed in 0..RANDOM_SETS {
        let set = random_thad_set(&mut rng(30_000 + seed));
        let text = serialize_spec(&set);
        match parse_thad_spec(&text) {
            Ok(back) if back == set => {}
            Ok(_) => return Err(format!("seed {seed}: round trip changed the set")),
            Err(d) => return Err(format!("seed {seed}: {d:?}")),
        }
    }
    let bundled = spidev();
    let pairs: Vec<(String, String)> = bundled
        .thads
        .iter()
        .map(|t| (t.dependency.to_string(), t.dependent.to_string()))
        .collect();
    let want: Vec<(String, String)> = SPIDEV_PAIRS
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    if pairs != want {
        return Err(format!("bundled pairs differ: {pairs:?}"));
    }
    Ok(format!(
        "{RANDOM_SETS} sets round-trip, bundled spec has {} THADs",
        bundled.thads.len()
    ))
}

fn determinism() -> Outcome {
    let run = |file: &str| {
        Command::new(env!("CARGO_BIN_EXE_thadc"))
            .args(["check", "--format", "json", "--no-timing", file])
            .current_dir(root())
            .output()
            .map_err(|e| e.to_string())
    };
    let names = [
        "io-expander",
        "accelerometer",
        "accelerometer-faulty",
        "spidev-test",
    ];
    for name in names {
        let file = format!("corpus/{name}.c");
        let (a, b) = (run(&file)?, run(&file)?);
        if a.stdout.is_empty() || a.stdout != b.stdout {
            return Err(format!("{file}: reports differ"));
        }
    }
    Ok(format!("{} corpus files byte-identical", names.len()))
}

/// Name, pinned tolerance, check.
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "relevance matrix",
            "exact sets, < 1 s per program",
            relevance_matrix,
        ),
        (
            "faulty variant",
            "d24 violated at read, < 1 s",
            faulty_variant,
        ),
        ("annotation fidelity", "token equality", annotation_fidelity),
        (
            "oracle equivalence",
            "100% of verdicts, < 60 s",
            oracle_equivalence,
        ),
        ("wrapper correctness", "100% of paths", wrapper_correctness),
        (
            "loop soundness",
            "0 contradictions at unroll 1-3",
            loop_soundness,
        ),
        (
            "spec round trip",
            "identity, 26 bundled THADs",
            spec_round_trip,
        ),
        ("determinism", "byte-identical JSON", determinism),
    ];
    let mut failed = 0;
    for (i, (name, tolerance, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {tag} {name} [{tolerance}] {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
