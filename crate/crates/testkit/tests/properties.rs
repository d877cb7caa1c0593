//! Randomised agreement between the checker, the path oracle, the spec
//! printer and the generated wrapper.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use thadc_core::annotate::{emit_wrapper, Mode};
use thadc_core::checker::{brute_force_paths, check, enumerate_paths, Status, DEFAULT_PATH_CAP};
use thadc_core::frontend::load;
use thadc_core::model::{CallEvent, Descriptor, Discriminator, ThadSet, Token};
use thadc_core::spec::{parse_thad_spec, serialize_spec, spidev, spidev_fd};
use thadc_testkit::{random_program, random_thad_set, rng, run_wrapper, ProgramShape};

/// Definite verdicts must equal the oracle's. Unbound sets must also never
/// be inconclusive on these programs, whose requests are all literal.
fn checker_agrees_with_oracle(seed: u64, set: &ThadSet, allow_inconclusive: bool) {
    let src = random_program(&mut rng(seed), ProgramShape::LOOP_FREE);
    let prog = load(&src, "gen.c", set, 16).expect("generated program loads");
    let oracle = brute_force_paths(&prog, set, 0, DEFAULT_PATH_CAP).expect("paths enumerate");
    for v in check(&prog, set) {
        if v.status == Status::Inconclusive {
            assert!(allow_inconclusive, "seed {seed} {}\n{src}", v.id);
            continue;
        }
        assert_eq!(
            v.status == Status::Satisfied,
            oracle[&v.id],
            "seed {seed} {}\n{src}",
            v.id
        );
    }
}

#[test]
fn loop_free_checker_verdicts_equal_path_enumeration() {
    let set = spidev();
    for seed in 0..150 {
        checker_agrees_with_oracle(seed, &set, false);
    }
}

#[test]
fn loop_free_bound_verdicts_equal_path_enumeration() {
    let set = spidev_fd();
    for seed in 1_000..1_100 {
        checker_agrees_with_oracle(seed, &set, true);
    }
}

#[test]
fn satisfied_loops_are_never_refuted_by_unrolling() {
    for set in [spidev(), spidev_fd()] {
        for seed in 10_000..10_050 {
            let src = random_program(&mut rng(seed), ProgramShape::ONE_LOOP);
            let prog = load(&src, "gen.c", &set, 16).unwrap();
            let verdicts = check(&prog, &set);
            for k in 1..=3 {
                let oracle = brute_force_paths(&prog, &set, k, DEFAULT_PATH_CAP).unwrap();
                for v in verdicts.iter().filter(|v| v.status == Status::Satisfied) {
                    assert!(oracle[&v.id], "seed {seed} {} unroll {k}\n{src}", v.id);
                }
            }
        }
    }
}

#[test]
fn wrapper_asserts_fail_exactly_on_violating_program_paths() {
    let single_open = ProgramShape {
        max_opens: 1,
        ..ProgramShape::LOOP_FREE
    };
    for (set, shape) in [
        (spidev(), ProgramShape::LOOP_FREE),
        (spidev_fd(), single_open),
    ] {
        let wrapper = emit_wrapper(&set, Mode::Assert);
        for seed in 20_000..20_040 {
            let src = random_program(&mut rng(seed), shape);
            let prog = load(&src, "gen.c", &set, 16).unwrap();
            enumerate_paths(&prog, &set, 0, DEFAULT_PATH_CAP, |p| {
                let failed = run_wrapper(&set, &wrapper, &p.events).unwrap();
                for t in &set.thads {
                    assert_eq!(
                        set.trace_satisfies(t, &p.events),
                        !failed.contains(&t.id),
                        "seed {seed} {} on {:?}",
                        t.id,
                        p.events
                    );
                }
            })
            .unwrap();
        }
    }
}

/// Give every constant a distinct value so the wrapper's integer
/// comparisons coincide with comparisons by name.
fn with_distinct_values(mut set: ThadSet) -> ThadSet {
    for (i, v) in set.constants.values_mut().enumerate() {
        *v = Some(100 + i as i64);
    }
    set
}

/// A random trace over `set` using a single descriptor token, so one
/// descriptor ghost per THAD suffices. Routines that feed a descriptor
/// binding always carry that token: the ghost keeps only the last value.
fn random_trace<R: Rng>(rng: &mut R, set: &ThadSet) -> Vec<CallEvent> {
    let consts: Vec<String> = set.constants.keys().cloned().collect();
    let tok = Token(1);
    let binding_sources: Vec<&str> = set
        .thads
        .iter()
        .filter(|t| t.binding.is_some())
        .map(|t| t.dependency.routine.as_str())
        .collect();
    (0..rng.gen_range(0..10))
        .map(|_| {
            let r = set.routines.choose(rng).unwrap();
            let mut ev = CallEvent::new(&r.name);
            if r.descriptor_param().is_some() {
                let feeds_binding = binding_sources.contains(&r.name.as_str());
                ev.descriptor = Some(if feeds_binding || rng.gen_bool(0.8) {
                    Descriptor::Token(tok)
                } else {
                    Descriptor::Unknown
                });
            }
            if r.discriminator_param().is_some() {
                ev.discriminator = Some(match rng.gen_range(0..10) {
                    0 => Discriminator::Unknown,
                    1 => Discriminator::Value(7),
                    _ => match consts.choose(rng) {
                        Some(c) => Discriminator::Named(c.clone()),
                        None => Discriminator::Value(7),
                    },
                });
            }
            if r.returns_descriptor {
                ev.produced = Some(tok);
            }
            ev
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spec_text_round_trips(seed in any::<u64>()) {
        let set = random_thad_set(&mut rng(seed));
        let text = serialize_spec(&set);
        let parsed = parse_thad_spec(&text).expect("serialized spec parses");
        prop_assert_eq!(&parsed, &set, "{}", text);
        prop_assert_eq!(serialize_spec(&parsed), text);
    }

    #[test]
    fn wrapper_asserts_fail_exactly_on_violating_traces(seed in any::<u64>()) {
        let mut r = rng(seed);
        let set = with_distinct_values(random_thad_set(&mut r));
        let wrapper = emit_wrapper(&set, Mode::Assert);
        for _ in 0..20 {
            let trace = random_trace(&mut r, &set);
            let failed = run_wrapper(&set, &wrapper, &trace).expect("wrapper runs");
            let expected: BTreeMap<String, bool> = set
                .thads
                .iter()
                .map(|t| (t.id.clone(), !set.trace_satisfies(t, &trace)))
                .collect();
            for (id, violated) in expected {
                prop_assert_eq!(failed.contains(&id), violated, "{} on {:?}\n{}", id, trace, wrapper);
            }
        }
    }
}
