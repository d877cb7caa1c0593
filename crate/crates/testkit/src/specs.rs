//! Random valid THAD sets.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use thadc_core::model::{
    Alias, BindingSource, DescriptorBinding, Param, ParamRole, RoutinePattern, RoutineSpec, Thad,
    ThadSet,
};

fn random_routine<R: Rng>(rng: &mut R, name: String) -> RoutineSpec {
    let n = rng.gen_range(0..=3);
    let mut roles = vec![ParamRole::Descriptor, ParamRole::Discriminator];
    roles.extend(std::iter::repeat_n(ParamRole::Opaque, n));
    roles.shuffle(rng);
    let params = roles
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(i, role)| Param::new(format!("a{i}"), role))
        .collect();
    RoutineSpec::new(name, params, rng.gen_bool(0.4)).expect("generated routine is valid")
}

fn random_pattern<R: Rng>(rng: &mut R, set: &ThadSet) -> RoutinePattern {
    let r = set.routines.choose(rng).expect("at least one routine");
    let consts: Vec<&String> = set.constants.keys().collect();
    match (r.discriminator_param(), consts.choose(rng)) {
        (Some((_, p)), Some(c)) if rng.gen_bool(0.6) => {
            RoutinePattern::constrained(&r.name, &p.name, *c)
        }
        _ => RoutinePattern::plain(&r.name),
    }
}

fn random_binding<R: Rng>(rng: &mut R, set: &ThadSet, t: &Thad) -> Option<DescriptorBinding> {
    let dependent = set.routine(&t.dependent.routine)?;
    let dependency = set.routine(&t.dependency.routine)?;
    let (_, target) = dependent.descriptor_param()?;
    let mut sources = Vec::new();
    if dependency.returns_descriptor {
        sources.push(BindingSource::Return);
    }
    if let Some((_, p)) = dependency.descriptor_param() {
        sources.push(BindingSource::Param(p.name.clone()));
    }
    Some(DescriptorBinding {
        source: sources.choose(rng)?.clone(),
        target_param: target.name.clone(),
    })
}

/// A random set that passes validation: up to 5 routines, 6 constants
/// (some without values), 3 aliases and 8 THADs, some descriptor-bound.
pub fn random_thad_set<R: Rng>(rng: &mut R) -> ThadSet {
    let mut set = ThadSet::default();
    let nroutines = rng.gen_range(1..=5);
    let mut names: Vec<String> = ["open", "read", "write", "ioctl", "close", "poll", "mmap"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.shuffle(rng);
    for name in names.into_iter().take(nroutines) {
        set.routines.push(random_routine(rng, name));
    }
    let mut constants = BTreeMap::new();
    for i in 0..rng.gen_range(0..=6) {
        let value = rng
            .gen_bool(0.7)
            .then(|| rng.gen_range(-0x8000_0000_i64..=0xffff_ffff));
        constants.insert(format!("K{i}"), value);
    }
    set.constants = constants;
    let consts: Vec<String> = set.constants.keys().cloned().collect();
    if consts.len() >= 2 {
        for _ in 0..rng.gen_range(0..=3) {
            let pair: Vec<&String> = consts.choose_multiple(rng, 2).collect();
            let a = Alias {
                constant: pair[0].clone(),
                satisfies: pair[1].clone(),
            };
            if !set.aliases.contains(&a) {
                set.aliases.push(a);
            }
        }
    }
    let mut next_id = 1;
    for _ in 0..rng.gen_range(1..=8) {
        let dependent = random_pattern(rng, &set);
        let dependency = random_pattern(rng, &set);
        if dependent == dependency {
            continue;
        }
        let mut t = Thad::new(format!("d{next_id}"), dependent, dependency);
        next_id += 1;
        if rng.gen_bool(0.4) {
            if let Some(b) = random_binding(rng, &set, &t) {
                t = t.with_binding(b);
            }
        }
        set.thads.push(t);
    }
    set.validate().expect("generated set is valid");
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn generated_sets_are_valid_and_varied() {
        let sets: Vec<ThadSet> = (0..100).map(|s| random_thad_set(&mut rng(s))).collect();
        assert!(sets
            .iter()
            .any(|s| s.thads.iter().any(|t| t.binding.is_some())));
        assert!(sets.iter().any(|s| !s.aliases.is_empty()));
        assert!(sets
            .iter()
            .any(|s| s.thads.iter().any(|t| t.dependent.constraint.is_some())));
    }
}
