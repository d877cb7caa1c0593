//! Temporal HAL-API dependencies, call events and the reference trace
//! semantics.
//!
//! A [`Thad`] states that every call matching its *dependent* pattern must be
//! preceded by a call matching its *dependency* pattern. When the THAD carries
//! a [`DescriptorBinding`], the earlier call must also involve the same
//! descriptor token as the later one. [`trace_satisfies`] is the executable
//! definition of this relation; every other component is tested against it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("routine `{routine}` declares more than one {role} parameter")]
    DuplicateRole { routine: String, role: ParamRole },
    #[error("routine `{routine}` declares parameter `{param}` twice")]
    DuplicateParam { routine: String, param: String },
    #[error("routine `{0}` is declared twice")]
    DuplicateRoutine(String),
    #[error("dependency id `{0}` is declared twice")]
    DuplicateId(String),
    #[error("unknown routine `{0}`")]
    UnknownRoutine(String),
    #[error("routine `{routine}` has no parameter `{param}`")]
    UnknownParam { routine: String, param: String },
    #[error("parameter `{routine}.{param}` must have role {expected}")]
    WrongRole {
        routine: String,
        param: String,
        expected: ParamRole,
    },
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("`{0}` depends on itself")]
    SelfDependency(String),
    #[error("routine `{0}` does not return a descriptor")]
    NoReturnedDescriptor(String),
    #[error("binding of `{id}` names `{found}` but the dependency routine is `{expected}`")]
    BindingMismatch {
        id: String,
        expected: String,
        found: String,
    },
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

fn check_ident(s: &str) -> Result<(), ModelError> {
    if is_identifier(s) {
        Ok(())
    } else {
        Err(ModelError::InvalidIdentifier(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamRole {
    Descriptor,
    Discriminator,
    Opaque,
}

impl fmt::Display for ParamRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamRole::Descriptor => "descriptor",
            ParamRole::Discriminator => "discriminator",
            ParamRole::Opaque => "opaque",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub role: ParamRole,
}

impl Param {
    pub fn new(name: impl Into<String>, role: ParamRole) -> Self {
        Param {
            name: name.into(),
            role,
        }
    }
}

/// A HAL-API routine: its name and the roles of its positional parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutineSpec {
    pub name: String,
    pub params: Vec<Param>,
    pub returns_descriptor: bool,
}

impl RoutineSpec {
    pub fn new(
        name: impl Into<String>,
        params: Vec<Param>,
        returns_descriptor: bool,
    ) -> Result<Self, ModelError> {
        let spec = RoutineSpec {
            name: name.into(),
            params,
            returns_descriptor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_ident(&self.name)?;
        let mut seen = Vec::new();
        for p in &self.params {
            check_ident(&p.name)?;
            if seen.contains(&p.name.as_str()) {
                return Err(ModelError::DuplicateParam {
                    routine: self.name.clone(),
                    param: p.name.clone(),
                });
            }
            seen.push(&p.name);
        }
        for role in [ParamRole::Descriptor, ParamRole::Discriminator] {
            if self.params.iter().filter(|p| p.role == role).count() > 1 {
                return Err(ModelError::DuplicateRole {
                    routine: self.name.clone(),
                    role,
                });
            }
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<(usize, &Param)> {
        self.params.iter().enumerate().find(|(_, p)| p.name == name)
    }

    pub fn descriptor_param(&self) -> Option<(usize, &Param)> {
        self.params
            .iter()
            .enumerate()
            .find(|(_, p)| p.role == ParamRole::Descriptor)
    }

    pub fn discriminator_param(&self) -> Option<(usize, &Param)> {
        self.params
            .iter()
            .enumerate()
            .find(|(_, p)| p.role == ParamRole::Discriminator)
    }
}

/// `param = CONST` restriction on a routine pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Constraint {
    pub param: String,
    pub constant: String,
}

/// A routine name optionally narrowed by a discriminator constant, e.g.
/// `ioctl[request=MSG]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoutinePattern {
    pub routine: String,
    pub constraint: Option<Constraint>,
}

impl RoutinePattern {
    pub fn plain(routine: impl Into<String>) -> Self {
        RoutinePattern {
            routine: routine.into(),
            constraint: None,
        }
    }

    pub fn constrained(
        routine: impl Into<String>,
        param: impl Into<String>,
        constant: impl Into<String>,
    ) -> Self {
        RoutinePattern {
            routine: routine.into(),
            constraint: Some(Constraint {
                param: param.into(),
                constant: constant.into(),
            }),
        }
    }

    pub fn constant(&self) -> Option<&str> {
        self.constraint.as_ref().map(|c| c.constant.as_str())
    }
}

impl fmt::Display for RoutinePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.constraint {
            None => f.write_str(&self.routine),
            Some(c) => write!(f, "{}[{}={}]", self.routine, c.param, c.constant),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingSource {
    /// The descriptor returned by the dependency call.
    Return,
    /// The descriptor passed to the dependency call through this parameter.
    Param(String),
}

/// Requires the dependency call to involve the same descriptor that the
/// dependent call receives through `target_param`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DescriptorBinding {
    pub source: BindingSource,
    pub target_param: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thad {
    pub id: String,
    pub dependent: RoutinePattern,
    pub dependency: RoutinePattern,
    pub binding: Option<DescriptorBinding>,
}

impl Thad {
    pub fn new(
        id: impl Into<String>,
        dependent: RoutinePattern,
        dependency: RoutinePattern,
    ) -> Self {
        Thad {
            id: id.into(),
            dependent,
            dependency,
            binding: None,
        }
    }

    pub fn with_binding(mut self, binding: DescriptorBinding) -> Self {
        self.binding = Some(binding);
        self
    }

    /// Token carried from a dependency-matching event to the binding check.
    pub fn source_token(&self, ev: &CallEvent) -> Option<Token> {
        match self.binding.as_ref()?.source {
            BindingSource::Return => ev.produced,
            BindingSource::Param(_) => ev.descriptor.and_then(Descriptor::token),
        }
    }
}

/// `alias WR_MODE satisfies WR_MODE32`: a call discriminated by `constant`
/// counts wherever a pattern is constrained to `satisfies`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alias {
    pub constant: String,
    pub satisfies: String,
}

/// Identity of one abstract descriptor value (one `open`-like call site, or
/// one dynamic execution of it when interpreting a path).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token(pub u32);

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discriminator {
    /// Resolved to a value that the constants table names.
    Named(String),
    /// Resolved to an integer no declared constant carries.
    Value(i64),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descriptor {
    Token(Token),
    Unknown,
}

impl Descriptor {
    pub fn token(self) -> Option<Token> {
        match self {
            Descriptor::Token(t) => Some(t),
            Descriptor::Unknown => None,
        }
    }
}

/// One HAL call as seen by the trace semantics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallEvent {
    pub routine: String,
    pub discriminator: Option<Discriminator>,
    pub descriptor: Option<Descriptor>,
    pub produced: Option<Token>,
}

impl CallEvent {
    pub fn new(routine: impl Into<String>) -> Self {
        CallEvent {
            routine: routine.into(),
            discriminator: None,
            descriptor: None,
            produced: None,
        }
    }

    pub fn with_constant(mut self, constant: impl Into<String>) -> Self {
        self.discriminator = Some(Discriminator::Named(constant.into()));
        self
    }

    pub fn with_descriptor(mut self, token: Token) -> Self {
        self.descriptor = Some(Descriptor::Token(token));
        self
    }

    pub fn producing(mut self, token: Token) -> Self {
        self.produced = Some(token);
        self
    }

    pub fn descriptor_token(&self) -> Option<Token> {
        self.descriptor.and_then(Descriptor::token)
    }

    pub fn constant(&self) -> Option<&str> {
        match &self.discriminator {
            Some(Discriminator::Named(c)) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for CallEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.routine)?;
        let mut args = Vec::new();
        match self.descriptor {
            Some(Descriptor::Token(t)) => args.push(t.to_string()),
            Some(Descriptor::Unknown) => args.push("?".into()),
            None => {}
        }
        match &self.discriminator {
            Some(Discriminator::Named(c)) => args.push(c.clone()),
            Some(Discriminator::Value(v)) => args.push(v.to_string()),
            Some(Discriminator::Unknown) => args.push("?".into()),
            None => {}
        }
        write!(f, "({})", args.join(", "))?;
        if let Some(t) = self.produced {
            write!(f, " -> {t}")?;
        }
        Ok(())
    }
}

/// Three-valued outcome of matching a pattern against an event whose
/// discriminator may be unresolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Match {
    Yes,
    No,
    Maybe,
}

/// Pure name/constant match without aliases.
pub fn match_event(pattern: &RoutinePattern, ev: &CallEvent) -> bool {
    matches!(match_with(pattern, ev, &[]), Match::Yes)
}

fn match_with(pattern: &RoutinePattern, ev: &CallEvent, aliases: &[Alias]) -> Match {
    if pattern.routine != ev.routine {
        return Match::No;
    }
    let Some(c) = &pattern.constraint else {
        return Match::Yes;
    };
    match &ev.discriminator {
        Some(Discriminator::Named(name)) => {
            let aliased = aliases
                .iter()
                .any(|a| &a.constant == name && a.satisfies == c.constant);
            if *name == c.constant || aliased {
                Match::Yes
            } else {
                Match::No
            }
        }
        Some(Discriminator::Unknown) => Match::Maybe,
        Some(Discriminator::Value(_)) | None => Match::No,
    }
}

/// Reference semantics: every dependent call has an earlier dependency call
/// (carrying the same descriptor token when the THAD is bound). Unresolved
/// discriminators never match.
pub fn trace_satisfies(thad: &Thad, trace: &[CallEvent]) -> bool {
    first_violation(thad, trace, &[]).is_none()
}

fn first_violation(thad: &Thad, trace: &[CallEvent], aliases: &[Alias]) -> Option<usize> {
    let mut completed_any = false;
    let mut completed_tokens: Vec<Token> = Vec::new();
    for (i, ev) in trace.iter().enumerate() {
        if match_with(&thad.dependent, ev, aliases) == Match::Yes {
            let ok = match &thad.binding {
                None => completed_any,
                Some(_) => ev
                    .descriptor_token()
                    .is_some_and(|t| completed_tokens.contains(&t)),
            };
            if !ok {
                return Some(i);
            }
        }
        if match_with(&thad.dependency, ev, aliases) == Match::Yes {
            completed_any = true;
            if let Some(t) = thad.source_token(ev) {
                completed_tokens.push(t);
            }
        }
    }
    None
}

/// A validated collection of routines, THADs, constant declarations and
/// aliases.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThadSet {
    pub routines: Vec<RoutineSpec>,
    pub thads: Vec<Thad>,
    /// Declared constant names, with their integer value when known.
    pub constants: BTreeMap<String, Option<i64>>,
    pub aliases: Vec<Alias>,
}

impl ThadSet {
    pub fn routine(&self, name: &str) -> Option<&RoutineSpec> {
        self.routines.iter().find(|r| r.name == name)
    }

    pub fn thad(&self, id: &str) -> Option<&Thad> {
        self.thads.iter().find(|t| t.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.routines.is_empty() && self.thads.is_empty()
    }

    /// Alias-aware match used by the checker and annotator.
    pub fn match_event(&self, pattern: &RoutinePattern, ev: &CallEvent) -> Match {
        match_with(pattern, ev, &self.aliases)
    }

    /// Aliases through which `pattern` could match, for reporting.
    pub fn aliases_for(&self, pattern: &RoutinePattern) -> Vec<&str> {
        match pattern.constant() {
            None => Vec::new(),
            Some(c) => self
                .aliases
                .iter()
                .filter(|a| a.satisfies == c)
                .map(|a| a.constant.as_str())
                .collect(),
        }
    }

    /// Alias-aware [`trace_satisfies`].
    pub fn trace_satisfies(&self, thad: &Thad, trace: &[CallEvent]) -> bool {
        first_violation(thad, trace, &self.aliases).is_none()
    }

    pub fn first_violation(&self, thad: &Thad, trace: &[CallEvent]) -> Option<usize> {
        first_violation(thad, trace, &self.aliases)
    }

    /// Value-to-name lookup used by discriminator resolution. Ties are broken
    /// by name order.
    pub fn constant_named(&self, value: i64) -> Option<&str> {
        self.constants
            .iter()
            .find(|(_, v)| **v == Some(value))
            .map(|(k, _)| k.as_str())
    }

    pub fn constant_value(&self, name: &str) -> Option<i64> {
        self.constants.get(name).copied().flatten()
    }

    /// Restrict to the given THAD ids, keeping every routine and constant.
    pub fn select(&self, ids: &[String]) -> ThadSet {
        ThadSet {
            routines: self.routines.clone(),
            thads: self
                .thads
                .iter()
                .filter(|t| ids.contains(&t.id))
                .cloned()
                .collect(),
            constants: self.constants.clone(),
            aliases: self.aliases.clone(),
        }
    }

    /// Union of two sets. Routines and constants declared in both must agree.
    pub fn merge(mut self, other: ThadSet) -> Result<ThadSet, ModelError> {
        for r in other.routines {
            match self.routine(&r.name) {
                Some(existing) if *existing == r => {}
                Some(_) => return Err(ModelError::DuplicateRoutine(r.name)),
                None => self.routines.push(r),
            }
        }
        for (k, v) in other.constants {
            let entry = self.constants.entry(k).or_insert(None);
            if entry.is_none() {
                *entry = v;
            }
        }
        for a in other.aliases {
            if !self.aliases.contains(&a) {
                self.aliases.push(a);
            }
        }
        self.thads.extend(other.thads);
        self.validate()?;
        Ok(self)
    }

    /// Attach integer values from a constants table. Existing values win;
    /// names the set does not declare are added.
    pub fn with_values(mut self, values: &BTreeMap<String, i64>) -> ThadSet {
        for (k, v) in values {
            let entry = self.constants.entry(k.clone()).or_insert(None);
            if entry.is_none() {
                *entry = Some(*v);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.routines {
            r.validate()?;
            if names.contains(&r.name.as_str()) {
                return Err(ModelError::DuplicateRoutine(r.name.clone()));
            }
            names.push(&r.name);
        }
        for c in self.constants.keys() {
            check_ident(c)?;
        }
        for a in &self.aliases {
            for c in [&a.constant, &a.satisfies] {
                if !self.constants.contains_key(c) {
                    return Err(ModelError::UnknownConstant(c.clone()));
                }
            }
        }
        let mut ids: Vec<&str> = Vec::new();
        for t in &self.thads {
            check_ident(&t.id)?;
            if ids.contains(&t.id.as_str()) {
                return Err(ModelError::DuplicateId(t.id.clone()));
            }
            ids.push(&t.id);
            self.validate_pattern(&t.dependent)?;
            self.validate_pattern(&t.dependency)?;
            if t.dependent == t.dependency {
                return Err(ModelError::SelfDependency(t.id.clone()));
            }
            if let Some(b) = &t.binding {
                self.validate_binding(t, b)?;
            }
        }
        Ok(())
    }

    fn validate_pattern(&self, p: &RoutinePattern) -> Result<(), ModelError> {
        let r = self
            .routine(&p.routine)
            .ok_or_else(|| ModelError::UnknownRoutine(p.routine.clone()))?;
        if let Some(c) = &p.constraint {
            expect_role(r, &c.param, ParamRole::Discriminator)?;
            if !self.constants.contains_key(&c.constant) {
                return Err(ModelError::UnknownConstant(c.constant.clone()));
            }
        }
        Ok(())
    }

    fn validate_binding(&self, t: &Thad, b: &DescriptorBinding) -> Result<(), ModelError> {
        let dependent = self
            .routine(&t.dependent.routine)
            .ok_or_else(|| ModelError::UnknownRoutine(t.dependent.routine.clone()))?;
        expect_role(dependent, &b.target_param, ParamRole::Descriptor)?;
        let dependency = self
            .routine(&t.dependency.routine)
            .ok_or_else(|| ModelError::UnknownRoutine(t.dependency.routine.clone()))?;
        match &b.source {
            BindingSource::Return if !dependency.returns_descriptor => {
                Err(ModelError::NoReturnedDescriptor(dependency.name.clone()))
            }
            BindingSource::Return => Ok(()),
            BindingSource::Param(p) => expect_role(dependency, p, ParamRole::Descriptor),
        }
    }
}

fn expect_role(r: &RoutineSpec, param: &str, role: ParamRole) -> Result<(), ModelError> {
    match r.param(param) {
        None => Err(ModelError::UnknownParam {
            routine: r.name.clone(),
            param: param.to_string(),
        }),
        Some((_, p)) if p.role != role => Err(ModelError::WrongRole {
            routine: r.name.clone(),
            param: param.to_string(),
            expected: role,
        }),
        Some(_) => Ok(()),
    }
}

/// Pointwise [`ThadSet::trace_satisfies`] for every THAD in the set.
pub fn trace_satisfies_all(set: &ThadSet, trace: &[CallEvent]) -> BTreeMap<String, bool> {
    set.thads
        .iter()
        .map(|t| (t.id.clone(), set.trace_satisfies(t, trace)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::spidev;

    fn open(t: u32) -> CallEvent {
        CallEvent::new("open").producing(Token(t))
    }

    fn read(t: u32) -> CallEvent {
        CallEvent::new("read").with_descriptor(Token(t))
    }

    fn ioctl(t: u32, c: &str) -> CallEvent {
        CallEvent::new("ioctl")
            .with_descriptor(Token(t))
            .with_constant(c)
    }

    fn msg() -> RoutinePattern {
        RoutinePattern::constrained("ioctl", "request", "MSG")
    }

    #[test]
    fn match_event_truth_table() {
        assert!(match_event(&msg(), &ioctl(0, "MSG")));
        assert!(match_event(&RoutinePattern::plain("read"), &read(0)));
        assert!(!match_event(&msg(), &ioctl(0, "WR_MODE32")));
        assert!(!match_event(&RoutinePattern::plain("read"), &open(0)));
        // An unconstrained pattern matches every discriminator.
        assert!(match_event(
            &RoutinePattern::plain("ioctl"),
            &ioctl(0, "MSG")
        ));
        let unknown = CallEvent {
            discriminator: Some(Discriminator::Unknown),
            ..CallEvent::new("ioctl")
        };
        assert!(!match_event(&msg(), &unknown));
        assert_eq!(match_with(&msg(), &unknown, &[]), Match::Maybe);
    }

    #[test]
    fn read_after_open() {
        let set = spidev();
        let d1 = set.thad("d1").unwrap();
        assert!(trace_satisfies(d1, &[open(0), read(0)]));
        assert!(trace_satisfies(d1, &[]));
        assert!(!trace_satisfies(d1, &[read(0), open(0)]));
    }

    /// Independent index scan: dependent at i needs a dependency at some j < i.
    fn scan(thad: &Thad, trace: &[CallEvent]) -> bool {
        (0..trace.len()).all(|i| {
            !match_event(&thad.dependent, &trace[i])
                || (0..i).any(|j| match_event(&thad.dependency, &trace[j]))
        })
    }

    #[test]
    fn brute_force_scan_agrees_on_reversed_trace() {
        let set = spidev();
        let d1 = set.thad("d1").unwrap();
        let trace = [read(0), open(0)];
        assert_eq!(scan(d1, &trace), trace_satisfies(d1, &trace));
        assert!(!scan(d1, &trace));
    }

    #[test]
    fn config_ioctl_is_not_a_transfer() {
        let set = spidev();
        let d3 = set.thad("d3").unwrap();
        assert!(trace_satisfies(d3, &[open(0), ioctl(0, "WR_MODE32")]));
        // Ruled out because the event does not match the MSG pattern at all.
        assert!(!match_event(&d3.dependent, &ioctl(0, "WR_MODE32")));
    }

    #[test]
    fn spidev_batch_oracle() {
        let set = spidev();
        let got = trace_satisfies_all(&set, &[open(0), read(0)]);
        assert_eq!(got.len(), 26);
        for (id, ok) in &got {
            let expected_false = ["d15", "d18", "d21", "d24"].contains(&id.as_str());
            assert_eq!(*ok, !expected_false, "{id}");
        }
        assert!(trace_satisfies_all(&set, &[]).values().all(|v| *v));
        let closed =
            trace_satisfies_all(&set, &[CallEvent::new("close").with_descriptor(Token(0))]);
        for (id, ok) in &closed {
            assert_eq!(*ok, id != "d4", "{id}");
        }
    }

    #[test]
    fn binding_requires_same_token() {
        let set = spidev();
        let d1 = set
            .thad("d1")
            .unwrap()
            .clone()
            .with_binding(DescriptorBinding {
                source: BindingSource::Return,
                target_param: "fd".into(),
            });
        assert!(trace_satisfies(&d1, &[open(0), read(0)]));
        assert!(!trace_satisfies(&d1, &[open(0), read(1)]));
        assert!(trace_satisfies(&d1, &[open(1), open(0), read(1)]));
        let unresolved = CallEvent {
            descriptor: Some(Descriptor::Unknown),
            ..CallEvent::new("read")
        };
        assert!(!trace_satisfies(&d1, &[open(0), unresolved]));
    }

    #[test]
    fn param_binding_uses_descriptor_argument() {
        let d24 = Thad::new(
            "d24",
            RoutinePattern::plain("read"),
            RoutinePattern::constrained("ioctl", "request", "WR_MAX_SPEED_HZ"),
        )
        .with_binding(DescriptorBinding {
            source: BindingSource::Param("fd".into()),
            target_param: "fd".into(),
        });
        let trace = [open(0), open(1), ioctl(0, "WR_MAX_SPEED_HZ"), read(1)];
        assert!(!trace_satisfies(&d24, &trace));
        let trace = [open(0), ioctl(0, "WR_MAX_SPEED_HZ"), read(0)];
        assert!(trace_satisfies(&d24, &trace));
    }

    #[test]
    fn alias_matches_in_both_positions() {
        let mut set = spidev();
        set.aliases.push(Alias {
            constant: "WR_MODE".into(),
            satisfies: "WR_MODE32".into(),
        });
        set.validate().unwrap();
        let d8 = set.thad("d8").unwrap();
        let d17 = set.thad("d17").unwrap();
        // WR_MODE now stands in for WR_MODE32 as a dependent of d8 ...
        assert!(!set.trace_satisfies(d8, &[ioctl(0, "WR_MODE")]));
        // ... and as the dependency of d17.
        assert!(set.trace_satisfies(d17, &[open(0), ioctl(0, "WR_MODE"), ioctl(0, "MSG")]));
        assert!(!trace_satisfies(
            d17,
            &[open(0), ioctl(0, "WR_MODE"), ioctl(0, "MSG")]
        ));
    }

    #[test]
    fn validation_rejects_bad_sets() {
        let mut set = spidev();
        set.thads.push(set.thads[0].clone());
        assert_eq!(set.validate(), Err(ModelError::DuplicateId("d1".into())));

        let mut set = spidev();
        set.thads[0].dependency = set.thads[0].dependent.clone();
        assert!(matches!(set.validate(), Err(ModelError::SelfDependency(_))));

        let mut set = spidev();
        set.thads[0].binding = Some(DescriptorBinding {
            source: BindingSource::Return,
            target_param: "buf".into(),
        });
        assert!(matches!(set.validate(), Err(ModelError::WrongRole { .. })));

        assert!(RoutineSpec::new(
            "ioctl",
            vec![
                Param::new("a", ParamRole::Descriptor),
                Param::new("b", ParamRole::Descriptor)
            ],
            false
        )
        .is_err());
        assert!(RoutineSpec::new("9x", vec![], false).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn event() -> impl Strategy<Value = CallEvent> {
            let consts =
                prop::sample::select(vec!["MSG", "WR_MODE32", "WR_MAX_SPEED_HZ", "RD_MODE"]);
            prop_oneof![
                (0u32..3).prop_map(open),
                (0u32..3).prop_map(read),
                (0u32..3).prop_map(|t| CallEvent::new("close").with_descriptor(Token(t))),
                ((0u32..3), consts).prop_map(|(t, c)| ioctl(t, c)),
            ]
        }

        fn bound_set() -> ThadSet {
            let mut set = spidev();
            for t in &mut set.thads {
                let source = if t.dependency.routine == "open" {
                    BindingSource::Return
                } else {
                    BindingSource::Param("fd".into())
                };
                t.binding = Some(DescriptorBinding {
                    source,
                    target_param: "fd".into(),
                });
            }
            set.validate().unwrap();
            set
        }

        proptest! {
            #[test]
            fn violation_is_prefix_monotone(
                t in prop::collection::vec(event(), 0..10),
                u in prop::collection::vec(event(), 0..6),
                bound in any::<bool>(),
            ) {
                let set = if bound { bound_set() } else { spidev() };
                let mut tu = t.clone();
                tu.extend(u);
                for thad in &set.thads {
                    if !trace_satisfies(thad, &t) {
                        prop_assert!(!trace_satisfies(thad, &tu));
                    }
                }
            }

            #[test]
            fn prepending_a_dependency_never_hurts(t in prop::collection::vec(event(), 0..10)) {
                let set = spidev();
                for thad in &set.thads {
                    let head = match thad.dependency.constant() {
                        None => CallEvent::new(&thad.dependency.routine).producing(Token(9)),
                        Some(c) => CallEvent::new(&thad.dependency.routine).with_constant(c),
                    };
                    let mut pre = vec![head];
                    pre.extend(t.iter().cloned());
                    if trace_satisfies(thad, &t) {
                        prop_assert!(trace_satisfies(thad, &pre));
                    }
                    prop_assert!(trace_satisfies(thad, &pre));
                }
            }

            #[test]
            fn unbound_semantics_ignore_token_names(
                t in prop::collection::vec(event(), 0..10),
                shift in 1u32..50,
            ) {
                let set = spidev();
                let renamed: Vec<CallEvent> = t
                    .iter()
                    .map(|e| CallEvent {
                        descriptor: e.descriptor.map(|d| match d {
                            Descriptor::Token(x) => Descriptor::Token(Token(x.0 + shift)),
                            other => other,
                        }),
                        produced: e.produced.map(|x| Token(x.0 + shift)),
                        ..e.clone()
                    })
                    .collect();
                prop_assert_eq!(trace_satisfies_all(&set, &t), trace_satisfies_all(&set, &renamed));
            }

            #[test]
            fn matching_is_pure(e in event()) {
                for thad in &spidev().thads {
                    prop_assert_eq!(match_event(&thad.dependent, &e), match_event(&thad.dependent, &e));
                }
            }
        }
    }
}
