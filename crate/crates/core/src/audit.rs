//! Completeness, correctness and efficiency of a performed adaptation
//! measured against a gold delta.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{fold, ElementKind, QualityModel};
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("the gold delta is empty")]
    EmptyGold,
    #[error("duration must be positive, got {0} minutes")]
    NonPositiveDuration(String),
    #[error("duplicate delta entry {0}")]
    Duplicate(String),
    #[error("invalid delta: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeltaOp {
    ADD,
    DEL,
    MOD,
}

impl fmt::Display for DeltaOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    /// The value is present and not blank.
    NonEmpty,
    /// Any value; the entry only has to be touched.
    Any,
}

/// What a gold entry's result has to look like to count as correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", untagged)]
pub enum Expect {
    /// Exact value. For objects, every listed key must match.
    Value { value: Value },
    Predicate { predicate: Predicate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeltaEntry {
    /// Element id, or its name for elements that have no shared id.
    pub element: String,
    pub op: DeltaOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ElementKind>,
    /// Display name of the element in a computed delta.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Resulting value: the whole element for ADD, the field for MOD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

impl DeltaEntry {
    pub fn new(element: impl Into<String>, op: DeltaOp, field: Option<&str>) -> Self {
        DeltaEntry {
            element: element.into(),
            op,
            field: field.map(str::to_string),
            kind: None,
            name: None,
            value: None,
            expect: None,
        }
    }

    pub fn expecting(mut self, expect: Expect) -> Self {
        self.expect = Some(expect);
        self
    }

    pub fn with_value(mut self, value: Value) -> Self {
        self.value = Some(value);
        self
    }

    pub fn key(&self) -> String {
        match &self.field {
            Some(f) => format!("{} {}.{}", self.op, self.element, f),
            None => format!("{} {}", self.op, self.element),
        }
    }

    fn names_element(&self, wanted: &str) -> bool {
        self.element == wanted
            || fold(&self.element) == fold(wanted)
            || self.name.as_deref().is_some_and(|n| !n.trim().is_empty() && fold(n) == fold(wanted))
    }
}

/// A set of element-level adaptations.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AdaptationDelta {
    pub entries: Vec<DeltaEntry>,
    /// Modifications count per element rather than per field.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub element_level: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DeltaFile {
    Entries(Vec<DeltaEntry>),
    #[serde(rename_all = "camelCase")]
    Wrapped {
        entries: Vec<DeltaEntry>,
        #[serde(default)]
        element_level: bool,
    },
}

impl<'de> Deserialize<'de> for AdaptationDelta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (entries, element_level) = match DeltaFile::deserialize(d)? {
            DeltaFile::Entries(e) => (e, false),
            DeltaFile::Wrapped { entries, element_level } => (entries, element_level),
        };
        AdaptationDelta::new(entries, element_level).map_err(serde::de::Error::custom)
    }
}

impl AdaptationDelta {
    /// Builds a delta, rejecting two entries for the same (element, op, field).
    /// An element-level delta drops MOD fields first and merges the resulting
    /// duplicates; their value expectations no longer apply.
    pub fn new(entries: Vec<DeltaEntry>, element_level: bool) -> Result<Self, AuditError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(entries.len());
        for mut e in entries {
            if e.element.trim().is_empty() {
                return Err(AuditError::Invalid("entry without element".into()));
            }
            if element_level && e.op == DeltaOp::MOD && e.field.is_some() {
                e.field = None;
                e.expect = None;
                if !seen.insert(e.key()) {
                    continue;
                }
            } else if !seen.insert(e.key()) {
                return Err(AuditError::Duplicate(e.key()));
            }
            out.push(e);
        }
        Ok(AdaptationDelta { entries: out, element_level })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The value a performed delta shows for `gold`, if it touches it at all.
    /// A MOD of an element this delta adds counts when the added element has
    /// the field set.
    fn observe<'a>(&'a self, gold: &DeltaEntry) -> Option<Option<&'a Value>> {
        let want = gold.element.as_str();
        for p in &self.entries {
            if !p.names_element(want) {
                continue;
            }
            if gold.kind.is_some() && p.kind.is_some() && gold.kind != p.kind {
                continue;
            }
            if p.op == gold.op {
                match (&gold.field, &p.field) {
                    (None, _) => return Some(p.value.as_ref()),
                    (Some(g), Some(f)) if g == f => return Some(p.value.as_ref()),
                    _ => {}
                }
            }
            if gold.op == DeltaOp::MOD && p.op == DeltaOp::ADD {
                match &gold.field {
                    None => return Some(p.value.as_ref()),
                    Some(f) => {
                        let v = p.value.as_ref().and_then(|v| v.get(f));
                        if v.is_some_and(non_empty) {
                            return Some(v);
                        }
                    }
                }
            }
        }
        None
    }
}

fn non_empty(v: &Value) -> bool {
    match v {
        Value::Null => false,
        Value::String(s) => !s.trim().is_empty(),
        Value::Array(a) => !a.is_empty(),
        Value::Object(o) => !o.is_empty(),
        _ => true,
    }
}

fn value_matches(expected: &Value, observed: &Value) -> bool {
    match (expected, observed) {
        (Value::Object(e), Value::Object(o)) => {
            e.iter().all(|(k, ev)| o.get(k).is_some_and(|ov| value_matches(ev, ov)))
        }
        _ => expected == observed,
    }
}

fn satisfied(expect: Option<&Expect>, observed: Option<&Value>) -> bool {
    match expect {
        None | Some(Expect::Predicate { predicate: Predicate::Any }) => true,
        Some(Expect::Predicate { predicate: Predicate::NonEmpty }) => observed.is_some_and(non_empty),
        Some(Expect::Value { value }) => observed.is_some_and(|o| value_matches(value, o)),
    }
}

/// Element-level difference between two versions of a model. Ids are taken
/// to be stable across the pair. Entries are sorted by element id, op, field.
pub fn diff_models(base: &QualityModel, adapted: &QualityModel) -> AdaptationDelta {
    let mut entries = Vec::new();
    for e in base.elements() {
        if !adapted.contains(e.id()) {
            let mut d = DeltaEntry::new(e.id().as_str(), DeltaOp::DEL, None);
            d.kind = Some(e.kind());
            d.name = Some(e.name().to_string());
            entries.push(d);
        }
    }
    for e in adapted.elements() {
        let Some(old) = base.get(e.id()) else {
            let mut d = DeltaEntry::new(e.id().as_str(), DeltaOp::ADD, None);
            d.kind = Some(e.kind());
            d.name = Some(e.name().to_string());
            d.value = Some(e.to_value());
            entries.push(d);
            continue;
        };
        let (before, after) = (old.to_value(), e.to_value());
        let mut fields: BTreeSet<&String> = BTreeSet::new();
        for v in [&before, &after] {
            if let Value::Object(m) = v {
                fields.extend(m.keys());
            }
        }
        for f in fields {
            let (b, a) = (before.get(f.as_str()), after.get(f.as_str()));
            if b != a {
                let mut d = DeltaEntry::new(e.id().as_str(), DeltaOp::MOD, Some(f));
                d.kind = Some(e.kind());
                d.name = Some(e.name().to_string());
                d.value = Some(a.cloned().unwrap_or(Value::Null));
                entries.push(d);
            }
        }
    }
    entries.sort_by(|x, y| (&x.element, x.op, &x.field).cmp(&(&y.element, y.op, &y.field)));
    AdaptationDelta { entries, element_level: false }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Classification {
    /// Touched with a satisfied expectation.
    pub matched: Vec<String>,
    /// Not touched at all.
    pub missed: Vec<String>,
    /// Touched, but the expectation does not hold.
    pub incorrect: Vec<String>,
}

/// Splits the gold entries by how the performed delta treats them.
pub fn classify(performed: &AdaptationDelta, gold: &AdaptationDelta) -> Classification {
    let mut c = Classification::default();
    for g in &gold.entries {
        match performed.observe(g) {
            None => c.missed.push(g.key()),
            Some(observed) if satisfied(g.expect.as_ref(), observed) => c.matched.push(g.key()),
            Some(_) => c.incorrect.push(g.key()),
        }
    }
    c
}

/// Share of gold entries the performed delta touches.
pub fn completeness(performed: &AdaptationDelta, gold: &AdaptationDelta) -> Result<Rational, AuditError> {
    if gold.is_empty() {
        return Err(AuditError::EmptyGold);
    }
    let c = classify(performed, gold);
    Ok(Rational::new((c.matched.len() + c.incorrect.len()) as i64, gold.len() as i64))
}

/// Share of gold entries the performed delta realizes correctly.
pub fn correctness(performed: &AdaptationDelta, gold: &AdaptationDelta) -> Result<Rational, AuditError> {
    if gold.is_empty() {
        return Err(AuditError::EmptyGold);
    }
    let c = classify(performed, gold);
    Ok(Rational::new(c.matched.len() as i64, gold.len() as i64))
}

/// Correctly adapted elements per minute.
pub fn efficiency(correct: usize, minutes: Rational) -> Result<Rational, AuditError> {
    if minutes <= Rational::from_integer(0) {
        return Err(AuditError::NonPositiveDuration(rational::format(&minutes)));
    }
    Ok(Rational::from_integer(correct as i64) / minutes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditResult {
    #[serde(with = "rational::exact")]
    pub completeness: Rational,
    #[serde(with = "rational::exact")]
    pub correctness: Rational,
    /// Elements per minute.
    #[serde(with = "rational::exact")]
    pub efficiency: Rational,
    pub gold_size: usize,
    pub matched_entries: Vec<String>,
    pub missed_entries: Vec<String>,
    pub incorrect_entries: Vec<String>,
}

pub fn audit(performed: &AdaptationDelta, gold: &AdaptationDelta, minutes: Rational) -> Result<AuditResult, AuditError> {
    if gold.is_empty() {
        return Err(AuditError::EmptyGold);
    }
    let c = classify(performed, gold);
    let n = gold.len() as i64;
    let efficiency = efficiency(c.matched.len(), minutes)?;
    Ok(AuditResult {
        completeness: Rational::new((c.matched.len() + c.incorrect.len()) as i64, n),
        correctness: Rational::new(c.matched.len() as i64, n),
        efficiency,
        gold_size: gold.len(),
        matched_entries: c.matched,
        missed_entries: c.missed,
        incorrect_entries: c.incorrect,
    })
}
