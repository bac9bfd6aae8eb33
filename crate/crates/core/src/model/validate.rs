//! Consistency rules.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::element::{Element, ElementId, ElementKind};
use super::QualityModel;

/// What the adapted model is meant for. Evaluation models carry the
/// measurement and aggregation part; specification models must not.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Specification,
    #[default]
    Evaluation,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Specification => "specification",
            Purpose::Evaluation => "evaluation",
        })
    }
}

impl std::str::FromStr for Purpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "specification" => Ok(Purpose::Specification),
            "evaluation" => Ok(Purpose::Evaluation),
            other => Err(format!("unknown purpose `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
    V9,
    V10,
    V11,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// Never violated by the editing primitives; a model file breaking one of
    /// these does not load.
    Structural,
    /// Work still to do; tolerated in stored models and turned into tasks.
    Operational,
}

impl Rule {
    pub fn severity(self) -> Severity {
        match self {
            Rule::V1 | Rule::V2 | Rule::V3 | Rule::V6 => Severity::Structural,
            _ => Severity::Operational,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::V1 => "V1",
            Rule::V2 => "V2",
            Rule::V3 => "V3",
            Rule::V4 => "V4",
            Rule::V5 => "V5",
            Rule::V6 => "V6",
            Rule::V7 => "V7",
            Rule::V8 => "V8",
            Rule::V9 => "V9",
            Rule::V10 => "V10",
            Rule::V11 => "V11",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub severity: Severity,
    pub target: ElementId,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}] {}: {}", self.rule, self.target, severity_word(self.severity), self.message)
    }
}

fn severity_word(s: Severity) -> &'static str {
    match s {
        Severity::Structural => "structural",
        Severity::Operational => "operational",
    }
}

struct Collector {
    out: Vec<Violation>,
}

impl Collector {
    fn push(&mut self, rule: Rule, target: &ElementId, message: String) {
        self.out.push(Violation { rule, severity: rule.severity(), target: target.clone(), message });
    }
}

/// Checks every rule that applies to `purpose`. The result is sorted by rule,
/// then target id, then message.
pub fn validate(model: &QualityModel, purpose: Purpose) -> Vec<Violation> {
    let mut c = Collector { out: Vec::new() };
    references(model, &mut c);
    trees(model, &mut c);
    for e in model.elements() {
        element_rules(model, e, purpose, &mut c);
    }
    c.out.sort_by(|a, b| {
        (a.rule, &a.target, &a.message).cmp(&(b.rule, &b.target, &b.message))
    });
    c.out.dedup();
    c.out
}

fn quote(model: &QualityModel, id: &ElementId) -> String {
    match model.get(id) {
        Some(e) => format!("{} \"{}\"", e.kind().label(), e.name()),
        None => format!("`{id}`"),
    }
}

/// V1 (targets exist with the right kind) and V6 (owned and mirror fields agree).
fn references(model: &QualityModel, c: &mut Collector) {
    for e in model.elements() {
        let id = e.id();
        for edge in e.owned_refs().into_iter().chain(e.mirrored_refs()) {
            match model.kind_of(edge.target) {
                None => c.push(
                    Rule::V1,
                    id,
                    format!("{}.{} references missing element `{}`", id, edge.field, edge.target),
                ),
                Some(k) if !edge.expected.contains(&k) => c.push(
                    Rule::V1,
                    id,
                    format!("{}.{} references `{}` of kind {k}", id, edge.field, edge.target),
                ),
                Some(_) => {}
            }
        }
        symmetry(model, e, c);
    }
}

fn symmetry(model: &QualityModel, e: &Element, c: &mut Collector) {
    let id = e.id();
    let mut asym = |field: &str, other: &ElementId, other_field: &str| {
        c.push(
            Rule::V6,
            id,
            format!("{id}.{field} lists `{other}` but {other}.{other_field} does not agree"),
        )
    };
    match e {
        Element::QualityAspect(a) => {
            if let Some(p) = a.parent.as_ref().and_then(|p| model.quality_aspect(p)) {
                if p.refined_by.iter().filter(|c| *c == id).count() != 1 {
                    asym("parent", &p.id, "refinedBy");
                }
            }
            for child in &a.refined_by {
                if let Some(ch) = model.quality_aspect(child) {
                    if ch.parent.as_ref() != Some(id) {
                        asym("refinedBy", child, "parent");
                    }
                }
            }
            if a.refined_by.iter().collect::<BTreeSet<_>>().len() != a.refined_by.len() {
                asym("refinedBy", id, "refinedBy");
            }
            for i in &a.influenced_by {
                if let Some(imp) = model.impact(i) {
                    if &imp.quality_aspect != id {
                        asym("influencedBy", i, "qualityAspect");
                    }
                }
            }
            if let Some(q) = a.evaluated_by.as_ref().and_then(|q| model.aspect_evaluation(q)) {
                if &q.quality_aspect != id {
                    asym("evaluatedBy", &q.id, "qualityAspect");
                }
            }
        }
        Element::EntityType(t) => {
            if let Some(p) = t.parent.as_ref().and_then(|p| model.entity_type(p)) {
                if p.children.iter().filter(|c| *c == id).count() != 1 {
                    asym("parent", &p.id, "children");
                }
            }
            for child in &t.children {
                if let Some(ch) = model.entity_type(child) {
                    if ch.parent.as_ref() != Some(id) {
                        asym("children", child, "parent");
                    }
                }
            }
            if t.children.iter().collect::<BTreeSet<_>>().len() != t.children.len() {
                asym("children", id, "children");
            }
        }
        Element::Factor(f) => {
            for m in &f.is_quantified {
                if let Some(measure) = model.measure(m) {
                    if !measure.quantifies.contains(id) {
                        asym("isQuantified", m, "quantifies");
                    }
                }
            }
        }
        Element::Impact(i) => {
            if let Some(a) = model.quality_aspect(&i.quality_aspect) {
                if !a.influenced_by.contains(id) {
                    asym("qualityAspect", &a.id, "influencedBy");
                }
            }
            if let Some(r) = i.requirement.as_ref().and_then(|r| model.quality_requirement(r)) {
                if !r.grouped_impacts.contains(id) {
                    asym("requirement", &r.id, "groupedImpacts");
                }
            }
            if let Some(ie) = i.evaluated_by.as_ref().and_then(|x| model.impact_evaluation(x)) {
                if &ie.impact != id {
                    asym("evaluatedBy", &ie.id, "impact");
                }
            }
        }
        Element::QualityRequirement(r) => {
            for i in &r.grouped_impacts {
                if let Some(imp) = model.impact(i) {
                    if imp.requirement.as_ref() != Some(id) {
                        asym("groupedImpacts", i, "requirement");
                    }
                }
            }
        }
        Element::Measure(m) => {
            for f in &m.quantifies {
                if let Some(factor) = model.factor(f) {
                    if !factor.is_quantified.contains(id) {
                        asym("quantifies", f, "isQuantified");
                    }
                }
            }
        }
        Element::ImpactEvaluation(ie) => {
            if let Some(i) = model.impact(&ie.impact) {
                if i.evaluated_by.as_ref() != Some(id) {
                    asym("impact", &i.id, "evaluatedBy");
                }
            }
        }
        Element::QualityAspectEvaluation(q) => {
            if let Some(a) = model.quality_aspect(&q.quality_aspect) {
                if a.evaluated_by.as_ref() != Some(id) {
                    asym("qualityAspect", &a.id, "evaluatedBy");
                }
            }
        }
        Element::Property(_) => {}
    }
}

/// V2: parent chains end at a root, and every entity type names its root.
fn trees(model: &QualityModel, c: &mut Collector) {
    for e in model.elements() {
        if !matches!(e.kind(), ElementKind::QualityAspect | ElementKind::EntityType) {
            continue;
        }
        let id = e.id();
        let mut seen = BTreeSet::from([id.clone()]);
        let mut cur = model.tree_parent(id).cloned();
        let mut cyclic = false;
        while let Some(p) = cur {
            if !seen.insert(p.clone()) {
                cyclic = true;
                break;
            }
            cur = model.tree_parent(&p).cloned();
        }
        if cyclic {
            c.push(Rule::V2, id, format!("{} lies on or above a parent cycle", quote(model, id)));
            continue;
        }
        if let Element::EntityType(t) = e {
            let expected = model.computed_artifact_root(id);
            if t.artifact_root != expected {
                c.push(
                    Rule::V2,
                    id,
                    format!(
                        "{} records artifact root \"{}\" but its tree root is \"{expected}\"",
                        quote(model, id),
                        t.artifact_root
                    ),
                );
            }
        }
    }
}

fn element_rules(model: &QualityModel, e: &Element, purpose: Purpose, c: &mut Collector) {
    let id = e.id();
    if e.is_stub() {
        c.push(Rule::V10, id, format!("{} is a stub placeholder to be resolved", quote(model, id)));
    }
    if purpose == Purpose::Specification && e.kind().is_evaluation_part() {
        c.push(
            Rule::V11,
            id,
            format!("{} belongs to the evaluation part, which a specification model must not contain", quote(model, id)),
        );
    }
    let evaluation = purpose == Purpose::Evaluation;
    match e {
        Element::Factor(f) if !f.stub => {
            if f.entity_type.is_none() || f.property.is_none() {
                c.push(
                    Rule::V3,
                    id,
                    format!("{} needs exactly one entity type and one property", quote(model, id)),
                );
            }
            if evaluation && f.is_quantified.is_empty() {
                c.push(Rule::V7, id, format!("{} is not quantified by any measure", quote(model, id)));
            }
        }
        Element::Measure(m) if !m.stub => {
            if m.quantifies.is_empty() {
                c.push(Rule::V4, id, format!("{} does not quantify any factor", quote(model, id)));
            }
            if m.name.trim().is_empty() || m.measurement_rule.trim().is_empty() {
                c.push(Rule::V4, id, format!("{} needs a name and a measurement rule", quote(model, id)));
            }
        }
        Element::Impact(i) => {
            if model.factor(&i.factor).is_none() || model.quality_aspect(&i.quality_aspect).is_none() {
                c.push(Rule::V5, id, format!("impact `{id}` must link an existing factor to an existing quality aspect"));
            }
            if i.justification.trim().is_empty() {
                c.push(
                    Rule::V5,
                    id,
                    format!(
                        "the impact of {} on {} has no justification",
                        quote(model, &i.factor),
                        quote(model, &i.quality_aspect)
                    ),
                );
            }
            if evaluation && i.evaluated_by.is_none() {
                c.push(
                    Rule::V8,
                    id,
                    format!(
                        "the impact of {} on {} has no impact evaluation",
                        quote(model, &i.factor),
                        quote(model, &i.quality_aspect)
                    ),
                );
            }
        }
        Element::ImpactEvaluation(ie) if evaluation && !ie.stub => {
            if ie.uses.is_empty() {
                c.push(Rule::V8, id, format!("{} uses no measure", quote(model, id)));
            }
            if ie.evaluation_rule.trim().is_empty() {
                c.push(Rule::V8, id, format!("{} has no evaluation rule", quote(model, id)));
            }
        }
        Element::QualityAspect(a) if evaluation && !a.stub => {
            if a.evaluated_by.is_none() {
                c.push(Rule::V9, id, format!("{} has no quality aspect evaluation", quote(model, id)));
            }
        }
        Element::QualityAspectEvaluation(q) if evaluation => {
            let stub_aspect = model.quality_aspect(&q.quality_aspect).is_none_or(|a| a.stub);
            if stub_aspect {
                return;
            }
            let needed = required_considers(model, &q.quality_aspect);
            let missing: Vec<&ElementId> = needed.difference(&q.considers).collect();
            if !missing.is_empty() {
                c.push(
                    Rule::V9,
                    id,
                    format!(
                        "{} does not consider {}",
                        quote(model, id),
                        missing.iter().map(|m| quote(model, m)).collect::<Vec<_>>().join(", ")
                    ),
                );
            }
            for t in &q.considers {
                if model.contains(t) && !model.considers_allowed(&q.quality_aspect, t) {
                    c.push(
                        Rule::V9,
                        id,
                        format!("{} considers {}, which does not belong to its aspect", quote(model, id), quote(model, t)),
                    );
                }
            }
            if q.aggregation_rule.trim().is_empty() {
                c.push(Rule::V9, id, format!("{} has no aggregation rule", quote(model, id)));
            }
        }
        _ => {}
    }
}

/// Evaluations an aspect evaluation must consider: those of the impacts on
/// the aspect and those of its direct sub-aspects.
pub(crate) fn required_considers(model: &QualityModel, aspect: &ElementId) -> BTreeSet<ElementId> {
    let Some(a) = model.quality_aspect(aspect) else {
        return BTreeSet::new();
    };
    let from_impacts = a
        .influenced_by
        .iter()
        .filter_map(|i| model.impact(i).and_then(|i| i.evaluated_by.clone()));
    let from_children = a
        .refined_by
        .iter()
        .filter_map(|c| model.quality_aspect(c).and_then(|c| c.evaluated_by.clone()));
    from_impacts.chain(from_children).collect()
}
