//! Insert, remove and update primitives.
//!
//! Each primitive checks all of its preconditions before touching the model,
//! so a failed call leaves the model exactly as it was. Mirror fields on other
//! elements are updated in the same call and reported in the returned
//! [`ChangeSet`].

use std::collections::BTreeSet;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::element::*;
use super::tags::{insert_name, name_set, remove_name, ContextTags};
use super::{ModelError, QualityModel};

/// Field map used as the body of an insertion.
pub type Payload = serde_json::Map<String, Value>;

/// How a single field is changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldChange {
    /// Replace the whole value.
    Set(Value),
    /// Add one member to a set-valued field.
    Insert(Value),
    /// Remove one member from a set-valued field.
    Remove(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldRef {
    pub element: ElementId,
    pub field: String,
}

/// Fields modified by a primitive, including mirror fields of other elements.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    pub changed: Vec<FieldRef>,
}

impl ChangeSet {
    fn touch(&mut self, element: &ElementId, field: &str) {
        let r = FieldRef { element: element.clone(), field: field.to_string() };
        if !self.changed.contains(&r) {
            self.changed.push(r);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.changed.is_empty()
    }

    pub fn extend(&mut self, other: ChangeSet) {
        for r in other.changed {
            if !self.changed.contains(&r) {
                self.changed.push(r);
            }
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct AspectDraft {
    name: String,
    description: String,
    parent: Option<ElementId>,
    viewpoints: Vec<String>,
    stub: bool,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct EntityTypeDraft {
    name: String,
    description: String,
    parent: Option<ElementId>,
    stub: bool,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct PropertyDraft {
    name: String,
    description: String,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct FactorDraft {
    name: String,
    description: String,
    entity_type: Option<ElementId>,
    property: Option<ElementId>,
    is_quantified: BTreeSet<ElementId>,
    tags: ContextTags,
    stub: bool,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct ImpactDraft {
    factor: Option<ElementId>,
    quality_aspect: Option<ElementId>,
    requirement: Option<ElementId>,
    effect: Effect,
    justification: String,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct RequirementDraft {
    name: String,
    description: String,
    grouped_impacts: BTreeSet<ElementId>,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct MeasureDraft {
    name: String,
    measurement_rule: String,
    scale: String,
    quantifies: BTreeSet<ElementId>,
    tags: ContextTags,
    stub: bool,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct ImpactEvaluationDraft {
    name: String,
    impact: Option<ElementId>,
    uses: BTreeSet<ElementId>,
    evaluation_rule: String,
    evaluation_scale: String,
    stub: bool,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
struct AspectEvaluationDraft {
    name: String,
    quality_aspect: Option<ElementId>,
    aggregation_rule: String,
    considers: BTreeSet<ElementId>,
}

fn draft<T: DeserializeOwned>(kind: ElementKind, payload: &Payload) -> Result<T, ModelError> {
    serde_json::from_value(Value::Object(payload.clone()))
        .map_err(|e| ModelError::InvalidPayload { kind, reason: e.to_string() })
}

fn required(kind: ElementKind, field: &str, value: Option<ElementId>) -> Result<ElementId, ModelError> {
    value.ok_or_else(|| ModelError::InvalidPayload {
        kind,
        reason: format!("`{field}` is required"),
    })
}

/// Fields of each kind that are derived from other elements' owned fields.
fn is_derived(kind: ElementKind, field: &str) -> bool {
    matches!(
        (kind, field),
        (_, "id")
            | (ElementKind::QualityAspect, "refinedBy" | "influencedBy" | "evaluatedBy")
            | (ElementKind::EntityType, "children" | "artifactRoot")
            | (ElementKind::Impact, "evaluatedBy")
    )
}

fn field_exists(kind: ElementKind, field: &str) -> bool {
    let fields: &[&str] = match kind {
        ElementKind::QualityAspect => &[
            "id", "name", "description", "parent", "refinedBy", "viewpoints", "influencedBy",
            "evaluatedBy", "stub",
        ],
        ElementKind::EntityType => {
            &["id", "name", "description", "parent", "children", "artifactRoot", "stub"]
        }
        ElementKind::Property => &["id", "name", "description"],
        ElementKind::Factor => &[
            "id", "name", "description", "entityType", "property", "isQuantified", "tags", "stub",
        ],
        ElementKind::Impact => &[
            "id", "factor", "qualityAspect", "requirement", "effect", "justification",
            "evaluatedBy",
        ],
        ElementKind::QualityRequirement => &["id", "name", "description", "groupedImpacts"],
        ElementKind::Measure => {
            &["id", "name", "measurementRule", "scale", "quantifies", "tags", "stub"]
        }
        ElementKind::ImpactEvaluation => &[
            "id", "name", "impact", "uses", "evaluationRule", "evaluationScale", "stub",
        ],
        ElementKind::QualityAspectEvaluation => {
            &["id", "name", "qualityAspect", "aggregationRule", "considers"]
        }
    };
    fields.contains(&field)
}

fn parse_id(field: &str, v: &Value) -> Result<ElementId, ModelError> {
    v.as_str()
        .map(ElementId::from)
        .ok_or_else(|| ModelError::InvalidChange {
            field: field.into(),
            reason: "expected an element id string".into(),
        })
}

fn parse_opt_id(field: &str, v: &Value) -> Result<Option<ElementId>, ModelError> {
    if v.is_null() {
        Ok(None)
    } else {
        parse_id(field, v).map(Some)
    }
}

fn parse_string(field: &str, v: &Value) -> Result<String, ModelError> {
    v.as_str().map(str::to_string).ok_or_else(|| ModelError::InvalidChange {
        field: field.into(),
        reason: "expected a string".into(),
    })
}

fn only_set<'a>(field: &str, change: &'a FieldChange) -> Result<&'a Value, ModelError> {
    match change {
        FieldChange::Set(v) => Ok(v),
        _ => Err(ModelError::InvalidChange {
            field: field.into(),
            reason: "only `set` is supported for this field".into(),
        }),
    }
}

/// Applies a set/insert/remove change to a set of ids.
fn changed_id_set(
    field: &str,
    current: &BTreeSet<ElementId>,
    change: &FieldChange,
) -> Result<BTreeSet<ElementId>, ModelError> {
    let mut next = current.clone();
    match change {
        FieldChange::Set(Value::Array(items)) => {
            next = items.iter().map(|v| parse_id(field, v)).collect::<Result<_, _>>()?;
        }
        FieldChange::Set(_) => {
            return Err(ModelError::InvalidChange {
                field: field.into(),
                reason: "expected an array of element ids".into(),
            })
        }
        FieldChange::Insert(v) => {
            next.insert(parse_id(field, v)?);
        }
        FieldChange::Remove(v) => {
            next.remove(&parse_id(field, v)?);
        }
    }
    Ok(next)
}

impl QualityModel {
    fn check_ref(
        &self,
        field: &str,
        target: &ElementId,
        expected: &[ElementKind],
    ) -> Result<(), ModelError> {
        match self.kind_of(target) {
            None => Err(ModelError::Dangling { field: field.into(), target: target.clone() }),
            Some(k) if expected.contains(&k) => Ok(()),
            Some(found) => Err(ModelError::WrongKind {
                field: field.into(),
                target: target.clone(),
                expected: expected.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" or "),
                found,
            }),
        }
    }

    fn check_refs<'a, I>(&self, field: &str, targets: I, expected: &[ElementKind]) -> Result<(), ModelError>
    where
        I: IntoIterator<Item = &'a ElementId>,
    {
        targets.into_iter().try_for_each(|t| self.check_ref(field, t, expected))
    }

    /// Whether an aspect evaluation of `aspect` may list `target` in `considers`:
    /// impact evaluations of impacts on the aspect, or aspect evaluations of
    /// its direct sub-aspects.
    pub(crate) fn considers_allowed(&self, aspect: &ElementId, target: &ElementId) -> bool {
        if let Some(ie) = self.impact_evaluation(target) {
            return self
                .impact(&ie.impact)
                .is_some_and(|i| &i.quality_aspect == aspect);
        }
        if let Some(qae) = self.aspect_evaluation(target) {
            return self
                .quality_aspect(&qae.quality_aspect)
                .is_some_and(|a| a.parent.as_ref() == Some(aspect));
        }
        false
    }

    fn check_considers<'a, I>(&self, aspect: &ElementId, targets: I) -> Result<(), ModelError>
    where
        I: IntoIterator<Item = &'a ElementId>,
    {
        for t in targets {
            self.check_ref(
                "considers",
                t,
                &[ElementKind::ImpactEvaluation, ElementKind::QualityAspectEvaluation],
            )?;
            if !self.considers_allowed(aspect, t) {
                return Err(ModelError::InvalidChange {
                    field: "considers".into(),
                    reason: format!(
                        "`{t}` neither evaluates an impact on `{aspect}` nor a direct sub-aspect of it"
                    ),
                });
            }
        }
        Ok(())
    }

    /// Inserts a new element built from `payload`. Mirror fields of the
    /// referenced elements are updated.
    pub fn insert_element(
        &mut self,
        kind: ElementKind,
        payload: &Payload,
    ) -> Result<(ElementId, ChangeSet), ModelError> {
        let mut changes = ChangeSet::default();
        let id = match kind {
            ElementKind::QualityAspect => {
                let d: AspectDraft = draft(kind, payload)?;
                if let Some(p) = &d.parent {
                    self.check_ref("parent", p, &[ElementKind::QualityAspect])?;
                }
                let id = self.allocate_id(kind);
                if let Some(p) = &d.parent {
                    self.quality_aspect_mut(p).expect("checked").refined_by.push(id.clone());
                    changes.touch(p, "refinedBy");
                }
                self.put(Element::QualityAspect(QualityAspect {
                    id: id.clone(),
                    name: d.name,
                    description: d.description,
                    parent: d.parent,
                    refined_by: Vec::new(),
                    viewpoints: name_set(d.viewpoints),
                    influenced_by: BTreeSet::new(),
                    evaluated_by: None,
                    stub: d.stub,
                }));
                id
            }
            ElementKind::EntityType => {
                let d: EntityTypeDraft = draft(kind, payload)?;
                if let Some(p) = &d.parent {
                    self.check_ref("parent", p, &[ElementKind::EntityType])?;
                }
                let id = self.allocate_id(kind);
                let artifact_root = match &d.parent {
                    Some(p) => {
                        self.entity_type_mut(p).expect("checked").children.push(id.clone());
                        changes.touch(p, "children");
                        self.computed_artifact_root(p)
                    }
                    None => d.name.clone(),
                };
                self.put(Element::EntityType(EntityType {
                    id: id.clone(),
                    name: d.name,
                    description: d.description,
                    parent: d.parent,
                    children: Vec::new(),
                    artifact_root,
                    stub: d.stub,
                }));
                id
            }
            ElementKind::Property => {
                let d: PropertyDraft = draft(kind, payload)?;
                let id = self.allocate_id(kind);
                self.put(Element::Property(Property {
                    id: id.clone(),
                    name: d.name,
                    description: d.description,
                }));
                id
            }
            ElementKind::Factor => {
                let d: FactorDraft = draft(kind, payload)?;
                if !d.stub && (d.entity_type.is_none() || d.property.is_none()) {
                    return Err(ModelError::InvalidPayload {
                        kind,
                        reason: "a non-stub factor needs `entityType` and `property`".into(),
                    });
                }
                if let Some(et) = &d.entity_type {
                    self.check_ref("entityType", et, &[ElementKind::EntityType])?;
                }
                if let Some(p) = &d.property {
                    self.check_ref("property", p, &[ElementKind::Property])?;
                }
                self.check_refs("isQuantified", &d.is_quantified, &[ElementKind::Measure])?;
                let id = self.allocate_id(kind);
                for m in &d.is_quantified {
                    self.measure_mut(m).expect("checked").quantifies.insert(id.clone());
                    changes.touch(m, "quantifies");
                }
                self.put(Element::Factor(Factor {
                    id: id.clone(),
                    name: d.name,
                    description: d.description,
                    entity_type: d.entity_type,
                    property: d.property,
                    is_quantified: d.is_quantified,
                    tags: d.tags,
                    stub: d.stub,
                }));
                id
            }
            ElementKind::Impact => {
                let d: ImpactDraft = draft(kind, payload)?;
                let factor = required(kind, "factor", d.factor)?;
                let aspect = required(kind, "qualityAspect", d.quality_aspect)?;
                self.check_ref("factor", &factor, &[ElementKind::Factor])?;
                self.check_ref("qualityAspect", &aspect, &[ElementKind::QualityAspect])?;
                if let Some(r) = &d.requirement {
                    self.check_ref("requirement", r, &[ElementKind::QualityRequirement])?;
                }
                let id = self.allocate_id(kind);
                self.quality_aspect_mut(&aspect).expect("checked").influenced_by.insert(id.clone());
                changes.touch(&aspect, "influencedBy");
                if let Some(r) = &d.requirement {
                    self.quality_requirement_mut(r).expect("checked").grouped_impacts.insert(id.clone());
                    changes.touch(r, "groupedImpacts");
                }
                self.put(Element::Impact(Impact {
                    id: id.clone(),
                    factor,
                    quality_aspect: aspect,
                    requirement: d.requirement,
                    effect: d.effect,
                    justification: d.justification,
                    evaluated_by: None,
                }));
                id
            }
            ElementKind::QualityRequirement => {
                let d: RequirementDraft = draft(kind, payload)?;
                self.check_refs("groupedImpacts", &d.grouped_impacts, &[ElementKind::Impact])?;
                let id = self.allocate_id(kind);
                self.put(Element::QualityRequirement(QualityRequirement {
                    id: id.clone(),
                    name: d.name,
                    description: d.description,
                    grouped_impacts: BTreeSet::new(),
                }));
                for i in &d.grouped_impacts {
                    self.move_impact_to_requirement(i, Some(&id), &mut changes);
                }
                id
            }
            ElementKind::Measure => {
                let d: MeasureDraft = draft(kind, payload)?;
                self.check_refs("quantifies", &d.quantifies, &[ElementKind::Factor])?;
                let id = self.allocate_id(kind);
                for f in &d.quantifies {
                    self.factor_mut(f).expect("checked").is_quantified.insert(id.clone());
                    changes.touch(f, "isQuantified");
                }
                self.put(Element::Measure(Measure {
                    id: id.clone(),
                    name: d.name,
                    measurement_rule: d.measurement_rule,
                    scale: d.scale,
                    quantifies: d.quantifies,
                    tags: d.tags,
                    stub: d.stub,
                }));
                id
            }
            ElementKind::ImpactEvaluation => {
                let d: ImpactEvaluationDraft = draft(kind, payload)?;
                let impact = required(kind, "impact", d.impact)?;
                self.check_ref("impact", &impact, &[ElementKind::Impact])?;
                if let Some(existing) = &self.impact(&impact).expect("checked").evaluated_by {
                    return Err(ModelError::Cardinality(format!(
                        "impact `{impact}` is already evaluated by `{existing}`"
                    )));
                }
                self.check_refs("uses", &d.uses, &[ElementKind::Measure])?;
                let id = self.allocate_id(kind);
                self.impact_mut(&impact).expect("checked").evaluated_by = Some(id.clone());
                changes.touch(&impact, "evaluatedBy");
                self.put(Element::ImpactEvaluation(ImpactEvaluation {
                    id: id.clone(),
                    name: d.name,
                    impact,
                    uses: d.uses,
                    evaluation_rule: d.evaluation_rule,
                    evaluation_scale: d.evaluation_scale,
                    stub: d.stub,
                }));
                id
            }
            ElementKind::QualityAspectEvaluation => {
                let d: AspectEvaluationDraft = draft(kind, payload)?;
                let aspect = required(kind, "qualityAspect", d.quality_aspect)?;
                self.check_ref("qualityAspect", &aspect, &[ElementKind::QualityAspect])?;
                if let Some(existing) = &self.quality_aspect(&aspect).expect("checked").evaluated_by {
                    return Err(ModelError::Cardinality(format!(
                        "quality aspect `{aspect}` is already evaluated by `{existing}`"
                    )));
                }
                self.check_considers(&aspect, &d.considers)?;
                let id = self.allocate_id(kind);
                self.quality_aspect_mut(&aspect).expect("checked").evaluated_by = Some(id.clone());
                changes.touch(&aspect, "evaluatedBy");
                self.put(Element::QualityAspectEvaluation(QualityAspectEvaluation {
                    id: id.clone(),
                    name: d.name,
                    quality_aspect: aspect,
                    aggregation_rule: d.aggregation_rule,
                    considers: d.considers,
                }));
                id
            }
        };
        Ok((id, changes))
    }

    /// Removes an element nobody references any more. Mirror fields that
    /// listed the element are cleared.
    pub fn remove_element(&mut self, id: &ElementId) -> Result<ChangeSet, ModelError> {
        let referrers = self.references_to(id)?;
        if !referrers.is_empty() {
            return Err(ModelError::BlockedDelete {
                id: id.clone(),
                referrers: referrers.into_iter().map(|(r, f)| (r, f.to_string())).collect(),
            });
        }
        let mut changes = ChangeSet::default();
        let element = self.take(id).expect("checked by references_to");
        match &element {
            Element::QualityAspect(a) => {
                if let Some(p) = a.parent.as_ref().and_then(|p| self.quality_aspect_mut(p)) {
                    p.refined_by.retain(|c| c != id);
                    let pid = p.id.clone();
                    changes.touch(&pid, "refinedBy");
                }
            }
            Element::EntityType(e) => {
                if let Some(p) = e.parent.as_ref().and_then(|p| self.entity_type_mut(p)) {
                    p.children.retain(|c| c != id);
                    let pid = p.id.clone();
                    changes.touch(&pid, "children");
                }
            }
            Element::Impact(i) => {
                if let Some(a) = self.quality_aspect_mut(&i.quality_aspect) {
                    a.influenced_by.remove(id);
                    changes.touch(&i.quality_aspect, "influencedBy");
                }
                if let Some(r) = i.requirement.as_ref() {
                    if let Some(req) = self.quality_requirement_mut(r) {
                        req.grouped_impacts.remove(id);
                        changes.touch(r, "groupedImpacts");
                    }
                }
            }
            Element::Measure(m) => {
                for f in &m.quantifies {
                    if let Some(factor) = self.factor_mut(f) {
                        factor.is_quantified.remove(id);
                        changes.touch(f, "isQuantified");
                    }
                }
            }
            Element::ImpactEvaluation(ie) => {
                if let Some(i) = self.impact_mut(&ie.impact) {
                    i.evaluated_by = None;
                    changes.touch(&ie.impact, "evaluatedBy");
                }
            }
            Element::QualityAspectEvaluation(qae) => {
                if let Some(a) = self.quality_aspect_mut(&qae.quality_aspect) {
                    a.evaluated_by = None;
                    changes.touch(&qae.quality_aspect, "evaluatedBy");
                }
            }
            Element::Property(_) | Element::Factor(_) | Element::QualityRequirement(_) => {}
        }
        Ok(changes)
    }

    /// Changes one field of an element. Reference fields keep their mirrors
    /// symmetric; a change that leaves the value as it was is a no-op and
    /// returns an empty change set.
    pub fn update_element(
        &mut self,
        id: &ElementId,
        field: &str,
        change: &FieldChange,
    ) -> Result<ChangeSet, ModelError> {
        let kind = self.kind_of(id).ok_or_else(|| ModelError::NotFound(id.clone()))?;
        if !field_exists(kind, field) {
            return Err(ModelError::UnknownField { kind, field: field.into() });
        }
        if is_derived(kind, field) {
            return Err(ModelError::ReadOnlyField { kind, field: field.into() });
        }
        let mut changes = ChangeSet::default();
        match (kind, field) {
            (ElementKind::QualityAspect | ElementKind::EntityType, "parent") => {
                let parent = parse_opt_id(field, only_set(field, change)?)?;
                self.set_tree_parent(id, kind, parent, &mut changes)?;
            }
            (ElementKind::QualityAspect, "viewpoints") => {
                let mut next = self.quality_aspect(id).expect("kind checked").viewpoints.clone();
                match change {
                    FieldChange::Set(Value::Array(items)) => {
                        let names = items
                            .iter()
                            .map(|v| parse_string(field, v))
                            .collect::<Result<Vec<_>, _>>()?;
                        next = name_set(names);
                    }
                    FieldChange::Set(_) => {
                        return Err(ModelError::InvalidChange {
                            field: field.into(),
                            reason: "expected an array of names".into(),
                        })
                    }
                    FieldChange::Insert(v) => {
                        insert_name(&mut next, &parse_string(field, v)?);
                    }
                    FieldChange::Remove(v) => {
                        remove_name(&mut next, &parse_string(field, v)?);
                    }
                }
                let qa = self.quality_aspect_mut(id).expect("kind checked");
                if qa.viewpoints != next {
                    qa.viewpoints = next;
                    changes.touch(id, field);
                }
            }
            (ElementKind::Factor, "entityType" | "property") => {
                let target = parse_opt_id(field, only_set(field, change)?)?;
                let factor = self.factor(id).expect("kind checked");
                let expected = if field == "entityType" {
                    ElementKind::EntityType
                } else {
                    ElementKind::Property
                };
                match &target {
                    Some(t) => self.check_ref(field, t, &[expected])?,
                    None if !factor.stub => {
                        return Err(ModelError::InvalidChange {
                            field: field.into(),
                            reason: "a non-stub factor needs exactly one reference here".into(),
                        })
                    }
                    None => {}
                }
                let f = self.factor_mut(id).expect("kind checked");
                let slot = if field == "entityType" { &mut f.entity_type } else { &mut f.property };
                if *slot != target {
                    *slot = target;
                    changes.touch(id, field);
                }
            }
            (ElementKind::Factor, "isQuantified") => {
                let current = self.factor(id).expect("kind checked").is_quantified.clone();
                let next = changed_id_set(field, &current, change)?;
                self.check_refs(field, next.difference(&current), &[ElementKind::Measure])?;
                for m in current.difference(&next) {
                    if let Some(measure) = self.measure_mut(m) {
                        measure.quantifies.remove(id);
                        changes.touch(m, "quantifies");
                    }
                }
                for m in next.difference(&current) {
                    self.measure_mut(m).expect("checked").quantifies.insert(id.clone());
                    changes.touch(m, "quantifies");
                }
                if next != current {
                    self.factor_mut(id).expect("kind checked").is_quantified = next;
                    changes.touch(id, field);
                }
            }
            (ElementKind::Factor, "stub") => {
                let stub = only_set(field, change)?.as_bool().ok_or_else(|| {
                    ModelError::InvalidChange { field: field.into(), reason: "expected a boolean".into() }
                })?;
                let f = self.factor(id).expect("kind checked");
                if !stub && (f.entity_type.is_none() || f.property.is_none()) {
                    return Err(ModelError::InvalidChange {
                        field: field.into(),
                        reason: "set `entityType` and `property` before promoting the stub".into(),
                    });
                }
                if f.stub != stub {
                    self.factor_mut(id).expect("kind checked").stub = stub;
                    changes.touch(id, field);
                }
            }
            (ElementKind::Impact, "factor") => {
                let target = parse_id(field, only_set(field, change)?)?;
                self.check_ref(field, &target, &[ElementKind::Factor])?;
                let i = self.impact_mut(id).expect("kind checked");
                if i.factor != target {
                    i.factor = target;
                    changes.touch(id, field);
                }
            }
            (ElementKind::Impact, "qualityAspect") => {
                let target = parse_id(field, only_set(field, change)?)?;
                self.check_ref(field, &target, &[ElementKind::QualityAspect])?;
                let old = self.impact(id).expect("kind checked").quality_aspect.clone();
                if old != target {
                    if let Some(a) = self.quality_aspect_mut(&old) {
                        a.influenced_by.remove(id);
                        changes.touch(&old, "influencedBy");
                    }
                    self.quality_aspect_mut(&target).expect("checked").influenced_by.insert(id.clone());
                    changes.touch(&target, "influencedBy");
                    self.impact_mut(id).expect("kind checked").quality_aspect = target;
                    changes.touch(id, field);
                }
            }
            (ElementKind::Impact, "requirement") => {
                let target = parse_opt_id(field, only_set(field, change)?)?;
                if let Some(t) = &target {
                    self.check_ref(field, t, &[ElementKind::QualityRequirement])?;
                }
                self.move_impact_to_requirement(id, target.as_ref(), &mut changes);
            }
            (ElementKind::QualityRequirement, "groupedImpacts") => {
                let current = self.quality_requirement(id).expect("kind checked").grouped_impacts.clone();
                let next = changed_id_set(field, &current, change)?;
                self.check_refs(field, next.difference(&current), &[ElementKind::Impact])?;
                for i in current.difference(&next) {
                    self.move_impact_to_requirement(i, None, &mut changes);
                }
                for i in next.difference(&current) {
                    self.move_impact_to_requirement(i, Some(id), &mut changes);
                }
            }
            (ElementKind::Measure, "quantifies") => {
                let current = self.measure(id).expect("kind checked").quantifies.clone();
                let next = changed_id_set(field, &current, change)?;
                self.check_refs(field, next.difference(&current), &[ElementKind::Factor])?;
                for f in current.difference(&next) {
                    if let Some(factor) = self.factor_mut(f) {
                        factor.is_quantified.remove(id);
                        changes.touch(f, "isQuantified");
                    }
                }
                for f in next.difference(&current) {
                    self.factor_mut(f).expect("checked").is_quantified.insert(id.clone());
                    changes.touch(f, "isQuantified");
                }
                if next != current {
                    self.measure_mut(id).expect("kind checked").quantifies = next;
                    changes.touch(id, field);
                }
            }
            (ElementKind::ImpactEvaluation, "impact") => {
                let target = parse_id(field, only_set(field, change)?)?;
                self.check_ref(field, &target, &[ElementKind::Impact])?;
                let old = self.impact_evaluation(id).expect("kind checked").impact.clone();
                if old != target {
                    if let Some(existing) = &self.impact(&target).expect("checked").evaluated_by {
                        return Err(ModelError::Cardinality(format!(
                            "impact `{target}` is already evaluated by `{existing}`"
                        )));
                    }
                    if let Some(i) = self.impact_mut(&old) {
                        i.evaluated_by = None;
                        changes.touch(&old, "evaluatedBy");
                    }
                    self.impact_mut(&target).expect("checked").evaluated_by = Some(id.clone());
                    changes.touch(&target, "evaluatedBy");
                    self.set_field_value(id, field, Value::String(target.to_string()))?;
                    changes.touch(id, field);
                }
            }
            (ElementKind::ImpactEvaluation, "uses") => {
                let current = self.impact_evaluation(id).expect("kind checked").uses.clone();
                let next = changed_id_set(field, &current, change)?;
                self.check_refs(field, next.difference(&current), &[ElementKind::Measure])?;
                if next != current {
                    self.set_field_value(id, field, serde_json::to_value(&next).expect("ids"))?;
                    changes.touch(id, field);
                }
            }
            (ElementKind::QualityAspectEvaluation, "qualityAspect") => {
                let target = parse_id(field, only_set(field, change)?)?;
                self.check_ref(field, &target, &[ElementKind::QualityAspect])?;
                let old = self.aspect_evaluation(id).expect("kind checked").quality_aspect.clone();
                if old != target {
                    if let Some(existing) = &self.quality_aspect(&target).expect("checked").evaluated_by {
                        return Err(ModelError::Cardinality(format!(
                            "quality aspect `{target}` is already evaluated by `{existing}`"
                        )));
                    }
                    if let Some(a) = self.quality_aspect_mut(&old) {
                        a.evaluated_by = None;
                        changes.touch(&old, "evaluatedBy");
                    }
                    self.quality_aspect_mut(&target).expect("checked").evaluated_by = Some(id.clone());
                    changes.touch(&target, "evaluatedBy");
                    self.set_field_value(id, field, Value::String(target.to_string()))?;
                    changes.touch(id, field);
                }
            }
            (ElementKind::QualityAspectEvaluation, "considers") => {
                let qae = self.aspect_evaluation(id).expect("kind checked");
                let aspect = qae.quality_aspect.clone();
                let current = qae.considers.clone();
                let next = changed_id_set(field, &current, change)?;
                self.check_considers(&aspect, next.difference(&current))?;
                if next != current {
                    self.set_field_value(id, field, serde_json::to_value(&next).expect("ids"))?;
                    changes.touch(id, field);
                }
            }
            (ElementKind::EntityType, "name") => {
                let name = parse_string(field, only_set(field, change)?)?;
                let et = self.entity_type(id).expect("kind checked");
                if et.name != name {
                    let is_root = et.parent.is_none();
                    self.entity_type_mut(id).expect("kind checked").name = name;
                    changes.touch(id, field);
                    if is_root {
                        self.refresh_artifact_roots(id, &mut changes);
                    }
                }
            }
            _ => {
                // plain value fields: round-trip through the element's JSON form
                let value = only_set(field, change)?.clone();
                let current = self.get(id).expect("kind checked").to_value();
                if current.get(field) != Some(&value) {
                    self.set_field_value(id, field, value)?;
                    changes.touch(id, field);
                }
            }
        }
        Ok(changes)
    }

    fn set_field_value(&mut self, id: &ElementId, field: &str, value: Value) -> Result<(), ModelError> {
        let element = self.get(id).expect("caller checked");
        let kind = element.kind();
        let mut json = element.to_value();
        json.as_object_mut().expect("elements are objects").insert(field.to_string(), value);
        let updated = Element::from_value(kind, json).map_err(|e| ModelError::InvalidChange {
            field: field.into(),
            reason: e.to_string(),
        })?;
        self.put(updated);
        Ok(())
    }

    fn move_impact_to_requirement(
        &mut self,
        impact: &ElementId,
        requirement: Option<&ElementId>,
        changes: &mut ChangeSet,
    ) {
        let old = self.impact(impact).and_then(|i| i.requirement.clone());
        if old.as_ref() == requirement {
            return;
        }
        if let Some(o) = &old {
            if let Some(r) = self.quality_requirement_mut(o) {
                r.grouped_impacts.remove(impact);
                changes.touch(o, "groupedImpacts");
            }
        }
        if let Some(n) = requirement {
            if let Some(r) = self.quality_requirement_mut(n) {
                r.grouped_impacts.insert(impact.clone());
                changes.touch(n, "groupedImpacts");
            }
        }
        if let Some(i) = self.impact_mut(impact) {
            i.requirement = requirement.cloned();
            changes.touch(impact, "requirement");
        }
    }

    fn set_tree_parent(
        &mut self,
        id: &ElementId,
        kind: ElementKind,
        parent: Option<ElementId>,
        changes: &mut ChangeSet,
    ) -> Result<(), ModelError> {
        if let Some(p) = &parent {
            self.check_ref("parent", p, &[kind])?;
            if p == id || self.ancestors(p).contains(id) {
                return Err(ModelError::Cycle { id: id.clone(), parent: p.clone() });
            }
        }
        let old = self.tree_parent(id).cloned();
        if old == parent {
            return Ok(());
        }
        let (mirror, own) = match kind {
            ElementKind::QualityAspect => ("refinedBy", "parent"),
            _ => ("children", "parent"),
        };
        if let Some(o) = &old {
            self.tree_children_mut(o).retain(|c| c != id);
            changes.touch(o, mirror);
        }
        if let Some(p) = &parent {
            self.tree_children_mut(p).push(id.clone());
            changes.touch(p, mirror);
        }
        match kind {
            ElementKind::QualityAspect => self.quality_aspect_mut(id).expect("kind").parent = parent,
            _ => self.entity_type_mut(id).expect("kind").parent = parent,
        }
        changes.touch(id, own);
        if kind == ElementKind::EntityType {
            self.refresh_artifact_roots(id, changes);
        }
        Ok(())
    }

    fn tree_children_mut(&mut self, id: &ElementId) -> &mut Vec<ElementId> {
        if self.kind_of(id) == Some(ElementKind::QualityAspect) {
            &mut self.quality_aspect_mut(id).expect("kind").refined_by
        } else {
            &mut self.entity_type_mut(id).expect("kind").children
        }
    }

    fn refresh_artifact_roots(&mut self, id: &ElementId, changes: &mut ChangeSet) {
        let root_name = self.computed_artifact_root(id);
        for node in self.subtree(id).unwrap_or_default() {
            if let Some(et) = self.entity_type_mut(&node) {
                if et.artifact_root != root_name {
                    et.artifact_root = root_name.clone();
                    changes.touch(&node, "artifactRoot");
                }
            }
        }
    }
}
