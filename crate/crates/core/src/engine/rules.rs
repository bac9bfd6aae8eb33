//! Consequences of elementary operations, one function per table cell.
//!
//! Consistency consequences are operations the engine runs on its own.
//! Adaptation consequences become tasks on the to-do list. Template ids name
//! the cell they come from, e.g. `factor.del.orphan-property`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::goal::AdaptationGoal;
use crate::model::{contains_name, Element, ElementId, ElementKind, Purpose, QualityModel};

use super::task::Check;
use super::Operation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Consistency,
    Adaptation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Consequence {
    pub flavor: Flavor,
    pub template_id: String,
    pub target: Option<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related: Option<ElementId>,
    /// Task text; empty for consistency consequences.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    /// The operation a consistency consequence executes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<Operation>,
    #[serde(default = "manual", skip_serializing_if = "Check::is_manual")]
    pub check: Check,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggested_ops: Vec<String>,
}

fn manual() -> Check {
    Check::Manual
}

fn consistency(template: &str, op: Operation) -> Consequence {
    let target = match &op {
        Operation::Del { target } | Operation::Mod { target, .. } => Some(target.clone()),
        Operation::Add { .. } => None,
    };
    Consequence {
        flavor: Flavor::Consistency,
        template_id: template.into(),
        target,
        related: None,
        text: String::new(),
        op: Some(op),
        check: Check::Manual,
        suggested_ops: Vec::new(),
    }
}

fn task(template: &str, target: &ElementId, text: String, check: Check, suggested: &[&str]) -> Consequence {
    Consequence {
        flavor: Flavor::Adaptation,
        template_id: template.into(),
        target: Some(target.clone()),
        related: None,
        text,
        op: None,
        check,
        suggested_ops: suggested.iter().map(|s| s.to_string()).collect(),
    }
}

/// `factor "Documentation of source code"`-style reference for task texts.
fn named(model: &QualityModel, id: &ElementId) -> String {
    match model.get(id) {
        Some(Element::Impact(i)) => format!(
            "the impact of {} on {}",
            model.display_name(&i.factor),
            model.display_name(&i.quality_aspect)
        ),
        _ => model.display_name(id),
    }
}

pub(crate) fn referrers(model: &QualityModel, id: &ElementId, kind: ElementKind, field: &str) -> Vec<ElementId> {
    model
        .elements()
        .filter(|e| e.kind() == kind)
        .filter(|e| e.owned_refs().iter().any(|r| r.field == field && r.target == id))
        .map(|e| e.id().clone())
        .collect()
}

/// Automatic steps that must run before `id` can be removed: cascading
/// deletes from the table, then unlinking references it does not cascade.
pub fn del_consistency(model: &QualityModel, id: &ElementId) -> Vec<Consequence> {
    let mut out = Vec::new();
    let Some(e) = model.get(id) else { return out };
    let dels = |out: &mut Vec<Consequence>, template: &str, ids: Vec<ElementId>| {
        out.extend(ids.into_iter().map(|t| consistency(template, Operation::Del { target: t })));
    };
    match e {
        Element::EntityType(et) => {
            dels(&mut out, "entitytype.del.factors", referrers(model, id, ElementKind::Factor, "entityType"));
            dels(&mut out, "entitytype.del.children", et.children.clone());
        }
        Element::Factor(_) => {
            dels(&mut out, "factor.del.impacts", referrers(model, id, ElementKind::Impact, "factor"));
            for m in referrers(model, id, ElementKind::Measure, "quantifies") {
                out.push(consistency("factor.del.unlink-measures", Operation::remove(m, "quantifies", json!(id))));
            }
        }
        Element::Impact(i) => {
            dels(&mut out, "impact.del.evaluations", i.evaluated_by.iter().cloned().collect());
        }
        Element::Property(_) => {
            dels(&mut out, "property.del.factors", referrers(model, id, ElementKind::Factor, "property"));
        }
        Element::QualityAspect(a) => {
            dels(&mut out, "aspect.del.impacts", referrers(model, id, ElementKind::Impact, "qualityAspect"));
            dels(&mut out, "aspect.del.evaluation", a.evaluated_by.iter().cloned().collect());
            dels(&mut out, "aspect.del.children", a.refined_by.clone());
        }
        Element::QualityRequirement(_) => {
            dels(&mut out, "requirement.del.impacts", referrers(model, id, ElementKind::Impact, "requirement"));
        }
        Element::Measure(_) => {
            for ie in referrers(model, id, ElementKind::ImpactEvaluation, "uses") {
                out.push(consistency("measure.del.unlink-evaluations", Operation::remove(ie, "uses", json!(id))));
            }
        }
        Element::ImpactEvaluation(_) => {
            for q in referrers(model, id, ElementKind::QualityAspectEvaluation, "considers") {
                out.push(consistency("evaluation.del.unlink-considers", Operation::remove(q, "considers", json!(id))));
            }
        }
        Element::QualityAspectEvaluation(_) => {
            for q in referrers(model, id, ElementKind::QualityAspectEvaluation, "considers") {
                out.push(consistency(
                    "aspect-evaluation.del.unlink-considers",
                    Operation::remove(q, "considers", json!(id)),
                ));
            }
        }
    }
    out
}

/// Adaptation tasks raised by deleting `deleted`, evaluated on the model as it
/// is after the delete and its cascade. `used_by` lists the impact
/// evaluations that used a deleted measure before it was unlinked.
pub fn del_adaptation(
    after: &QualityModel,
    deleted: &Element,
    used_by: &[ElementId],
    ga: &AdaptationGoal,
) -> Vec<Consequence> {
    let mut out = Vec::new();
    let evaluation = ga.purpose == Purpose::Evaluation;
    match deleted {
        Element::Factor(f) => {
            if let Some(p) = f.property.as_ref().filter(|p| after.contains(p)) {
                if referrers(after, p, ElementKind::Factor, "property").is_empty() {
                    out.push(task(
                        "factor.del.orphan-property",
                        p,
                        format!("If the property {} is no longer needed, delete it.", named(after, p)),
                        Check::referenced(p, ElementKind::Factor, "property"),
                        &["DEL(Property)"],
                    ));
                }
            }
            if let Some(et) = f.entity_type.as_ref().and_then(|e| after.entity_type(e)) {
                let leaf = et.children.is_empty();
                if leaf && referrers(after, &et.id, ElementKind::Factor, "entityType").is_empty() {
                    out.push(task(
                        "factor.del.orphan-entitytype",
                        &et.id,
                        format!("If the entity type {} is no longer needed, delete it.", named(after, &et.id)),
                        Check::Any {
                            any: vec![
                                Check::referenced(&et.id, ElementKind::Factor, "entityType"),
                                Check::referenced(&et.id, ElementKind::EntityType, "parent"),
                            ],
                        },
                        &["DEL(EntityType)"],
                    ));
                }
            }
        }
        Element::Impact(i) => {
            if after.contains(&i.factor) && referrers(after, &i.factor, ElementKind::Impact, "factor").is_empty() {
                out.push(task(
                    "impact.del.orphan-factor",
                    &i.factor,
                    format!("If the factor {} is no longer needed, delete it.", named(after, &i.factor)),
                    Check::referenced(&i.factor, ElementKind::Impact, "factor"),
                    &["DEL(Factor)"],
                ));
            }
            if let Some(r) = i.requirement.as_ref().filter(|r| after.contains(r)) {
                if referrers(after, r, ElementKind::Impact, "requirement").is_empty() {
                    out.push(task(
                        "impact.del.orphan-requirement",
                        r,
                        format!("If the quality requirement {} is no longer needed, delete it.", named(after, r)),
                        Check::referenced(r, ElementKind::Impact, "requirement"),
                        &["DEL(QualityRequirement)"],
                    ));
                }
            }
            // The table's row suggests deleting an entity type here; the
            // condition is about the aspect, so the aspect is what is offered.
            if let Some(a) = after.quality_aspect(&i.quality_aspect) {
                if a.refined_by.is_empty() && a.influenced_by.is_empty() {
                    out.push(task(
                        "impact.del.orphan-aspect",
                        &a.id,
                        format!("If the quality aspect {} is no longer needed, delete it.", named(after, &a.id)),
                        Check::Any {
                            any: vec![
                                Check::referenced(&a.id, ElementKind::Impact, "qualityAspect"),
                                Check::referenced(&a.id, ElementKind::QualityAspect, "parent"),
                            ],
                        },
                        &["DEL(QualityAspect)"],
                    ));
                }
            }
        }
        Element::Measure(_) => {
            for ie in used_by {
                if after.contains(ie) {
                    out.push(task(
                        "measure.del.evaluation-rule",
                        ie,
                        format!(
                            "Delete the measure {} from the evaluation rule of the impact evaluation {}.",
                            deleted.name(),
                            named(after, ie)
                        ),
                        Check::Manual,
                        &["MOD(ImpactEvaluation)"],
                    ));
                }
            }
        }
        Element::ImpactEvaluation(ie) if evaluation => {
            if after.contains(&ie.impact) {
                out.push(task(
                    "evaluation.del.replace",
                    &ie.impact,
                    format!("Delete {} or add a new impact evaluation for it.", named(after, &ie.impact)),
                    Check::fields(&ie.impact, &["evaluatedBy"]),
                    &["DEL(Impact)", "ADD(ImpactEvaluation)"],
                ));
            }
        }
        Element::QualityAspectEvaluation(q) if evaluation
            && after.contains(&q.quality_aspect) => {
                out.push(task(
                    "aspect-evaluation.del.replace",
                    &q.quality_aspect,
                    format!(
                        "Delete the quality aspect {} or add a new quality aspect evaluation for it.",
                        named(after, &q.quality_aspect)
                    ),
                    Check::fields(&q.quality_aspect, &["evaluatedBy"]),
                    &["DEL(QualityAspect)", "ADD(QualityAspectEvaluation)"],
                ));
            }
        _ => {}
    }
    out
}

/// Adaptation tasks for a freshly added element.
pub fn add_adaptation(model: &QualityModel, id: &ElementId, ga: &AdaptationGoal) -> Vec<Consequence> {
    let mut out = Vec::new();
    let evaluation = ga.purpose == Purpose::Evaluation;
    let Some(e) = model.get(id) else { return out };
    let n = named(model, id);
    match e {
        Element::EntityType(et) => {
            out.push(task(
                "entitytype.add.name-description",
                id,
                format!("Set name and description of the entity type {n}."),
                Check::fields(id, &["name", "description"]),
                &["MOD(EntityType)"],
            ));
            if et.parent.is_none() && !contains_name(ga.object.iter(), &et.name) {
                out.push(task(
                    "entitytype.add.parent",
                    id,
                    format!("Associate the entity type {n} with 1 superordinate entity type."),
                    Check::fields(id, &["parent"]),
                    &["MOD(EntityType)"],
                ));
            }
            out.push(task(
                "entitytype.add.factors",
                id,
                format!(
                    "Check which factors influencing the quality of interest can be built for entities of the type {n} and create them."
                ),
                Check::referenced(id, ElementKind::Factor, "entityType"),
                &["ADD(Factor)"],
            ));
        }
        Element::Factor(_) => {
            out.push(task(
                "factor.add.property",
                id,
                format!("Associate the factor {n} with 1 property."),
                Check::fields(id, &["property"]),
                &["MOD(Factor)"],
            ));
            out.push(task(
                "factor.add.entitytype",
                id,
                format!("Associate the factor {n} with 1 entity type."),
                Check::fields(id, &["entityType"]),
                &["MOD(Factor)"],
            ));
            if evaluation {
                out.push(task(
                    "factor.add.measure",
                    id,
                    format!("Associate the factor {n} with ≥ 1 measure."),
                    Check::fields(id, &["isQuantified"]),
                    &["MOD(Factor)"],
                ));
            }
            out.push(task(
                "factor.add.description",
                id,
                format!("Provide a description for the factor {n}."),
                Check::fields(id, &["description"]),
                &["MOD(Factor)"],
            ));
            out.push(task(
                "factor.add.impacts",
                id,
                format!("Define ≥ 1 impacts for the factor {n}."),
                Check::referenced(id, ElementKind::Impact, "factor"),
                &["ADD(Impact)"],
            ));
        }
        Element::Impact(_) => {
            out.push(task(
                "impact.add.aspect",
                id,
                format!("Associate {n} with 1 quality aspect."),
                Check::fields(id, &["qualityAspect"]),
                &["MOD(Impact)"],
            ));
            out.push(task(
                "impact.add.requirement",
                id,
                format!("Associate {n} with 1 quality requirement."),
                Check::fields(id, &["requirement"]),
                &["MOD(Impact)"],
            ));
            out.push(task(
                "impact.add.factor",
                id,
                format!("Associate {n} with 1 factor."),
                Check::fields(id, &["factor"]),
                &["MOD(Impact)"],
            ));
            out.push(task(
                "impact.add.justification-effect",
                id,
                format!("Set justification and effect of {n}."),
                Check::fields(id, &["justification", "effect"]),
                &["MOD(Impact)"],
            ));
            if evaluation {
                out.push(task(
                    "impact.add.evaluation",
                    id,
                    format!("Associate {n} with 1 impact evaluation."),
                    Check::fields(id, &["evaluatedBy"]),
                    &["ADD(ImpactEvaluation)"],
                ));
            }
        }
        Element::Property(_) => {
            out.push(task(
                "property.add.name-description",
                id,
                format!("Set name and description of the property {n}."),
                Check::fields(id, &["name", "description"]),
                &["MOD(Property)"],
            ));
            out.push(task(
                "property.add.factors",
                id,
                format!("Check which factors that influence the quality in focus can be built with the property {n} and add them."),
                Check::referenced(id, ElementKind::Factor, "property"),
                &["ADD(Factor)"],
            ));
        }
        Element::QualityAspect(a) => {
            out.push(task(
                "aspect.add.name-description",
                id,
                format!("Set name and description of the quality aspect {n}."),
                Check::fields(id, &["name", "description"]),
                &["MOD(QualityAspect)"],
            ));
            let other_root = model.quality_aspects().any(|o| o.parent.is_none() && &o.id != id);
            if a.parent.is_none() && other_root {
                out.push(task(
                    "aspect.add.parent",
                    id,
                    format!("Associate the quality aspect {n} with 1 superordinate quality aspect."),
                    Check::fields(id, &["parent"]),
                    &["MOD(QualityAspect)"],
                ));
            }
            out.push(task(
                "aspect.add.refine",
                id,
                format!("Refine the quality aspect {n} with sub-aspects, if necessary."),
                Check::Manual,
                &["ADD(QualityAspect)"],
            ));
            if evaluation {
                out.push(task(
                    "aspect.add.evaluation",
                    id,
                    format!("Associate the quality aspect {n} with 1 quality aspect evaluation."),
                    Check::fields(id, &["evaluatedBy"]),
                    &["ADD(QualityAspectEvaluation)"],
                ));
            }
            out.push(task(
                "aspect.add.impacts",
                id,
                format!("Check which factors influence the quality aspect {n} and add impact relationships for them."),
                Check::referenced(id, ElementKind::Impact, "qualityAspect"),
                &["ADD(Impact)"],
            ));
        }
        Element::QualityRequirement(_) => {
            out.push(task(
                "requirement.add.name-description",
                id,
                format!("Set name and description of the quality requirement {n}."),
                Check::fields(id, &["name", "description"]),
                &["MOD(QualityRequirement)"],
            ));
        }
        Element::Measure(_) => {
            out.push(task(
                "measure.add.name-rule",
                id,
                "Provide name and measurement rule.".into(),
                Check::fields(id, &["name", "measurementRule"]),
                &["MOD(Measure)"],
            ));
            out.push(task(
                "measure.add.factor",
                id,
                format!("Associate the measure {n} with ≥ 1 factor."),
                Check::fields(id, &["quantifies"]),
                &["MOD(Measure)"],
            ));
            out.push(task(
                "measure.add.evaluation",
                id,
                format!("Associate the measure {n} with ≥ 1 impact evaluation."),
                Check::referenced(id, ElementKind::ImpactEvaluation, "uses"),
                &["MOD(ImpactEvaluation)"],
            ));
        }
        Element::ImpactEvaluation(_) => {
            out.push(task(
                "evaluation.add.impact",
                id,
                format!("Associate the impact evaluation {n} with 1 impact."),
                Check::fields(id, &["impact"]),
                &["MOD(ImpactEvaluation)"],
            ));
            out.push(task(
                "evaluation.add.measure",
                id,
                format!("Associate the impact evaluation {n} with ≥ 1 measure."),
                Check::fields(id, &["uses"]),
                &["MOD(ImpactEvaluation)"],
            ));
        }
        Element::QualityAspectEvaluation(_) => {
            out.push(task(
                "aspect-evaluation.add.aspect",
                id,
                format!("Associate the quality aspect evaluation {n} with 1 quality aspect."),
                Check::fields(id, &["qualityAspect"]),
                &["MOD(QualityAspectEvaluation)"],
            ));
            out.push(task(
                "aspect-evaluation.add.aggregation-rule",
                id,
                format!(
                    "Provide an aggregation rule for the quality aspect evaluation {n} that considers all evaluations of influencing impacts and subordinated quality aspects."
                ),
                Check::All {
                    all: vec![
                        Check::fields(id, &["aggregationRule"]),
                        Check::ConsidersCover { evaluation: id.clone() },
                    ],
                },
                &["MOD(QualityAspectEvaluation)"],
            ));
        }
    }
    out
}

/// Adaptation tasks for a change of `field` on `id`, whether requested
/// directly or caused by keeping a mirror field in sync. Only the fields the
/// table has a row for produce anything.
pub fn mod_adaptation(model: &QualityModel, id: &ElementId, field: &str) -> Vec<Consequence> {
    let mut out = Vec::new();
    let Some(e) = model.get(id) else { return out };
    match (e, field) {
        (Element::Factor(f), "isQuantified") => {
            for i in referrers(model, id, ElementKind::Impact, "factor") {
                if let Some(ie) = model.impact(&i).and_then(|i| i.evaluated_by.clone()) {
                    let mut c = task(
                        "factor.mod.is-quantified",
                        &ie,
                        format!(
                            "Check that all relevant measures of the factor {} are associated with the impact evaluation {}.",
                            named(model, &f.id),
                            named(model, &ie)
                        ),
                        Check::UsesCover { evaluation: ie.clone() },
                        &["MOD(ImpactEvaluation.uses)"],
                    );
                    c.related = Some(f.id.clone());
                    out.push(c);
                }
            }
        }
        (Element::Impact(i), "factor") => {
            if let Some(ie) = &i.evaluated_by {
                let mut c = task(
                    "impact.mod.factor",
                    ie,
                    format!(
                        "Check that all relevant measures of all associated factors are associated with the impact evaluation {}.",
                        named(model, ie)
                    ),
                    Check::UsesCover { evaluation: ie.clone() },
                    &["MOD(ImpactEvaluation.uses)"],
                );
                c.related = Some(id.clone());
                out.push(c);
            }
        }
        (Element::QualityAspect(a), "refinedBy" | "influencedBy") => {
            if let Some(qae) = &a.evaluated_by {
                let (template, what) = if field == "refinedBy" {
                    ("aspect.mod.refined-by", "quality aspect evaluations of sub-aspects refining")
                } else {
                    ("aspect.mod.influenced-by", "impact evaluations of impacts influencing")
                };
                let mut c = task(
                    template,
                    qae,
                    format!(
                        "Assure that all {what} the quality aspect {} are considered in the quality aspect evaluation {}.",
                        named(model, id),
                        named(model, qae)
                    ),
                    Check::ConsidersCover { evaluation: qae.clone() },
                    &["MOD(QualityAspectEvaluation)"],
                );
                c.related = Some(id.clone());
                out.push(c);
            }
        }
        (Element::Measure(m), "measurementRule") => {
            for ie in referrers(model, id, ElementKind::ImpactEvaluation, "uses") {
                let mut c = task(
                    "measure.mod.rule",
                    &ie,
                    format!(
                        "Check that the modified measure {} is correctly used in the evaluation rule of the impact evaluation {}.",
                        named(model, &m.id),
                        named(model, &ie)
                    ),
                    Check::Manual,
                    &["MOD(ImpactEvaluation)"],
                );
                c.related = Some(id.clone());
                out.push(c);
            }
        }
        (Element::ImpactEvaluation(_), "uses") => {
            out.push(task(
                "evaluation.mod.uses",
                id,
                format!(
                    "Assure that the evaluation rule of the impact evaluation {} considers all used measures.",
                    named(model, id)
                ),
                Check::Manual,
                &["MOD(ImpactEvaluation)"],
            ));
        }
        _ => {}
    }
    out
}
