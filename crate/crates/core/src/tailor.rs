//! Goal-based tailoring of a reference model (rules TR1 to TR10).
//!
//! [`plan_tailoring`] is a dry run that never touches its input;
//! [`apply_tailoring`] executes a plan through an engine [`Session`] so that
//! every delete cascades exactly like an interactive one.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::canonical::content_hash;
use crate::engine::{cascade_delete, Command, EngineError, Operation, ReviewItem, Session};
use crate::goal::AdaptationGoal;
use crate::model::{contains_name, same_name, ContextTags, ElementId, ElementKind, Purpose, QualityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TailoringRule {
    TR1,
    TR2,
    TR3,
    TR4,
    TR5,
    TR6,
    TR7,
    TR8,
    TR9,
    TR10,
}

impl fmt::Display for TailoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    Delete,
    AddStub,
    FlagForReview,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TailoringAction {
    pub rule: TailoringRule,
    pub action: ActionKind,
    /// Element to delete; absent for stubs and review items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ElementId>,
    /// Kind of the deleted element or of the stub to create.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ElementKind>,
    /// Display name of the target, the stub, or `dimension=value` for reviews.
    pub name: String,
    /// Parent of a stub aspect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<ElementId>,
    /// Everything the delete removes, cascade included.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deletes: Vec<ElementId>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TailoringReport {
    /// Hash of the model the plan was computed for.
    pub model_hash: String,
    pub actions: Vec<TailoringAction>,
    pub counts: BTreeMap<TailoringRule, usize>,
    /// Tasks opened when the plan was applied; empty for a dry run.
    #[serde(default)]
    pub seeded_tasks: Vec<String>,
}

impl TailoringReport {
    pub fn deleted_targets(&self) -> impl Iterator<Item = &ElementId> {
        self.actions
            .iter()
            .filter(|a| a.action == ActionKind::Delete)
            .filter_map(|a| a.target.as_ref())
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailoringOptions {
    /// Raise review items for context values the reference model lacks.
    pub tr10: bool,
}

impl Default for TailoringOptions {
    fn default() -> Self {
        TailoringOptions { tr10: true }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailorError {
    #[error("tailoring plan is stale: planned for model {planned}, session model is {actual}")]
    Stale { planned: String, actual: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

struct Planner<'a> {
    original: &'a QualityModel,
    scratch: QualityModel,
    ga: &'a AdaptationGoal,
    actions: Vec<TailoringAction>,
}

impl<'a> Planner<'a> {
    /// Deletes each candidate that is still present, processing shallow
    /// elements first so a deleted subtree is reported once at its top.
    /// Actions are emitted in id order.
    fn delete_all(&mut self, rule: TailoringRule, candidates: Vec<ElementId>, reason: impl Fn(&ElementId) -> String) {
        let mut by_depth: Vec<(usize, ElementId)> = candidates
            .into_iter()
            .map(|id| (self.original.ancestors(&id).len(), id))
            .collect();
        by_depth.sort();
        let mut probe = self.scratch.clone();
        let mut targets = Vec::new();
        for (_, id) in by_depth {
            if probe.contains(&id) {
                cascade_delete(&mut probe, self.ga, &id).expect("planned delete on a present element");
                targets.push(id);
            }
        }
        targets.sort();
        for id in targets {
            if !self.scratch.contains(&id) {
                continue;
            }
            let deletes = cascade_delete(&mut self.scratch, self.ga, &id).expect("planned delete on a present element");
            self.actions.push(TailoringAction {
                rule,
                action: ActionKind::Delete,
                kind: self.original.kind_of(&id),
                name: self.original.display_name(&id),
                reason: reason(&id),
                target: Some(id),
                parent: None,
                deletes,
            });
        }
    }

    fn present(&self, kind: ElementKind) -> Vec<ElementId> {
        self.scratch.ids_of_kind(kind)
    }
}

fn list(names: &std::collections::BTreeSet<String>) -> String {
    names.iter().map(String::as_str).collect::<Vec<_>>().join(", ")
}

fn tags_reason(tags: &ContextTags, ga: &AdaptationGoal) -> String {
    format!("tags {{{tags}}} do not apply in context {{{}}}", ga.context)
}

/// Top-level quality aspects and the umbrella aspect they hang from, if the
/// aspect tree has a single root that is not itself a quality of interest.
fn focus_level(model: &QualityModel, ga: &AdaptationGoal, gr: &AdaptationGoal) -> (Option<ElementId>, Vec<ElementId>) {
    let roots: Vec<_> = model.quality_aspects().filter(|qa| qa.parent.is_none()).collect();
    if let [root] = roots.as_slice() {
        let named_quality = contains_name(&ga.focus, &root.name) || contains_name(&gr.focus, &root.name);
        if !named_quality {
            return (Some(root.id.clone()), root.refined_by.clone());
        }
    }
    (None, roots.iter().map(|qa| qa.id.clone()).collect())
}

/// Computes the tailoring actions for `model` under target goal `ga` and
/// reference goal `gr`. The model is not changed.
pub fn plan_tailoring(
    model: &QualityModel,
    ga: &AdaptationGoal,
    gr: &AdaptationGoal,
    options: TailoringOptions,
) -> TailoringReport {
    let mut p = Planner { original: model, scratch: model.clone(), ga, actions: Vec::new() };

    // TR1: entity type trees for artifacts outside the goal.
    let foreign: Vec<_> = model
        .entity_types()
        .filter(|et| !contains_name(&ga.object, &et.artifact_root))
        .map(|et| et.id.clone())
        .collect();
    p.delete_all(TailoringRule::TR1, foreign, |id| {
        format!("artifact `{}` is not an object of the goal", model.computed_artifact_root(id))
    });

    // TR2: goal artifacts the reference model does not cover.
    for object in &ga.object {
        let covered = contains_name(&gr.object, object)
            || p.scratch.entity_types().any(|et| et.parent.is_none() && same_name(&et.name, object));
        if !covered {
            p.actions.push(TailoringAction {
                rule: TailoringRule::TR2,
                action: ActionKind::AddStub,
                target: None,
                kind: Some(ElementKind::EntityType),
                name: object.clone(),
                parent: None,
                deletes: Vec::new(),
                reason: format!("artifact `{object}` is an object of the goal but not of the reference model"),
            });
        }
    }

    // TR3: a specification model has no evaluation part.
    if ga.purpose == Purpose::Specification {
        let mut evaluation_part = p.present(ElementKind::Measure);
        evaluation_part.extend(p.present(ElementKind::ImpactEvaluation));
        evaluation_part.extend(p.present(ElementKind::QualityAspectEvaluation));
        p.delete_all(TailoringRule::TR3, evaluation_part, |_| "the goal's purpose is specification".into());
    }

    // TR4 and TR5: aspects (and their evaluations) seen from other viewpoints.
    let outside_view = |id: &ElementId| {
        let vps = model.effective_viewpoints(id);
        !vps.is_empty() && !vps.iter().any(|v| contains_name(&ga.viewpoint, v))
    };
    let aspects: Vec<_> = p.present(ElementKind::QualityAspect).into_iter().filter(|id| outside_view(id)).collect();
    p.delete_all(TailoringRule::TR4, aspects, |id| {
        format!("viewpoints {{{}}} exclude the goal viewpoints", list(&model.effective_viewpoints(id)))
    });
    let evaluations: Vec<_> = p
        .scratch
        .aspect_evaluations()
        .filter(|e| outside_view(&e.quality_aspect))
        .map(|e| e.id.clone())
        .collect();
    p.delete_all(TailoringRule::TR5, evaluations, |id| {
        let aspect = model.aspect_evaluation(id).map(|e| e.quality_aspect.clone()).unwrap_or_else(|| id.clone());
        format!("evaluated aspect has viewpoints {{{}}} only", list(&model.effective_viewpoints(&aspect)))
    });

    // TR6: top-level qualities outside the focus.
    let (umbrella, top) = focus_level(model, ga, gr);
    let unfocused: Vec<_> = top
        .iter()
        .filter(|id| p.scratch.contains(id))
        .filter(|id| !contains_name(&ga.focus, model.get(id).map(|e| e.name()).unwrap_or_default()))
        .cloned()
        .collect();
    p.delete_all(TailoringRule::TR6, unfocused, |id| {
        format!("`{}` is not a quality of interest", model.display_name(id))
    });

    // TR7: focus qualities missing from the reference model.
    for focus in &ga.focus {
        let present = top
            .iter()
            .filter_map(|id| p.scratch.quality_aspect(id))
            .any(|qa| same_name(&qa.name, focus));
        if !contains_name(&gr.focus, focus) && !present {
            p.actions.push(TailoringAction {
                rule: TailoringRule::TR7,
                action: ActionKind::AddStub,
                target: None,
                kind: Some(ElementKind::QualityAspect),
                name: focus.clone(),
                parent: umbrella.clone().filter(|u| p.scratch.contains(u)),
                deletes: Vec::new(),
                reason: format!("`{focus}` is a quality of interest but not covered by the reference model"),
            });
        }
    }

    // TR8 and TR9: context-specific factors and measures.
    let factors: Vec<_> = p
        .scratch
        .factors()
        .filter(|f| !f.tags.applicable_in(&ga.context))
        .map(|f| f.id.clone())
        .collect();
    p.delete_all(TailoringRule::TR8, factors, |id| {
        tags_reason(&model.factor(id).expect("factor in original model").tags, ga)
    });
    let measures: Vec<_> = p
        .scratch
        .measures()
        .filter(|m| !m.tags.applicable_in(&ga.context))
        .map(|m| m.id.clone())
        .collect();
    p.delete_all(TailoringRule::TR9, measures, |id| {
        tags_reason(&model.measure(id).expect("measure in original model").tags, ga)
    });

    // TR10: context values the reference model was not built for.
    if options.tr10 {
        for (dimension, values) in ga.context.iter() {
            let Some(reference) = gr.context.values(dimension) else { continue };
            for value in values.iter().filter(|v| !contains_name(reference, v)) {
                p.actions.push(TailoringAction {
                    rule: TailoringRule::TR10,
                    action: ActionKind::FlagForReview,
                    target: None,
                    kind: None,
                    name: format!("{dimension}={value}"),
                    parent: None,
                    deletes: Vec::new(),
                    reason: format!("the reference model covers {dimension}={{{}}} only", list(reference)),
                });
            }
        }
    }

    let mut counts = BTreeMap::new();
    for a in &p.actions {
        *counts.entry(a.rule).or_insert(0) += 1;
    }
    TailoringReport { model_hash: content_hash(model), actions: p.actions, counts, seeded_tasks: Vec::new() }
}

/// Operations and review items that realize a plan.
pub fn tailoring_command(report: &TailoringReport) -> Command {
    let mut ops = Vec::new();
    let mut reviews = Vec::new();
    for a in &report.actions {
        match a.action {
            ActionKind::Delete => {
                if let Some(t) = &a.target {
                    ops.push(Operation::del(t.clone()));
                }
            }
            ActionKind::AddStub => {
                let kind = a.kind.unwrap_or(ElementKind::QualityAspect);
                let mut payload = json!({"name": a.name, "stub": true});
                if let Some(parent) = &a.parent {
                    payload["parent"] = json!(parent);
                }
                ops.push(Operation::add(kind, payload));
            }
            ActionKind::FlagForReview => reviews.push(ReviewItem {
                template_id: format!("tailor.tr10:{}", a.name),
                text: format!("Add stubs for factors and measures for {}.", a.name),
                suggested_ops: vec!["ADD(Factor)".into(), "ADD(Measure)".into()],
            }),
        }
    }
    Command::Tailor { ops, reviews }
}

/// Applies `report` to the session's current model as one command. Fails
/// without changes when the model is not the one the plan was made for.
pub fn apply_tailoring(session: &mut Session, report: &TailoringReport) -> Result<TailoringReport, TailorError> {
    let actual = content_hash(session.model());
    if actual != report.model_hash {
        return Err(TailorError::Stale { planned: report.model_hash.clone(), actual });
    }
    let mut applied = report.clone();
    if report.is_empty() {
        return Ok(applied);
    }
    let record = session.execute(tailoring_command(report))?;
    applied.seeded_tasks = record.spawned_tasks.clone();
    Ok(applied)
}
