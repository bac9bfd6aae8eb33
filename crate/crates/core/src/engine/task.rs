use std::cell::OnceCell;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    required_considers, validate, ElementId, ElementKind, Purpose, QualityModel, Rule, Violation,
};

use super::Operation;

/// Obligation attached to a task. When it holds, the open task is done.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "camelCase")]
pub enum Check {
    /// Needs an explicit decision; never completes by itself.
    Manual,
    /// Every listed field of the element is non-empty.
    #[serde(rename_all = "camelCase")]
    FieldsSet { element: ElementId, fields: Vec<String> },
    /// Some element of `kind` refers to `element` through `field`.
    #[serde(rename_all = "camelCase")]
    ReferencedBy { element: ElementId, kind: ElementKind, field: String },
    /// The impact evaluation uses every measure of the factor it evaluates.
    #[serde(rename_all = "camelCase")]
    UsesCover { evaluation: ElementId },
    /// The aspect evaluation considers all evaluations it must aggregate.
    #[serde(rename_all = "camelCase")]
    ConsidersCover { evaluation: ElementId },
    /// A validation rule no longer reports the element.
    #[serde(rename_all = "camelCase")]
    RuleClear { element: ElementId, rule: Rule },
    All { all: Vec<Check> },
    Any { any: Vec<Check> },
}

/// Model state a batch of checks is evaluated against; validation runs at
/// most once per context.
pub(crate) struct CheckContext<'a> {
    pub model: &'a QualityModel,
    pub purpose: Purpose,
    violations: OnceCell<Vec<Violation>>,
}

impl<'a> CheckContext<'a> {
    pub fn new(model: &'a QualityModel, purpose: Purpose) -> Self {
        CheckContext { model, purpose, violations: OnceCell::new() }
    }

    pub fn violations(&self) -> &[Violation] {
        self.violations.get_or_init(|| validate(self.model, self.purpose))
    }
}

fn non_empty(v: Option<&Value>) -> bool {
    match v {
        None | Some(Value::Null) => false,
        Some(Value::String(s)) => !s.trim().is_empty(),
        Some(Value::Array(a)) => !a.is_empty(),
        Some(Value::Object(o)) => !o.is_empty(),
        Some(Value::Bool(_) | Value::Number(_)) => true,
    }
}

impl Check {
    pub fn fields(element: &ElementId, fields: &[&str]) -> Check {
        Check::FieldsSet { element: element.clone(), fields: fields.iter().map(|f| f.to_string()).collect() }
    }

    pub fn referenced(element: &ElementId, kind: ElementKind, field: &str) -> Check {
        Check::ReferencedBy { element: element.clone(), kind, field: field.into() }
    }

    pub fn is_manual(&self) -> bool {
        matches!(self, Check::Manual)
    }

    pub fn holds(&self, model: &QualityModel, purpose: Purpose) -> bool {
        self.holds_in(&CheckContext::new(model, purpose))
    }

    pub(crate) fn holds_in(&self, cx: &CheckContext<'_>) -> bool {
        let model = cx.model;
        match self {
            Check::Manual => false,
            Check::FieldsSet { element, fields } => match model.get(element) {
                Some(e) => {
                    let v = e.to_value();
                    fields.iter().all(|f| non_empty(v.get(f)))
                }
                None => false,
            },
            Check::ReferencedBy { element, kind, field } => model.elements().any(|e| {
                e.kind() == *kind
                    && e.owned_refs().iter().any(|r| r.field == field && r.target == element)
            }),
            Check::UsesCover { evaluation } => {
                let Some(ie) = model.impact_evaluation(evaluation) else { return false };
                let Some(factor) = model.impact(&ie.impact).and_then(|i| model.factor(&i.factor)) else {
                    return false;
                };
                factor.is_quantified.is_subset(&ie.uses)
            }
            Check::ConsidersCover { evaluation } => {
                let Some(qae) = model.aspect_evaluation(evaluation) else { return false };
                required_considers(model, &qae.quality_aspect).is_subset(&qae.considers)
            }
            Check::RuleClear { element, rule } => !cx
                .violations()
                .iter()
                .any(|v| &v.target == element && v.rule == *rule),
            Check::All { all } => all.iter().all(|c| c.holds_in(cx)),
            Check::Any { any } => any.iter().any(|c| c.holds_in(cx)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Open,
    Completed,
    Waived,
    Obsolete,
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskStatus::Open => "open",
            TaskStatus::Completed => "completed",
            TaskStatus::Waived => "waived",
            TaskStatus::Obsolete => "obsolete",
        })
    }
}

/// How and when a task left the open state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "camelCase")]
pub enum Resolution {
    /// Completed explicitly with these operations.
    Operations { seq: u64, ops: Vec<Operation> },
    /// Its obligation became true as a side effect of another command.
    Satisfied { seq: u64 },
    Waived { seq: u64, note: String },
    /// Its target was deleted.
    TargetDeleted { seq: u64 },
}

/// An adaptation task on the to-do list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub task_id: String,
    pub template_id: String,
    pub target: Option<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related: Option<ElementId>,
    pub text: String,
    pub status: TaskStatus,
    /// Log sequence number of the command that raised the task.
    pub origin: u64,
    pub check: Check,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggested_ops: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
}

impl Task {
    pub fn is_open(&self) -> bool {
        self.status == TaskStatus::Open
    }
}
