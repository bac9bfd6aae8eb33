//! Element kinds of the quality meta-model.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tags::ContextTags;

/// Opaque element identifier, unique across all collections of a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(id: impl Into<String>) -> Self {
        ElementId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        ElementId(s.to_string())
    }
}

impl From<String> for ElementId {
    fn from(s: String) -> Self {
        ElementId(s)
    }
}

impl AsRef<str> for ElementId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    QualityAspect,
    EntityType,
    Property,
    Factor,
    Impact,
    QualityRequirement,
    Measure,
    ImpactEvaluation,
    QualityAspectEvaluation,
}

impl ElementKind {
    pub const ALL: [ElementKind; 9] = [
        ElementKind::QualityAspect,
        ElementKind::EntityType,
        ElementKind::Property,
        ElementKind::Factor,
        ElementKind::Impact,
        ElementKind::QualityRequirement,
        ElementKind::Measure,
        ElementKind::ImpactEvaluation,
        ElementKind::QualityAspectEvaluation,
    ];

    /// Key of the collection holding this kind in the model file.
    pub fn collection(self) -> &'static str {
        match self {
            ElementKind::QualityAspect => "qualityAspects",
            ElementKind::EntityType => "entityTypes",
            ElementKind::Property => "properties",
            ElementKind::Factor => "factors",
            ElementKind::Impact => "impacts",
            ElementKind::QualityRequirement => "qualityRequirements",
            ElementKind::Measure => "measures",
            ElementKind::ImpactEvaluation => "impactEvaluations",
            ElementKind::QualityAspectEvaluation => "qualityAspectEvaluations",
        }
    }

    pub(crate) fn id_prefix(self) -> &'static str {
        match self {
            ElementKind::QualityAspect => "qa",
            ElementKind::EntityType => "et",
            ElementKind::Property => "p",
            ElementKind::Factor => "f",
            ElementKind::Impact => "i",
            ElementKind::QualityRequirement => "qr",
            ElementKind::Measure => "m",
            ElementKind::ImpactEvaluation => "ie",
            ElementKind::QualityAspectEvaluation => "qae",
        }
    }

    /// Human wording used in task texts.
    pub fn label(self) -> &'static str {
        match self {
            ElementKind::QualityAspect => "quality aspect",
            ElementKind::EntityType => "entity type",
            ElementKind::Property => "property",
            ElementKind::Factor => "factor",
            ElementKind::Impact => "impact",
            ElementKind::QualityRequirement => "quality requirement",
            ElementKind::Measure => "measure",
            ElementKind::ImpactEvaluation => "impact evaluation",
            ElementKind::QualityAspectEvaluation => "quality aspect evaluation",
        }
    }

    /// Measures and the two evaluation kinds form the optional evaluation part.
    pub fn is_evaluation_part(self) -> bool {
        matches!(
            self,
            ElementKind::Measure
                | ElementKind::ImpactEvaluation
                | ElementKind::QualityAspectEvaluation
        )
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementKind::QualityAspect => "QualityAspect",
            ElementKind::EntityType => "EntityType",
            ElementKind::Property => "Property",
            ElementKind::Factor => "Factor",
            ElementKind::Impact => "Impact",
            ElementKind::QualityRequirement => "QualityRequirement",
            ElementKind::Measure => "Measure",
            ElementKind::ImpactEvaluation => "ImpactEvaluation",
            ElementKind::QualityAspectEvaluation => "QualityAspectEvaluation",
        };
        f.write_str(s)
    }
}

impl FromStr for ElementKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ElementKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown element kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QualityAspect {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parent: Option<ElementId>,
    #[serde(default)]
    pub refined_by: Vec<ElementId>,
    /// Declared viewpoints; empty means "inherit from the parent".
    #[serde(default)]
    pub viewpoints: BTreeSet<String>,
    #[serde(default)]
    pub influenced_by: BTreeSet<ElementId>,
    #[serde(default)]
    pub evaluated_by: Option<ElementId>,
    #[serde(default)]
    pub stub: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EntityType {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parent: Option<ElementId>,
    #[serde(default)]
    pub children: Vec<ElementId>,
    /// Name of the root of this element's tree.
    #[serde(default)]
    pub artifact_root: String,
    #[serde(default)]
    pub stub: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Property {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Factor {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub entity_type: Option<ElementId>,
    #[serde(default)]
    pub property: Option<ElementId>,
    #[serde(default)]
    pub is_quantified: BTreeSet<ElementId>,
    #[serde(default)]
    pub tags: ContextTags,
    #[serde(default)]
    pub stub: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Impact {
    pub id: ElementId,
    pub factor: ElementId,
    pub quality_aspect: ElementId,
    #[serde(default)]
    pub requirement: Option<ElementId>,
    #[serde(default)]
    pub effect: Effect,
    #[serde(default)]
    pub justification: String,
    #[serde(default)]
    pub evaluated_by: Option<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QualityRequirement {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub grouped_impacts: BTreeSet<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Measure {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub measurement_rule: String,
    #[serde(default)]
    pub scale: String,
    #[serde(default)]
    pub quantifies: BTreeSet<ElementId>,
    #[serde(default)]
    pub tags: ContextTags,
    #[serde(default)]
    pub stub: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ImpactEvaluation {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    pub impact: ElementId,
    #[serde(default)]
    pub uses: BTreeSet<ElementId>,
    #[serde(default)]
    pub evaluation_rule: String,
    #[serde(default)]
    pub evaluation_scale: String,
    #[serde(default)]
    pub stub: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QualityAspectEvaluation {
    pub id: ElementId,
    #[serde(default)]
    pub name: String,
    pub quality_aspect: ElementId,
    #[serde(default)]
    pub aggregation_rule: String,
    #[serde(default)]
    pub considers: BTreeSet<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    QualityAspect(QualityAspect),
    EntityType(EntityType),
    Property(Property),
    Factor(Factor),
    Impact(Impact),
    QualityRequirement(QualityRequirement),
    Measure(Measure),
    ImpactEvaluation(ImpactEvaluation),
    QualityAspectEvaluation(QualityAspectEvaluation),
}

/// One outgoing reference of an element through a field it owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefEdge<'a> {
    pub field: &'static str,
    pub target: &'a ElementId,
    /// Kinds the target may have.
    pub expected: &'static [ElementKind],
}

const QA: &[ElementKind] = &[ElementKind::QualityAspect];
const ET: &[ElementKind] = &[ElementKind::EntityType];
const PROP: &[ElementKind] = &[ElementKind::Property];
const FACTOR: &[ElementKind] = &[ElementKind::Factor];
const IMPACT: &[ElementKind] = &[ElementKind::Impact];
const REQ: &[ElementKind] = &[ElementKind::QualityRequirement];
const MEASURE: &[ElementKind] = &[ElementKind::Measure];
const IE: &[ElementKind] = &[ElementKind::ImpactEvaluation];
const QAE: &[ElementKind] = &[ElementKind::QualityAspectEvaluation];
const EVALS: &[ElementKind] = &[
    ElementKind::ImpactEvaluation,
    ElementKind::QualityAspectEvaluation,
];

impl Element {
    pub fn kind(&self) -> ElementKind {
        match self {
            Element::QualityAspect(_) => ElementKind::QualityAspect,
            Element::EntityType(_) => ElementKind::EntityType,
            Element::Property(_) => ElementKind::Property,
            Element::Factor(_) => ElementKind::Factor,
            Element::Impact(_) => ElementKind::Impact,
            Element::QualityRequirement(_) => ElementKind::QualityRequirement,
            Element::Measure(_) => ElementKind::Measure,
            Element::ImpactEvaluation(_) => ElementKind::ImpactEvaluation,
            Element::QualityAspectEvaluation(_) => ElementKind::QualityAspectEvaluation,
        }
    }

    pub fn id(&self) -> &ElementId {
        match self {
            Element::QualityAspect(e) => &e.id,
            Element::EntityType(e) => &e.id,
            Element::Property(e) => &e.id,
            Element::Factor(e) => &e.id,
            Element::Impact(e) => &e.id,
            Element::QualityRequirement(e) => &e.id,
            Element::Measure(e) => &e.id,
            Element::ImpactEvaluation(e) => &e.id,
            Element::QualityAspectEvaluation(e) => &e.id,
        }
    }

    /// Display name; impacts have none and fall back to their id.
    pub fn name(&self) -> &str {
        let name = match self {
            Element::QualityAspect(e) => &e.name,
            Element::EntityType(e) => &e.name,
            Element::Property(e) => &e.name,
            Element::Factor(e) => &e.name,
            Element::Impact(e) => return e.id.as_str(),
            Element::QualityRequirement(e) => &e.name,
            Element::Measure(e) => &e.name,
            Element::ImpactEvaluation(e) => &e.name,
            Element::QualityAspectEvaluation(e) => &e.name,
        };
        if name.trim().is_empty() {
            self.id().as_str()
        } else {
            name
        }
    }

    pub fn is_stub(&self) -> bool {
        match self {
            Element::QualityAspect(e) => e.stub,
            Element::EntityType(e) => e.stub,
            Element::Factor(e) => e.stub,
            Element::Measure(e) => e.stub,
            Element::ImpactEvaluation(e) => e.stub,
            _ => false,
        }
    }

    /// References through fields this element owns. An element listed here
    /// blocks deletion of the target until the reference is removed.
    pub fn owned_refs(&self) -> Vec<RefEdge<'_>> {
        let mut out = Vec::new();
        fn one<'a>(
            out: &mut Vec<RefEdge<'a>>,
            field: &'static str,
            target: Option<&'a ElementId>,
            expected: &'static [ElementKind],
        ) {
            if let Some(t) = target {
                out.push(RefEdge { field, target: t, expected });
            }
        }
        match self {
            Element::QualityAspect(e) => one(&mut out, "parent", e.parent.as_ref(), QA),
            Element::EntityType(e) => one(&mut out, "parent", e.parent.as_ref(), ET),
            Element::Property(_) => {}
            Element::Factor(e) => {
                one(&mut out, "entityType", e.entity_type.as_ref(), ET);
                one(&mut out, "property", e.property.as_ref(), PROP);
            }
            Element::Impact(e) => {
                one(&mut out, "factor", Some(&e.factor), FACTOR);
                one(&mut out, "qualityAspect", Some(&e.quality_aspect), QA);
                one(&mut out, "requirement", e.requirement.as_ref(), REQ);
            }
            Element::QualityRequirement(_) => {}
            Element::Measure(e) => {
                for t in &e.quantifies {
                    out.push(RefEdge { field: "quantifies", target: t, expected: FACTOR });
                }
            }
            Element::ImpactEvaluation(e) => {
                one(&mut out, "impact", Some(&e.impact), IMPACT);
                for t in &e.uses {
                    out.push(RefEdge { field: "uses", target: t, expected: MEASURE });
                }
            }
            Element::QualityAspectEvaluation(e) => {
                one(&mut out, "qualityAspect", Some(&e.quality_aspect), QA);
                for t in &e.considers {
                    out.push(RefEdge { field: "considers", target: t, expected: EVALS });
                }
            }
        }
        out
    }

    /// References held in fields that mirror another element's owned field.
    pub fn mirrored_refs(&self) -> Vec<RefEdge<'_>> {
        let mut out = Vec::new();
        match self {
            Element::QualityAspect(e) => {
                for t in &e.refined_by {
                    out.push(RefEdge { field: "refinedBy", target: t, expected: QA });
                }
                for t in &e.influenced_by {
                    out.push(RefEdge { field: "influencedBy", target: t, expected: IMPACT });
                }
                if let Some(t) = &e.evaluated_by {
                    out.push(RefEdge { field: "evaluatedBy", target: t, expected: QAE });
                }
            }
            Element::EntityType(e) => {
                for t in &e.children {
                    out.push(RefEdge { field: "children", target: t, expected: ET });
                }
            }
            Element::Factor(e) => {
                for t in &e.is_quantified {
                    out.push(RefEdge { field: "isQuantified", target: t, expected: MEASURE });
                }
            }
            Element::Impact(e) => {
                if let Some(t) = &e.evaluated_by {
                    out.push(RefEdge { field: "evaluatedBy", target: t, expected: IE });
                }
            }
            Element::QualityRequirement(e) => {
                for t in &e.grouped_impacts {
                    out.push(RefEdge { field: "groupedImpacts", target: t, expected: IMPACT });
                }
            }
            _ => {}
        }
        out
    }

    pub fn to_value(&self) -> serde_json::Value {
        let v = match self {
            Element::QualityAspect(e) => serde_json::to_value(e),
            Element::EntityType(e) => serde_json::to_value(e),
            Element::Property(e) => serde_json::to_value(e),
            Element::Factor(e) => serde_json::to_value(e),
            Element::Impact(e) => serde_json::to_value(e),
            Element::QualityRequirement(e) => serde_json::to_value(e),
            Element::Measure(e) => serde_json::to_value(e),
            Element::ImpactEvaluation(e) => serde_json::to_value(e),
            Element::QualityAspectEvaluation(e) => serde_json::to_value(e),
        };
        v.expect("element structs serialize infallibly")
    }

    pub fn from_value(kind: ElementKind, value: serde_json::Value) -> serde_json::Result<Self> {
        Ok(match kind {
            ElementKind::QualityAspect => Element::QualityAspect(serde_json::from_value(value)?),
            ElementKind::EntityType => Element::EntityType(serde_json::from_value(value)?),
            ElementKind::Property => Element::Property(serde_json::from_value(value)?),
            ElementKind::Factor => Element::Factor(serde_json::from_value(value)?),
            ElementKind::Impact => Element::Impact(serde_json::from_value(value)?),
            ElementKind::QualityRequirement => {
                Element::QualityRequirement(serde_json::from_value(value)?)
            }
            ElementKind::Measure => Element::Measure(serde_json::from_value(value)?),
            ElementKind::ImpactEvaluation => {
                Element::ImpactEvaluation(serde_json::from_value(value)?)
            }
            ElementKind::QualityAspectEvaluation => {
                Element::QualityAspectEvaluation(serde_json::from_value(value)?)
            }
        })
    }
}
