//! The quality model graph.
//!
//! A model holds nine element kinds in one id-keyed map. Two of them form
//! trees (quality aspects, entity types); the rest are flat collections linked
//! by typed references. Every reference is held by exactly one owning field,
//! and some owning fields are mirrored on the target (`Impact.qualityAspect`
//! is mirrored by `QualityAspect.influencedBy`, and so on). The editing
//! primitives in [`edit`] keep owners and mirrors symmetric.

mod edit;
mod element;
mod file;
mod tags;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use edit::{ChangeSet, FieldChange, FieldRef, Payload};
pub use element::{
    Effect, Element, ElementId, ElementKind, EntityType, Factor, Impact, ImpactEvaluation,
    Measure, Property, QualityAspect, QualityAspectEvaluation, QualityRequirement, RefEdge,
};
pub use tags::{fold, name_set, names_intersect, ContextTags};
pub(crate) use tags::{contains_name, same_name};
pub use validate::{validate, Purpose, Rule, Severity, Violation};
pub(crate) use validate::required_considers;

use crate::goal::AdaptationGoal;

/// Schema identifier written to `meta.schema`.
pub const SCHEMA: &str = "qm-adapt/1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("element `{0}` not found")]
    NotFound(ElementId),
    #[error("field `{field}` references missing element `{target}`")]
    Dangling { field: String, target: ElementId },
    #[error("field `{field}` references `{target}` of kind {found}, expected {expected}")]
    WrongKind {
        field: String,
        target: ElementId,
        expected: String,
        found: ElementKind,
    },
    #[error("cannot delete `{id}`: still referenced by {}", format_referrers(.referrers))]
    BlockedDelete {
        id: ElementId,
        referrers: Vec<(ElementId, String)>,
    },
    #[error("{kind} has no field `{field}`")]
    UnknownField { kind: ElementKind, field: String },
    #[error("{kind}.{field} is maintained automatically and cannot be modified")]
    ReadOnlyField { kind: ElementKind, field: String },
    #[error("invalid change of `{field}`: {reason}")]
    InvalidChange { field: String, reason: String },
    #[error("setting the parent of `{id}` to `{parent}` would create a cycle")]
    Cycle { id: ElementId, parent: ElementId },
    #[error("cardinality violated: {0}")]
    Cardinality(String),
    #[error("invalid {kind} payload: {reason}")]
    InvalidPayload { kind: ElementKind, reason: String },
    #[error("invalid model file: {0}")]
    InvalidFile(String),
}

fn format_referrers(referrers: &[(ElementId, String)]) -> String {
    referrers
        .iter()
        .map(|(id, field)| format!("{id}.{field}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelMeta {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<AdaptationGoal>,
    #[serde(default)]
    pub provenance: serde_json::Map<String, serde_json::Value>,
    /// Id allocator; only ever grows so deleted ids are never handed out again.
    #[serde(default = "one")]
    pub next_id: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    pub meta: ModelMeta,
    elements: BTreeMap<ElementId, Element>,
}

macro_rules! typed_access {
    ($get:ident, $iter:ident, $variant:ident, $ty:ty) => {
        pub fn $get(&self, id: &ElementId) -> Option<&$ty> {
            match self.elements.get(id) {
                Some(Element::$variant(e)) => Some(e),
                _ => None,
            }
        }

        pub fn $iter(&self) -> impl Iterator<Item = &$ty> + '_ {
            self.elements.values().filter_map(|e| match e {
                Element::$variant(x) => Some(x),
                _ => None,
            })
        }
    };
}

macro_rules! typed_access_mut {
    ($get:ident, $variant:ident, $ty:ty) => {
        pub(crate) fn $get(&mut self, id: &ElementId) -> Option<&mut $ty> {
            match self.elements.get_mut(id) {
                Some(Element::$variant(e)) => Some(e),
                _ => None,
            }
        }
    };
}

impl QualityModel {
    /// Creates an empty model.
    pub fn create(name: &str) -> Result<Self, ModelError> {
        if name.trim().is_empty() {
            return Err(ModelError::InvalidInput("model name must not be empty".into()));
        }
        Ok(QualityModel {
            meta: ModelMeta {
                schema: SCHEMA.to_string(),
                name: name.trim().to_string(),
                version: String::new(),
                goal: None,
                provenance: serde_json::Map::new(),
                next_id: 1,
            },
            elements: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, id: &ElementId) -> Option<&Element> {
        self.elements.get(id)
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        self.elements.contains_key(id)
    }

    pub fn kind_of(&self, id: &ElementId) -> Option<ElementKind> {
        self.elements.get(id).map(Element::kind)
    }

    /// All elements in ascending id order.
    pub fn elements(&self) -> impl Iterator<Item = &Element> + '_ {
        self.elements.values()
    }

    pub fn ids_of_kind(&self, kind: ElementKind) -> Vec<ElementId> {
        self.elements
            .values()
            .filter(|e| e.kind() == kind)
            .map(|e| e.id().clone())
            .collect()
    }

    pub fn count_of_kind(&self, kind: ElementKind) -> usize {
        self.elements.values().filter(|e| e.kind() == kind).count()
    }

    /// Display name of an element, or its id when unnamed or missing.
    pub fn display_name(&self, id: &ElementId) -> String {
        match self.elements.get(id) {
            Some(e) => e.name().to_string(),
            None => id.to_string(),
        }
    }

    typed_access!(quality_aspect, quality_aspects, QualityAspect, QualityAspect);
    typed_access!(entity_type, entity_types, EntityType, EntityType);
    typed_access!(property, properties, Property, Property);
    typed_access!(factor, factors, Factor, Factor);
    typed_access!(impact, impacts, Impact, Impact);
    typed_access!(
        quality_requirement,
        quality_requirements,
        QualityRequirement,
        QualityRequirement
    );
    typed_access!(measure, measures, Measure, Measure);
    typed_access!(impact_evaluation, impact_evaluations, ImpactEvaluation, ImpactEvaluation);
    typed_access!(
        aspect_evaluation,
        aspect_evaluations,
        QualityAspectEvaluation,
        QualityAspectEvaluation
    );

    typed_access_mut!(quality_aspect_mut, QualityAspect, QualityAspect);
    typed_access_mut!(entity_type_mut, EntityType, EntityType);
    typed_access_mut!(factor_mut, Factor, Factor);
    typed_access_mut!(impact_mut, Impact, Impact);
    typed_access_mut!(quality_requirement_mut, QualityRequirement, QualityRequirement);
    typed_access_mut!(measure_mut, Measure, Measure);

    /// Depth-first pre-order listing of a tree node and its descendants,
    /// children in stored order.
    pub fn subtree(&self, root: &ElementId) -> Result<Vec<ElementId>, ModelError> {
        match self.kind_of(root) {
            None => return Err(ModelError::NotFound(root.clone())),
            Some(ElementKind::QualityAspect | ElementKind::EntityType) => {}
            Some(found) => {
                return Err(ModelError::WrongKind {
                    field: "root".into(),
                    target: root.clone(),
                    expected: "QualityAspect or EntityType".into(),
                    found,
                })
            }
        }
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![root.clone()];
        while let Some(id) = stack.pop() {
            if !seen.insert(id.clone()) {
                continue;
            }
            let children = self.tree_children(&id);
            out.push(id);
            for c in children.into_iter().rev() {
                stack.push(c);
            }
        }
        Ok(out)
    }

    pub(crate) fn tree_children(&self, id: &ElementId) -> Vec<ElementId> {
        match self.elements.get(id) {
            Some(Element::QualityAspect(a)) => a.refined_by.clone(),
            Some(Element::EntityType(e)) => e.children.clone(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn tree_parent(&self, id: &ElementId) -> Option<&ElementId> {
        match self.elements.get(id) {
            Some(Element::QualityAspect(a)) => a.parent.as_ref(),
            Some(Element::EntityType(e)) => e.parent.as_ref(),
            _ => None,
        }
    }

    /// Ancestors from the direct parent upwards; stops on cycles.
    pub fn ancestors(&self, id: &ElementId) -> Vec<ElementId> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::from([id.clone()]);
        let mut cur = self.tree_parent(id).cloned();
        while let Some(p) = cur {
            if !seen.insert(p.clone()) || !self.contains(&p) {
                break;
            }
            cur = self.tree_parent(&p).cloned();
            out.push(p);
        }
        out
    }

    /// Every `(referrer, field)` pair whose owned field points at `id`.
    /// Empty exactly when the element may be removed.
    pub fn references_to(&self, id: &ElementId) -> Result<Vec<(ElementId, &'static str)>, ModelError> {
        if !self.contains(id) {
            return Err(ModelError::NotFound(id.clone()));
        }
        let mut out = Vec::new();
        for e in self.elements.values() {
            for edge in e.owned_refs() {
                if edge.target == id {
                    out.push((e.id().clone(), edge.field));
                }
            }
        }
        Ok(out)
    }

    /// Viewpoints of an aspect: its own declaration, else the nearest
    /// ancestor's. Empty means the aspect applies to every viewpoint.
    pub fn effective_viewpoints(&self, id: &ElementId) -> BTreeSet<String> {
        let mut chain = vec![id.clone()];
        chain.extend(self.ancestors(id));
        for a in chain {
            if let Some(qa) = self.quality_aspect(&a) {
                if !qa.viewpoints.is_empty() {
                    return qa.viewpoints.clone();
                }
            }
        }
        BTreeSet::new()
    }

    /// Name of the root of an entity type's tree.
    pub(crate) fn computed_artifact_root(&self, id: &ElementId) -> String {
        let root = self.ancestors(id).last().cloned().unwrap_or_else(|| id.clone());
        self.entity_type(&root).map(|e| e.name.clone()).unwrap_or_default()
    }

    /// Id the next insertion of `kind` will receive.
    pub fn peek_id(&self, kind: ElementKind) -> ElementId {
        self.next_free(kind).0
    }

    fn next_free(&self, kind: ElementKind) -> (ElementId, u64) {
        let mut seq = self.meta.next_id.max(1);
        loop {
            let id = ElementId::new(format!("{}-{}", kind.id_prefix(), seq));
            if !self.contains(&id) {
                return (id, seq + 1);
            }
            seq += 1;
        }
    }

    pub(crate) fn allocate_id(&mut self, kind: ElementKind) -> ElementId {
        let (id, next) = self.next_free(kind);
        self.meta.next_id = next;
        id
    }

    pub(crate) fn put(&mut self, element: Element) {
        self.elements.insert(element.id().clone(), element);
    }

    pub(crate) fn take(&mut self, id: &ElementId) -> Option<Element> {
        self.elements.remove(id)
    }

    /// Equality of the element graph and metadata, ignoring the id allocator.
    pub fn same_content(&self, other: &QualityModel) -> bool {
        let mut a = self.meta.clone();
        let mut b = other.meta.clone();
        a.next_id = 0;
        b.next_id = 0;
        a == b && self.elements == other.elements
    }
}
