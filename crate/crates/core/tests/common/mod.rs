//! Seeded generators for random models, goals and operation streams.
#![allow(dead_code)]

use std::path::PathBuf;

use qm_adapt::engine::Operation;
use qm_adapt::model::{ContextTags, ElementId, ElementKind, Purpose, QualityModel};
use qm_adapt::AdaptationGoal;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub const ARTIFACTS: &[&str] = &["Source code", "Requirements specification", "Design", "Test cases"];
pub const VIEWPOINTS: &[&str] = &["User", "Developer", "Operator"];
pub const QUALITIES: &[&str] = &["Reliability", "Safety", "Usability", "Maintainability", "Security", "Performance"];
pub const DIMENSIONS: &[(&str, &[&str])] = &[
    ("Domain", &["Embedded", "Web", "Desktop"]),
    ("Language", &["C", "C++", "Assembler", "Java"]),
    ("Paradigm", &["OO", "Procedural"]),
];

fn subset<'a>(rng: &mut TestRng, pool: &[&'a str], min: usize) -> Vec<&'a str> {
    let n = rng.gen_range(min..=pool.len());
    let mut v: Vec<&str> = pool.choose_multiple(rng, n).copied().collect();
    v.sort();
    v
}

pub fn random_tags(rng: &mut TestRng, p: f64) -> ContextTags {
    let mut pairs: Vec<(&str, Vec<&str>)> = Vec::new();
    for (d, vs) in DIMENSIONS {
        if rng.gen_bool(p) {
            pairs.push((d, subset(rng, vs, 1)));
        }
    }
    ContextTags::from_pairs(pairs).unwrap()
}

pub fn random_goal(rng: &mut TestRng, purpose: Option<Purpose>) -> AdaptationGoal {
    let purpose = purpose.unwrap_or(if rng.gen_bool(0.5) { Purpose::Evaluation } else { Purpose::Specification });
    AdaptationGoal {
        object: qm_adapt::model::name_set(subset(rng, ARTIFACTS, 1)),
        purpose,
        viewpoint: qm_adapt::model::name_set(subset(rng, VIEWPOINTS, 1)),
        focus: qm_adapt::model::name_set(subset(rng, QUALITIES, 1)),
        context: random_tags(rng, 0.6),
        weights: None,
    }
}

fn pick(rng: &mut TestRng, ids: &[ElementId]) -> Option<ElementId> {
    ids.choose(rng).cloned()
}

fn pick_some(rng: &mut TestRng, ids: &[ElementId], max: usize) -> Vec<ElementId> {
    if ids.is_empty() {
        return Vec::new();
    }
    let n = rng.gen_range(0..=max.min(ids.len()));
    ids.choose_multiple(rng, n).cloned().collect()
}

fn insert(m: &mut QualityModel, kind: ElementKind, v: Value) -> Option<ElementId> {
    m.insert_element(kind, v.as_object().unwrap()).ok().map(|(id, _)| id)
}

/// A random model with every element kind, built through the model
/// primitives so it is structurally sound. Size is at most `max` elements.
pub fn random_model(rng: &mut TestRng, max: usize) -> QualityModel {
    let mut m = QualityModel::create("random").unwrap();
    m.meta.goal = Some(random_goal(rng, None));
    let budget = rng.gen_range(9..=max.max(9));
    // Rough share per kind, in insertion order.
    let share = |w: usize| (budget * w / 100).max(1);
    let mut qas: Vec<ElementId> = Vec::new();
    for i in 0..share(12) {
        let parent = if qas.is_empty() || rng.gen_bool(0.15) { None } else { pick(rng, &qas) };
        let vps = if rng.gen_bool(0.4) { subset(rng, VIEWPOINTS, 1) } else { vec![] };
        let name = format!("{} {i}", QUALITIES.choose(rng).unwrap());
        let id = insert(&mut m, ElementKind::QualityAspect, json!({
            "name": name, "description": "d", "parent": parent, "viewpoints": vps, "stub": rng.gen_bool(0.05)
        }));
        qas.extend(id);
    }
    let mut ets: Vec<ElementId> = Vec::new();
    for i in 0..share(10) {
        let payload = if ets.is_empty() || rng.gen_bool(0.25) {
            json!({"name": ARTIFACTS.choose(rng).unwrap(), "description": "d", "stub": rng.gen_bool(0.05)})
        } else {
            json!({"name": format!("Part {i}"), "description": "d", "parent": pick(rng, &ets)})
        };
        ets.extend(insert(&mut m, ElementKind::EntityType, payload));
    }
    let mut props = Vec::new();
    for i in 0..share(8) {
        props.extend(insert(&mut m, ElementKind::Property, json!({"name": format!("Property {i}"), "description": "d"})));
    }
    let mut factors = Vec::new();
    for i in 0..share(14) {
        let payload = json!({
            "name": format!("Factor {i}"), "description": "d",
            "entityType": pick(rng, &ets), "property": pick(rng, &props),
            "tags": random_tags(rng, 0.2), "stub": rng.gen_bool(0.05)
        });
        factors.extend(insert(&mut m, ElementKind::Factor, payload));
    }
    let mut reqs = Vec::new();
    for i in 0..share(4) {
        reqs.extend(insert(&mut m, ElementKind::QualityRequirement, json!({"name": format!("Req {i}"), "description": "d"})));
    }
    let mut impacts = Vec::new();
    for _ in 0..share(16) {
        let requirement = if rng.gen_bool(0.5) { pick(rng, &reqs) } else { None };
        let payload = json!({
            "factor": pick(rng, &factors), "qualityAspect": pick(rng, &qas), "requirement": requirement,
            "effect": if rng.gen_bool(0.7) { "positive" } else { "negative" },
            "justification": if rng.gen_bool(0.9) { "because" } else { "" }
        });
        impacts.extend(insert(&mut m, ElementKind::Impact, payload));
    }
    let mut measures = Vec::new();
    for i in 0..share(14) {
        let payload = json!({
            "name": format!("Measure {i}"), "measurementRule": "count", "scale": "count",
            "quantifies": pick_some(rng, &factors, 2), "tags": random_tags(rng, 0.2), "stub": rng.gen_bool(0.05)
        });
        measures.extend(insert(&mut m, ElementKind::Measure, payload));
    }
    let mut ies = Vec::new();
    for impact in impacts.clone() {
        if rng.gen_bool(0.7) {
            let payload = json!({
                "name": format!("IE of {impact}"), "impact": impact, "uses": pick_some(rng, &measures, 2),
                "evaluationRule": if rng.gen_bool(0.9) { "linear" } else { "" }, "stub": rng.gen_bool(0.05)
            });
            ies.extend(insert(&mut m, ElementKind::ImpactEvaluation, payload));
        }
    }
    // Aspect evaluations bottom-up so sub-aspect evaluations exist first.
    let mut by_depth: Vec<(usize, ElementId)> = qas.iter().map(|q| (m.ancestors(q).len(), q.clone())).collect();
    by_depth.sort_by(|a, b| b.cmp(a));
    for (_, qa) in by_depth {
        if !rng.gen_bool(0.7) {
            continue;
        }
        let aspect = m.quality_aspect(&qa).unwrap().clone();
        let mut wanted: Vec<ElementId> = aspect
            .influenced_by
            .iter()
            .filter_map(|i| m.impact(i).and_then(|i| i.evaluated_by.clone()))
            .collect();
        wanted.extend(aspect.refined_by.iter().filter_map(|c| m.quality_aspect(c).and_then(|c| c.evaluated_by.clone())));
        if rng.gen_bool(0.2) && !wanted.is_empty() {
            wanted.pop();
        }
        insert(&mut m, ElementKind::QualityAspectEvaluation, json!({
            "name": format!("QAE of {qa}"), "qualityAspect": qa, "considers": wanted,
            "aggregationRule": if rng.gen_bool(0.9) { "mean" } else { "" }
        }));
    }
    m
}

fn ids(m: &QualityModel, kind: ElementKind) -> Vec<ElementId> {
    m.ids_of_kind(kind)
}

fn any_id(rng: &mut TestRng, m: &QualityModel, kind: ElementKind) -> Value {
    match pick(rng, &ids(m, kind)) {
        Some(id) => json!(id),
        None => Value::Null,
    }
}

/// A random ADD with references drawn from the current model.
pub fn random_add(rng: &mut TestRng, m: &QualityModel) -> Operation {
    let kind = *ElementKind::ALL.choose(rng).unwrap();
    let n = rng.gen_range(0..1000);
    let payload = match kind {
        ElementKind::QualityAspect => json!({
            "name": format!("{} {n}", QUALITIES.choose(rng).unwrap()),
            "parent": if rng.gen_bool(0.7) { any_id(rng, m, kind) } else { Value::Null },
            "stub": rng.gen_bool(0.2)
        }),
        ElementKind::EntityType => json!({
            "name": format!("Entity {n}"),
            "parent": if rng.gen_bool(0.7) { any_id(rng, m, kind) } else { Value::Null }
        }),
        ElementKind::Property => json!({"name": format!("Property {n}")}),
        ElementKind::Factor => json!({
            "name": format!("Factor {n}"),
            "entityType": any_id(rng, m, ElementKind::EntityType),
            "property": any_id(rng, m, ElementKind::Property),
            "tags": random_tags(rng, 0.2),
            "stub": rng.gen_bool(0.2)
        }),
        ElementKind::Impact => json!({
            "factor": any_id(rng, m, ElementKind::Factor),
            "qualityAspect": any_id(rng, m, ElementKind::QualityAspect),
            "justification": if rng.gen_bool(0.5) { "why" } else { "" }
        }),
        ElementKind::QualityRequirement => json!({"name": format!("Req {n}")}),
        ElementKind::Measure => json!({
            "name": if rng.gen_bool(0.5) { format!("Measure {n}") } else { String::new() },
            "quantifies": pick_some(rng, &ids(m, ElementKind::Factor), 2),
            "stub": rng.gen_bool(0.3)
        }),
        ElementKind::ImpactEvaluation => json!({
            "impact": any_id(rng, m, ElementKind::Impact),
            "uses": pick_some(rng, &ids(m, ElementKind::Measure), 2)
        }),
        ElementKind::QualityAspectEvaluation => json!({
            "qualityAspect": any_id(rng, m, ElementKind::QualityAspect),
            "aggregationRule": "mean"
        }),
    };
    Operation::add(kind, payload)
}

/// A random MOD on a random element; may well be rejected by the model.
pub fn random_mod(rng: &mut TestRng, m: &QualityModel) -> Option<Operation> {
    let all: Vec<ElementId> = m.elements().map(|e| e.id().clone()).collect();
    let target = pick(rng, &all)?;
    let kind = m.kind_of(&target)?;
    let text = json!(format!("text {}", rng.gen_range(0..100)));
    let op = match (kind, rng.gen_range(0..4)) {
        (ElementKind::QualityAspect, 0) => Operation::set(target, "parent", any_id(rng, m, kind)),
        (ElementKind::QualityAspect, 1) => Operation::insert(target, "viewpoints", json!(VIEWPOINTS.choose(rng).unwrap())),
        (ElementKind::QualityAspect, _) => Operation::set(target, "description", text),
        (ElementKind::EntityType, 0) => Operation::set(target, "parent", any_id(rng, m, kind)),
        (ElementKind::EntityType, _) => Operation::set(target, "name", text),
        (ElementKind::Property, _) => Operation::set(target, "description", text),
        (ElementKind::Factor, 0) => Operation::insert(target, "isQuantified", any_id(rng, m, ElementKind::Measure)),
        (ElementKind::Factor, 1) => Operation::set(target, "property", any_id(rng, m, ElementKind::Property)),
        (ElementKind::Factor, 2) => Operation::set(target, "stub", json!(false)),
        (ElementKind::Factor, _) => Operation::set(target, "description", text),
        (ElementKind::Impact, 0) => Operation::set(target, "factor", any_id(rng, m, ElementKind::Factor)),
        (ElementKind::Impact, 1) => Operation::set(target, "requirement", any_id(rng, m, ElementKind::QualityRequirement)),
        (ElementKind::Impact, 2) => Operation::set(target, "qualityAspect", any_id(rng, m, ElementKind::QualityAspect)),
        (ElementKind::Impact, _) => Operation::set(target, "justification", text),
        (ElementKind::QualityRequirement, 0) => {
            Operation::insert(target, "groupedImpacts", any_id(rng, m, ElementKind::Impact))
        }
        (ElementKind::QualityRequirement, _) => Operation::set(target, "description", text),
        (ElementKind::Measure, 0) => Operation::insert(target, "quantifies", any_id(rng, m, ElementKind::Factor)),
        (ElementKind::Measure, 1) => Operation::remove(target, "quantifies", any_id(rng, m, ElementKind::Factor)),
        (ElementKind::Measure, 2) => Operation::set(target, "stub", json!(false)),
        (ElementKind::Measure, _) => Operation::set(target, "measurementRule", text),
        (ElementKind::ImpactEvaluation, 0) => Operation::insert(target, "uses", any_id(rng, m, ElementKind::Measure)),
        (ElementKind::ImpactEvaluation, 1) => Operation::remove(target, "uses", any_id(rng, m, ElementKind::Measure)),
        (ElementKind::ImpactEvaluation, _) => Operation::set(target, "evaluationRule", text),
        (ElementKind::QualityAspectEvaluation, 0 | 1) => {
            let pool: Vec<ElementId> = ids(m, ElementKind::ImpactEvaluation)
                .into_iter()
                .chain(ids(m, ElementKind::QualityAspectEvaluation))
                .collect();
            Operation::insert(target, "considers", json!(pick(rng, &pool)?))
        }
        (ElementKind::QualityAspectEvaluation, _) => Operation::set(target, "aggregationRule", text),
    };
    Some(op)
}

pub fn random_del(rng: &mut TestRng, m: &QualityModel) -> Option<Operation> {
    let all: Vec<ElementId> = m.elements().map(|e| e.id().clone()).collect();
    pick(rng, &all).map(Operation::del)
}

/// One random operation: roughly a third each of ADD, DEL and MOD.
pub fn random_op(rng: &mut TestRng, m: &QualityModel) -> Operation {
    let op = match rng.gen_range(0..3) {
        0 => random_del(rng, m),
        1 => random_mod(rng, m),
        _ => None,
    };
    op.unwrap_or_else(|| random_add(rng, m))
}

/// One random session step: an operation, a completion or a waiver. Returns
/// the element count before the step and the record on success.
pub fn random_step(rng: &mut TestRng, s: &mut qm_adapt::engine::Session) -> Option<(usize, qm_adapt::engine::LogRecord)> {
    let before = s.model().len();
    let open: Vec<String> = s.open_tasks().iter().map(|t| t.task_id.clone()).collect();
    let roll = rng.gen_range(0..10);
    let result = if roll < 2 && !open.is_empty() {
        let id = open.choose(rng).unwrap().clone();
        let ops = if rng.gen_bool(0.5) { vec![random_op(rng, s.model())] } else { vec![] };
        s.complete_task(&id, ops).cloned()
    } else if roll < 3 && !open.is_empty() {
        let id = open.choose(rng).unwrap().clone();
        s.waive_task(&id, "not needed here").cloned()
    } else {
        let op = random_op(rng, s.model());
        s.apply_operation(op).cloned()
    };
    result.ok().map(|r| (before, r))
}
