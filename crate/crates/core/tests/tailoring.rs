mod common;

use qm_adapt::canonical::content_hash;
use qm_adapt::engine::Session;
use qm_adapt::model::{validate, ElementKind, Rule};
use qm_adapt::store::{load_goal, load_model};
use qm_adapt::tailor::{apply_tailoring, plan_tailoring, ActionKind, TailorError, TailoringOptions, TailoringRule};

use common::fixture;

fn embedded_case() -> (qm_adapt::QualityModel, qm_adapt::AdaptationGoal, qm_adapt::AdaptationGoal) {
    (
        load_model(fixture("embedded/reference.qm.json")).unwrap(),
        load_goal(fixture("embedded/ga.goal.json")).unwrap(),
        load_goal(fixture("embedded/gr.goal.json")).unwrap(),
    )
}

#[test]
fn plan_does_not_touch_the_model() {
    let (m, ga, gr) = embedded_case();
    let before = content_hash(&m);
    let report = plan_tailoring(&m, &ga, &gr, TailoringOptions::default());
    assert_eq!(content_hash(&m), before);
    assert_eq!(report.model_hash, before);
    assert_eq!(report.counts.values().sum::<usize>(), report.actions.len());
}

#[test]
fn applying_the_plan_removes_targets_and_adds_stub() {
    let (m, ga, gr) = embedded_case();
    let report = plan_tailoring(&m, &ga, &gr, TailoringOptions::default());
    let mut s = Session::new(m, ga);
    let applied = apply_tailoring(&mut s, &report).unwrap();
    for a in report.actions.iter().filter(|a| a.action == ActionKind::Delete) {
        for id in &a.deletes {
            assert!(!s.model().contains(id), "{id} survived");
        }
    }
    let usability = s.model().quality_aspects().find(|q| q.name == "Usability").unwrap();
    assert!(usability.stub);
    assert_eq!(usability.parent.as_ref().map(|p| p.as_str()), Some("qa-1"));
    assert!(!applied.seeded_tasks.is_empty());
    assert!(s.tasks().iter().any(|t| t.template_id.starts_with("tailor.tr10:")));
    assert!(validate(s.model(), s.goal().purpose).iter().all(|v| !matches!(v.rule, Rule::V1 | Rule::V2 | Rule::V6)));
}

#[test]
fn replanning_after_apply_is_empty_apart_from_reviews() {
    let (m, ga, gr) = embedded_case();
    let report = plan_tailoring(&m, &ga, &gr, TailoringOptions::default());
    let mut s = Session::new(m, ga.clone());
    apply_tailoring(&mut s, &report).unwrap();
    let again = plan_tailoring(s.model(), &ga, &gr, TailoringOptions { tr10: false });
    assert!(again.is_empty(), "{:?}", again.actions);
}

#[test]
fn stale_plan_is_rejected() {
    let (m, ga, gr) = embedded_case();
    let report = plan_tailoring(&m, &ga, &gr, TailoringOptions::default());
    let mut s = Session::new(m, ga);
    s.apply_operation(qm_adapt::engine::Operation::del("m-24")).unwrap();
    let before = s.log().len();
    assert!(matches!(apply_tailoring(&mut s, &report), Err(TailorError::Stale { .. })));
    assert_eq!(s.log().len(), before);
}

#[test]
fn tr10_can_be_switched_off() {
    let (m, ga, gr) = embedded_case();
    let report = plan_tailoring(&m, &ga, &gr, TailoringOptions { tr10: false });
    assert!(report.actions.iter().all(|a| a.rule != TailoringRule::TR10));
}

#[test]
fn identical_goal_changes_nothing() {
    let (m, _, gr) = embedded_case();
    let report = plan_tailoring(&m, &gr, &gr, TailoringOptions::default());
    assert!(report.is_empty(), "{:?}", report.actions);
}

#[test]
fn specification_purpose_plans_evaluation_removal() {
    let (m, mut ga, gr) = embedded_case();
    ga.purpose = qm_adapt::Purpose::Specification;
    let report = plan_tailoring(&m, &ga, &gr, TailoringOptions::default());
    let tr3: Vec<_> = report.actions.iter().filter(|a| a.rule == TailoringRule::TR3).collect();
    assert!(!tr3.is_empty());
    assert!(tr3.iter().all(|a| matches!(
        a.kind,
        Some(ElementKind::Measure | ElementKind::ImpactEvaluation | ElementKind::QualityAspectEvaluation)
    )));
}
