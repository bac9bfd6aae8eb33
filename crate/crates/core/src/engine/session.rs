use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::canonical::content_hash;
use crate::goal::AdaptationGoal;
use crate::model::{ChangeSet, ElementId, QualityModel, Severity};

use super::rules::{self, Consequence, Flavor};
use super::task::{Check, CheckContext, Resolution, Task, TaskStatus};
use super::{EngineError, Operation};

/// A to-do item raised without a target element, e.g. a review request from
/// tailoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReviewItem {
    pub template_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggested_ops: Vec<String>,
}

/// A user-level command; one log record each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Command {
    Apply { ops: Vec<Operation> },
    Complete { task_id: String, ops: Vec<Operation> },
    Waive { task_id: String, note: String },
    Review { items: Vec<ReviewItem> },
    /// Tailoring: operations plus review items as one atomic step.
    Tailor { ops: Vec<Operation>, reviews: Vec<ReviewItem> },
}

/// A consistency consequence the engine executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AutoStep {
    pub template_id: String,
    pub op: Operation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRecord {
    pub seq: u64,
    #[serde(flatten)]
    pub command: Command,
    #[serde(default)]
    pub created_elements: Vec<ElementId>,
    #[serde(default)]
    pub auto_consequences: Vec<AutoStep>,
    #[serde(default)]
    pub spawned_tasks: Vec<String>,
    #[serde(default)]
    pub refreshed_tasks: Vec<String>,
    #[serde(default)]
    pub completed_tasks: Vec<String>,
    #[serde(default)]
    pub obsoleted_tasks: Vec<String>,
    pub model_hash_after: String,
}

impl LogRecord {
    /// Number of elements deleted automatically by cascades.
    pub fn cascade_length(&self) -> usize {
        self.auto_consequences
            .iter()
            .filter(|a| matches!(a.op, Operation::Del { .. }))
            .count()
    }
}

/// Runs operations with their consistency cascades and collects the
/// adaptation consequences they raise.
struct Exec<'a> {
    model: &'a mut QualityModel,
    goal: &'a AdaptationGoal,
    visited: BTreeSet<ElementId>,
    auto: Vec<AutoStep>,
    pending: Vec<Consequence>,
    /// Adaptation consequences of the top-level operation only.
    own: Vec<Consequence>,
    created: Vec<ElementId>,
    depth: usize,
}

impl<'a> Exec<'a> {
    fn new(model: &'a mut QualityModel, goal: &'a AdaptationGoal) -> Self {
        Exec {
            model,
            goal,
            visited: BTreeSet::new(),
            auto: Vec::new(),
            pending: Vec::new(),
            own: Vec::new(),
            created: Vec::new(),
            depth: 0,
        }
    }

    fn raise(&mut self, consequences: Vec<Consequence>) {
        if self.depth == 0 {
            self.own.extend(consequences.iter().cloned());
        }
        self.pending.extend(consequences);
    }

    fn derived(&mut self, changes: &ChangeSet, skip: Option<(&ElementId, &str)>) {
        for r in &changes.changed {
            if skip == Some((&r.element, r.field.as_str())) {
                continue;
            }
            let c = rules::mod_adaptation(self.model, &r.element, &r.field);
            self.raise(c);
        }
    }

    fn run(&mut self, op: &Operation) -> Result<(), EngineError> {
        match op {
            Operation::Add { kind, payload } => {
                let (id, changes) = self.model.insert_element(*kind, payload)?;
                self.created.push(id.clone());
                let own = rules::add_adaptation(self.model, &id, self.goal);
                self.raise(own);
                self.derived(&changes, None);
            }
            Operation::Del { target } => {
                if self.visited.contains(target) {
                    return Ok(());
                }
                if !self.model.contains(target) {
                    return if self.depth == 0 {
                        Err(EngineError::NotFound(target.clone()))
                    } else {
                        Ok(())
                    };
                }
                self.visited.insert(target.clone());
                let mut used_by = Vec::new();
                for c in rules::del_consistency(self.model, target) {
                    let Some(step) = c.op else { continue };
                    match &step {
                        Operation::Del { target: t } if self.visited.contains(t) => continue,
                        Operation::Mod { target: t, .. } if self.visited.contains(t) => continue,
                        _ => {}
                    }
                    if c.template_id == "measure.del.unlink-evaluations" {
                        used_by.extend(c.target.clone());
                    }
                    self.auto.push(AutoStep { template_id: c.template_id, op: step.clone() });
                    self.depth += 1;
                    let r = self.run(&step);
                    self.depth -= 1;
                    r?;
                }
                let element = self.model.get(target).cloned().expect("present until removed");
                let changes = self.model.remove_element(target)?;
                let own = rules::del_adaptation(self.model, &element, &used_by, self.goal);
                self.raise(own);
                self.derived(&changes, None);
            }
            Operation::Mod { target, field, change } => {
                let changes = self.model.update_element(target, field, change)?;
                if changes.is_empty() {
                    return Ok(());
                }
                if changes.changed.iter().any(|r| &r.element == target && &r.field == field) {
                    let own = rules::mod_adaptation(self.model, target, field);
                    self.raise(own);
                }
                self.derived(&changes, Some((target, field)));
            }
        }
        Ok(())
    }
}

/// Consequences of `op` on `model` without changing it: the consistency steps
/// it would trigger followed by the adaptation consequences of the operation
/// itself (not those of the cascaded steps).
pub fn consequences_of(
    model: &QualityModel,
    ga: &AdaptationGoal,
    op: &Operation,
) -> Result<Vec<Consequence>, EngineError> {
    let mut out = match op {
        Operation::Del { target } => {
            if !model.contains(target) {
                return Err(EngineError::NotFound(target.clone()));
            }
            rules::del_consistency(model, target)
        }
        _ => Vec::new(),
    };
    let mut scratch = model.clone();
    let mut exec = Exec::new(&mut scratch, ga);
    exec.run(op)?;
    out.extend(exec.own.into_iter().filter(|c| c.flavor == Flavor::Adaptation));
    Ok(out)
}

/// Runs `DEL(id)` with its cascade on `model` and returns every element that
/// was removed, in id order.
pub(crate) fn cascade_delete(
    model: &mut QualityModel,
    ga: &AdaptationGoal,
    id: &ElementId,
) -> Result<Vec<ElementId>, EngineError> {
    let mut exec = Exec::new(model, ga);
    exec.run(&Operation::Del { target: id.clone() })?;
    Ok(exec.visited.into_iter().collect())
}

/// A model under adaptation together with its goal, to-do list and log.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    initial: QualityModel,
    model: QualityModel,
    goal: AdaptationGoal,
    tasks: Vec<Task>,
    log: Vec<LogRecord>,
    next_task: u64,
}

/// Mutable part of a session that a command works on; committed only when
/// the whole command succeeds.
struct Draft {
    model: QualityModel,
    tasks: Vec<Task>,
    next_task: u64,
}

impl Session {
    /// Starts a session on `model`. No tasks exist until the first command.
    pub fn new(model: QualityModel, goal: AdaptationGoal) -> Self {
        Session { initial: model.clone(), model, goal, tasks: Vec::new(), log: Vec::new(), next_task: 1 }
    }

    pub fn initial_model(&self) -> &QualityModel {
        &self.initial
    }

    pub fn model(&self) -> &QualityModel {
        &self.model
    }

    pub fn goal(&self) -> &AdaptationGoal {
        &self.goal
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.task_id == id)
    }

    /// Open tasks in creation order.
    pub fn open_tasks(&self) -> Vec<&Task> {
        self.tasks.iter().filter(|t| t.is_open()).collect()
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Number of accepted commands.
    pub fn revision(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn apply_operation(&mut self, op: Operation) -> Result<&LogRecord, EngineError> {
        self.execute(Command::Apply { ops: vec![op] })
    }

    pub fn apply_operations(&mut self, ops: Vec<Operation>) -> Result<&LogRecord, EngineError> {
        self.execute(Command::Apply { ops })
    }

    pub fn complete_task(&mut self, task_id: &str, ops: Vec<Operation>) -> Result<&LogRecord, EngineError> {
        self.execute(Command::Complete { task_id: task_id.into(), ops })
    }

    pub fn waive_task(&mut self, task_id: &str, note: &str) -> Result<&LogRecord, EngineError> {
        self.execute(Command::Waive { task_id: task_id.into(), note: note.into() })
    }

    pub fn review(&mut self, items: Vec<ReviewItem>) -> Result<&LogRecord, EngineError> {
        self.execute(Command::Review { items })
    }

    /// Runs a command atomically: on error the session is left unchanged.
    pub fn execute(&mut self, command: Command) -> Result<&LogRecord, EngineError> {
        let seq = self.log.len() as u64 + 1;
        let mut draft = Draft { model: self.model.clone(), tasks: self.tasks.clone(), next_task: self.next_task };
        let record = run_command(&mut draft, &self.goal, seq, command)?;
        self.model = draft.model;
        self.tasks = draft.tasks;
        self.next_task = draft.next_task;
        self.log.push(record);
        Ok(self.log.last().expect("just pushed"))
    }
}

fn find_open<'t>(tasks: &'t mut [Task], id: &str) -> Result<&'t mut Task, EngineError> {
    let task = tasks
        .iter_mut()
        .find(|t| t.task_id == id)
        .ok_or_else(|| EngineError::TaskNotFound(id.into()))?;
    if !task.is_open() {
        return Err(EngineError::TaskNotOpen { id: id.into(), status: task.status });
    }
    Ok(task)
}

fn run_command(
    draft: &mut Draft,
    goal: &AdaptationGoal,
    seq: u64,
    command: Command,
) -> Result<LogRecord, EngineError> {
    let mut exec = Exec::new(&mut draft.model, goal);
    let mut explicit: Option<String> = None;
    let mut reviews: Vec<ReviewItem> = Vec::new();
    match &command {
        Command::Apply { ops } => {
            for op in ops {
                exec.run(op)?;
            }
        }
        Command::Tailor { ops, reviews: items } => {
            for op in ops {
                exec.run(op)?;
            }
            reviews = items.clone();
        }
        Command::Complete { task_id, ops } => {
            find_open(&mut draft.tasks, task_id)?;
            for op in ops {
                exec.run(op)?;
            }
            explicit = Some(task_id.clone());
        }
        Command::Waive { task_id, note } => {
            if note.trim().is_empty() {
                return Err(EngineError::EmptyNote);
            }
            let task = find_open(&mut draft.tasks, task_id)?;
            task.status = TaskStatus::Waived;
            task.resolution = Some(Resolution::Waived { seq, note: note.clone() });
        }
        Command::Review { items } => reviews = items.clone(),
    }
    let auto = std::mem::take(&mut exec.auto);
    let pending = std::mem::take(&mut exec.pending);
    let created = std::mem::take(&mut exec.created);
    drop(exec);

    let mut record = LogRecord {
        seq,
        command: command.clone(),
        created_elements: created,
        auto_consequences: auto,
        spawned_tasks: Vec::new(),
        refreshed_tasks: Vec::new(),
        completed_tasks: Vec::new(),
        obsoleted_tasks: Vec::new(),
        model_hash_after: String::new(),
    };

    if let (Some(id), Command::Complete { ops, .. }) = (&explicit, &command) {
        let task = find_open(&mut draft.tasks, id)?;
        task.status = TaskStatus::Completed;
        task.resolution = Some(Resolution::Operations { seq, ops: ops.clone() });
        record.completed_tasks.push(id.clone());
    }

    let Draft { model, tasks, next_task } = draft;
    let model = &*model;
    let cx = CheckContext::new(model, goal.purpose);

    // Obsolescence wins over completion.
    for t in tasks.iter_mut().filter(|t| t.is_open()) {
        if t.target.as_ref().is_some_and(|id| !model.contains(id)) {
            t.status = TaskStatus::Obsolete;
            t.resolution = Some(Resolution::TargetDeleted { seq });
            record.obsoleted_tasks.push(t.task_id.clone());
        }
    }
    for t in tasks.iter_mut().filter(|t| t.is_open()) {
        if t.check.holds_in(&cx) {
            t.status = TaskStatus::Completed;
            t.resolution = Some(Resolution::Satisfied { seq });
            record.completed_tasks.push(t.task_id.clone());
        }
    }

    let mut raised: Vec<Consequence> = pending
        .into_iter()
        .filter(|c| c.flavor == Flavor::Adaptation)
        .filter(|c| c.target.as_ref().is_none_or(|id| model.contains(id)))
        .filter(|c| !c.check.holds_in(&cx))
        .collect();
    raised.extend(reviews.into_iter().map(|r| Consequence {
        flavor: Flavor::Adaptation,
        template_id: r.template_id,
        target: None,
        related: None,
        text: r.text,
        op: None,
        check: Check::Manual,
        suggested_ops: r.suggested_ops,
    }));
    for c in raised {
        spawn(tasks, next_task, seq, c, &mut record);
    }

    // Every outstanding operational violation needs an open or waived task on
    // its element.
    for v in cx.violations().iter().filter(|v| v.severity == Severity::Operational) {
        let covered = tasks.iter().any(|t| {
            t.target.as_ref() == Some(&v.target) && matches!(t.status, TaskStatus::Open | TaskStatus::Waived)
        });
        if covered {
            continue;
        }
        let c = Consequence {
            flavor: Flavor::Adaptation,
            template_id: format!("obligation.{}", v.rule),
            target: Some(v.target.clone()),
            related: None,
            text: format!("Resolve: {}.", v.message),
            op: None,
            check: Check::RuleClear { element: v.target.clone(), rule: v.rule },
            suggested_ops: Vec::new(),
        };
        spawn(tasks, next_task, seq, c, &mut record);
    }

    record.model_hash_after = content_hash(model);
    Ok(record)
}

/// Opens a task for `c` unless an open task with the same template and target
/// exists, in which case that task's text is refreshed.
fn spawn(tasks: &mut Vec<Task>, next_task: &mut u64, seq: u64, c: Consequence, record: &mut LogRecord) {
    if let Some(existing) = tasks
        .iter_mut()
        .find(|t| t.is_open() && t.template_id == c.template_id && t.target == c.target)
    {
        if existing.text != c.text || existing.related != c.related {
            existing.text = c.text;
            existing.related = c.related;
            if !record.refreshed_tasks.contains(&existing.task_id) && !record.spawned_tasks.contains(&existing.task_id) {
                record.refreshed_tasks.push(existing.task_id.clone());
            }
        }
        return;
    }
    let task_id = format!("t{next_task}");
    *next_task += 1;
    record.spawned_tasks.push(task_id.clone());
    tasks.push(Task {
        task_id,
        template_id: c.template_id,
        target: c.target,
        related: c.related,
        text: c.text,
        status: TaskStatus::Open,
        origin: seq,
        check: c.check,
        suggested_ops: c.suggested_ops,
        resolution: None,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goal::parse_goal;
    use crate::model::{ElementKind, Purpose};
    use serde_json::json;

    fn goal(purpose: &str) -> AdaptationGoal {
        parse_goal(&format!(
            r#"{{"object": ["Source code"], "purpose": "{purpose}", "viewpoint": ["User"], "focus": ["Reliability"], "context": {{}}}}"#
        ))
        .unwrap()
    }

    /// Property p, entity type, factor f on p, aspect, impact i of f with
    /// evaluation ie.
    fn chain() -> (QualityModel, [ElementId; 4]) {
        let mut m = QualityModel::create("chain").unwrap();
        let add = |m: &mut QualityModel, k, v: serde_json::Value| m.insert_element(k, v.as_object().unwrap()).unwrap().0;
        let et = add(&mut m, ElementKind::EntityType, json!({"name": "Source code", "description": "code"}));
        let p = add(&mut m, ElementKind::Property, json!({"name": "Documentation", "description": "d"}));
        let f = add(&mut m, ElementKind::Factor, json!({"name": "F", "entityType": et, "property": p}));
        let qa = add(&mut m, ElementKind::QualityAspect, json!({"name": "Reliability"}));
        let i = add(&mut m, ElementKind::Impact, json!({"factor": f, "qualityAspect": qa, "justification": "j"}));
        let ie = add(&mut m, ElementKind::ImpactEvaluation, json!({"impact": i, "evaluationRule": "r"}));
        (m, [p, f, i, ie])
    }

    #[test]
    fn property_delete_cascades_through_impact_evaluation() {
        let (m, [p, f, i, ie]) = chain();
        let mut s = Session::new(m, goal("evaluation"));
        let rec = s.apply_operation(Operation::del(p.clone())).unwrap().clone();
        let deleted: Vec<_> = rec
            .auto_consequences
            .iter()
            .map(|a| (a.template_id.as_str(), a.op.to_string()))
            .collect();
        assert_eq!(
            deleted,
            vec![
                ("property.del.factors", format!("DEL({f})")),
                ("factor.del.impacts", format!("DEL({i})")),
                ("impact.del.evaluations", format!("DEL({ie})")),
            ]
        );
        assert_eq!(rec.cascade_length(), 3);
        for id in [&p, &f, &i, &ie] {
            assert!(!s.model().contains(id));
        }
        // the "replace evaluation" task would target the deleted impact
        assert!(s.tasks().iter().all(|t| t.template_id != "evaluation.del.replace"));
        // the entity type is now an unused leaf
        let orphan: Vec<_> = s.open_tasks().iter().map(|t| t.template_id.clone()).collect();
        assert!(orphan.contains(&"factor.del.orphan-entitytype".to_string()), "{orphan:?}");
        // and the aspect has lost its only impact
        assert!(orphan.contains(&"impact.del.orphan-aspect".to_string()));
    }

    #[test]
    fn failed_command_leaves_session_untouched() {
        let (m, _) = chain();
        let mut s = Session::new(m, goal("evaluation"));
        let before = s.clone();
        let err = s
            .apply_operations(vec![
                Operation::add(ElementKind::Property, json!({"name": "ok"})),
                Operation::del("missing"),
            ])
            .unwrap_err();
        assert_eq!(err, EngineError::NotFound("missing".into()));
        assert_eq!(s, before);
    }

    #[test]
    fn measure_add_consequences() {
        let (m, _) = chain();
        let g = goal("evaluation");
        let cs = consequences_of(&m, &g, &Operation::add(ElementKind::Measure, json!({}))).unwrap();
        let ids: Vec<_> = cs.iter().map(|c| c.template_id.as_str()).collect();
        assert_eq!(ids, vec!["measure.add.name-rule", "measure.add.factor", "measure.add.evaluation"]);
        assert_eq!(cs[0].text, "Provide name and measurement rule.");
        assert_eq!(cs[0].target, Some(m.peek_id(ElementKind::Measure)));
    }

    #[test]
    fn unused_measure_delete_has_no_consequences() {
        let (mut m, _) = chain();
        let (ms, _) = m.insert_element(ElementKind::Measure, json!({"name": "x"}).as_object().unwrap()).unwrap();
        assert!(consequences_of(&m, &goal("evaluation"), &Operation::del(ms)).unwrap().is_empty());
    }

    #[test]
    fn repeated_mod_does_not_duplicate_tasks() {
        let (m, [_, f, _, ie]) = chain();
        let mut s = Session::new(m, goal("evaluation"));
        let (ms, _) = {
            let rec = s.apply_operation(Operation::add(ElementKind::Measure, json!({"name": "M"}))).unwrap();
            (rec.created_elements[0].clone(), ())
        };
        s.apply_operation(Operation::insert(f.clone(), "isQuantified", json!(ms))).unwrap();
        let open_before = s.open_tasks().len();
        let rec = s.apply_operation(Operation::insert(f, "isQuantified", json!(ms))).unwrap();
        assert!(rec.spawned_tasks.is_empty());
        assert_eq!(s.open_tasks().len(), open_before);
        let checks: Vec<_> = s.open_tasks().iter().filter(|t| t.template_id == "factor.mod.is-quantified").map(|t| t.target.clone()).collect();
        assert_eq!(checks, vec![Some(ie)]);
    }

    #[test]
    fn waive_rules() {
        let (m, _) = chain();
        let mut s = Session::new(m, goal("evaluation"));
        s.apply_operation(Operation::add(ElementKind::QualityRequirement, json!({"name": "R"}))).unwrap();
        let t = s.open_tasks()[0].task_id.clone();
        assert_eq!(s.waive_task(&t, "  "), Err(EngineError::EmptyNote));
        s.waive_task(&t, "described elsewhere").unwrap();
        assert_eq!(s.task(&t).unwrap().status, TaskStatus::Waived);
        assert!(matches!(s.waive_task(&t, "again"), Err(EngineError::TaskNotOpen { .. })));
        assert!(matches!(s.complete_task("t999", vec![]), Err(EngineError::TaskNotFound(_))));
        // a waived task stays waived when its target goes away
        let target = s.task(&t).unwrap().target.clone().unwrap();
        s.apply_operation(Operation::Del { target }).unwrap();
        assert_eq!(s.task(&t).unwrap().status, TaskStatus::Waived);
    }

    #[test]
    fn operational_violations_always_have_a_task() {
        let (m, _) = chain();
        let mut s = Session::new(m, goal("evaluation"));
        s.apply_operation(Operation::add(ElementKind::Property, json!({}))).unwrap();
        for v in crate::model::validate(s.model(), Purpose::Evaluation) {
            if v.severity == Severity::Operational {
                assert!(
                    s.tasks().iter().any(|t| t.target.as_ref() == Some(&v.target)
                        && matches!(t.status, TaskStatus::Open | TaskStatus::Waived)),
                    "{v}"
                );
            }
        }
    }

    #[test]
    fn empty_completion_of_satisfied_task() {
        let (m, _) = chain();
        let mut s = Session::new(m, goal("evaluation"));
        s.apply_operation(Operation::add(ElementKind::QualityAspect, json!({"name": "Safety"}))).unwrap();
        let refine = s.open_tasks().iter().find(|t| t.template_id == "aspect.add.refine").unwrap().task_id.clone();
        let hash = s.model().clone();
        let rec = s.complete_task(&refine, vec![]).unwrap();
        assert_eq!(rec.completed_tasks, vec![refine.clone()]);
        assert_eq!(s.model(), &hash);
    }
}
