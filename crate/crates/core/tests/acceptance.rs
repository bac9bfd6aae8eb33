//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! any of them fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use qm_adapt::audit::{audit, completeness, correctness, diff_models, AdaptationDelta, DeltaEntry, DeltaOp, Expect, Predicate};
use qm_adapt::canonical::to_canonical_string;
use qm_adapt::engine::{write_log, Command, LogHeader, Operation, Session, TaskStatus};
use qm_adapt::model::{fold, validate, ContextTags, ElementKind, Purpose, QualityModel, Rule, Severity};
use qm_adapt::store::{load_delta, load_goal, load_model, persist_session, restore_session};
use qm_adapt::tailor::{plan_tailoring, tailoring_command, TailoringOptions};
use qm_adapt::{goal_fitness, AdaptationGoal};
use serde_json::{json, Value};

use common::{fixture, random_goal, random_model, random_step, rng};

type Rational = Ratio<i64>;
type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, golden_tailoring),
        (2, walkthrough),
        (3, random_invariants),
        (4, specification_drops_evaluation),
        (5, persistence_and_determinism),
        (6, audit_measures),
        (7, goal_fitness_checks),
        (8, violations_have_tasks),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({took:.2}s) {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL ({took:.2}s) {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        return Err(format!("took {took:?}, limit {limit:?}"));
    }
    Ok(())
}

fn embedded_case() -> (QualityModel, AdaptationGoal, AdaptationGoal) {
    (
        load_model(fixture("embedded/reference.qm.json")).unwrap(),
        load_goal(fixture("embedded/ga.goal.json")).unwrap(),
        load_goal(fixture("embedded/gr.goal.json")).unwrap(),
    )
}

fn golden_tailoring() -> Outcome {
    let (model, ga, gr) = embedded_case();
    let expected = std::fs::read_to_string(fixture("embedded/tailoring.report.json")).unwrap();
    let start = Instant::now();
    let report = plan_tailoring(&model, &ga, &gr, TailoringOptions::default());
    within(start, Duration::from_secs(1))?;
    let got = to_canonical_string(&report);
    ensure!(got == expected, "report differs from golden:\n{got}");
    Ok(format!("{} actions, byte-identical", report.actions.len()))
}

fn walkthrough() -> Outcome {
    let initial = load_model(fixture("walkthrough/initial.qm.json")).unwrap();
    let goal = load_goal(fixture("embedded/ga.goal.json")).unwrap();
    let start = Instant::now();
    let mut s = Session::new(initial, goal);
    let set = |t: &str, f: &str, v: Value| Operation::set(t, f, v);
    let ins = |t: &str, f: &str, v: Value| Operation::insert(t, f, v);
    let steps: Vec<(Command, &[&str], &[&str])> = vec![
        (
            Command::Apply {
                ops: vec![Operation::add(ElementKind::Measure, json!({"name": "M1", "stub": true, "quantifies": ["f-6"]}))],
            },
            &["t1", "t2", "t3", "t4"],
            &[],
        ),
        (
            Command::Complete {
                task_id: "t1".into(),
                ops: vec![
                    set("m-15", "name", json!("% of documented assembler lines")),
                    set("m-15", "measurementRule", json!("documented assembler lines / all assembler lines, 0..100%")),
                    set("m-15", "stub", json!(false)),
                ],
            },
            &[],
            &["t1"],
        ),
        (Command::Complete { task_id: "t3".into(), ops: vec![ins("ie-10", "uses", json!("m-15"))] }, &["t5"], &["t2", "t3"]),
        (Command::Complete { task_id: "t4".into(), ops: vec![ins("ie-11", "uses", json!("m-15"))] }, &["t6"], &["t4"]),
        (
            Command::Complete {
                task_id: "t5".into(),
                ops: vec![set("ie-10", "evaluationRule", json!("linear: 0% -> 0, 100% -> 1"))],
            },
            &[],
            &["t5"],
        ),
        (
            Command::Complete {
                task_id: "t6".into(),
                ops: vec![set("ie-11", "evaluationRule", json!("linear: 0% -> 0, 100% -> 1"))],
            },
            &[],
            &["t6"],
        ),
    ];
    let expected_open: [&[&str]; 6] = [
        &["t1", "t2", "t3", "t4"],
        &["t2", "t3", "t4"],
        &["t4", "t5"],
        &["t5", "t6"],
        &["t6"],
        &[],
    ];
    for (i, ((command, spawned, completed), open)) in steps.into_iter().zip(expected_open).enumerate() {
        let r = s.execute(command).map_err(|e| format!("step {}: {e}", i + 1))?;
        let mut done = r.completed_tasks.clone();
        done.sort();
        ensure!(r.spawned_tasks == spawned, "step {}: spawned {:?}", i + 1, r.spawned_tasks);
        ensure!(done == completed, "step {}: completed {:?}", i + 1, done);
        let now: Vec<&str> = s.open_tasks().iter().map(|t| t.task_id.as_str()).collect();
        ensure!(now == open, "step {}: open {:?}", i + 1, now);
    }
    within(start, Duration::from_secs(1))?;
    let templates: Vec<&str> = s.tasks().iter().map(|t| t.template_id.as_str()).collect();
    ensure!(
        templates
            == [
                "measure.add.name-rule",
                "measure.add.evaluation",
                "factor.mod.is-quantified",
                "factor.mod.is-quantified",
                "evaluation.mod.uses",
                "evaluation.mod.uses",
            ],
        "templates {templates:?}"
    );
    ensure!(s.tasks().iter().all(|t| t.status == TaskStatus::Completed), "not all tasks completed");
    let left = validate(s.model(), Purpose::Evaluation);
    ensure!(left.is_empty(), "violations remain: {left:?}");
    let final_model = load_model(fixture("walkthrough/final.qm.json")).unwrap();
    ensure!(to_canonical_string(s.model()) == to_canonical_string(&final_model), "final model differs");
    let mut log = Vec::new();
    write_log(&mut log, &LogHeader::for_session(&s), s.log()).unwrap();
    let golden = std::fs::read(fixture("walkthrough/golden.session.jsonl")).unwrap();
    ensure!(log == golden, "session log differs from golden");
    Ok("6 steps, task transitions and log match".into())
}

fn random_invariants() -> Outcome {
    let start = Instant::now();
    let mut ops_run = 0usize;
    let mut longest = 0usize;
    for seed in 0..1000u64 {
        let mut r = rng(seed);
        let model = random_model(&mut r, 200);
        let goal = random_goal(&mut r, None);
        let purpose = goal.purpose;
        let mut s = Session::new(model, goal);
        let steps = rand::Rng::gen_range(&mut r, 1..=30);
        for _ in 0..steps {
            let Some((before, record)) = random_step(&mut r, &mut s) else { continue };
            ops_run += 1;
            longest = longest.max(record.cascade_length());
            ensure!(
                record.cascade_length() <= before,
                "seed {seed}: cascade {} > {before} elements",
                record.cascade_length()
            );
            for v in validate(s.model(), purpose) {
                ensure!(!matches!(v.rule, Rule::V1 | Rule::V2 | Rule::V6), "seed {seed}: {v}");
            }
            let mut seen = BTreeSet::new();
            for t in s.open_tasks() {
                ensure!(
                    seen.insert((t.template_id.clone(), t.target.clone())),
                    "seed {seed}: duplicate open task {} on {:?}",
                    t.template_id,
                    t.target
                );
            }
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("1000 models, {ops_run} accepted commands, longest cascade {longest}"))
}

fn evaluation_part(m: &QualityModel) -> usize {
    [ElementKind::Measure, ElementKind::ImpactEvaluation, ElementKind::QualityAspectEvaluation]
        .iter()
        .map(|k| m.count_of_kind(*k))
        .sum()
}

fn specification_drops_evaluation() -> Outcome {
    let (model, mut ga, gr) = embedded_case();
    ga.purpose = Purpose::Specification;
    let mut cases = vec![(model, ga, gr)];
    let mut r = rng(4);
    for _ in 0..50 {
        let m = random_model(&mut r, 120);
        let ga = random_goal(&mut r, Some(Purpose::Specification));
        let gr = m.meta.goal.clone().unwrap();
        cases.push((m, ga, gr));
    }
    let n = cases.len();
    for (i, (m, ga, gr)) in cases.into_iter().enumerate() {
        let plan = plan_tailoring(&m, &ga, &gr, TailoringOptions::default());
        let mut s = Session::new(m, ga);
        s.execute(tailoring_command(&plan)).map_err(|e| format!("case {i}: {e}"))?;
        let left = evaluation_part(s.model());
        ensure!(left == 0, "case {i}: {left} evaluation elements remain");
    }
    Ok(format!("{n} models, no measures or evaluations remain"))
}

fn session_for(seed: u64) -> Session {
    let mut r = rng(seed);
    let model = random_model(&mut r, 80);
    let ga = random_goal(&mut r, None);
    let gr = model.meta.goal.clone().unwrap();
    let plan = plan_tailoring(&model, &ga, &gr, TailoringOptions::default());
    let mut s = Session::new(model, ga);
    s.execute(tailoring_command(&plan)).unwrap();
    for _ in 0..20 {
        random_step(&mut r, &mut s);
    }
    s
}

fn log_bytes(s: &Session) -> Vec<u8> {
    let mut out = Vec::new();
    write_log(&mut out, &LogHeader::for_session(s), s.log()).unwrap();
    out
}

fn persistence_and_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    for seed in 0..100u64 {
        let s = session_for(seed);
        let dir = root.path().join(format!("s{seed}"));
        persist_session(&s, &dir).map_err(|e| format!("seed {seed}: {e}"))?;
        let back = restore_session(&dir).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(to_canonical_string(back.model()) == to_canonical_string(s.model()), "seed {seed}: model differs");
        ensure!(to_canonical_string(back.tasks()) == to_canonical_string(s.tasks()), "seed {seed}: tasks differ");
        ensure!(log_bytes(&back) == log_bytes(&s), "seed {seed}: log differs after restore");
        ensure!(log_bytes(&session_for(seed)) == log_bytes(&s), "seed {seed}: second run differs");
    }
    Ok("100 sessions restore exactly and rerun identically".into())
}

/// Counts touched and correct gold entries straight from the two model files.
fn oracle_counts(base: &Value, adapted: &Value, gold: &Value) -> (usize, usize) {
    let index = |doc: &Value| -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        for (key, list) in doc.as_object().unwrap() {
            if key == "meta" {
                continue;
            }
            for e in list.as_array().unwrap() {
                out.insert(e["id"].as_str().unwrap().to_string(), e.clone());
            }
        }
        out
    };
    let (b, a) = (index(base), index(adapted));
    let blank = |v: Option<&Value>| match v {
        None | Some(Value::Null) => true,
        Some(Value::String(s)) => s.trim().is_empty(),
        Some(Value::Array(x)) => x.is_empty(),
        _ => false,
    };
    let fits = |expect: &Value, observed: Option<&Value>| -> bool {
        if expect.is_null() || expect.get("predicate") == Some(&json!("any")) {
            return true;
        }
        if expect.get("predicate") == Some(&json!("non-empty")) {
            return !blank(observed);
        }
        let want = &expect["value"];
        match (want, observed) {
            (Value::Object(w), Some(Value::Object(o))) => w.iter().all(|(k, v)| o.get(k) == Some(v)),
            (w, Some(o)) => w == o,
            _ => false,
        }
    };
    let (mut touched, mut correct) = (0, 0);
    for g in gold.as_array().unwrap() {
        let element = g["element"].as_str().unwrap();
        let expect = g.get("expect").cloned().unwrap_or(Value::Null);
        let observed: Option<Option<Value>> = match g["op"].as_str().unwrap() {
            "DEL" => (b.contains_key(element) && !a.contains_key(element)).then_some(None),
            "ADD" => a
                .iter()
                .find(|(id, e)| !b.contains_key(*id) && e["name"].as_str().map(fold) == Some(fold(element)))
                .map(|(_, e)| Some(e.clone())),
            _ => {
                let field = g["field"].as_str().unwrap();
                match (b.get(element), a.get(element)) {
                    (Some(x), Some(y)) if x.get(field) != y.get(field) => Some(y.get(field).cloned()),
                    _ => None,
                }
            }
        };
        if let Some(v) = observed {
            touched += 1;
            if fits(&expect, v.as_ref()) {
                correct += 1;
            }
        }
    }
    (touched, correct)
}

fn random_gold(r: &mut common::TestRng, performed: &AdaptationDelta, m: &QualityModel) -> Option<AdaptationDelta> {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let n = r.gen_range(0..=performed.len());
    let mut entries: Vec<DeltaEntry> = performed
        .entries
        .choose_multiple(r, n)
        .cloned()
        .map(|mut e| {
            e.expect = match r.gen_range(0..4) {
                0 => None,
                1 => Some(Expect::Predicate { predicate: Predicate::NonEmpty }),
                2 => Some(Expect::Value { value: json!("something else") }),
                _ => e.value.clone().map(|value| Expect::Value { value }),
            };
            e.value = None;
            e
        })
        .collect();
    let all: Vec<String> = m.elements().map(|e| e.id().to_string()).collect();
    for _ in 0..r.gen_range(0..5) {
        let el = all.choose(r)?.clone();
        entries.push(DeltaEntry::new(el, DeltaOp::MOD, Some("description")).expecting(Expect::Predicate { predicate: Predicate::Any }));
    }
    AdaptationDelta::new(entries, false).ok().filter(|d| !d.is_empty())
}

fn audit_measures() -> Outcome {
    let base = load_model(fixture("audit/base.qm.json")).unwrap();
    let adapted = load_model(fixture("audit/adapted.qm.json")).unwrap();
    let gold = load_delta(fixture("audit/embedded-asm.gold.json")).unwrap();
    let read = |p: &str| serde_json::from_str::<Value>(&std::fs::read_to_string(fixture(p)).unwrap()).unwrap();
    let (touched, correct) =
        oracle_counts(&read("audit/base.qm.json"), &read("audit/adapted.qm.json"), &read("audit/embedded-asm.gold.json"));
    ensure!((gold.len(), touched, correct) == (20, 15, 12), "oracle counts {}/{touched}/{correct}", gold.len());
    let minutes = Rational::from_integer(30);
    let result = audit(&diff_models(&base, &adapted), &gold, minutes).map_err(|e| e.to_string())?;
    let want = (
        Rational::new(touched as i64, 20),
        Rational::new(correct as i64, 20),
        Rational::new(correct as i64, 30),
    );
    ensure!(want == (Rational::new(3, 4), Rational::new(3, 5), Rational::new(2, 5)), "oracle {want:?}");
    ensure!(
        (result.completeness, result.correctness, result.efficiency) == want,
        "got {} {} {}",
        result.completeness,
        result.correctness,
        result.efficiency
    );
    let mut r = rng(6);
    let mut pairs = 0;
    while pairs < 1000 {
        let m = random_model(&mut r, 60);
        let goal = random_goal(&mut r, None);
        let mut s = Session::new(m.clone(), goal);
        for _ in 0..10 {
            random_step(&mut r, &mut s);
        }
        let performed = diff_models(&m, s.model());
        let Some(gold) = random_gold(&mut r, &performed, &m) else { continue };
        let c = completeness(&performed, &gold).map_err(|e| e.to_string())?;
        let k = correctness(&performed, &gold).map_err(|e| e.to_string())?;
        ensure!(c >= k, "completeness {c} < correctness {k}");
        pairs += 1;
    }
    Ok("3/4, 3/5, 2/5 per minute; completeness >= correctness on 1000 pairs".into())
}

/// Mean of the five parameter scores, computed independently.
fn fitness_oracle(ga: &AdaptationGoal, gr: &AdaptationGoal) -> Rational {
    let cover = |a: &BTreeSet<String>, b: &BTreeSet<String>| {
        let b: BTreeSet<String> = b.iter().map(|s| s.trim().to_lowercase()).collect();
        let hit = a.iter().filter(|s| b.contains(&s.trim().to_lowercase())).count();
        Rational::new(hit as i64, a.len() as i64)
    };
    let context = if ga.context.is_empty() {
        Rational::from_integer(1)
    } else {
        let ok = ga
            .context
            .iter()
            .filter(|(d, vs)| gr.context.values(d).is_none_or(|g| vs.iter().any(|v| g.contains(v))))
            .count();
        Rational::new(ok as i64, ga.context.len() as i64)
    };
    let purpose = Rational::from_integer(i64::from(ga.purpose == gr.purpose));
    (cover(&ga.object, &gr.object) + purpose + cover(&ga.viewpoint, &gr.viewpoint) + cover(&ga.focus, &gr.focus) + context)
        / 5
}

/// `gr` moved one step closer to `ga` in a random parameter.
fn improve(r: &mut common::TestRng, ga: &AdaptationGoal, gr: &AdaptationGoal) -> AdaptationGoal {
    use rand::seq::IteratorRandom;
    use rand::Rng;
    let mut out = gr.clone();
    match r.gen_range(0..5) {
        0 => out.object.extend(ga.object.iter().choose(r).cloned()),
        1 => out.purpose = ga.purpose,
        2 => out.viewpoint.extend(ga.viewpoint.iter().choose(r).cloned()),
        3 => out.focus.extend(ga.focus.iter().choose(r).cloned()),
        _ => {
            if let Some((dim, values)) = ga.context.iter().choose(r) {
                let value = values.iter().choose(r).unwrap().clone();
                let mut pairs: Vec<(String, Vec<String>)> = gr
                    .context
                    .iter()
                    .map(|(d, vs)| (d.clone(), vs.iter().cloned().collect()))
                    .collect();
                match pairs.iter_mut().find(|(d, _)| d == dim) {
                    Some((_, vs)) => vs.push(value),
                    None => pairs.push((dim.clone(), vec![value])),
                }
                out.context = ContextTags::from_pairs(pairs).unwrap();
            }
        }
    }
    out
}

fn goal_fitness_checks() -> Outcome {
    let (_, ga, gr) = embedded_case();
    let got = goal_fitness(&ga, &gr).total;
    let oracle = fitness_oracle(&ga, &gr);
    ensure!(oracle == Rational::new(5, 6), "oracle gives {oracle}");
    ensure!(got == oracle, "implementation gives {got}, oracle {oracle}");
    let mut r = rng(7);
    for i in 0..1000 {
        let ga = random_goal(&mut r, None);
        let gr = random_goal(&mut r, None);
        ensure!(goal_fitness(&ga, &ga).total == Rational::from_integer(1), "identity {i}");
        let before = goal_fitness(&ga, &gr).total;
        ensure!(before == fitness_oracle(&ga, &gr), "pair {i}: {before} != oracle");
        let better = improve(&mut r, &ga, &gr);
        let after = goal_fitness(&ga, &better).total;
        ensure!(after >= before, "pair {i}: {after} < {before}");
    }
    Ok(format!("{got} for the worked example (19/30 does not follow from the formula); identity and monotonicity hold"))
}

fn violations_have_tasks() -> Outcome {
    let mut checked = 0usize;
    for seed in 0..200u64 {
        let mut r = rng(10_000 + seed);
        let model = random_model(&mut r, 120);
        let ga = random_goal(&mut r, None);
        let gr = model.meta.goal.clone().unwrap();
        let purpose = ga.purpose;
        let plan = plan_tailoring(&model, &ga, &gr, TailoringOptions::default());
        let mut s = Session::new(model, ga);
        s.execute(tailoring_command(&plan)).map_err(|e| format!("seed {seed}: {e}"))?;
        for step in 0..25 {
            if step > 0 {
                random_step(&mut r, &mut s);
            }
            for v in validate(s.model(), purpose).into_iter().filter(|v| v.severity == Severity::Operational) {
                checked += 1;
                ensure!(
                    s.tasks().iter().any(|t| t.target.as_ref() == Some(&v.target)
                        && matches!(t.status, TaskStatus::Open | TaskStatus::Waived)),
                    "seed {seed} step {step}: no task for {v}"
                );
            }
        }
    }
    Ok(format!("200 sessions, {checked} violation checks covered"))
}
