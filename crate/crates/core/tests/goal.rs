mod common;

use num_rational::Ratio;
use proptest::prelude::*;
use qm_adapt::goal::{goal_fitness, parse_goal, GoalError};
use qm_adapt::store::load_goal;

use common::{fixture, random_goal, rng};

#[test]
fn worked_example_fitness() {
    let ga = load_goal(fixture("embedded/ga.goal.json")).unwrap();
    let gr = load_goal(fixture("embedded/gr.goal.json")).unwrap();
    assert_eq!(goal_fitness(&ga, &gr).total, Ratio::new(5, 6));
}

#[test]
fn malformed_goals_are_rejected() {
    assert!(matches!(
        parse_goal(r#"{"object": [], "purpose": "evaluation", "viewpoint": ["User"], "focus": ["X"], "context": {}}"#),
        Err(GoalError::EmptyParameter("object"))
    ));
    assert!(matches!(
        parse_goal(r#"{"object": ["A"], "purpose": "fun", "viewpoint": ["User"], "focus": ["X"], "context": {}}"#),
        Err(GoalError::UnknownPurpose(_))
    ));
    assert!(parse_goal(r#"{"object": ["A"], "purpose": "evaluation", "viewpoint": ["User"], "focus": ["X"]}"#).is_err());
}

proptest! {
    #[test]
    fn fitness_is_a_fraction_between_zero_and_one(a in 0u64..10_000, b in 0u64..10_000) {
        let ga = random_goal(&mut rng(a), None);
        let gr = random_goal(&mut rng(b), None);
        let f = goal_fitness(&ga, &gr);
        prop_assert!(f.total >= Ratio::from_integer(0) && f.total <= Ratio::from_integer(1));
        prop_assert_eq!(goal_fitness(&ga, &ga).total, Ratio::from_integer(1));
    }

    #[test]
    fn goal_survives_serialization(a in 0u64..10_000) {
        let ga = random_goal(&mut rng(a), None);
        let text = serde_json::to_string(&ga).unwrap();
        prop_assert_eq!(parse_goal(&text).unwrap(), ga);
    }
}
