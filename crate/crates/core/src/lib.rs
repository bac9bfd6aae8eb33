//! Goal-oriented adaptation of reference quality models.
//!
//! The crate holds the quality model graph ([`model`]), adaptation goals and
//! reference-model ranking ([`goal`]), rule-based tailoring ([`tailor`]), the
//! consequence and task engine ([`engine`]), adaptation audits ([`audit`]) and
//! file persistence ([`store`]).

pub mod audit;
pub mod canonical;
pub mod engine;
pub mod goal;
pub mod model;
pub mod rational;
pub mod store;
pub mod tailor;

pub use goal::{goal_fitness, parse_goal, rank_reference_models, AdaptationGoal, GoalFitness};
pub use model::{ElementId, ElementKind, Purpose, QualityModel};
