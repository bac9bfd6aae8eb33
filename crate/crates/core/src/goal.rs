//! Adaptation goals and how well a reference model's goal fits them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{fold, name_set, ContextTags, Purpose};
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GoalError {
    #[error("goal document is not valid JSON: {0}")]
    Syntax(String),
    #[error("goal parameter `{0}` is missing")]
    MissingParameter(&'static str),
    #[error("goal parameter `{0}` must not be empty")]
    EmptyParameter(&'static str),
    #[error("unknown purpose `{0}` (expected \"specification\" or \"evaluation\")")]
    UnknownPurpose(String),
    #[error("invalid goal: {0}")]
    Invalid(String),
    #[error("the reference model pool is empty")]
    EmptyPool,
}

/// The five goal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Object,
    Purpose,
    Viewpoint,
    Focus,
    Context,
}

impl Parameter {
    pub const ALL: [Parameter; 5] = [
        Parameter::Object,
        Parameter::Purpose,
        Parameter::Viewpoint,
        Parameter::Focus,
        Parameter::Context,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Parameter::Object => "object",
            Parameter::Purpose => "purpose",
            Parameter::Viewpoint => "viewpoint",
            Parameter::Focus => "focus",
            Parameter::Context => "context",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relative weight of each parameter in the total fitness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weights(BTreeMap<Parameter, Rational>);

impl Default for Weights {
    fn default() -> Self {
        Weights(Parameter::ALL.iter().map(|p| (*p, Ratio::from_integer(1))).collect())
    }
}

impl Weights {
    pub fn new(values: BTreeMap<Parameter, Rational>) -> Result<Self, GoalError> {
        for p in Parameter::ALL {
            match values.get(&p) {
                None => return Err(GoalError::Invalid(format!("weight for `{p}` is missing"))),
                Some(w) if *w < Ratio::from_integer(0) => {
                    return Err(GoalError::Invalid(format!("weight for `{p}` is negative")))
                }
                Some(_) => {}
            }
        }
        if values.values().all(|w| *w == Ratio::from_integer(0)) {
            return Err(GoalError::Invalid("weights must not all be zero".into()));
        }
        Ok(Weights(values))
    }

    pub fn get(&self, p: Parameter) -> Rational {
        self.0[&p]
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: Rational) -> Result<Self, GoalError> {
        Weights::new(self.0.iter().map(|(p, w)| (*p, w * factor)).collect())
    }
}

impl Serialize for Weights {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<&str, serde_json::Number> = self
            .0
            .iter()
            .map(|(p, w)| {
                let n = if w.is_integer() {
                    serde_json::Number::from(*w.numer())
                } else {
                    serde_json::Number::from_f64(rational::to_f64(w)).expect("finite")
                };
                (p.as_str(), n)
            })
            .collect();
        m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Weights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw: BTreeMap<Parameter, serde_json::Number> = BTreeMap::deserialize(d)?;
        let mut values = BTreeMap::new();
        for (p, n) in raw {
            let r = rational::parse_decimal(&n.to_string())
                .ok_or_else(|| D::Error::custom(format!("weight for `{p}` is not a plain decimal")))?;
            values.insert(p, r);
        }
        Weights::new(values).map_err(D::Error::custom)
    }
}

/// A goal with five parameters describing what the quality model is for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGoal", into = "RawGoal")]
pub struct AdaptationGoal {
    pub object: BTreeSet<String>,
    pub purpose: Purpose,
    pub viewpoint: BTreeSet<String>,
    pub focus: BTreeSet<String>,
    pub context: ContextTags,
    pub weights: Option<Weights>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGoal {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    viewpoint: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    focus: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context: Option<ContextTags>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Weights>,
}

fn names(value: Option<Vec<String>>, p: &'static str) -> Result<BTreeSet<String>, GoalError> {
    let set = name_set(value.ok_or(GoalError::MissingParameter(p))?);
    if set.is_empty() {
        return Err(GoalError::EmptyParameter(p));
    }
    Ok(set)
}

impl TryFrom<RawGoal> for AdaptationGoal {
    type Error = GoalError;

    fn try_from(raw: RawGoal) -> Result<Self, GoalError> {
        let object = names(raw.object, "object")?;
        let purpose_text = raw.purpose.ok_or(GoalError::MissingParameter("purpose"))?;
        let purpose = purpose_text
            .parse::<Purpose>()
            .map_err(|_| GoalError::UnknownPurpose(purpose_text.clone()))?;
        let viewpoint = names(raw.viewpoint, "viewpoint")?;
        let focus = names(raw.focus, "focus")?;
        let context = raw.context.ok_or(GoalError::MissingParameter("context"))?;
        Ok(AdaptationGoal { object, purpose, viewpoint, focus, context, weights: raw.weights })
    }
}

impl From<AdaptationGoal> for RawGoal {
    fn from(g: AdaptationGoal) -> Self {
        RawGoal {
            object: Some(g.object.into_iter().collect()),
            purpose: Some(g.purpose.to_string()),
            viewpoint: Some(g.viewpoint.into_iter().collect()),
            focus: Some(g.focus.into_iter().collect()),
            context: Some(g.context),
            weights: g.weights,
        }
    }
}

/// Parses a goal document.
pub fn parse_goal(document: &str) -> Result<AdaptationGoal, GoalError> {
    let value: serde_json::Value =
        serde_json::from_str(document).map_err(|e| GoalError::Syntax(e.to_string()))?;
    goal_from_value(value)
}

pub fn goal_from_value(value: serde_json::Value) -> Result<AdaptationGoal, GoalError> {
    let raw: RawGoal = serde_json::from_value(value).map_err(|e| GoalError::Invalid(e.to_string()))?;
    AdaptationGoal::try_from(raw)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalFitness {
    #[serde(with = "rational::exact")]
    pub total: Rational,
    #[serde(with = "rational::exact_map")]
    pub per_parameter: BTreeMap<Parameter, Rational>,
}

/// Share of `needed` names also present in `offered`.
fn coverage(needed: &BTreeSet<String>, offered: &BTreeSet<String>) -> Rational {
    if needed.is_empty() {
        return Ratio::from_integer(1);
    }
    let offered: BTreeSet<String> = offered.iter().map(|s| fold(s)).collect();
    let hit = needed.iter().filter(|n| offered.contains(&fold(n))).count();
    Ratio::new(hit as i64, needed.len() as i64)
}

/// Share of the dimensions `ga` states that `gr` either leaves open or
/// shares a value in.
fn context_fit(ga: &ContextTags, gr: &ContextTags) -> Rational {
    if ga.is_empty() {
        return Ratio::from_integer(1);
    }
    let ok = ga
        .iter()
        .filter(|(dim, values)| match gr.values(dim) {
            None => true,
            Some(gv) => crate::model::names_intersect(values.iter(), gv.iter()),
        })
        .count();
    Ratio::new(ok as i64, ga.len() as i64)
}

/// Scores how well reference goal `gr` serves adaptation goal `ga`. Weights
/// come from `ga` when it has any, else all parameters count equally.
pub fn goal_fitness(ga: &AdaptationGoal, gr: &AdaptationGoal) -> GoalFitness {
    let weights = ga.weights.clone().unwrap_or_default();
    goal_fitness_weighted(ga, gr, &weights)
}

pub fn goal_fitness_weighted(ga: &AdaptationGoal, gr: &AdaptationGoal, weights: &Weights) -> GoalFitness {
    let mut per = BTreeMap::new();
    per.insert(Parameter::Object, coverage(&ga.object, &gr.object));
    per.insert(
        Parameter::Purpose,
        Ratio::from_integer(i64::from(ga.purpose == gr.purpose)),
    );
    per.insert(Parameter::Viewpoint, coverage(&ga.viewpoint, &gr.viewpoint));
    per.insert(Parameter::Focus, coverage(&ga.focus, &gr.focus));
    per.insert(Parameter::Context, context_fit(&ga.context, &gr.context));
    let weight_sum: Rational = Parameter::ALL.iter().map(|p| weights.get(*p)).sum();
    let weighted: Rational = Parameter::ALL.iter().map(|p| weights.get(*p) * per[p]).sum();
    GoalFitness { total: weighted / weight_sum, per_parameter: per }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedModel {
    pub model_id: String,
    pub fitness: GoalFitness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SkippedModel {
    pub model_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub ranked: Vec<RankedModel>,
    pub skipped: Vec<SkippedModel>,
}

/// Orders pool entries by descending fitness, ties by ascending model id.
/// Entries without a goal are reported in `skipped`.
pub fn rank_reference_models(
    ga: &AdaptationGoal,
    pool: &[(String, Option<AdaptationGoal>)],
) -> Result<Ranking, GoalError> {
    if pool.is_empty() {
        return Err(GoalError::EmptyPool);
    }
    let mut out = Ranking::default();
    for (id, goal) in pool {
        match goal {
            Some(gr) => out.ranked.push(RankedModel { model_id: id.clone(), fitness: goal_fitness(ga, gr) }),
            None => {
                log::warn!("reference model `{id}` has no embedded goal; skipped");
                out.skipped.push(SkippedModel {
                    model_id: id.clone(),
                    reason: "no embedded adaptation goal".into(),
                })
            }
        }
    }
    out.ranked.sort_by(|a, b| {
        b.fitness.total.cmp(&a.fitness.total).then_with(|| a.model_id.cmp(&b.model_id))
    });
    out.skipped.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GA: &str = r#"{"object": ["Source code"], "purpose": "evaluation", "viewpoint": ["User"],
        "focus": ["Reliability", "Safety", "Usability"],
        "context": {"Domain": ["Embedded"], "Language": ["Assembler"]}}"#;

    #[test]
    fn parses_and_normalizes() {
        let g = parse_goal(GA).unwrap();
        assert_eq!(g.purpose, Purpose::Evaluation);
        assert_eq!(g.focus.len(), 3);
        assert_eq!(g.context.values("language").unwrap().len(), 1);
        let dup = parse_goal(
            r#"{"object": ["A", " a "], "purpose": "specification", "viewpoint": ["x"], "focus": ["y"], "context": {}}"#,
        )
        .unwrap();
        assert_eq!(dup.object.len(), 1);
    }

    #[test]
    fn missing_focus_names_the_parameter() {
        let err = parse_goal(r#"{"object": ["A"], "purpose": "evaluation", "viewpoint": ["x"], "context": {}}"#)
            .unwrap_err();
        assert_eq!(err, GoalError::MissingParameter("focus"));
        assert!(err.to_string().contains("focus"));
        let err = parse_goal(r#"{"object": ["A"], "purpose": "audit", "viewpoint": ["x"], "focus": ["y"], "context": {}}"#)
            .unwrap_err();
        assert!(matches!(err, GoalError::UnknownPurpose(_)));
    }

    #[test]
    fn identity_scores_one() {
        let g = parse_goal(GA).unwrap();
        let f = goal_fitness(&g, &g);
        assert_eq!(f.total, Ratio::from_integer(1));
        assert!(f.per_parameter.values().all(|v| *v == Ratio::from_integer(1)));
    }

    #[test]
    fn weights_round_trip() {
        let doc = GA.replace("\"purpose\"", "\"weights\": {\"object\": 0.5, \"purpose\": 1, \"viewpoint\": 1, \"focus\": 2, \"context\": 0.25}, \"purpose\"");
        let g = parse_goal(&doc).unwrap();
        let w = g.weights.clone().unwrap();
        assert_eq!(w.get(Parameter::Context), Ratio::new(1, 4));
        let back: AdaptationGoal = serde_json::from_value(serde_json::to_value(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let g = parse_goal(GA).unwrap();
        assert_eq!(rank_reference_models(&g, &[]), Err(GoalError::EmptyPool));
    }
}
