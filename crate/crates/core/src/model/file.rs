//! On-disk shape of a model: `meta` plus one array per element kind.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::element::*;
use super::{ModelMeta, QualityModel};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ModelFile {
    meta: ModelMeta,
    #[serde(default)]
    quality_aspects: Vec<QualityAspect>,
    #[serde(default)]
    entity_types: Vec<EntityType>,
    #[serde(default)]
    properties: Vec<Property>,
    #[serde(default)]
    factors: Vec<Factor>,
    #[serde(default)]
    impacts: Vec<Impact>,
    #[serde(default)]
    quality_requirements: Vec<QualityRequirement>,
    #[serde(default)]
    measures: Vec<Measure>,
    #[serde(default)]
    impact_evaluations: Vec<ImpactEvaluation>,
    #[serde(default)]
    quality_aspect_evaluations: Vec<QualityAspectEvaluation>,
}

impl Serialize for QualityModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let file = ModelFile {
            meta: self.meta.clone(),
            quality_aspects: self.quality_aspects().cloned().collect(),
            entity_types: self.entity_types().cloned().collect(),
            properties: self.properties().cloned().collect(),
            factors: self.factors().cloned().collect(),
            impacts: self.impacts().cloned().collect(),
            quality_requirements: self.quality_requirements().cloned().collect(),
            measures: self.measures().cloned().collect(),
            impact_evaluations: self.impact_evaluations().cloned().collect(),
            quality_aspect_evaluations: self.aspect_evaluations().cloned().collect(),
        };
        file.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QualityModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let f = ModelFile::deserialize(deserializer)?;
        let all = f
            .quality_aspects
            .into_iter()
            .map(Element::QualityAspect)
            .chain(f.entity_types.into_iter().map(Element::EntityType))
            .chain(f.properties.into_iter().map(Element::Property))
            .chain(f.factors.into_iter().map(Element::Factor))
            .chain(f.impacts.into_iter().map(Element::Impact))
            .chain(f.quality_requirements.into_iter().map(Element::QualityRequirement))
            .chain(f.measures.into_iter().map(Element::Measure))
            .chain(f.impact_evaluations.into_iter().map(Element::ImpactEvaluation))
            .chain(f.quality_aspect_evaluations.into_iter().map(Element::QualityAspectEvaluation));
        let mut elements = BTreeMap::new();
        for e in all {
            if e.id().as_str().trim().is_empty() {
                return Err(D::Error::custom("element with empty id"));
            }
            if let Some(prev) = elements.insert(e.id().clone(), e) {
                return Err(D::Error::custom(format!("duplicate element id `{}`", prev.id())));
            }
        }
        Ok(QualityModel { meta: f.meta, elements })
    }
}
