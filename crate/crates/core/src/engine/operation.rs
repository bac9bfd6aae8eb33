use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ElementId, ElementKind, FieldChange, Payload};

/// An elementary change request: add, delete or modify one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", deny_unknown_fields)]
pub enum Operation {
    #[serde(rename = "ADD")]
    Add { kind: ElementKind, payload: Payload },
    #[serde(rename = "DEL")]
    Del { target: ElementId },
    #[serde(rename = "MOD")]
    Mod {
        target: ElementId,
        field: String,
        change: FieldChange,
    },
}

impl Operation {
    pub fn add(kind: ElementKind, payload: serde_json::Value) -> Self {
        let payload = match payload {
            serde_json::Value::Object(m) => m,
            serde_json::Value::Null => Payload::new(),
            other => panic!("ADD payload must be an object, got {other}"),
        };
        Operation::Add { kind, payload }
    }

    pub fn del(target: impl Into<ElementId>) -> Self {
        Operation::Del { target: target.into() }
    }

    pub fn set(target: impl Into<ElementId>, field: &str, value: serde_json::Value) -> Self {
        Operation::Mod { target: target.into(), field: field.into(), change: FieldChange::Set(value) }
    }

    pub fn insert(target: impl Into<ElementId>, field: &str, value: serde_json::Value) -> Self {
        Operation::Mod { target: target.into(), field: field.into(), change: FieldChange::Insert(value) }
    }

    pub fn remove(target: impl Into<ElementId>, field: &str, value: serde_json::Value) -> Self {
        Operation::Mod { target: target.into(), field: field.into(), change: FieldChange::Remove(value) }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::Add { kind, .. } => write!(f, "ADD({kind})"),
            Operation::Del { target } => write!(f, "DEL({target})"),
            Operation::Mod { target, field, .. } => write!(f, "MOD({target}.{field})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn wire_format() {
        let op = Operation::insert("ie-1", "uses", json!("m-1"));
        let v = serde_json::to_value(&op).unwrap();
        assert_eq!(v, json!({"op": "MOD", "target": "ie-1", "field": "uses", "change": {"insert": "m-1"}}));
        let back: Operation = serde_json::from_value(v).unwrap();
        assert_eq!(back, op);
        let add: Operation =
            serde_json::from_value(json!({"op": "ADD", "kind": "Measure", "payload": {"stub": true}})).unwrap();
        assert_eq!(add.to_string(), "ADD(Measure)");
        assert!(serde_json::from_value::<Operation>(json!({"op": "DEL"})).is_err());
    }
}
