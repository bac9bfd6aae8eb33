//! Context tags and case-insensitive name handling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Normalized form used for every name comparison: trimmed and lowercased.
pub fn fold(name: &str) -> String {
    name.trim().to_lowercase()
}

pub(crate) fn same_name(a: &str, b: &str) -> bool {
    fold(a) == fold(b)
}

/// True when the two name sets share at least one entry (case-insensitive).
pub fn names_intersect<'a, A, B>(a: A, b: B) -> bool
where
    A: IntoIterator<Item = &'a String>,
    B: IntoIterator<Item = &'a String>,
{
    let left: BTreeSet<String> = a.into_iter().map(|s| fold(s)).collect();
    b.into_iter().any(|s| left.contains(&fold(s)))
}

pub(crate) fn contains_name<'a, I>(set: I, name: &str) -> bool
where
    I: IntoIterator<Item = &'a String>,
{
    let wanted = fold(name);
    set.into_iter().any(|s| fold(s) == wanted)
}

/// Inserts `value` into a set of names unless an equal name (case-insensitive)
/// is already present. Returns whether the set changed.
pub(crate) fn insert_name(set: &mut BTreeSet<String>, value: &str) -> bool {
    let value = value.trim();
    if value.is_empty() || contains_name(set.iter(), value) {
        return false;
    }
    set.insert(value.to_string())
}

/// Removes every entry equal to `value` (case-insensitive).
pub(crate) fn remove_name(set: &mut BTreeSet<String>, value: &str) -> bool {
    let wanted = fold(value);
    let before = set.len();
    set.retain(|s| fold(s) != wanted);
    before != set.len()
}

/// Deduplicates a list of names case-insensitively, keeping the first spelling.
pub fn name_set<I, S>(names: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = BTreeSet::new();
    for name in names {
        insert_name(&mut out, name.as_ref());
    }
    out
}

/// Context dimensions such as `Domain`, `Language` or `Paradigm`, each with a
/// non-empty value set.
///
/// Dimension keys and values compare case-insensitively; the first spelling
/// seen is the one kept for display. A dimension that is absent applies to all
/// values of that dimension.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextTags {
    dimensions: BTreeMap<String, BTreeSet<String>>,
}

impl ContextTags {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds tags from `(dimension, values)` pairs, merging dimensions that
    /// only differ in case. Dimensions whose value list is empty are rejected.
    pub fn from_pairs<I, D, V, S>(pairs: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (D, V)>,
        D: AsRef<str>,
        V: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tags = ContextTags::new();
        for (dimension, values) in pairs {
            let dimension = dimension.as_ref().trim();
            if dimension.is_empty() {
                return Err("context dimension name is empty".to_string());
            }
            let values = name_set(values);
            if values.is_empty() {
                return Err(format!("context dimension `{dimension}` has no values"));
            }
            let key = match tags.key_of(dimension) {
                Some(existing) => existing.to_string(),
                None => dimension.to_string(),
            };
            let entry = tags.dimensions.entry(key).or_default();
            for v in &values {
                insert_name(entry, v);
            }
        }
        Ok(tags)
    }

    fn key_of(&self, dimension: &str) -> Option<&str> {
        let wanted = fold(dimension);
        self.dimensions
            .keys()
            .find(|k| fold(k) == wanted)
            .map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    /// Values of a dimension, looked up case-insensitively.
    pub fn values(&self, dimension: &str) -> Option<&BTreeSet<String>> {
        self.key_of(dimension).and_then(|k| self.dimensions.get(k))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.dimensions.iter()
    }

    /// Whether an element carrying these tags applies in `context`.
    ///
    /// Every dimension the element is restricted to must be stated by the
    /// context with at least one matching value. Untagged elements always
    /// apply.
    pub fn applicable_in(&self, context: &ContextTags) -> bool {
        self.dimensions
            .iter()
            .all(|(dim, values)| match context.values(dim) {
                Some(ctx_values) => names_intersect(values, ctx_values),
                None => false,
            })
    }
}

impl fmt::Display for ContextTags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .dimensions
            .iter()
            .map(|(d, vs)| {
                let vs: Vec<&str> = vs.iter().map(String::as_str).collect();
                format!("{d}={}", vs.join(", "))
            })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

impl Serialize for ContextTags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.dimensions.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ContextTags {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: BTreeMap<String, Vec<String>> = BTreeMap::deserialize(deserializer)?;
        ContextTags::from_pairs(raw).map_err(D::Error::custom)
    }
}
