//! Attribute schemas and information states.
//!
//! A [`Schema`] is the terminology layer: the world-model vocabulary
//! (`scope = world`) and the system's self-model vocabulary
//! (`scope = self`). An [`InformationState`] is one assertion over that
//! vocabulary, the system's runtime knowledge at a given epoch.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    /// Describes the environment.
    #[serde(rename = "world")]
    World,
    /// Describes the processing system itself.
    #[serde(rename = "self")]
    Modeller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Categorical { values: Vec<String> },
    Boolean,
    Numeric { low: f64, high: f64 },
}

impl Domain {
    pub fn categorical<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Domain::Categorical {
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Domain::Numeric { .. })
    }

    /// Symbolic labels in domain order; `None` for numeric domains.
    pub fn labels(&self) -> Option<Vec<String>> {
        match self {
            Domain::Categorical { values } => Some(values.clone()),
            Domain::Boolean => Some(vec!["false".to_owned(), "true".to_owned()]),
            Domain::Numeric { .. } => None,
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Categorical { values }, Value::Cat(v)) => values.iter().any(|x| x == v),
            (Domain::Boolean, Value::Bool(_)) => true,
            (Domain::Numeric { low, high }, Value::Num(x)) => x.is_finite() && *low <= *x && *x <= *high,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub scope: Scope,
    pub domain: Domain,
}

impl AttributeDef {
    pub fn new(name: impl Into<String>, scope: Scope, domain: Domain) -> Self {
        Self {
            name: name.into(),
            scope,
            domain,
        }
    }

    fn check(&self) -> Result<()> {
        match &self.domain {
            Domain::Categorical { values } => {
                if values.is_empty() {
                    return Err(Error::EmptyDomain(self.name.clone()));
                }
                let mut seen = BTreeSet::new();
                for v in values {
                    if !seen.insert(v) {
                        return Err(Error::DuplicateDomainValue(self.name.clone(), v.clone()));
                    }
                }
            }
            Domain::Boolean => {}
            Domain::Numeric { low, high } => {
                if low.is_nan() || high.is_nan() || low > high {
                    return Err(Error::InvalidRange {
                        name: self.name.clone(),
                        low: *low,
                        high: *high,
                    });
                }
            }
        }
        Ok(())
    }
}

/// A single attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn cat(s: impl Into<String>) -> Self {
        Value::Cat(s.into())
    }

    /// Symbolic rendering used for matching and CSV output.
    pub fn label(&self) -> Cow<'_, str> {
        match self {
            Value::Cat(s) => Cow::Borrowed(s),
            Value::Bool(true) => Cow::Borrowed("true"),
            Value::Bool(false) => Cow::Borrowed("false"),
            Value::Num(x) => Cow::Owned(x.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Deserialize)]
struct RawSchema {
    attributes: Vec<AttributeDef>,
    class_attribute: String,
}

/// Ordered attribute vocabulary with a designated class (control) attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct Schema {
    attributes: Vec<AttributeDef>,
    class_attribute: String,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        define_schema(raw.attributes, &raw.class_attribute)
    }
}

/// Builds a schema, keeping the attribute order of `defs`.
pub fn define_schema(defs: Vec<AttributeDef>, class_attribute: &str) -> Result<Schema> {
    let mut names = BTreeSet::new();
    for def in &defs {
        if !names.insert(def.name.as_str()) {
            return Err(Error::DuplicateAttribute(def.name.clone()));
        }
        def.check()?;
    }
    let class = defs
        .iter()
        .find(|d| d.name == class_attribute)
        .ok_or_else(|| Error::InvalidClassAttribute(class_attribute.to_owned()))?;
    if class.domain.is_numeric() {
        return Err(Error::InvalidClassAttribute(class_attribute.to_owned()));
    }
    Ok(Schema {
        attributes: defs,
        class_attribute: class_attribute.to_owned(),
    })
}

impl Schema {
    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn class_attribute(&self) -> &str {
        &self.class_attribute
    }

    pub fn class_def(&self) -> &AttributeDef {
        self.attribute(&self.class_attribute)
            .expect("class attribute checked at construction")
    }

    /// Domain labels of the class attribute, in schema order.
    pub fn class_values(&self) -> Vec<String> {
        self.class_def()
            .domain
            .labels()
            .expect("class attribute is symbolic")
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn to_json(&self) -> String {
        crate::to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Attribute-value record at one epoch. Keys are kept sorted, so two
/// states built from the same pairs in any order are identical.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InformationState {
    pub epoch: u64,
    pub values: BTreeMap<String, Value>,
}

impl InformationState {
    pub fn new(epoch: u64) -> Self {
        Self {
            epoch,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: Value) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.values.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn to_json(&self) -> String {
        crate::to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Checks that every value names a schema attribute and lies in its
/// domain. Partial states (projections, unlabeled instances) are valid.
pub fn validate_instance(schema: &Schema, state: &InformationState) -> Result<()> {
    for (name, value) in &state.values {
        let def = schema
            .attribute(name)
            .ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
        if !def.domain.contains(value) {
            return Err(Error::OutOfDomainValue {
                attribute: name.clone(),
                value: value.label().into_owned(),
            });
        }
    }
    Ok(())
}

/// Like [`validate_instance`], but every non-class attribute must be present.
pub fn validate_complete(schema: &Schema, state: &InformationState) -> Result<()> {
    validate_instance(schema, state)?;
    for def in schema.attributes() {
        if def.name != schema.class_attribute() && !state.values.contains_key(&def.name) {
            return Err(Error::MissingRequiredAttribute(def.name.clone()));
        }
    }
    Ok(())
}

/// A state is reflective when it carries knowledge about the system itself.
pub fn is_reflective(schema: &Schema, state: &InformationState) -> bool {
    state
        .values
        .keys()
        .any(|k| matches!(schema.attribute(k), Some(d) if d.scope == Scope::Modeller))
}
