//! Occurrence feature schema: 17 data classes, 61 binary features.
//!
//! The schema is the single source of truth for the feature-vector layout.
//! Vector indices are assigned in document order (class order, then feature
//! order within the class), starting at zero.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CLASS_COUNT: usize = 17;
pub const FEATURE_COUNT: usize = 61;

/// The bundled canonical schema document.
pub const CANONICAL_SCHEMA: &str = include_str!("../assets/occurrence_schema.json");

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("malformed schema document: {0}")]
    Malformed(String),
    #[error("class count {0} ≠ {CLASS_COUNT}")]
    ClassCount(usize),
    #[error("feature count {0} ≠ {FEATURE_COUNT}")]
    FeatureCount(usize),
    #[error("data class {0:?} has no features")]
    EmptyClass(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown feature id {0:?}")]
    UnknownFeature(String),
    #[error("feature vector has {0} values, expected {FEATURE_COUNT}")]
    VectorLength(usize),
    #[error("feature value {value} at index {index} is not a finite number in [0, 1]")]
    VectorValue { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureDef {
    pub id: String,
    pub display_name: String,
    pub vector_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataClass {
    pub id: String,
    pub display_name: String,
    pub features: Vec<FeatureDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSchema {
    pub version: String,
    pub classes: Vec<DataClass>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    version: String,
    classes: Vec<ClassDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDoc {
    id: String,
    display_name: String,
    features: Vec<FeatureDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureDoc {
    id: String,
    display_name: String,
}

/// Parses and validates a schema document.
pub fn load_schema(source: &str) -> Result<FeatureSchema, SchemaError> {
    let doc: SchemaDoc =
        serde_json::from_str(source).map_err(|e| SchemaError::Malformed(e.to_string()))?;
    if doc.version.trim().is_empty() {
        return Err(SchemaError::Malformed("empty version".into()));
    }

    let mut class_ids = BTreeSet::new();
    let mut index = HashMap::new();
    let mut classes = Vec::with_capacity(doc.classes.len());
    let mut next = 0;
    for class in doc.classes {
        if !class_ids.insert(class.id.clone()) {
            return Err(SchemaError::DuplicateId(class.id));
        }
        if class.features.is_empty() {
            return Err(SchemaError::EmptyClass(class.id));
        }
        let mut features = Vec::with_capacity(class.features.len());
        for f in class.features {
            if index.insert(f.id.clone(), next).is_some() {
                return Err(SchemaError::DuplicateId(f.id));
            }
            features.push(FeatureDef {
                id: f.id,
                display_name: f.display_name,
                vector_index: next,
            });
            next += 1;
        }
        classes.push(DataClass {
            id: class.id,
            display_name: class.display_name,
            features,
        });
    }

    if classes.len() != CLASS_COUNT {
        return Err(SchemaError::ClassCount(classes.len()));
    }
    if next != FEATURE_COUNT {
        return Err(SchemaError::FeatureCount(next));
    }
    Ok(FeatureSchema {
        version: doc.version,
        classes,
        index,
    })
}

/// The bundled schema. Panics only if the shipped asset is broken.
pub fn canonical_schema() -> FeatureSchema {
    load_schema(CANONICAL_SCHEMA).expect("bundled schema is valid")
}

impl FeatureSchema {
    pub fn feature_count(&self) -> usize {
        self.index.len()
    }

    pub fn features(&self) -> impl Iterator<Item = &FeatureDef> {
        self.classes.iter().flat_map(|c| c.features.iter())
    }

    /// Feature ids in vector order.
    pub fn feature_ids(&self) -> Vec<&str> {
        self.features().map(|f| f.id.as_str()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn feature_at(&self, index: usize) -> Option<&FeatureDef> {
        self.features().nth(index)
    }

    /// Builds the 0/1 vector for a set of selected feature ids.
    pub fn encode<'a, I>(&self, selected: I) -> Result<FeatureVector, SchemaError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut values = vec![0.0; FEATURE_COUNT];
        for id in selected {
            let i = self
                .index_of(id)
                .ok_or_else(|| SchemaError::UnknownFeature(id.to_string()))?;
            values[i] = 1.0;
        }
        Ok(FeatureVector(values))
    }

    /// Ids of the features whose value is at least `threshold`, in vector order.
    pub fn decode(&self, v: &FeatureVector, threshold: f64) -> Vec<&str> {
        self.features()
            .filter(|f| v.0[f.vector_index] >= threshold)
            .map(|f| f.id.as_str())
            .collect()
    }
}

/// A 61-value occurrence encoding. Raw encodings are 0/1; SMOTE synthetics
/// may carry fractional values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SchemaError> {
        if values.len() != FEATURE_COUNT {
            return Err(SchemaError::VectorLength(values.len()));
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(SchemaError::VectorValue { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![0.0; FEATURE_COUNT])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = SchemaError;

    fn try_from(values: Vec<f64>) -> Result<Self, SchemaError> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}
