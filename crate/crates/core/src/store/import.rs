//! Unit-collection import documents.
//!
//! ```json
//! {"units": [{"id": "optional", "title": "Grade 2 / Unit 1", "grade_label": "Grade 2",
//!             "words": ["spring", "cool"]}]}
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Store, StoreError};
use crate::domain::{UnitId, VocabularyUnit, Word};
use crate::ids::IdSource;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitDocument {
    pub units: Vec<UnitEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub title: String,
    pub grade_label: String,
    pub words: Vec<String>,
}

impl UnitDocument {
    pub fn parse(json: &str) -> Result<Self, StoreError> {
        serde_json::from_str(json).map_err(|err| StoreError::SchemaViolation(err.to_string()))
    }

    /// Validates every entry and assigns ids to entries without one.
    pub fn into_units(self, ids: &IdSource) -> Result<Vec<VocabularyUnit>, StoreError> {
        let mut seen = HashSet::new();
        let mut units = Vec::with_capacity(self.units.len());
        for (index, entry) in self.units.into_iter().enumerate() {
            let violation = |detail: String| StoreError::SchemaViolation(format!("units[{index}]: {detail}"));
            let id = match entry.id {
                Some(raw) => UnitId::new(raw).map_err(|err| violation(err.to_string()))?,
                None => UnitId::new(ids.next_hex()).expect("hex ids are valid"),
            };
            if !seen.insert(id.clone()) {
                return Err(StoreError::DuplicateId(id.to_string()));
            }
            let words = entry
                .words
                .into_iter()
                .map(Word::new)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|err| violation(err.to_string()))?;
            let unit = VocabularyUnit::new(id, entry.title, entry.grade_label, words)
                .map_err(|err| violation(err.to_string()))?;
            units.push(unit);
        }
        Ok(units)
    }
}

impl Store {
    /// Parses a unit-collection document and inserts all units atomically.
    pub fn import_units(&self, json: &str, ids: &IdSource) -> Result<Vec<UnitId>, StoreError> {
        let units = UnitDocument::parse(json)?.into_units(ids)?;
        self.insert_units(&units)?;
        Ok(units.into_iter().map(|unit| unit.id).collect())
    }
}
