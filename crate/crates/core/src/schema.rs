//! Domain schemas in the SGD schema file format.
//!
//! A schema file is a JSON array of service objects. Unknown fields are
//! ignored on input so newer releases of the format keep loading.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CorpusError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_categorical: bool,
    #[serde(default)]
    pub possible_values: Vec<String>,
}

impl SlotDef {
    pub fn free(name: &str, description: &str) -> Self {
        SlotDef {
            name: name.to_string(),
            description: description.to_string(),
            is_categorical: false,
            possible_values: Vec::new(),
        }
    }

    pub fn categorical(name: &str, description: &str, values: &[&str]) -> Self {
        SlotDef {
            name: name.to_string(),
            description: description.to_string(),
            is_categorical: true,
            possible_values: values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_transactional: bool,
    #[serde(default)]
    pub required_slots: Vec<String>,
    /// Optional slot name to default value.
    #[serde(default)]
    pub optional_slots: BTreeMap<String, String>,
    #[serde(default)]
    pub result_slots: Vec<String>,
}

impl IntentDef {
    pub fn is_required(&self, slot: &str) -> bool {
        self.required_slots.iter().any(|s| s == slot)
    }

    /// Required slots followed by optional ones, in declaration order.
    pub fn constrainable_slots(&self) -> impl Iterator<Item = &str> {
        self.required_slots
            .iter()
            .map(String::as_str)
            .chain(self.optional_slots.keys().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub service_name: String,
    #[serde(default)]
    pub description: String,
    pub slots: Vec<SlotDef>,
    pub intents: Vec<IntentDef>,
}

impl DomainSchema {
    pub fn slot(&self, name: &str) -> Option<&SlotDef> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn intent(&self, name: &str) -> Option<&IntentDef> {
        self.intents.iter().find(|i| i.name == name)
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    /// Checks the structural invariants of a schema; `index` is the position
    /// of the service in its file and is only used in error locations.
    pub fn validate(&self, index: usize) -> Result<(), CorpusError> {
        let here = |what: String| format!("service #{index} `{}`{what}", self.service_name);
        if self.service_name.trim().is_empty() {
            return Err(CorpusError::schema(here(String::new()), "empty service_name".into()));
        }
        let mut slot_names = BTreeSet::new();
        for slot in &self.slots {
            if slot.name.trim().is_empty() {
                return Err(CorpusError::schema(here(" slots".into()), "empty slot name".into()));
            }
            if !slot_names.insert(slot.name.as_str()) {
                return Err(CorpusError::schema(
                    here(format!(" slot `{}`", slot.name)),
                    "duplicate slot name".into(),
                ));
            }
            if slot.is_categorical && slot.possible_values.is_empty() {
                return Err(CorpusError::schema(
                    here(format!(" slot `{}`", slot.name)),
                    "categorical slot without possible_values".into(),
                ));
            }
        }
        let mut intent_names = BTreeSet::new();
        for intent in &self.intents {
            let at = || here(format!(" intent `{}`", intent.name));
            if intent.name.trim().is_empty() {
                return Err(CorpusError::schema(here(" intents".into()), "empty intent name".into()));
            }
            if !intent_names.insert(intent.name.as_str()) {
                return Err(CorpusError::schema(at(), "duplicate intent name".into()));
            }
            let referenced = intent
                .required_slots
                .iter()
                .chain(intent.optional_slots.keys())
                .chain(&intent.result_slots);
            for slot in referenced {
                if !slot_names.contains(slot.as_str()) {
                    return Err(CorpusError::schema(at(), format!("references unknown slot `{slot}`")));
                }
            }
            if let Some(both) = intent
                .required_slots
                .iter()
                .find(|s| intent.optional_slots.contains_key(*s))
            {
                return Err(CorpusError::schema(
                    at(),
                    format!("slot `{both}` is both required and optional"),
                ));
            }
        }
        Ok(())
    }
}

/// Parses an SGD schema document into validated schemas.
pub fn parse_schema_file(bytes: &[u8]) -> Result<Vec<DomainSchema>, CorpusError> {
    let mut schemas: Vec<DomainSchema> =
        serde_json::from_slice(bytes).map_err(|e| CorpusError::from_json(e, CorpusError::schema))?;
    let mut seen = BTreeSet::new();
    for (index, schema) in schemas.iter_mut().enumerate() {
        schema.service_name = schema.service_name.trim().to_string();
        schema.validate(index)?;
        if !seen.insert(schema.service_name.clone()) {
            return Err(CorpusError::schema(
                format!("service #{index} `{}`", schema.service_name),
                "duplicate service_name".into(),
            ));
        }
    }
    Ok(schemas)
}

pub fn schemas_to_json(schemas: &[DomainSchema]) -> String {
    serde_json::to_string_pretty(schemas).expect("schemas serialize")
}

/// Reads a schema file, or `schema.json` inside a directory.
pub fn load_schema_path(path: &Path) -> Result<Vec<DomainSchema>, CorpusError> {
    let file = if path.is_dir() {
        path.join("schema.json")
    } else {
        path.to_path_buf()
    };
    let bytes = std::fs::read(&file).map_err(|e| CorpusError::io(&file, e))?;
    parse_schema_file(&bytes)
}

pub fn find_schema<'a>(schemas: &'a [DomainSchema], service: &str) -> Option<&'a DomainSchema> {
    schemas.iter().find(|s| s.service_name == service)
}
