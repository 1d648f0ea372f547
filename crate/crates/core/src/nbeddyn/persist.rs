//! Model persistence: a versioned, self-describing JSON document with full
//! float64 round-trip precision.

use crate::error::{Error, Result};
use crate::nbeddyn::TrainedModel;
use std::path::Path;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelDocument {
    schema_version: u64,
    #[serde(flatten)]
    trained: TrainedModel,
}

pub fn model_to_json(trained: &TrainedModel) -> Result<String> {
    let doc = ModelDocument {
        schema_version: SCHEMA_VERSION,
        trained: trained.clone(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::ModelSchema(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::ModelSchema(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::ModelSchema("missing schema_version".into()))?;
    if version != SCHEMA_VERSION {
        return Err(Error::ModelSchema(format!(
            "unsupported schema version {version} (expected {SCHEMA_VERSION})"
        )));
    }
    let doc: ModelDocument =
        serde_json::from_value(value).map_err(|e| Error::ModelSchema(e.to_string()))?;
    Ok(doc.trained)
}

pub fn save_model(path: &Path, trained: &TrainedModel) -> Result<()> {
    crate::io::write_atomic(path, model_to_json(trained)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
