//! Reading and writing model documents and control files.

pub mod controls;
pub mod document;
pub mod lower;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use controls::{parse_controls, ControlDefinition, ControlNode};
pub use document::{parse_model, parse_model_json, serialize_model, ModelDocument, TransitionType};
pub use lower::{bind_controls, build_system_model, lower_structure};

use crate::error::ParseError;

/// Parses a model file, picking the JSON mirror for `.json` paths.
pub fn parse_model_file(path: &Path, text: &str) -> Result<ModelDocument, ParseError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_model_json(text),
        _ => parse_model(text),
    }
}

/// Paths of the controls files a document refers to, keyed by view name.
pub fn controls_paths(doc: &ModelDocument, dir: &Path) -> BTreeMap<String, PathBuf> {
    doc.applications
        .iter()
        .flat_map(|a| &a.views)
        .filter_map(|v| v.controls_file.as_ref().map(|f| (v.name.clone(), dir.join(f))))
        .collect()
}
