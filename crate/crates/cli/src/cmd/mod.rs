pub mod embed;
pub mod eval;
pub mod explain;
pub mod nlpml;
pub mod pipeline;
pub mod rv;
pub mod text;

use std::path::Path;

use voltext::pipeline::PipelineError;

pub(crate) fn user_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

pub(crate) fn require_file(path: &Path) -> Result<(), PipelineError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(user_err(format!("file not found: {}", path.display())))
    }
}

pub(crate) fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p)?;
    }
    Ok(())
}

/// Parses a TOML file into a config struct, with the file name in errors.
pub(crate) fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| user_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| user_err(format!("{}: {e}", path.display())))
}
