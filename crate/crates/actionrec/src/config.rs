//! Optional run configuration for the command-line tool, read from
//! TOML or JSON text. Every field has a default; command-line flags
//! override file values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationSection {
    pub sigma: Option<f64>,
    pub k: Option<f64>,
    pub min_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSection {
    pub words: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub c: Option<f64>,
    pub epochs: Option<usize>,
    /// Append a constant 1.0 feature to every descriptor at train and
    /// score time; a bias substitute for the bias-free linear model.
    pub append_constant: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSection {
    pub c: Option<f64>,
    pub epochs: Option<usize>,
    pub max_rounds: Option<usize>,
    pub normalize_pairs: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub workdir: Option<PathBuf>,
    pub per_class_negatives: Option<usize>,
    pub codebook: Option<PathBuf>,
    pub detector: Option<PathBuf>,
    pub c: Option<f64>,
    pub epochs: Option<usize>,
    pub max_rounds: Option<usize>,
    pub normalize_pairs: Option<bool>,
}

/// Top-level configuration file. `schema_version` is mandatory so
/// incompatible future layouts fail loudly instead of half-applying.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub segmentation: SegmentationSection,
    #[serde(default)]
    pub codebook: CodebookSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub action: ActionSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            segmentation: SegmentationSection::default(),
            codebook: CodebookSection::default(),
            detector: DetectorSection::default(),
            action: ActionSection::default(),
            protocol: ProtocolSection::default(),
        }
    }
}

/// Parses a configuration file. `.toml` and `.json` extensions pick
/// the parser; anything else tries TOML first, then JSON.
pub fn load_config(path: impl AsRef<Path>) -> Result<FileConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: FileConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?,
        Some("toml") => toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?,
        _ => toml::from_str(&text).or_else(|toml_err| {
            serde_json::from_str(&text).map_err(|json_err| {
                Error::format(
                    path,
                    format!("not valid TOML ({toml_err}) and not valid JSON ({json_err})"),
                )
            })
        })?,
    };
    if config.schema_version != CONFIG_SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "config schema version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    Ok(config)
}
