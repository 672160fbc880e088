//! Shared CLI configuration, loadable from JSON and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::EncodeOptions;
use crate::dataset::DEFAULT_TEMPLATE;
use crate::error::{Error, Result};
use crate::preprocess::PreprocessConfig;
use crate::trend::{KeypointSource, LambdaPolicy, TrendOptions, DEFAULT_KINK_TOL};

/// How a language record is laid out in a text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LangLayout {
    /// One `/`-joined line.
    #[default]
    Joined,
    /// One lead per line.
    Lines,
}

impl std::str::FromStr for LangLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "joined" => Ok(LangLayout::Joined),
            "lines" => Ok(LangLayout::Lines),
            _ => Err(Error::InvalidArgument(format!(
                "layout must be 'joined' or 'lines', got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub codebook: Option<PathBuf>,
    pub lambda: LambdaPolicy,
    pub kink_tol: f64,
    pub keypoint_source: KeypointSource,
    pub trend: TrendOptions,
    pub preprocess: PreprocessConfig,
    pub lang_layout: LangLayout,
    /// Sampling rate assumed for CSV records, which carry no header rate.
    pub csv_rate: u32,
    /// Instruction template for dataset samples.
    pub template: String,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            codebook: None,
            lambda: LambdaPolicy::default(),
            kink_tol: DEFAULT_KINK_TOL,
            keypoint_source: KeypointSource::Fit,
            trend: TrendOptions::default(),
            preprocess: PreprocessConfig::default(),
            lang_layout: LangLayout::Joined,
            csv_rate: crate::preprocess::CANONICAL_RATE,
            template: DEFAULT_TEMPLATE.to_string(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn encode_options(&self) -> EncodeOptions {
        EncodeOptions {
            lambda: self.lambda,
            trend: self.trend,
            kink_tol: self.kink_tol,
            source: self.keypoint_source,
        }
    }
}
