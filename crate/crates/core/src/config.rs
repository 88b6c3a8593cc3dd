//! Unified JSON configuration for every workflow. Secrets are referenced by
//! environment variable name only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassifierConfig;
use crate::clients::EndpointConfig;
use crate::corpus::NeutralityConfig;
use crate::counterfactual::GenerateOptions;
use crate::detectors::{DetectorConfig, DetectorError, DetectorSuite};
use crate::exec::RetryPolicy;
use crate::flagging::{AnnotationLayout, FlaggingError, LlmStageOptions, ReviewOptions, TemplateSet};
use crate::stats::IntervalMethod;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub samples: u32,
    pub in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let d = GenerateOptions::default();
        GenerationConfig {
            samples: d.samples,
            in_flight: d.in_flight,
            retry: d.retry,
        }
    }
}

impl GenerationConfig {
    pub fn options(&self, store: Option<PathBuf>) -> GenerateOptions {
        GenerateOptions {
            samples: self.samples,
            in_flight: self.in_flight,
            retry: self.retry,
            store,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlaggingConfig {
    pub llm: LlmStageOptions,
    pub review: ReviewOptions,
    pub annotation: AnnotationLayout,
    /// Directory of prompt templates; the shipped set is used when absent.
    pub templates_dir: Option<PathBuf>,
}

impl FlaggingConfig {
    pub fn templates(&self) -> Result<TemplateSet, FlaggingError> {
        match &self.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir),
            None => Ok(TemplateSet::builtin()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientsConfig {
    pub generator: Option<EndpointConfig>,
    pub llm: Option<EndpointConfig>,
    pub toxicity: Option<EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub detectors: DetectorConfig,
    pub neutrality: NeutralityConfig,
    pub classifier: ClassifierConfig,
    pub flagging: FlaggingConfig,
    pub generation: GenerationConfig,
    pub clients: ClientsConfig,
    pub confidence_level: f64,
    pub interval_method: IntervalMethod,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            detectors: DetectorConfig::default(),
            neutrality: NeutralityConfig::default(),
            classifier: ClassifierConfig::default(),
            flagging: FlaggingConfig::default(),
            generation: GenerationConfig::default(),
            clients: ClientsConfig::default(),
            confidence_level: 0.95,
            interval_method: IntervalMethod::Wald,
            seed: 0,
        }
    }
}

impl Config {
    /// Relative paths inside the file resolve against its directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: Config = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        let v = &mut self.detectors.vocab;
        fix(&mut v.body_size);
        fix(&mut v.gendered_feminine);
        fix(&mut v.gendered_masculine);
        fix(&mut v.nonbinary_pairs);
        fix(&mut v.call_to_action);
        fix(&mut self.flagging.templates_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let l = self.confidence_level;
        if !(l > 0.0 && l < 1.0) {
            return Err(ConfigError::Invalid(format!("confidence_level {l} not in (0, 1)")));
        }
        if self.flagging.review.reviewers == 0 {
            return Err(ConfigError::Invalid(
                "flagging.review.reviewers must be at least 1".into(),
            ));
        }
        if self.generation.samples == 0 {
            return Err(ConfigError::Invalid("generation.samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies a command-line seed to every seeded component.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            self.classifier.seed = s;
            self.flagging.review.seed = s;
        }
        self
    }

    pub fn detector_suite(&self) -> Result<DetectorSuite, DetectorError> {
        DetectorSuite::new(self.detectors.clone(), self.neutrality.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = Config::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Config>(&text).unwrap(), c);
        assert_eq!(serde_json::from_str::<Config>("{}").unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"detector": {}}"#).is_err());
    }

    #[test]
    fn relative_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"flagging": {"templates_dir": "tpl"}}"#).unwrap();
        let c = Config::load(&p).unwrap();
        assert_eq!(c.flagging.templates_dir.unwrap(), dir.path().join("tpl"));
    }

    #[test]
    fn invalid_level() {
        let c = Config {
            confidence_level: 1.0,
            ..Config::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn seed_propagates() {
        let c = Config::default().with_seed(Some(9));
        assert_eq!((c.seed, c.classifier.seed, c.flagging.review.seed), (9, 9, 9));
    }
}
