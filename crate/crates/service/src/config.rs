//! Service configuration: one JSON document, with any key overridable by an
//! `EMONEWS_` environment variable (`__` separates nested keys, values are
//! parsed as JSON and fall back to plain strings).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use emonews_core::backends::{BackendDescriptor, BackendOptions, BackendRole, BackendSet, Endpoint};
use emonews_core::index::{Corpus, Index, HASH_DIM};
use emonews_core::pipeline::{Pipeline, PipelineConfig, StyleTable, SystemMode};
use emonews_core::sentiment::Lexicon;

pub const ENV_PREFIX: &str = "EMONEWS_";
/// Names the config file; not itself a config key.
pub const ENV_CONFIG_PATH: &str = "EMONEWS_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{key}: path {path} does not exist")]
    MissingPath { key: &'static str, path: String },
    #[error("cannot start pipeline: {0}")]
    Startup(String),
}

/// Endpoint settings for one backend role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// `"mock"` or an http(s) base URL.
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retry_count")]
    pub retry_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearer_token: Option<String>,
}

/// Identity of a remote sentence encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteEmbedderConfig {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub mode: SystemMode,
    /// Roles left out use mocks; sentiment left out uses the lexicon only.
    #[serde(default)]
    pub backends: BTreeMap<BackendRole, EndpointConfig>,
    pub corpus_path: PathBuf,
    /// Built in memory from the corpus when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_path: Option<PathBuf>,
    pub data_dir: PathBuf,
    #[serde(default = "default_true")]
    pub blind_emotion: bool,
    #[serde(default = "default_k")]
    pub retrieval_k: usize,
    #[serde(default = "default_budget", alias = "prompt_budget")]
    pub prompt_budget_chars: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_template_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_embedder: Option<RemoteEmbedderConfig>,
    /// Static bearer token required on every route except `/health`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
    /// `/report` only reads data directories below this path. Defaults to
    /// the parent of `data_dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_root: Option<PathBuf>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}
fn default_true() -> bool {
    true
}
fn default_k() -> usize {
    PipelineConfig::default().retrieval_k
}
fn default_budget() -> usize {
    PipelineConfig::default().prompt_budget_chars
}
fn default_max_tokens() -> u32 {
    256
}
fn default_timeout_ms() -> u64 {
    BackendDescriptor::url(BackendRole::Llm, "http://x").timeout_ms
}
fn default_retry_count() -> u32 {
    BackendDescriptor::url(BackendRole::Llm, "http://x").retry_count
}

/// Sets `path` (lowercased segments) in `doc` to `raw`, parsed as JSON when possible.
fn set_path(doc: &mut Value, path: &[String], raw: &str) -> Result<(), ConfigError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    for (i, seg) in path.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("cannot override {} inside a non-object", path[..i].join("."))))?;
        if i + 1 == path.len() {
            obj.insert(seg.clone(), value);
            return Ok(());
        }
        cur = obj.entry(seg.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Applies `EMONEWS_*` overrides from `vars` to a JSON document.
pub fn apply_env_overrides(
    doc: &mut Value,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<(), ConfigError> {
    let mut vars: Vec<_> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX) && k != ENV_CONFIG_PATH).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(String::is_empty) {
            return Err(ConfigError::Invalid(format!("malformed override variable {key}")));
        }
        set_path(doc, &path, &raw)?;
    }
    Ok(())
}

impl ServiceConfig {
    /// Reads `path` (or starts from `{}`), applies overrides from `vars`, and validates.
    pub fn load(path: Option<&Path>, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?;
                serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        apply_env_overrides(&mut doc, vars)?;
        let config: ServiceConfig = serde_json::from_value(doc).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = |key: &'static str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath { key, path: p.display().to_string() })
            }
        };
        must_exist("corpus_path", &self.corpus_path)?;
        if let Some(p) = &self.index_path {
            must_exist("index_path", p)?;
        }
        if let Some(p) = &self.style_template_path {
            must_exist("style_template_path", p)?;
        }
        if let Some(p) = &self.lexicon_path {
            must_exist("lexicon_path", p)?;
        }
        if self.retrieval_k == 0 {
            return Err(ConfigError::Invalid("retrieval_k must be at least 1".into()));
        }
        for d in self.descriptors() {
            d.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let remote_embed = self.backends.get(&BackendRole::Embed).is_some_and(|e| !e.endpoint.eq_ignore_ascii_case("mock"));
        if remote_embed && self.remote_embedder.is_none() {
            return Err(ConfigError::Invalid("a remote embed backend needs remote_embedder {id, dim}".into()));
        }
        Ok(())
    }

    pub fn descriptors(&self) -> Vec<BackendDescriptor> {
        self.backends
            .iter()
            .map(|(&role, e)| BackendDescriptor {
                role,
                endpoint: Endpoint::parse(&e.endpoint),
                timeout_ms: e.timeout_ms,
                retry_count: e.retry_count,
                bearer_token: e.bearer_token.clone(),
            })
            .collect()
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig { retrieval_k: self.retrieval_k, prompt_budget_chars: self.prompt_budget_chars }
    }

    pub fn styles(&self) -> Result<StyleTable, ConfigError> {
        match &self.style_template_path {
            Some(p) => StyleTable::load(p).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(StyleTable::default()),
        }
    }

    pub fn lexicon(&self) -> Result<Lexicon, ConfigError> {
        match &self.lexicon_path {
            Some(p) => Lexicon::load(p).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(Lexicon::builtin()),
        }
    }

    pub fn backend_options(&self, styles: &StyleTable, lexicon: Arc<Lexicon>) -> BackendOptions {
        let remote = self.remote_embedder.clone().unwrap_or(RemoteEmbedderConfig { id: "remote".into(), dim: HASH_DIM });
        BackendOptions {
            max_tokens: self.max_tokens,
            remote_embedder_id: remote.id,
            remote_embedder_dim: remote.dim,
            style_table: styles.clone(),
            lexicon,
        }
    }

    /// Loads corpus, index and backends. Creates blocking HTTP clients, so
    /// call it outside any async runtime.
    pub fn build_pipeline(&self) -> Result<Pipeline, ConfigError> {
        let startup = |e: &dyn std::fmt::Display| ConfigError::Startup(e.to_string());
        let styles = self.styles()?;
        let lexicon = Arc::new(self.lexicon()?);
        let backends = BackendSet::from_descriptors(&self.descriptors(), &self.backend_options(&styles, lexicon.clone()))
            .map_err(|e| startup(&e))?;
        let corpus = Corpus::load(&self.corpus_path).map_err(|e| startup(&e))?;
        let index = match &self.index_path {
            Some(p) => Index::load_for(p, &corpus, backends.embedder.as_ref()).map_err(|e| startup(&e))?,
            None => Index::build(&corpus, backends.embedder.as_ref()).map_err(|e| startup(&e))?,
        };
        Pipeline::new(self.mode, self.pipeline_config(), Arc::new(index), backends, lexicon, styles)
            .map_err(|e| startup(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn vars(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn overrides_nest_and_parse() {
        let mut doc = json!({"mode": "baseline", "backends": {"llm": {"endpoint": "mock"}}});
        apply_env_overrides(
            &mut doc,
            vars(&[
                ("EMONEWS_MODE", "emotional"),
                ("EMONEWS_RETRIEVAL_K", "3"),
                ("EMONEWS_BLIND_EMOTION", "false"),
                ("EMONEWS_BACKENDS__LLM__ENDPOINT", "http://llm:9000"),
                ("EMONEWS_BACKENDS__TTS__ENDPOINT", "mock"),
                ("EMONEWS_CONFIG", "/ignored.json"),
                ("OTHER", "x"),
            ]),
        )
        .unwrap();
        assert_eq!(
            doc,
            json!({
                "mode": "emotional",
                "retrieval_k": 3,
                "blind_emotion": false,
                "backends": {"llm": {"endpoint": "http://llm:9000"}, "tts": {"endpoint": "mock"}}
            })
        );
    }

    #[test]
    fn malformed_override_rejected() {
        let mut doc = json!({});
        assert!(apply_env_overrides(&mut doc, vars(&[("EMONEWS_A____B", "1")])).is_err());
        let mut doc = json!({"mode": "x"});
        assert!(apply_env_overrides(&mut doc, vars(&[("EMONEWS_MODE__INNER", "1")])).is_err());
    }

    #[test]
    fn load_validates_paths_and_defaults() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let corpus = dir.join("corpus.jsonl");
        std::fs::write(&corpus, "").unwrap();
        let v = vars(&[
            ("EMONEWS_MODE", "baseline"),
            ("EMONEWS_CORPUS_PATH", corpus.to_str().unwrap()),
            ("EMONEWS_DATA_DIR", dir.join("data").to_str().unwrap()),
        ]);
        let c = ServiceConfig::load(None, v.clone()).unwrap();
        assert!(c.blind_emotion);
        assert_eq!(c.retrieval_k, 1);
        assert_eq!(c.mode, SystemMode::Baseline);

        let mut missing = v.clone();
        missing.push(("EMONEWS_INDEX_PATH".into(), dir.join("nope.bin").to_str().unwrap().into()));
        assert!(matches!(ServiceConfig::load(None, missing), Err(ConfigError::MissingPath { key: "index_path", .. })));

        let mut unknown = v.clone();
        unknown.push(("EMONEWS_COLOUR".into(), "red".into()));
        assert!(ServiceConfig::load(None, unknown).is_err());

        let mut remote = v;
        remote.push(("EMONEWS_BACKENDS__EMBED__ENDPOINT".into(), "http://enc".into()));
        assert!(ServiceConfig::load(None, remote).is_err());
    }
}
