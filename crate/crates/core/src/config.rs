//! Run configuration: built-in defaults, a TOML file, then command-line
//! overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::environment::{AblationConfig, WorkflowConfig, DEFAULT_K_MAX};
use crate::knowledge::{load_corpus, Category, Index, IndexParams, KnowledgeBase, KnowledgeError, DEFAULT_RETRIEVAL_K};
use crate::llm::{BackendConfig, BackendKind, Gateway, LlmError, MockBackend, Scenario};
use crate::paramaster::{MockPostExecutor, ParaError, PostExecutor, ProcessPostExecutor, DEFAULT_POST_ATTEMPT_CAP};
use crate::reviewer::ReviewerConfig;
use crate::runner::{Executor, FauxFoam, RunnerError, SubprocessExecutor, DEFAULT_COMMAND_TIMEOUT};

/// Corpus shipped with the crate.
pub const SHIPPED_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus");
/// Mock scenarios shipped with the crate.
pub const SHIPPED_SCENARIOS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("scenario {0:?} not found")]
    UnknownScenario(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Post(#[from] ParaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunnerKind {
    Subprocess,
    Faux,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerSection {
    pub kind: RunnerKind,
    pub command_timeout_s: u64,
}

impl Default for RunnerSection {
    fn default() -> Self {
        Self { kind: RunnerKind::Faux, command_timeout_s: DEFAULT_COMMAND_TIMEOUT.as_secs() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostSection {
    /// `mock`, or the batch interpreter (e.g. `pvpython`).
    pub executor: String,
    pub timeout_s: u64,
    pub attempt_cap: u32,
}

impl Default for PostSection {
    fn default() -> Self {
        Self { executor: "mock".into(), timeout_s: 600, attempt_cap: DEFAULT_POST_ATTEMPT_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeSection {
    pub corpus: Option<PathBuf>,
    /// Prebuilt index; takes precedence over `corpus`.
    pub index: Option<PathBuf>,
    pub chunk_size: usize,
    pub overlap: usize,
    pub k: usize,
    pub k_per_category: BTreeMap<Category, usize>,
}

impl Default for KnowledgeSection {
    fn default() -> Self {
        let p = IndexParams::default();
        Self {
            corpus: None,
            index: None,
            chunk_size: p.chunk_size,
            overlap: p.overlap,
            k: DEFAULT_RETRIEVAL_K,
            k_per_category: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub runner: RunnerSection,
    pub post: PostSection,
    pub knowledge: KnowledgeSection,
    pub ablation: AblationConfig,
    pub reviewer: ReviewerConfig,
    pub case_root: PathBuf,
    pub k_max: u32,
    /// Mock scenario name or path.
    pub scenario: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            runner: RunnerSection::default(),
            post: PostSection::default(),
            knowledge: KnowledgeSection::default(),
            ablation: AblationConfig::default(),
            reviewer: ReviewerConfig::default(),
            case_root: PathBuf::from("runs"),
            k_max: DEFAULT_K_MAX,
            scenario: None,
        }
    }
}

/// Values given on the command line; `None` leaves the file or default value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub case_root: Option<PathBuf>,
    pub k_max: Option<u32>,
    pub runner: Option<RunnerKind>,
    /// `true` for a live backend, `false` for mock.
    pub live_backend: Option<bool>,
    pub scenario: Option<String>,
    pub no_observe_picture: bool,
    pub no_reviewer: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Defaults, then the optional file, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.case_root {
            self.case_root = v.clone();
        }
        if let Some(v) = o.k_max {
            self.k_max = v;
        }
        if let Some(v) = o.runner {
            self.runner.kind = v;
        }
        match o.live_backend {
            Some(false) => self.backend.kind = BackendKind::Mock,
            Some(true) if self.backend.kind == BackendKind::Mock => self.backend.kind = BackendKind::LiveMultimodal,
            _ => {}
        }
        if let Some(v) = &o.scenario {
            self.scenario = Some(v.clone());
        }
        if o.no_observe_picture {
            self.ablation.observe_picture_enabled = false;
        }
        if o.no_reviewer {
            self.ablation.reviewer_enabled = false;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.k_max < 1 {
            return invalid("k_max must be at least 1");
        }
        if self.post.attempt_cap < 1 {
            return invalid("post.attempt_cap must be at least 1");
        }
        if self.knowledge.k < 1 || self.knowledge.k_per_category.values().any(|&k| k < 1) {
            return invalid("retrieval k must be at least 1");
        }
        if self.knowledge.chunk_size <= self.knowledge.overlap {
            return invalid("knowledge.chunk_size must exceed knowledge.overlap");
        }
        self.backend.validate()?;
        for p in [&self.knowledge.corpus, &self.knowledge.index].into_iter().flatten() {
            if !p.exists() {
                return Err(ConfigError::Invalid(format!("path {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn index_params(&self) -> IndexParams {
        IndexParams { chunk_size: self.knowledge.chunk_size, overlap: self.knowledge.overlap }
    }

    pub fn knowledge_base(&self) -> Result<KnowledgeBase, ConfigError> {
        let k = self.knowledge.k;
        let mut kb = match &self.knowledge.index {
            Some(path) => KnowledgeBase::from_index(Index::load(path)?, k)?,
            None => {
                let dir = self.knowledge.corpus.clone().unwrap_or_else(|| PathBuf::from(SHIPPED_CORPUS));
                KnowledgeBase::from_corpus(&load_corpus(&dir)?, self.index_params(), k)?
            }
        };
        for (&cat, &ck) in &self.knowledge.k_per_category {
            kb = kb.with_category_k(cat, ck)?;
        }
        Ok(kb)
    }

    pub fn executor(&self) -> Result<Box<dyn Executor>, ConfigError> {
        Ok(match self.runner.kind {
            RunnerKind::Faux => Box::new(FauxFoam::default()),
            RunnerKind::Subprocess => {
                Box::new(SubprocessExecutor::new(Duration::from_secs(self.runner.command_timeout_s))?)
            }
        })
    }

    /// A fresh gateway and post executor for one case.
    pub fn session(&self, scenario: Option<&str>) -> Result<(Gateway, Box<dyn PostExecutor>), ConfigError> {
        let scenario = scenario.or(self.scenario.as_deref()).map(resolve_scenario).transpose()?;
        let loaded = scenario.as_deref().map(Scenario::load).transpose()?;
        let gateway = match (self.backend.kind, &loaded) {
            (BackendKind::Mock, Some(s)) => {
                self.backend.validate()?;
                Gateway::new(Box::new(MockBackend::new(s.clone())))
            }
            (BackendKind::Mock, None) => {
                return Err(ConfigError::Invalid("the mock backend needs a scenario (--scenario)".into()))
            }
            _ => Gateway::from_config(&self.backend, None)?,
        };
        let post: Box<dyn PostExecutor> = if self.post.executor == "mock" {
            Box::new(MockPostExecutor::new(loaded.map(|s| s.post_runs).unwrap_or_default()))
        } else {
            Box::new(ProcessPostExecutor::new(&self.post.executor, Duration::from_secs(self.post.timeout_s))?)
        };
        Ok((gateway, post))
    }

    pub fn workflow_config(&self, case_id: &str, case_dir: PathBuf, trace_path: Option<PathBuf>) -> WorkflowConfig {
        WorkflowConfig {
            case_id: case_id.to_string(),
            case_dir,
            k_max: self.k_max,
            ablation: self.ablation,
            reviewer: self.reviewer.clone(),
            post_attempt_cap: self.post.attempt_cap,
            trace_path,
        }
    }

    /// 1 when the image is pre-parsed, 2 when it goes straight to the writer.
    pub fn method(&self) -> u8 {
        if self.ablation.observe_picture_enabled {
            1
        } else {
            2
        }
    }
}

/// A scenario file path, or a name looked up among the shipped scenarios.
pub fn resolve_scenario(name_or_path: &str) -> Result<PathBuf, ConfigError> {
    let direct = PathBuf::from(name_or_path);
    if direct.is_file() {
        return Ok(direct);
    }
    let dir = Path::new(SHIPPED_SCENARIOS);
    [format!("{name_or_path}.toml"), name_or_path.replace('-', "_") + ".toml"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
        .ok_or_else(|| ConfigError::UnknownScenario(name_or_path.to_string()))
}
