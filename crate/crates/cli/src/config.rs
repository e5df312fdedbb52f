use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serkit::corpus::CorpusId;
use serkit::experiments::TrainConfig;
use serkit::features::MfccConfig;
use serkit::models::ModelKind;
use serkit::Error;

/// One corpus: a directory to scan or a manifest CSV to load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub id: CorpusId,
    pub path: PathBuf,
}

/// Which corpora an experiment uses. Unset fields fall back to defaults
/// derived from the corpus list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Monolingual experiments: corpora to run (default: all, in order).
    pub corpora: Option<Vec<CorpusId>>,
    /// Cross-lingual hub / multilingual test corpus (default: first corpus).
    pub target: Option<CorpusId>,
    pub pairs: Option<Vec<(CorpusId, CorpusId)>>,
    pub combos: Option<Vec<Vec<CorpusId>>>,
}

fn default_cache() -> PathBuf {
    PathBuf::from("cache")
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigFile {
    pub corpora: Vec<CorpusSource>,
    #[serde(default = "default_cache")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mfcc: MfccConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

impl ExperimentConfigFile {
    /// Parses, resolves relative paths against the file's directory and
    /// validates every field.
    pub fn load(path: &Path) -> serkit::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfigFile =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
        let base = std::fs::canonicalize(base)?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        for c in &mut cfg.corpora {
            c.path = resolve(&c.path);
        }
        cfg.cache_dir = resolve(&cfg.cache_dir);
        cfg.output_dir = resolve(&cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> serkit::Result<()> {
        if self.corpora.is_empty() {
            return Err(Error::Config("`corpora` must list at least one corpus".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.corpora {
            if !seen.insert(&c.id) {
                return Err(Error::Config(format!("corpus {} listed twice", c.id)));
            }
            if !c.path.exists() {
                return Err(Error::NotFound(c.path.clone()));
            }
        }
        self.mfcc.validate()?;
        self.train.validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("`models` must not be empty".into()));
        }
        let s = &self.scenario;
        let mentioned = s
            .corpora
            .iter()
            .flatten()
            .chain(&s.target)
            .chain(s.pairs.iter().flatten().flat_map(|(a, b)| [a, b]))
            .chain(s.combos.iter().flatten().flatten());
        for id in mentioned {
            if !seen.contains(id) {
                return Err(Error::Config(format!("scenario refers to corpus {id}, which is not in `corpora`")));
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<CorpusId> {
        self.corpora.iter().map(|c| c.id.clone()).collect()
    }

    pub fn source(&self, id: &CorpusId) -> serkit::Result<&CorpusSource> {
        self.corpora
            .iter()
            .find(|c| &c.id == id)
            .ok_or_else(|| Error::Config(format!("corpus {id} is not configured")))
    }

    /// Hub for cross-lingual runs and test corpus for multilingual runs.
    pub fn target(&self) -> CorpusId {
        self.scenario.target.clone().unwrap_or_else(|| self.corpora[0].id.clone())
    }

    pub fn others(&self) -> Vec<CorpusId> {
        let t = self.target();
        self.ids().into_iter().filter(|c| *c != t).collect()
    }
}
