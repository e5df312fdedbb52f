use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{aggregate_runs, Metrics, Stat};
use super::train::{evaluate, train, EpochRecord, TrainConfig};
use crate::corpus::{ClipIndex, CorpusId, CorpusManifest};
use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::models::{ModelConfig, ModelKind};
use crate::splits::{
    cross_lingual_split, multilingual_split, sentence_split, speaker_split, verify_split, Scenario, SplitRatios,
    SplitSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// Monolingual, speaker-independent 70/10/20.
    Mono,
    /// Monolingual, sentence-independent 80/20.
    Sent,
    /// Train on one corpus, test on another.
    Cross,
    /// Train on several corpora, test on a held-out one.
    Multi,
}

impl ExperimentKind {
    pub fn scenario(self) -> Scenario {
        match self {
            ExperimentKind::Mono => Scenario::Monolingual,
            ExperimentKind::Sent => Scenario::SentenceIndependent,
            ExperimentKind::Cross => Scenario::CrossLingual,
            ExperimentKind::Multi => Scenario::Multilingual,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ExperimentKind::Mono => "Monolingual SER (speaker-independent split)",
            ExperimentKind::Sent => "Monolingual SER (sentence-independent split)",
            ExperimentKind::Cross => "Cross-lingual SER",
            ExperimentKind::Multi => "Multilingual SER",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Mono => "mono",
            ExperimentKind::Sent => "sent",
            ExperimentKind::Cross => "cross",
            ExperimentKind::Multi => "multi",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mono" => Ok(ExperimentKind::Mono),
            "sent" => Ok(ExperimentKind::Sent),
            "cross" => Ok(ExperimentKind::Cross),
            "multi" => Ok(ExperimentKind::Multi),
            _ => Err(Error::Config(format!("unknown experiment {s:?}; expected mono, sent, cross or multi"))),
        }
    }
}

/// Manifests, the clip index over them and the extracted features.
pub struct ExperimentData {
    pub index: ClipIndex,
    pub features: FeatureStore,
    manifests: BTreeMap<CorpusId, CorpusManifest>,
}

impl ExperimentData {
    pub fn new(manifests: Vec<CorpusManifest>, features: FeatureStore) -> Self {
        let index = ClipIndex::new(&manifests);
        ExperimentData {
            index,
            features,
            manifests: manifests.into_iter().map(|m| (m.corpus.clone(), m)).collect(),
        }
    }

    pub fn manifest(&self, corpus: &CorpusId) -> Result<&CorpusManifest> {
        self.manifests
            .get(corpus)
            .ok_or_else(|| Error::Config(format!("corpus {corpus} is not loaded")))
    }

    pub fn corpora(&self) -> Vec<CorpusId> {
        self.manifests.keys().cloned().collect()
    }

    /// Model input `(n_mfcc, n_frames, 1)` and feature fingerprint.
    pub fn input_layout(&self) -> Result<([usize; 3], String)> {
        match self.features.layout()? {
            Some((h, w, fp)) => Ok(([h, w, 1], fp)),
            None => Err(Error::Protocol("no features loaded".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub models: Vec<ModelKind>,
    pub train: TrainConfig,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            models: ModelKind::ALL.to_vec(),
            train: TrainConfig::default(),
            jobs: 1,
        }
    }
}

/// One training run evaluated on its test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub sources: Vec<CorpusId>,
    pub target: CorpusId,
    pub seed: u64,
    pub split_file: String,
    pub config_fingerprint: String,
    pub optimizer_steps: u64,
    pub history: Vec<EpochRecord>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub model: ModelKind,
    pub sources: Vec<CorpusId>,
    pub target: CorpusId,
    pub accuracy: Stat,
    pub macro_f1: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTable {
    pub kind: ExperimentKind,
    pub models: Vec<ModelKind>,
    /// Model-major, then in the order the experiment listed its corpora.
    pub rows: Vec<RunRow>,
}

impl RunTable {
    pub fn rows_for(&self, model: ModelKind) -> impl Iterator<Item = &RunRow> {
        self.rows.iter().filter(move |r| r.model == model)
    }

    /// Distinct (sources, target) groups in row order.
    pub fn groups(&self) -> Vec<(Vec<CorpusId>, CorpusId)> {
        let mut out: Vec<(Vec<CorpusId>, CorpusId)> = Vec::new();
        for r in &self.rows {
            let g = (r.sources.clone(), r.target.clone());
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }

    pub fn get(&self, model: ModelKind, sources: &[CorpusId], target: &CorpusId) -> Option<&RunRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.sources == sources && &r.target == target)
    }

    /// Mean accuracy and macro-F1 over one model's rows.
    pub fn model_average(&self, model: ModelKind) -> (f64, f64) {
        let rows: Vec<&RunRow> = self.rows_for(model).collect();
        let n = rows.len().max(1) as f64;
        (
            rows.iter().map(|r| r.accuracy.mean).sum::<f64>() / n,
            rows.iter().map(|r| r.macro_f1.mean).sum::<f64>() / n,
        )
    }

    /// Mean accuracy and macro-F1 over models for one group.
    pub fn group_average(&self, sources: &[CorpusId], target: &CorpusId) -> (f64, f64) {
        let rows: Vec<&RunRow> = self
            .rows
            .iter()
            .filter(|r| r.sources == sources && &r.target == target)
            .collect();
        let n = rows.len().max(1) as f64;
        (
            rows.iter().map(|r| r.accuracy.mean).sum::<f64>() / n,
            rows.iter().map(|r| r.macro_f1.mean).sum::<f64>() / n,
        )
    }
}

/// Everything an experiment produced; serialized as the results JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub kind: ExperimentKind,
    pub config: serde_json::Value,
    pub table: RunTable,
    pub runs: Vec<RunRecord>,
}

impl ExperimentResults {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: ExperimentResults,
    /// Split files by name.
    pub splits: BTreeMap<String, SplitSpec>,
}

#[derive(Debug, Clone)]
struct Group {
    sources: Vec<CorpusId>,
    target: CorpusId,
}

fn slug(c: &CorpusId) -> String {
    c.to_string()
        .to_ascii_lowercase()
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() { ch } else { '-' })
        .collect()
}

pub fn split_file_name(kind: ExperimentKind, sources: &[CorpusId], target: &CorpusId, seed: u64) -> String {
    let src: Vec<String> = sources.iter().map(slug).collect();
    match kind {
        ExperimentKind::Mono | ExperimentKind::Sent => format!("{kind}_{}_seed{seed}.json", slug(target)),
        _ => format!("{kind}_{}_to_{}_seed{seed}.json", src.join("+"), slug(target)),
    }
}

fn fingerprint(model: &ModelConfig, train: &TrainConfig, features: &str) -> String {
    let doc = serde_json::json!({"model": model, "train": train, "features": features});
    let digest = Sha256::digest(doc.to_string().as_bytes());
    hex::encode(&digest[..16])
}

/// Runs jobs on `workers` threads and returns results in job order.
pub(crate) fn run_parallel<J: Sync, R: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> Result<R> + Sync) -> Result<Vec<R>> {
    let workers = workers.clamp(1, jobs.len().max(1));
    if workers == 1 {
        return jobs.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn execute(
    data: &ExperimentData,
    kind: ExperimentKind,
    groups: Vec<Group>,
    make_split: impl Fn(&Group, u64) -> Result<SplitSpec>,
    opts: &RunOptions,
) -> Result<ExperimentOutput> {
    opts.train.validate()?;
    if opts.models.is_empty() {
        return Err(Error::Config("no models selected".into()));
    }
    if groups.is_empty() {
        return Err(Error::Config("no corpora selected".into()));
    }
    let (input_shape, feature_fp) = data.input_layout()?;
    let models: Vec<ModelConfig> = opts
        .models
        .iter()
        .map(|m| m.build(input_shape, 2))
        .collect::<Result<_>>()?;

    // every split is generated and verified before any training starts
    let mut splits = BTreeMap::new();
    for g in &groups {
        for &seed in &opts.train.seeds {
            let spec = make_split(g, seed)?;
            verify_split(&spec, &data.index)?;
            splits.insert(split_file_name(kind, &g.sources, &g.target, seed), spec);
        }
    }

    let mut jobs = Vec::new();
    for (mi, _) in models.iter().enumerate() {
        for (gi, _) in groups.iter().enumerate() {
            for &seed in &opts.train.seeds {
                jobs.push((mi, gi, seed));
            }
        }
    }
    let runs = run_parallel(&jobs, opts.jobs, |&(mi, gi, seed)| {
        let g = &groups[gi];
        let name = split_file_name(kind, &g.sources, &g.target, seed);
        let split = &splits[&name];
        let outcome = train(&models[mi], split, &data.index, &data.features, &opts.train, seed)?;
        let eval = evaluate(&outcome.model, &split.test, &data.index, &data.features)?;
        Ok(RunRecord {
            model: models[mi].name,
            sources: g.sources.clone(),
            target: g.target.clone(),
            seed,
            split_file: name,
            config_fingerprint: fingerprint(&models[mi], &opts.train, &feature_fp),
            optimizer_steps: outcome.model.optimizer_steps,
            history: outcome.history,
            metrics: eval.metrics,
        })
    })?;

    let mut rows = Vec::new();
    for m in &models {
        for g in &groups {
            let metrics: Vec<Metrics> = runs
                .iter()
                .filter(|r| r.model == m.name && r.sources == g.sources && r.target == g.target)
                .map(|r| r.metrics.clone())
                .collect();
            let agg = aggregate_runs(&metrics)?;
            rows.push(RunRow {
                model: m.name,
                sources: g.sources.clone(),
                target: g.target.clone(),
                accuracy: agg.accuracy,
                macro_f1: agg.macro_f1,
            });
        }
    }
    let config = serde_json::json!({
        "models": opts.models,
        "train": opts.train,
        "feature_fingerprint": feature_fp,
    });
    Ok(ExperimentOutput {
        results: ExperimentResults {
            kind,
            config,
            table: RunTable {
                kind,
                models: opts.models.clone(),
                rows,
            },
            runs,
        },
        splits,
    })
}

/// Monolingual runs on each corpus: speaker-independent 70/10/20, or the
/// sentence-independent 80/20 variant.
pub fn run_experiment1(
    data: &ExperimentData,
    corpora: &[CorpusId],
    sentence_independent: bool,
    opts: &RunOptions,
) -> Result<ExperimentOutput> {
    let groups = corpora
        .iter()
        .map(|c| Group {
            sources: vec![c.clone()],
            target: c.clone(),
        })
        .collect();
    if sentence_independent {
        execute(
            data,
            ExperimentKind::Sent,
            groups,
            |g, seed| sentence_split(data.manifest(&g.target)?, SplitRatios::SENTENCE.test, seed),
            opts,
        )
    } else {
        execute(
            data,
            ExperimentKind::Mono,
            groups,
            |g, seed| speaker_split(data.manifest(&g.target)?, SplitRatios::MONOLINGUAL, seed),
            opts,
        )
    }
}

/// One row per directed (train, test) corpus pair.
pub fn run_experiment2(data: &ExperimentData, pairs: &[(CorpusId, CorpusId)], opts: &RunOptions) -> Result<ExperimentOutput> {
    let groups = pairs
        .iter()
        .map(|(a, b)| Group {
            sources: vec![a.clone()],
            target: b.clone(),
        })
        .collect();
    execute(
        data,
        ExperimentKind::Cross,
        groups,
        |g, seed| cross_lingual_split(data.manifest(&g.sources[0])?, data.manifest(&g.target)?, seed),
        opts,
    )
}

/// One row per training combination, all tested on `target`.
pub fn run_experiment3(
    data: &ExperimentData,
    combos: &[Vec<CorpusId>],
    target: &CorpusId,
    opts: &RunOptions,
) -> Result<ExperimentOutput> {
    let groups = combos
        .iter()
        .map(|c| Group {
            sources: c.clone(),
            target: target.clone(),
        })
        .collect();
    execute(
        data,
        ExperimentKind::Multi,
        groups,
        |g, seed| {
            let train: Vec<&CorpusManifest> = g.sources.iter().map(|c| data.manifest(c)).collect::<Result<_>>()?;
            multilingual_split(&train, data.manifest(&g.target)?, seed)
        },
        opts,
    )
}

/// Both directions between `hub` and every other corpus.
pub fn default_pairs(hub: &CorpusId, others: &[CorpusId]) -> Vec<(CorpusId, CorpusId)> {
    others
        .iter()
        .filter(|o| *o != hub)
        .flat_map(|o| [(hub.clone(), o.clone()), (o.clone(), hub.clone())])
        .collect()
}

/// Every pair of `others` in order, then all of them together when there
/// are three.
pub fn default_combos(others: &[CorpusId]) -> Vec<Vec<CorpusId>> {
    let mut out = Vec::new();
    for i in 0..others.len() {
        for j in i + 1..others.len() {
            out.push(vec![others[i].clone(), others[j].clone()]);
        }
    }
    if others.len() == 3 {
        out.push(others.to_vec());
    }
    out
}
