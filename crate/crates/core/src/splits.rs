//! Train/validation/test partitions with speaker or sentence independence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClipIndex, CorpusId, CorpusManifest, ValenceCounts};
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    Monolingual,
    SentenceIndependent,
    CrossLingual,
    Multilingual,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Fractions of clips for train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const MONOLINGUAL: SplitRatios = SplitRatios::new(0.7, 0.1, 0.2);
    pub const SENTENCE: SplitRatios = SplitRatios::new(0.8, 0.0, 0.2);
    /// Validation holdout taken from each training corpus.
    pub const HOLDOUT: SplitRatios = SplitRatios::new(0.9, 0.1, 0.0);

    pub const fn new(train: f64, validation: f64, test: f64) -> Self {
        SplitRatios { train, validation, test }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|r| !(0.0..=1.0).contains(r)) || (a.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios {a:?} must be fractions summing to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub scenario: Scenario,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub source_corpora: Vec<CorpusId>,
    pub target_corpus: CorpusId,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitSpec {
    pub fn partitions(&self) -> [(&'static str, &[String]); 3] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(&[seed, salt]))
}

/// Groups of clip ids that must stay together, keyed for determinism.
type Groups = BTreeMap<String, Vec<String>>;

/// Greedily assigns shuffled groups to the partition whose clip count lags
/// its target the most. All clips of a group land in one partition, and each
/// partition's count ends within one largest group of its target.
///
/// A partition with a positive share that ends up empty receives a group
/// from another partition when that keeps every count within the bound;
/// otherwise the split is infeasible.
fn pack_groups(groups: Groups, ratios: SplitRatios, rng: &mut ChaCha8Rng) -> Result<[Vec<String>; 3]> {
    let total: usize = groups.values().map(Vec::len).sum();
    let largest = groups.values().map(Vec::len).max().unwrap_or(0) as f64;
    let shares = ratios.as_array();
    let targets = shares.map(|r| r * total as f64);
    let mut order: Vec<(String, Vec<String>)> = groups.into_iter().collect();
    order.shuffle(rng);
    let mut assigned: [Vec<Vec<String>>; 3] = Default::default();
    let mut counts = [0usize; 3];
    for (_, clips) in order {
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for i in 0..3 {
            let deficit = targets[i] - counts[i] as f64;
            if shares[i] > 0.0 && deficit > best_deficit {
                best = i;
                best_deficit = deficit;
            }
        }
        counts[best] += clips.len();
        assigned[best].push(clips);
    }
    let worst = |counts: &[usize; 3]| (0..3).map(|i| (counts[i] as f64 - targets[i]).abs()).fold(0.0, f64::max);
    for i in 0..3 {
        if shares[i] == 0.0 || !assigned[i].is_empty() {
            continue;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for j in (0..3).filter(|&j| assigned[j].len() >= 2) {
            for (k, g) in assigned[j].iter().enumerate() {
                let mut c = counts;
                c[j] -= g.len();
                c[i] += g.len();
                let w = worst(&c);
                if best.is_none_or(|(bw, _, _)| w < bw) {
                    best = Some((w, j, k));
                }
            }
        }
        match best {
            Some((w, j, k)) if w <= largest + 1e-9 => {
                let g = assigned[j].remove(k);
                counts[j] -= g.len();
                counts[i] += g.len();
                assigned[i].push(g);
            }
            _ => {
                return Err(Error::Infeasible(format!(
                    "cannot fill the {} partition without moving another partition more than one group \
                     ({largest} clips) away from its target",
                    ["train", "validation", "test"][i]
                )))
            }
        }
    }
    Ok(assigned.map(|gs| {
        let mut ids: Vec<String> = gs.into_iter().flatten().collect();
        ids.sort();
        ids
    }))
}

fn speaker_groups(manifest: &CorpusManifest) -> Groups {
    let mut groups: Groups = BTreeMap::new();
    for e in &manifest.entries {
        groups.entry(e.speaker_id.clone()).or_default().push(e.clip_id.clone());
    }
    groups
}

/// Speaker-independent split targeting the given clip-count ratios.
pub fn speaker_split(manifest: &CorpusManifest, ratios: SplitRatios, seed: u64) -> Result<SplitSpec> {
    ratios.validate()?;
    let groups = speaker_groups(manifest);
    if groups.len() < 3 {
        return Err(Error::Infeasible(format!(
            "{} has {} speaker(s); a speaker-independent three-way split needs at least 3",
            manifest.corpus,
            groups.len()
        )));
    }
    let [train, validation, test] = pack_groups(groups, ratios, &mut rng_for(seed, 1))?;
    Ok(SplitSpec {
        scenario: Scenario::Monolingual,
        seed,
        ratios,
        source_corpora: vec![manifest.corpus.clone()],
        target_corpus: manifest.corpus.clone(),
        train,
        validation,
        test,
    })
}

/// Sentence-independent train/test split over sentence ids.
///
/// The test share is `round(n_sentences * test_fraction)`, clamped so both
/// sides get at least one sentence.
pub fn sentence_split(manifest: &CorpusManifest, test_fraction: f64, seed: u64) -> Result<SplitSpec> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 {
        return Err(Error::Config(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    if !manifest.corpus.has_sentences() || manifest.entries.iter().any(|e| e.sentence_id.is_none()) {
        return Err(Error::Protocol(format!(
            "{} does not identify sentences; a sentence-independent split is not possible",
            manifest.corpus
        )));
    }
    let mut groups: Groups = BTreeMap::new();
    for e in &manifest.entries {
        let sid = e.sentence_id.clone().expect("checked above");
        groups.entry(sid).or_default().push(e.clip_id.clone());
    }
    if groups.len() < 2 {
        return Err(Error::Infeasible(format!(
            "{} has {} sentence(s); need at least 2",
            manifest.corpus,
            groups.len()
        )));
    }
    let mut order: Vec<(String, Vec<String>)> = groups.into_iter().collect();
    order.shuffle(&mut rng_for(seed, 2));
    let n_test = ((order.len() as f64 * test_fraction).round() as usize).clamp(1, order.len() - 1);
    let mut test: Vec<String> = order[..n_test].iter().flat_map(|(_, c)| c.iter().cloned()).collect();
    let mut train: Vec<String> = order[n_test..].iter().flat_map(|(_, c)| c.iter().cloned()).collect();
    test.sort();
    train.sort();
    Ok(SplitSpec {
        scenario: Scenario::SentenceIndependent,
        seed,
        ratios: SplitRatios::new(1.0 - test_fraction, 0.0, test_fraction),
        source_corpora: vec![manifest.corpus.clone()],
        target_corpus: manifest.corpus.clone(),
        train,
        validation: Vec::new(),
        test,
    })
}

fn holdout(manifest: &CorpusManifest, seed: u64, salt: u64) -> Result<(Vec<String>, Vec<String>)> {
    let groups = speaker_groups(manifest);
    if groups.len() < 2 {
        return Err(Error::Infeasible(format!(
            "{} has {} speaker(s); a speaker-unseen validation holdout needs at least 2",
            manifest.corpus,
            groups.len()
        )));
    }
    let [train, validation, _] = pack_groups(groups, SplitRatios::HOLDOUT, &mut rng_for(seed, salt))?;
    Ok((train, validation))
}

/// Train on one corpus (minus a speaker-held-out validation set), test on
/// all of another.
pub fn cross_lingual_split(
    train_manifest: &CorpusManifest,
    test_manifest: &CorpusManifest,
    seed: u64,
) -> Result<SplitSpec> {
    if train_manifest.corpus == test_manifest.corpus {
        return Err(Error::Protocol(format!(
            "cross-lingual split needs two different corpora, got {} twice",
            train_manifest.corpus
        )));
    }
    let (train, validation) = holdout(train_manifest, seed, 3)?;
    Ok(SplitSpec {
        scenario: Scenario::CrossLingual,
        seed,
        ratios: SplitRatios::HOLDOUT,
        source_corpora: vec![train_manifest.corpus.clone()],
        target_corpus: test_manifest.corpus.clone(),
        train,
        validation,
        test: test_manifest.entries.iter().map(|e| e.clip_id.clone()).collect(),
    })
}

/// Train on the union of two or three corpora, test on all of another.
pub fn multilingual_split(
    train_manifests: &[&CorpusManifest],
    test_manifest: &CorpusManifest,
    seed: u64,
) -> Result<SplitSpec> {
    if !(2..=3).contains(&train_manifests.len()) {
        return Err(Error::Protocol(format!(
            "multilingual training uses 2 or 3 corpora, got {}",
            train_manifests.len()
        )));
    }
    let sources: Vec<CorpusId> = train_manifests.iter().map(|m| m.corpus.clone()).collect();
    if sources.contains(&test_manifest.corpus) {
        return Err(Error::Protocol(format!(
            "test corpus {} is also a training corpus",
            test_manifest.corpus
        )));
    }
    if sources.iter().collect::<BTreeSet<_>>().len() != sources.len() {
        return Err(Error::Protocol("training corpora must be distinct".into()));
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (i, m) in train_manifests.iter().enumerate() {
        let (t, v) = holdout(m, seed, 4 + i as u64)?;
        train.extend(t);
        validation.extend(v);
    }
    train.sort();
    validation.sort();
    Ok(SplitSpec {
        scenario: Scenario::Multilingual,
        seed,
        ratios: SplitRatios::HOLDOUT,
        source_corpora: sources,
        target_corpus: test_manifest.corpus.clone(),
        train,
        validation,
        test: test_manifest.entries.iter().map(|e| e.clip_id.clone()).collect(),
    })
}

/// Outcome of [`verify_split`]: the checks that ran and per-partition counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub scenario: Scenario,
    pub label: String,
    pub checks: Vec<String>,
    pub train: ValenceCounts,
    pub test: ValenceCounts,
    pub validation: ValenceCounts,
}

impl SplitReport {
    pub const TABLE_HEADER: &'static str =
        "| Dataset | Train Positive | Train Negative | Test Positive | Test Negative | Validation Positive | Validation Negative |";

    /// One row in the class-distribution table layout.
    pub fn table_row(&self) -> String {
        format!(
            "| {} | {} | {} | {} | {} | {} | {} |",
            self.label,
            self.train.positive,
            self.train.negative,
            self.test.positive,
            self.test.negative,
            self.validation.positive,
            self.validation.negative
        )
    }
}

impl fmt::Display for SplitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::TABLE_HEADER)?;
        writeln!(f, "|---|---|---|---|---|---|---|")?;
        writeln!(f, "{}", self.table_row())?;
        for c in &self.checks {
            writeln!(f, "{c}: OK")?;
        }
        Ok(())
    }
}

fn sample(ids: &BTreeSet<String>) -> String {
    let shown: Vec<&str> = ids.iter().take(5).map(String::as_str).collect();
    let more = ids.len().saturating_sub(shown.len());
    if more > 0 {
        format!("{} (+{more} more)", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

/// Recomputes every invariant of the split's scenario against clip metadata.
pub fn verify_split(spec: &SplitSpec, index: &ClipIndex) -> Result<SplitReport> {
    let mut failures = Vec::new();
    let mut checks = vec!["partitions disjoint".to_string()];

    let parts = spec.partitions();
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    let mut overlaps = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for (name, ids) in parts {
        for id in ids {
            if owner.insert(id, name).is_some() {
                overlaps.insert(id.clone());
            }
            if index.get(id).is_none() {
                unknown.insert(id.clone());
            }
        }
    }
    if !overlaps.is_empty() {
        failures.push(format!("clips in more than one partition: {}", sample(&overlaps)));
    }
    if !unknown.is_empty() {
        failures.push(format!("unresolvable clip ids: {}", sample(&unknown)));
    }

    let metas = |ids: &[String]| -> Vec<_> { ids.iter().filter_map(|id| index.get(id)).collect() };
    let train = metas(&spec.train);
    let validation = metas(&spec.validation);
    let test = metas(&spec.test);

    match spec.scenario {
        Scenario::Monolingual => {
            checks.push("speaker-independent".into());
            let mut seen: BTreeMap<(CorpusId, String), BTreeSet<&str>> = BTreeMap::new();
            for (name, group) in [("train", &train), ("validation", &validation), ("test", &test)] {
                for m in group {
                    seen.entry(m.speaker_key()).or_default().insert(name);
                }
            }
            let shared: BTreeSet<String> = seen
                .iter()
                .filter(|(_, p)| p.len() > 1)
                .map(|((c, s), p)| format!("{c}/{s} in {}", p.iter().copied().collect::<Vec<_>>().join("+")))
                .collect();
            if !shared.is_empty() {
                failures.push(format!("speakers shared between partitions: {}", sample(&shared)));
            }
        }
        Scenario::SentenceIndependent => {
            checks.push("sentence-independent".into());
            let key = |m: &&crate::corpus::ClipMeta| (m.corpus.clone(), m.sentence_id.clone());
            let train_s: BTreeSet<_> = train.iter().map(key).collect();
            let shared: BTreeSet<String> = test
                .iter()
                .map(key)
                .filter(|k| train_s.contains(k))
                .map(|(c, s)| format!("{c}/{}", s.unwrap_or_else(|| "<none>".into())))
                .collect();
            if !shared.is_empty() {
                failures.push(format!("sentences in both train and test: {}", sample(&shared)));
            }
        }
        Scenario::CrossLingual | Scenario::Multilingual => {
            checks.push("target corpus held out".into());
            checks.push("validation speakers unseen in training".into());
            if spec.source_corpora.contains(&spec.target_corpus) {
                failures.push(format!("target {} is also a source corpus", spec.target_corpus));
            }
            let foreign_test: BTreeSet<String> = test
                .iter()
                .filter(|m| m.corpus != spec.target_corpus)
                .map(|m| m.clip_id.clone())
                .collect();
            if !foreign_test.is_empty() {
                failures.push(format!("test clips outside the target corpus: {}", sample(&foreign_test)));
            }
            let foreign_train: BTreeSet<String> = train
                .iter()
                .chain(&validation)
                .filter(|m| !spec.source_corpora.contains(&m.corpus))
                .map(|m| m.clip_id.clone())
                .collect();
            if !foreign_train.is_empty() {
                failures.push(format!("training clips outside the source corpora: {}", sample(&foreign_train)));
            }
            let train_speakers: BTreeSet<_> = train.iter().map(|m| m.speaker_key()).collect();
            let leaked: BTreeSet<String> = validation
                .iter()
                .map(|m| m.speaker_key())
                .filter(|k| train_speakers.contains(k))
                .map(|(c, s)| format!("{c}/{s}"))
                .collect();
            if !leaked.is_empty() {
                failures.push(format!("validation speakers seen in training: {}", sample(&leaked)));
            }
        }
    }

    if !failures.is_empty() {
        return Err(Error::Verification(failures.join("\n")));
    }
    let label = match spec.scenario {
        Scenario::Monolingual | Scenario::SentenceIndependent => spec.target_corpus.to_string(),
        _ => format!(
            "{} -> {}",
            spec.source_corpora.iter().map(ToString::to_string).collect::<Vec<_>>().join("+"),
            spec.target_corpus
        ),
    };
    Ok(SplitReport {
        scenario: spec.scenario,
        label,
        checks,
        train: ValenceCounts::tally(train),
        test: ValenceCounts::tally(test),
        validation: ValenceCounts::tally(validation),
    })
}
