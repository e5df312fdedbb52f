//! Corpus manifests: filename conventions, binary valence labels, duration
//! statistics and synthetic stand-in corpora.

mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::audio_io::read_wav_info;
use crate::error::{Error, Result};

pub use synth::{synth_corpus, EmotionVoice, LanguageVoice, SynthCorpus, SynthSpec};

/// Corpus identifier. Synthetic corpora carry a pseudo-language name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CorpusId {
    Ased,
    Ravdess,
    Emodb,
    Urdu,
    Synth(String),
}

impl CorpusId {
    pub const REAL: [CorpusId; 4] = [CorpusId::Ased, CorpusId::Ravdess, CorpusId::Emodb, CorpusId::Urdu];

    pub fn synth(name: impl Into<String>) -> Self {
        CorpusId::Synth(name.into())
    }

    /// Whether clips of this corpus carry sentence ids.
    pub fn has_sentences(&self) -> bool {
        !matches!(self, CorpusId::Urdu)
    }

    /// Label used in report tables.
    pub fn display_name(&self) -> String {
        match self {
            CorpusId::Emodb => "EMO-DB".into(),
            CorpusId::Synth(name) => format!("SYNTH:{name}"),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for CorpusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusId::Ased => f.write_str("ASED"),
            CorpusId::Ravdess => f.write_str("RAVDESS"),
            CorpusId::Emodb => f.write_str("EMODB"),
            CorpusId::Urdu => f.write_str("URDU"),
            CorpusId::Synth(name) => write!(f, "SYNTH:{name}"),
        }
    }
}

impl FromStr for CorpusId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Ok(match upper.as_str() {
            "ASED" => CorpusId::Ased,
            "RAVDESS" => CorpusId::Ravdess,
            "EMODB" | "EMO-DB" => CorpusId::Emodb,
            "URDU" => CorpusId::Urdu,
            _ => match upper.strip_prefix("SYNTH:") {
                Some(_) if s.trim().len() > 6 => CorpusId::Synth(s.trim()[6..].to_string()),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown corpus {s:?}; expected ASED, RAVDESS, EMODB, URDU or SYNTH:<name>"
                    )))
                }
            },
        })
    }
}

impl Serialize for CorpusId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CorpusId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Valence {
    Positive,
    Negative,
}

impl Valence {
    pub const ALL: [Valence; 2] = [Valence::Positive, Valence::Negative];

    pub fn class_index(self) -> usize {
        match self {
            Valence::Positive => 0,
            Valence::Negative => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Option<Self> {
        Valence::ALL.get(i).copied()
    }
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Valence::Positive => "Positive",
            Valence::Negative => "Negative",
        })
    }
}

impl FromStr for Valence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Valence::Positive),
            "negative" => Ok(Valence::Negative),
            _ => Err(Error::Config(format!("unknown valence {s:?}"))),
        }
    }
}

/// Positive and negative label sets per corpus.
pub fn label_set(corpus: &CorpusId) -> (&'static [&'static str], &'static [&'static str]) {
    match corpus {
        CorpusId::Ased => (&["neutral", "happy"], &["fear", "sadness", "angry"]),
        CorpusId::Ravdess => (
            &["neutral", "happy", "calm", "surprise"],
            &["fear", "sadness", "angry", "disgust"],
        ),
        CorpusId::Emodb => (
            &["neutral", "happiness"],
            &["anger", "sadness", "fear", "disgust", "boredom"],
        ),
        CorpusId::Urdu => (&["neutral", "happy"], &["angry", "sad"]),
        CorpusId::Synth(_) => (&["neutral", "happy"], &["angry", "sad"]),
    }
}

/// RAVDESS documentation spells three labels differently from the valence table.
fn canonical_label<'a>(corpus: &CorpusId, label: &'a str) -> &'a str {
    match (corpus, label) {
        (CorpusId::Ravdess, "fearful") => "fear",
        (CorpusId::Ravdess, "sad") => "sadness",
        (CorpusId::Ravdess, "surprised") => "surprise",
        _ => label,
    }
}

pub fn to_valence(corpus: &CorpusId, emotion: &str) -> Result<Valence> {
    let lower = emotion.trim().to_ascii_lowercase();
    let label = canonical_label(corpus, &lower);
    let (pos, neg) = label_set(corpus);
    if pos.contains(&label) {
        Ok(Valence::Positive)
    } else if neg.contains(&label) {
        Ok(Valence::Negative)
    } else {
        Err(Error::Mapping {
            corpus: corpus.to_string(),
            label: emotion.to_string(),
            valid: pos.iter().chain(neg).copied().collect::<Vec<_>>().join(", "),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub clip_id: String,
    pub path: String,
    pub corpus: CorpusId,
    pub speaker_id: String,
    pub sentence_id: Option<String>,
    pub emotion: String,
    pub valence: Valence,
    pub duration_s: f64,
}

impl ClipMeta {
    /// Speaker key that stays unique across corpora.
    pub fn speaker_key(&self) -> (CorpusId, String) {
        (self.corpus.clone(), self.speaker_id.clone())
    }
}

/// Metadata recoverable from a corpus-relative file path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedName {
    pub speaker_id: String,
    pub sentence_id: Option<String>,
    pub emotion: String,
    /// RAVDESS emotional intensity (1 normal, 2 strong); parsed, never filtered on.
    pub intensity: Option<u8>,
}

fn parse_err(name: &str, position: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        name: name.to_string(),
        position,
        detail: detail.into(),
    }
}

fn strip_wav(name: &str) -> Option<&str> {
    let n = name.len();
    (n > 4 && name[n - 4..].eq_ignore_ascii_case(".wav")).then(|| &name[..n - 4])
}

fn file_part(rel: &str) -> (usize, &str) {
    match rel.rfind('/') {
        Some(i) => (i + 1, &rel[i + 1..]),
        None => (0, rel),
    }
}

const RAVDESS_EMOTIONS: [&str; 8] = [
    "neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised",
];

fn parse_ravdess(rel: &str) -> Result<ParsedName> {
    let (offset, file) = file_part(rel);
    let stem = strip_wav(file).ok_or_else(|| parse_err(rel, offset, "expected a .wav extension"))?;
    let fields: Vec<&str> = stem.split('-').collect();
    if fields.len() != 7 {
        return Err(parse_err(
            rel,
            offset,
            format!("expected 7 dash-separated fields MM-VC-EE-II-SS-RR-AA, found {}", fields.len()),
        ));
    }
    let mut codes = [0u8; 7];
    let mut pos = offset;
    for (i, f) in fields.iter().enumerate() {
        if f.len() != 2 || !f.bytes().all(|b| b.is_ascii_digit()) {
            return Err(parse_err(rel, pos, format!("field {} ({f:?}) is not a two-digit code", i + 1)));
        }
        codes[i] = f.parse().expect("two ascii digits");
        pos += f.len() + 1;
    }
    let emotion = codes[2];
    if !(1..=8).contains(&emotion) {
        return Err(Error::Mapping {
            corpus: CorpusId::Ravdess.to_string(),
            label: format!("emotion code {:02}", emotion),
            valid: "01..08".into(),
        });
    }
    if !(1..=2).contains(&codes[3]) {
        return Err(Error::Mapping {
            corpus: CorpusId::Ravdess.to_string(),
            label: format!("intensity code {:02}", codes[3]),
            valid: "01, 02".into(),
        });
    }
    Ok(ParsedName {
        speaker_id: fields[6].to_string(),
        sentence_id: Some(fields[4].to_string()),
        emotion: RAVDESS_EMOTIONS[emotion as usize - 1].to_string(),
        intensity: Some(codes[3]),
    })
}

fn parse_emodb(rel: &str) -> Result<ParsedName> {
    let (offset, file) = file_part(rel);
    let stem = strip_wav(file).ok_or_else(|| parse_err(rel, offset, "expected a .wav extension"))?;
    let b = stem.as_bytes();
    if b.len() != 7 {
        return Err(parse_err(rel, offset, format!("expected 7 characters SStxxEV, found {}", b.len())));
    }
    if !b[0..2].iter().all(u8::is_ascii_digit) {
        return Err(parse_err(rel, offset, "speaker must be two digits"));
    }
    if !(b[2] == b'a' || b[2] == b'b') || !b[3..5].iter().all(u8::is_ascii_digit) {
        return Err(parse_err(rel, offset + 2, "text code must be a or b followed by two digits"));
    }
    let emotion = match b[5] {
        b'W' => "anger",
        b'L' => "boredom",
        b'E' => "disgust",
        b'A' => "fear",
        b'F' => "happiness",
        b'T' => "sadness",
        b'N' => "neutral",
        other => {
            return Err(Error::Mapping {
                corpus: CorpusId::Emodb.to_string(),
                label: (other as char).to_string(),
                valid: "W, L, E, A, F, T, N".into(),
            })
        }
    };
    if !b[6].is_ascii_lowercase() {
        return Err(parse_err(rel, offset + 6, "version must be a lowercase letter"));
    }
    Ok(ParsedName {
        speaker_id: stem[0..2].to_string(),
        sentence_id: Some(stem[2..5].to_string()),
        emotion: emotion.to_string(),
        intensity: None,
    })
}

/// `<emotion>/<speaker>_<sentence>_<...>.wav` (or `<emotion>/<speaker>_<...>.wav`
/// when the corpus has no sentence ids).
fn parse_dir_layout(rel: &str, with_sentence: bool) -> Result<ParsedName> {
    let parts: Vec<&str> = rel.split('/').collect();
    if parts.len() < 2 {
        return Err(parse_err(rel, 0, "expected <emotion>/<file>.wav"));
    }
    let emotion = parts[parts.len() - 2];
    let (offset, file) = file_part(rel);
    let stem = strip_wav(file).ok_or_else(|| parse_err(rel, offset, "expected a .wav extension"))?;
    let tokens: Vec<&str> = stem.split('_').collect();
    let need = if with_sentence { 3 } else { 2 };
    if tokens.len() < need || tokens.iter().take(need).any(|t| t.is_empty()) {
        return Err(parse_err(
            rel,
            offset,
            format!("expected at least {need} underscore-separated tokens"),
        ));
    }
    Ok(ParsedName {
        speaker_id: tokens[0].to_string(),
        sentence_id: with_sentence.then(|| tokens[1].to_string()),
        emotion: emotion.to_ascii_lowercase(),
        intensity: None,
    })
}

/// Parses a corpus-relative path (forward slashes) per the corpus convention.
pub fn parse_filename(corpus: &CorpusId, rel: &str) -> Result<ParsedName> {
    match corpus {
        CorpusId::Ravdess => parse_ravdess(rel),
        CorpusId::Emodb => parse_emodb(rel),
        CorpusId::Urdu => parse_dir_layout(rel, false),
        CorpusId::Ased => parse_dir_layout(rel, true),
        CorpusId::Synth(_) => {
            let tokens = rel.rsplit('/').next().map_or(0, |f| f.split('_').count());
            parse_dir_layout(rel, tokens >= 3)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValenceCounts {
    pub positive: usize,
    pub negative: usize,
}

impl ValenceCounts {
    pub fn tally<'a, I: IntoIterator<Item = &'a ClipMeta>>(entries: I) -> Self {
        let mut c = ValenceCounts::default();
        for e in entries {
            c.add(e.valence);
        }
        c
    }

    pub fn add(&mut self, v: Valence) {
        match v {
            Valence::Positive => self.positive += 1,
            Valence::Negative => self.negative += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub corpus: CorpusId,
    pub entries: Vec<ClipMeta>,
    pub counts: ValenceCounts,
}

impl CorpusManifest {
    /// Sorts by clip id and recomputes counts; rejects duplicates and foreign entries.
    pub fn new(corpus: CorpusId, mut entries: Vec<ClipMeta>) -> Result<Self> {
        entries.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        if let Some(w) = entries.windows(2).find(|w| w[0].clip_id == w[1].clip_id) {
            return Err(Error::Config(format!("duplicate clip id {}", w[0].clip_id)));
        }
        if let Some(e) = entries.iter().find(|e| e.corpus != corpus) {
            return Err(Error::Config(format!("clip {} belongs to {}, not {corpus}", e.clip_id, e.corpus)));
        }
        let counts = ValenceCounts::tally(&entries);
        Ok(CorpusManifest { corpus, entries, counts })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn speakers(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.speaker_id.as_str()).collect()
    }

    pub fn sentences(&self) -> BTreeSet<&str> {
        self.entries.iter().filter_map(|e| e.sentence_id.as_deref()).collect()
    }
}

pub fn clip_id_for(corpus: &CorpusId, rel: &str) -> String {
    let stem = strip_wav(rel).unwrap_or(rel);
    format!("{corpus}:{stem}")
}

fn collect_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_wavs(&path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(path);
        }
    }
    Ok(())
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Builds a manifest from every .wav under `root`. Any failure aborts the
/// scan with a report listing all failing files.
pub fn scan_corpus(root: &Path, corpus: &CorpusId) -> Result<CorpusManifest> {
    if !root.is_dir() {
        return Err(Error::NotFound(root.to_path_buf()));
    }
    let mut files = Vec::new();
    collect_wavs(root, &mut files)?;
    let mut entries = Vec::with_capacity(files.len());
    let mut failures = Vec::new();
    for path in files {
        let rel = relative(root, &path);
        let meta = parse_filename(corpus, &rel).and_then(|p| {
            let valence = to_valence(corpus, &p.emotion)?;
            let info = read_wav_info(&path)?;
            Ok(ClipMeta {
                clip_id: clip_id_for(corpus, &rel),
                path: path.display().to_string(),
                corpus: corpus.clone(),
                speaker_id: p.speaker_id,
                sentence_id: p.sentence_id,
                emotion: p.emotion,
                valence,
                duration_s: info.duration_s(),
            })
        });
        match meta {
            Ok(m) => entries.push(m),
            Err(e) => failures.push(format!("{rel}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Scan {
            count: failures.len(),
            report: failures.join("\n"),
        });
    }
    CorpusManifest::new(corpus.clone(), entries)
}

/// Clip-length histogram over one-second buckets `[n, n+1)`.
///
/// Mean and standard deviation are computed over the bucket lower edges
/// (population std), which is how clip-length tables for these corpora report
/// them; `raw_mean` / `raw_std` use the exact durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub buckets: BTreeMap<u32, usize>,
    pub mean: f64,
    pub std: f64,
    pub raw_mean: f64,
    pub raw_std: f64,
}

impl DurationStats {
    pub fn total(&self) -> usize {
        self.buckets.values().sum()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn corpus_stats(manifest: &CorpusManifest) -> DurationStats {
    let mut buckets = BTreeMap::new();
    let mut lower = Vec::with_capacity(manifest.len());
    let mut raw = Vec::with_capacity(manifest.len());
    for e in &manifest.entries {
        let b = e.duration_s.max(0.0).floor();
        *buckets.entry(b as u32).or_insert(0) += 1;
        lower.push(b);
        raw.push(e.duration_s);
    }
    let (mean, std) = mean_std(&lower);
    let (raw_mean, raw_std) = mean_std(&raw);
    DurationStats {
        buckets,
        mean,
        std,
        raw_mean,
        raw_std,
    }
}

// --- manifest CSV -------------------------------------------------------

pub const MANIFEST_HEADER: [&str; 8] = [
    "clip_id",
    "path",
    "corpus",
    "speaker_id",
    "sentence_id",
    "emotion",
    "valence",
    "duration_s",
];

pub fn write_manifest_csv<W: std::io::Write>(manifest: &CorpusManifest, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(MANIFEST_HEADER)?;
    for e in &manifest.entries {
        w.write_record([
            e.clip_id.as_str(),
            e.path.as_str(),
            &e.corpus.to_string(),
            e.speaker_id.as_str(),
            e.sentence_id.as_deref().unwrap_or(""),
            e.emotion.as_str(),
            &e.valence.to_string(),
            &e.duration_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_manifest_csv(manifest, std::io::BufWriter::new(file))
}

/// Reads a manifest CSV. Valence labels are re-derived from the emotion and
/// must agree with the stored column. This is also the adapter for corpora
/// whose on-disk layout the filename parsers do not cover.
pub fn read_manifest_csv<R: std::io::Read>(input: R) -> Result<CorpusManifest> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::Config(format!(
            "manifest header must be {}",
            MANIFEST_HEADER.join(",")
        )));
    }
    let mut entries = Vec::new();
    let mut corpus: Option<CorpusId> = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let row = line + 2;
        let c: CorpusId = field(2).parse()?;
        if let Some(prev) = &corpus {
            if *prev != c {
                return Err(Error::Config(format!("row {row}: mixed corpora {prev} and {c}")));
            }
        } else {
            corpus = Some(c.clone());
        }
        let emotion = field(5).to_string();
        let valence = to_valence(&c, &emotion)?;
        let stated: Valence = field(6).parse()?;
        if stated != valence {
            return Err(Error::Config(format!(
                "row {row}: valence {stated} disagrees with mapping of {emotion:?} ({valence})"
            )));
        }
        let duration_s: f64 = field(7)
            .parse()
            .map_err(|_| Error::Config(format!("row {row}: bad duration {:?}", field(7))))?;
        let sentence = field(4);
        entries.push(ClipMeta {
            clip_id: field(0).to_string(),
            path: field(1).to_string(),
            corpus: c,
            speaker_id: field(3).to_string(),
            sentence_id: (!sentence.is_empty()).then(|| sentence.to_string()),
            emotion,
            valence,
            duration_s,
        });
    }
    let corpus = corpus.unwrap_or(CorpusId::Synth("empty".into()));
    CorpusManifest::new(corpus, entries)
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let file = std::fs::File::open(path)?;
    read_manifest_csv(std::io::BufReader::new(file))
}

/// Clip metadata keyed by clip id, over any number of manifests.
#[derive(Debug, Clone, Default)]
pub struct ClipIndex {
    clips: BTreeMap<String, ClipMeta>,
}

impl ClipIndex {
    pub fn new<'a, I: IntoIterator<Item = &'a CorpusManifest>>(manifests: I) -> Self {
        let clips = manifests
            .into_iter()
            .flat_map(|m| m.entries.iter())
            .map(|e| (e.clip_id.clone(), e.clone()))
            .collect();
        ClipIndex { clips }
    }

    pub fn get(&self, clip_id: &str) -> Option<&ClipMeta> {
        self.clips.get(clip_id)
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}
