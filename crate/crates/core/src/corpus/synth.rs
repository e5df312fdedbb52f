//! Synthetic pseudo-language corpora for desk-scale verification.
//!
//! Each pseudo-language has its own harmonic timbre and pitch range. Valence
//! is carried by cues shared across languages: amplitude-modulation rate and
//! spectral tilt differ between the positive and negative emotions.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{clip_id_for, to_valence, ClipMeta, CorpusId, CorpusManifest};
use crate::audio_io::{encode_wav, Clip};
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageVoice {
    pub name: String,
    /// Speaker fundamental frequencies are drawn uniformly from this range.
    pub f0_range_hz: [f64; 2],
    /// Relative amplitudes of harmonics 1, 2, 3, ...
    pub harmonics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionVoice {
    /// Must be one of the synthetic label set (neutral, happy, angry, sad).
    pub label: String,
    pub am_rate_hz: f64,
    pub am_depth: f64,
    /// Harmonic `h` is scaled by `h^tilt`.
    pub tilt: f64,
    pub fm_rate_hz: f64,
    pub fm_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub sample_rate: u32,
    pub speakers: usize,
    pub clips_per_speaker: usize,
    /// Number of distinct sentence ids; 0 writes clips without sentence ids.
    pub sentences: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub noise_level: f64,
    pub languages: Vec<LanguageVoice>,
    pub emotions: Vec<EmotionVoice>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let lang = |name: &str, f0: [f64; 2], harmonics: &[f64]| LanguageVoice {
            name: name.into(),
            f0_range_hz: f0,
            harmonics: harmonics.to_vec(),
        };
        let emo = |label: &str, am: f64, tilt: f64, fm_rate: f64, fm_depth: f64| EmotionVoice {
            label: label.into(),
            am_rate_hz: am,
            am_depth: 0.8,
            tilt,
            fm_rate_hz: fm_rate,
            fm_depth,
        };
        SynthSpec {
            sample_rate: 16_000,
            speakers: 10,
            clips_per_speaker: 20,
            sentences: 5,
            min_duration_s: 2.0,
            max_duration_s: 5.0,
            noise_level: 0.005,
            languages: vec![
                lang("ased", [110.0, 220.0], &[1.0, 0.5, 0.8, 0.3, 0.6, 0.2, 0.4, 0.15, 0.3, 0.1]),
                lang("emodb", [90.0, 190.0], &[1.0, 0.9, 0.4, 0.7, 0.2, 0.5, 0.1, 0.3, 0.1, 0.2]),
                lang("ravdess", [130.0, 260.0], &[0.7, 1.0, 0.6, 0.5, 0.5, 0.3, 0.3, 0.2, 0.2, 0.1]),
                lang("urdu", [80.0, 170.0], &[1.0, 0.3, 0.3, 0.8, 0.6, 0.2, 0.2, 0.4, 0.3, 0.1]),
            ],
            emotions: vec![
                emo("neutral", 2.0, -1.2, 0.0, 0.0),
                emo("happy", 2.0, -1.0, 4.0, 0.03),
                emo("angry", 8.0, -0.2, 0.0, 0.0),
                emo("sad", 8.0, -0.4, 1.5, 0.02),
            ],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: String| Err(Error::Config(format!("synth spec field `{field}`: {why}")));
        if self.sample_rate < 8000 {
            return fail("sample_rate", format!("{} Hz is below 8000", self.sample_rate));
        }
        if self.speakers == 0 {
            return fail("speakers", "must be positive".into());
        }
        if self.clips_per_speaker == 0 {
            return fail("clips_per_speaker", "must be positive".into());
        }
        if !(self.min_duration_s > 0.0 && self.min_duration_s <= self.max_duration_s) {
            return fail("min_duration_s", "need 0 < min_duration_s <= max_duration_s".into());
        }
        if !(0.0..1.0).contains(&self.noise_level) {
            return fail("noise_level", "must lie in [0, 1)".into());
        }
        if self.languages.is_empty() {
            return fail("languages", "at least one language required".into());
        }
        for l in &self.languages {
            if l.name.is_empty() || !l.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return fail("languages.name", format!("{:?} must be non-empty alphanumeric", l.name));
            }
            if !(l.f0_range_hz[0] > 0.0 && l.f0_range_hz[0] <= l.f0_range_hz[1]) {
                return fail("languages.f0_range_hz", format!("invalid range for {}", l.name));
            }
            if l.harmonics.is_empty() || l.harmonics.iter().any(|a| !(*a >= 0.0)) {
                return fail("languages.harmonics", format!("need non-negative amplitudes for {}", l.name));
            }
        }
        if self.emotions.is_empty() {
            return fail("emotions", "at least one emotion required".into());
        }
        for e in &self.emotions {
            if let Err(err) = to_valence(&CorpusId::synth("x"), &e.label) {
                return fail("emotions.label", err.to_string());
            }
            if !(0.0..=1.0).contains(&e.am_depth) || !(0.0..0.5).contains(&e.fm_depth) {
                return fail("emotions.am_depth", format!("depths out of range for {}", e.label));
            }
        }
        Ok(())
    }

    /// Emotion order used when assigning clips: positive and negative labels
    /// alternate so every speaker's clips are as valence-balanced as possible.
    pub fn emotion_cycle(&self) -> Vec<&EmotionVoice> {
        let corpus = CorpusId::synth("x");
        let (pos, neg): (Vec<_>, Vec<_>) = self
            .emotions
            .iter()
            .partition(|e| to_valence(&corpus, &e.label).ok() == Some(super::Valence::Positive));
        let mut out = Vec::with_capacity(self.emotions.len());
        for i in 0..pos.len().max(neg.len()) {
            out.extend(pos.get(i).copied());
            out.extend(neg.get(i).copied());
        }
        out
    }

    pub fn clips_per_language(&self) -> usize {
        self.speakers * self.clips_per_speaker
    }
}

/// A written synthetic corpus tree.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub root: PathBuf,
    pub manifests: Vec<CorpusManifest>,
}

struct Speaker {
    f0: f64,
    gain: f64,
}

fn render(
    spec: &SynthSpec,
    lang: &LanguageVoice,
    emotion: &EmotionVoice,
    speaker: &Speaker,
    rng: &mut ChaCha8Rng,
) -> Vec<f32> {
    let sr = spec.sample_rate as f64;
    let duration = rng.gen_range(spec.min_duration_s..=spec.max_duration_s);
    let n = (duration * sr).round() as usize;
    let f0 = speaker.f0 * rng.gen_range(0.95..1.05);
    let am_phase = rng.gen_range(0.0..2.0 * PI);
    let fm_phase = rng.gen_range(0.0..2.0 * PI);
    let amps: Vec<f64> = lang
        .harmonics
        .iter()
        .enumerate()
        .map(|(i, a)| a * ((i + 1) as f64).powf(emotion.tilt))
        .collect();
    let norm: f64 = amps.iter().sum::<f64>().max(1e-9);
    let nyquist_guard = 0.45 * sr;
    let ramp = (0.03 * sr) as usize;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let inst_f0 = f0 * (1.0 + emotion.fm_depth * (2.0 * PI * emotion.fm_rate_hz * t + fm_phase).sin());
        phase += 2.0 * PI * inst_f0 / sr;
        let mut v = 0.0;
        for (h, a) in amps.iter().enumerate() {
            let k = (h + 1) as f64;
            if k * inst_f0 < nyquist_guard {
                v += a * (k * phase).sin();
            }
        }
        let am = 1.0 - emotion.am_depth * (0.5 - 0.5 * (2.0 * PI * emotion.am_rate_hz * t + am_phase).cos());
        let edge = (i.min(n - 1 - i) as f64 / ramp as f64).min(1.0);
        let noise = spec.noise_level * rng.gen_range(-1.0..1.0);
        out.push((speaker.gain * edge * am * v / norm + noise) as f32);
    }
    out
}

/// Writes `<out>/<language>/<emotion>/<speaker>_<sentence>_<n>.wav` plus a
/// `manifest.csv` per language. Output depends only on `spec` and `seed`.
pub fn synth_corpus(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<SynthCorpus> {
    spec.validate()?;
    let cycle = spec.emotion_cycle();
    let mut manifests = Vec::with_capacity(spec.languages.len());
    for (li, lang) in spec.languages.iter().enumerate() {
        let corpus = CorpusId::synth(lang.name.clone());
        let lang_dir = out_dir.join(&lang.name);
        let mut entries = Vec::with_capacity(spec.clips_per_language());
        for s in 0..spec.speakers {
            let mut srng = ChaCha8Rng::seed_from_u64(mix(&[seed, li as u64, s as u64]));
            let speaker = Speaker {
                f0: srng.gen_range(lang.f0_range_hz[0]..=lang.f0_range_hz[1]),
                gain: srng.gen_range(0.4..0.8),
            };
            let speaker_id = format!("spk{s:02}");
            for c in 0..spec.clips_per_speaker {
                let emotion = cycle[c % cycle.len()];
                let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, li as u64, s as u64, c as u64, 1]));
                let samples = render(spec, lang, emotion, &speaker, &mut rng);
                let sentence_id =
                    (spec.sentences > 0).then(|| format!("s{}", (c / cycle.len()) % spec.sentences));
                let file = match &sentence_id {
                    Some(sid) => format!("{speaker_id}_{sid}_{c:03}.wav"),
                    None => format!("{speaker_id}_{c:03}.wav"),
                };
                let rel = format!("{}/{file}", emotion.label);
                let dir = lang_dir.join(&emotion.label);
                std::fs::create_dir_all(&dir)?;
                let path = dir.join(&file);
                let frames = samples.len();
                std::fs::write(&path, encode_wav(&Clip::mono(spec.sample_rate, samples)))?;
                entries.push(ClipMeta {
                    clip_id: clip_id_for(&corpus, &rel),
                    path: path.display().to_string(),
                    corpus: corpus.clone(),
                    speaker_id: speaker_id.clone(),
                    sentence_id,
                    emotion: emotion.label.clone(),
                    valence: to_valence(&corpus, &emotion.label)?,
                    duration_s: frames as f64 / spec.sample_rate as f64,
                });
            }
        }
        let manifest = CorpusManifest::new(corpus, entries)?;
        super::save_manifest(&manifest, &lang_dir.join("manifest.csv"))?;
        manifests.push(manifest);
    }
    Ok(SynthCorpus {
        root: out_dir.to_path_buf(),
        manifests,
    })
}
