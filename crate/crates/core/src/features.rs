//! MFCC extraction matching librosa 0.7.2 defaults, plus standardization and
//! the on-disk feature cache.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio_io::Clip;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    /// Linear below 1 kHz, logarithmic above (librosa's default).
    Slaney,
    /// 2595 * log10(1 + f / 700).
    Htk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
    /// Dynamic range clamp below the per-clip maximum, in dB.
    pub top_db: Option<f64>,
    pub mel_scale: MelScale,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate: 16_000,
            n_fft: 2048,
            hop: 512,
            n_mels: 128,
            n_mfcc: 20,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-10,
            top_db: Some(80.0),
            mel_scale: MelScale::Slaney,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sample_rate == 0 || self.n_fft == 0 || self.hop == 0 || self.n_mels == 0 || self.n_mfcc == 0 {
            return fail("sample_rate, n_fft, hop, n_mels and n_mfcc must be positive".into());
        }
        if self.n_mfcc > self.n_mels {
            return fail(format!("n_mfcc ({}) exceeds n_mels ({})", self.n_mfcc, self.n_mels));
        }
        if self.hop > self.n_fft {
            return fail(format!("hop ({}) exceeds n_fft ({})", self.hop, self.n_fft));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return fail(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin={} fmax={}",
                self.fmin, self.fmax
            ));
        }
        if !(self.log_floor > 0.0) {
            return fail(format!("log_floor must be positive, got {}", self.log_floor));
        }
        if let Some(t) = self.top_db {
            if !(t > 0.0) {
                return fail(format!("top_db must be positive, got {t}"));
            }
        }
        Ok(())
    }

    /// 32 hex characters identifying every field of the config.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..16])
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count under centered framing.
    pub fn n_frames(&self, n_samples: usize) -> usize {
        1 + n_samples / self.hop
    }
}

pub fn hz_to_mel(hz: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
        MelScale::Slaney => {
            let f_sp = 200.0 / 3.0;
            let min_log_hz = 1000.0;
            let min_log_mel = min_log_hz / f_sp;
            let logstep = 6.4f64.ln() / 27.0;
            if hz >= min_log_hz {
                min_log_mel + (hz / min_log_hz).ln() / logstep
            } else {
                hz / f_sp
            }
        }
    }
}

pub fn mel_to_hz(mel: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
        MelScale::Slaney => {
            let f_sp = 200.0 / 3.0;
            let min_log_hz = 1000.0;
            let min_log_mel = min_log_hz / f_sp;
            let logstep = 6.4f64.ln() / 27.0;
            if mel >= min_log_mel {
                min_log_hz * (logstep * (mel - min_log_mel)).exp()
            } else {
                f_sp * mel
            }
        }
    }
}

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }
}

/// Band edges in Hz of the `n_mels + 2` mel points.
pub fn mel_points(config: &MfccConfig) -> Vec<f64> {
    let n = config.n_mels + 2;
    let lo = hz_to_mel(config.fmin, config.mel_scale);
    let hi = hz_to_mel(config.fmax, config.mel_scale);
    (0..n)
        .map(|i| {
            let m = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            mel_to_hz(m, config.mel_scale)
        })
        .collect()
}

/// Triangular, area-normalized mel filterbank of shape `n_mels x (n_fft/2 + 1)`.
pub fn mel_filterbank<T: Scalar>(config: &MfccConfig) -> Result<Matrix<T>> {
    config.validate()?;
    let n_bins = config.n_bins();
    let mel_f = mel_points(config);
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * config.sample_rate as f64 / config.n_fft as f64)
        .collect();
    let mut fb = Matrix::zeros(config.n_mels, n_bins);
    for m in 0..config.n_mels {
        let (left, center, right) = (mel_f[m], mel_f[m + 1], mel_f[m + 2]);
        let enorm = 2.0 / (right - left);
        for (k, &f) in bin_hz.iter().enumerate() {
            let lower = (f - left) / (center - left);
            let upper = (right - f) / (right - center);
            let w = lower.min(upper).max(0.0);
            fb.data[m * n_bins + k] = T::lit(w * enorm);
        }
    }
    Ok(fb)
}

/// Periodic Hann window.
pub fn hann_window<T: Scalar>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Reusable extractor: filterbank, window, FFT plan and DCT basis are built once.
pub struct MfccExtractor<T: Scalar> {
    config: MfccConfig,
    filterbank: Matrix<T>,
    window: Vec<T>,
    dct: Matrix<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for MfccExtractor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor").field("config", &self.config).finish()
    }
}

impl<T: Scalar> MfccExtractor<T> {
    pub fn new(config: &MfccConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = mel_filterbank(config)?;
        let fft = FftPlanner::new().plan_fft_forward(config.n_fft);
        Ok(MfccExtractor {
            config: config.clone(),
            filterbank,
            window: hann_window(config.n_fft),
            dct: dct_ortho_basis(config.n_mfcc, config.n_mels),
            fft,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &Matrix<T> {
        &self.filterbank
    }

    /// Centered, reflect-padded frames of the signal.
    fn padded(&self, samples: &[T]) -> Result<Vec<T>> {
        let pad = self.config.n_fft / 2;
        if samples.len() <= pad {
            return Err(Error::Config(format!(
                "signal of {} samples is too short for reflect padding by {pad}",
                samples.len()
            )));
        }
        let n = samples.len();
        let mut out = Vec::with_capacity(n + 2 * pad);
        out.extend((1..=pad).rev().map(|i| samples[i]));
        out.extend_from_slice(samples);
        out.extend((0..pad).map(|i| samples[n - 2 - i]));
        Ok(out)
    }

    /// |STFT|^2, shape `(n_fft/2 + 1) x n_frames`.
    pub fn power_spectrogram(&self, samples: &[T]) -> Result<Matrix<T>> {
        let padded = self.padded(samples)?;
        let n_fft = self.config.n_fft;
        let n_bins = self.config.n_bins();
        let n_frames = 1 + (padded.len() - n_fft) / self.config.hop;
        let mut spec = Matrix::zeros(n_bins, n_frames);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.fft.get_inplace_scratch_len()];
        for t in 0..n_frames {
            let frame = &padded[t * self.config.hop..t * self.config.hop + n_fft];
            for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex::new(x * w, T::zero());
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..n_bins {
                spec.data[k * n_frames + t] = buf[k].norm_sqr();
            }
        }
        Ok(spec)
    }

    /// Mel power spectrogram in dB with floor and top_db clamp, `n_mels x n_frames`.
    pub fn log_mel(&self, samples: &[T]) -> Result<Matrix<T>> {
        let power = self.power_spectrogram(samples)?;
        let mut mel = Matrix::zeros(self.config.n_mels, power.cols);
        T::gemm(
            false,
            false,
            self.config.n_mels,
            power.cols,
            power.rows,
            T::one(),
            &self.filterbank.data,
            &power.data,
            T::zero(),
            &mut mel.data,
        );
        let floor = T::lit(self.config.log_floor);
        let ten = T::lit(10.0);
        for v in mel.data.iter_mut() {
            *v = ten * v.max(floor).log10();
        }
        if let Some(top_db) = self.config.top_db {
            let peak = mel.data.iter().copied().fold(T::neg_infinity(), T::max);
            let lowest = peak - T::lit(top_db);
            for v in mel.data.iter_mut() {
                *v = v.max(lowest);
            }
        }
        Ok(mel)
    }

    /// MFCC matrix, `n_mfcc x n_frames`.
    pub fn extract(&self, samples: &[T]) -> Result<Matrix<T>> {
        let log_mel = self.log_mel(samples)?;
        let mut out = Matrix::zeros(self.config.n_mfcc, log_mel.cols);
        T::gemm(
            false,
            false,
            self.config.n_mfcc,
            log_mel.cols,
            self.config.n_mels,
            T::one(),
            &self.dct.data,
            &log_mel.data,
            T::zero(),
            &mut out.data,
        );
        Ok(out)
    }
}

/// First `n_out` rows of the orthonormal DCT-II matrix of size `n`.
pub fn dct_ortho_basis<T: Scalar>(n_out: usize, n: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(n_out, n);
    for k in 0..n_out {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            let angle = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64;
            m.data[k * n + i] = T::lit(scale * angle.cos());
        }
    }
    m
}

/// MFCC features of one clip, stored in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub clip_id: String,
    pub n_mfcc: usize,
    pub n_frames: usize,
    /// Row-major, coefficient-major.
    pub values: Vec<f32>,
    pub config_fingerprint: String,
}

impl FeatureMatrix {
    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.n_frames..(r + 1) * self.n_frames]
    }
}

/// Extracts MFCCs from a mono clip at the configured sample rate.
pub fn mfcc(clip: &Clip, config: &MfccConfig) -> Result<FeatureMatrix> {
    let extractor = MfccExtractor::<f64>::new(config)?;
    mfcc_with(&extractor, clip)
}

pub fn mfcc_with(extractor: &MfccExtractor<f64>, clip: &Clip) -> Result<FeatureMatrix> {
    let config = extractor.config();
    if clip.channels != 1 {
        return Err(Error::Config(format!("mfcc expects mono audio, got {} channels", clip.channels)));
    }
    if clip.sample_rate != config.sample_rate {
        return Err(Error::Config(format!(
            "clip rate {} Hz does not match config rate {} Hz",
            clip.sample_rate, config.sample_rate
        )));
    }
    let samples: Vec<f64> = clip.samples.iter().map(|&s| s as f64).collect();
    let m = extractor.extract(&samples)?;
    Ok(FeatureMatrix {
        clip_id: clip.source.clone(),
        n_mfcc: m.rows,
        n_frames: m.cols,
        values: m.data.iter().map(|&v| v as f32).collect(),
        config_fingerprint: config.fingerprint(),
    })
}

/// Per-coefficient mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub const STD_FLOOR: f64 = 1e-8;

    /// Pools every frame of every matrix. All matrices must share `n_mfcc`.
    pub fn from_matrices<'a, I>(matrices: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureMatrix>,
    {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        let mut rows: Option<usize> = None;
        let matrices: Vec<&FeatureMatrix> = matrices.into_iter().collect();
        for m in &matrices {
            match rows {
                None => {
                    rows = Some(m.n_mfcc);
                    sum = vec![0.0; m.n_mfcc];
                }
                Some(r) if r != m.n_mfcc => {
                    return Err(Error::dim(
                        "feature stats",
                        format!("{} has {} coefficients, expected {r}", m.clip_id, m.n_mfcc),
                    ))
                }
                _ => {}
            }
            for (r, s) in sum.iter_mut().enumerate() {
                *s += m.row(r).iter().map(|&v| v as f64).sum::<f64>();
            }
            count += m.n_frames;
        }
        if count == 0 {
            return Err(Error::Protocol("feature stats need at least one frame".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        sq.resize(mean.len(), 0.0);
        for m in &matrices {
            for (r, acc) in sq.iter_mut().enumerate() {
                *acc += m.row(r).iter().map(|&v| (v as f64 - mean[r]).powi(2)).sum::<f64>();
            }
        }
        let std = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
        Ok(FeatureStats { mean, std })
    }
}

pub fn standardize(features: &FeatureMatrix, stats: &FeatureStats) -> Result<FeatureMatrix> {
    if stats.mean.len() != features.n_mfcc || stats.std.len() != features.n_mfcc {
        return Err(Error::dim(
            "standardize",
            format!(
                "stats cover {} coefficients, features have {}",
                stats.mean.len(),
                features.n_mfcc
            ),
        ));
    }
    let mut out = features.clone();
    for r in 0..features.n_mfcc {
        let mean = stats.mean[r];
        let scale = 1.0 / stats.std[r].max(FeatureStats::STD_FLOOR);
        for v in &mut out.values[r * features.n_frames..(r + 1) * features.n_frames] {
            *v = ((*v as f64 - mean) * scale) as f32;
        }
    }
    Ok(out)
}

// --- feature cache ------------------------------------------------------

pub const CACHE_MAGIC: &[u8; 4] = b"SERF";
pub const CACHE_VERSION: u32 = 1;

pub fn encode_feature_file(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * m.values.len() + 32);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.n_mfcc as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_frames as u32).to_le_bytes());
    for v in &m.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(m.config_fingerprint.as_bytes());
    out
}

pub fn decode_feature_file(bytes: &[u8], clip_id: &str) -> std::result::Result<FeatureMatrix, String> {
    if bytes.len() < 16 || &bytes[0..4] != CACHE_MAGIC {
        return Err("missing SERF magic".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let version = u32_at(4);
    if version != CACHE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n_mfcc = u32_at(8) as usize;
    let n_frames = u32_at(12) as usize;
    let n = n_mfcc * n_frames;
    if bytes.len() != 16 + 4 * n + 32 {
        return Err(format!("expected {} bytes, found {}", 16 + 4 * n + 32, bytes.len()));
    }
    let values = bytes[16..16 + 4 * n]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let fp = std::str::from_utf8(&bytes[16 + 4 * n..])
        .map_err(|_| "fingerprint is not ASCII".to_string())?;
    if !fp.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err("fingerprint is not hex".into());
    }
    Ok(FeatureMatrix {
        clip_id: clip_id.to_string(),
        n_mfcc,
        n_frames,
        values,
        config_fingerprint: fp.to_string(),
    })
}

/// Directory of SERF files, one subdirectory per config fingerprint.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    root: PathBuf,
}

impl FeatureCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FeatureCache { root: root.into() }
    }

    pub fn path_for(&self, fingerprint: &str, clip_id: &str) -> PathBuf {
        self.root.join(fingerprint).join(cache_file_name(clip_id))
    }

    pub fn load(&self, fingerprint: &str, clip_id: &str) -> Result<Option<FeatureMatrix>> {
        let path = self.path_for(fingerprint, clip_id);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&path)?;
        let m = decode_feature_file(&bytes, clip_id).map_err(|detail| Error::Format {
            path: path.clone(),
            detail,
        })?;
        Ok((m.config_fingerprint == fingerprint).then_some(m))
    }

    pub fn store(&self, m: &FeatureMatrix) -> Result<()> {
        let path = self.path_for(&m.config_fingerprint, &m.clip_id);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, encode_feature_file(m))?;
        Ok(())
    }
}

fn cache_file_name(clip_id: &str) -> String {
    let safe: String = clip_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    let digest = Sha256::digest(clip_id.as_bytes());
    format!("{safe}-{}.serf", hex::encode(&digest[..4]))
}

/// In-memory feature table keyed by clip id.
///
/// Reads go through [`FeatureStore::get`], which can record every clip id
/// touched so callers can audit which partitions a computation saw.
#[derive(Debug, Default)]
pub struct FeatureStore {
    features: BTreeMap<String, FeatureMatrix>,
    access_log: Option<Mutex<Vec<String>>>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_access_log(mut self) -> Self {
        self.access_log = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn insert(&mut self, m: FeatureMatrix) {
        self.features.insert(m.clip_id.clone(), m);
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn contains(&self, clip_id: &str) -> bool {
        self.features.contains_key(clip_id)
    }

    pub fn get(&self, clip_id: &str) -> Option<&FeatureMatrix> {
        if let Some(log) = &self.access_log {
            log.lock().expect("access log poisoned").push(clip_id.to_string());
        }
        self.features.get(clip_id)
    }

    /// Common `(n_mfcc, n_frames)` of all stored matrices and their config
    /// fingerprint, or `None` when empty. Does not touch the access log.
    pub fn layout(&self) -> Result<Option<(usize, usize, String)>> {
        let mut it = self.features.values();
        let Some(first) = it.next() else {
            return Ok(None);
        };
        for m in it {
            if (m.n_mfcc, m.n_frames) != (first.n_mfcc, first.n_frames) || m.config_fingerprint != first.config_fingerprint {
                return Err(Error::dim(
                    format!("features of {}", m.clip_id),
                    format!(
                        "({}, {}) with config {} differs from ({}, {}) with config {}",
                        m.n_mfcc, m.n_frames, m.config_fingerprint, first.n_mfcc, first.n_frames, first.config_fingerprint
                    ),
                ));
            }
        }
        Ok(Some((first.n_mfcc, first.n_frames, first.config_fingerprint.clone())))
    }

    /// Clip ids read so far (empty unless the log was enabled).
    pub fn accessed(&self) -> Vec<String> {
        self.access_log
            .as_ref()
            .map(|l| l.lock().expect("access log poisoned").clone())
            .unwrap_or_default()
    }

    pub fn clear_access_log(&self) {
        if let Some(log) = &self.access_log {
            log.lock().expect("access log poisoned").clear();
        }
    }

    /// Errors with every clip id lacking features.
    pub fn require<'a, I: IntoIterator<Item = &'a String>>(&self, ids: I) -> Result<()> {
        let missing: Vec<String> = ids
            .into_iter()
            .filter(|id| !self.features.contains_key(id.as_str()))
            .cloned()
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::CacheMiss(missing))
        }
    }
}

/// Loads cached features for `path` or computes and stores them.
/// Returns the matrix and whether it was computed.
pub fn cached_mfcc(
    cache: &FeatureCache,
    extractor: &MfccExtractor<f64>,
    clip_id: &str,
    path: &Path,
) -> Result<(FeatureMatrix, bool)> {
    let fp = extractor.config().fingerprint();
    if let Some(m) = cache.load(&fp, clip_id)? {
        return Ok((m, false));
    }
    let clip = crate::audio_io::preprocess(crate::audio_io::read_wav(path)?)?;
    let mut m = mfcc_with(extractor, &clip)?;
    m.clip_id = clip_id.to_string();
    cache.store(&m)?;
    Ok((m, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f32>>) -> FeatureMatrix {
        let n_frames = rows[0].len();
        FeatureMatrix {
            clip_id: "x".into(),
            n_mfcc: rows.len(),
            n_frames,
            values: rows.concat(),
            config_fingerprint: MfccConfig::default().fingerprint(),
        }
    }

    #[test]
    fn default_config_is_valid_and_fingerprint_is_32_hex() {
        let c = MfccConfig::default();
        c.validate().unwrap();
        let fp = c.fingerprint();
        assert_eq!(fp.len(), 32);
        let mut other = c.clone();
        other.hop = 256;
        assert_ne!(other.fingerprint(), fp);
    }

    #[test]
    fn config_invariants_are_checked() {
        let bad = [
            MfccConfig { n_mfcc: 200, ..Default::default() },
            MfccConfig { hop: 4096, ..Default::default() },
            MfccConfig { fmax: 9000.0, ..Default::default() },
            MfccConfig { fmin: 8000.0, ..Default::default() },
            MfccConfig { log_floor: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn mel_scales_round_trip() {
        for scale in [MelScale::Slaney, MelScale::Htk] {
            for hz in [0.0, 60.0, 440.0, 999.0, 1000.0, 4321.0, 8000.0] {
                let back = mel_to_hz(hz_to_mel(hz, scale), scale);
                assert!((back - hz).abs() < 1e-9, "{scale:?} {hz}");
            }
        }
        // librosa.hz_to_mel(440.0) == 6.6
        assert!((hz_to_mel(440.0, MelScale::Slaney) - 6.6).abs() < 1e-12);
    }

    #[test]
    fn filterbank_rows_positive_and_centers_increasing() {
        let c = MfccConfig::default();
        let fb = mel_filterbank::<f64>(&c).unwrap();
        assert_eq!((fb.rows, fb.cols), (128, 1025));
        for r in 0..fb.rows {
            assert!(fb.row(r).iter().sum::<f64>() > 0.0, "row {r}");
        }
        let pts = mel_points(&c);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(pts[pts.len() - 2] <= c.fmax);
    }

    #[test]
    fn frame_count_for_five_seconds() {
        let c = MfccConfig::default();
        assert_eq!(c.n_frames(80_000), 157);
        let ex = MfccExtractor::<f64>::new(&c).unwrap();
        let m = ex.extract(&vec![0.0; 80_000]).unwrap();
        assert_eq!((m.rows, m.cols), (20, 157));
    }

    #[test]
    fn silence_gives_identical_columns() {
        let clip = Clip::mono(16000, vec![0.0; 80_000]);
        let m = mfcc(&clip, &MfccConfig::default()).unwrap();
        for r in 0..m.n_mfcc {
            let row = m.row(r);
            assert!(row.iter().all(|&v| v == row[0]));
        }
    }

    #[test]
    fn parseval_per_frame() {
        let c = MfccConfig::default();
        let ex = MfccExtractor::<f64>::new(&c).unwrap();
        let x: Vec<f64> = (0..8000).map(|i| ((i * 7919 % 1000) as f64 / 500.0 - 1.0) * 0.3).collect();
        let spec = ex.power_spectrogram(&x).unwrap();
        let padded = ex.padded(&x).unwrap();
        let win = hann_window::<f64>(c.n_fft);
        for t in [0, 3, spec.cols - 1] {
            let frame = &padded[t * c.hop..t * c.hop + c.n_fft];
            let time: f64 = frame.iter().zip(&win).map(|(a, w)| (a * w).powi(2)).sum();
            // one-sided spectrum: double every bin except DC and Nyquist
            let mut freq = 0.0;
            for k in 0..spec.rows {
                let p = spec.get(k, t);
                freq += if k == 0 || k == spec.rows - 1 { p } else { 2.0 * p };
            }
            freq /= c.n_fft as f64;
            assert!((freq - time).abs() <= 1e-6 * time, "frame {t}: {freq} vs {time}");
        }
    }

    #[test]
    fn doubling_amplitude_shifts_only_c0() {
        let c = MfccConfig::default();
        let ex = MfccExtractor::<f64>::new(&c).unwrap();
        let x: Vec<f64> = (0..80_000)
            .map(|i| {
                let t = i as f64 / 16000.0;
                0.2 * (2.0 * std::f64::consts::PI * 300.0 * t).sin()
                    + 0.1 * (2.0 * std::f64::consts::PI * 1700.0 * t).sin()
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = ex.extract(&x).unwrap();
        let b = ex.extract(&y).unwrap();
        for t in 0..a.cols {
            assert!(b.get(0, t) > a.get(0, t));
            for k in 1..a.rows {
                assert!((a.get(k, t) - b.get(k, t)).abs() < 1e-6, "coef {k} frame {t}");
            }
        }
    }

    #[test]
    fn mfcc_is_deterministic() {
        let samples: Vec<f32> = (0..80_000).map(|i| ((i as f32) * 0.013).sin() * 0.4).collect();
        let clip = Clip::mono(16000, samples);
        let c = MfccConfig::default();
        assert_eq!(mfcc(&clip, &c).unwrap(), mfcc(&clip, &c).unwrap());
    }

    #[test]
    fn mfcc_rejects_mismatched_rate() {
        let clip = Clip::mono(8000, vec![0.0; 40_000]);
        assert!(matches!(mfcc(&clip, &MfccConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn standardize_with_own_stats() {
        let m = matrix(vec![vec![1.0, 2.0, 3.0, 6.0], vec![5.0, 5.0, 5.0, 5.0]]);
        let stats = FeatureStats::from_matrices([&m]).unwrap();
        let s = standardize(&m, &stats).unwrap();
        let row = s.row(0);
        let mean: f64 = row.iter().map(|&v| v as f64).sum::<f64>() / 4.0;
        let var: f64 = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-6);
        assert!((var.sqrt() - 1.0).abs() < 1e-6);
        assert!(s.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_shape_mismatch() {
        let m = matrix(vec![vec![1.0, 2.0]]);
        let stats = FeatureStats { mean: vec![0.0; 3], std: vec![1.0; 3] };
        assert!(matches!(standardize(&m, &stats), Err(Error::Dimension { .. })));
    }

    #[test]
    fn feature_file_round_trip_and_layout() {
        let m = matrix(vec![vec![1.5, -2.0], vec![0.25, 8.0]]);
        let bytes = encode_feature_file(&m);
        assert_eq!(&bytes[..4], b"SERF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 16 + 16 + 32);
        assert_eq!(f32::from_le_bytes(bytes[16..20].try_into().unwrap()), 1.5);
        assert_eq!(decode_feature_file(&bytes, "x").unwrap(), m);
        assert!(decode_feature_file(&bytes[..20], "x").is_err());
    }

    #[test]
    fn cache_misses_on_fingerprint_change() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path());
        let mut m = matrix(vec![vec![1.0]]);
        m.clip_id = "RAVDESS:Actor_01/x".into();
        cache.store(&m).unwrap();
        let fp = m.config_fingerprint.clone();
        assert_eq!(cache.load(&fp, &m.clip_id).unwrap(), Some(m.clone()));
        let other = MfccConfig { n_mfcc: 13, ..Default::default() }.fingerprint();
        assert_eq!(cache.load(&other, &m.clip_id).unwrap(), None);
    }
}
