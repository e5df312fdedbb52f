//! WAV decoding and clip normalization to 16 kHz mono, 5.0 seconds.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

use crate::error::{Error, Result};

pub const CANONICAL_RATE: u32 = 16_000;
pub const CANONICAL_SECONDS: f64 = 5.0;

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded audio. Multichannel samples are interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub sample_rate: u32,
    pub channels: u16,
    pub samples: Vec<f32>,
    pub source: String,
}

impl Clip {
    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Self {
        Clip {
            sample_rate,
            channels: 1,
            samples,
            source: String::new(),
        }
    }

    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }
}

/// Header facts needed for manifests, read without decoding the payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
    pub frames: u64,
}

impl WavInfo {
    pub fn duration_s(&self) -> f64 {
        self.frames as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Format> {
    if body.len() < 16 {
        return Err(Error::decode("fmt ", format!("{} bytes, need at least 16", body.len())));
    }
    let u16_at = |o: usize| u16::from_le_bytes([body[o], body[o + 1]]);
    let mut tag = u16_at(0);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(Error::decode("fmt ", "truncated WAVE_FORMAT_EXTENSIBLE block"));
        }
        tag = u16_at(24);
    }
    let fmt = Format {
        tag,
        channels: u16_at(2),
        sample_rate: u32::from_le_bytes([body[4], body[5], body[6], body[7]]),
        block_align: u16_at(12),
        bits: u16_at(14),
    };
    if fmt.channels == 0 {
        return Err(Error::decode("fmt ", "zero channels"));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::decode("fmt ", "zero sample rate"));
    }
    Ok(fmt)
}

fn check_supported(fmt: &Format) -> Result<()> {
    if fmt.tag != FORMAT_PCM {
        return Err(Error::UnsupportedFormat(format!(
            "format tag {:#06x} (only integer PCM is supported)",
            fmt.tag
        )));
    }
    if fmt.bits != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{}-bit samples (only 16-bit PCM is supported)",
            fmt.bits
        )));
    }
    if fmt.block_align != 2 * fmt.channels {
        return Err(Error::decode(
            "fmt ",
            format!("block align {} inconsistent with {} channels", fmt.block_align, fmt.channels),
        ));
    }
    Ok(())
}

fn check_riff_header(head: &[u8]) -> Result<()> {
    if head.len() < 12 || &head[0..4] != b"RIFF" {
        return Err(Error::decode("RIFF", "missing RIFF signature"));
    }
    if &head[8..12] != b"WAVE" {
        return Err(Error::decode("RIFF", "form type is not WAVE"));
    }
    Ok(())
}

fn chunk_name(id: &[u8]) -> String {
    String::from_utf8_lossy(id).into_owned()
}

/// Decodes a RIFF/WAVE byte buffer holding 16-bit signed PCM.
pub fn decode_wav(bytes: &[u8]) -> Result<Clip> {
    check_riff_header(bytes)?;
    let mut pos = 12;
    let mut fmt: Option<Format> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes([bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]]) as usize;
        let start = pos + 8;
        let end = start.checked_add(size).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = end.ok_or_else(|| Error::decode("fmt ", "chunk extends past end of file"))?;
                let f = parse_fmt(&bytes[start..end])?;
                check_supported(&f)?;
                fmt = Some(f);
            }
            b"data" => {
                let f = fmt.ok_or_else(|| Error::decode("fmt ", "data chunk precedes fmt chunk"))?;
                let end = end.ok_or_else(|| Error::decode("data", "chunk extends past end of file"))?;
                let payload = &bytes[start..end];
                if payload.len() % f.block_align as usize != 0 {
                    return Err(Error::decode(
                        "data",
                        format!("{} bytes is not a whole number of frames", payload.len()),
                    ));
                }
                let samples = payload
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
                    .collect();
                return Ok(Clip {
                    sample_rate: f.sample_rate,
                    channels: f.channels,
                    samples,
                    source: String::new(),
                });
            }
            _ => {
                if end.is_none() {
                    return Err(Error::decode(&chunk_name(id), "chunk extends past end of file"));
                }
            }
        }
        pos = start + size + (size & 1);
    }
    match fmt {
        None => Err(Error::decode("fmt ", "no fmt chunk found")),
        Some(_) => Err(Error::decode("data", "no data chunk found")),
    }
}

pub fn read_wav(path: &Path) -> Result<Clip> {
    let bytes = std::fs::read(path)?;
    let mut clip = decode_wav(&bytes)?;
    clip.source = path.display().to_string();
    Ok(clip)
}

/// Reads the fmt and data chunk headers only; the sample payload is skipped.
pub fn read_wav_info(path: &Path) -> Result<WavInfo> {
    let mut file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut head = [0u8; 12];
    file.read_exact(&mut head)
        .map_err(|_| Error::decode("RIFF", "file shorter than RIFF header"))?;
    check_riff_header(&head)?;
    let mut pos = 12u64;
    let mut fmt: Option<Format> = None;
    while pos + 8 <= file_len {
        let mut ch = [0u8; 8];
        file.read_exact(&mut ch)?;
        let size = u32::from_le_bytes([ch[4], ch[5], ch[6], ch[7]]) as u64;
        let id = &ch[0..4];
        match id {
            b"fmt " => {
                if size > 1024 {
                    return Err(Error::decode("fmt ", format!("implausible size {size}")));
                }
                let mut body = vec![0u8; size as usize];
                file.read_exact(&mut body)
                    .map_err(|_| Error::decode("fmt ", "chunk extends past end of file"))?;
                let f = parse_fmt(&body)?;
                check_supported(&f)?;
                fmt = Some(f);
                if size & 1 == 1 {
                    file.seek(SeekFrom::Current(1))?;
                }
            }
            b"data" => {
                let f = fmt.ok_or_else(|| Error::decode("fmt ", "data chunk precedes fmt chunk"))?;
                let available = file_len - (pos + 8);
                if size > available {
                    return Err(Error::decode("data", "chunk extends past end of file"));
                }
                return Ok(WavInfo {
                    sample_rate: f.sample_rate,
                    channels: f.channels,
                    bits_per_sample: f.bits,
                    frames: size / f.block_align as u64,
                });
            }
            _ => {
                file.seek(SeekFrom::Current((size + (size & 1)) as i64))?;
            }
        }
        pos += 8 + size + (size & 1);
    }
    match fmt {
        None => Err(Error::decode("fmt ", "no fmt chunk found")),
        Some(_) => Err(Error::decode("data", "no data chunk found")),
    }
}

/// Encodes a clip as 16-bit PCM WAV. Amplitudes are clamped to the
/// representable range; decode(encode(x)) is exact for decoded input.
pub fn encode_wav(clip: &Clip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&clip.channels.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    let block_align = 2 * clip.channels;
    out.extend_from_slice(&(clip.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Averages interleaved channels into one.
pub fn to_mono(clip: Clip) -> Clip {
    if clip.channels <= 1 {
        return clip;
    }
    let ch = clip.channels as usize;
    let samples = clip
        .samples
        .chunks_exact(ch)
        .map(|frame| (frame.iter().map(|&s| s as f64).sum::<f64>() / ch as f64) as f32)
        .collect();
    Clip {
        channels: 1,
        samples,
        ..clip
    }
}

/// Windowed-sinc polyphase resampler for a fixed rational rate ratio.
///
/// Each output sample is a 64-tap dot product over the input; the phase
/// filters are Kaiser-windowed sincs with the cutoff at 0.45 x the lower of
/// the two sample rates, each normalized to unit DC gain.
#[derive(Debug, Clone)]
pub struct SincResampler {
    from: u32,
    to: u32,
    up: u64,
    down: u64,
    phases: Vec<[f64; Self::TAPS]>,
}

impl SincResampler {
    pub const TAPS: usize = 64;
    pub const KAISER_BETA: f64 = 8.6;
    pub const CUTOFF: f64 = 0.45;

    pub fn new(from: u32, to: u32) -> Result<Self> {
        if from == 0 || to == 0 {
            return Err(Error::Config(format!("sample rates must be positive ({from} -> {to})")));
        }
        let g = gcd(from as u64, to as u64);
        let up = to as u64 / g;
        let down = from as u64 / g;
        let fc = Self::CUTOFF * from.min(to) as f64;
        let norm_cut = 2.0 * fc / from as f64;
        let half = (Self::TAPS / 2) as f64;
        let i0_beta = bessel_i0(Self::KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps = [0.0; Self::TAPS];
                for (j, tap) in taps.iter_mut().enumerate() {
                    // input index base + j - 31, output time base + frac
                    let tau = frac + half - 1.0 - j as f64;
                    let r = (tau / half).clamp(-1.0, 1.0);
                    let w = bessel_i0(Self::KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
                    *tap = norm_cut * sinc(norm_cut * tau) * w;
                }
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Ok(SincResampler {
            from,
            to,
            up,
            down,
            phases,
        })
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        let num = input_len as u128 * self.to as u128;
        ((num + self.from as u128 / 2) / self.from as u128) as usize
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        let n_out = self.output_len(input.len());
        let lead = Self::TAPS as i64 / 2 - 1;
        (0..n_out as u64)
            .map(|n| {
                let pos = n * self.down;
                let base = (pos / self.up) as i64;
                let taps = &self.phases[(pos % self.up) as usize];
                let first = base - lead;
                let mut acc = 0.0f64;
                for (j, &t) in taps.iter().enumerate() {
                    let i = first + j as i64;
                    if i >= 0 && (i as usize) < input.len() {
                        acc += t * input[i as usize] as f64;
                    }
                }
                acc as f32
            })
            .collect()
    }
}

/// Resamples a mono clip. Clips already at `target_rate` are returned untouched.
pub fn resample(clip: Clip, target_rate: u32) -> Result<Clip> {
    if clip.channels != 1 {
        return Err(Error::Config(format!(
            "resample expects a mono clip, got {} channels",
            clip.channels
        )));
    }
    if clip.sample_rate == target_rate {
        return Ok(clip);
    }
    let rs = SincResampler::new(clip.sample_rate, target_rate)?;
    let samples = rs.process(&clip.samples);
    Ok(Clip {
        sample_rate: target_rate,
        samples,
        ..clip
    })
}

/// Pads the tail with silence or truncates the tail to exactly `target_seconds`.
pub fn normalize_duration(mut clip: Clip, target_seconds: f64) -> Clip {
    let target = (target_seconds * clip.sample_rate as f64).round() as usize * clip.channels as usize;
    clip.samples.resize(target, 0.0);
    clip
}

/// mono -> 16 kHz -> 5.0 s.
pub fn preprocess(clip: Clip) -> Result<Clip> {
    let clip = resample(to_mono(clip), CANONICAL_RATE)?;
    Ok(normalize_duration(clip, CANONICAL_SECONDS))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
