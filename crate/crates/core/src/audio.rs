//! WAV ingest: decode, downmix to mono, resample and cut into fixed windows.

use std::f64::consts::PI;
use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono audio with amplitudes nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

pub fn decode_wav_file(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let bytes = std::fs::read(path)?;
    decode_wav(&bytes)
}

/// Decodes 16-bit PCM or 32-bit float WAV with one or two channels.
/// Stereo is averaged to mono.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedFormat(format!("{channels} channels")));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f32::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!("{fmt:?} with {bits} bits per sample")));
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::CorruptFile("partial frame at end of data chunk".into()));
    }
    let samples: Vec<f32> = if channels == 1 {
        interleaved
    } else {
        interleaved.chunks_exact(2).map(|f| (f[0] + f[1]) / 2.0).collect()
    };
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::CorruptFile(format!("non-finite sample at frame {i}")));
    }
    Ok(AudioBuffer::new(samples, spec.sample_rate))
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV encoding".into()),
        hound::Error::IoError(e) => Error::CorruptFile(e.to_string()),
        other => Error::CorruptFile(other.to_string()),
    }
}

/// Writes a mono 32-bit float WAV file.
pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate_hz,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in &buffer.samples {
        w.write_sample(s).map_err(map_hound)?;
    }
    w.finalize().map_err(map_hound)?;
    Ok(())
}

const TAPS: usize = 32;
const HALF: f64 = (TAPS / 2) as f64;
const KAISER_BETA: f64 = 8.0;
const MAX_TABLE_PHASES: usize = 4096;

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Polyphase windowed-sinc resampler, Kaiser window (beta 8), 32 taps per
/// output phase. Each phase is normalized to unit DC gain.
struct Polyphase {
    up: u64,
    down: u64,
    cutoff: f64,
    table: Option<Vec<[f64; TAPS]>>,
}

impl Polyphase {
    fn new(source_hz: u32, target_hz: u32) -> Self {
        let g = gcd(u64::from(source_hz), u64::from(target_hz));
        let up = u64::from(target_hz) / g;
        let down = u64::from(source_hz) / g;
        let cutoff = (target_hz as f64 / source_hz as f64).min(1.0);
        let mut p = Self {
            up,
            down,
            cutoff,
            table: None,
        };
        if (up as usize) <= MAX_TABLE_PHASES {
            p.table = Some((0..up).map(|ph| p.phase_taps(ph)).collect());
        }
        p
    }

    fn phase_taps(&self, phase: u64) -> [f64; TAPS] {
        let offset = phase as f64 / self.up as f64;
        let norm = bessel_i0(KAISER_BETA);
        let mut h = [0.0; TAPS];
        for (idx, tap) in h.iter_mut().enumerate() {
            let j = idx as f64 - (HALF - 1.0);
            let d = j - offset;
            let r = d / HALF;
            let window = if r.abs() <= 1.0 {
                bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
            } else {
                0.0
            };
            let x = self.cutoff * d;
            let sinc = if x.abs() < 1e-12 {
                1.0
            } else {
                (PI * x).sin() / (PI * x)
            };
            *tap = self.cutoff * sinc * window;
        }
        let sum: f64 = h.iter().sum();
        for t in &mut h {
            *t /= sum;
        }
        h
    }

    fn run(&self, x: &[f32], out_len: usize) -> Vec<f32> {
        let n = x.len() as i64;
        let mut out = Vec::with_capacity(out_len);
        let mut scratch;
        for m in 0..out_len as u64 {
            let pos = m * self.down;
            let base = (pos / self.up) as i64;
            let phase = pos % self.up;
            let taps = match &self.table {
                Some(t) => &t[phase as usize],
                None => {
                    scratch = self.phase_taps(phase);
                    &scratch
                }
            };
            let first = base - (TAPS as i64 / 2 - 1);
            let mut acc = 0.0;
            for (k, &h) in taps.iter().enumerate() {
                let i = first + k as i64;
                if (0..n).contains(&i) {
                    acc += h * f64::from(x[i as usize]);
                }
            }
            out.push((acc as f32).clamp(-1.0, 1.0));
        }
        out
    }
}

/// Resamples to `target_hz`. Output length is `round(N * target / source)`;
/// the output is clamped to `[-1, 1]`.
pub fn resample(buffer: &AudioBuffer, target_hz: u32) -> Result<AudioBuffer> {
    if target_hz == 0 {
        return Err(Error::Config("resample target rate must be positive".into()));
    }
    if buffer.sample_rate_hz == 0 {
        return Err(Error::Config("source sample rate must be positive".into()));
    }
    if buffer.sample_rate_hz == target_hz {
        return Ok(buffer.clone());
    }
    let src = u64::from(buffer.sample_rate_hz);
    let dst = u64::from(target_hz);
    let out_len = ((buffer.len() as u64 * dst * 2 + src) / (2 * src)) as usize;
    let poly = Polyphase::new(buffer.sample_rate_hz, target_hz);
    Ok(AudioBuffer::new(poly.run(&buffer.samples, out_len), target_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentPolicy {
    /// Only the first window; shorter input is an error.
    FirstWindow,
    /// Consecutive windows, trailing remainder dropped.
    NonOverlapping,
}

pub fn window_samples(window_s: f64, sample_rate_hz: u32) -> usize {
    (window_s * f64::from(sample_rate_hz)).round() as usize
}

pub fn segment(buffer: &AudioBuffer, window_s: f64, policy: SegmentPolicy) -> Result<Vec<AudioBuffer>> {
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(Error::Config(format!("window must be positive, got {window_s}")));
    }
    let w = window_samples(window_s, buffer.sample_rate_hz);
    if w == 0 {
        return Err(Error::Config("window shorter than one sample".into()));
    }
    let cut = |chunk: &[f32]| AudioBuffer::new(chunk.to_vec(), buffer.sample_rate_hz);
    match policy {
        SegmentPolicy::FirstWindow => {
            if buffer.len() < w {
                return Err(Error::ShortInput {
                    got: buffer.len(),
                    need: w,
                });
            }
            Ok(vec![cut(&buffer.samples[..w])])
        }
        SegmentPolicy::NonOverlapping => Ok(buffer.samples.chunks_exact(w).map(cut).collect()),
    }
}

/// Zero-pads (never truncates) to `len` samples.
pub fn pad_to(buffer: &AudioBuffer, len: usize) -> AudioBuffer {
    let mut samples = buffer.samples.clone();
    if samples.len() < len {
        samples.resize(len, 0.0);
    }
    AudioBuffer::new(samples, buffer.sample_rate_hz)
}
