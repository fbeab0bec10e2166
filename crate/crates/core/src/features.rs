//! Two-channel clip features: normalized tracked frequency and power ratio.
//!
//! Per sample, the tracker step is followed by the recursive power estimates
//! of the input and of the notch residual. Their difference is the power of
//! the suppressed sinusoid, and its share of the input power is the power
//! ratio. Both channels are then decimated by `q_down`, and the frequency is
//! divided by `fs / 2`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anf::{self, AnfConfig, AnfStepOutput};
use crate::error::{Error, Result};

/// Below this smoothed input power the power ratio is reported as 0.
pub const SILENCE_POWER: f64 = 1e-12;

pub const FEATURE_MAGIC: &[u8; 4] = b"ANFF";
pub const FEATURE_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Noise,
    Siren,
}

impl Label {
    pub fn target(self) -> f32 {
        match self {
            Label::Noise => 0.0,
            Label::Siren => 1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Siren
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Noise => "noise",
            Label::Siren => "siren",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "siren" | "1" => Ok(Label::Siren),
            "noise" | "0" => Ok(Label::Noise),
            other => Err(Error::Manifest(format!("unknown label '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Time constant of the recursive power averages, in seconds.
    pub tau: f64,
    pub q_down: u16,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { tau: 0.02, q_down: 5 }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.q_down == 0 {
            return Err(Error::Config("q_down must be at least 1".into()));
        }
        Ok(())
    }

    /// Smoothing factor `exp(-1 / (tau fs))`.
    pub fn lambda(&self, sample_rate_hz: f64) -> f64 {
        (-1.0 / (self.tau * sample_rate_hz)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerState {
    pub p_y: f64,
    pub p_e: f64,
}

/// Updates both power averages and returns `(state, p_f, p_ratio)`.
///
/// `p_f` may be transiently negative when the notch amplifies; the ratio is
/// clamped to `[0, 1]` and forced to 0 for near-silent input.
#[inline]
pub fn power_step(state: &PowerState, y: f64, e: f64, lambda: f64) -> (PowerState, f64, f64) {
    let p_y = lambda * state.p_y + (1.0 - lambda) * y * y;
    let p_e = lambda * state.p_e + (1.0 - lambda) * e * e;
    let p_f = p_y - p_e;
    let ratio = if p_y < SILENCE_POWER {
        0.0
    } else {
        (p_f / p_y).clamp(0.0, 1.0)
    };
    (PowerState { p_y, p_e }, p_f, ratio)
}

/// Features of one audio segment. Channel 0 is `f_norm`, channel 1 is
/// `p_ratio`; both have the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureClip {
    pub f_norm: Vec<f32>,
    pub p_ratio: Vec<f32>,
    pub label: Option<Label>,
    pub source_id: String,
    pub sample_rate_hz: u32,
    pub q_down: u16,
}

impl FeatureClip {
    pub fn len(&self) -> usize {
        self.f_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_norm.is_empty()
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }
}

/// Feature length for an `n`-sample input.
pub fn feature_len(n: usize, q_down: u16) -> usize {
    n.saturating_sub(2) / q_down as usize
}

/// Keep every `q`-th sample starting at the first, truncated to
/// `floor(len / q)` values.
pub fn decimate<T: Copy>(x: &[T], q: usize) -> Vec<T> {
    let n = x.len() / q;
    x.iter().step_by(q).take(n).copied().collect()
}

/// Extracts features from a buffer of exactly two seconds at the tracker's
/// sample rate.
pub fn extract_features(samples: &[f32], anf_config: &AnfConfig, power: &PowerConfig) -> Result<FeatureClip> {
    let expected = (2.0 * anf_config.sample_rate_hz).round() as usize;
    if samples.len() != expected {
        return Err(Error::InputSize(format!(
            "feature extraction expects {expected} samples (2 s), got {}",
            samples.len()
        )));
    }
    extract_features_any(samples, anf_config, power)
}

/// Same as [`extract_features`] for any buffer of at least 3 samples.
pub fn extract_features_any(samples: &[f32], anf_config: &AnfConfig, power: &PowerConfig) -> Result<FeatureClip> {
    anf_config.validate()?;
    power.validate()?;
    if samples.len() < 3 {
        return Err(Error::InputSize(format!(
            "feature extraction needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    if let Some(index) = samples[..2].iter().position(|y| !y.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let fs = anf_config.sample_rate_hz;
    let nyquist = fs / 2.0;
    let lambda = power.lambda(fs);
    let q = power.q_down as usize;
    let out_len = feature_len(samples.len(), power.q_down);

    let mut f_norm = Vec::with_capacity(out_len);
    let mut p_ratio = Vec::with_capacity(out_len);
    let mut tracker = anf::anf_init(anf_config)?;
    let mut pstate = PowerState::default();

    for (i, &y) in samples.iter().enumerate().skip(2) {
        let y = f64::from(y);
        if !y.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        let (next, step) = anf::step_unchecked(&tracker, y, anf_config);
        tracker = next;
        let (next_p, _, ratio) = power_step(&pstate, y, step.e, lambda);
        pstate = next_p;

        let k = i - 2;
        if k % q == 0 && f_norm.len() < out_len {
            f_norm.push(((step.f_hat / nyquist) as f32).clamp(0.0, 1.0));
            p_ratio.push(ratio as f32);
        }
    }

    Ok(FeatureClip {
        f_norm,
        p_ratio,
        label: None,
        source_id: String::new(),
        sample_rate_hz: fs.round() as u32,
        q_down: power.q_down,
    })
}

/// Power ratio sequence for an already-tracked buffer. `samples` is the full
/// input; `steps[k]` corresponds to `samples[k + 2]`.
pub fn power_ratios(samples: &[f64], steps: &[AnfStepOutput], lambda: f64) -> Vec<f64> {
    let mut state = PowerState::default();
    samples[2..]
        .iter()
        .zip(steps)
        .map(|(&y, st)| {
            let (next, _, ratio) = power_step(&state, y, st.e, lambda);
            state = next;
            ratio
        })
        .collect()
}

pub fn write_features(clip: &FeatureClip, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_features(clip)?)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureClip> {
    decode_features(&fs::read(path)?)
}

pub fn encode_features(clip: &FeatureClip) -> Result<Vec<u8>> {
    if clip.f_norm.len() != clip.p_ratio.len() {
        return Err(Error::InputSize(format!(
            "channel lengths differ: {} vs {}",
            clip.f_norm.len(),
            clip.p_ratio.len()
        )));
    }
    let len = u32::try_from(clip.len()).map_err(|_| Error::InputSize("clip too long".into()))?;
    let id = clip.source_id.as_bytes();
    let id_len = u16::try_from(id.len()).map_err(|_| Error::InputSize("source id too long".into()))?;

    let mut out = Vec::with_capacity(21 + id.len() + 8 * clip.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&clip.q_down.to_le_bytes());
    out.extend_from_slice(&len.to_le_bytes());
    out.push(match clip.label {
        Some(Label::Noise) => 0,
        Some(Label::Siren) => 1,
        None => 255,
    });
    out.extend_from_slice(&id_len.to_le_bytes());
    out.extend_from_slice(id);
    for v in clip.f_norm.iter().chain(&clip.p_ratio) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureClip> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != FEATURE_MAGIC {
        return Err(Error::format(0, "bad magic, not a feature file"));
    }
    let version = r.u16()?;
    if version != FEATURE_VERSION {
        return Err(Error::Version {
            what: "feature file",
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let sample_rate_hz = r.u32()?;
    let q_down = r.u16()?;
    let len = r.u32()? as usize;
    let label_at = r.offset();
    let label = match r.u8()? {
        0 => Some(Label::Noise),
        1 => Some(Label::Siren),
        255 => None,
        other => return Err(Error::format(label_at, format!("invalid label byte {other}"))),
    };
    let id_len = r.u16()? as usize;
    let id_at = r.offset();
    let source_id = String::from_utf8(r.take(id_len)?.to_vec())
        .map_err(|_| Error::format(id_at, "source id is not valid UTF-8"))?;
    let f_norm = r.f32_vec(len)?;
    let p_ratio = r.f32_vec(len)?;
    r.finish()?;
    Ok(FeatureClip {
        f_norm,
        p_ratio,
        label,
        source_id,
        sample_rate_hz,
        q_down,
    })
}

/// Little-endian cursor that reports the failing byte offset.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::format(
                    self.buf.len() as u64,
                    format!("truncated: needed {n} bytes at offset {}", self.pos),
                )
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::format(self.offset(), "length overflow"))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.offset(),
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}
