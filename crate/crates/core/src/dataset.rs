//! Corpus bookkeeping: manifests, nested data-efficiency splits, synthetic
//! siren/noise generation and the ingest pipeline that turns audio files into
//! feature files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::anf::AnfConfig;
use crate::audio::{self, AudioBuffer, SegmentPolicy};
use crate::error::{Error, Result};
use crate::features::{self, FeatureClip, Label, PowerConfig};

/// File extension of feature files in a store directory.
pub const FEATURE_EXT: &str = "anff";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_id: String,
    pub path: PathBuf,
    pub label: Label,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(name: impl Into<String>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Self {
            name: name.into(),
            entries,
        };
        m.check_unique()?;
        Ok(m)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.source_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate source id '{}'", e.source_id)));
            }
        }
        Ok(())
    }

    /// Reads a tab-separated manifest: `path<TAB>label<TAB>duration` per line.
    /// Blank lines and lines starting with `#` are ignored; relative paths
    /// are resolved against the manifest's directory. The source id is the
    /// file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Manifest(format!(
                    "line {}: expected 3 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let file = PathBuf::from(fields[0]);
            let label: Label = fields[1]
                .parse()
                .map_err(|e| Error::Manifest(format!("line {}: {e}", lineno + 1)))?;
            let duration_s: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::Manifest(format!("line {}: bad duration '{}'", lineno + 1, fields[2])))?;
            let source_id = file
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Manifest(format!("line {}: path has no file name", lineno + 1)))?
                .to_string();
            let resolved = if file.is_absolute() { file } else { base.join(file) };
            entries.push(ManifestEntry {
                source_id,
                path: resolved,
                label,
                duration_s,
            });
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("manifest")
            .to_string();
        Self::new(name, entries)
    }

    /// Writes the manifest with paths relative to `path`'s directory when
    /// possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let mut out = String::new();
        for e in &self.entries {
            let p = e.path.strip_prefix(base).unwrap_or(&e.path);
            out.push_str(&format!("{}\t{}\t{}\n", p.display(), e.label, e.duration_s));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops entries whose source id is listed, e.g. augmented copies.
    pub fn exclude(&self, ids: &HashSet<String>) -> Self {
        Self {
            name: self.name.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| !ids.contains(&e.source_id))
                .cloned()
                .collect(),
        }
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// One ratio of the data-efficiency sweep with its folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSplit {
    /// Percentage of the full training set.
    pub ratio: f64,
    pub size: usize,
    pub folds: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub n_folds: usize,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub ratios: Vec<RatioSplit>,
    /// Ratios whose subsets are too small to hold every class, or were
    /// enlarged to do so.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SplitPlan {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn fold(&self, ratio_index: usize, fold: usize) -> Option<&[String]> {
        self.ratios.get(ratio_index)?.folds.get(fold).map(|v| v.as_slice())
    }
}

/// Orders ids so that every prefix is as close to the class proportions of
/// the whole as possible, with one id of each class up front.
fn stratified_order(by_class: &[(Label, Vec<String>)]) -> Vec<String> {
    let total: usize = by_class.iter().map(|(_, v)| v.len()).sum();
    let fracs: Vec<f64> = by_class.iter().map(|(_, v)| v.len() as f64 / total as f64).collect();
    let mut taken = vec![0usize; by_class.len()];
    let mut order = Vec::with_capacity(total);

    // largest class first, one of each
    let mut seedlist: Vec<usize> = (0..by_class.len()).filter(|&c| !by_class[c].1.is_empty()).collect();
    seedlist.sort_by(|&a, &b| by_class[b].1.len().cmp(&by_class[a].1.len()).then(a.cmp(&b)));
    for c in seedlist {
        order.push(by_class[c].1[0].clone());
        taken[c] = 1;
    }
    while order.len() < total {
        let n = (order.len() + 1) as f64;
        let pick = (0..by_class.len())
            .filter(|&c| taken[c] < by_class[c].1.len())
            .max_by(|&a, &b| {
                let da = n * fracs[a] - taken[a] as f64;
                let db = n * fracs[b] - taken[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("remaining ids");
        order.push(by_class[pick].1[taken[pick]].clone());
        taken[pick] += 1;
    }
    order
}

fn split_classes(entries: &[&ManifestEntry]) -> Vec<(Label, Vec<String>)> {
    let mut map: BTreeMap<Label, Vec<String>> = BTreeMap::new();
    for e in entries {
        map.entry(e.label).or_default().push(e.source_id.clone());
    }
    map.into_iter()
        .map(|(l, mut v)| {
            v.sort();
            (l, v)
        })
        .collect()
}

/// Builds the training/validation/test partition and, for every fold, a
/// chain of nested training subsets, one per ratio.
///
/// `ratios` are percentages in ascending order ending at 100. The partition
/// is stratified per class. Each fold draws one stratified ordering of the
/// training set, and every ratio takes a prefix of it, so smaller subsets are
/// contained in larger ones within a fold while different folds may overlap.
pub fn make_splits(
    manifest: &Manifest,
    ratios: &[f64],
    n_folds: usize,
    val_test: [f64; 2],
    seed: u64,
) -> Result<SplitPlan> {
    if ratios.is_empty() || ratios.windows(2).any(|w| w[0] >= w[1]) || ratios.iter().any(|&r| r <= 0.0) {
        return Err(Error::Config("ratios must be positive and strictly ascending".into()));
    }
    if (ratios[ratios.len() - 1] - 100.0).abs() > 1e-9 {
        return Err(Error::Config("largest ratio must be 100%".into()));
    }
    if n_folds == 0 {
        return Err(Error::Config("need at least one fold".into()));
    }
    let [val_frac, test_frac] = val_test;
    if !(val_frac >= 0.0 && test_frac >= 0.0 && val_frac + test_frac < 1.0) {
        return Err(Error::Config("validation and test fractions must sum below 1".into()));
    }
    for label in [Label::Noise, Label::Siren] {
        if manifest.count(label) < 10 {
            return Err(Error::Config(format!(
                "need at least 10 {label} entries, manifest has {}",
                manifest.count(label)
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<&ManifestEntry> = manifest.entries.iter().collect();
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut train_by_class = Vec::new();
    for (label, mut ids) in split_classes(&entries) {
        ids.shuffle(&mut rng);
        let n = ids.len();
        let n_val = round_half_up(val_frac * n as f64);
        let n_test = round_half_up(test_frac * n as f64);
        validation.extend_from_slice(&ids[..n_val]);
        test.extend_from_slice(&ids[n_val..n_val + n_test]);
        let tr = ids[n_val + n_test..].to_vec();
        train.extend_from_slice(&tr);
        train_by_class.push((label, tr));
    }
    train.sort();
    validation.sort();
    test.sort();

    let n_train = train.len();
    let n_classes = train_by_class.iter().filter(|(_, v)| !v.is_empty()).count();
    let mut warnings = Vec::new();
    let sizes: Vec<usize> = ratios
        .iter()
        .map(|&r| {
            let exact = r / 100.0 * n_train as f64;
            let mut size = round_half_up(exact);
            if size < n_classes {
                warnings.push(format!(
                    "ratio {r}%: {exact:.3} samples cannot hold all {n_classes} classes, using {n_classes}"
                ));
                size = n_classes;
            }
            size.min(n_train)
        })
        .collect();

    let mut orders = Vec::with_capacity(n_folds);
    for _ in 0..n_folds {
        let shuffled: Vec<(Label, Vec<String>)> = train_by_class
            .iter()
            .map(|(l, v)| {
                let mut v = v.clone();
                v.shuffle(&mut rng);
                (*l, v)
            })
            .collect();
        orders.push(stratified_order(&shuffled));
    }

    let ratio_splits = ratios
        .iter()
        .zip(&sizes)
        .map(|(&ratio, &size)| RatioSplit {
            ratio,
            size,
            folds: orders.iter().map(|o| o[..size].to_vec()).collect(),
        })
        .collect();

    Ok(SplitPlan {
        seed,
        n_folds,
        train,
        validation,
        test,
        ratios: ratio_splits,
        warnings,
    })
}

/// Siren classes plus the noise-only bed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    TwoTone,
    Wail,
    Yelp,
    Noise,
}

impl SynthKind {
    pub fn label(self) -> Label {
        match self {
            SynthKind::Noise => Label::Noise,
            _ => Label::Siren,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Sweep limits for wail/yelp, the two tones for two-tone.
    pub f0_range: (f64, f64),
    /// Sweep rate (wail, yelp) or full lo-hi cycles per second (two-tone).
    pub modulation_rate_hz: f64,
    /// Siren-to-noise ratio; `+inf` means no noise.
    pub snr_db: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let nyq = f64::from(self.sample_rate_hz) / 2.0;
        let (lo, hi) = self.f0_range;
        if self.sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self.kind != SynthKind::Noise && !(lo > 0.0 && hi >= lo && hi < nyq) {
            return Err(Error::Config(format!("f0 range ({lo}, {hi}) outside (0, {nyq})")));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::Config("SNR must be a number or +inf".into()));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if !(self.modulation_rate_hz >= 0.0 && self.modulation_rate_hz.is_finite()) {
            return Err(Error::Config("modulation rate must be non-negative".into()));
        }
        Ok(())
    }

    /// Random siren or noise spec with the documented default parameter
    /// ranges: wail sweeps slowly (0.1-0.5 Hz), yelp fast (3-8 Hz), two-tone
    /// alternates a pair a fourth apart at 0.5-1.5 Hz.
    pub fn random<R: Rng + ?Sized>(label: Label, snr_db: (f64, f64), duration_s: f64, rng: &mut R) -> Self {
        let kind = match label {
            Label::Noise => SynthKind::Noise,
            Label::Siren => [SynthKind::TwoTone, SynthKind::Wail, SynthKind::Yelp][rng.random_range(0..3)],
        };
        let (f0_range, modulation_rate_hz) = match kind {
            SynthKind::Wail => (
                (rng.random_range(400.0..700.0), rng.random_range(1100.0..1600.0)),
                rng.random_range(0.1..0.5),
            ),
            SynthKind::Yelp => (
                (rng.random_range(450.0..750.0), rng.random_range(1100.0..1700.0)),
                rng.random_range(3.0..8.0),
            ),
            SynthKind::TwoTone => {
                let lo = rng.random_range(400.0..800.0);
                ((lo, lo * 4.0 / 3.0), rng.random_range(0.5..1.5))
            }
            SynthKind::Noise => ((0.0, 0.0), 0.0),
        };
        let snr = if snr_db.0 < snr_db.1 {
            rng.random_range(snr_db.0..snr_db.1)
        } else {
            snr_db.0
        };
        Self {
            kind,
            f0_range,
            modulation_rate_hz,
            snr_db: snr,
            duration_s,
            sample_rate_hz: 16_000,
            seed: rng.random(),
        }
    }
}

/// Triangle wave in `[0, 1]` with period 1 over `x`.
fn triangle(x: f64) -> f64 {
    let f = x.rem_euclid(1.0);
    if f < 0.5 {
        2.0 * f
    } else {
        2.0 - 2.0 * f
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Pink noise (Kellet's filter on white noise) plus a speech-band noise with
/// syllable-rate amplitude modulation, normalized to unit RMS.
fn noise_bed<R: Rng + ?Sized>(n: usize, fs: f64, rng: &mut R) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    let mut pink = Vec::with_capacity(n);
    for _ in 0..n {
        let w: f64 = StandardNormal.sample(rng);
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        pink.push(b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362);
        b[6] = w * 0.115926;
    }

    // RBJ band-pass around 1 kHz, Q 0.7
    let w0 = 2.0 * PI * 1000.0 / fs;
    let alpha = w0.sin() / (2.0 * 0.7);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    let am_rate = rng.random_range(3.0..6.0);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let mut babble = Vec::with_capacity(n);
    for i in 0..n {
        let x: f64 = StandardNormal.sample(rng);
        let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
        (x2, x1) = (x1, x);
        (y2, y1) = (y1, y);
        let env = 1.0 + 0.6 * (2.0 * PI * am_rate * i as f64 / fs + am_phase).sin();
        babble.push(y * env);
    }

    let (rp, rb) = (rms(&pink).max(1e-12), rms(&babble).max(1e-12));
    let mut bed: Vec<f64> = pink.iter().zip(&babble).map(|(p, q)| p / rp + 0.7 * q / rb).collect();
    let r = rms(&bed).max(1e-12);
    bed.iter_mut().for_each(|v| *v /= r);
    bed
}

fn siren_tone<R: Rng + ?Sized>(spec: &SynthSpec, n: usize, rng: &mut R) -> Vec<f64> {
    let fs = f64::from(spec.sample_rate_hz);
    let (lo, hi) = spec.f0_range;
    let start = rng.random_range(0.0..1.0);
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let cycle = start + spec.modulation_rate_hz * t;
        let f = match spec.kind {
            SynthKind::Wail | SynthKind::Yelp => lo + (hi - lo) * triangle(cycle),
            SynthKind::TwoTone => {
                if cycle.rem_euclid(1.0) < 0.5 {
                    lo
                } else {
                    hi
                }
            }
            SynthKind::Noise => unreachable!(),
        };
        phase += 2.0 * PI * f / fs;
        if phase > 2.0 * PI {
            phase -= 2.0 * PI;
        }
        // weak harmonics; the fundamental dominates
        out.push(phase.sin() + 0.3 * (2.0 * phase).sin() + 0.15 * (3.0 * phase).sin());
    }
    out
}

/// Renders a synthetic clip, peak-normalized to 0.9.
pub fn synth_clip(spec: &SynthSpec) -> Result<(AudioBuffer, Label)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fs = f64::from(spec.sample_rate_hz);
    let n = (spec.duration_s * fs).round() as usize;
    let mixed: Vec<f64> = match spec.kind {
        SynthKind::Noise => noise_bed(n, fs, &mut rng),
        _ => {
            let tone = siren_tone(spec, n, &mut rng);
            if spec.snr_db == f64::INFINITY {
                tone
            } else {
                let bed = noise_bed(n, fs, &mut rng);
                let gain = rms(&tone) / 10f64.powf(spec.snr_db / 20.0);
                tone.iter().zip(&bed).map(|(s, b)| s + gain * b).collect()
            }
        }
    };
    let peak = mixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.9 / peak } else { 0.0 };
    let samples = mixed.iter().map(|v| (v * scale) as f32).collect();
    Ok((AudioBuffer::new(samples, spec.sample_rate_hz), spec.kind.label()))
}

/// A labelled synthetic clip with its id.
#[derive(Debug, Clone)]
pub struct SynthItem {
    pub source_id: String,
    pub spec: SynthSpec,
    pub audio: AudioBuffer,
    pub label: Label,
}

/// Balanced synthetic corpus with SNRs drawn uniformly from `snr_db`.
pub fn synth_corpus(
    n_siren: usize,
    n_noise: usize,
    snr_db: (f64, f64),
    duration_s: f64,
    seed: u64,
) -> Result<Vec<SynthItem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(n_siren + n_noise);
    for (label, count) in [(Label::Siren, n_siren), (Label::Noise, n_noise)] {
        for i in 0..count {
            let spec = SynthSpec::random(label, snr_db, duration_s, &mut rng);
            let (audio, label) = synth_clip(&spec)?;
            items.push(SynthItem {
                source_id: format!("{label}_{i:05}"),
                spec,
                audio,
                label,
            });
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestPolicy {
    pub segment: SegmentPolicy,
    pub target_hz: u32,
    pub window_s: f64,
    /// Zero-pad inputs shorter than one window instead of skipping them.
    pub pad_short: bool,
}

impl IngestPolicy {
    /// First 2 s of each file, short files padded.
    pub fn train_corpus() -> Self {
        Self {
            segment: SegmentPolicy::FirstWindow,
            target_hz: 16_000,
            window_s: 2.0,
            pad_short: true,
        }
    }

    /// Every complete 2 s window of each file.
    pub fn cross_corpus() -> Self {
        Self {
            segment: SegmentPolicy::NonOverlapping,
            ..Self::train_corpus()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub source_id: String,
    pub path: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: usize,
    pub clips: usize,
    /// Feature files newly written (or rewritten with `force`).
    pub written: usize,
    /// Feature files already present and left untouched.
    pub unchanged: usize,
    pub padded: Vec<String>,
    pub skipped: Vec<SkipRecord>,
}

impl IngestReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Resample, segment and featurize one decoded file. Returns the clips and
/// whether the input had to be padded.
pub fn featurize(
    source_id: &str,
    audio: &AudioBuffer,
    label: Option<Label>,
    anf: &AnfConfig,
    power: &PowerConfig,
    policy: &IngestPolicy,
) -> Result<(Vec<FeatureClip>, bool)> {
    let resampled = audio::resample(audio, policy.target_hz)?;
    let window = audio::window_samples(policy.window_s, policy.target_hz);
    let mut padded = false;
    let input = if policy.segment == SegmentPolicy::FirstWindow && resampled.len() < window && policy.pad_short {
        padded = true;
        audio::pad_to(&resampled, window)
    } else {
        resampled
    };
    let segments = audio::segment(&input, policy.window_s, policy.segment)?;
    let anf = AnfConfig {
        sample_rate_hz: f64::from(policy.target_hz),
        ..*anf
    };
    let clips = segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            let id = match policy.segment {
                SegmentPolicy::FirstWindow => source_id.to_string(),
                SegmentPolicy::NonOverlapping => format!("{source_id}__{k:03}"),
            };
            Ok(features::extract_features_any(&seg.samples, &anf, power)?
                .with_label(label)
                .with_source_id(id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((clips, padded))
}

pub fn feature_path(store: &Path, source_id: &str) -> PathBuf {
    store.join(format!("{source_id}.{FEATURE_EXT}"))
}

/// Decode, resample, segment and featurize every manifest entry into
/// `store`. Per-file failures are recorded and skipped. Existing feature
/// files are left alone unless `force` is set.
pub fn ingest(
    manifest: &Manifest,
    anf: &AnfConfig,
    power: &PowerConfig,
    policy: &IngestPolicy,
    store: &Path,
    force: bool,
) -> Result<IngestReport> {
    fs::create_dir_all(store)?;
    let mut report = IngestReport::default();
    for entry in &manifest.entries {
        report.files += 1;
        let result = audio::decode_wav_file(&entry.path)
            .and_then(|a| featurize(&entry.source_id, &a, Some(entry.label), anf, power, policy));
        match result {
            Ok((clips, padded)) => {
                if padded {
                    report.padded.push(entry.source_id.clone());
                }
                for clip in clips {
                    let path = feature_path(store, &clip.source_id);
                    if force || !path.exists() {
                        features::write_features(&clip, &path)?;
                        report.written += 1;
                    } else {
                        report.unchanged += 1;
                    }
                    report.clips += 1;
                }
            }
            Err(e) => report.skipped.push(SkipRecord {
                source_id: entry.source_id.clone(),
                path: entry.path.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(report)
}

/// All feature files of a store, keyed by source id.
pub fn load_store(store: &Path) -> Result<BTreeMap<String, FeatureClip>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(store)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(FEATURE_EXT) {
            let clip = features::read_features(&path)?;
            out.insert(clip.source_id.clone(), clip);
        }
    }
    Ok(out)
}

/// Looks up clips by id, failing on the first missing one.
pub fn select(store: &BTreeMap<String, FeatureClip>, ids: &[String]) -> Result<Vec<FeatureClip>> {
    ids.iter()
        .map(|id| {
            store
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Manifest(format!("no features for source id '{id}'")))
        })
        .collect()
}

/// Class counts of a list of ids.
pub fn class_counts(ids: &[String], labels: &HashMap<String, Label>) -> BTreeMap<Label, usize> {
    let mut m = BTreeMap::new();
    for id in ids {
        if let Some(&l) = labels.get(id) {
            *m.entry(l).or_insert(0) += 1;
        }
    }
    m
}
