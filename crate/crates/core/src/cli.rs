//! Operator pipeline behind the `sirentrack` binary: synthetic corpora,
//! feature extraction, split planning, training sweeps, evaluation and the
//! F1-versus-data plot.
//!
//! Every step reads one JSON [`RunConfig`] and writes under its `out_dir`.
//! Steps are idempotent: existing outputs are reused unless `force` is set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anf::AnfConfig;
use crate::audio;
use crate::dataset::{self, IngestPolicy, IngestReport, Manifest, ManifestEntry, SplitPlan};
use crate::error::{Error, Result};
use crate::features::{FeatureClip, PowerConfig};
use crate::metrics::{self, EvalReport, MeanStd, ScoredSet};
use crate::nn::{self, Checkpoint, TrainConfig};

/// Test corpus: `in` is the held-out split of the training corpus, `cross`
/// a separately recorded corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    In,
    Cross,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::In => "in",
            Domain::Cross => "cross",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_siren: usize,
    pub n_noise: usize,
    pub snr_db: (f64, f64),
    pub duration_s: f64,
    /// Clips per class of the cross-domain corpus; 0 disables it.
    pub cross_per_class: usize,
    pub cross_snr_db: (f64, f64),
    pub cross_duration_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_siren: 400,
            n_noise: 400,
            snr_db: (0.0, 15.0),
            duration_s: 3.0,
            cross_per_class: 40,
            cross_snr_db: (-5.0, 10.0),
            cross_duration_s: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Training corpus manifest; defaults to the synthesized one.
    pub train_manifest: Option<PathBuf>,
    /// Cross-domain test corpus manifest; defaults to the synthesized one
    /// when present.
    pub cross_manifest: Option<PathBuf>,
    pub anf: AnfConfig,
    pub power: PowerConfig,
    pub train: TrainConfig,
    /// Training-set percentages, ascending, ending at 100.
    pub ratios: Vec<f64>,
    pub n_folds: usize,
    pub val_test: [f64; 2],
    pub seed: u64,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("run"),
            train_manifest: None,
            cross_manifest: None,
            anf: AnfConfig::default(),
            power: PowerConfig::default(),
            train: TrainConfig::default(),
            ratios: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 100.0],
            n_folds: 10,
            val_test: [0.1, 0.1],
            seed: 0,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.anf.validate()?;
        self.power.validate()?;
        self.train.validate()?;
        if self.anf.sample_rate_hz.fract() != 0.0 {
            return Err(Error::Config("sample rate must be a whole number of Hz".into()));
        }
        if self.ratios.is_empty() || self.ratios.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("ratios must be strictly ascending".into()));
        }
        if self.n_folds == 0 {
            return Err(Error::Config("n_folds must be positive".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout {
            root: self.out_dir.clone(),
        }
    }

    fn manifest_for(&self, domain: Domain) -> Option<PathBuf> {
        let explicit = match domain {
            Domain::In => &self.train_manifest,
            Domain::Cross => &self.cross_manifest,
        };
        match explicit {
            Some(p) => Some(p.clone()),
            None => {
                let p = self.layout().synth_manifest(domain);
                (domain == Domain::In || p.exists()).then_some(p)
            }
        }
    }

    fn sample_rate(&self) -> u32 {
        self.anf.sample_rate_hz as u32
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn synth_dir(&self, d: Domain) -> PathBuf {
        self.root.join("synth").join(d.as_str())
    }
    pub fn synth_manifest(&self, d: Domain) -> PathBuf {
        self.root.join("synth").join(format!("{}.tsv", d.as_str()))
    }
    pub fn features(&self, d: Domain) -> PathBuf {
        self.root.join("features").join(d.as_str())
    }
    pub fn ingest_report(&self, d: Domain) -> PathBuf {
        self.reports().join(format!("ingest_{}.json", d.as_str()))
    }
    pub fn splits(&self) -> PathBuf {
        self.root.join("splits.json")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn model(&self) -> PathBuf {
        self.checkpoints().join("model.anfc")
    }
    pub fn sweep_checkpoint(&self, ratio_index: usize, fold: usize) -> PathBuf {
        self.checkpoints().join(format!("r{ratio_index:02}_f{fold:02}.anfc"))
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.csv")
    }
    pub fn aggregate(&self) -> PathBuf {
        self.root.join("aggregate.csv")
    }
    pub fn plot(&self) -> PathBuf {
        self.root.join("f1_vs_ratio.svg")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
    pub out: Option<PathBuf>,
}

impl Options {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Process exit status: 2 for bad input or usage, 1 for internal failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Shape { .. } | Error::NonFinite { .. } | Error::UndefinedMetric(_) => 1,
        Error::Io(e) if e.kind() != std::io::ErrorKind::NotFound => 1,
        _ => 2,
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SynthOutcome {
    pub written: usize,
    pub existing: usize,
}

/// Renders the synthetic training corpus (and cross corpus, if enabled) as
/// WAV files plus manifests.
pub fn cmd_synth(cfg: &RunConfig, force: bool) -> Result<SynthOutcome> {
    let layout = cfg.layout();
    let s = &cfg.synth;
    let mut outcome = SynthOutcome::default();
    let corpora = [
        (Domain::In, s.n_siren, s.n_noise, s.snr_db, s.duration_s, cfg.seed),
        (
            Domain::Cross,
            s.cross_per_class,
            s.cross_per_class,
            s.cross_snr_db,
            s.cross_duration_s,
            cfg.seed.wrapping_add(1),
        ),
    ];
    for (domain, n_siren, n_noise, snr, duration, seed) in corpora {
        if n_siren + n_noise == 0 {
            continue;
        }
        let dir = layout.synth_dir(domain);
        ensure_dir(&dir)?;
        let items = dataset::synth_corpus(n_siren, n_noise, snr, duration, seed)?;
        let mut entries = Vec::with_capacity(items.len());
        for item in items {
            let path = dir.join(format!("{}.wav", item.source_id));
            if force || !path.exists() {
                let resampled = audio::resample(&item.audio, cfg.sample_rate())?;
                audio::write_wav(&path, &resampled)?;
                outcome.written += 1;
            } else {
                outcome.existing += 1;
            }
            entries.push(ManifestEntry {
                source_id: item.source_id,
                path,
                label: item.label,
                duration_s: duration,
            });
        }
        Manifest::new(domain.as_str(), entries)?.save(layout.synth_manifest(domain))?;
    }
    Ok(outcome)
}

/// Ingests the training manifest (first window per file) and the cross
/// manifest (all non-overlapping windows) into feature stores.
pub fn cmd_extract(cfg: &RunConfig, force: bool) -> Result<Vec<(Domain, IngestReport)>> {
    let layout = cfg.layout();
    ensure_dir(&layout.reports())?;
    let mut out = Vec::new();
    for domain in [Domain::In, Domain::Cross] {
        let Some(path) = cfg.manifest_for(domain) else {
            continue;
        };
        let manifest = Manifest::load(&path)?;
        if manifest.is_empty() {
            return Err(Error::Manifest("manifest contains no entries".into()));
        }
        let mut policy = match domain {
            Domain::In => IngestPolicy::train_corpus(),
            Domain::Cross => IngestPolicy::cross_corpus(),
        };
        policy.target_hz = cfg.sample_rate();
        let report = dataset::ingest(
            &manifest,
            &cfg.anf,
            &cfg.power,
            &policy,
            &layout.features(domain),
            force,
        )?;
        report.save(layout.ingest_report(domain))?;
        out.push((domain, report));
    }
    Ok(out)
}

/// Plans the train/validation/test partition and nested folds over the
/// training entries that have features.
pub fn cmd_split(cfg: &RunConfig, force: bool) -> Result<SplitPlan> {
    let layout = cfg.layout();
    let path = layout.splits();
    if path.exists() && !force {
        return SplitPlan::load(&path);
    }
    let manifest_path = cfg
        .manifest_for(Domain::In)
        .ok_or_else(|| Error::Usage("no training manifest".into()))?;
    let manifest = Manifest::load(manifest_path)?;
    let store = layout.features(Domain::In);
    let usable = Manifest {
        name: manifest.name.clone(),
        entries: manifest
            .entries
            .into_iter()
            .filter(|e| dataset::feature_path(&store, &e.source_id).exists())
            .collect(),
    };
    if usable.is_empty() {
        return Err(Error::Usage("no extracted features; run `extract` first".into()));
    }
    let plan = dataset::make_splits(&usable, &cfg.ratios, cfg.n_folds, cfg.val_test, cfg.seed)?;
    plan.save(&path)?;
    Ok(plan)
}

fn load_plan(cfg: &RunConfig) -> Result<SplitPlan> {
    let path = cfg.layout().splits();
    if !path.exists() {
        return Err(Error::Usage("missing split plan; run `split` first".into()));
    }
    SplitPlan::load(path)
}

/// Scores `clips` with the checkpoint.
pub fn evaluate(checkpoint: &Checkpoint, clips: &[FeatureClip]) -> Result<EvalReport> {
    let net = checkpoint.network()?;
    let mut pairs = Vec::with_capacity(clips.len());
    for clip in clips {
        let label = clip
            .label
            .ok_or_else(|| Error::Usage(format!("test clip '{}' has no label", clip.source_id)))?;
        let p = net.predict_proba(&nn::clip_tensor(clip))?;
        pairs.push((f64::from(p), label.is_positive()));
    }
    EvalReport::from_scored(&ScoredSet::new(pairs)?)
}

/// Labelled test sets per domain: the held-out split, and the whole cross
/// store when one exists.
fn test_sets(
    cfg: &RunConfig,
    plan: &SplitPlan,
    train_store: &BTreeMap<String, FeatureClip>,
) -> Result<Vec<(Domain, Vec<FeatureClip>)>> {
    let mut sets = vec![(Domain::In, dataset::select(train_store, &plan.test)?)];
    let cross = cfg.layout().features(Domain::Cross);
    if cross.is_dir() {
        let clips: Vec<FeatureClip> = dataset::load_store(&cross)?.into_values().collect();
        if !clips.is_empty() {
            sets.push((Domain::Cross, clips));
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub best_epoch: usize,
    pub val_loss: f64,
    pub reused: bool,
}

/// Trains one model on the full training split.
pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<TrainSummary> {
    let layout = cfg.layout();
    let path = layout.model();
    if path.exists() && !force {
        let ck = Checkpoint::load(&path)?;
        return Ok(TrainSummary {
            checkpoint: path,
            best_epoch: ck.epoch as usize,
            val_loss: ck.val_loss,
            reused: true,
        });
    }
    let plan = load_plan(cfg)?;
    let store = dataset::load_store(&layout.features(Domain::In))?;
    let train = dataset::select(&store, &plan.train)?;
    let val = dataset::select(&store, &plan.validation)?;
    let tc = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let outcome = nn::train(&train, &val, &tc)?;
    ensure_dir(&layout.checkpoints())?;
    outcome.checkpoint.save(&path)?;
    ensure_dir(&layout.reports())?;
    fs::write(
        layout.reports().join("model_history.json"),
        serde_json::to_string_pretty(&outcome.history)?,
    )?;
    Ok(TrainSummary {
        checkpoint: path,
        best_epoch: outcome.best_epoch,
        val_loss: outcome.checkpoint.val_loss,
        reused: false,
    })
}

/// Evaluates a checkpoint (the single trained model by default) on every
/// test domain.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Vec<(Domain, EvalReport)>> {
    let layout = cfg.layout();
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| layout.model());
    if !path.exists() {
        return Err(Error::Usage(format!(
            "checkpoint {} not found; run `train` first",
            path.display()
        )));
    }
    let ck = Checkpoint::load(&path)?;
    let plan = load_plan(cfg)?;
    let store = dataset::load_store(&layout.features(Domain::In))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
    ensure_dir(&layout.reports())?;
    let mut out = Vec::new();
    for (domain, clips) in test_sets(cfg, &plan, &store)? {
        let report = evaluate(&ck, &clips)?;
        fs::write(
            layout.reports().join(format!("eval_{stem}_{}.json", domain.as_str())),
            serde_json::to_string_pretty(&report)?,
        )?;
        out.push((domain, report));
    }
    Ok(out)
}

/// One line of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub ratio: f64,
    pub fold: usize,
    pub f1: f64,
    pub auprc: f64,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub ratio: f64,
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SummaryRow>,
    pub trained: usize,
    pub reused: usize,
    pub failures: Vec<RunFailure>,
}

/// Seed of the run at `ratio_index`, `fold`.
pub fn run_seed(seed: u64, ratio_index: usize, fold: usize) -> u64 {
    seed.wrapping_add(1000 * ratio_index as u64).wrapping_add(fold as u64)
}

/// Trains every ratio and fold of the split plan in order, evaluates each
/// model on the test domains and writes the summary CSV. A failed run is
/// recorded and the sweep moves on.
pub fn cmd_sweep(cfg: &RunConfig, force: bool) -> Result<SweepOutcome> {
    let layout = cfg.layout();
    let plan = load_plan(cfg)?;
    let store = dataset::load_store(&layout.features(Domain::In))?;
    let val = dataset::select(&store, &plan.validation)?;
    let tests = test_sets(cfg, &plan, &store)?;
    ensure_dir(&layout.checkpoints())?;
    let report_dir = layout.reports().join("sweep");
    ensure_dir(&report_dir)?;

    let mut out = SweepOutcome::default();
    for (ri, split) in plan.ratios.iter().enumerate() {
        for (fold, ids) in split.folds.iter().enumerate() {
            let path = layout.sweep_checkpoint(ri, fold);
            let run = || -> Result<(Checkpoint, bool)> {
                if path.exists() && !force {
                    return Ok((Checkpoint::load(&path)?, true));
                }
                let train = dataset::select(&store, ids)?;
                let tc = TrainConfig {
                    seed: run_seed(cfg.seed, ri, fold),
                    ..cfg.train.clone()
                };
                let outcome = nn::train(&train, &val, &tc)?;
                outcome.checkpoint.save(&path)?;
                Ok((outcome.checkpoint, false))
            };
            let result = run().and_then(|(ck, reused)| {
                let mut rows = Vec::new();
                for (domain, clips) in &tests {
                    let report = evaluate(&ck, clips)?;
                    fs::write(
                        report_dir.join(format!("r{ri:02}_f{fold:02}_{}.json", domain.as_str())),
                        serde_json::to_string_pretty(&report)?,
                    )?;
                    rows.push(SummaryRow {
                        ratio: split.ratio,
                        fold,
                        f1: report.f1,
                        auprc: report.auprc,
                        domain: *domain,
                    });
                }
                Ok((rows, reused))
            });
            match result {
                Ok((rows, reused)) => {
                    if reused {
                        out.reused += 1;
                    } else {
                        out.trained += 1;
                    }
                    out.rows.extend(rows);
                }
                Err(e) => out.failures.push(RunFailure {
                    ratio: split.ratio,
                    fold,
                    error: e.to_string(),
                }),
            }
        }
    }
    write_summary(&layout.summary(), &out.rows)?;
    fs::write(
        layout.reports().join("sweep_failures.json"),
        serde_json::to_string_pretty(&out.failures)?,
    )?;
    Ok(out)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    for row in rows {
        w.serialize(row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Csv {
            row: 0,
            msg: format!("{other:?}"),
        },
    }
}

/// Parses a summary CSV; errors name the 1-based line.
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_io)?;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<SummaryRow>().enumerate() {
        let row = rec.map_err(|e| Error::Csv {
            row: e.position().map_or(i as u64 + 2, |p| p.line()),
            msg: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                other => format!("{other:?}"),
            },
        })?;
        if !(row.ratio > 0.0 && row.f1.is_finite() && row.auprc.is_finite()) {
            return Err(Error::Csv {
                row: i as u64 + 2,
                msg: "ratio must be positive and metrics finite".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Mean and spread of one ratio in one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub domain: Domain,
    pub ratio: f64,
    pub folds: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub auprc_mean: f64,
    pub auprc_std: f64,
}

/// Groups summary rows by domain and ratio (ascending).
pub fn aggregate_rows(rows: &[SummaryRow]) -> Result<Vec<AggregateRow>> {
    let mut groups: BTreeMap<(Domain, u64), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.domain, r.ratio.to_bits())).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((domain, _), g) in groups {
        let f1: MeanStd = metrics::mean_std(&g.iter().map(|r| r.f1).collect::<Vec<_>>())?;
        let ap: MeanStd = metrics::mean_std(&g.iter().map(|r| r.auprc).collect::<Vec<_>>())?;
        out.push(AggregateRow {
            domain,
            ratio: g[0].ratio,
            folds: g.len(),
            f1_mean: f1.mean,
            f1_std: f1.std,
            auprc_mean: ap.mean,
            auprc_std: ap.std,
        });
    }
    out.sort_by(|a, b| a.domain.cmp(&b.domain).then(a.ratio.total_cmp(&b.ratio)));
    Ok(out)
}

/// F1 against training-set percentage on a log axis, one line per domain
/// with a shaded one-standard-deviation band.
pub fn render_svg(agg: &[AggregateRow]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 150.0;
    const T: f64 = 30.0;
    const B: f64 = 60.0;
    let (pw, ph) = (W - L - R, H - T - B);

    let ratios: Vec<f64> = agg.iter().map(|a| a.ratio).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
    let hi = if hi <= lo { lo + 1.0 } else { hi };
    let x = |r: f64| L + (r.log10() - lo) / (hi - lo) * pw;
    let y = |v: f64| T + (1.0 - v.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{L}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            L + pw,
            y(v),
            y(v),
            L - 6.0,
            y(v) + 4.0
        );
    }
    let mut decade = lo;
    while decade <= hi + 1e-9 {
        let r = 10f64.powf(decade);
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" x2="{0:.1}" y1="{T}" y2="{1:.1}" stroke="#ddd"/><text x="{0:.1}" y="{2:.1}" text-anchor="middle">{3}%</text>"##,
            x(r),
            T + ph,
            T + ph + 18.0,
            r
        );
        decade += 1.0;
    }
    let _ = writeln!(
        s,
        r#"<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">training data (% of full set)</text>"#,
        L + pw / 2.0,
        H - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">F1</text>"#,
        T + ph / 2.0
    );

    for (k, domain) in [Domain::In, Domain::Cross].into_iter().enumerate() {
        let pts: Vec<&AggregateRow> = agg.iter().filter(|a| a.domain == domain).collect();
        if pts.is_empty() {
            continue;
        }
        let color = ["#1f77b4", "#d62728"][k];
        let mut band = String::new();
        for p in &pts {
            let _ = write!(band, "{:.2},{:.2} ", x(p.ratio), y(p.f1_mean + p.f1_std));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", x(p.ratio), y(p.f1_mean - p.f1_std));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.ratio), y(p.f1_mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        for p in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                x(p.ratio),
                y(p.f1_mean)
            );
        }
        let ly = T + 20.0 + 22.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" x2="{1:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{2:.1}" y="{3:.1}">{4}</text>"#,
            L + pw + 15.0,
            L + pw + 40.0,
            L + pw + 46.0,
            ly + 4.0,
            match domain {
                Domain::In => "in-domain",
                Domain::Cross => "cross-domain",
            }
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Aggregates a summary CSV into a table and an SVG plot.
pub fn cmd_plot(cfg: &RunConfig, summary: Option<&Path>) -> Result<Vec<AggregateRow>> {
    let layout = cfg.layout();
    let path = summary.map(Path::to_path_buf).unwrap_or_else(|| layout.summary());
    if !path.exists() {
        return Err(Error::Usage(format!(
            "summary {} not found; run `sweep` first",
            path.display()
        )));
    }
    let rows = read_summary(&path)?;
    if rows.is_empty() {
        return Err(Error::Csv {
            row: 1,
            msg: "summary has no data rows".into(),
        });
    }
    let agg = aggregate_rows(&rows)?;
    ensure_dir(&layout.root)?;
    let mut w = csv::Writer::from_path(layout.aggregate()).map_err(csv_io)?;
    for a in &agg {
        w.serialize(a).map_err(csv_io)?;
    }
    w.flush()?;
    fs::write(layout.plot(), render_svg(&agg))?;
    Ok(agg)
}

#[derive(Debug, Clone)]
pub enum Command {
    Synth,
    Extract,
    Split,
    Train,
    Eval { checkpoint: Option<PathBuf> },
    Sweep,
    Plot { summary: Option<PathBuf> },
}

/// Runs one subcommand and returns a human-readable summary.
pub fn run(cmd: &Command, opts: &Options) -> Result<String> {
    let cfg = opts.resolve()?;
    let force = opts.force;
    Ok(match cmd {
        Command::Synth => {
            let o = cmd_synth(&cfg, force)?;
            format!("synth: {} files written, {} already present", o.written, o.existing)
        }
        Command::Extract => {
            let mut msg = String::new();
            for (d, r) in cmd_extract(&cfg, force)? {
                let _ = writeln!(
                    msg,
                    "extract[{}]: {} files, {} clips ({} written, {} unchanged), {} padded, {} skipped",
                    d.as_str(),
                    r.files,
                    r.clips,
                    r.written,
                    r.unchanged,
                    r.padded.len(),
                    r.skipped.len()
                );
                for s in &r.skipped {
                    let _ = writeln!(msg, "  skipped {}: {}", s.path.display(), s.error);
                }
            }
            msg.trim_end().to_string()
        }
        Command::Split => {
            let p = cmd_split(&cfg, force)?;
            let mut msg = format!(
                "split: {} train, {} validation, {} test; subset sizes {:?}",
                p.train.len(),
                p.validation.len(),
                p.test.len(),
                p.ratios.iter().map(|r| r.size).collect::<Vec<_>>()
            );
            for w in &p.warnings {
                let _ = write!(msg, "\n  warning: {w}");
            }
            msg
        }
        Command::Train => {
            let t = cmd_train(&cfg, force)?;
            format!(
                "train: {} (best epoch {}, validation loss {:.4}{})",
                t.checkpoint.display(),
                t.best_epoch,
                t.val_loss,
                if t.reused { ", reused" } else { "" }
            )
        }
        Command::Eval { checkpoint } => cmd_eval(&cfg, checkpoint.as_deref())?
            .iter()
            .map(|(d, r)| format!("eval[{}]: n={} F1={:.4} AUPRC={:.4}", d.as_str(), r.n, r.f1, r.auprc))
            .collect::<Vec<_>>()
            .join("\n"),
        Command::Sweep => {
            let o = cmd_sweep(&cfg, force)?;
            let mut msg = format!(
                "sweep: {} runs trained, {} reused, {} failed, {} summary rows",
                o.trained,
                o.reused,
                o.failures.len(),
                o.rows.len()
            );
            for f in &o.failures {
                let _ = write!(msg, "\n  failed ratio {} fold {}: {}", f.ratio, f.fold, f.error);
            }
            msg
        }
        Command::Plot { summary } => {
            let agg = cmd_plot(&cfg, summary.as_deref())?;
            let mut msg = format!("plot: {}", cfg.layout().plot().display());
            for a in agg {
                let _ = write!(
                    msg,
                    "\n  {:>5} {:>7}%  F1 {:.4} ± {:.4}  AUPRC {:.4} ± {:.4}",
                    a.domain.as_str(),
                    a.ratio,
                    a.f1_mean,
                    a.f1_std,
                    a.auprc_mean,
                    a.auprc_std
                );
            }
            msg
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        RunConfig::default().save(&p).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap(), RunConfig::default());
        fs::write(&p, r#"{"anf": {"rho": 0.95}, "seed": 4}"#).unwrap();
        let c = RunConfig::load(&p).unwrap();
        assert_eq!(c.anf.rho, 0.95);
        assert_eq!(c.anf.sigma_e, 0.66);
        assert_eq!(c.seed, 4);
        fs::write(&p, r#"{"anf": {"rho": 1.5}}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
        fs::write(&p, r#"{"bogus": 1}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_apply() {
        let opts = Options {
            seed: Some(9),
            out: Some(PathBuf::from("elsewhere")),
            ..Options::default()
        };
        let c = opts.resolve().unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn sweep_seeds() {
        assert_eq!(run_seed(7, 0, 0), 7);
        assert_eq!(run_seed(7, 2, 3), 2010);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Usage("x".into())), 2);
        assert_eq!(exit_code(&Error::Manifest("x".into())), 2);
        assert_eq!(exit_code(&Error::UndefinedMetric("x".into())), 1);
    }

    fn row(ratio: f64, fold: usize, f1: f64, domain: Domain) -> SummaryRow {
        SummaryRow {
            ratio,
            fold,
            f1,
            auprc: f1,
            domain,
        }
    }

    #[test]
    fn summary_round_trip_and_aggregate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let rows = vec![
            row(1.0, 0, 0.5, Domain::In),
            row(1.0, 1, 0.7, Domain::In),
            row(100.0, 0, 0.9, Domain::In),
            row(1.0, 0, 0.4, Domain::Cross),
        ];
        write_summary(&p, &rows).unwrap();
        assert!(fs::read_to_string(&p)
            .unwrap()
            .starts_with("ratio,fold,f1,auprc,domain\n"));
        assert_eq!(read_summary(&p).unwrap(), rows);
        let agg = aggregate_rows(&rows).unwrap();
        assert_eq!(agg.len(), 3);
        assert_eq!(agg[0].folds, 2);
        assert!((agg[0].f1_mean - 0.6).abs() < 1e-12);
        assert!((agg[0].f1_std - 0.1).abs() < 1e-12);
        assert_eq!(agg[2].domain, Domain::Cross);
        assert_eq!(agg[2].f1_std, 0.0);
    }

    #[test]
    fn malformed_summary_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "ratio,fold,f1,auprc,domain\n1,0,0.5,0.5,in\n1,x,0.5,0.5,in\n").unwrap();
        match read_summary(&p) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "ratio,fold,f1,auprc,domain\n1,0,0.5,0.5,sideways\n").unwrap();
        assert!(matches!(read_summary(&p), Err(Error::Csv { row: 2, .. })));
    }

    #[test]
    fn svg_has_one_curve_per_domain() {
        let mut rows = Vec::new();
        for (i, r) in [0.25, 1.0, 10.0, 100.0].into_iter().enumerate() {
            for fold in 0..3 {
                rows.push(row(r, fold, 0.5 + 0.1 * i as f64, Domain::In));
                rows.push(row(r, fold, 0.3 + 0.1 * i as f64, Domain::Cross));
            }
        }
        let svg = render_svg(&aggregate_rows(&rows).unwrap());
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 8);
    }
}
