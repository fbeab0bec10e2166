use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sirentrack::anf::AnfConfig;
use sirentrack::audio::{write_wav, AudioBuffer};
use sirentrack::dataset::{
    class_counts, ingest, load_store, make_splits, synth_clip, IngestPolicy, Manifest, ManifestEntry, SynthSpec,
};
use sirentrack::features::{extract_features, read_features, Label, PowerConfig};

fn tone_wav(path: &Path, seconds: f64, rate: u32) {
    let n = (seconds * f64::from(rate)) as usize;
    let samples = (0..n)
        .map(|i| 0.5 * (2.0 * std::f32::consts::PI * 900.0 * i as f32 / rate as f32).sin())
        .collect();
    write_wav(path, &AudioBuffer::new(samples, rate)).unwrap();
}

fn entry(dir: &Path, name: &str, label: Label, duration_s: f64) -> ManifestEntry {
    ManifestEntry {
        source_id: name.into(),
        path: dir.join(format!("{name}.wav")),
        label,
        duration_s,
    }
}

fn ingest_one(dir: &Path, seconds: f64, policy: IngestPolicy) -> sirentrack::dataset::IngestReport {
    tone_wav(&dir.join("a.wav"), seconds, 44_100);
    let m = Manifest::new("m", vec![entry(dir, "a", Label::Siren, seconds)]).unwrap();
    ingest(
        &m,
        &AnfConfig::default(),
        &PowerConfig::default(),
        &policy,
        &dir.join("store"),
        false,
    )
    .unwrap()
}

#[test]
fn three_second_training_file_gives_one_clip() {
    let dir = tempfile::tempdir().unwrap();
    let r = ingest_one(dir.path(), 3.0, IngestPolicy::train_corpus());
    assert_eq!((r.files, r.clips, r.skipped.len()), (1, 1, 0));
    let clip = read_features(dir.path().join("store/a.anff")).unwrap();
    assert_eq!(clip.len(), 6399);
    assert_eq!(clip.label, Some(Label::Siren));
}

#[test]
fn seven_second_cross_file_gives_three_clips() {
    let dir = tempfile::tempdir().unwrap();
    let r = ingest_one(dir.path(), 7.0, IngestPolicy::cross_corpus());
    assert_eq!(r.clips, 3);
    let store = load_store(&dir.path().join("store")).unwrap();
    let ids: Vec<&String> = store.keys().collect();
    assert_eq!(ids, ["a__000", "a__001", "a__002"]);
    assert!(store.values().all(|c| c.len() == 6399));
}

#[test]
fn short_file_is_padded_and_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let r = ingest_one(dir.path(), 1.2, IngestPolicy::train_corpus());
    assert_eq!(r.clips, 1);
    assert_eq!(r.padded, vec!["a".to_string()]);
    let strict = IngestPolicy {
        pad_short: false,
        ..IngestPolicy::train_corpus()
    };
    let dir = tempfile::tempdir().unwrap();
    let r = ingest_one(dir.path(), 1.2, strict);
    assert_eq!((r.clips, r.skipped.len()), (0, 1));
}

#[test]
fn one_unreadable_file_among_ten_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = Vec::new();
    for i in 0..10 {
        let name = format!("f{i}");
        if i == 6 {
            fs::write(dir.path().join("f6.wav"), b"RIFF garbage").unwrap();
        } else {
            tone_wav(&dir.path().join(format!("{name}.wav")), 2.5, 16_000);
        }
        entries.push(entry(dir.path(), &name, Label::Noise, 2.5));
    }
    let m = Manifest::new("m", entries).unwrap();
    let policy = IngestPolicy::train_corpus();
    let store = dir.path().join("store");
    let r = ingest(
        &m,
        &AnfConfig::default(),
        &PowerConfig::default(),
        &policy,
        &store,
        false,
    )
    .unwrap();
    assert_eq!((r.files, r.clips, r.written), (10, 9, 9));
    assert_eq!(r.skipped.len(), 1);
    assert_eq!(r.skipped[0].source_id, "f6");

    // second pass leaves the bytes alone
    let before = fs::read(store.join("f0.anff")).unwrap();
    let again = ingest(
        &m,
        &AnfConfig::default(),
        &PowerConfig::default(),
        &policy,
        &store,
        false,
    )
    .unwrap();
    assert_eq!((again.written, again.unchanged), (0, 9));
    assert_eq!(fs::read(store.join("f0.anff")).unwrap(), before);
}

#[test]
fn synthetic_sirens_carry_more_tonal_power_than_noise() {
    let cfg = AnfConfig::default();
    let power = PowerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut wins = 0;
    for _ in 0..100 {
        let mean_ratio = |label: Label, rng: &mut ChaCha8Rng| {
            let spec = SynthSpec::random(label, (5.0, 15.0), 2.0, rng);
            let (audio, got) = synth_clip(&spec).unwrap();
            assert_eq!(got, label);
            let clip = extract_features(&audio.samples, &cfg, &power).unwrap();
            clip.p_ratio.iter().map(|&v| f64::from(v)).sum::<f64>() / clip.len() as f64
        };
        if mean_ratio(Label::Siren, &mut rng) > mean_ratio(Label::Noise, &mut rng) {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins} of 100 pairs");
}

#[test]
fn synthesis_is_reproducible() {
    let spec = SynthSpec::random(Label::Siren, (0.0, 15.0), 2.0, &mut ChaCha8Rng::seed_from_u64(4));
    let a = synth_clip(&spec).unwrap().0;
    let b = synth_clip(&spec).unwrap().0;
    assert!(a
        .samples
        .iter()
        .zip(&b.samples)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

fn synthetic_manifest(n_siren: usize, n_noise: usize) -> Manifest {
    let entries = (0..n_siren + n_noise)
        .map(|i| ManifestEntry {
            source_id: format!("c{i:04}"),
            path: format!("c{i:04}.wav").into(),
            label: if i < n_siren { Label::Siren } else { Label::Noise },
            duration_s: 2.0,
        })
        .collect();
    Manifest::new("m", entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_plans_nest_stratify_and_reproduce(
        n_siren in 10usize..120,
        n_noise in 10usize..120,
        seed in 0u64..1000,
    ) {
        let m = synthetic_manifest(n_siren, n_noise);
        let ratios = [1.0, 5.0, 25.0, 60.0, 100.0];
        let plan = make_splits(&m, &ratios, 4, [0.1, 0.1], seed).unwrap();
        prop_assert_eq!(&plan, &make_splits(&m, &ratios, 4, [0.1, 0.1], seed).unwrap());

        let labels: HashMap<String, Label> = m.entries.iter().map(|e| (e.source_id.clone(), e.label)).collect();
        let train: HashSet<&String> = plan.train.iter().collect();
        let held: HashSet<&String> = plan.validation.iter().chain(&plan.test).collect();
        prop_assert!(train.is_disjoint(&held));
        prop_assert_eq!(train.len() + held.len(), m.len());

        let full = class_counts(&plan.train, &labels);
        let full_frac = full[&Label::Siren] as f64 / plan.train.len() as f64;
        for fold in 0..4 {
            for w in plan.ratios.windows(2) {
                let (small, big) = (&w[0].folds[fold], &w[1].folds[fold]);
                prop_assert!(small.len() <= big.len());
                let big_set: HashSet<&String> = big.iter().collect();
                prop_assert!(small.iter().all(|id| big_set.contains(id)));
            }
            for r in &plan.ratios {
                let ids = &r.folds[fold];
                prop_assert!(ids.iter().all(|id| train.contains(id)));
                let c = class_counts(ids, &labels);
                prop_assert_eq!(c.len(), 2, "both classes present");
                let frac = c[&Label::Siren] as f64 / ids.len() as f64;
                prop_assert!((frac - full_frac).abs() <= 1.0 / ids.len() as f64 + 1e-12);
            }
            prop_assert_eq!(plan.ratios.last().unwrap().folds[fold].len(), plan.train.len());
        }
    }
}

// ---- command-line runs ----

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sirentrack"))
}

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = bin()
        .args([
            "--config",
            dir.join("cfg.json").to_str().unwrap(),
            "--out",
            dir.join("run").to_str().unwrap(),
        ])
        .args(args)
        .output()
        .unwrap();
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    (out.status.code().unwrap_or(-1), text)
}

fn small_config(dir: &Path, extra: &str) {
    fs::write(
        dir.join("cfg.json"),
        format!(
            r#"{{"synth": {{"n_siren": 16, "n_noise": 16, "cross_per_class": 3}},
               "train": {{"epochs": 2}}, "ratios": [25, 100], "n_folds": 2, "seed": 9{extra}}}"#
        ),
    )
    .unwrap();
}

#[test]
fn empty_manifest_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.tsv"), "# nothing here\n").unwrap();
    let manifest = dir.path().join("empty.tsv");
    small_config(dir.path(), &format!(r#", "train_manifest": {:?}"#, manifest));
    let (code, text) = run(dir.path(), &["extract"]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("manifest contains no entries"), "{text}");
}

#[test]
fn sweep_without_split_plan_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), "");
    let (code, text) = run(dir.path(), &["sweep"]);
    assert_eq!(code, 2, "{text}");
}

#[test]
fn malformed_summary_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), "");
    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "ratio,fold,f1,auprc,domain\n50,0,0.9,0.95,in\n100,1,oops,0.9,in\n",
    )
    .unwrap();
    fs::create_dir_all(dir.path().join("run")).unwrap();
    let (code, text) = run(dir.path(), &["plot", "--summary", bad.to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("row 3"), "{text}");
}

#[test]
fn synthetic_end_to_end_run_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), "");
    let root = dir.path().join("run");
    for cmd in ["synth", "extract", "split", "train", "eval", "sweep", "plot"] {
        let (code, text) = run(dir.path(), &[cmd]);
        assert_eq!(code, 0, "{cmd}: {text}");
    }
    // 2 ratios x 2 folds x 2 domains
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 8);
    assert!(root.join("f1_vs_ratio.svg").exists());
    assert!(root.join("checkpoints/r01_f01.anfc").exists());

    let model = fs::read(root.join("checkpoints/model.anfc")).unwrap();
    let feature = fs::read(root.join("features/in/siren_00000.anff")).unwrap();
    let (_, text) = run(dir.path(), &["extract"]);
    assert!(text.contains("0 written"), "{text}");
    let (_, text) = run(dir.path(), &["sweep"]);
    assert!(text.contains("0 runs trained, 4 reused"), "{text}");
    run(dir.path(), &["train"]);
    assert_eq!(fs::read(root.join("checkpoints/model.anfc")).unwrap(), model);
    assert_eq!(fs::read(root.join("features/in/siren_00000.anff")).unwrap(), feature);
    assert_eq!(fs::read_to_string(root.join("summary.csv")).unwrap(), summary);

    // forcing retrains from the same seed and lands on the same bytes
    let (code, _) = run(dir.path(), &["--force", "train"]);
    assert_eq!(code, 0);
    assert_eq!(fs::read(root.join("checkpoints/model.anfc")).unwrap(), model);
}

#[test]
fn minimal_sweep_trains_one_model_per_fold() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"synth": {"n_siren": 12, "n_noise": 12, "cross_per_class": 0},
            "train": {"epochs": 1}, "ratios": [100], "n_folds": 1, "seed": 3}"#,
    )
    .unwrap();
    for cmd in ["synth", "extract", "split", "sweep"] {
        let (code, text) = run(dir.path(), &[cmd]);
        assert_eq!(code, 0, "{cmd}: {text}");
    }
    let root = dir.path().join("run");
    let ckpts: Vec<_> = fs::read_dir(root.join("checkpoints")).unwrap().collect();
    assert_eq!(ckpts.len(), 1);
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2, "{summary}");
    let reports: Vec<_> = fs::read_dir(root.join("reports/sweep")).unwrap().collect();
    assert_eq!(reports.len(), 1);
}
