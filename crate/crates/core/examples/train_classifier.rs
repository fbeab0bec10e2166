//! Trains the classifier on a small synthetic corpus and reports held-out
//! F1 and average precision.
//!
//!     cargo run --release --example train_classifier -- [clips_per_class] [epochs]

use sirentrack::anf::AnfConfig;
use sirentrack::dataset::{featurize, synth_corpus, IngestPolicy};
use sirentrack::features::{FeatureClip, PowerConfig};
use sirentrack::metrics::{EvalReport, ScoredSet};
use sirentrack::nn::{predict, train, NetworkSpec, TrainConfig};

fn main() -> sirentrack::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("integer argument"));
    let per_class = args.next().unwrap_or(60);
    let epochs = args.next().unwrap_or(40);

    let anf = AnfConfig::default();
    let power = PowerConfig::default();
    let policy = IngestPolicy::train_corpus();
    let mut clips: Vec<FeatureClip> = Vec::new();
    for item in synth_corpus(per_class, per_class, (0.0, 15.0), 2.0, 7)? {
        let (mut c, _) = featurize(&item.source_id, &item.audio, Some(item.label), &anf, &power, &policy)?;
        clips.append(&mut c);
    }
    // interleave classes, then 70/15/15
    let (sirens, noise): (Vec<_>, Vec<_>) = clips.into_iter().partition(|c| c.label.unwrap().is_positive());
    let mixed: Vec<FeatureClip> = sirens.into_iter().zip(noise).flat_map(|(a, b)| [a, b]).collect();
    let n = mixed.len();
    let (train_set, rest) = mixed.split_at(n * 70 / 100);
    let (val_set, test_set) = rest.split_at(rest.len() / 2);

    println!(
        "{} parameters, {} train / {} validation / {} test clips of {} frames",
        NetworkSpec::anfnet().param_count()?,
        train_set.len(),
        val_set.len(),
        test_set.len(),
        train_set[0].len()
    );
    let config = TrainConfig {
        epochs,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = train(train_set, val_set, &config)?;
    for h in outcome.history.iter().filter(|h| h.epoch % 10 == 0 || h.epoch == 1) {
        println!("epoch {:>4}  train {:.4}  val {:.4}", h.epoch, h.train_loss, h.val_loss);
    }
    println!("best epoch {}", outcome.best_epoch);

    let pairs = test_set
        .iter()
        .map(|c| {
            Ok((
                f64::from(predict(&outcome.checkpoint, c)?),
                c.label.unwrap().is_positive(),
            ))
        })
        .collect::<sirentrack::Result<Vec<_>>>()?;
    let report = EvalReport::from_scored(&ScoredSet::new(pairs)?)?;
    println!(
        "test F1 {:.4}  AUPRC {:.4}  {:?}",
        report.f1, report.auprc, report.confusion
    );
    Ok(())
}
