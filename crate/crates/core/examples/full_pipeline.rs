//! The whole operator workflow in one process: synthesize, extract, split,
//! sweep over training-set ratios and plot F1 against data size.
//!
//!     cargo run --release --example full_pipeline -- [out_dir]
//!
//! Sizes are cut down so it finishes in a few minutes; the binary runs the
//! same steps from a JSON config.

use std::path::PathBuf;

use sirentrack::cli::{self, RunConfig, SynthConfig};
use sirentrack::nn::TrainConfig;

fn main() -> sirentrack::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sirentrack-pipeline"));
    let cfg = RunConfig {
        out_dir,
        ratios: vec![5.0, 25.0, 100.0],
        n_folds: 3,
        train: TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
        synth: SynthConfig {
            n_siren: 50,
            n_noise: 50,
            cross_per_class: 10,
            ..SynthConfig::default()
        },
        ..RunConfig::default()
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    cfg.save(cfg.out_dir.join("config.json"))?;

    let s = cli::cmd_synth(&cfg, false)?;
    println!("synth: {} written, {} reused", s.written, s.existing);
    for (domain, r) in cli::cmd_extract(&cfg, false)? {
        println!(
            "extract[{}]: {} files -> {} clips, {} skipped",
            domain.as_str(),
            r.files,
            r.clips,
            r.skipped.len()
        );
    }
    let plan = cli::cmd_split(&cfg, false)?;
    println!(
        "split: {} train, sizes {:?}",
        plan.train.len(),
        plan.ratios.iter().map(|r| r.size).collect::<Vec<_>>()
    );
    let sweep = cli::cmd_sweep(&cfg, false)?;
    println!(
        "sweep: {} trained, {} reused, {} failed",
        sweep.trained,
        sweep.reused,
        sweep.failures.len()
    );
    for a in cli::cmd_plot(&cfg, None)? {
        println!(
            "{:>5} {:>5}%  F1 {:.3} ± {:.3}  AUPRC {:.3} ± {:.3}",
            a.domain.as_str(),
            a.ratio,
            a.f1_mean,
            a.f1_std,
            a.auprc_mean,
            a.auprc_std
        );
    }
    println!("plot: {}", cfg.layout().plot().display());
    Ok(())
}
