//! Renders a small labelled corpus of synthetic sirens and noise to WAV
//! files plus a manifest.
//!
//!     cargo run --example synth_dataset -- [out_dir]

use std::path::PathBuf;

use sirentrack::audio::write_wav;
use sirentrack::dataset::{synth_corpus, Manifest, ManifestEntry};

fn main() -> sirentrack::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sirentrack-synth"));
    std::fs::create_dir_all(&dir)?;

    let items = synth_corpus(6, 6, (0.0, 15.0), 3.0, 42)?;
    let mut entries = Vec::new();
    for item in &items {
        let path = dir.join(format!("{}.wav", item.source_id));
        write_wav(&path, &item.audio)?;
        let band = if item.label.is_positive() {
            format!("{:.0}-{:.0} Hz", item.spec.f0_range.0, item.spec.f0_range.1)
        } else {
            String::new()
        };
        let kind = format!("{:?}", item.spec.kind);
        println!(
            "{:<12} {kind:<8} {band:<14} SNR {:5.1} dB",
            item.source_id, item.spec.snr_db
        );
        entries.push(ManifestEntry {
            source_id: item.source_id.clone(),
            path,
            label: item.label,
            duration_s: item.audio.duration_s(),
        });
    }
    let manifest = Manifest::new("synth", entries)?;
    let path = dir.join("synth.tsv");
    manifest.save(&path)?;
    println!("{} clips, manifest {}", manifest.len(), path.display());
    Ok(())
}
