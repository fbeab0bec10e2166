//! Turns a WAV file into the two feature channels and saves them.
//!
//!     cargo run --example extract_features -- input.wav out.anff
//!
//! Without arguments a synthetic yelp is used.

use sirentrack::anf::AnfConfig;
use sirentrack::audio::{decode_wav_file, AudioBuffer};
use sirentrack::dataset::{featurize, synth_clip, IngestPolicy, SynthKind, SynthSpec};
use sirentrack::features::{read_features, write_features, PowerConfig};

fn summary(name: &str, v: &[f32]) {
    let mean = v.iter().map(|&x| f64::from(x)).sum::<f64>() / v.len() as f64;
    let lo = v.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    println!("{name:>8}: mean {mean:.4}  min {lo:.4}  max {hi:.4}");
}

fn main() -> sirentrack::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (id, audio): (String, AudioBuffer) = match args.first() {
        Some(path) => ("input".into(), decode_wav_file(path)?),
        None => {
            let spec = SynthSpec {
                kind: SynthKind::Yelp,
                f0_range: (600.0, 1500.0),
                modulation_rate_hz: 3.0,
                snr_db: 10.0,
                duration_s: 3.0,
                sample_rate_hz: 44_100,
                seed: 1,
            };
            ("yelp".into(), synth_clip(&spec)?.0)
        }
    };
    println!(
        "{} samples at {} Hz ({:.2} s)",
        audio.len(),
        audio.sample_rate_hz,
        audio.duration_s()
    );

    // first two seconds, resampled to 16 kHz, padded if shorter
    let (clips, padded) = featurize(
        &id,
        &audio,
        None,
        &AnfConfig::default(),
        &PowerConfig::default(),
        &IngestPolicy::train_corpus(),
    )?;
    let clip = &clips[0];
    println!(
        "{} feature frames{}",
        clip.len(),
        if padded { " (input was padded)" } else { "" }
    );
    summary("f_norm", &clip.f_norm);
    summary("p_ratio", &clip.p_ratio);
    println!(
        "dominant frequency ~ {:.0} Hz",
        8000.0 * clip.f_norm[clip.len() / 2..].iter().sum::<f32>() / (clip.len() - clip.len() / 2) as f32
    );

    let out = args
        .get(1)
        .cloned()
        .unwrap_or_else(|| std::env::temp_dir().join("yelp.anff").display().to_string());
    write_features(clip, &out)?;
    assert_eq!(&read_features(&out)?, clip);
    println!("wrote {out}");
    Ok(())
}
