//! Streams a tone that jumps between frequencies through the tracker and
//! prints the estimate every 100 ms.
//!
//!     cargo run --example track_sinusoid

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sirentrack::anf::{AnfConfig, Tracker};

fn main() -> sirentrack::Result<()> {
    let cfg = AnfConfig::default();
    let fs = cfg.sample_rate_hz;
    let mut tracker = Tracker::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let plan = [(700.0, 1.5), (1400.0, 1.0), (950.0, 1.0)];
    let mut phase = 0.0f64;
    let mut t = 0.0;
    println!("{:>6}  {:>8}  {:>8}", "t [s]", "true", "tracked");
    for (freq, secs) in plan {
        let n = (secs * fs) as usize;
        for i in 0..n {
            phase += 2.0 * std::f64::consts::PI * freq / fs;
            let y = phase.sin() + 0.1 * rng.random_range(-1.0..1.0);
            let out = tracker.process(y)?;
            if i % (fs as usize / 10) == 0 {
                println!("{t:6.2}  {freq:8.1}  {:8.1}", out.f_hat);
            }
            t += 1.0 / fs;
        }
    }
    println!("final estimate {:.2} Hz", tracker.frequency());
    Ok(())
}
