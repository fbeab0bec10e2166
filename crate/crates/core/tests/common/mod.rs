//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sirentrack::nn::{Layer, Network, Tensor1D};

pub fn tone(freq: f64, fs: f64, n: usize, amp: f64, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / fs + phase).sin())
        .collect()
}

pub fn to_f32(x: &[f64]) -> Vec<f32> {
    x.iter().map(|&v| v as f32).collect()
}

/// Frequency of the strongest spectral peak: Hann window, FFT, then a
/// parabola through the log magnitudes around the maximum bin.
pub fn fft_peak_hz(x: &[f64], fs: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm().max(1e-300).ln()).collect();
    let k = (1..n / 2 - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
    let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
    (k as f64 + delta) * fs / n as f64
}

/// Index of the largest-magnitude FFT bin (no windowing).
pub fn fft_peak_bin(x: &[f64]) -> usize {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..n / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap()
}

/// Average precision by enumerating every distinct score as a threshold and
/// counting the confusion matrix from scratch at each one.
pub fn brute_force_ap(pairs: &[(f64, bool)]) -> f64 {
    let total_pos = pairs.iter().filter(|p| p.1).count();
    if total_pos == 0 {
        return f64::NAN;
    }
    let mut thresholds: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = pairs.iter().filter(|p| p.0 >= t && p.1).count() as f64;
        let predicted = pairs.iter().filter(|p| p.0 >= t).count() as f64;
        let recall = tp / total_pos as f64;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    ap
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub passed: usize,
    /// Mismatches explained by a ReLU or max-pool switch inside the probe
    /// step: a fine step reproduces the analytic value.
    pub kinks: Vec<String>,
    pub failures: Vec<String>,
    pub worst: f64,
}

impl GradReport {
    /// Share within tolerance among all checked parameters.
    pub fn raw_fraction(&self) -> f64 {
        self.passed as f64 / self.checked.max(1) as f64
    }

    /// Share within tolerance once confirmed kinks are set aside.
    pub fn pass_fraction(&self) -> f64 {
        self.passed as f64 / (self.checked - self.kinks.len()).max(1) as f64
    }

    fn record(&mut self, what: String, analytic: f64, f: impl Fn(f64) -> f64, h: f64, tol: f64) {
        let numeric = (f(h) - f(-h)) / (2.0 * h);
        let rel = rel_err(analytic, numeric);
        self.checked += 1;
        if rel < tol {
            self.passed += 1;
            return;
        }
        self.worst = self.worst.max(rel);
        // a much smaller step that agrees with the analytic value means the
        // wide step straddled a ReLU or max-pool switch
        let hs = 1e-6;
        let fine = (f(hs) - f(-hs)) / (2.0 * hs);
        let msg = format!("{what}: analytic {analytic:.6e} numeric {numeric:.6e} (fine {fine:.6e}) rel {rel:.2e}");
        if rel_err(analytic, fine) < tol {
            self.kinks.push(msg);
        } else {
            self.failures.push(msg);
        }
    }
}

/// Relative error with a floor so gradients that are both essentially zero
/// compare as equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Parameters drawn from N(0, 0.1) (Box-Muller), as the gradient check
/// prescribes.
pub fn randomize_params(net: &mut Network<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for blob in net.params_mut() {
        for v in blob.iter_mut() {
            *v = normal(&mut rng, 0.1);
        }
    }
}

pub fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    std * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub fn random_input(channels: usize, len: usize, seed: u64) -> Tensor1D<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor1D::from_vec(
        channels,
        len,
        (0..channels * len).map(|_| rng.random::<f64>()).collect(),
    )
}

/// Central differences of the BCE loss against every network parameter.
pub fn check_network(net: &Network<f64>, x: &Tensor1D<f64>, target: f64, h: f64, tol: f64) -> GradReport {
    let pass = net.forward_eval(x).unwrap();
    let grads = net.backward(&pass, target).unwrap();
    let mut report = GradReport::default();
    for (b, blob) in grads.iter().enumerate() {
        for (i, &g) in blob.iter().enumerate() {
            let orig = net.params()[b][i];
            let loss_at = |d: f64| {
                let mut p = net.clone();
                p.params_mut()[b][i] = orig + d;
                let pass = p.infer(x).unwrap();
                Network::loss(&pass, target)
            };
            report.record(format!("blob {b} index {i}"), g, loss_at, h, tol);
        }
    }
    report
}

/// Central differences of `sum(c * layer(x))` against the layer's inputs and
/// parameters. `rng_seed` fixes the dropout mask across probes.
pub fn check_layer(layer: &Layer<f64>, x: &Tensor1D<f64>, rng_seed: Option<u64>, h: f64, tol: f64) -> GradReport {
    let run = |l: &Layer<f64>, x: &Tensor1D<f64>| {
        let mut rng = rng_seed.map(ChaCha8Rng::seed_from_u64);
        l.forward_tape(x, rng.as_mut()).unwrap()
    };
    let (y, tape) = run(layer, x);
    let mut crng = ChaCha8Rng::seed_from_u64(99);
    let c: Vec<f64> = (0..y.data().len()).map(|_| crng.random_range(-1.0..1.0)).collect();
    let objective = |y: &Tensor1D<f64>| y.data().iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let dy = Tensor1D::from_vec(y.channels(), y.len(), c.clone());
    let (dx, grads) = layer.backward_tape(&tape, &dy);

    let mut report = GradReport::default();
    for i in 0..x.data().len() {
        let f = |d: f64| {
            let mut xp = x.clone();
            xp.data_mut()[i] += d;
            objective(&run(layer, &xp).0)
        };
        report.record(format!("input {i}"), dx.data()[i], f, h, tol);
    }
    for (b, blob) in grads.iter().enumerate() {
        for (i, &g) in blob.iter().enumerate() {
            let f = |d: f64| {
                let mut l = layer.clone();
                l.params_mut()[b][i] += d;
                objective(&run(&l, x).0)
            };
            report.record(format!("param {b}/{i}"), g, f, h, tol);
        }
    }
    report
}
