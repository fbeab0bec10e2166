//! Single-parameter adaptive notch filter with a scalar Kalman update.
//!
//! The notch is the biquad
//!
//! ```text
//!            1 - a(n) q^-1 + q^-2
//! H(q, n) = ----------------------------
//!            1 - rho a(n) q^-1 + rho^2 q^-2
//! ```
//!
//! realised in direct form II with a shared delay line `s(n)`. The coefficient
//! `a(n) = 2 cos(2 pi f(n) / fs)` is the only state estimated by the Kalman
//! filter, so the tracked frequency follows directly from `arccos(a / 2)`.
//!
//! All recursions run in `f64`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tracker hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnfConfig {
    /// Pole radius, strictly inside the unit circle.
    pub rho: f64,
    /// Variance of the notch residual.
    pub sigma_e: f64,
    /// Variance of the random-walk process noise on `a`.
    pub sigma_w: f64,
    pub sample_rate_hz: f64,
}

impl Default for AnfConfig {
    fn default() -> Self {
        Self {
            rho: 0.99,
            sigma_e: 0.66,
            sigma_w: 1e-5,
            sample_rate_hz: 16_000.0,
        }
    }
}

impl AnfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        // sigma_w > 0 keeps the predicted covariance >= sigma_w, so the gain
        // denominator never divides by zero.
        if !(self.sigma_e > 0.0 && self.sigma_e.is_finite()) {
            return Err(Error::Config(format!("sigma_e must be positive, got {}", self.sigma_e)));
        }
        if !(self.sigma_w > 0.0 && self.sigma_w.is_finite()) {
            return Err(Error::Config(format!("sigma_w must be positive, got {}", self.sigma_w)));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Frequency in Hz corresponding to a filter coefficient.
    pub fn frequency_of(&self, a: f64) -> f64 {
        let c = (a / 2.0).clamp(-1.0, 1.0);
        self.sample_rate_hz / (2.0 * PI) * c.acos()
    }
}

/// Recursion state: two delay-line samples, the coefficient estimate and its
/// error covariance. Nothing else is carried between samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnfState {
    pub s_prev1: f64,
    pub s_prev2: f64,
    pub a_hat: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnfStepOutput {
    /// Tracked frequency in Hz, within `[0, fs / 2]`.
    pub f_hat: f64,
    /// Notch output.
    pub e: f64,
    /// Delay-line sample.
    pub s: f64,
}

pub fn anf_init(config: &AnfConfig) -> Result<AnfState> {
    config.validate()?;
    Ok(AnfState::default())
}

/// One sample of the tracker, in the exact update order of the recursion:
/// covariance prediction, measurement, gain, residual, coefficient update,
/// covariance update, clamp, frequency retrieval.
pub fn anf_step(state: &AnfState, y: f64, config: &AnfConfig) -> Result<(AnfState, AnfStepOutput)> {
    if !y.is_finite() {
        return Err(Error::NonFinite { index: 0 });
    }
    Ok(step_unchecked(state, y, config))
}

#[inline]
pub(crate) fn step_unchecked(state: &AnfState, y: f64, config: &AnfConfig) -> (AnfState, AnfStepOutput) {
    let rho = config.rho;
    let AnfState {
        s_prev1: s1,
        s_prev2: s2,
        a_hat,
        p_hat,
    } = *state;

    let p_pred = p_hat + config.sigma_w;
    let s = y + rho * a_hat * s1 - rho * rho * s2;
    let denom = s1 * s1 + config.sigma_e / p_pred;
    let k = s1 / denom;
    let e = s - a_hat * s1 + s2;
    let mut a_new = a_hat + k * e;
    let p_new = (1.0 - s1 * s1 / denom) * p_pred;
    if a_new.abs() > 2.0 {
        a_new = 2.0 * a_new.signum();
    }
    let f_hat = config.frequency_of(a_new);

    (
        AnfState {
            s_prev1: s,
            s_prev2: s1,
            a_hat: a_new,
            p_hat: p_new,
        },
        AnfStepOutput { f_hat, e, s },
    )
}

/// Streaming wrapper around [`anf_step`] for callers that own one tracker.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: AnfConfig,
    state: AnfState,
}

impl Tracker {
    pub fn new(config: AnfConfig) -> Result<Self> {
        let state = anf_init(&config)?;
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &AnfConfig {
        &self.config
    }

    pub fn state(&self) -> &AnfState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = AnfState::default();
    }

    pub fn process(&mut self, y: f64) -> Result<AnfStepOutput> {
        let (next, out) = anf_step(&self.state, y, &self.config)?;
        self.state = next;
        Ok(out)
    }

    pub fn frequency(&self) -> f64 {
        self.config.frequency_of(self.state.a_hat)
    }
}

/// Runs a fresh tracker over `samples[2..]`.
///
/// The first two samples are discarded: the delay line starts at
/// `s(0) = s(1) = 0`, so the output is two samples shorter than the input.
pub fn track_buffer(samples: &[f64], config: &AnfConfig) -> Result<Vec<AnfStepOutput>> {
    if samples.len() < 3 {
        return Err(Error::InputSize(format!(
            "tracker needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    if let Some(index) = samples[..2].iter().position(|y| !y.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut state = anf_init(config)?;
    let mut out = Vec::with_capacity(samples.len() - 2);
    for (index, &y) in samples.iter().enumerate().skip(2) {
        if !y.is_finite() {
            return Err(Error::NonFinite { index });
        }
        let (next, step) = step_unchecked(&state, y, config);
        state = next;
        out.push(step);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_config() -> AnfConfig {
        AnfConfig::default()
    }

    fn sine(freq: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn init_is_zero() {
        let st = anf_init(&paper_config()).unwrap();
        assert_eq!(st, AnfState::default());
        assert_eq!(paper_config().frequency_of(st.a_hat), 4000.0);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            AnfConfig {
                rho: 1.0,
                ..paper_config()
            },
            AnfConfig {
                rho: 0.0,
                ..paper_config()
            },
            AnfConfig {
                sigma_w: 0.0,
                ..paper_config()
            },
            AnfConfig {
                sigma_e: -1.0,
                ..paper_config()
            },
            AnfConfig {
                sample_rate_hz: 0.0,
                ..paper_config()
            },
        ] {
            assert!(matches!(anf_init(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn zero_previous_sample_gives_zero_gain() {
        let cfg = paper_config();
        let st = AnfState {
            s_prev1: 0.0,
            s_prev2: 0.3,
            a_hat: 0.7,
            p_hat: 0.01,
        };
        let (next, _) = anf_step(&st, 0.5, &cfg).unwrap();
        assert_eq!(next.a_hat, 0.7);
    }

    #[test]
    fn coefficient_to_frequency() {
        let cfg = paper_config();
        assert!((cfg.frequency_of(2f64.sqrt()) - 2000.0).abs() < 1e-9);
        assert_eq!(cfg.frequency_of(2.0), 0.0);
        assert_eq!(cfg.frequency_of(-2.0), 8000.0);
        // round-off just outside the domain must not produce NaN
        assert_eq!(cfg.frequency_of(2.0 + 1e-15), 0.0);
    }

    #[test]
    fn clamp_above_two() {
        // Choose a state where the update overshoots: large positive residual
        // times a large gain.
        let cfg = paper_config();
        let st = AnfState {
            s_prev1: 1.0,
            s_prev2: 0.0,
            a_hat: 1.9,
            p_hat: 1e3,
        };
        let (next, out) = anf_step(&st, 10.0, &cfg).unwrap();
        assert_eq!(next.a_hat, 2.0);
        assert_eq!(out.f_hat, 0.0);

        let st = AnfState { a_hat: -1.9, ..st };
        let (next, out) = anf_step(&st, -10.0, &cfg).unwrap();
        assert_eq!(next.a_hat, -2.0);
        assert_eq!(out.f_hat, 8000.0);
    }

    #[test]
    fn step_matches_hand_computation() {
        let cfg = paper_config();
        let st = AnfState {
            s_prev1: 0.4,
            s_prev2: -0.2,
            a_hat: 0.5,
            p_hat: 0.02,
        };
        let y = 0.1;
        let p_pred = 0.02 + 1e-5;
        let s = 0.1 + 0.99 * 0.5 * 0.4 - 0.99 * 0.99 * -0.2;
        let k = 0.4 / (0.16 + 0.66 / p_pred);
        let e = s - 0.5 * 0.4 + -0.2;
        let a = 0.5 + k * e;
        let p = (1.0 - 0.16 / (0.16 + 0.66 / p_pred)) * p_pred;
        let (next, out) = anf_step(&st, y, &cfg).unwrap();
        assert_eq!(out.s, s);
        assert_eq!(out.e, e);
        assert_eq!(next.a_hat, a);
        assert_eq!(next.p_hat, p);
        assert_eq!(next.s_prev1, s);
        assert_eq!(next.s_prev2, 0.4);
    }

    #[test]
    fn non_finite_sample_is_rejected() {
        let cfg = paper_config();
        assert!(matches!(
            anf_step(&AnfState::default(), f64::NAN, &cfg),
            Err(Error::NonFinite { .. })
        ));
        let mut buf = vec![0.0; 10];
        buf[6] = f64::INFINITY;
        assert!(matches!(track_buffer(&buf, &cfg), Err(Error::NonFinite { index: 6 })));
    }

    #[test]
    fn buffer_lengths() {
        let cfg = paper_config();
        assert_eq!(track_buffer(&vec![0.0; 32_000], &cfg).unwrap().len(), 31_998);
        assert!(matches!(track_buffer(&[0.0, 1.0], &cfg), Err(Error::InputSize(_))));
    }

    #[test]
    fn silence_stays_at_quarter_rate() {
        let cfg = paper_config();
        let out = track_buffer(&vec![0.0; 4000], &cfg).unwrap();
        assert!(out.iter().all(|o| o.f_hat == 4000.0));
    }

    #[test]
    fn locks_onto_900_hz() {
        let cfg = paper_config();
        let out = track_buffer(&sine(900.0, 16_000, 16_000.0), &cfg).unwrap();
        let tail = &out[out.len() - 4000..];
        let mean = tail.iter().map(|o| o.f_hat).sum::<f64>() / tail.len() as f64;
        assert!((mean - 900.0).abs() < 10.0, "mean {mean}");
    }

    #[test]
    fn tracker_wrapper_matches_buffer() {
        let cfg = paper_config();
        let x = sine(1234.0, 3000, 16_000.0);
        let batch = track_buffer(&x, &cfg).unwrap();
        let mut t = Tracker::new(cfg).unwrap();
        // discard the two priming samples like track_buffer does
        let streamed: Vec<_> = x[2..].iter().map(|&y| t.process(y).unwrap()).collect();
        assert_eq!(batch, streamed);
        assert_eq!(t.frequency(), batch.last().unwrap().f_hat);
    }
}
