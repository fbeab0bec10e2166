use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::checkpoint::Checkpoint;
use super::network::{Network, NetworkSpec};
use super::tensor::Tensor1D;
use crate::error::{Error, Result};
use crate::features::{FeatureClip, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fixed mini-batch size; `None` picks one from the training-set size.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            learning_rate: 0.003,
            batch_size: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }

    /// `min(32, max(2, n / 4))` unless a batch size is pinned.
    pub fn batch_for(&self, n_train: usize) -> usize {
        self.batch_size.unwrap_or_else(|| (n_train / 4).clamp(2, 32))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Network input for a clip: channel 0 `f_norm`, channel 1 `p_ratio`.
pub fn clip_tensor(clip: &FeatureClip) -> Tensor1D<f32> {
    Tensor1D::from_rows(&[&clip.f_norm, &clip.p_ratio])
}

fn labelled(set: &[FeatureClip], what: &str) -> Result<Vec<(Tensor1D<f32>, f32)>> {
    if set.is_empty() {
        return Err(Error::Config(format!("{what} set is empty")));
    }
    set.iter()
        .map(|c| {
            let label = c
                .label
                .ok_or_else(|| Error::Config(format!("{what} clip '{}' has no label", c.source_id)))?;
            Ok((clip_tensor(c), label.target()))
        })
        .collect()
}

/// Mean BCE over a set in evaluation mode.
pub fn mean_loss(net: &Network<f32>, data: &[(Tensor1D<f32>, f32)]) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in data {
        let pass = net.infer(x)?;
        total += f64::from(Network::loss(&pass, *t));
    }
    Ok(total / data.len() as f64)
}

/// Trains the canonical classifier from a seeded initialization.
pub fn train(train_set: &[FeatureClip], val_set: &[FeatureClip], config: &TrainConfig) -> Result<TrainOutcome> {
    train_spec(NetworkSpec::anfnet(), train_set, val_set, config)
}

/// Trains a network built from `spec`. The single ChaCha8 stream seeded with
/// `config.seed` drives initialization, shuffling and dropout, so a run is
/// reproducible bit for bit.
pub fn train_spec(
    spec: NetworkSpec,
    train_set: &[FeatureClip],
    val_set: &[FeatureClip],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let train_data = labelled(train_set, "training")?;
    let val_data = labelled(val_set, "validation")?;
    let len = train_data[0].0.len();
    if train_data.iter().chain(&val_data).any(|(x, _)| x.len() != len) {
        return Err(Error::Config("all clips must have the same length".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net: Network<f32> = Network::new(spec, &mut rng)?;
    net.spec().shapes(len)?;
    let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(AdamConfig::with_lr(config.learning_rate), &shapes);
    let batch = config.batch_for(train_data.len());

    let mut best = Checkpoint::capture(&net, &adam, config.seed, &rng, 0, mean_loss(&net, &val_data)?);
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut grads = net.zero_grads();
            let w = 1.0 / chunk.len() as f32;
            for &i in chunk {
                let (x, t) = &train_data[i];
                let pass = net.forward_train(x, &mut rng)?;
                epoch_loss += f64::from(net.backward_into(&pass, *t, w, &mut grads)?);
            }
            adam.update(net.params_mut(), &grads);
        }
        let train_loss = epoch_loss / train_data.len() as f64;
        let val_loss = mean_loss(&net, &val_data)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Config(format!("training diverged at epoch {epoch}")));
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.val_loss {
            best = Checkpoint::capture(&net, &adam, config.seed, &rng, epoch as u32, val_loss);
            best_epoch = epoch;
        }
    }

    Ok(TrainOutcome {
        checkpoint: best,
        history,
        best_epoch,
    })
}

/// Siren probability for a clip, dropout disabled.
pub fn predict(checkpoint: &Checkpoint, clip: &FeatureClip) -> Result<f32> {
    checkpoint.network()?.predict_proba(&clip_tensor(clip))
}

/// Threshold rule: strictly above 0.5 is a siren, 0.5 itself is noise.
pub fn classify(probability: f32) -> Label {
    if probability > 0.5 {
        Label::Siren
    } else {
        Label::Noise
    }
}
