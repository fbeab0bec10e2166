//! Versioned little-endian checkpoint format.
//!
//! ```text
//! magic "ANFC" | version u16 | input_channels u16 | n_layers u16
//! n_layers x { kind u8 | a u32 | b u32 | c u32 | p f64 }
//! n_blobs u32 | n_blobs x { len u32 | len x f32 }          parameters
//! n_blobs x { len x f32 } | n_blobs x { len x f32 }      Adam m, v
//! adam_step u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64
//! seed u64 | rng_seed [u8; 32] | rng_stream u64 | rng_word_pos u128
//! epoch u32 | val_loss f64
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::layers::LayerSpec;
use super::network::{Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::features::ByteReader;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ANFC";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Position of a ChaCha8 stream, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Vec<Vec<f32>>,
    pub adam: Adam<f32>,
    pub seed: u64,
    pub rng: RngState,
    /// Epoch (1-based) the snapshot was taken after; 0 before training.
    pub epoch: u32,
    pub val_loss: f64,
}

impl Checkpoint {
    pub fn capture(
        net: &Network<f32>,
        adam: &Adam<f32>,
        seed: u64,
        rng: &ChaCha8Rng,
        epoch: u32,
        val_loss: f64,
    ) -> Self {
        Self {
            spec: net.spec().clone(),
            params: net.params().iter().map(|p| p.to_vec()).collect(),
            adam: adam.clone(),
            seed,
            rng: RngState::capture(rng),
            epoch,
            val_loss,
        }
    }

    pub fn network(&self) -> Result<Network<f32>> {
        let mut net = Network::new(self.spec.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        let blobs = net.params_mut();
        if blobs.len() != self.params.len() {
            return Err(Error::Config(
                "checkpoint parameter blobs do not match network spec".into(),
            ));
        }
        for (dst, src) in blobs.into_iter().zip(&self.params) {
            if dst.len() != src.len() {
                return Err(Error::Config("checkpoint parameter blob has the wrong length".into()));
            }
            dst.copy_from_slice(src);
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.spec.input_channels as u16).to_le_bytes());
        out.extend_from_slice(&(self.spec.layers.len() as u16).to_le_bytes());
        for l in &self.spec.layers {
            let (kind, a, b, c, p) = encode_layer(l);
            out.push(kind);
            for v in [a, b, c] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for blob in &self.params {
            out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
            put_f32s(&mut out, blob);
        }
        for blob in self.adam.m.iter().chain(&self.adam.v) {
            put_f32s(&mut out, blob);
        }
        out.extend_from_slice(&self.adam.step.to_le_bytes());
        let c = self.adam.config;
        for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.rng.seed);
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.val_loss.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format(0, "bad magic, not a checkpoint"));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                what: "checkpoint",
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let input_channels = r.u16()? as usize;
        let n_layers = r.u16()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let at = r.offset();
            let kind = r.u8()?;
            let (a, b, c) = (r.u32()?, r.u32()?, r.u32()?);
            let p = r.f64()?;
            layers.push(
                decode_layer(kind, a, b, c, p)
                    .ok_or_else(|| Error::format(at, format!("unknown layer kind {kind}")))?,
            );
        }
        let spec = NetworkSpec { input_channels, layers };
        let n_blobs = r.u32()? as usize;
        let mut params = Vec::with_capacity(n_blobs);
        let mut lens = Vec::with_capacity(n_blobs);
        for _ in 0..n_blobs {
            let len = r.u32()? as usize;
            lens.push(len);
            params.push(r.f32_vec(len)?);
        }
        let m = lens.iter().map(|&n| r.f32_vec(n)).collect::<Result<Vec<_>>>()?;
        let v = lens.iter().map(|&n| r.f32_vec(n)).collect::<Result<Vec<_>>>()?;
        let step = r.u64()?;
        let config = AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        };
        let seed = r.u64()?;
        let mut rng_seed = [0u8; 32];
        rng_seed.copy_from_slice(r.take(32)?);
        let rng = RngState {
            seed: rng_seed,
            stream: r.u64()?,
            word_pos: r.u128()?,
        };
        let epoch = r.u32()?;
        let val_loss = r.f64()?;
        r.finish()?;
        let ckpt = Self {
            spec,
            params,
            adam: Adam { config, m, v, step },
            seed,
            rng,
            epoch,
            val_loss,
        };
        // reject structurally inconsistent files up front
        ckpt.network()?;
        Ok(ckpt)
    }
}

fn encode_layer(l: &LayerSpec) -> (u8, u32, u32, u32, f64) {
    match *l {
        LayerSpec::Conv1d {
            filters,
            kernel,
            stride,
        } => (0, filters as u32, kernel as u32, stride as u32, 0.0),
        LayerSpec::MaxPool1d { window } => (1, window as u32, 0, 0, 0.0),
        LayerSpec::GlobalAvgPool => (2, 0, 0, 0, 0.0),
        LayerSpec::Dense { units } => (3, units as u32, 0, 0, 0.0),
        LayerSpec::Relu => (4, 0, 0, 0, 0.0),
        LayerSpec::Dropout { p } => (5, 0, 0, 0, p),
        LayerSpec::Sigmoid => (6, 0, 0, 0, 0.0),
    }
}

fn decode_layer(kind: u8, a: u32, b: u32, c: u32, p: f64) -> Option<LayerSpec> {
    let (a, b, c) = (a as usize, b as usize, c as usize);
    Some(match kind {
        0 => LayerSpec::Conv1d {
            filters: a,
            kernel: b,
            stride: c,
        },
        1 => LayerSpec::MaxPool1d { window: a },
        2 => LayerSpec::GlobalAvgPool,
        3 => LayerSpec::Dense { units: a },
        4 => LayerSpec::Relu,
        5 => LayerSpec::Dropout { p },
        6 => LayerSpec::Sigmoid,
        _ => return None,
    })
}

fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}
