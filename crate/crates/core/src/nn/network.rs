use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::layers::{bce_with_logit, sigmoid, Layer, LayerCache, LayerSpec};
use super::tensor::{Scalar, Tensor1D};
use crate::error::{Error, Result};

/// Ordered layer list plus the number of input channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// The ANFNet classifier: three strided convolutions, two max pools,
    /// global average pooling and a 40-20-1 head with dropout 0.25 after
    /// each hidden dense layer.
    pub fn anfnet() -> Self {
        use LayerSpec::*;
        Self {
            input_channels: 2,
            layers: vec![
                Conv1d {
                    filters: 10,
                    kernel: 16,
                    stride: 2,
                },
                Relu,
                MaxPool1d { window: 2 },
                Conv1d {
                    filters: 20,
                    kernel: 8,
                    stride: 2,
                },
                Relu,
                MaxPool1d { window: 2 },
                Conv1d {
                    filters: 40,
                    kernel: 4,
                    stride: 2,
                },
                Relu,
                GlobalAvgPool,
                Dense { units: 40 },
                Relu,
                Dropout { p: 0.25 },
                Dense { units: 20 },
                Relu,
                Dropout { p: 0.25 },
                Dense { units: 1 },
                Sigmoid,
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("network spec: {m}")));
        if self.input_channels == 0 {
            return bad("zero input channels");
        }
        let n = self.layers.len();
        if n < 2 || self.layers[n - 1] != LayerSpec::Sigmoid || self.layers[n - 2] != (LayerSpec::Dense { units: 1 }) {
            return bad("must end with a single-unit dense layer followed by sigmoid");
        }
        for (i, l) in self.layers.iter().enumerate() {
            match *l {
                LayerSpec::Sigmoid if i != n - 1 => return bad("sigmoid is only allowed as the output"),
                LayerSpec::Conv1d {
                    filters,
                    kernel,
                    stride,
                } if filters == 0 || kernel == 0 || stride == 0 => return bad("conv1d parameters must be positive"),
                LayerSpec::MaxPool1d { window: 0 } => return bad("pool window must be positive"),
                LayerSpec::Dense { units: 0 } => return bad("dense layer needs at least one unit"),
                LayerSpec::Dropout { p } if !(0.0..1.0).contains(&p) => return bad("dropout p must lie in [0, 1)"),
                _ => {}
            }
        }
        Ok(())
    }

    /// Activation shape after every layer for an input of length `len`.
    pub fn shapes(&self, len: usize) -> Result<Vec<(usize, usize)>> {
        let mut shape = (self.input_channels, len);
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            shape = l.output_shape(i, shape)?;
            out.push(shape);
        }
        Ok(out)
    }

    /// Parameter count. Dense layers after global pooling have a fixed
    /// fan-in; before it the count would depend on input length, which is
    /// rejected.
    pub fn param_count(&self) -> Result<usize> {
        let mut channels = self.input_channels;
        let mut features = None;
        let mut total = 0;
        for l in &self.layers {
            match *l {
                LayerSpec::Conv1d { filters, kernel, .. } => {
                    total += channels * kernel * filters + filters;
                    channels = filters;
                }
                LayerSpec::GlobalAvgPool => features = Some(channels),
                LayerSpec::Dense { units } => {
                    let fan_in = features.ok_or_else(|| {
                        Error::Config("dense layer before global pooling has length-dependent fan-in".into())
                    })?;
                    total += fan_in * units + units;
                    features = Some(units);
                    channels = units;
                }
                _ => {}
            }
        }
        Ok(total)
    }
}

/// Result of a forward pass. The cache is present only when the pass was
/// recorded for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub logit: T,
    pub probability: T,
    cache: Option<Vec<LayerCache<T>>>,
}

impl<T> ForwardPass<T> {
    pub fn is_recorded(&self) -> bool {
        self.cache.is_some()
    }
}

/// Per-parameter-blob gradients, aligned with [`Network::params`].
pub type Gradients<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut channels = spec.input_channels;
        let mut features = None;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let in_features = features.unwrap_or(0);
            layers.push(Layer::init(l, channels, in_features, rng));
            match *l {
                LayerSpec::Conv1d { filters, .. } => channels = filters,
                LayerSpec::GlobalAvgPool => features = Some(channels),
                LayerSpec::Dense { units } => {
                    if features.is_none() {
                        return Err(Error::Config("dense layer must follow global pooling".into()));
                    }
                    features = Some(units);
                    channels = units;
                }
                _ => {}
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Parameter blobs in layer order, weight before bias.
    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        self.params().iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            layers: self.layers.iter().map(|l| l.cast()).collect(),
        }
    }

    /// Sets every weight and bias to zero.
    pub fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.fill(T::zero());
        }
    }

    fn run(&self, input: &Tensor1D<T>, mut rng: Option<&mut dyn RngCore>, record: bool) -> Result<ForwardPass<T>> {
        if input.channels() != self.spec.input_channels {
            return Err(Error::Shape {
                index: 0,
                layer: "input",
                msg: format!(
                    "expected {} channels, got {}",
                    self.spec.input_channels,
                    input.channels()
                ),
            });
        }
        let last = self.layers.len() - 1;
        let mut caches = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut x = input.clone();
        for (i, layer) in self.layers[..last].iter().enumerate() {
            let (y, cache) = layer.forward(i, &x, rng.as_deref_mut(), record)?;
            if let Some(c) = cache {
                caches.push(c);
            }
            x = y;
        }
        let logit = x.data()[0];
        if !logit.is_finite() {
            return Err(Error::Shape {
                index: last,
                layer: "sigmoid",
                msg: "non-finite logit".into(),
            });
        }
        Ok(ForwardPass {
            logit,
            probability: sigmoid(logit),
            cache: record.then_some(caches),
        })
    }

    /// Inference: no dropout, nothing recorded.
    pub fn infer(&self, input: &Tensor1D<T>) -> Result<ForwardPass<T>> {
        self.run(input, None, false)
    }

    /// Probability of the positive class, dropout disabled.
    pub fn predict_proba(&self, input: &Tensor1D<T>) -> Result<T> {
        Ok(self.infer(input)?.probability)
    }

    /// Recorded pass without dropout, e.g. for gradient checks.
    pub fn forward_eval(&self, input: &Tensor1D<T>) -> Result<ForwardPass<T>> {
        self.run(input, None, true)
    }

    /// Recorded training-mode pass: dropout masks are drawn from `rng`.
    pub fn forward_train<R: RngCore>(&self, input: &Tensor1D<T>, rng: &mut R) -> Result<ForwardPass<T>> {
        self.run(input, Some(rng), true)
    }

    /// Binary cross-entropy loss of a pass against `target` (0 or 1).
    pub fn loss(pass: &ForwardPass<T>, target: T) -> T {
        bce_with_logit(pass.logit, target)
    }

    /// Gradient of the BCE loss with respect to every parameter, accumulated
    /// into `grads` scaled by `weight`. Returns the loss.
    pub fn backward_into(&self, pass: &ForwardPass<T>, target: T, weight: T, grads: &mut Gradients<T>) -> Result<T> {
        let caches = pass
            .cache
            .as_ref()
            .ok_or_else(|| Error::Usage("backward called on a pass without recorded activations".into()))?;
        // sigmoid and cross-entropy fuse to (p - t) at the logit
        let mut dy = Tensor1D::from_vec(1, 1, vec![(pass.probability - target) * weight]);
        let last = self.layers.len() - 1;
        let mut blob = grads.len();
        for (i, layer) in self.layers[..last].iter().enumerate().rev() {
            let n_params = layer.params().len();
            blob -= n_params;
            let need_input = i > 0;
            match layer.backward(&caches[i], &dy, need_input, &mut grads[blob..blob + n_params]) {
                Some(dx) => dy = dx,
                None => break,
            }
        }
        Ok(Self::loss(pass, target))
    }

    pub fn backward(&self, pass: &ForwardPass<T>, target: T) -> Result<Gradients<T>> {
        let mut g = self.zero_grads();
        self.backward_into(pass, target, T::one(), &mut g)?;
        Ok(g)
    }

    /// Input tensor length limits: the smallest length every layer accepts.
    pub fn min_input_len(&self) -> usize {
        (1..100_000)
            .find(|&l| self.spec.shapes(l).is_ok())
            .unwrap_or(usize::MAX)
    }
}
