//! Layer kinds of the classifier with hand-written forward and backward
//! passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, correlate_rows, correlate_rows_grad, dot, Scalar, Tensor1D};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid (unpadded) 1D convolution.
    Conv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
    },
    /// Non-overlapping max pooling; an odd trailing element is dropped.
    MaxPool1d {
        window: usize,
    },
    GlobalAvgPool,
    Dense {
        units: usize,
    },
    Relu,
    /// Inverted dropout, active in training mode only.
    Dropout {
        p: f64,
    },
    /// Output activation; only valid as the final layer.
    Sigmoid,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::MaxPool1d { .. } => "maxpool1d",
            LayerSpec::GlobalAvgPool => "global_avg_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Sigmoid => "sigmoid",
        }
    }

    /// Output shape for a given input shape, or a shape error.
    pub fn output_shape(&self, index: usize, (c, l): (usize, usize)) -> Result<(usize, usize)> {
        let err = |msg: String| Error::Shape {
            index,
            layer: self.name(),
            msg,
        };
        match *self {
            LayerSpec::Conv1d {
                filters,
                kernel,
                stride,
            } => {
                if l < kernel {
                    return Err(err(format!("input length {l} shorter than kernel {kernel}")));
                }
                Ok((filters, (l - kernel) / stride + 1))
            }
            LayerSpec::MaxPool1d { window } => {
                if l < window {
                    return Err(err(format!("input length {l} shorter than pool window {window}")));
                }
                Ok((c, l / window))
            }
            LayerSpec::GlobalAvgPool => {
                if l == 0 {
                    return Err(err("empty time axis".into()));
                }
                Ok((c, 1))
            }
            LayerSpec::Dense { units } => Ok((units, 1)),
            LayerSpec::Relu | LayerSpec::Dropout { .. } | LayerSpec::Sigmoid => Ok((c, l)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[filter][in_channel][tap]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub units: usize,
    /// `[unit][input]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv1d(Conv1d<T>),
    MaxPool1d { window: usize },
    GlobalAvgPool,
    Dense(Dense<T>),
    Relu,
    Dropout { p: f64 },
    Sigmoid,
}

/// Values recorded during a forward pass and consumed by backward.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache<T> {
    Conv {
        /// Input split into `stride` phases per channel so every tap reads
        /// a contiguous slice.
        phases: Vec<T>,
        phase_len: usize,
        in_len: usize,
    },
    MaxPool {
        argmax: Vec<usize>,
        in_shape: (usize, usize),
    },
    Gap {
        in_shape: (usize, usize),
    },
    Dense {
        input: Vec<T>,
        in_shape: (usize, usize),
    },
    Relu {
        active: Vec<bool>,
    },
    Dropout {
        scale: Option<Vec<T>>,
    },
    Sigmoid {
        output: Vec<T>,
    },
}

/// Activations recorded by [`Layer::forward_tape`].
#[derive(Debug, Clone)]
pub struct LayerTape<T>(LayerCache<T>);

fn he_uniform<T: Scalar, R: Rng + ?Sized>(n: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect()
}

impl<T: Scalar> Layer<T> {
    /// Builds a layer with He-uniform weights and zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &LayerSpec, in_channels: usize, in_features: usize, rng: &mut R) -> Self {
        match *spec {
            LayerSpec::Conv1d {
                filters,
                kernel,
                stride,
            } => {
                let fan_in = in_channels * kernel;
                Layer::Conv1d(Conv1d {
                    in_channels,
                    filters,
                    kernel,
                    stride,
                    weight: he_uniform(filters * fan_in, fan_in, rng),
                    bias: vec![T::zero(); filters],
                })
            }
            LayerSpec::Dense { units } => Layer::Dense(Dense {
                inputs: in_features,
                units,
                weight: he_uniform(units * in_features, in_features, rng),
                bias: vec![T::zero(); units],
            }),
            LayerSpec::MaxPool1d { window } => Layer::MaxPool1d { window },
            LayerSpec::GlobalAvgPool => Layer::GlobalAvgPool,
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Dropout { p } => Layer::Dropout { p },
            LayerSpec::Sigmoid => Layer::Sigmoid,
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv1d(c) => LayerSpec::Conv1d {
                filters: c.filters,
                kernel: c.kernel,
                stride: c.stride,
            },
            Layer::Dense(d) => LayerSpec::Dense { units: d.units },
            Layer::MaxPool1d { window } => LayerSpec::MaxPool1d { window: *window },
            Layer::GlobalAvgPool => LayerSpec::GlobalAvgPool,
            Layer::Relu => LayerSpec::Relu,
            Layer::Dropout { p } => LayerSpec::Dropout { p: *p },
            Layer::Sigmoid => LayerSpec::Sigmoid,
        }
    }

    pub fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Conv1d(c) => vec![&c.weight, &c.bias],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Layer::Conv1d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => Vec::new(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect::<Vec<U>>();
        match self {
            Layer::Conv1d(c) => Layer::Conv1d(Conv1d {
                in_channels: c.in_channels,
                filters: c.filters,
                kernel: c.kernel,
                stride: c.stride,
                weight: conv(&c.weight),
                bias: conv(&c.bias),
            }),
            Layer::Dense(d) => Layer::Dense(Dense {
                inputs: d.inputs,
                units: d.units,
                weight: conv(&d.weight),
                bias: conv(&d.bias),
            }),
            Layer::MaxPool1d { window } => Layer::MaxPool1d { window: *window },
            Layer::GlobalAvgPool => Layer::GlobalAvgPool,
            Layer::Relu => Layer::Relu,
            Layer::Dropout { p } => Layer::Dropout { p: *p },
            Layer::Sigmoid => Layer::Sigmoid,
        }
    }

    /// Forward pass. `dropout_rng` is `Some` only in training mode.
    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        index: usize,
        x: &Tensor1D<T>,
        dropout_rng: Option<&mut R>,
        record: bool,
    ) -> Result<(Tensor1D<T>, Option<LayerCache<T>>)> {
        let (c, l) = x.shape();
        let (oc, ol) = self.spec().output_shape(index, (c, l))?;
        let shape_err = |msg: String| Error::Shape {
            index,
            layer: self.spec().name(),
            msg,
        };
        match self {
            Layer::Conv1d(conv) => {
                if c != conv.in_channels {
                    return Err(shape_err(format!(
                        "expected {} input channels, got {c}",
                        conv.in_channels
                    )));
                }
                let s = conv.stride;
                let k = conv.kernel;
                let phase_len = l.div_ceil(s);
                // phase-major: row (p * c + ch) holds x[ch][p], x[ch][p + s], ...
                let mut phases = vec![T::zero(); c * s * phase_len];
                for ch in 0..c {
                    let row = x.row(ch);
                    for (i, &v) in row.iter().enumerate() {
                        phases[((i % s) * c + ch) * phase_len + i / s] = v;
                    }
                }
                let mut offs = Vec::with_capacity(c * k);
                let mut weights = Vec::with_capacity(c * k * oc);
                for ch in 0..c {
                    for j in 0..k {
                        offs.push(((j % s) * c + ch) * phase_len + j / s);
                        weights.extend((0..oc).map(|o| conv.weight[(o * c + ch) * k + j]));
                    }
                }
                let mut y = Tensor1D::zeros(oc, ol);
                correlate_rows(y.data_mut(), ol, &conv.bias, &weights, &offs, &phases);
                let cache = record.then_some(LayerCache::Conv {
                    phases,
                    phase_len,
                    in_len: l,
                });
                Ok((y, cache))
            }
            Layer::MaxPool1d { window } => {
                let w = *window;
                let mut y = Tensor1D::zeros(oc, ol);
                let mut argmax = Vec::with_capacity(if record { oc * ol } else { 0 });
                for ch in 0..c {
                    let row = x.row(ch);
                    let yrow = y.row_mut(ch);
                    for (t, out) in yrow.iter_mut().enumerate() {
                        let mut best = t * w;
                        for i in t * w + 1..t * w + w {
                            if row[i] > row[best] {
                                best = i;
                            }
                        }
                        *out = row[best];
                        if record {
                            argmax.push(ch * l + best);
                        }
                    }
                }
                Ok((
                    y,
                    record.then_some(LayerCache::MaxPool {
                        argmax,
                        in_shape: (c, l),
                    }),
                ))
            }
            Layer::GlobalAvgPool => {
                let n = T::from_f64(l as f64);
                let data = (0..c).map(|ch| x.row(ch).iter().copied().sum::<T>() / n).collect();
                Ok((
                    Tensor1D::from_vec(c, 1, data),
                    record.then_some(LayerCache::Gap { in_shape: (c, l) }),
                ))
            }
            Layer::Dense(d) => {
                let input = x.data();
                if input.len() != d.inputs {
                    return Err(shape_err(format!("expected {} inputs, got {}", d.inputs, input.len())));
                }
                let data = (0..d.units)
                    .map(|u| d.bias[u] + dot(&d.weight[u * d.inputs..(u + 1) * d.inputs], input))
                    .collect();
                Ok((
                    Tensor1D::from_vec(d.units, 1, data),
                    record.then(|| LayerCache::Dense {
                        input: input.to_vec(),
                        in_shape: (c, l),
                    }),
                ))
            }
            Layer::Relu => {
                let mut y = x.clone();
                let mut active = Vec::new();
                for v in y.data_mut() {
                    if *v <= T::zero() {
                        *v = T::zero();
                    }
                }
                if record {
                    active = x.data().iter().map(|&v| v > T::zero()).collect();
                }
                Ok((y, record.then_some(LayerCache::Relu { active })))
            }
            Layer::Dropout { p } => match dropout_rng {
                Some(rng) if *p > 0.0 => {
                    let keep = 1.0 - p;
                    let scale_on = T::from_f64(1.0 / keep);
                    let scale: Vec<T> = (0..x.data().len())
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                scale_on
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    let data = x.data().iter().zip(&scale).map(|(&v, &m)| v * m).collect();
                    Ok((
                        Tensor1D::from_vec(c, l, data),
                        record.then_some(LayerCache::Dropout { scale: Some(scale) }),
                    ))
                }
                _ => Ok((x.clone(), record.then_some(LayerCache::Dropout { scale: None }))),
            },
            Layer::Sigmoid => {
                let mut y = x.clone();
                for v in y.data_mut() {
                    *v = sigmoid(*v);
                }
                let output = if record { y.data().to_vec() } else { Vec::new() };
                Ok((y, record.then_some(LayerCache::Sigmoid { output })))
            }
        }
    }

    /// Forward pass of a standalone layer, keeping what
    /// [`Layer::backward_tape`] needs. Dropout masks are drawn from `rng`
    /// when one is given; without it dropout is the identity.
    pub fn forward_tape<R: Rng + ?Sized>(
        &self,
        x: &Tensor1D<T>,
        rng: Option<&mut R>,
    ) -> Result<(Tensor1D<T>, LayerTape<T>)> {
        let (y, cache) = self.forward(0, x, rng, true)?;
        Ok((y, LayerTape(cache.expect("recorded pass"))))
    }

    /// Input gradient and parameter gradients (weight, bias) of a standalone
    /// layer for the output gradient `dy`.
    pub fn backward_tape(&self, tape: &LayerTape<T>, dy: &Tensor1D<T>) -> (Tensor1D<T>, Vec<Vec<T>>) {
        let mut grads: Vec<Vec<T>> = self.params().iter().map(|p| vec![T::zero(); p.len()]).collect();
        let dx = self
            .backward(&tape.0, dy, true, &mut grads)
            .expect("input gradient requested");
        (dx, grads)
    }

    /// Backpropagates `dy` through the layer, accumulating parameter
    /// gradients into `grads` (weight, bias). Returns the input gradient
    /// when `need_input_grad` is set.
    pub(crate) fn backward(
        &self,
        cache: &LayerCache<T>,
        dy: &Tensor1D<T>,
        need_input_grad: bool,
        grads: &mut [Vec<T>],
    ) -> Option<Tensor1D<T>> {
        match (self, cache) {
            (
                Layer::Conv1d(conv),
                LayerCache::Conv {
                    phases,
                    phase_len,
                    in_len,
                },
            ) => {
                let (c, s, k) = (conv.in_channels, conv.stride, conv.kernel);
                let phase_len = *phase_len;
                let ol = dy.len();
                let (gw, gb) = grads.split_at_mut(1);
                let (gw, gb) = (&mut gw[0], &mut gb[0]);
                for (o, b) in gb.iter_mut().enumerate() {
                    *b = *b + dy.row(o).iter().copied().sum::<T>();
                }
                let offs: Vec<usize> = (0..c * k)
                    .map(|tap| {
                        let (ch, j) = (tap / k, tap % k);
                        ((j % s) * c + ch) * phase_len + j / s
                    })
                    .collect();
                correlate_rows_grad(gw, dy.data(), ol, &offs, phases);
                need_input_grad.then(|| {
                    // dphase[u] = sum of w * dy[u - j / s], dy zero-padded on both sides
                    let pad = (k - 1) / s;
                    let plen = pad + phase_len.max(ol) + pad;
                    let mut padded = vec![T::zero(); conv.filters * plen];
                    for o in 0..conv.filters {
                        padded[o * plen + pad..o * plen + pad + ol].copy_from_slice(dy.row(o));
                    }
                    let mut dphases = vec![T::zero(); phases.len()];
                    let zeros = vec![T::zero(); c];
                    for ph in 0..s {
                        let mut offs = Vec::new();
                        let mut weights = Vec::new();
                        for o in 0..conv.filters {
                            for j in (ph..k).step_by(s) {
                                offs.push(o * plen + pad - j / s);
                                weights.extend((0..c).map(|ch| conv.weight[(o * c + ch) * k + j]));
                            }
                        }
                        let rows = &mut dphases[ph * c * phase_len..(ph + 1) * c * phase_len];
                        correlate_rows(rows, phase_len, &zeros, &weights, &offs, &padded);
                    }
                    let mut dx = Tensor1D::zeros(c, *in_len);
                    for ch in 0..c {
                        for (i, v) in dx.row_mut(ch).iter_mut().enumerate() {
                            *v = dphases[((i % s) * c + ch) * phase_len + i / s];
                        }
                    }
                    dx
                })
            }
            (Layer::MaxPool1d { .. }, LayerCache::MaxPool { argmax, in_shape }) => {
                let mut dx = Tensor1D::zeros(in_shape.0, in_shape.1);
                let d = dx.data_mut();
                for (&src, &g) in argmax.iter().zip(dy.data()) {
                    d[src] = d[src] + g;
                }
                Some(dx)
            }
            (Layer::GlobalAvgPool, LayerCache::Gap { in_shape }) => {
                let (c, l) = *in_shape;
                let n = T::from_f64(l as f64);
                let mut dx = Tensor1D::zeros(c, l);
                for ch in 0..c {
                    let g = dy.data()[ch] / n;
                    dx.row_mut(ch).fill(g);
                }
                Some(dx)
            }
            (Layer::Dense(d), LayerCache::Dense { input, in_shape }) => {
                let (gw, gb) = grads.split_at_mut(1);
                let (gw, gb) = (&mut gw[0], &mut gb[0]);
                let mut dx = vec![T::zero(); d.inputs];
                for (u, &g) in dy.data().iter().enumerate() {
                    gb[u] = gb[u] + g;
                    axpy(&mut gw[u * d.inputs..(u + 1) * d.inputs], g, input);
                    if need_input_grad {
                        axpy(&mut dx, g, &d.weight[u * d.inputs..(u + 1) * d.inputs]);
                    }
                }
                need_input_grad.then(|| Tensor1D::from_vec(in_shape.0, in_shape.1, dx))
            }
            (Layer::Relu, LayerCache::Relu { active }) => {
                let (c, l) = dy.shape();
                let data = dy
                    .data()
                    .iter()
                    .zip(active)
                    .map(|(&g, &a)| if a { g } else { T::zero() })
                    .collect();
                Some(Tensor1D::from_vec(c, l, data))
            }
            (Layer::Dropout { .. }, LayerCache::Dropout { scale }) => match scale {
                Some(m) => {
                    let (c, l) = dy.shape();
                    let data = dy.data().iter().zip(m).map(|(&g, &s)| g * s).collect();
                    Some(Tensor1D::from_vec(c, l, data))
                }
                None => Some(dy.clone()),
            },
            (Layer::Sigmoid, LayerCache::Sigmoid { output }) => {
                let data = dy
                    .data()
                    .iter()
                    .zip(output)
                    .map(|(&g, &p)| g * p * (T::one() - p))
                    .collect();
                Some(Tensor1D::from_vec(dy.channels(), dy.len(), data))
            }
            _ => unreachable!("layer/cache mismatch"),
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `target`, evaluated from
/// the logit.
#[inline]
pub fn bce_with_logit<T: Scalar>(z: T, target: T) -> T {
    z.max(T::zero()) - z * target + (-z.abs()).exp().ln_1p()
}
