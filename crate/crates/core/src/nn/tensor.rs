use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type of the network. `f32` for training and
/// inference, `f64` for gradient verification.
pub trait Scalar: Float + Default + Debug + Sum + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Channels-by-time activation grid, row-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor1D<T> {
    channels: usize,
    len: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor1D<T> {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels,
            len,
            data: vec![T::zero(); channels * len],
        }
    }

    /// Panics if `data.len() != channels * len`.
    pub fn from_vec(channels: usize, len: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), channels * len, "tensor data does not match shape");
        Self { channels, len, data }
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let len = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == len), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self {
            channels: rows.len(),
            len,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.len)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, c: usize) -> &[T] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor1D<U> {
        Tensor1D {
            channels: self.channels,
            len: self.len,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes
/// without relying on reassociation.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Correlations of several rows against one source with shared offsets:
/// `out[r * n + t] = init[r] + sum_k weights[k * rows + r] * src[offs[k] + t]`.
/// Rows are computed four at a time in register blocks so each source load
/// feeds several accumulators.
pub(crate) fn correlate_rows<T: Scalar>(out: &mut [T], n: usize, init: &[T], weights: &[T], offs: &[usize], src: &[T]) {
    const F: usize = 4;
    const B: usize = 8;
    let rows = init.len();
    assert_eq!(out.len(), rows * n);
    assert_eq!(weights.len(), rows * offs.len());
    if let Some(&max_off) = offs.iter().max() {
        assert!(max_off + n <= src.len(), "correlation source too short");
    }
    let mut group: Vec<([T; F], usize)> = Vec::with_capacity(offs.len());
    for r0 in (0..rows).step_by(F) {
        let live = F.min(rows - r0);
        group.clear();
        group.extend(offs.iter().enumerate().map(|(k, &off)| {
            let mut w = [T::zero(); F];
            w[..live].copy_from_slice(&weights[k * rows + r0..k * rows + r0 + live]);
            (w, off)
        }));
        let mut base = [T::zero(); F];
        base[..live].copy_from_slice(&init[r0..r0 + live]);

        let mut t0 = 0;
        while t0 + B <= n {
            let mut acc = [[T::zero(); B]; F];
            for f in 0..F {
                acc[f] = [base[f]; B];
            }
            for (w, off) in &group {
                let x: &[T; B] = src[off + t0..off + t0 + B].try_into().unwrap();
                for f in 0..F {
                    for i in 0..B {
                        acc[f][i] = acc[f][i] + w[f] * x[i];
                    }
                }
            }
            for f in 0..live {
                out[(r0 + f) * n + t0..(r0 + f) * n + t0 + B].copy_from_slice(&acc[f]);
            }
            t0 += B;
        }
        for t in t0..n {
            for f in 0..live {
                let mut a = base[f];
                for (w, off) in &group {
                    a = a + w[f] * src[off + t];
                }
                out[(r0 + f) * n + t] = a;
            }
        }
    }
}

/// Adjoint of [`correlate_rows`] with respect to the weights:
/// `out[r * taps + k] += sum_t dy[r * n + t] * src[offs[k] + t]`.
pub(crate) fn correlate_rows_grad<T: Scalar>(out: &mut [T], dy: &[T], n: usize, offs: &[usize], src: &[T]) {
    const F: usize = 4;
    const B: usize = 8;
    let taps = offs.len();
    let rows = dy.len() / n.max(1);
    assert_eq!(out.len(), rows * taps);
    for r0 in (0..rows).step_by(F) {
        let live = F.min(rows - r0);
        let row = |f: usize| &dy[(r0 + f.min(live - 1)) * n..(r0 + f.min(live - 1) + 1) * n];
        let d: [&[T]; F] = [row(0), row(1), row(2), row(3)];
        for (k, &off) in offs.iter().enumerate() {
            let x = &src[off..off + n];
            let mut acc = [[T::zero(); B]; F];
            let mut t0 = 0;
            while t0 + B <= n {
                let xb: &[T; B] = x[t0..t0 + B].try_into().unwrap();
                for f in 0..F {
                    let db: &[T; B] = d[f][t0..t0 + B].try_into().unwrap();
                    for i in 0..B {
                        acc[f][i] = acc[f][i] + db[i] * xb[i];
                    }
                }
                t0 += B;
            }
            for f in 0..live {
                let mut sum = ((acc[f][0] + acc[f][4]) + (acc[f][1] + acc[f][5]))
                    + ((acc[f][2] + acc[f][6]) + (acc[f][3] + acc[f][7]));
                for t in t0..n {
                    sum = sum + d[f][t] * x[t];
                }
                out[(r0 + f) * taps + k] = out[(r0 + f) * taps + k] + sum;
            }
        }
    }
}
