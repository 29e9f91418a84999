//! Layers with hand-written forward and backward passes.
//!
//! Activations use the `[N, C, H, W]` layout. Every layer caches what its
//! backward pass needs during `forward`; `backward` consumes the gradient of
//! the layer output, accumulates parameter gradients and returns the gradient
//! of the layer input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{bail, Result};
use crate::nn::scalar::{gemm, Strides};
use crate::nn::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub trait Layer<T: Scalar> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>>;

    fn params(&self) -> Vec<&Tensor<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        Vec::new()
    }

    /// Non-learnable state saved with a checkpoint (batch-norm running stats).
    fn buffers(&self) -> Vec<&Tensor<T>> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        Vec::new()
    }

    /// Fingerprint of piecewise-linear branch decisions made in the last
    /// forward pass. Finite differences are only meaningful when it does not
    /// change under the perturbation.
    fn kink_signature(&self) -> u64 {
        0
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

fn missing_cache(layer: &str) -> crate::error::Error {
    crate::error::Error::InvalidArgument(format!("{layer}: backward called before forward"))
}

fn he_normal<T: Scalar, R: Rng + ?Sized>(n: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z * std)
        })
        .collect()
}

/// Zero padding before the first row/column for a stride-1 "same"
/// convolution; the remaining padding goes on the high side.
pub fn same_padding(kernel: usize, dilation: usize) -> (usize, usize) {
    let extent = dilation * (kernel - 1) + 1;
    let total = extent - 1;
    (total / 2, total - total / 2)
}

/// Number of parallel work groups for per-item loops. Fixed, so partial sums
/// are reduced in the same order at any thread count.
const WORK_GROUPS: usize = 8;

fn group_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    let groups = WORK_GROUPS.min(n.max(1));
    let per = n.div_ceil(groups);
    (0..groups)
        .map(|g| (g * per).min(n)..((g + 1) * per).min(n))
        .filter(|r| !r.is_empty())
        .collect()
}

/// Stride-1, same-padded, dilated 2-D convolution with bias.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel == 0 || dilation == 0 || in_channels == 0 || out_channels == 0 {
            bail!(
                Config,
                "conv2d needs positive kernel, dilation and channel counts (k={}, d={}, {}->{})",
                kernel,
                dilation,
                in_channels,
                out_channels
            );
        }
        let fan_in = in_channels * kernel * kernel;
        let weight = Tensor::param(
            &[out_channels, in_channels, kernel, kernel],
            he_normal(out_channels * fan_in, fan_in, rng),
        )?;
        let bias = Tensor::param(&[out_channels], vec![T::zero(); out_channels])?;
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            dilation,
            weight,
            bias,
            input: None,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// Unfolds one `[C, H, W]` item into a `[C*k*k, H*W]` patch matrix.
    fn im2col(&self, item: &[T], h: usize, w: usize, cols: &mut [T]) {
        let (pad, _) = same_padding(self.kernel, self.dilation);
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &item[c * hw..(c + 1) * hw];
            for ky in 0..self.kernel {
                let dy = (ky * self.dilation) as isize - pad as isize;
                for kx in 0..self.kernel {
                    let dx = (kx * self.dilation) as isize - pad as isize;
                    let row = (c * self.kernel + ky) * self.kernel + kx;
                    let out = &mut cols[row * hw..(row + 1) * hw];
                    let x_lo = (-dx).clamp(0, w as isize) as usize;
                    let x_hi = (w as isize - dx).clamp(0, w as isize) as usize;
                    for y in 0..h {
                        let dst = &mut out[y * w..(y + 1) * w];
                        let ys = y as isize + dy;
                        if ys < 0 || ys >= h as isize || x_lo >= x_hi {
                            dst.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src_row = &plane[ys as usize * w..(ys as usize + 1) * w];
                        dst[..x_lo].iter_mut().for_each(|v| *v = T::zero());
                        dst[x_hi..].iter_mut().for_each(|v| *v = T::zero());
                        let s0 = (x_lo as isize + dx) as usize;
                        dst[x_lo..x_hi].copy_from_slice(&src_row[s0..s0 + (x_hi - x_lo)]);
                    }
                }
            }
        }
    }

    /// Adjoint of [`Conv2d::im2col`]: scatters patch gradients back onto the item.
    fn col2im(&self, cols: &[T], h: usize, w: usize, item: &mut [T]) {
        let (pad, _) = same_padding(self.kernel, self.dilation);
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &mut item[c * hw..(c + 1) * hw];
            for ky in 0..self.kernel {
                let dy = (ky * self.dilation) as isize - pad as isize;
                for kx in 0..self.kernel {
                    let dx = (kx * self.dilation) as isize - pad as isize;
                    let row = (c * self.kernel + ky) * self.kernel + kx;
                    let src = &cols[row * hw..(row + 1) * hw];
                    let x_lo = (-dx).clamp(0, w as isize) as usize;
                    let x_hi = (w as isize - dx).clamp(0, w as isize) as usize;
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..h {
                        let ys = y as isize + dy;
                        if ys < 0 || ys >= h as isize {
                            continue;
                        }
                        let dst_row = &mut plane[ys as usize * w..(ys as usize + 1) * w];
                        let s0 = (x_lo as isize + dx) as usize;
                        for (d, s) in dst_row[s0..s0 + (x_hi - x_lo)]
                            .iter_mut()
                            .zip(&src[y * w + x_lo..y * w + x_hi])
                        {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn forward(&mut self, input: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = input.nchw("conv2d")?;
        if c != self.in_channels {
            bail!(Shape, "conv2d expects {} input channels, got {}", self.in_channels, c);
        }
        let hw = h * w;
        let k = self.patch_len();
        let oc = self.out_channels;
        let mut out = vec![T::zero(); n * oc * hw];
        let this = &*self;
        out.par_chunks_mut(oc * hw)
            .zip(input.data().par_chunks(c * hw))
            .for_each_init(
                || vec![T::zero(); k * hw],
                |cols, (out_item, in_item)| {
                    for (o, plane) in out_item.chunks_mut(hw).enumerate() {
                        let b = this.bias.data()[o];
                        plane.iter_mut().for_each(|v| *v = b);
                    }
                    this.im2col(in_item, h, w, cols);
                    gemm(
                        oc,
                        k,
                        hw,
                        T::one(),
                        this.weight.data(),
                        Strides::row_major(k),
                        cols,
                        Strides::row_major(hw),
                        T::one(),
                        out_item,
                        Strides::row_major(hw),
                    );
                },
            );
        self.input = Some(input.clone());
        Tensor::from_vec(&[n, oc, h, w], out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.input.as_ref().ok_or_else(|| missing_cache("conv2d"))?;
        let (n, c, h, w) = input.nchw("conv2d")?;
        grad_output.ensure_shape(&[n, self.out_channels, h, w], "conv2d backward")?;
        let hw = h * w;
        let k = self.patch_len();
        let oc = self.out_channels;
        let wlen = self.weight.len();
        let mut grad_input = vec![T::zero(); n * c * hw];
        let this = &*self;
        let gin_chunks: Vec<&mut [T]> = {
            let mut rest: &mut [T] = &mut grad_input;
            let mut v = Vec::new();
            for r in group_ranges(n) {
                let (head, tail) = rest.split_at_mut(r.len() * c * hw);
                v.push((r, head));
                rest = tail;
            }
            v.into_iter().map(|(_, s)| s).collect()
        };
        let ranges = group_ranges(n);
        let partials: Vec<(Vec<T>, Vec<T>)> = ranges
            .into_par_iter()
            .zip(gin_chunks.into_par_iter())
            .map(|(range, gin)| {
                let mut dw = vec![T::zero(); wlen];
                let mut db = vec![T::zero(); oc];
                let mut cols = vec![T::zero(); k * hw];
                let mut dcols = vec![T::zero(); k * hw];
                for (local, item) in range.enumerate() {
                    let x = &input.data()[item * c * hw..(item + 1) * c * hw];
                    let dy = &grad_output.data()[item * oc * hw..(item + 1) * oc * hw];
                    for (o, plane) in dy.chunks(hw).enumerate() {
                        db[o] += plane.iter().copied().sum::<T>();
                    }
                    let gin_item = &mut gin[local * c * hw..(local + 1) * c * hw];
                    this.im2col(x, h, w, &mut cols);
                    gemm(
                        oc,
                        hw,
                        k,
                        T::one(),
                        dy,
                        Strides::row_major(hw),
                        &cols,
                        Strides::transposed(hw),
                        T::one(),
                        &mut dw,
                        Strides::row_major(k),
                    );
                    gemm(
                        k,
                        oc,
                        hw,
                        T::one(),
                        this.weight.data(),
                        Strides::transposed(k),
                        dy,
                        Strides::row_major(hw),
                        T::zero(),
                        &mut dcols,
                        Strides::row_major(hw),
                    );
                    this.col2im(&dcols, h, w, gin_item);
                }
                (dw, db)
            })
            .collect();
        let mut partials = partials.into_iter();
        let (mut dw_total, mut db_total) = partials.next().unwrap_or_else(|| (vec![T::zero(); wlen], vec![T::zero(); oc]));
        for (dw, db) in partials {
            dw_total.iter_mut().zip(&dw).for_each(|(a, d)| *a += *d);
            db_total.iter_mut().zip(&db).for_each(|(a, d)| *a += *d);
        }
        let gw = self.weight.grad_mut().expect("conv weight is a parameter");
        gw.iter_mut().zip(&dw_total).for_each(|(g, d)| *g += *d);
        let gb = self.bias.grad_mut().expect("conv bias is a parameter");
        gb.iter_mut().zip(&db_total).for_each(|(g, d)| *g += *d);
        Tensor::from_vec(&[n, c, h, w], grad_input)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Per-channel batch normalization over `N x H x W`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(Self {
            channels,
            eps: 1e-5,
            momentum: 0.1,
            gamma: Tensor::param(&[channels], vec![T::one(); channels])?,
            beta: Tensor::param(&[channels], vec![T::zero(); channels])?,
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
            cache: None,
        })
    }
}

impl<T: Scalar> Layer<T> for BatchNorm2d<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = input.nchw("batch_norm")?;
        if c != self.channels {
            bail!(Shape, "batch_norm expects {} channels, got {}", self.channels, c);
        }
        if mode == Mode::Train && n < 2 {
            bail!(InvalidArgument, "batch_norm in train mode needs a batch of at least 2, got {}", n);
        }
        let hw = h * w;
        let count = n * hw;
        let eps = T::lit(self.eps);
        let x = input.data();
        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        let mut inv_stds = Vec::with_capacity(c);
        for ch in 0..c {
            let (mean, inv_std) = match mode {
                Mode::Train => {
                    let mut sum = 0.0f64;
                    for item in 0..n {
                        let base = (item * c + ch) * hw;
                        sum += x[base..base + hw].iter().map(|v| v.to_f64_lossy()).sum::<f64>();
                    }
                    let mean = sum / count as f64;
                    let mut sq = 0.0f64;
                    for item in 0..n {
                        let base = (item * c + ch) * hw;
                        sq += x[base..base + hw]
                            .iter()
                            .map(|v| {
                                let d = v.to_f64_lossy() - mean;
                                d * d
                            })
                            .sum::<f64>();
                    }
                    let var = sq / count as f64;
                    let m = T::lit(self.momentum);
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = (T::one() - m) * *rm + m * T::lit(mean);
                    let unbiased = if count > 1 { var * count as f64 / (count - 1) as f64 } else { var };
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = (T::one() - m) * *rv + m * T::lit(unbiased);
                    (T::lit(mean), T::one() / (T::lit(var) + eps).sqrt())
                }
                Mode::Eval => {
                    let rm = self.running_mean.data()[ch];
                    let rv = self.running_var.data()[ch];
                    (rm, T::one() / (rv + eps).sqrt())
                }
            };
            let g = self.gamma.data()[ch];
            let b = self.beta.data()[ch];
            for item in 0..n {
                let base = (item * c + ch) * hw;
                for i in base..base + hw {
                    let xh = (x[i] - mean) * inv_std;
                    xhat[i] = xh;
                    out[i] = g * xh + b;
                }
            }
            inv_stds.push(inv_std);
        }
        self.cache = Some(BnCache {
            xhat: Tensor::from_vec(input.shape(), xhat)?,
            inv_std: inv_stds,
            mode,
        });
        Tensor::from_vec(input.shape(), out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache("batch_norm"))?;
        grad_output.ensure_shape(cache.xhat.shape(), "batch_norm backward")?;
        let (n, c, h, w) = grad_output.nchw("batch_norm")?;
        let hw = h * w;
        let count = T::lit((n * hw) as f64);
        let dy = grad_output.data();
        let xhat = cache.xhat.data();
        let mut dx = vec![T::zero(); dy.len()];
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for ch in 0..c {
            let g = self.gamma.data()[ch];
            let inv_std = cache.inv_std[ch];
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for item in 0..n {
                let base = (item * c + ch) * hw;
                for i in base..base + hw {
                    sum_dy += dy[i];
                    sum_dy_xhat += dy[i] * xhat[i];
                }
            }
            dgamma[ch] = sum_dy_xhat;
            dbeta[ch] = sum_dy;
            for item in 0..n {
                let base = (item * c + ch) * hw;
                for i in base..base + hw {
                    dx[i] = match cache.mode {
                        Mode::Train => {
                            g * inv_std / count * (count * dy[i] - sum_dy - xhat[i] * sum_dy_xhat)
                        }
                        Mode::Eval => g * inv_std * dy[i],
                    };
                }
            }
        }
        for (acc, d) in self.gamma.grad_mut().expect("gamma is a parameter").iter_mut().zip(&dgamma) {
            *acc += *d;
        }
        for (acc, d) in self.beta.grad_mut().expect("beta is a parameter").iter_mut().zip(&dbeta) {
            *acc += *d;
        }
        Tensor::from_vec(grad_output.shape(), dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Layer<T> for Relu {
    fn forward(&mut self, input: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        self.mask = input.data().iter().map(|v| *v > T::zero()).collect();
        let data = input
            .data()
            .iter()
            .map(|v| if *v > T::zero() { *v } else { T::zero() })
            .collect();
        Tensor::from_vec(input.shape(), data)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        if grad_output.len() != self.mask.len() {
            bail!(Shape, "relu backward: gradient length {} vs cached {}", grad_output.len(), self.mask.len());
        }
        let data = grad_output
            .data()
            .iter()
            .zip(&self.mask)
            .map(|(g, m)| if *m { *g } else { T::zero() })
            .collect();
        Tensor::from_vec(grad_output.shape(), data)
    }

    fn kink_signature(&self) -> u64 {
        // FNV-1a over the active mask
        self.mask.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &m| {
            (h ^ m as u64).wrapping_mul(0x0100_0000_01b3)
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid<T> {
    output: Option<Tensor<T>>,
}

impl<T: Scalar> Sigmoid<T> {
    pub fn new() -> Self {
        Self { output: None }
    }

    pub fn output(&self) -> Option<&Tensor<T>> {
        self.output.as_ref()
    }
}

pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Layer<T> for Sigmoid<T> {
    fn forward(&mut self, input: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let data = input.data().iter().map(|v| sigmoid_scalar(*v)).collect();
        let out = Tensor::from_vec(input.shape(), data)?;
        self.output = Some(out.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.output.as_ref().ok_or_else(|| missing_cache("sigmoid"))?;
        grad_output.ensure_shape(out.shape(), "sigmoid backward")?;
        let data = grad_output
            .data()
            .iter()
            .zip(out.data())
            .map(|(g, s)| *g * *s * (T::one() - *s))
            .collect();
        Tensor::from_vec(grad_output.shape(), data)
    }
}

/// Affine map on the flattened per-item features: `[N, ...] -> [N, out]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Result<Self> {
        if in_features == 0 || out_features == 0 {
            bail!(Config, "dense layer needs positive sizes");
        }
        let bound = 1.0 / (in_features as f64).sqrt();
        let w = (0..in_features * out_features)
            .map(|_| T::lit(rng.gen_range(-bound..bound)))
            .collect();
        Ok(Self {
            in_features,
            out_features,
            weight: Tensor::param(&[out_features, in_features], w)?,
            bias: Tensor::param(&[out_features], vec![T::zero(); out_features])?,
            input: None,
        })
    }
}

impl<T: Scalar> Layer<T> for Dense<T> {
    fn forward(&mut self, input: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let n = *input.shape().first().unwrap_or(&0);
        if n == 0 || input.len() != n * self.in_features {
            bail!(
                Shape,
                "dense expects [N, {}] features, got shape {:?}",
                self.in_features,
                input.shape()
            );
        }
        let mut out: Vec<T> = (0..n).flat_map(|_| self.bias.data().iter().copied()).collect();
        gemm(
            n,
            self.in_features,
            self.out_features,
            T::one(),
            input.data(),
            Strides::row_major(self.in_features),
            self.weight.data(),
            Strides::transposed(self.in_features),
            T::one(),
            &mut out,
            Strides::row_major(self.out_features),
        );
        self.input = Some(input.clone());
        Tensor::from_vec(&[n, self.out_features], out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.input.as_ref().ok_or_else(|| missing_cache("dense"))?;
        let n = input.shape()[0];
        grad_output.ensure_shape(&[n, self.out_features], "dense backward")?;
        let dy = grad_output.data();
        gemm(
            self.out_features,
            n,
            self.in_features,
            T::one(),
            dy,
            Strides::transposed(self.out_features),
            input.data(),
            Strides::row_major(self.in_features),
            T::one(),
            self.weight.grad_mut().expect("dense weight is a parameter"),
            Strides::row_major(self.in_features),
        );
        let gb = self.bias.grad_mut().expect("dense bias is a parameter");
        for row in dy.chunks(self.out_features) {
            gb.iter_mut().zip(row).for_each(|(g, d)| *g += *d);
        }
        let mut dx = vec![T::zero(); n * self.in_features];
        gemm(
            n,
            self.out_features,
            self.in_features,
            T::one(),
            dy,
            Strides::row_major(self.out_features),
            self.weight.data(),
            Strides::row_major(self.in_features),
            T::zero(),
            &mut dx,
            Strides::row_major(self.in_features),
        );
        Tensor::from_vec(input.shape(), dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` in train mode;
/// eval mode is the identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub rate: f64,
    rng: ChaCha8Rng,
    mask: Option<Vec<T>>,
    freeze: bool,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            bail!(Config, "dropout rate must lie in [0, 1), got {}", rate);
        }
        Ok(Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
            freeze: false,
        })
    }

    /// Reuse the last train-mode mask instead of drawing a new one.
    pub fn freeze_mask(&mut self, freeze: bool) {
        self.freeze = freeze;
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

impl<T: Scalar> Layer<T> for Dropout<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask = None;
            return Ok(input.clone());
        }
        let reuse = self.freeze && self.mask.as_ref().is_some_and(|m| m.len() == input.len());
        if !reuse {
            let keep = T::lit(1.0 / (1.0 - self.rate));
            let rate = self.rate;
            let rng = &mut self.rng;
            self.mask = Some(
                (0..input.len())
                    .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
                    .collect(),
            );
        }
        let mask = self.mask.as_ref().expect("mask drawn above");
        let data = input.data().iter().zip(mask).map(|(x, m)| *x * *m).collect();
        Tensor::from_vec(input.shape(), data)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        match &self.mask {
            None => Ok(grad_output.clone()),
            Some(mask) => {
                if mask.len() != grad_output.len() {
                    bail!(Shape, "dropout backward: gradient length mismatch");
                }
                let data = grad_output.data().iter().zip(mask).map(|(g, m)| *g * *m).collect();
                Tensor::from_vec(grad_output.shape(), data)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct nested-loop convolution used as the reference.
    fn reference_conv(x: &Tensor<f64>, conv: &Conv2d<f64>) -> Vec<f64> {
        let (n, c, h, w) = x.nchw("ref").unwrap();
        let k = conv.kernel;
        let (pad, _) = same_padding(k, conv.dilation);
        let mut out = vec![0.0; n * conv.out_channels * h * w];
        for b in 0..n {
            for o in 0..conv.out_channels {
                for y in 0..h {
                    for xx in 0..w {
                        let mut acc = conv.bias.data()[o];
                        for ci in 0..c {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let ys = y as isize + (ky * conv.dilation) as isize - pad as isize;
                                    let xs = xx as isize + (kx * conv.dilation) as isize - pad as isize;
                                    if ys < 0 || xs < 0 || ys >= h as isize || xs >= w as isize {
                                        continue;
                                    }
                                    let wv = conv.weight.data()[((o * c + ci) * k + ky) * k + kx];
                                    acc += wv * x.data()[((b * c + ci) * h + ys as usize) * w + xs as usize];
                                }
                            }
                        }
                        out[((b * conv.out_channels + o) * h + y) * w + xx] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn padding_convention() {
        assert_eq!(same_padding(3, 1), (1, 1));
        assert_eq!(same_padding(3, 2), (2, 2));
        assert_eq!(same_padding(2, 1), (0, 1));
        assert_eq!(same_padding(1, 4), (0, 0));
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut conv = Conv2d::<f64>::new(1, 1, 1, 1, &mut rng()).unwrap();
        conv.weight.data_mut()[0] = 1.0;
        let x = random_tensor(&[2, 1, 3, 5], 1);
        let y = conv.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn box_kernel_sums_interior() {
        let mut conv = Conv2d::<f64>::new(1, 1, 3, 1, &mut rng()).unwrap();
        conv.weight.data_mut().iter_mut().for_each(|v| *v = 1.0);
        let x = Tensor::filled(&[1, 1, 5, 5], 0.75);
        let y = conv.forward(&x, Mode::Eval).unwrap();
        assert!((y.data()[2 * 5 + 2] - 9.0 * 0.75).abs() < 1e-12);
        assert!((y.data()[0] - 4.0 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn dilated_conv_matches_reference_loops() {
        let mut conv = Conv2d::<f64>::new(2, 3, 3, 2, &mut rng()).unwrap();
        conv.bias.data_mut().copy_from_slice(&[0.1, -0.2, 0.3]);
        let x = random_tensor(&[2, 2, 4, 4], 7);
        let y = conv.forward(&x, Mode::Train).unwrap();
        let expect = reference_conv(&x, &conv);
        for (a, b) in y.data().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_equals_zero_inflated_kernel() {
        let mut dilated = Conv2d::<f64>::new(2, 2, 3, 2, &mut rng()).unwrap();
        let mut inflated = Conv2d::<f64>::new(2, 2, 5, 1, &mut rng()).unwrap();
        inflated.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
        for o in 0..2 {
            for c in 0..2 {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let v = dilated.weight.data()[((o * 2 + c) * 3 + ky) * 3 + kx];
                        inflated.weight.data_mut()[((o * 2 + c) * 5 + 2 * ky) * 5 + 2 * kx] = v;
                    }
                }
            }
        }
        let x = random_tensor(&[1, 2, 6, 7], 3);
        let a = dilated.forward(&x, Mode::Eval).unwrap();
        let b = inflated.forward(&x, Mode::Eval).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let mut conv = Conv2d::<f32>::new(3, 2, 3, 1, &mut rng()).unwrap();
        assert!(conv.forward(&Tensor::zeros(&[1, 2, 4, 4]), Mode::Eval).is_err());
        assert!(Conv2d::<f32>::new(3, 2, 3, 0, &mut rng()).is_err());
    }

    #[test]
    fn batch_norm_normalizes_batch() {
        let mut bn = BatchNorm2d::<f64>::new(3).unwrap();
        let x = random_tensor(&[4, 3, 5, 6], 11);
        let y = bn.forward(&x, Mode::Train).unwrap();
        let hw = 30;
        for ch in 0..3 {
            let vals: Vec<f64> = (0..4).flat_map(|b| y.data()[(b * 3 + ch) * hw..(b * 3 + ch + 1) * hw].to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn batch_norm_constant_batch_maps_to_shift() {
        let mut bn = BatchNorm2d::<f64>::new(1).unwrap();
        bn.beta.data_mut()[0] = 0.25;
        let y = bn.forward(&Tensor::filled(&[3, 1, 2, 2], 5.0), Mode::Train).unwrap();
        assert!(y.data().iter().all(|v| (v - 0.25).abs() < 1e-9));
    }

    #[test]
    fn batch_norm_standardized_batch_is_nearly_unchanged() {
        let mut bn = BatchNorm2d::<f64>::new(1).unwrap();
        let mut x = random_tensor(&[8, 1, 4, 4], 2);
        let mean = x.data().iter().sum::<f64>() / x.len() as f64;
        let sd = (x.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        x.data_mut().iter_mut().for_each(|v| *v = (*v - mean) / sd);
        let y = bn.forward(&x, Mode::Train).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn batch_norm_train_needs_two_items_and_eval_uses_running_stats() {
        let mut bn = BatchNorm2d::<f64>::new(2).unwrap();
        assert!(bn.forward(&Tensor::zeros(&[1, 2, 2, 2]), Mode::Train).is_err());
        bn.running_mean.data_mut().copy_from_slice(&[1.0, -1.0]);
        bn.running_var.data_mut().copy_from_slice(&[4.0, 1.0]);
        let x = Tensor::filled(&[1, 2, 1, 1], 3.0);
        let y = bn.forward(&x, Mode::Eval).unwrap();
        assert!((y.data()[0] - 2.0 / (4.0f64 + 1e-5).sqrt()).abs() < 1e-12);
        assert!((y.data()[1] - 4.0 / (1.0f64 + 1e-5).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn running_stats_track_batches() {
        let mut bn = BatchNorm2d::<f64>::new(1).unwrap();
        let x = Tensor::from_vec(&[2, 1, 1, 2], vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean.data()[0] - 0.4).abs() < 1e-12);
        let unbiased = 20.0 / 3.0;
        assert!((bn.running_var.data()[0] - (0.9 + 0.1 * unbiased)).abs() < 1e-12);
        assert!(bn.running_var.data()[0] >= 0.0);
    }

    #[test]
    fn activations() {
        let x = Tensor::<f64>::from_vec(&[4], vec![-1.0, 2.0, 0.0, -3.0]).unwrap();
        let y = Relu::new().forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 0.0, 0.0]);
        let mut s = Sigmoid::new();
        let z = s.forward(&Tensor::<f64>::from_vec(&[1], vec![0.0]).unwrap(), Mode::Eval).unwrap();
        assert_eq!(z.data(), &[0.5]);
        let sorted = Tensor::<f64>::from_vec(&[6], vec![-800.0, -3.0, -0.1, 0.0, 2.0, 40.0]).unwrap();
        let out = s.forward(&sorted, Mode::Eval).unwrap();
        assert!(out.data().windows(2).all(|w| w[0] <= w[1]));
        let moderate = Tensor::<f64>::from_vec(&[3], vec![-30.0, 0.3, 30.0]).unwrap();
        let out = s.forward(&moderate, Mode::Eval).unwrap();
        assert!(out.data().iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn dense_examples() {
        let mut d = Dense::<f64>::new(3, 3, &mut rng()).unwrap();
        d.weight.data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let x = Tensor::from_vec(&[1, 3], vec![0.5, -2.0, 7.0]).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval).unwrap().data(), x.data());

        d.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
        d.bias.data_mut().copy_from_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(d.forward(&x, Mode::Eval).unwrap().data(), &[1.0, 2.0, 3.0]);

        let mut d = Dense::<f64>::new(5, 2, &mut rng()).unwrap();
        d.bias.data_mut().copy_from_slice(&[0.3, -0.7]);
        let x = random_tensor(&[3, 5], 4);
        let y = d.forward(&x, Mode::Eval).unwrap();
        for b in 0..3 {
            for o in 0..2 {
                let expect: f64 = (0..5).map(|i| d.weight.data()[o * 5 + i] * x.data()[b * 5 + i]).sum::<f64>()
                    + d.bias.data()[o];
                assert!((y.data()[b * 2 + o] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dropout_modes() {
        let x = random_tensor(&[10, 10], 5);
        let mut d = Dropout::<f64>::new(0.0, 1).unwrap();
        assert_eq!(d.forward(&x, Mode::Train).unwrap(), x);
        let mut d = Dropout::<f64>::new(0.7, 1).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval).unwrap(), x);
        assert!(Dropout::<f64>::new(1.0, 1).is_err());
    }

    #[test]
    fn dropout_survivor_statistics() {
        let n = 1_000_000;
        let x = Tensor::<f64>::filled(&[1, n], 1.0);
        let mut d = Dropout::<f64>::new(0.5, 9).unwrap();
        let y = d.forward(&x, Mode::Train).unwrap();
        let survivors = y.data().iter().filter(|v| **v != 0.0).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((survivors - 0.5 * n as f64).abs() < 3.0 * sigma);
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn gradients_accumulate_across_backward_passes() {
        let mut conv = Conv2d::<f64>::new(2, 2, 3, 1, &mut rng()).unwrap();
        let x = random_tensor(&[2, 2, 3, 3], 6);
        let y = conv.forward(&x, Mode::Train).unwrap();
        let g = Tensor::filled(y.shape(), 1.0);
        conv.backward(&g).unwrap();
        let once = conv.weight.grad().unwrap().to_vec();
        conv.backward(&g).unwrap();
        for (a, b) in conv.weight.grad().unwrap().iter().zip(&once) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn conv_backward_is_thread_count_independent() {
        let mut conv = Conv2d::<f32>::new(3, 4, 3, 2, &mut rng()).unwrap();
        let x: Tensor<f32> = random_tensor(&[13, 3, 5, 9], 8).cast();
        let y = conv.forward(&x, Mode::Train).unwrap();
        let g = Tensor::filled(y.shape(), 0.5f32);
        let run = |threads: usize, conv: &mut Conv2d<f32>| {
            conv.zero_grad();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let gx = pool.install(|| conv.backward(&g).unwrap());
            (gx, conv.weight.grad().unwrap().to_vec())
        };
        let (gx1, gw1) = run(1, &mut conv);
        let (gx3, gw3) = run(3, &mut conv);
        assert_eq!(gx1, gx3);
        assert_eq!(gw1, gw3);
    }
}
