use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::nn::{BatchNorm2d, Conv2d, Dense, Dropout, Layer, Mode, Relu, Scalar, Sigmoid, Tensor};
use crate::rng::{derive_seed, label};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocNetConfig {
    pub n_residual_blocks: usize,
    pub convs_per_block: usize,
    /// Width of the stem output and of every residual block.
    pub base_channels: usize,
    pub kernel_size: usize,
    /// Dilations cycled across the residual blocks.
    pub dilation_schedule: Vec<usize>,
    pub attention_kernel_size: usize,
    /// Channels of the convolution before flatten.
    pub head_channels: usize,
    pub dropout_rate: f64,
    /// `[rows, taps, channels]` of one input sample. Taken from the dataset
    /// when a model is built for training, so config files may omit it.
    #[serde(default)]
    pub input_shape: [usize; 3],
    pub output_dim: usize,
    pub use_attention: bool,
    pub use_dilation: bool,
}

impl LocNetConfig {
    /// Full-size network; 106-wide blocks put the default CIR+RSRP input
    /// (36 x 256 x 2) at about 2.9 M parameters.
    pub fn paper(input_shape: [usize; 3]) -> Self {
        Self {
            n_residual_blocks: 13,
            convs_per_block: 2,
            base_channels: 106,
            kernel_size: 3,
            dilation_schedule: vec![1, 2, 4],
            attention_kernel_size: 3,
            head_channels: 8,
            dropout_rate: 0.3,
            input_shape,
            output_dim: 2,
            use_attention: true,
            use_dilation: true,
        }
    }

    /// Reduced-width network used for laptop-scale experiments. With only
    /// 5000 samples the dense readout overfits unless dropout is heavy.
    pub fn desk(input_shape: [usize; 3]) -> Self {
        Self {
            n_residual_blocks: 2,
            base_channels: 4,
            head_channels: 4,
            dropout_rate: 0.7,
            ..Self::paper(input_shape)
        }
    }

    /// Very small network for gradient checks.
    pub fn tiny(input_shape: [usize; 3]) -> Self {
        Self {
            n_residual_blocks: 2,
            base_channels: 3,
            head_channels: 2,
            dilation_schedule: vec![1, 2],
            dropout_rate: 0.2,
            ..Self::paper(input_shape)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_residual_blocks == 0 {
            bail!(Config, "LocNet needs at least one residual block");
        }
        if self.convs_per_block != 2 {
            bail!(Config, "residual blocks hold exactly two convolutions, got {}", self.convs_per_block);
        }
        if self.output_dim != 2 {
            bail!(Config, "LocNet predicts (x, y); output_dim must be 2, got {}", self.output_dim);
        }
        if self.dilation_schedule.is_empty() || self.dilation_schedule.contains(&0) {
            bail!(Config, "dilation schedule entries must be >= 1");
        }
        if self.base_channels == 0 || self.head_channels == 0 || self.kernel_size == 0 || self.attention_kernel_size == 0
        {
            bail!(Config, "channel counts and kernel sizes must be positive");
        }
        if self.input_shape.contains(&0) {
            bail!(Config, "input shape {:?} has an empty dimension", self.input_shape);
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            bail!(Config, "dropout rate must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn block_dilation(&self, block: usize) -> usize {
        if self.use_dilation {
            self.dilation_schedule[block % self.dilation_schedule.len()]
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Attention,
    Dilation,
    Both,
}

impl std::str::FromStr for Ablation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Ablation::Attention),
            "dilation" => Ok(Ablation::Dilation),
            "both" => Ok(Ablation::Both),
            other => bail!(InvalidArgument, "unknown ablation '{}' (attention|dilation|both)", other),
        }
    }
}

impl LocNetConfig {
    pub fn ablated(&self, disable: Ablation) -> Self {
        let mut cfg = self.clone();
        match disable {
            Ablation::Attention => cfg.use_attention = false,
            Ablation::Dilation => cfg.use_dilation = false,
            Ablation::Both => {
                cfg.use_attention = false;
                cfg.use_dilation = false;
            }
        }
        cfg
    }
}

/// `y = x + ReLU(BN(conv(ReLU(BN(conv(x))))))`.
#[derive(Debug, Clone)]
pub struct ResidualBlock<T> {
    pub conv1: Conv2d<T>,
    pub bn1: BatchNorm2d<T>,
    relu1: Relu,
    pub conv2: Conv2d<T>,
    pub bn2: BatchNorm2d<T>,
    relu2: Relu,
}

impl<T: Scalar> ResidualBlock<T> {
    pub fn new(channels: usize, kernel: usize, dilation: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            conv1: Conv2d::new(channels, channels, kernel, dilation, rng)?,
            bn1: BatchNorm2d::new(channels)?,
            relu1: Relu::new(),
            conv2: Conv2d::new(channels, channels, kernel, dilation, rng)?,
            bn2: BatchNorm2d::new(channels)?,
            relu2: Relu::new(),
        })
    }
}

impl<T: Scalar> Layer<T> for ResidualBlock<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let a = self.conv1.forward(input, mode)?;
        let a = self.bn1.forward(&a, mode)?;
        let a = self.relu1.forward(&a, mode)?;
        let b = self.conv2.forward(&a, mode)?;
        let b = self.bn2.forward(&b, mode)?;
        let b = self.relu2.forward(&b, mode)?;
        crate::nn::add(input, &b)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.relu2.backward(grad_output)?;
        let g = self.bn2.backward(&g)?;
        let g = self.conv2.backward(&g)?;
        let g = self.relu1.backward(&g)?;
        let g = self.bn1.backward(&g)?;
        let g = self.conv1.backward(&g)?;
        crate::nn::add(grad_output, &g)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.conv1.params();
        p.extend(self.bn1.params());
        p.extend(self.conv2.params());
        p.extend(self.bn2.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.conv1.params_mut();
        p.extend(self.bn1.params_mut());
        p.extend(self.conv2.params_mut());
        p.extend(self.bn2.params_mut());
        p
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        let mut b = self.bn1.buffers();
        b.extend(self.bn2.buffers());
        b
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut b = self.bn1.buffers_mut();
        b.extend(self.bn2.buffers_mut());
        b
    }

    fn kink_signature(&self) -> u64 {
        Layer::<T>::kink_signature(&self.relu1) ^ Layer::<T>::kink_signature(&self.relu2).rotate_left(17)
    }
}

/// Sigmoid-activated convolution whose output gates its own input.
#[derive(Debug, Clone)]
pub struct AttentionGate<T> {
    pub conv: Conv2d<T>,
    sigmoid: Sigmoid<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> AttentionGate<T> {
    pub fn new(channels: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(channels, channels, kernel, 1, rng)?,
            sigmoid: Sigmoid::new(),
            input: None,
        })
    }

    /// Attention map from the last forward pass.
    pub fn attention_map(&self) -> Option<&Tensor<T>> {
        self.sigmoid.output()
    }
}

impl<T: Scalar> Layer<T> for AttentionGate<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let pre = self.conv.forward(input, mode)?;
        let map = self.sigmoid.forward(&pre, mode)?;
        map.ensure_shape(input.shape(), "attention map")?;
        self.input = Some(input.clone());
        crate::nn::mul(input, &map)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| crate::Error::InvalidArgument("attention: backward before forward".into()))?;
        let map = self.sigmoid.output().expect("map cached with input");
        let through_gate = crate::nn::mul(grad_output, map)?;
        let to_map = crate::nn::mul(grad_output, input)?;
        let to_pre = self.sigmoid.backward(&to_map)?;
        let through_conv = self.conv.backward(&to_pre)?;
        crate::nn::add(&through_gate, &through_conv)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        self.conv.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.conv.params_mut()
    }
}

/// Stem convolution, residual trunk with a long skip, optional attention
/// gate, head convolution, flatten, dropout and a dense `(x, y)` regressor.
#[derive(Debug, Clone)]
pub struct LocNet<T> {
    config: LocNetConfig,
    pub stem: Conv2d<T>,
    pub blocks: Vec<ResidualBlock<T>>,
    pub attention: Option<AttentionGate<T>>,
    pub head: Conv2d<T>,
    pub dropout: Dropout<T>,
    pub dense: Dense<T>,
    trunk_output: Option<Tensor<T>>,
}

impl<T: Scalar> LocNet<T> {
    pub fn new(config: LocNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label::INIT, 0));
        let [rows, taps, channels] = config.input_shape;
        let width = config.base_channels;
        let stem = Conv2d::new(channels, width, config.kernel_size, 1, &mut rng)?;
        let blocks = (0..config.n_residual_blocks)
            .map(|b| ResidualBlock::new(width, config.kernel_size, config.block_dilation(b), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let attention = if config.use_attention {
            Some(AttentionGate::new(width, config.attention_kernel_size, &mut rng)?)
        } else {
            None
        };
        let head = Conv2d::new(width, config.head_channels, config.kernel_size, 1, &mut rng)?;
        let dropout = Dropout::new(config.dropout_rate, derive_seed(seed, label::DROPOUT, 0))?;
        let dense = Dense::new(config.head_channels * rows * taps, config.output_dim, &mut rng)?;
        Ok(Self {
            config,
            stem,
            blocks,
            attention,
            head,
            dropout,
            dense,
            trunk_output: None,
        })
    }

    pub fn config(&self) -> &LocNetConfig {
        &self.config
    }

    /// Output of the long-skip junction from the last forward pass; this is
    /// the tensor entering the attention layer.
    pub fn trunk_output(&self) -> Option<&Tensor<T>> {
        self.trunk_output.as_ref()
    }

    pub fn set_output_bias(&mut self, xy: [f64; 2]) {
        self.dense.bias.data_mut()[0] = T::lit(xy[0]);
        self.dense.bias.data_mut()[1] = T::lit(xy[1]);
    }

    pub fn freeze_dropout_mask(&mut self, freeze: bool) {
        self.dropout.freeze_mask(freeze);
    }

    /// Forward pass on `[N, C, rows, taps]`, returning `[N, 2]`.
    pub fn predict(&mut self, batch: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward(batch, mode)
    }

    /// Parameter tensors keyed by a stable name, in optimizer order.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        out.push(("stem.weight".into(), &self.stem.weight));
        out.push(("stem.bias".into(), &self.stem.bias));
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.conv1.weight"), &b.conv1.weight));
            out.push((format!("block{i}.conv1.bias"), &b.conv1.bias));
            out.push((format!("block{i}.bn1.gamma"), &b.bn1.gamma));
            out.push((format!("block{i}.bn1.beta"), &b.bn1.beta));
            out.push((format!("block{i}.conv2.weight"), &b.conv2.weight));
            out.push((format!("block{i}.conv2.bias"), &b.conv2.bias));
            out.push((format!("block{i}.bn2.gamma"), &b.bn2.gamma));
            out.push((format!("block{i}.bn2.beta"), &b.bn2.beta));
        }
        if let Some(a) = &self.attention {
            out.push(("attention.weight".into(), &a.conv.weight));
            out.push(("attention.bias".into(), &a.conv.bias));
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out.push(("dense.weight".into(), &self.dense.weight));
        out.push(("dense.bias".into(), &self.dense.bias));
        out
    }

    pub fn named_buffers(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.bn1.running_mean"), &b.bn1.running_mean));
            out.push((format!("block{i}.bn1.running_var"), &b.bn1.running_var));
            out.push((format!("block{i}.bn2.running_mean"), &b.bn2.running_mean));
            out.push((format!("block{i}.bn2.running_var"), &b.bn2.running_var));
        }
        out
    }

    /// Parameters followed by buffers, matching [`LocNet::named_params`] then
    /// [`LocNet::named_buffers`].
    pub fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.stem.params_mut();
        let mut buffers = Vec::new();
        for b in &mut self.blocks {
            v.extend(b.conv1.params_mut());
            v.push(&mut b.bn1.gamma);
            v.push(&mut b.bn1.beta);
            v.extend(b.conv2.params_mut());
            v.push(&mut b.bn2.gamma);
            v.push(&mut b.bn2.beta);
            buffers.push(&mut b.bn1.running_mean);
            buffers.push(&mut b.bn1.running_var);
            buffers.push(&mut b.bn2.running_mean);
            buffers.push(&mut b.bn2.running_var);
        }
        if let Some(a) = &mut self.attention {
            v.extend(a.params_mut());
        }
        v.extend(self.head.params_mut());
        v.extend(self.dense.params_mut());
        v.extend(buffers);
        v
    }

    pub fn state(&self) -> Vec<&Tensor<T>> {
        let mut v = self.params();
        v.extend(self.buffers());
        v
    }

    /// Copies weights from a model of the same architecture in another precision.
    pub fn load_state_from<U: Scalar>(&mut self, other: &LocNet<U>) -> Result<()> {
        if other.config != self.config {
            bail!(Shape, "cannot copy weights between different architectures");
        }
        for (dst, src) in self.state_mut().into_iter().zip(other.state()) {
            dst.data_mut()
                .iter_mut()
                .zip(src.data())
                .for_each(|(d, s)| *d = T::lit(s.to_f64_lossy()));
        }
        Ok(())
    }
}

impl<T: Scalar> Layer<T> for LocNet<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (_, c, h, w) = input.nchw("locnet")?;
        let [rows, taps, channels] = self.config.input_shape;
        if (c, h, w) != (channels, rows, taps) {
            bail!(
                Shape,
                "LocNet built for {}x{}x{} inputs, got {}x{}x{}",
                rows,
                taps,
                channels,
                h,
                w,
                c
            );
        }
        let stem_out = self.stem.forward(input, mode)?;
        let mut h = stem_out.clone();
        for block in &mut self.blocks {
            h = block.forward(&h, mode)?;
        }
        let trunk = crate::nn::add(&h, &stem_out)?;
        let gated = match &mut self.attention {
            Some(gate) => {
                let g = gate.forward(&trunk, mode)?;
                debug_assert!(gate
                    .attention_map()
                    .is_some_and(|m| m.data().iter().all(|v| *v >= T::zero() && *v <= T::one())));
                g
            }
            None => trunk.clone(),
        };
        self.trunk_output = Some(trunk);
        let head = self.head.forward(&gated, mode)?;
        let dropped = self.dropout.forward(&head, mode)?;
        self.dense.forward(&dropped, mode)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.dense.backward(grad_output)?;
        let g = self.dropout.backward(&g)?;
        let g = self.head.backward(&g)?;
        let g_trunk = match &mut self.attention {
            Some(gate) => gate.backward(&g)?,
            None => g,
        };
        let mut g_h = g_trunk.clone();
        for block in self.blocks.iter_mut().rev() {
            g_h = block.backward(&g_h)?;
        }
        let g_stem = crate::nn::add(&g_h, &g_trunk)?;
        self.stem.backward(&g_stem)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.stem.params_mut();
        for b in &mut self.blocks {
            p.extend(b.params_mut());
        }
        if let Some(a) = &mut self.attention {
            p.extend(a.params_mut());
        }
        p.extend(self.head.params_mut());
        p.extend(self.dense.params_mut());
        p
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        self.named_buffers().into_iter().map(|(_, t)| t).collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.blocks.iter_mut().flat_map(|b| b.buffers_mut()).collect()
    }

    fn kink_signature(&self) -> u64 {
        self.blocks
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, b)| acc ^ b.kink_signature().rotate_left(i as u32 * 7))
    }
}

/// `build` with the default seed of 0.
pub fn build<T: Scalar>(config: LocNetConfig) -> Result<LocNet<T>> {
    LocNet::new(config, 0)
}

pub fn build_ablation<T: Scalar>(config: &LocNetConfig, disable: Ablation, seed: u64) -> Result<LocNet<T>> {
    LocNet::new(config.ablated(disable), seed)
}

pub fn param_count<T: Scalar>(model: &LocNet<T>) -> usize {
    Layer::param_count(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(n: usize, shape: [usize; 3], seed: u64) -> Tensor<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let [rows, taps, c] = shape;
        Tensor::from_vec(
            &[n, c, rows, taps],
            (0..n * c * rows * taps).map(|_| r.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn paper_config_hits_parameter_budget() {
        let net = build::<f32>(LocNetConfig::paper([36, 256, 2])).unwrap();
        let n = param_count(&net);
        assert!((2_500_000..=3_300_000).contains(&n), "param count {n}");
    }

    #[test]
    fn attention_ablation_drops_exactly_the_gate() {
        let cfg = LocNetConfig::desk([16, 64, 2]);
        let full = build::<f32>(cfg.clone()).unwrap();
        let ablated = build_ablation::<f32>(&cfg, Ablation::Attention, 0).unwrap();
        let gate = full.attention.as_ref().unwrap().conv.param_count();
        assert_eq!(param_count(&full) - param_count(&ablated), gate);
        let w = cfg.base_channels;
        assert_eq!(gate, w * w * 9 + w);
        let no_dilation = build_ablation::<f32>(&cfg, Ablation::Dilation, 0).unwrap();
        assert_eq!(param_count(&no_dilation), param_count(&full));
        assert!(no_dilation.blocks.iter().all(|b| b.conv1.dilation == 1));
    }

    #[test]
    fn small_layer_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(Dense::<f32>::new(10, 2, &mut rng).unwrap().param_count(), 22);
        assert_eq!(Conv2d::<f32>::new(4, 8, 3, 1, &mut rng).unwrap().param_count(), 296);
    }

    #[test]
    fn zero_dense_predicts_its_bias() {
        let cfg = LocNetConfig::tiny([4, 8, 2]);
        let mut net = build::<f64>(cfg).unwrap();
        net.dense.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
        net.set_output_bias([60.0, 30.0]);
        let y = net.forward(&random_batch(3, [4, 8, 2], 1), Mode::Eval).unwrap();
        for p in y.data().chunks(2) {
            assert_eq!(p, &[60.0, 30.0]);
        }
    }

    #[test]
    fn zeroed_attention_gives_half_map() {
        let cfg = LocNetConfig::tiny([4, 8, 2]);
        let mut net = build::<f64>(cfg).unwrap();
        let gate = net.attention.as_mut().unwrap();
        gate.conv.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
        gate.conv.bias.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let y = net.forward(&random_batch(2, [4, 8, 2], 2), Mode::Train).unwrap();
        assert!(y.all_finite());
        let map = net.attention.as_ref().unwrap().attention_map().unwrap();
        assert_eq!(map.shape(), net.trunk_output().unwrap().shape());
        assert!(map.data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn zeroed_block_is_identity() {
        let cfg = LocNetConfig::tiny([4, 8, 2]);
        let mut net = build::<f64>(cfg).unwrap();
        let block = &mut net.blocks[0];
        for p in block.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let x = random_batch(3, [4, 8, 3], 3).reshape(&[3, 3, 4, 8]).unwrap();
        let y = block.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.data(), x.data());
        let y = block.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn long_skip_doubles_stem_when_trunk_is_neutral() {
        let cfg = LocNetConfig::tiny([4, 8, 2]);
        let mut net = build::<f64>(cfg).unwrap();
        for block in &mut net.blocks {
            for p in block.params_mut() {
                p.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let x = random_batch(2, [4, 8, 2], 4);
        net.forward(&x, Mode::Eval).unwrap();
        let stem = net.stem.clone().forward(&x, Mode::Eval).unwrap();
        let trunk = net.trunk_output().unwrap();
        for (t, s) in trunk.data().iter().zip(stem.data()) {
            assert_eq!(*t, 2.0 * s);
        }
    }

    #[test]
    fn eval_forward_is_batch_invariant() {
        let cfg = LocNetConfig::tiny([4, 8, 2]);
        let mut net = build::<f32>(cfg).unwrap();
        // give the running statistics non-trivial values
        for _ in 0..3 {
            net.forward(&random_batch(4, [4, 8, 2], 9).cast(), Mode::Train).unwrap();
        }
        let batch: Tensor<f32> = random_batch(8, [4, 8, 2], 5).cast();
        let all = net.forward(&batch, Mode::Eval).unwrap();
        let item = 64;
        let single = Tensor::from_vec(&[1, 2, 4, 8], batch.data()[3 * item..4 * item].to_vec()).unwrap();
        let one = net.forward(&single, Mode::Eval).unwrap();
        assert!((one.data()[0] - all.data()[6]).abs() < 1e-5);
        assert!((one.data()[1] - all.data()[7]).abs() < 1e-5);

        let mut rev = Vec::new();
        for i in (0..8).rev() {
            rev.extend_from_slice(&batch.data()[i * item..(i + 1) * item]);
        }
        let rev = net.forward(&Tensor::from_vec(&[8, 2, 4, 8], rev).unwrap(), Mode::Eval).unwrap();
        for i in 0..8 {
            assert_eq!(&rev.data()[2 * i..2 * i + 2], &all.data()[2 * (7 - i)..2 * (7 - i) + 2]);
        }
    }

    #[test]
    fn rejects_mismatched_input() {
        let mut net = build::<f64>(LocNetConfig::tiny([4, 8, 2])).unwrap();
        assert!(net.forward(&random_batch(2, [4, 8, 3], 1), Mode::Eval).is_err());
        let mut bad = LocNetConfig::tiny([4, 8, 2]);
        bad.output_dim = 3;
        assert!(build::<f64>(bad).is_err());
    }
}
