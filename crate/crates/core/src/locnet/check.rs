//! Finite-difference checks over every layer type and the composed network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttentionGate, LocNet, LocNetConfig, ResidualBlock};
use crate::error::{bail, Result};
use crate::nn::gradcheck::{check_euclidean_loss, check_layer, GradCheckConfig, GradCheckReport};
use crate::nn::{BatchNorm2d, Conv2d, Dense, Dropout, Relu, Sigmoid, Tensor};

/// Names accepted by [`gradient_suite`]'s `broken` argument, in run order.
pub const CHECKED_LAYERS: [&str; 11] = [
    "conv2d",
    "conv2d_dilated",
    "batch_norm",
    "relu",
    "sigmoid",
    "dropout",
    "dense",
    "residual_block",
    "attention_gate",
    "locnet",
    "euclidean_loss",
];

fn random_input(shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Tensor<f64>> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Runs every check once at `seed`. The layer named by `broken` gets its
/// analytic gradients scaled by 1.01 so the harness itself can be tested.
pub fn gradient_suite(seed: u64, base: &GradCheckConfig, broken: Option<&str>) -> Result<Vec<GradCheckReport>> {
    if let Some(name) = broken {
        if !CHECKED_LAYERS.contains(&name) {
            bail!(InvalidArgument, "unknown layer '{}'; expected one of {}", name, CHECKED_LAYERS.join(", "));
        }
    }
    let cfg_for = |name: &str| GradCheckConfig {
        corrupt_analytic: if broken == Some(name) { Some(1.01) } else { base.corrupt_analytic },
        ..base.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(CHECKED_LAYERS.len());
    let mut run = |name: &str, layer: &mut dyn FnMut(&GradCheckConfig, u64) -> Result<GradCheckReport>| -> Result<()> {
        out.push(layer(&cfg_for(name), seed)?);
        Ok(())
    };

    let x = random_input(&[2, 2, 4, 5], &mut rng)?;
    let mut conv = Conv2d::<f64>::new(2, 3, 3, 1, &mut rng)?;
    run("conv2d", &mut |c, s| check_layer("conv2d", &mut conv, &x, s, c))?;
    let mut dilated = Conv2d::<f64>::new(2, 2, 3, 2, &mut rng)?;
    run("conv2d_dilated", &mut |c, s| check_layer("conv2d_dilated", &mut dilated, &x, s, c))?;
    let mut bn = BatchNorm2d::<f64>::new(2)?;
    run("batch_norm", &mut |c, s| check_layer("batch_norm", &mut bn, &x, s, c))?;
    let mut relu = Relu::new();
    run("relu", &mut |c, s| check_layer("relu", &mut relu, &x, s, c))?;
    let mut sigmoid = Sigmoid::new();
    run("sigmoid", &mut |c, s| check_layer("sigmoid", &mut sigmoid, &x, s, c))?;
    let mut dropout = Dropout::<f64>::new(0.3, seed)?;
    dropout.freeze_mask(true);
    run("dropout", &mut |c, s| check_layer("dropout", &mut dropout, &x, s, c))?;
    let flat = random_input(&[3, 6], &mut rng)?;
    let mut dense = Dense::<f64>::new(6, 2, &mut rng)?;
    run("dense", &mut |c, s| check_layer("dense", &mut dense, &flat, s, c))?;
    let mut block = ResidualBlock::<f64>::new(2, 3, 2, &mut rng)?;
    run("residual_block", &mut |c, s| check_layer("residual_block", &mut block, &x, s, c))?;
    let mut gate = AttentionGate::<f64>::new(2, 3, &mut rng)?;
    run("attention_gate", &mut |c, s| check_layer("attention_gate", &mut gate, &x, s, c))?;

    let config = LocNetConfig::tiny([4, 5, 2]);
    let mut net = LocNet::<f64>::new(config, seed)?;
    net.freeze_dropout_mask(true);
    let batch = random_input(&[3, 2, 4, 5], &mut rng)?;
    run("locnet", &mut |c, s| check_layer("locnet", &mut net, &batch, s, c))?;
    run("euclidean_loss", &mut |c, s| check_euclidean_loss(s, 4, c))?;
    debug_assert!(out.iter().map(|r| r.name.as_str()).eq(CHECKED_LAYERS));
    Ok(out)
}

pub fn format_table(reports: &[GradCheckReport]) -> String {
    reports.iter().map(|r| format!("{r}\n")).collect()
}
