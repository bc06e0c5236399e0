//! Central finite-difference gradient checking for the training losses.
//!
//! The checker evaluates every loss through forward passes only, so it
//! stays independent of the analytic backward path it validates. Sampled
//! check configurations are rejected while any hidden pre-activation or
//! any prediction gap sits within kink distance of a non-smooth point,
//! keeping central differences trustworthy.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::data::make_moons;
use crate::discrepancy;
use crate::error::invalid;
use crate::matrix::Matrix;
use crate::rng;
use crate::tensor_net::{cross_entropy, softmax, Network};
use crate::trainer::{CddLoss, L1Loss, ModelTriple, TrainConfig};
use crate::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Pre-activations and prediction gaps must clear this margin for a sample
/// to be accepted.
const KINK_MARGIN: f64 = 1e-3;

/// The batch losses whose analytic gradients get checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Cdd,
    L1,
    Entropy,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::CrossEntropy,
        LossKind::Cdd,
        LossKind::L1,
        LossKind::Entropy,
    ];
}

/// A random generator/bi-classifier triple with a batch, safely away from
/// ReLU and L1 kinks.
pub struct CheckSample {
    pub generator: Network,
    pub c1: Network,
    pub c2: Network,
    pub x: Matrix,
    pub labels: Vec<usize>,
}

/// Draws a random check configuration, resampling until it clears the kink
/// margin. Deterministic per seed.
pub fn sample_far_from_kinks(seed: u64) -> Result<CheckSample> {
    let mut r = rng::stream(seed, "gradcheck");
    for _ in 0..200 {
        let in_dim = r.random_range(2..=4usize);
        let hidden = r.random_range(4..=8usize);
        let feat = r.random_range(3..=6usize);
        let k = r.random_range(2..=4usize);
        let batch = r.random_range(3..=6usize);
        let generator = Network::init(&[in_dim, hidden, feat], r.next_u64())?;
        let c1 = Network::init(&[feat, hidden, k], r.next_u64())?;
        let c2 = Network::init(&[feat, hidden, k], r.next_u64())?;
        let mut x = Matrix::zeros(batch, in_dim);
        for v in x.data_mut() {
            *v = r.random_range(-2.0..2.0);
        }
        let labels: Vec<usize> = (0..batch).map(|_| r.random_range(0..k)).collect();
        let sample = CheckSample {
            generator,
            c1,
            c2,
            x,
            labels,
        };
        if kink_distance(&sample)? > KINK_MARGIN {
            return Ok(sample);
        }
    }
    Err(invalid("could not sample a kink-free configuration"))
}

/// Distance to the nearest non-smooth point: the smallest hidden
/// pre-activation magnitude across all three networks and the smallest
/// per-class prediction gap between the classifiers.
fn kink_distance(s: &CheckSample) -> Result<f64> {
    let mut min = f64::INFINITY;
    let (feats, gc) = s.generator.forward(&s.x)?;
    let (z1, c1c) = s.c1.forward(&feats)?;
    let (z2, c2c) = s.c2.forward(&feats)?;
    for cache in [&gc, &c1c, &c2c] {
        let hidden = cache.preactivations().len() - 1;
        for pre in &cache.preactivations()[..hidden] {
            for v in pre.data() {
                min = min.min(v.abs());
            }
        }
    }
    for i in 0..s.x.rows() {
        let p1 = softmax(z1.row(i))?;
        let p2 = softmax(z2.row(i))?;
        for (a, b) in p1.iter().zip(p2.iter()) {
            min = min.min((a - b).abs());
        }
    }
    Ok(min)
}

/// Forward-only loss evaluation.
pub fn forward_loss(
    generator: &Network,
    c1: &Network,
    c2: &Network,
    loss: LossKind,
    x: &Matrix,
    labels: &[usize],
) -> Result<f64> {
    let feats = generator.infer(x)?;
    let z1 = c1.infer(&feats)?;
    let z2 = c2.infer(&feats)?;
    let mut sum = 0.0;
    for i in 0..x.rows() {
        let p1 = softmax(z1.row(i))?;
        let p2 = softmax(z2.row(i))?;
        sum += match loss {
            LossKind::CrossEntropy => {
                0.5 * (cross_entropy(&p1, labels[i])? + cross_entropy(&p2, labels[i])?)
            }
            LossKind::Cdd => discrepancy::cdd_slices(&p1, &p2),
            LossKind::L1 => discrepancy::l1_slices(&p1, &p2),
            LossKind::Entropy => {
                0.5 * (discrepancy::entropy_slices(&p1) + discrepancy::entropy_slices(&p2))
            }
        };
    }
    Ok(sum / x.rows() as f64)
}

/// Relative error with an absolute-noise floor for near-zero gradients.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Maximum relative error between the analytic gradient of `loss` and its
/// central finite difference, over every parameter of all three networks.
pub fn max_relative_error(sample: &CheckSample, loss: LossKind) -> Result<f64> {
    let triple = ModelTriple::from_networks(
        sample.generator.clone(),
        sample.c1.clone(),
        sample.c2.clone(),
        TrainConfig::default().optimizer,
        1.0,
    )?;
    let analytic: Vec<f64> = match loss {
        LossKind::CrossEntropy => {
            let sl = triple.source_loss(&sample.x, &sample.labels)?;
            flatten(&sl.generator.flat(), &sl.c1.flat(), &sl.c2.flat())
        }
        LossKind::Cdd => {
            let tl = triple.target_loss(&sample.x, &CddLoss, 1.0, 0.0)?;
            flatten(&tl.generator.flat(), &tl.c1.flat(), &tl.c2.flat())
        }
        LossKind::L1 => {
            let tl = triple.target_loss(&sample.x, &L1Loss, 1.0, 0.0)?;
            flatten(&tl.generator.flat(), &tl.c1.flat(), &tl.c2.flat())
        }
        LossKind::Entropy => {
            let tl = triple.target_loss(&sample.x, &CddLoss, 0.0, 1.0)?;
            flatten(&tl.generator.flat(), &tl.c1.flat(), &tl.c2.flat())
        }
    };

    let g_len = sample.generator.flat_params().len();
    let c1_len = sample.c1.flat_params().len();
    let params = flatten(
        &sample.generator.flat_params(),
        &sample.c1.flat_params(),
        &sample.c2.flat_params(),
    );
    if analytic.len() != params.len() {
        return Err(invalid("gradient and parameter layouts disagree"));
    }

    let eval = |flat: &[f64]| -> Result<f64> {
        let mut g = sample.generator.clone();
        let mut a = sample.c1.clone();
        let mut b = sample.c2.clone();
        g.set_flat_params(&flat[..g_len])?;
        a.set_flat_params(&flat[g_len..g_len + c1_len])?;
        b.set_flat_params(&flat[g_len + c1_len..])?;
        forward_loss(&g, &a, &b, loss, &sample.x, &sample.labels)
    };

    let mut worst = 0.0f64;
    let mut perturbed = params.clone();
    for i in 0..params.len() {
        perturbed[i] = params[i] + FD_STEP;
        let plus = eval(&perturbed)?;
        perturbed[i] = params[i] - FD_STEP;
        let minus = eval(&perturbed)?;
        perturbed[i] = params[i];
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

fn flatten(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len() + c.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.extend_from_slice(c);
    out
}

/// Hand-built descent sanity: a tiny supervised problem where one analytic
/// step must reduce the loss it differentiates.
pub fn descent_probe(seed: u64) -> Result<(f64, f64)> {
    let ds = make_moons(8, 0.05, seed)?;
    let mut cfg = TrainConfig::default();
    cfg.seed = seed;
    cfg.optimizer.base_lr = 1e-3;
    cfg.optimizer.momentum = 0.0;
    cfg.optimizer.weight_decay = 0.0;
    let mut triple = ModelTriple::init(&cfg)?;
    let before = triple.source_loss(ds.features(), ds.labels())?.loss;
    triple.step_a(ds.features(), ds.labels())?;
    let after = triple.source_loss(ds.features(), ds.labels())?.loss;
    Ok((before, after))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_is_deterministic_and_clears_margin() {
        let a = sample_far_from_kinks(5).unwrap();
        let b = sample_far_from_kinks(5).unwrap();
        assert_eq!(a.generator.flat_params(), b.generator.flat_params());
        assert_eq!(a.x.data(), b.x.data());
        assert!(kink_distance(&a).unwrap() > KINK_MARGIN);
    }

    #[test]
    fn relative_error_floors_tiny_gradients() {
        assert_eq!(relative_error(1e-9, -1e-9), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spot_check_one_sample_all_losses() {
        let s = sample_far_from_kinks(1).unwrap();
        for loss in LossKind::ALL {
            let err = max_relative_error(&s, loss).unwrap();
            assert!(err < 1e-4, "{loss:?} gradient error {err}");
        }
    }
}
