//! Dense feed-forward networks with exact analytic gradients and an
//! annealed SGD-with-momentum optimizer.
//!
//! A [`Network`] is a chain of affine layers; hidden layers apply ReLU, the
//! final layer emits raw logits. [`Network::backward`] returns parameter
//! gradients averaged over the batch plus per-sample input gradients, so
//! classifier gradients can be chained into a generator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::invalid;
use crate::matrix::Matrix;
use crate::rng;
use crate::{Error, Result};

/// Probability floor keeping log-losses finite under fully confident
/// wrong predictions.
pub const PROB_FLOOR: f64 = 1e-12;

/// One affine layer: `z = W x + b`, weight shape `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weight: Matrix,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(invalid(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                weight.rows()
            )));
        }
        if !bias.iter().all(|v| v.is_finite()) {
            return Err(invalid("bias entries must be finite"));
        }
        Ok(DenseLayer { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

/// Feed-forward network: ReLU on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Per-layer gradient buffers, shape-matched to a [`Network`].
#[derive(Debug, Clone)]
pub struct Gradients {
    layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone)]
pub struct LayerGradient {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Activations cached by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    preacts: Vec<Matrix>,
}

impl ForwardCache {
    pub(crate) fn preactivations(&self) -> &[Matrix] {
        &self.preacts
    }
}

impl Network {
    /// Random initialization: uniform `±1/sqrt(in_dim)` weights, zero biases.
    /// Deterministic for a fixed seed.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Network> {
        if layer_dims.len() < 2 {
            return Err(invalid(format!(
                "need at least 2 layer dims, got {}",
                layer_dims.len()
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(invalid("layer dims must be positive"));
        }
        let mut r = rng::seeded(seed);
        let mut layers = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            let (in_dim, out_dim) = (w[0], w[1]);
            let scale = 1.0 / libm::sqrt(in_dim as f64);
            let mut weight = Matrix::zeros(out_dim, in_dim);
            for v in weight.data_mut() {
                *v = r.random_range(-scale..scale);
            }
            layers.push(DenseLayer {
                weight,
                bias: vec![0.0; out_dim],
            });
        }
        Ok(Network { layers })
    }

    /// Rebuilds a network from explicit layers, validating the dimension
    /// chain.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Network> {
        if layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(invalid(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// All parameters flattened in layer order (weights row-major, then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Writes flattened parameters back. Length must match [`Self::flat_params`].
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let needed: usize = self
            .layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum();
        if params.len() != needed {
            return Err(invalid(format!(
                "expected {needed} parameters, got {}",
                params.len()
            )));
        }
        let mut pos = 0;
        for l in &mut self.layers {
            let wn = l.weight.data().len();
            l.weight.data_mut().copy_from_slice(&params[pos..pos + wn]);
            pos += wn;
            let bn = l.bias.len();
            l.bias.copy_from_slice(&params[pos..pos + bn]);
            pos += bn;
        }
        Ok(())
    }

    /// Batched forward pass. Returns the output logits and the cache needed
    /// by [`Self::backward`].
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(invalid(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let batch = x.rows();
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(batch, layer.out_dim());
            for b in 0..batch {
                let xin = cur.row(b);
                let zr = z.row_mut(b);
                for o in 0..layer.out_dim() {
                    let wrow = layer.weight.row(o);
                    let mut acc = layer.bias[o];
                    for (wi, xi) in wrow.iter().zip(xin.iter()) {
                        acc += wi * xi;
                    }
                    zr[o] = acc;
                }
            }
            inputs.push(cur);
            if li < last {
                let mut a = z.clone();
                for v in a.data_mut() {
                    if *v <= 0.0 {
                        *v = 0.0;
                    }
                }
                preacts.push(z);
                cur = a;
            } else {
                preacts.push(z.clone());
                cur = z;
            }
        }
        Ok((cur, ForwardCache { inputs, preacts }))
    }

    /// Forward pass without keeping the cache.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x).map(|(out, _)| out)
    }

    /// Backward pass.
    ///
    /// `upstream[i][k]` is the gradient of sample `i`'s loss with respect to
    /// output logit `k`. Parameter gradients come back averaged over the
    /// batch; the returned input gradient stays per-sample so it can be fed
    /// as `upstream` to an earlier network.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Gradients, Matrix)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(invalid("forward cache does not match network depth"));
        }
        let batch = cache.inputs[0].rows();
        if upstream.rows() != batch || upstream.cols() != self.output_dim() {
            return Err(invalid(format!(
                "upstream gradient is {}x{}, expected {}x{}",
                upstream.rows(),
                upstream.cols(),
                batch,
                self.output_dim()
            )));
        }
        let inv_batch = 1.0 / batch as f64;
        let last = self.layers.len() - 1;
        let mut grads = Gradients::zeros_like(self);
        let mut g = upstream.clone();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let pre = &cache.preacts[li];
            if pre.rows() != batch || pre.cols() != layer.out_dim() {
                return Err(invalid("forward cache does not match this batch"));
            }
            // ReLU gate on hidden layers: zero exactly where pre-activation <= 0.
            if li < last {
                for (gv, pv) in g.data_mut().iter_mut().zip(pre.data().iter()) {
                    if *pv <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            let xin = &cache.inputs[li];
            let lg = &mut grads.layers[li];
            for b in 0..batch {
                let gz = g.row(b);
                let xr = xin.row(b);
                for o in 0..layer.out_dim() {
                    let go = gz[o] * inv_batch;
                    lg.bias[o] += go;
                    let wrow = lg.weight.row_mut(o);
                    for (wg, xi) in wrow.iter_mut().zip(xr.iter()) {
                        *wg += go * xi;
                    }
                }
            }
            let mut gin = Matrix::zeros(batch, layer.in_dim());
            for b in 0..batch {
                let gz = g.row(b);
                let gr = gin.row_mut(b);
                for o in 0..layer.out_dim() {
                    let go = gz[o];
                    if go == 0.0 {
                        continue;
                    }
                    let wrow = layer.weight.row(o);
                    for (gi, wi) in gr.iter_mut().zip(wrow.iter()) {
                        *gi += go * wi;
                    }
                }
            }
            g = gin;
        }
        Ok((grads, g))
    }
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Gradients {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGradient] {
        &self.layers
    }

    /// `self += factor * other`.
    pub fn scaled_add(&mut self, other: &Gradients, factor: f64) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(invalid("gradient shapes do not match"));
        }
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            if a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() {
                return Err(invalid("gradient shapes do not match"));
            }
            for (av, bv) in a.weight.data_mut().iter_mut().zip(b.weight.data().iter()) {
                *av += factor * bv;
            }
            for (av, bv) in a.bias.iter_mut().zip(b.bias.iter()) {
                *av += factor * bv;
            }
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }
}

/// Numerically stable softmax of a logit row.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(invalid("softmax input is empty"));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(invalid("softmax input must be finite"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Row-wise softmax of a logit matrix.
pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let p = softmax(logits.row(r))?;
        out.row_mut(r).copy_from_slice(&p);
    }
    Ok(out)
}

/// Cross-entropy `-log(p[label] + PROB_FLOOR)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(invalid(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-libm::log(probs[label] + PROB_FLOOR))
}

/// Exact gradient of the floored cross-entropy with respect to the logits
/// that produced `probs` via softmax.
pub fn cross_entropy_grad_logits(probs: &[f64], label: usize) -> Result<Vec<f64>> {
    if label >= probs.len() {
        return Err(invalid(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let py = probs[label];
    let factor = py / (py + PROB_FLOOR);
    Ok(probs
        .iter()
        .enumerate()
        .map(|(k, &pk)| {
            let delta = if k == label { 1.0 } else { 0.0 };
            factor * (pk - delta)
        })
        .collect())
}

/// Pulls a gradient on softmax probabilities back to the logits:
/// `dz_k = p_k (g_k - sum_m p_m g_m)`.
pub fn softmax_backprop(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    debug_assert_eq!(probs.len(), grad_probs.len());
    let dot: f64 = probs.iter().zip(grad_probs.iter()).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(grad_probs.iter())
        .map(|(&p, &g)| p * (g - dot))
        .collect()
}

/// SGD-with-momentum hyperparameters. The effective learning rate anneals
/// as `base_lr / (1 + anneal_a * progress)^anneal_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub anneal_a: f64,
    pub anneal_b: f64,
}

/// Optimizer state for one parameter group (one network).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    cfg: OptimizerConfig,
    velocity: Vec<LayerGradient>,
    progress: f64,
}

impl OptimizerState {
    pub fn new(net: &Network, cfg: OptimizerConfig) -> Result<OptimizerState> {
        if !(cfg.base_lr > 0.0) || !cfg.base_lr.is_finite() {
            return Err(invalid("base_lr must be positive"));
        }
        if !(0.0..1.0).contains(&cfg.momentum) {
            return Err(invalid("momentum must be in [0, 1)"));
        }
        if cfg.weight_decay < 0.0 || cfg.anneal_a < 0.0 || cfg.anneal_b < 0.0 {
            return Err(invalid(
                "weight_decay and annealing constants must be nonnegative",
            ));
        }
        let velocity = Gradients::zeros_like(net).layers;
        Ok(OptimizerState {
            cfg,
            velocity,
            progress: 0.0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    /// Sets the annealing progress `iteration / max_iteration`.
    pub fn set_progress(&mut self, progress: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&progress) {
            return Err(invalid("progress must be in [0, 1]"));
        }
        self.progress = progress;
        Ok(())
    }

    pub fn effective_lr(&self) -> f64 {
        self.cfg.base_lr / libm::pow(1.0 + self.cfg.anneal_a * self.progress, self.cfg.anneal_b)
    }

    /// One SGD step: `v <- m v - lr (g + wd th)`, `th <- th + v`.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(invalid("gradient shapes do not match network"));
        }
        let lr = self.effective_lr();
        let m = self.cfg.momentum;
        let wd = self.cfg.weight_decay;
        for ((layer, g), v) in net
            .layers
            .iter_mut()
            .zip(grads.layers.iter())
            .zip(self.velocity.iter_mut())
        {
            if g.weight.rows() != layer.weight.rows() || g.weight.cols() != layer.weight.cols() {
                return Err(invalid("gradient shapes do not match network"));
            }
            for ((w, gv), vv) in layer
                .weight
                .data_mut()
                .iter_mut()
                .zip(g.weight.data().iter())
                .zip(v.weight.data_mut().iter_mut())
            {
                *vv = m * *vv - lr * (gv + wd * *w);
                *w += *vv;
            }
            for ((b, gv), vv) in layer
                .bias
                .iter_mut()
                .zip(g.bias.iter())
                .zip(v.bias.iter_mut())
            {
                *vv = m * *vv - lr * (gv + wd * *b);
                *b += *vv;
            }
        }
        if !net.layers.iter().all(|l| l.weight.all_finite()) {
            return Err(Error::NonFinite("parameters diverged during update".into()));
        }
        Ok(())
    }
}
