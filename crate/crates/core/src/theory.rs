//! Numerical estimators for the generalization-bound quantities: expected
//! determinacy disparity, its sup-based distribution discrepancy, empirical
//! Rademacher complexity, the ideal-joint-hypothesis error, and the
//! assembled bound report.
//!
//! Every sup over a hypothesis family is approximated by seeded gradient
//! ascent with restarts, so estimates carry optimization slack: raw values
//! may dip slightly negative and are reported unclipped alongside the
//! clipped values used in the assembled bound.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{BatchSampler, LabeledDataset};
use crate::discrepancy::{self, cdd, Simplex};
use crate::error::invalid;
use crate::matrix::Matrix;
use crate::rng::{self, derive_seed};
use crate::tensor_net::{
    cross_entropy, cross_entropy_grad_logits, softmax, softmax_backprop, softmax_rows, Gradients,
    Network, OptimizerConfig, OptimizerState,
};
use crate::Result;

/// A classifier-with-generator stack `x -> softmax(C(G(x)))`.
#[derive(Debug, Clone, Copy)]
pub struct Hypothesis<'a> {
    generator: &'a Network,
    classifier: &'a Network,
}

impl<'a> Hypothesis<'a> {
    pub fn new(generator: &'a Network, classifier: &'a Network) -> Result<Hypothesis<'a>> {
        if generator.output_dim() != classifier.input_dim() {
            return Err(invalid(
                "generator output dim does not match classifier input dim",
            ));
        }
        Ok(Hypothesis {
            generator,
            classifier,
        })
    }

    pub fn generator(&self) -> &Network {
        self.generator
    }

    /// Softmax outputs on a raw input batch.
    pub fn probs(&self, x: &Matrix) -> Result<Matrix> {
        let feats = self.generator.infer(x)?;
        softmax_rows(&self.classifier.infer(&feats)?)
    }

    /// 0/1 classification error under the argmax rule.
    pub fn error(&self, ds: &LabeledDataset) -> Result<f64> {
        let p = self.probs(ds.features())?;
        let wrong = ds
            .labels()
            .iter()
            .enumerate()
            .filter(|&(i, &y)| argmax(p.row(i)) != y)
            .count();
        Ok(wrong as f64 / ds.len() as f64)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean determinacy disparity of two stacks over a sample set.
pub fn expected_disparity(h1: &Hypothesis, h2: &Hypothesis, features: &Matrix) -> Result<f64> {
    let p1 = h1.probs(features)?;
    let p2 = h2.probs(features)?;
    let mut sum = 0.0;
    for i in 0..features.rows() {
        sum += cdd(
            &Simplex::new(p1.row(i).to_vec())?,
            &Simplex::new(p2.row(i).to_vec())?,
        )?;
    }
    Ok(sum / features.rows() as f64)
}

/// Settings for the sup approximation inside [`ddd_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DddConfig {
    /// Architecture of the auxiliary classifier head trained on the frozen
    /// generator's features.
    pub head_dims: Vec<usize>,
    pub restarts: usize,
    /// Gradient-ascent steps per restart.
    pub budget: usize,
    pub lr: f64,
    pub seed: u64,
}

impl DddConfig {
    pub fn with_head(head_dims: Vec<usize>, seed: u64) -> DddConfig {
        DddConfig {
            head_dims,
            restarts: 5,
            budget: 300,
            lr: 1.0,
            seed,
        }
    }
}

/// Determinacy disparity discrepancy between the empirical source and
/// target sets against the fixed stack `h`:
/// `sup_{h'} (mean_T cdd(h', h) - mean_S cdd(h', h))`, approximated by
/// training fresh classifier heads on the frozen generator's features.
///
/// Returns the best objective value observed, unclipped: finite-sample and
/// optimization slack can make it slightly negative. When both sample sets
/// are the identical matrix the objective is identically zero for every
/// head, so the estimate is exactly zero.
pub fn ddd_estimate(
    h: &Hypothesis,
    source_x: &Matrix,
    target_x: &Matrix,
    cfg: &DddConfig,
) -> Result<f64> {
    if cfg.budget < 1 {
        return Err(invalid("hypothesis budget must be at least 1"));
    }
    if cfg.restarts < 1 {
        return Err(invalid("need at least one restart"));
    }
    let feats_s = h.generator.infer(source_x)?;
    let feats_t = h.generator.infer(target_x)?;
    if cfg.head_dims.first() != Some(&feats_s.cols()) {
        return Err(invalid(format!(
            "head input dim must be {}",
            feats_s.cols()
        )));
    }
    let probs_s = softmax_rows(&h.classifier.infer(&feats_s)?)?;
    let probs_t = softmax_rows(&h.classifier.infer(&feats_t)?)?;

    let mut best = f64::NEG_INFINITY;
    for restart in 0..cfg.restarts {
        let head_seed = derive_seed(cfg.seed, &format!("ddd/restart/{restart}"));
        let mut head = Network::init(&cfg.head_dims, head_seed)?;
        for _ in 0..cfg.budget {
            let (obj, grad) = ddd_objective(&head, &feats_s, &feats_t, &probs_s, &probs_t)?;
            if obj > best {
                best = obj;
            }
            ascend(&mut head, &grad, cfg.lr)?;
        }
        let (obj, _) = ddd_objective(&head, &feats_s, &feats_t, &probs_s, &probs_t)?;
        if obj > best {
            best = obj;
        }
    }
    Ok(best)
}

/// Objective `mean_T cdd(head, fixed) - mean_S cdd(head, fixed)` and its
/// gradient with respect to the head parameters.
fn ddd_objective(
    head: &Network,
    feats_s: &Matrix,
    feats_t: &Matrix,
    probs_s: &Matrix,
    probs_t: &Matrix,
) -> Result<(f64, Gradients)> {
    let (obj_t, grad_t) = disparity_side(head, feats_t, probs_t)?;
    let (obj_s, grad_s) = disparity_side(head, feats_s, probs_s)?;
    let mut grad = grad_t;
    grad.scaled_add(&grad_s, -1.0)?;
    Ok((obj_t - obj_s, grad))
}

fn disparity_side(head: &Network, feats: &Matrix, fixed: &Matrix) -> Result<(f64, Gradients)> {
    let (z, cache) = head.forward(feats)?;
    let n = feats.rows();
    let mut upstream = Matrix::zeros(n, head.output_dim());
    let mut sum = 0.0;
    for i in 0..n {
        let p = softmax(z.row(i))?;
        let q = fixed.row(i);
        sum += discrepancy::cdd_slices(&p, q);
        let gp = discrepancy::off_diagonal_sums(q);
        upstream.row_mut(i).copy_from_slice(&softmax_backprop(&p, &gp));
    }
    let (grads, _) = head.backward(&cache, &upstream)?;
    Ok((sum / n as f64, grads))
}

/// Plain gradient ascent: `theta += lr * grad`.
fn ascend(net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
    let mut params = net.flat_params();
    for (p, g) in params.iter_mut().zip(grads.flat()) {
        *p += lr * g;
    }
    net.set_flat_params(&params)
}

/// How Rademacher sign vectors are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignScheme {
    /// Average over this many random sign vectors.
    MonteCarlo { trials: usize },
    /// Average over all `2^n` sign vectors (requires `n <= 20`).
    Exhaustive,
}

/// A function family `g: X -> [0, 1]` whose sup correlation with a sign
/// vector can be computed or approximated.
pub trait RademacherFamily {
    fn sample_count(&self) -> usize;
    /// `sup_g (1/n) sum_i signs[i] g(x_i)`; `seed` drives any internal
    /// optimization restarts.
    fn sup_correlation(&self, signs: &[f64], seed: u64) -> Result<f64>;
}

/// Empirical Rademacher complexity `E_sigma sup_g (1/n) sum sigma_i g(x_i)`.
///
/// The returned value is the raw average: Monte Carlo noise can leave it
/// slightly negative, which callers clip for reporting.
pub fn rademacher_estimate(
    family: &dyn RademacherFamily,
    scheme: SignScheme,
    seed: u64,
) -> Result<f64> {
    let n = family.sample_count();
    if n == 0 {
        return Err(invalid("family has no samples"));
    }
    match scheme {
        SignScheme::MonteCarlo { trials } => {
            if trials == 0 {
                return Err(invalid("need at least one trial"));
            }
            let mut r = rng::stream(seed, "rademacher/signs");
            let mut sum = 0.0;
            for t in 0..trials {
                let signs: Vec<f64> = (0..n)
                    .map(|_| if rand::Rng::random::<bool>(&mut r) { 1.0 } else { -1.0 })
                    .collect();
                sum += family.sup_correlation(&signs, derive_seed(seed, &format!("trial/{t}")))?;
            }
            Ok(sum / trials as f64)
        }
        SignScheme::Exhaustive => {
            if n > 20 {
                return Err(invalid("exhaustive enumeration needs n <= 20"));
            }
            let total = 1u64 << n;
            let mut sum = 0.0;
            for mask in 0..total {
                let signs: Vec<f64> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect();
                sum += family.sup_correlation(&signs, derive_seed(seed, &format!("mask/{mask}")))?;
            }
            Ok(sum / total as f64)
        }
    }
}

/// A finite family given by each member's per-sample values.
pub struct FiniteFamily {
    values: Vec<Vec<f64>>,
}

impl FiniteFamily {
    pub fn new(values: Vec<Vec<f64>>) -> Result<FiniteFamily> {
        if values.is_empty() || values[0].is_empty() {
            return Err(invalid("finite family needs members and samples"));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n) {
            return Err(invalid("family members disagree on sample count"));
        }
        Ok(FiniteFamily { values })
    }
}

impl RademacherFamily for FiniteFamily {
    fn sample_count(&self) -> usize {
        self.values[0].len()
    }

    fn sup_correlation(&self, signs: &[f64], _seed: u64) -> Result<f64> {
        let n = signs.len() as f64;
        Ok(self
            .values
            .iter()
            .map(|vals| {
                vals.iter()
                    .zip(signs.iter())
                    .map(|(v, s)| v * s)
                    .sum::<f64>()
                    / n
            })
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// The family `x -> cdd(h1(x), h2(x))` over trainable classifier-head pairs
/// on frozen generator features.
pub struct GammaHeadFamily {
    feats: Matrix,
    head_dims: Vec<usize>,
    budget: usize,
    lr: f64,
}

impl GammaHeadFamily {
    pub fn new(
        generator: &Network,
        x: &Matrix,
        head_dims: Vec<usize>,
        budget: usize,
        lr: f64,
    ) -> Result<GammaHeadFamily> {
        let feats = generator.infer(x)?;
        if head_dims.first() != Some(&feats.cols()) {
            return Err(invalid(format!("head input dim must be {}", feats.cols())));
        }
        if budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        Ok(GammaHeadFamily {
            feats,
            head_dims,
            budget,
            lr,
        })
    }
}

impl RademacherFamily for GammaHeadFamily {
    fn sample_count(&self) -> usize {
        self.feats.rows()
    }

    fn sup_correlation(&self, signs: &[f64], seed: u64) -> Result<f64> {
        let mut h1 = Network::init(&self.head_dims, derive_seed(seed, "h1"))?;
        let mut h2 = Network::init(&self.head_dims, derive_seed(seed, "h2"))?;
        let n = self.feats.rows();
        let nf = n as f64;
        let mut best = f64::NEG_INFINITY;
        for _ in 0..=self.budget {
            let (z1, cache1) = h1.forward(&self.feats)?;
            let (z2, cache2) = h2.forward(&self.feats)?;
            let mut up1 = Matrix::zeros(n, h1.output_dim());
            let mut up2 = Matrix::zeros(n, h2.output_dim());
            let mut obj = 0.0;
            for i in 0..n {
                let p1 = softmax(z1.row(i))?;
                let p2 = softmax(z2.row(i))?;
                obj += signs[i] * discrepancy::cdd_slices(&p1, &p2);
                let g1 = discrepancy::off_diagonal_sums(&p2);
                let g2 = discrepancy::off_diagonal_sums(&p1);
                let s1: Vec<f64> = softmax_backprop(&p1, &g1).iter().map(|v| signs[i] * v).collect();
                let s2: Vec<f64> = softmax_backprop(&p2, &g2).iter().map(|v| signs[i] * v).collect();
                up1.row_mut(i).copy_from_slice(&s1);
                up2.row_mut(i).copy_from_slice(&s2);
            }
            obj /= nf;
            if obj > best {
                best = obj;
            }
            let (gg1, _) = h1.backward(&cache1, &up1)?;
            let (gg2, _) = h2.backward(&cache2, &up2)?;
            ascend(&mut h1, &gg1, self.lr)?;
            ascend(&mut h2, &gg2, self.lr)?;
        }
        Ok(best)
    }
}

/// The family of per-sample losses `min(1, ce(h(x), y))` over a trainable
/// classifier head, standing in for non-differentiable error indicators.
pub struct SurrogateLossFamily {
    feats: Matrix,
    labels: Vec<usize>,
    head_dims: Vec<usize>,
    budget: usize,
    lr: f64,
}

impl SurrogateLossFamily {
    pub fn new(
        generator: &Network,
        ds: &LabeledDataset,
        head_dims: Vec<usize>,
        budget: usize,
        lr: f64,
    ) -> Result<SurrogateLossFamily> {
        let feats = generator.infer(ds.features())?;
        if head_dims.first() != Some(&feats.cols()) {
            return Err(invalid(format!("head input dim must be {}", feats.cols())));
        }
        if budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        Ok(SurrogateLossFamily {
            feats,
            labels: ds.labels().to_vec(),
            head_dims,
            budget,
            lr,
        })
    }
}

impl RademacherFamily for SurrogateLossFamily {
    fn sample_count(&self) -> usize {
        self.feats.rows()
    }

    fn sup_correlation(&self, signs: &[f64], seed: u64) -> Result<f64> {
        let mut h = Network::init(&self.head_dims, derive_seed(seed, "h"))?;
        let n = self.feats.rows();
        let nf = n as f64;
        let mut best = f64::NEG_INFINITY;
        for _ in 0..=self.budget {
            let (z, cache) = h.forward(&self.feats)?;
            let mut up = Matrix::zeros(n, h.output_dim());
            let mut obj = 0.0;
            for i in 0..n {
                let p = softmax(z.row(i))?;
                let ce = cross_entropy(&p, self.labels[i])?;
                obj += signs[i] * ce.min(1.0);
                // Clipped region contributes no gradient.
                if ce < 1.0 {
                    let g: Vec<f64> = cross_entropy_grad_logits(&p, self.labels[i])?
                        .iter()
                        .map(|v| signs[i] * v)
                        .collect();
                    up.row_mut(i).copy_from_slice(&g);
                }
            }
            obj /= nf;
            if obj > best {
                best = obj;
            }
            let (gg, _) = h.backward(&cache, &up)?;
            ascend(&mut h, &gg, self.lr)?;
        }
        Ok(best)
    }
}

/// Architecture and budget for the ideal-joint-hypothesis fit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrainConfig {
    pub generator_dims: Vec<usize>,
    pub classifier_dims: Vec<usize>,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub budget: usize,
}

/// Error of the ideal joint hypothesis: trains one classifier stack on the
/// union of both labeled sets and returns the sum of its final source and
/// target error rates. Target labels exist only at toy scale; callers
/// without them cannot invoke this.
pub fn ideal_joint_error(
    source: &LabeledDataset,
    target: &LabeledDataset,
    cfg: &JointTrainConfig,
    seed: u64,
) -> Result<f64> {
    if cfg.budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    if source.dim() != target.dim() {
        return Err(invalid("source and target feature dims differ"));
    }
    let n = source.len() + target.len();
    let d = source.dim();
    let mut data = Vec::with_capacity(n * d);
    data.extend_from_slice(source.features().data());
    data.extend_from_slice(target.features().data());
    let mut labels = source.labels().to_vec();
    labels.extend_from_slice(target.labels());
    let union = LabeledDataset::new(Matrix::from_vec(n, d, data)?, labels)?;

    let mut gen = Network::init(&cfg.generator_dims, derive_seed(seed, "joint/g"))?;
    let mut cls = Network::init(&cfg.classifier_dims, derive_seed(seed, "joint/c"))?;
    let mut gen_opt = OptimizerState::new(&gen, cfg.optimizer.clone())?;
    let mut cls_opt = OptimizerState::new(&cls, cfg.optimizer.clone())?;
    let batch = cfg.batch_size.min(union.len());
    let mut sampler = BatchSampler::new(union.len(), batch, derive_seed(seed, "joint/batch"))?;
    for it in 0..cfg.budget {
        let progress = it as f64 / cfg.budget as f64;
        gen_opt.set_progress(progress)?;
        cls_opt.set_progress(progress)?;
        let (xs, ys) = union.gather(&sampler.next_indices());
        let (feats, gcache) = gen.forward(&xs)?;
        let (z, ccache) = cls.forward(&feats)?;
        let mut up = Matrix::zeros(xs.rows(), cls.output_dim());
        for i in 0..xs.rows() {
            let p = softmax(z.row(i))?;
            up.row_mut(i)
                .copy_from_slice(&cross_entropy_grad_logits(&p, ys[i])?);
        }
        let (gc, dfeat) = cls.backward(&ccache, &up)?;
        let (gg, _) = gen.backward(&gcache, &dfeat)?;
        cls_opt.step(&mut cls, &gc)?;
        gen_opt.step(&mut gen, &gg)?;
    }
    let h = Hypothesis::new(&gen, &cls)?;
    Ok(h.error(source)? + h.error(target)?)
}

/// A bound term with its raw estimate and the nonnegative value used in
/// assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValue {
    pub raw: f64,
    pub clipped: f64,
}

impl TermValue {
    fn from_raw(raw: f64) -> TermValue {
        TermValue {
            raw,
            clipped: raw.max(0.0),
        }
    }
}

/// Every term of the assembled target-error bound, plus the directly
/// measured target error for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub source_error: f64,
    pub ddd: TermValue,
    pub lambda: f64,
    pub rad_source_gamma_h: TermValue,
    pub rad_source_h: TermValue,
    pub rad_target_gamma_h: TermValue,
    pub delta: f64,
    pub slack_source: f64,
    pub slack_target: f64,
    pub bound: f64,
    pub target_error: f64,
}

impl BoundReport {
    /// Rows `(term, value, raw_value)` in a fixed order for export.
    pub fn rows(&self) -> Vec<(&'static str, f64, f64)> {
        alloc::vec![
            ("source_error", self.source_error, self.source_error),
            ("ddd", self.ddd.clipped, self.ddd.raw),
            ("lambda", self.lambda, self.lambda),
            (
                "rademacher_source_gamma_h",
                self.rad_source_gamma_h.clipped,
                self.rad_source_gamma_h.raw
            ),
            (
                "rademacher_source_h",
                self.rad_source_h.clipped,
                self.rad_source_h.raw
            ),
            (
                "rademacher_target_gamma_h",
                self.rad_target_gamma_h.clipped,
                self.rad_target_gamma_h.raw
            ),
            ("delta", self.delta, self.delta),
            ("slack_source", self.slack_source, self.slack_source),
            ("slack_target", self.slack_target, self.slack_target),
            ("bound", self.bound, self.bound),
            ("target_error", self.target_error, self.target_error),
        ]
    }
}

/// Concentration slack terms for sample sizes `n` (source) and `m`
/// (target): `2 sqrt(log(2/delta) / 2n)` and `sqrt(log(2/delta) / 2m)`.
pub fn slack_terms(n: usize, m: usize, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must be in (0, 1)"));
    }
    if n == 0 || m == 0 {
        return Err(invalid("sample sizes must be positive"));
    }
    let log_term = libm::log(2.0 / delta);
    Ok((
        2.0 * libm::sqrt(log_term / (2.0 * n as f64)),
        libm::sqrt(log_term / (2.0 * m as f64)),
    ))
}

/// Sums the bound: source error, discrepancy, joint error, twice each
/// Rademacher term, and both slack terms.
pub fn assemble_bound(
    source_error: f64,
    ddd: f64,
    lambda: f64,
    rad_source_gamma_h: f64,
    rad_source_h: f64,
    rad_target_gamma_h: f64,
    slack_source: f64,
    slack_target: f64,
) -> f64 {
    source_error
        + ddd
        + lambda
        + 2.0 * rad_source_gamma_h
        + 2.0 * rad_source_h
        + slack_source
        + 2.0 * rad_target_gamma_h
        + slack_target
}

/// Budgets and seeds for [`bound_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    pub delta: f64,
    /// Classifier-head family used for the auxiliary hypothesis in the
    /// discrepancy sup and for both Rademacher families.
    pub head_dims: Vec<usize>,
    pub ddd_restarts: usize,
    pub ddd_budget: usize,
    pub ddd_lr: f64,
    pub rademacher_trials: usize,
    pub rademacher_budget: usize,
    pub rademacher_lr: f64,
    pub joint: JointTrainConfig,
    pub seed: u64,
}

/// Estimates every term of the target-error bound for the stack `h` and
/// assembles them. The probability interpretation is a union bound over
/// the three concentration events at the single caller-supplied `delta`.
pub fn bound_report(
    h: &Hypothesis,
    source: &LabeledDataset,
    target: &LabeledDataset,
    cfg: &BoundConfig,
) -> Result<BoundReport> {
    let (slack_source, slack_target) = slack_terms(source.len(), target.len(), cfg.delta)?;
    let source_error = h.error(source)?;
    let target_error = h.error(target)?;

    let ddd_cfg = DddConfig {
        head_dims: cfg.head_dims.clone(),
        restarts: cfg.ddd_restarts,
        budget: cfg.ddd_budget,
        lr: cfg.ddd_lr,
        seed: derive_seed(cfg.seed, "estimators/ddd"),
    };
    let ddd = TermValue::from_raw(ddd_estimate(
        h,
        source.features(),
        target.features(),
        &ddd_cfg,
    )?);

    let lambda = ideal_joint_error(
        source,
        target,
        &cfg.joint,
        derive_seed(cfg.seed, "estimators/joint"),
    )?;

    let scheme = SignScheme::MonteCarlo {
        trials: cfg.rademacher_trials,
    };
    let gamma_s = GammaHeadFamily::new(
        h.generator,
        source.features(),
        cfg.head_dims.clone(),
        cfg.rademacher_budget,
        cfg.rademacher_lr,
    )?;
    let rad_source_gamma_h = TermValue::from_raw(rademacher_estimate(
        &gamma_s,
        scheme,
        derive_seed(cfg.seed, "estimators/rad-s-gamma"),
    )?);
    let gamma_t = GammaHeadFamily::new(
        h.generator,
        target.features(),
        cfg.head_dims.clone(),
        cfg.rademacher_budget,
        cfg.rademacher_lr,
    )?;
    let rad_target_gamma_h = TermValue::from_raw(rademacher_estimate(
        &gamma_t,
        scheme,
        derive_seed(cfg.seed, "estimators/rad-t-gamma"),
    )?);
    let loss_s = SurrogateLossFamily::new(
        h.generator,
        source,
        cfg.head_dims.clone(),
        cfg.rademacher_budget,
        cfg.rademacher_lr,
    )?;
    let rad_source_h = TermValue::from_raw(rademacher_estimate(
        &loss_s,
        scheme,
        derive_seed(cfg.seed, "estimators/rad-s-h"),
    )?);

    let bound = assemble_bound(
        source_error,
        ddd.clipped,
        lambda,
        rad_source_gamma_h.clipped,
        rad_source_h.clipped,
        rad_target_gamma_h.clipped,
        slack_source,
        slack_target,
    );
    Ok(BoundReport {
        source_error,
        ddd,
        lambda,
        rad_source_gamma_h,
        rad_source_h,
        rad_target_gamma_h,
        delta: cfg.delta,
        slack_source,
        slack_target,
        bound,
        target_error,
    })
}

/// Human-readable one-line summary used by callers that log reports.
pub fn report_summary(r: &BoundReport) -> String {
    format!(
        "bound={:.4} (src_err={:.4} ddd={:.4} lambda={:.4} omega={:.4}) vs target_err={:.4}",
        r.bound,
        r.source_error,
        r.ddd.clipped,
        r.lambda,
        r.bound - r.source_error - r.ddd.clipped - r.lambda,
        r.target_error
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::tensor_net::DenseLayer;

    fn identity2() -> Network {
        Network::from_layers(alloc::vec![DenseLayer::new(
            Matrix::from_rows(&[alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0]]).unwrap(),
            alloc::vec![0.0, 0.0],
        )
        .unwrap()])
        .unwrap()
    }

    fn constant_logits(bias: Vec<f64>) -> Network {
        let k = bias.len();
        Network::from_layers(alloc::vec![DenseLayer::new(
            Matrix::from_vec(k, 2, alloc::vec![0.0; k * 2]).unwrap(),
            bias,
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn expected_disparity_extremes() {
        let g = identity2();
        let x = Matrix::from_vec(3, 2, alloc::vec![0.1, 0.2, -0.5, 1.0, 2.0, -2.0]).unwrap();
        // Saturated identical constant predictions: disparity 0.
        let c = constant_logits(alloc::vec![800.0, 0.0]);
        let h = Hypothesis::new(&g, &c).unwrap();
        assert_eq!(expected_disparity(&h, &h, &x).unwrap(), 0.0);
        // Opposite saturated one-hots: disparity 1.
        let c2 = constant_logits(alloc::vec![0.0, 800.0]);
        let h2 = Hypothesis::new(&g, &c2).unwrap();
        assert!((expected_disparity(&h, &h2, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_disparity_averages_per_sample_values() {
        let g = identity2();
        // One-hot inputs select weight columns: sample 0 -> p2 = (0.8, 0.2),
        // sample 1 -> p2 = (0.4, 0.6); p1 is saturated at (1, 0).
        let x = Matrix::from_vec(2, 2, alloc::vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let c1 = constant_logits(alloc::vec![800.0, 0.0]);
        let ln4 = libm::log(4.0);
        let ln23 = libm::log(0.4 / 0.6);
        let c2 = Network::from_layers(alloc::vec![DenseLayer::new(
            Matrix::from_rows(&[alloc::vec![ln4, ln23], alloc::vec![0.0, 0.0]]).unwrap(),
            alloc::vec![0.0, 0.0],
        )
        .unwrap()])
        .unwrap();
        let h1 = Hypothesis::new(&g, &c1).unwrap();
        let h2 = Hypothesis::new(&g, &c2).unwrap();
        // cdd values are 0.2 and 0.6; the mean is 0.4.
        let v = expected_disparity(&h1, &h2, &x).unwrap();
        assert!((v - 0.4).abs() < 1e-9);
    }

    #[test]
    fn ddd_identical_samples_is_exactly_zero() {
        let g = Network::init(&[2, 4, 4], 1).unwrap();
        let c = Network::init(&[4, 4, 2], 2).unwrap();
        let h = Hypothesis::new(&g, &c).unwrap();
        let x = crate::data::make_moons(20, 0.05, 3).unwrap();
        let cfg = DddConfig {
            head_dims: alloc::vec![4, 4, 2],
            restarts: 2,
            budget: 20,
            lr: 0.5,
            seed: 4,
        };
        let v = ddd_estimate(&h, x.features(), x.features(), &cfg).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ddd_validates_and_is_deterministic() {
        let g = Network::init(&[2, 4, 4], 1).unwrap();
        let c = Network::init(&[4, 4, 2], 2).unwrap();
        let h = Hypothesis::new(&g, &c).unwrap();
        let s = crate::data::make_moons(15, 0.05, 5).unwrap();
        let t = crate::data::make_moons(15, 0.05, 6).unwrap().rotated(30.0).unwrap();
        let mut cfg = DddConfig::with_head(alloc::vec![4, 4, 2], 7);
        cfg.budget = 30;
        let a = ddd_estimate(&h, s.features(), t.features(), &cfg).unwrap();
        let b = ddd_estimate(&h, s.features(), t.features(), &cfg).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        cfg.budget = 0;
        assert!(ddd_estimate(&h, s.features(), t.features(), &cfg).is_err());
    }

    #[test]
    fn rademacher_two_member_family_exact_half() {
        // {g = 0, g = 1} on a single sample: E max(0, sigma) = 1/2.
        let fam = FiniteFamily::new(alloc::vec![alloc::vec![0.0], alloc::vec![1.0]]).unwrap();
        let v = rademacher_estimate(&fam, SignScheme::Exhaustive, 0).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rademacher_constant_family_centers_on_zero() {
        let fam = FiniteFamily::new(alloc::vec![alloc::vec![0.7; 8]]).unwrap();
        let v = rademacher_estimate(&fam, SignScheme::Exhaustive, 0).unwrap();
        assert!(v.abs() < 1e-12);
        let mc = rademacher_estimate(&fam, SignScheme::MonteCarlo { trials: 2000 }, 1).unwrap();
        // Noise scale is value / sqrt(trials * n).
        assert!(mc.abs() < 5.0 * 0.7 / libm::sqrt(2000.0 * 8.0));
    }

    #[test]
    fn rademacher_exhaustive_matches_hand_enumeration() {
        // Two members on two samples; enumerate the four sign vectors by hand.
        let fam =
            FiniteFamily::new(alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![1.0, 0.0]]).unwrap();
        let mut expected = 0.0;
        for (s0, s1) in [(1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let m1: f64 = (s0 * 0.0 + s1 * 1.0) / 2.0;
            let m2: f64 = (s0 * 1.0 + s1 * 0.0) / 2.0;
            expected += m1.max(m2);
        }
        expected /= 4.0;
        let v = rademacher_estimate(&fam, SignScheme::Exhaustive, 0).unwrap();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn rademacher_validates() {
        let fam = FiniteFamily::new(alloc::vec![alloc::vec![0.0; 25]]).unwrap();
        assert!(rademacher_estimate(&fam, SignScheme::Exhaustive, 0).is_err());
        assert!(rademacher_estimate(&fam, SignScheme::MonteCarlo { trials: 0 }, 0).is_err());
        assert!(FiniteFamily::new(alloc::vec![]).is_err());
    }

    #[test]
    fn slack_terms_reference_values() {
        let (s, t) = slack_terms(100, 100, 0.1).unwrap();
        assert!((s - 0.24477468306808164).abs() < 1e-12);
        assert!((t - 0.12238734153404082).abs() < 1e-12);
        assert!(slack_terms(100, 100, 0.0).is_err());
        assert!(slack_terms(100, 100, 1.0).is_err());
    }

    #[test]
    fn assembly_with_zero_estimates_is_error_plus_slack() {
        let (s, t) = slack_terms(100, 100, 0.1).unwrap();
        let b = assemble_bound(0.25, 0.0, 0.0, 0.0, 0.0, 0.0, s, t);
        assert!((b - (0.25 + s + t)).abs() < 1e-12);
    }
}
