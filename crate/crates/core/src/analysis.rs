//! Diagnostics over frozen models: determinacy histograms, bi-classifier
//! agreement matrices, proxy A-distance, decision-boundary rasters, and
//! feature SVD spectra.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{BatchSampler, LabeledDataset, UnlabeledDataset};
use crate::error::invalid;
use crate::matrix::Matrix;
use crate::rng::{self, derive_seed};
use crate::tensor_net::{Network, OptimizerConfig, OptimizerState};
use crate::trainer::ModelTriple;
use crate::Result;

/// Counts over contiguous bins; `counts.len() == bin_edges.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins `values` into `n_bins` uniform bins over `[lo, hi]`. Values are
    /// clamped into the range; each bin is left-inclusive, the last bin also
    /// right-inclusive.
    pub fn from_values(values: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
        if n_bins == 0 {
            return Err(invalid("need at least one bin"));
        }
        if !(hi > lo) {
            return Err(invalid("histogram range is empty"));
        }
        let width = (hi - lo) / n_bins as f64;
        let bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0usize; n_bins];
        for &v in values {
            // Values within 1e-9 of an edge snap upward, so decimal
            // boundaries land where exact arithmetic would put them.
            let t = (v - lo) / width + 1e-9;
            let idx = (t.max(0.0) as usize).min(n_bins - 1);
            counts[idx] += 1;
        }
        Ok(Histogram { bin_edges, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Histogram of the per-sample maximum of the averaged bi-classifier
/// probability, binned over `[1/K, 1]`.
pub fn determinacy_histogram(
    models: &ModelTriple,
    target: &UnlabeledDataset,
    n_bins: usize,
) -> Result<Histogram> {
    if target.is_empty() {
        return Err(invalid("target dataset is empty"));
    }
    let values = max_avg_probs(models, target)?;
    let k = models.num_classes() as f64;
    Histogram::from_values(&values, n_bins, 1.0 / k, 1.0)
}

/// Per-sample max of the averaged bi-classifier softmax.
pub fn max_avg_probs(models: &ModelTriple, target: &UnlabeledDataset) -> Result<Vec<f64>> {
    let (p1, p2) = models.probs(target.features())?;
    Ok((0..target.len())
        .map(|i| {
            p1.row(i)
                .iter()
                .zip(p2.row(i))
                .map(|(a, b)| 0.5 * (a + b))
                .fold(0.0, f64::max)
        })
        .collect())
}

/// K x K counts: entry `(m, n)` counts target samples classified `m` by the
/// first classifier and `n` by the second.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementMatrix {
    k: usize,
    counts: Vec<usize>,
}

impl AgreementMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, m: usize, n: usize) -> usize {
        self.counts[m * self.k + n]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn diagonal_total(&self) -> usize {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }
}

pub fn agreement_matrix(models: &ModelTriple, target: &UnlabeledDataset) -> Result<AgreementMatrix> {
    if target.is_empty() {
        return Err(invalid("target dataset is empty"));
    }
    let k = models.num_classes();
    let (p1, p2) = models.probs(target.features())?;
    let mut counts = vec![0usize; k * k];
    for i in 0..target.len() {
        let m = argmax(p1.row(i));
        let n = argmax(p2.row(i));
        counts[m * k + n] += 1;
    }
    Ok(AgreementMatrix { k, counts })
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

/// Proxy A-distance between two feature sets: train a small domain
/// classifier on an 80/20 split of domain-labeled features and return
/// `max(0, 2 (1 - 2 eps))` where `eps` is its held-out error.
///
/// Domain classifier: hidden width 8, 500 annealed SGD iterations.
pub fn proxy_a_distance(features_s: &Matrix, features_t: &Matrix, seed: u64) -> Result<f64> {
    if features_s.cols() != features_t.cols() {
        return Err(invalid("feature dims differ between domains"));
    }
    if features_s.rows() < 10 || features_t.rows() < 10 {
        return Err(invalid("need at least 10 samples per domain"));
    }
    let d = features_s.cols();
    let n = features_s.rows() + features_t.rows();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut labels: Vec<usize> = Vec::with_capacity(n);
    for i in 0..features_s.rows() {
        rows.push(features_s.row(i).to_vec());
        labels.push(0);
    }
    for i in 0..features_t.rows() {
        rows.push(features_t.row(i).to_vec());
        labels.push(1);
    }
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        let mut r = rng::stream(seed, "a-distance/split");
        order.shuffle(&mut r);
    }
    let n_train = ((n as f64) * 0.8) as usize;
    let n_train = n_train.max(1).min(n - 1);
    let gather = |idx: &[usize]| -> Result<LabeledDataset> {
        let mut data = Vec::with_capacity(idx.len() * d);
        let mut ls = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(&rows[i]);
            ls.push(labels[i]);
        }
        LabeledDataset::new(Matrix::from_vec(idx.len(), d, data)?, ls)
    };
    let train_ds = gather(&order[..n_train])?;
    let test_ds = gather(&order[n_train..])?;

    let net = train_domain_classifier(&train_ds, derive_seed(seed, "a-distance/train"))?;
    let eps = classification_error(&net, &test_ds)?;
    Ok((2.0 * (1.0 - 2.0 * eps)).max(0.0))
}

fn train_domain_classifier(ds: &LabeledDataset, seed: u64) -> Result<Network> {
    const ITERS: usize = 500;
    let mut net = Network::init(&[ds.dim(), 8, 2], derive_seed(seed, "init"))?;
    let mut opt = OptimizerState::new(
        &net,
        OptimizerConfig {
            base_lr: 0.02,
            momentum: 0.9,
            weight_decay: 1e-4,
            anneal_a: 10.0,
            anneal_b: 0.75,
        },
    )?;
    let batch = ds.len().min(32);
    let mut sampler = BatchSampler::new(ds.len(), batch, derive_seed(seed, "batch"))?;
    for it in 0..ITERS {
        opt.set_progress(it as f64 / ITERS as f64)?;
        let (xs, ys) = ds.gather(&sampler.next_indices());
        let (z, cache) = net.forward(&xs)?;
        let mut upstream = Matrix::zeros(xs.rows(), 2);
        for i in 0..xs.rows() {
            let p = crate::tensor_net::softmax(z.row(i))?;
            let g = crate::tensor_net::cross_entropy_grad_logits(&p, ys[i])?;
            upstream.row_mut(i).copy_from_slice(&g);
        }
        let (grads, _) = net.backward(&cache, &upstream)?;
        opt.step(&mut net, &grads)?;
    }
    Ok(net)
}

fn classification_error(net: &Network, ds: &LabeledDataset) -> Result<f64> {
    let z = net.infer(ds.features())?;
    let mut wrong = 0usize;
    for (i, &y) in ds.labels().iter().enumerate() {
        if argmax(z.row(i)) != y {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / ds.len() as f64)
}

/// A rectangular grid over the feature plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Cells along x and along y.
    pub resolution: (usize, usize),
}

impl GridSpec {
    /// Grid covering the bounding box of the given feature sets, padded by
    /// `pad` on each side (fraction of the box extent).
    pub fn covering(feature_sets: &[&Matrix], resolution: (usize, usize), pad: f64) -> Result<GridSpec> {
        if feature_sets.is_empty() || feature_sets.iter().any(|m| m.cols() != 2) {
            return Err(invalid("bounding box needs nonempty 2-D feature sets"));
        }
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in feature_sets {
            for r in 0..m.rows() {
                x0 = x0.min(m.get(r, 0));
                x1 = x1.max(m.get(r, 0));
                y0 = y0.min(m.get(r, 1));
                y1 = y1.max(m.get(r, 1));
            }
        }
        let (dx, dy) = ((x1 - x0).max(1e-9), (y1 - y0).max(1e-9));
        Ok(GridSpec {
            x_range: (x0 - pad * dx, x1 + pad * dx),
            y_range: (y0 - pad * dy, y1 + pad * dy),
            resolution,
        })
    }
}

/// Class labels on a grid, row-major in image order: row 0 is the top of
/// the y range, labels within a row run left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRaster {
    pub spec: GridSpec,
    pub labels: Vec<usize>,
}

/// Labels every grid cell center with the averaged-classifier argmax.
pub fn boundary_raster(models: &ModelTriple, spec: &GridSpec) -> Result<GridRaster> {
    if models.generator().input_dim() != 2 {
        return Err(invalid("boundary raster needs a 2-D input model"));
    }
    let (rx, ry) = spec.resolution;
    if rx == 0 || ry == 0 {
        return Err(invalid("grid resolution must be positive"));
    }
    let (x0, x1) = spec.x_range;
    let (y0, y1) = spec.y_range;
    if !(x1 > x0) || !(y1 > y0) {
        return Err(invalid("grid ranges must be nonempty"));
    }
    let dx = (x1 - x0) / rx as f64;
    let dy = (y1 - y0) / ry as f64;
    let mut points = Matrix::zeros(rx * ry, 2);
    for row in 0..ry {
        let y = y1 - (row as f64 + 0.5) * dy;
        for col in 0..rx {
            let x = x0 + (col as f64 + 0.5) * dx;
            points.set(row * rx + col, 0, x);
            points.set(row * rx + col, 1, y);
        }
    }
    let (p1, p2) = models.probs(&points)?;
    let labels = (0..rx * ry)
        .map(|i| {
            let avg: Vec<f64> = p1
                .row(i)
                .iter()
                .zip(p2.row(i))
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            argmax(&avg)
        })
        .collect();
    Ok(GridRaster {
        spec: spec.clone(),
        labels,
    })
}

/// Max-normalized singular values of an `n x d` feature matrix, descending;
/// the first entry is 1. Computed from the eigenvalues of the `d x d` Gram
/// matrix by cyclic Jacobi rotations.
pub fn svd_spectrum(features: &Matrix) -> Result<Vec<f64>> {
    if features.frobenius_sq() == 0.0 {
        return Err(invalid("feature matrix is all zero"));
    }
    let d = features.cols();
    let n = features.rows();
    // Gram = F^T F.
    let mut gram = vec![0.0f64; d * d];
    for r in 0..n {
        let row = features.row(r);
        for i in 0..d {
            let fi = row[i];
            if fi == 0.0 {
                continue;
            }
            for j in i..d {
                gram[i * d + j] += fi * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i * d + j] = gram[j * d + i];
        }
    }
    let eigs = jacobi_eigenvalues(&mut gram, d);
    let mut sv: Vec<f64> = eigs.iter().map(|&l| libm::sqrt(l.max(0.0))).collect();
    sv.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let max = sv[0];
    for v in &mut sv {
        *v /= max;
    }
    Ok(sv)
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi sweeps.
fn jacobi_eigenvalues(a: &mut [f64], d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![a[0]];
    }
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>();
    let tol = 1e-30 * scale.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for i in 0..d {
                    let aip = a[i * d + p];
                    let aiq = a[i * d + q];
                    a[i * d + p] = c * aip - s * aiq;
                    a[i * d + q] = s * aip + c * aiq;
                }
                for i in 0..d {
                    let api = a[p * d + i];
                    let aqi = a[q * d + i];
                    a[p * d + i] = c * api - s * aqi;
                    a[q * d + i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_moons;
    use crate::tensor_net::DenseLayer;
    use crate::trainer::TrainConfig;

    fn models_from(g: Network, c1: Network, c2: Network) -> ModelTriple {
        ModelTriple::from_networks(g, c1, c2, TrainConfig::default().optimizer, 10.0).unwrap()
    }

    fn identity2() -> Network {
        Network::from_layers(vec![DenseLayer::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap()])
        .unwrap()
    }

    /// Classifier whose logits depend only on the sign of x0, scaled by `s`.
    fn x0_classifier(s: f64) -> Network {
        Network::from_layers(vec![DenseLayer::new(
            Matrix::from_rows(&[vec![s, 0.0], vec![-s, 0.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap()])
        .unwrap()
    }

    /// Classifier that always outputs the same logits.
    fn constant_classifier(bias: Vec<f64>) -> Network {
        Network::from_layers(vec![DenseLayer::new(
            Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap(),
            bias,
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn histogram_binning_rule() {
        let h = Histogram::from_values(&[0.55, 0.95], 10, 0.5, 1.0).unwrap();
        let mut expected = vec![0usize; 10];
        expected[1] = 1;
        expected[9] = 1;
        assert_eq!(h.counts, expected);
        assert_eq!(h.bin_edges.len(), 11);
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn determinacy_histogram_extremes() {
        let target = make_moons(10, 0.05, 1).unwrap().unlabeled();
        // Saturated classifiers: every max averaged probability is 1.
        let sharp = models_from(identity2(), x0_classifier(4000.0), x0_classifier(4000.0));
        let h = determinacy_histogram(&sharp, &target, 10).unwrap();
        assert_eq!(h.counts[9], target.len());
        assert_eq!(h.total(), target.len());
        // Constant uniform output: everything lands in the first bin.
        let flat = models_from(
            identity2(),
            constant_classifier(vec![0.0, 0.0]),
            constant_classifier(vec![0.0, 0.0]),
        );
        let h = determinacy_histogram(&flat, &target, 10).unwrap();
        assert_eq!(h.counts[0], target.len());
        let empty = UnlabeledDataset::new(Matrix::zeros(1, 2));
        assert!(determinacy_histogram(&sharp, &empty, 0).is_err());
    }

    #[test]
    fn agreement_matrix_cases() {
        let target = make_moons(10, 0.05, 2).unwrap().unlabeled();
        let same = models_from(identity2(), x0_classifier(50.0), x0_classifier(50.0));
        let a = agreement_matrix(&same, &target).unwrap();
        assert_eq!(a.total(), target.len());
        assert_eq!(a.diagonal_total(), target.len());
        // Classifiers that always disagree on two classes: anti-diagonal only.
        let disagree = models_from(
            identity2(),
            constant_classifier(vec![5.0, 0.0]),
            constant_classifier(vec![0.0, 5.0]),
        );
        let a = agreement_matrix(&disagree, &target).unwrap();
        assert_eq!(a.get(0, 1), target.len());
        assert_eq!(a.diagonal_total(), 0);
    }

    #[test]
    fn a_distance_identical_sets_is_near_zero() {
        let ds = make_moons(100, 0.05, 3).unwrap();
        let d = proxy_a_distance(ds.features(), ds.features(), 7).unwrap();
        assert!(d <= 0.2, "identical domains gave d_A = {d}");
    }

    #[test]
    fn a_distance_separated_blobs_is_near_two() {
        // Two far-apart Gaussian-ish blobs are perfectly separable.
        let mut s = Matrix::zeros(50, 2);
        let mut t = Matrix::zeros(50, 2);
        let mut r = rng::seeded(9);
        use rand::Rng;
        for i in 0..50 {
            s.set(i, 0, -10.0 + r.random_range(-0.5..0.5));
            s.set(i, 1, r.random_range(-0.5..0.5));
            t.set(i, 0, 10.0 + r.random_range(-0.5..0.5));
            t.set(i, 1, r.random_range(-0.5..0.5));
        }
        let d = proxy_a_distance(&s, &t, 11).unwrap();
        assert!(d >= 1.8, "separated blobs gave d_A = {d}");
    }

    #[test]
    fn a_distance_is_deterministic_and_validates() {
        let a = make_moons(30, 0.05, 4).unwrap();
        let b = make_moons(30, 0.05, 5).unwrap();
        let d1 = proxy_a_distance(a.features(), b.features(), 42).unwrap();
        let d2 = proxy_a_distance(a.features(), b.features(), 42).unwrap();
        assert_eq!(d1.to_bits(), d2.to_bits());
        let tiny = Matrix::zeros(5, 2);
        assert!(proxy_a_distance(&tiny, b.features(), 0).is_err());
    }

    #[test]
    fn boundary_raster_constant_and_linear_cases() {
        let spec = GridSpec {
            x_range: (-1.0, 1.0),
            y_range: (-1.0, 1.0),
            resolution: (8, 4),
        };
        let constant = models_from(
            identity2(),
            constant_classifier(vec![5.0, 0.0]),
            constant_classifier(vec![5.0, 0.0]),
        );
        let r = boundary_raster(&constant, &spec).unwrap();
        assert_eq!(r.labels.len(), 32);
        assert!(r.labels.iter().all(|&l| l == 0));
        // x0 > 0 boundary: left half-plane class 1, right half class 0.
        let linear = models_from(identity2(), x0_classifier(50.0), x0_classifier(50.0));
        let r = boundary_raster(&linear, &spec).unwrap();
        for row in 0..4 {
            for col in 0..8 {
                let expected = if col < 4 { 1 } else { 0 };
                assert_eq!(r.labels[row * 8 + col], expected);
            }
        }
    }

    #[test]
    fn boundary_raster_single_cell_is_domain_center() {
        let spec = GridSpec {
            x_range: (0.0, 2.0),
            y_range: (-2.0, 0.0),
            resolution: (1, 1),
        };
        // Boundary at x0 > 1 through bias: center (1, -1) has logit 0 tie,
        // broken toward class 0.
        let cls = Network::from_layers(vec![DenseLayer::new(
            Matrix::from_rows(&[vec![50.0, 0.0], vec![-50.0, 0.0]]).unwrap(),
            vec![-50.0, 50.0],
        )
        .unwrap()])
        .unwrap();
        let m = models_from(identity2(), cls.clone(), cls);
        let r = boundary_raster(&m, &spec).unwrap();
        assert_eq!(r.labels, vec![0]);
    }

    #[test]
    fn svd_spectrum_closed_forms() {
        let id = Matrix::from_vec(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let sv = svd_spectrum(&id).unwrap();
        assert!(sv.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let diag = Matrix::from_vec(3, 3, vec![4.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let sv = svd_spectrum(&diag).unwrap();
        assert!((sv[0] - 1.0).abs() < 1e-12);
        assert!((sv[1] - 0.5).abs() < 1e-12);
        assert!((sv[2] - 0.25).abs() < 1e-12);
        let rank1 = Matrix::from_vec(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        let sv = svd_spectrum(&rank1).unwrap();
        assert!((sv[0] - 1.0).abs() < 1e-12);
        assert!(sv[1].abs() < 1e-7);
        assert!(svd_spectrum(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn svd_spectrum_preserves_frobenius_mass() {
        let ds = make_moons(40, 0.1, 6).unwrap();
        let f = ds.features();
        let sv = svd_spectrum(f).unwrap();
        // Recover unnormalized singular values from the largest one via the
        // Gram trace: sum sigma_i^2 == ||F||_F^2.
        let frob = f.frobenius_sq();
        let norm_sq: f64 = sv.iter().map(|v| v * v).sum();
        // sigma_max^2 * sum(normalized^2) == frob.
        let sigma_max_sq = frob / norm_sq;
        let recovered: f64 = sv.iter().map(|v| v * v * sigma_max_sq).sum();
        assert!((recovered - frob).abs() / frob < 1e-8);
        // Entries descending in (0, 1].
        for w in sv.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(sv.iter().all(|&v| v <= 1.0 && v >= 0.0));
    }
}
