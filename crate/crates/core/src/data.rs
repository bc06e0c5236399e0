//! Synthetic two-moons data with rotation-induced domain shift, and seeded
//! mini-batch sampling.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::invalid;
use crate::matrix::Matrix;
use crate::rng::{self, SeededRng};
use crate::Result;

/// Feature rows with one class index per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    /// The class count is inferred as `max(label) + 1`.
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<LabeledDataset> {
        if labels.len() != features.rows() {
            return Err(invalid(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
        Ok(LabeledDataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.features.gather_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Rotates 2-D features about the origin; labels are preserved.
    pub fn rotated(&self, degrees: f64) -> Result<LabeledDataset> {
        Ok(LabeledDataset {
            features: rotate(&self.features, degrees)?,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
        })
    }

    /// Drops the labels.
    pub fn unlabeled(&self) -> UnlabeledDataset {
        UnlabeledDataset {
            features: self.features.clone(),
        }
    }
}

/// Feature rows without labels.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDataset {
    features: Matrix,
}

impl UnlabeledDataset {
    pub fn new(features: Matrix) -> UnlabeledDataset {
        UnlabeledDataset { features }
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn gather(&self, indices: &[usize]) -> Matrix {
        self.features.gather_rows(indices)
    }

    pub fn rotated(&self, degrees: f64) -> Result<UnlabeledDataset> {
        Ok(UnlabeledDataset {
            features: rotate(&self.features, degrees)?,
        })
    }
}

/// Interlocking two-moons: class 0 on the upper unit semicircle, class 1 on
/// the lower semicircle shifted to interlock, `n_per_class` points per arc
/// plus isotropic Gaussian noise. Deterministic per seed.
pub fn make_moons(n_per_class: usize, noise_sd: f64, seed: u64) -> Result<LabeledDataset> {
    if n_per_class == 0 {
        return Err(invalid("n_per_class must be at least 1"));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(invalid("noise_sd must be nonnegative and finite"));
    }
    let n = n_per_class;
    let mut features = Matrix::zeros(2 * n, 2);
    let mut labels = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = if n == 1 {
            0.0
        } else {
            core::f64::consts::PI * i as f64 / (n - 1) as f64
        };
        features.set(i, 0, libm::cos(t));
        features.set(i, 1, libm::sin(t));
        features.set(n + i, 0, 1.0 - libm::cos(t));
        features.set(n + i, 1, 0.5 - libm::sin(t));
    }
    labels.extend(core::iter::repeat(0).take(n));
    labels.extend(core::iter::repeat(1).take(n));
    if noise_sd > 0.0 {
        let mut r = rng::seeded(seed);
        let normal = Normal::new(0.0, noise_sd)
            .map_err(|_| invalid("noise_sd must be a valid standard deviation"))?;
        for v in features.data_mut() {
            *v += normal.sample(&mut r);
        }
    }
    LabeledDataset::new(features, labels)
}

/// Rotates each 2-D row about the origin by `degrees`.
pub fn rotate(features: &Matrix, degrees: f64) -> Result<Matrix> {
    if features.cols() != 2 {
        return Err(invalid(format!(
            "rotation needs 2-D features, got {} columns",
            features.cols()
        )));
    }
    let rad = degrees * core::f64::consts::PI / 180.0;
    let (c, s) = (libm::cos(rad), libm::sin(rad));
    let mut out = Matrix::zeros(features.rows(), 2);
    for r in 0..features.rows() {
        let (x, y) = (features.get(r, 0), features.get(r, 1));
        out.set(r, 0, x * c - y * s);
        out.set(r, 1, x * s + y * c);
    }
    Ok(out)
}

/// Without-replacement mini-batch index stream: each epoch is a fresh
/// permutation visited once; the epoch boundary reshuffles. Single-consumer.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    batch: usize,
    order: Vec<usize>,
    pos: usize,
    rng: SeededRng,
}

impl BatchSampler {
    pub fn new(n: usize, batch: usize, seed: u64) -> Result<BatchSampler> {
        if batch == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if batch > n {
            return Err(invalid(format!("batch size {batch} exceeds dataset size {n}")));
        }
        let mut rng = rng::seeded(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Ok(BatchSampler {
            batch,
            order,
            pos: 0,
            rng,
        })
    }

    /// The next batch of indices. The final batch of an epoch may be short
    /// when the batch size does not divide the dataset.
    pub fn next_indices(&mut self) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn moons_are_class_balanced() {
        let ds = make_moons(100, 0.05, 9).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.labels().iter().filter(|&&l| l == 0).count(), 100);
        assert_eq!(ds.labels().iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn moons_noiseless_single_point_hits_arc_starts() {
        let ds = make_moons(1, 0.0, 0).unwrap();
        assert_eq!(ds.features().row(0), &[1.0, 0.0]);
        assert_eq!(ds.features().row(1), &[0.0, 0.5]);
    }

    #[test]
    fn moons_noiseless_points_lie_on_the_arcs() {
        let ds = make_moons(25, 0.0, 0).unwrap();
        for i in 0..25 {
            let (x, y) = (ds.features().get(i, 0), ds.features().get(i, 1));
            assert!((x * x + y * y - 1.0).abs() < 1e-12 && y >= 0.0);
            let (x2, y2) = (ds.features().get(25 + i, 0), ds.features().get(25 + i, 1));
            let (dx, dy) = (x2 - 1.0, y2 - 0.5);
            assert!((dx * dx + dy * dy - 1.0).abs() < 1e-12 && dy <= 0.0);
        }
    }

    #[test]
    fn moons_deterministic_per_seed() {
        let a = make_moons(40, 0.1, 7).unwrap();
        let b = make_moons(40, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let c = make_moons(40, 0.1, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn moons_rejects_bad_arguments() {
        assert!(make_moons(0, 0.1, 0).is_err());
        assert!(make_moons(10, -0.1, 0).is_err());
        assert!(make_moons(10, f64::NAN, 0).is_err());
    }

    #[test]
    fn rotation_trig_identity() {
        let m = Matrix::from_vec(1, 2, alloc::vec![1.0, 0.0]).unwrap();
        let r = rotate(&m, 30.0).unwrap();
        assert!((r.get(0, 0) - 0.8660254037844387).abs() < 1e-15);
        assert!((r.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rotation_zero_is_identity_and_inverse_roundtrips() {
        let ds = make_moons(20, 0.05, 3).unwrap();
        let same = ds.rotated(0.0).unwrap();
        assert_eq!(ds.features(), same.features());
        let back = ds.rotated(30.0).unwrap().rotated(-30.0).unwrap();
        for (a, b) in ds.features().data().iter().zip(back.features().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_is_an_isometry() {
        let ds = make_moons(15, 0.05, 4).unwrap();
        let rot = ds.rotated(73.0).unwrap();
        for i in 0..ds.len() {
            for j in (i + 1)..ds.len() {
                let d0 = dist(ds.features().row(i), ds.features().row(j));
                let d1 = dist(rot.features().row(i), rot.features().row(j));
                assert!((d0 - d1).abs() < 1e-12);
            }
        }
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        libm::sqrt((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
    }

    #[test]
    fn rotation_rejects_non_2d() {
        let m = Matrix::from_vec(1, 3, alloc::vec![1.0, 0.0, 0.0]).unwrap();
        assert!(rotate(&m, 30.0).is_err());
    }

    #[test]
    fn sampler_full_batch_is_a_permutation() {
        let mut s = BatchSampler::new(6, 6, 1).unwrap();
        let mut idx = s.next_indices();
        idx.sort_unstable();
        assert_eq!(idx, alloc::vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn sampler_epochs_are_exhaustive() {
        let mut s = BatchSampler::new(4, 2, 2).unwrap();
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for _ in 0..4 {
            for i in s.next_indices() {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        assert!(counts.values().all(|&c| c == 2));
    }

    #[test]
    fn sampler_deterministic_and_validates() {
        let seq = |seed| {
            let mut s = BatchSampler::new(10, 3, seed).unwrap();
            (0..7).flat_map(|_| s.next_indices()).collect::<Vec<_>>()
        };
        assert_eq!(seq(5), seq(5));
        assert!(BatchSampler::new(4, 5, 0).is_err());
        assert!(BatchSampler::new(4, 0, 0).is_err());
    }
}
