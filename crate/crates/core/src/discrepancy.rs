//! Discrepancy functions between classifier outputs on the probability
//! simplex.
//!
//! The determinacy disparity of two prediction vectors is the off-diagonal
//! mass of their outer product: it is zero only when both predictions are
//! the same one-hot vector, so it measures disagreement and indeterminacy
//! at once. The L1 distance and the entropy regularizer live here too so
//! every classifier-output loss shares one home.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::invalid;
use crate::rng::SeededRng;
use crate::tensor_net::PROB_FLOOR;
use crate::Result;

/// A probability vector: entries nonnegative, summing to 1 within 1e-9,
/// at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    probs: Vec<f64>,
}

impl Simplex {
    pub fn new(probs: Vec<f64>) -> Result<Simplex> {
        if probs.len() < 2 {
            return Err(invalid("simplex vector needs at least 2 entries"));
        }
        if !probs.iter().all(|p| p.is_finite() && *p >= 0.0) {
            return Err(invalid("simplex entries must be finite and nonnegative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("simplex entries sum to {sum}, not 1")));
        }
        Ok(Simplex { probs })
    }

    pub fn uniform(k: usize) -> Result<Simplex> {
        if k < 2 {
            return Err(invalid("need at least 2 classes"));
        }
        Ok(Simplex {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn one_hot(k: usize, class: usize) -> Result<Simplex> {
        if k < 2 {
            return Err(invalid("need at least 2 classes"));
        }
        if class >= k {
            return Err(invalid(format!("class {class} out of range for {k}")));
        }
        let mut probs = vec![0.0; k];
        probs[class] = 1.0;
        Ok(Simplex { probs })
    }

    /// Uniform (Dirichlet(1)) sample via the exponential/normalization
    /// construction.
    pub fn sample_uniform(k: usize, rng: &mut SeededRng) -> Result<Simplex> {
        if k < 2 {
            return Err(invalid("need at least 2 classes"));
        }
        let mut probs: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        Ok(Simplex { probs })
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(0.0, f64::max)
    }

    /// Index of the largest entry; ties break toward the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// The K x K outer product of two prediction vectors; entry `(m, n)` is the
/// joint probability that the first classifier says `m` and the second says
/// `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl RelevanceMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[m * self.k + n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn diagonal_sum(&self) -> f64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }
}

fn check_same_k(p1: &Simplex, p2: &Simplex) -> Result<usize> {
    if p1.k() != p2.k() {
        return Err(invalid(format!(
            "mismatched class counts: {} vs {}",
            p1.k(),
            p2.k()
        )));
    }
    Ok(p1.k())
}

/// `A[m][n] = p1[m] * p2[n]`.
pub fn relevance_matrix(p1: &Simplex, p2: &Simplex) -> Result<RelevanceMatrix> {
    let k = check_same_k(p1, p2)?;
    let mut entries = Vec::with_capacity(k * k);
    for &a in p1.probs() {
        for &b in p2.probs() {
            entries.push(a * b);
        }
    }
    Ok(RelevanceMatrix { k, entries })
}

/// Classifier determinacy disparity: the off-diagonal sum of the relevance
/// matrix, evaluated definitionally so its gradient matches term by term.
/// Equals `1 - <p1, p2>` on exact simplex inputs.
pub fn cdd(p1: &Simplex, p2: &Simplex) -> Result<f64> {
    check_same_k(p1, p2)?;
    Ok(cdd_slices(p1.probs(), p2.probs()))
}

pub(crate) fn cdd_slices(p1: &[f64], p2: &[f64]) -> f64 {
    // Off-diagonal terms grouped by unordered index pair, so swapping the
    // arguments reproduces the identical float operation sequence and
    // symmetry holds exactly.
    let mut sum = 0.0;
    for m in 0..p1.len() {
        for n in (m + 1)..p1.len() {
            sum += p1[m] * p2[n] + p1[n] * p2[m];
        }
    }
    sum
}

/// Gradient of [`cdd`] with respect to each argument:
/// `d/dp1[m] = sum_{n != m} p2[n]` and symmetrically.
pub fn cdd_grad(p1: &Simplex, p2: &Simplex) -> Result<(Vec<f64>, Vec<f64>)> {
    check_same_k(p1, p2)?;
    Ok((
        off_diagonal_sums(p2.probs()),
        off_diagonal_sums(p1.probs()),
    ))
}

pub(crate) fn off_diagonal_sums(other: &[f64]) -> Vec<f64> {
    (0..other.len())
        .map(|m| {
            other
                .iter()
                .enumerate()
                .filter(|&(n, _)| n != m)
                .map(|(_, &v)| v)
                .sum()
        })
        .collect()
}

/// `sum_k |p1[k] - p2[k]|`, the bi-classifier baseline distance.
pub fn l1_discrepancy(p1: &Simplex, p2: &Simplex) -> Result<f64> {
    check_same_k(p1, p2)?;
    Ok(l1_slices(p1.probs(), p2.probs()))
}

pub(crate) fn l1_slices(p1: &[f64], p2: &[f64]) -> f64 {
    p1.iter().zip(p2.iter()).map(|(a, b)| (a - b).abs()).sum()
}

/// Subgradient of [`l1_discrepancy`] with respect to each argument
/// (sign of the difference, zero at ties).
pub fn l1_grad(p1: &Simplex, p2: &Simplex) -> Result<(Vec<f64>, Vec<f64>)> {
    check_same_k(p1, p2)?;
    Ok(l1_grad_slices(p1.probs(), p2.probs()))
}

pub(crate) fn l1_grad_slices(p1: &[f64], p2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g1: Vec<f64> = p1
        .iter()
        .zip(p2.iter())
        .map(|(a, b)| sign(a - b))
        .collect();
    let g2: Vec<f64> = g1.iter().map(|v| -v).collect();
    (g1, g2)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Shannon entropy `-sum p log(p + floor)`, clamped at zero so the floor
/// cannot push a one-hot microscopically negative.
pub fn entropy(p: &Simplex) -> f64 {
    entropy_slices(p.probs())
}

pub(crate) fn entropy_slices(p: &[f64]) -> f64 {
    let v: f64 = -p.iter().map(|&x| x * libm::log(x + PROB_FLOOR)).sum::<f64>();
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

/// Gradient of the (unclamped) entropy with respect to the probabilities.
pub fn entropy_grad(p: &Simplex) -> Vec<f64> {
    entropy_grad_slices(p.probs())
}

pub(crate) fn entropy_grad_slices(p: &[f64]) -> Vec<f64> {
    p.iter()
        .map(|&x| -libm::log(x + PROB_FLOOR) - x / (x + PROB_FLOOR))
        .collect()
}
