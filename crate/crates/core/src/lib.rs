//! Desk-scale adversarial unsupervised domain adaptation.
//!
//! The crate trains a feature generator and two classifiers against each
//! other so that predictions on an unlabelled target domain become both
//! consistent and determined. The pieces:
//!
//! - [`matrix`] / [`tensor_net`]: dense f64 matrices, feed-forward networks
//!   with exact analytic gradients, and an annealed SGD-with-momentum
//!   optimizer.
//! - [`discrepancy`]: probability-simplex outputs, the bi-classifier
//!   relevance matrix, the determinacy disparity metric and its gradient,
//!   plus the L1 baseline and the entropy regularizer.
//! - [`data`]: two-moons generation with rotation-induced domain shift and
//!   seeded mini-batch sampling.
//! - [`trainer`]: the three-step adversarial loop with source-only and L1
//!   baselines.
//! - [`analysis`]: determinacy histograms, agreement matrices, proxy
//!   A-distance, decision-boundary rasters, and feature SVD spectra.
//! - [`theory`]: numerical estimators for the generalization-bound terms
//!   (determinacy disparity discrepancy, Rademacher complexity, ideal joint
//!   error) and the assembled bound report.
//!
//! The crate is `no_std` + `alloc`; everything that touches files or the
//! command line lives in the companion CLI crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod data;
pub mod discrepancy;
mod error;
pub mod gradcheck;
pub mod matrix;
pub mod rng;
pub mod tensor_net;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
