//! Shared helpers for unit tests.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::Distribution;
use crate::tensor::{Covector, DyadicPerturbation, Operator, Vector};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    Distribution::StandardNormal.matrix(rng, n, n)
}

pub fn random_operator(rng: &mut Rng, n: usize) -> Operator {
    Distribution::StandardNormal.operator(rng, n)
}

pub fn random_vector(rng: &mut Rng, n: usize) -> Vector {
    Distribution::StandardNormal.vector(rng, n)
}

pub fn random_covector(rng: &mut Rng, n: usize) -> Covector {
    Distribution::StandardNormal.covector(rng, n)
}

pub fn random_perturbation(rng: &mut Rng, n: usize, k: usize) -> DyadicPerturbation {
    Distribution::StandardNormal.perturbation(rng, n, k)
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
#[track_caller]
pub fn assert_close(a: f64, b: f64, tol: f64) {
    let scale = 1f64.max(a.abs()).max(b.abs());
    assert!((a - b).abs() <= tol * scale, "{a} vs {b} (tol {tol})");
}

/// `|a − b| ≤ tol · max(1, |b|)`.
#[track_caller]
pub fn assert_rel(a: f64, b: f64, tol: f64) {
    assert!(
        (a - b).abs() <= tol * b.abs().max(1.0),
        "{a} vs {b} (tol {tol})"
    );
}
