//! Random problem generation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::tensor::{Covector, Dyad, DyadicPerturbation, Operator, Vector};

/// Law of the i.i.d. entries of random matrices, vectors and covectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distribution {
    #[default]
    StandardNormal,
    /// Uniform on `[-1, 1)`.
    UniformSymmetric,
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Distribution::StandardNormal => StandardNormal.sample(rng),
            Distribution::UniformSymmetric => {
                Uniform::new(-1.0, 1.0).expect("valid range").sample(rng)
            }
        }
    }

    pub fn matrix<R: Rng + ?Sized>(self, rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
        // Row-major draw order so the stream does not depend on storage layout.
        let data: Vec<f64> = (0..rows * cols).map(|_| self.sample(rng)).collect();
        DMatrix::from_row_slice(rows, cols, &data)
    }

    pub fn operator<R: Rng + ?Sized>(self, rng: &mut R, n: usize) -> Operator {
        Operator::from_matrix_unchecked(self.matrix(rng, n, n))
    }

    pub fn vector<R: Rng + ?Sized>(self, rng: &mut R, n: usize) -> Vector {
        Vector::from_dvector_unchecked(DVector::from_fn(n, |_, _| self.sample(rng)))
    }

    pub fn covector<R: Rng + ?Sized>(self, rng: &mut R, n: usize) -> Covector {
        Covector::from_dvector_unchecked(DVector::from_fn(n, |_, _| self.sample(rng)))
    }

    /// `k` dyads, each drawn as its vector followed by its covector.
    pub fn perturbation<R: Rng + ?Sized>(
        self,
        rng: &mut R,
        n: usize,
        k: usize,
    ) -> DyadicPerturbation {
        let dyads = (0..k)
            .map(|_| {
                let v = self.vector(rng, n);
                let p = self.covector(rng, n);
                Dyad::new(v, p).expect("same dimension")
            })
            .collect();
        DyadicPerturbation::new(dyads).expect("k >= 1")
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" | "standard-normal" => Ok(Distribution::StandardNormal),
            "uniform" | "uniform-symmetric" => Ok(Distribution::UniformSymmetric),
            other => Err(Error::InvalidConfig(format!(
                "unknown distribution `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::StandardNormal => "normal",
            Distribution::UniformSymmetric => "uniform",
        })
    }
}
