//! Independent verification paths: dense LU determinant, inverse and solve,
//! and the permutation expansion of wedge evaluations.
//!
//! Nothing in here goes through the wedge or subset machinery of the
//! perturbation modules; the only shared primitive is [`pair`].

use itertools::Itertools;
use nalgebra::linalg::LU;
use nalgebra::{DMatrix, Dyn};

use crate::error::{check_dim, Error, Result};
use crate::tensor::{pair, Covector, Operator, Vector};

/// Tolerance for quantities that should agree to rounding.
pub const TOL_EXACT: f64 = 1e-12;
/// Tolerance for comparisons against the dense LU oracle.
pub const TOL_ORACLE: f64 = 1e-10;
/// Tolerance for inverses compared against the oracle inverse.
pub const TOL_INVERSE: f64 = 1e-9;
/// Random draws whose Hadamard-normalized determinant falls below this are
/// redrawn.
pub const SCREEN_THRESHOLD: f64 = 1e-6;

/// Pivots at or below this fraction of their row's largest entry are
/// treated as zero.
const PIVOT_TOLERANCE: f64 = 1e-14;

/// Largest family accepted by [`wedge_bruteforce`].
pub const BRUTEFORCE_MAX: usize = 8;

/// Partial-pivoting LU factorization `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    lu: LU<f64, Dyn, Dyn>,
    sign: f64,
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    /// Sign of the row permutation, `±1`.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// Unit lower-triangular factor.
    pub fn l(&self) -> DMatrix<f64> {
        self.lu.l()
    }

    pub fn u(&self) -> DMatrix<f64> {
        self.lu.u()
    }

    /// Applies the row permutation `P` to a copy of `m`.
    pub fn permute_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        self.lu.p().permute_rows(&mut out);
        out
    }

    pub fn det(&self) -> f64 {
        lu_det(self)
    }

    pub fn inverse(&self) -> Result<Operator> {
        lu_inverse(self)
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        check_dim(self.dim(), b.dim())?;
        let x = self.lu.solve(b.as_dvector()).ok_or(Error::SingularMatrix)?;
        Ok(Vector::from_dvector_unchecked(x))
    }

    /// Solves `A·X = B` for a matrix right-hand side.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), b.nrows())?;
        self.lu.solve(b).ok_or(Error::SingularMatrix)
    }
}

/// Factors `a` with partial pivoting. Fails when some pivot is at most
/// `1e-14` times the largest entry of its (permuted) row.
pub fn lu_factor(a: &Operator) -> Result<LuFactorization> {
    let lu = LU::new(a.matrix().clone());
    let sign = lu.p().determinant::<f64>();
    let f = LuFactorization { lu, sign };

    let permuted = f.permute_rows(a.matrix());
    let u = f.u();
    for i in 0..f.dim() {
        let row_scale = permuted.row(i).amax();
        let pivot = u[(i, i)].abs();
        if pivot == 0.0 || pivot <= PIVOT_TOLERANCE * row_scale {
            return Err(Error::SingularMatrix);
        }
    }
    Ok(f)
}

/// `sign · Π diag(U)`.
pub fn lu_det(f: &LuFactorization) -> f64 {
    let u = f.u();
    f.sign * (0..f.dim()).map(|i| u[(i, i)]).product::<f64>()
}

pub fn lu_inverse(f: &LuFactorization) -> Result<Operator> {
    let n = f.dim();
    let inv = f.solve_matrix(&DMatrix::identity(n, n))?;
    Operator::from_matrix(inv).map_err(|_| Error::SingularMatrix)
}

/// Determinant via the oracle; zero when the factorization reports
/// singularity.
pub fn det(a: &Operator) -> f64 {
    match lu_factor(a) {
        Ok(f) => lu_det(&f),
        Err(_) => {
            // Near-singular but not exactly: still report the LU product.
            let lu = LU::new(a.matrix().clone());
            lu.determinant()
        }
    }
}

pub fn inverse(a: &Operator) -> Result<Operator> {
    lu_inverse(&lu_factor(a)?)
}

/// `|det A| / Π_i ‖row_i‖₂`, which lies in `[0, 1]` by Hadamard's
/// inequality. Small values flag numerically singular matrices.
pub fn hadamard_ratio(a: &Operator) -> f64 {
    let bound: f64 = a.matrix().row_iter().map(|r| r.norm()).product();
    if bound == 0.0 {
        return 0.0;
    }
    det(a).abs() / bound
}

/// True when the oracle factors `a` and its Hadamard ratio is at least
/// [`SCREEN_THRESHOLD`].
pub fn passes_screen(a: &Operator) -> bool {
    lu_factor(a).is_ok() && hadamard_ratio(a) >= SCREEN_THRESHOLD
}

/// `Σ_σ sgn(σ) Π_a c_a(v_σ(a))` over all permutations. Limited to
/// [`BRUTEFORCE_MAX`] terms.
pub fn wedge_bruteforce<P, V>(covectors: &[P], vectors: &[V]) -> Result<f64>
where
    P: AsRef<Covector>,
    V: AsRef<Vector>,
{
    check_dim(covectors.len(), vectors.len())?;
    let len = covectors.len();
    if len == 0 {
        return Err(Error::InvalidArgument("wedge of an empty family".into()));
    }
    if len > BRUTEFORCE_MAX {
        return Err(Error::InvalidArgument(format!(
            "brute-force wedge limited to {BRUTEFORCE_MAX} terms, got {len}"
        )));
    }
    let mut table = vec![0.0; len * len];
    for a in 0..len {
        for b in 0..len {
            table[a * len + b] = pair(covectors[a].as_ref(), vectors[b].as_ref())?;
        }
    }
    let total = (0..len)
        .permutations(len)
        .map(|perm| {
            let product: f64 = perm
                .iter()
                .enumerate()
                .map(|(a, &b)| table[a * len + b])
                .product();
            permutation_sign(&perm) * product
        })
        .sum();
    Ok(total)
}

fn permutation_sign(perm: &[usize]) -> f64 {
    let inversions = perm
        .iter()
        .enumerate()
        .flat_map(|(i, a)| perm[i + 1..].iter().filter(move |b| *b < a))
        .count();
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
