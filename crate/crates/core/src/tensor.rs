//! Coordinate representations of vectors, covectors, operators and dyads,
//! together with the pairing and wedge-evaluation primitives.
//!
//! Everything here is expressed in a fixed basis of `V` and its dual basis of
//! `V*`. The operators are basis-free objects; the matrices that represent
//! them are not, so two runs in different bases give different (but
//! equivalent) matrices.
//!
//! Wedge products of covectors use the determinant convention:
//! `(p_1 ∧ … ∧ p_l)(v_1, …, v_l) = det[p_a(v_b)]`, with no `1/l!` factor.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Element of `V`, stored as coordinates in a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(DVector<f64>);

/// Element of `V*`, stored as coordinates in the dual basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector(DVector<f64>);

macro_rules! coordinate_type {
    ($ty:ident, $what:literal) => {
        impl $ty {
            /// Builds from coordinates; requires at least two finite entries.
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                Self::from_dvector(DVector::from_vec(coords))
            }

            pub fn from_dvector(coords: DVector<f64>) -> Result<Self> {
                if coords.len() < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "{} dimension must be at least 2, got {}",
                        $what,
                        coords.len()
                    )));
                }
                if !all_finite(coords.as_slice()) {
                    return Err(Error::NonFinite($what));
                }
                Ok(Self(coords))
            }

            pub(crate) fn from_dvector_unchecked(coords: DVector<f64>) -> Self {
                debug_assert!(all_finite(coords.as_slice()));
                Self(coords)
            }

            /// The `i`-th element of the (dual) standard basis.
            pub fn basis(dim: usize, i: usize) -> Self {
                assert!(dim >= 2 && i < dim, "basis index out of range");
                let mut coords = DVector::zeros(dim);
                coords[i] = 1.0;
                Self(coords)
            }

            pub fn zeros(dim: usize) -> Self {
                assert!(dim >= 2, "dimension must be at least 2");
                Self(DVector::zeros(dim))
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn coords(&self) -> &[f64] {
                self.0.as_slice()
            }

            pub fn as_dvector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self::from_dvector_unchecked(&self.0 * s)
            }

            /// `self + s * other`.
            pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
                check_dim(self.dim(), other.dim())?;
                Ok(Self::from_dvector_unchecked(&self.0 + &other.0 * s))
            }
        }
    };
}

coordinate_type!(Vector, "vector");
coordinate_type!(Covector, "covector");

/// Dense real `n × n` matrix acting on column coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<f64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidArgument(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::EmptyInput("operator"));
        }
        if !all_finite(m.as_slice()) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Self(m))
    }

    /// Builds from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("operator"));
        }
        for row in rows {
            check_dim(n, row.len())?;
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.dim(), v.dim())?;
        Ok(Vector::from_dvector_unchecked(&self.0 * &v.0))
    }

    /// `self ∘ other`, i.e. the matrix product `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn scaled(&self, s: f64) -> Operator {
        Self(&self.0 * s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// `‖self − reference‖_F / ‖reference‖_F`.
    pub fn relative_error(&self, reference: &Operator) -> f64 {
        let diff = (&self.0 - &reference.0).norm();
        let scale = reference.0.norm();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

/// One term `v ⊗ p`, the rank-one map `x ↦ p(x)·v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dyad {
    vector: Vector,
    covector: Covector,
}

impl Dyad {
    pub fn new(vector: Vector, covector: Covector) -> Result<Self> {
        check_dim(vector.dim(), covector.dim())?;
        Ok(Self { vector, covector })
    }

    pub fn dim(&self) -> usize {
        self.vector.dim()
    }

    pub fn vector(&self) -> &Vector {
        &self.vector
    }

    pub fn covector(&self) -> &Covector {
        &self.covector
    }

    pub fn to_operator(&self) -> Operator {
        dyad_to_operator(self)
    }
}

/// Ordered list of dyads `Q = Σ v_i ⊗ p_i`.
///
/// The number of terms may exceed the dimension; formulas that depend on it
/// cap their sums at `min(n, k)` or `min(n − 1, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPerturbation {
    dyads: Vec<Dyad>,
    dim: usize,
}

impl DyadicPerturbation {
    pub fn new(dyads: Vec<Dyad>) -> Result<Self> {
        let first = dyads
            .first()
            .ok_or(Error::EmptyInput("dyadic perturbation"))?;
        let dim = first.dim();
        for d in &dyads {
            check_dim(dim, d.dim())?;
        }
        Ok(Self { dyads, dim })
    }

    /// Pairs up vectors and covectors elementwise.
    pub fn from_pairs(vectors: Vec<Vector>, covectors: Vec<Covector>) -> Result<Self> {
        check_dim(vectors.len(), covectors.len())?;
        let dyads = vectors
            .into_iter()
            .zip(covectors)
            .map(|(v, p)| Dyad::new(v, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dyads)
    }

    pub fn dyads(&self) -> &[Dyad] {
        &self.dyads
    }

    /// Number of terms `k`.
    pub fn len(&self) -> usize {
        self.dyads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dyads.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> impl Iterator<Item = &Vector> {
        self.dyads.iter().map(|d| &d.vector)
    }

    pub fn covectors(&self) -> impl Iterator<Item = &Covector> {
        self.dyads.iter().map(|d| &d.covector)
    }

    /// `n × k` matrix whose columns are the vectors.
    pub fn vector_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.len(), |r, c| self.dyads[c].vector.0[r])
    }

    /// `n × k` matrix whose columns are the covectors.
    pub fn covector_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.len(), |r, c| self.dyads[c].covector.0[r])
    }

    /// The operator `Σ v_i ⊗ p_i` as a dense matrix.
    pub fn materialize(&self) -> Operator {
        Operator::from_matrix_unchecked(self.vector_matrix() * self.covector_matrix().transpose())
    }

    /// Replaces every vector by its image under `f`, keeping the covectors.
    pub fn map_vectors<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Vector) -> Result<Vector>,
    {
        let dyads = self
            .dyads
            .iter()
            .map(|d| Dyad::new(f(&d.vector)?, d.covector.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dyads)
    }
}

/// `k × k` matrix of pairings `G[a][b] = p_a(u_b)`: rows index covectors,
/// columns index vectors. Its principal minors are the wedge evaluations
/// `(p_{j_1} ∧ … ∧ p_{j_i})(u_{j_1}, …, u_{j_i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "gram matrix must be square and non-empty".into(),
            ));
        }
        if !all_finite(m.as_slice()) {
            return Err(Error::NonFinite("gram matrix"));
        }
        Ok(Self(m))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[(a, b)]
    }

    /// Determinant of `G` restricted to the rows and columns in `indices`.
    pub fn principal_minor(&self, indices: &[usize]) -> f64 {
        let sub = DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
            self.0[(indices[r], indices[c])]
        });
        small_det(sub)
    }

    /// Sums of the principal minors of each size `1..=cap`, enumerating index
    /// subsets in lexicographic order. Entry `i − 1` is the size-`i` sum.
    pub fn principal_minor_sums(&self, cap: usize) -> Vec<f64> {
        let k = self.size();
        (1..=cap.min(k))
            .map(|size| {
                (0..k)
                    .combinations(size)
                    .map(|subset| self.principal_minor(&subset))
                    .sum()
            })
            .collect()
    }
}

/// The canonical pairing `p(v) = Σ_j p_j v_j`.
pub fn pair(p: &Covector, v: &Vector) -> Result<f64> {
    check_dim(p.dim(), v.dim())?;
    Ok(p.0.dot(&v.0))
}

/// Materializes `v ⊗ p` as the rank-one matrix with entries `v[a]·p[b]`.
pub fn dyad_to_operator(d: &Dyad) -> Operator {
    Operator::from_matrix_unchecked(&d.vector.0 * d.covector.0.transpose())
}

/// Gram matrix `G[a][b] = p_a(u_b)` of the perturbation's covectors against
/// `base_images` (the `u_b`).
pub fn gram(dyads: &DyadicPerturbation, base_images: &[Vector]) -> Result<GramMatrix> {
    check_dim(dyads.len(), base_images.len())?;
    for u in base_images {
        check_dim(dyads.dim(), u.dim())?;
    }
    let covectors: Vec<&Covector> = dyads.covectors().collect();
    let m = DMatrix::from_fn(dyads.len(), dyads.len(), |a, b| {
        covectors[a].0.dot(&base_images[b].0)
    });
    GramMatrix::from_matrix(m)
}

/// Gram matrix of a perturbation against its own vectors.
pub fn self_gram(dyads: &DyadicPerturbation) -> GramMatrix {
    let vs = dyads.vector_matrix();
    let ps = dyads.covector_matrix();
    GramMatrix(ps.transpose() * vs)
}

pub(crate) fn pairing_matrix<P, V>(covectors: &[P], vectors: &[V]) -> DMatrix<f64>
where
    P: AsRef<Covector>,
    V: AsRef<Vector>,
{
    DMatrix::from_fn(covectors.len(), vectors.len(), |a, b| {
        covectors[a].as_ref().0.dot(&vectors[b].as_ref().0)
    })
}

impl AsRef<Vector> for Vector {
    fn as_ref(&self) -> &Vector {
        self
    }
}

impl AsRef<Covector> for Covector {
    fn as_ref(&self) -> &Covector {
        self
    }
}

/// `(c_1 ∧ … ∧ c_l)(v_1, …, v_l) = det[c_a(v_b)]`.
///
/// Returns exactly zero when `l` exceeds the dimension, since any wedge of
/// more than `n` covectors vanishes.
pub fn wedge_eval<P, V>(covectors: &[P], vectors: &[V]) -> Result<f64>
where
    P: AsRef<Covector>,
    V: AsRef<Vector>,
{
    check_dim(covectors.len(), vectors.len())?;
    let len = covectors.len();
    if len == 0 {
        return Err(Error::InvalidArgument("wedge of an empty family".into()));
    }
    let n = covectors[0].as_ref().dim();
    for c in covectors {
        check_dim(n, c.as_ref().dim())?;
    }
    for v in vectors {
        check_dim(n, v.as_ref().dim())?;
    }
    if len > n {
        return Ok(0.0);
    }
    Ok(small_det(pairing_matrix(covectors, vectors)))
}

/// Determinant of a small dense matrix: closed forms up to 3×3, partial-pivot
/// LU above. An exactly zero pivot column yields exactly zero.
pub(crate) fn small_det(mut m: DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => {
            let mut det = 1.0;
            for col in 0..n {
                let (pivot_row, pivot_abs) =
                    (col..n)
                        .map(|r| (r, m[(r, col)].abs()))
                        .fold(
                            (col, -1.0),
                            |best, cur| if cur.1 > best.1 { cur } else { best },
                        );
                if pivot_abs == 0.0 {
                    return 0.0;
                }
                if pivot_row != col {
                    m.swap_rows(pivot_row, col);
                    det = -det;
                }
                let pivot = m[(col, col)];
                det *= pivot;
                for r in col + 1..n {
                    let factor = m[(r, col)] / pivot;
                    if factor != 0.0 {
                        for c in col + 1..n {
                            let sub = factor * m[(col, c)];
                            m[(r, c)] -= sub;
                        }
                    }
                }
            }
            det
        }
    }
}
