//! Inverting perturbed maps `V → V*` through a nondegenerate metric.
//!
//! A metric `g` gives the isomorphism `flat: V → V*, v ↦ g(v, ·)`. A map
//! `A: V → V*` becomes `Ã = sharp ∘ A: V → V`, and a perturbation
//! `W = Σ q_i ⊗ p_i` (meaning `x ↦ Σ p_i(x)·q_i` with `q_i ∈ V*`) becomes
//! `Σ sharp(q_i) ⊗ p_i`. Then `(A + W)⁻¹ = (Ã + Σ sharp(q_i) ⊗ p_i)⁻¹ ∘ sharp`.
//!
//! Indefinite metrics are fine; only nondegeneracy is required.

use nalgebra::DMatrix;

use crate::approx::{ApproxOptions, ApproxSeries};
use crate::error::{check_dim, Error, Result};
use crate::exact::perturbed_inverse_exact;
use crate::oracle::{self, LuFactorization};
use crate::tensor::{Covector, Dyad, DyadicPerturbation, Operator, Vector};

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Symmetric nondegenerate bilinear form, kept together with its
/// factorization.
#[derive(Debug, Clone)]
pub struct Metric {
    matrix: Operator,
    lu: LuFactorization,
}

impl Metric {
    pub fn new(matrix: Operator) -> Result<Self> {
        let m = matrix.matrix();
        let n = matrix.dim();
        for r in 0..n {
            for c in r + 1..n {
                if (m[(r, c)] - m[(c, r)]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidArgument(format!(
                        "metric is not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        let lu = oracle::lu_factor(&matrix).map_err(|_| Error::DegenerateMetric)?;
        Ok(Self { matrix, lu })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Operator::from_rows(rows)?)
    }

    pub fn euclidean(n: usize) -> Self {
        Self::new(Operator::identity(n)).expect("identity is a metric")
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    /// `g(v, w)`.
    pub fn eval(&self, v: &Vector, w: &Vector) -> Result<f64> {
        check_dim(self.dim(), v.dim())?;
        check_dim(self.dim(), w.dim())?;
        Ok(v.as_dvector().dot(&(self.matrix.matrix() * w.as_dvector())))
    }

    /// Matrix of `sharp: V* → V`.
    pub fn inverse_matrix(&self) -> Result<Operator> {
        oracle::lu_inverse(&self.lu).map_err(|_| Error::DegenerateMetric)
    }

    fn sharp_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lu.solve_matrix(m).map_err(|_| Error::DegenerateMetric)
    }
}

/// `v ↦ g(v, ·)`.
pub fn musical_flat(g: &Metric, v: &Vector) -> Result<Covector> {
    check_dim(g.dim(), v.dim())?;
    Ok(Covector::from_dvector_unchecked(
        g.matrix.matrix() * v.as_dvector(),
    ))
}

/// Inverse of [`musical_flat`].
pub fn musical_sharp(g: &Metric, p: &Covector) -> Result<Vector> {
    check_dim(g.dim(), p.dim())?;
    let v = Vector::from_dvector_unchecked(p.as_dvector().clone());
    g.lu.solve(&v).map_err(|_| Error::DegenerateMetric)
}

/// One term `q ⊗ p` of a perturbation of a map `V → V*`: `x ↦ p(x)·q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDyad {
    q: Covector,
    p: Covector,
}

impl DualDyad {
    pub fn new(q: Covector, p: Covector) -> Result<Self> {
        check_dim(q.dim(), p.dim())?;
        Ok(Self { q, p })
    }

    pub fn q(&self) -> &Covector {
        &self.q
    }

    pub fn p(&self) -> &Covector {
        &self.p
    }
}

/// `W = Σ q_i ⊗ p_i: V → V*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPerturbation {
    terms: Vec<DualDyad>,
    dim: usize,
}

impl DualPerturbation {
    pub fn new(terms: Vec<DualDyad>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.q.dim())
            .ok_or(Error::EmptyInput("dual perturbation"))?;
        for t in &terms {
            check_dim(dim, t.q.dim())?;
        }
        Ok(Self { terms, dim })
    }

    pub fn terms(&self) -> &[DualDyad] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dense matrix of `W`.
    pub fn materialize(&self) -> Operator {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for t in &self.terms {
            m += t.q.as_dvector() * t.p.as_dvector().transpose();
        }
        Operator::from_matrix_unchecked(m)
    }
}

/// `Ã = sharp ∘ A` and the perturbation `Σ sharp(q_i) ⊗ p_i` on `V`.
pub fn lift(
    g: &Metric,
    a: &Operator,
    w: &DualPerturbation,
) -> Result<(Operator, DyadicPerturbation)> {
    check_dim(g.dim(), a.dim())?;
    check_dim(g.dim(), w.dim())?;
    let tilde = Operator::from_matrix(g.sharp_matrix(a.matrix())?)?;
    let dyads = w
        .terms
        .iter()
        .map(|t| Dyad::new(musical_sharp(g, &t.q)?, t.p.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((tilde, DyadicPerturbation::new(dyads)?))
}

/// Order-`m` approximation of `(A + W)⁻¹: V* → V`, computed as
/// `(Ã')⁻¹_m ∘ sharp`.
pub fn perturbed_dual_inverse(
    g: &Metric,
    a: &Operator,
    w: &DualPerturbation,
    m: usize,
) -> Result<Operator> {
    perturbed_dual_inverse_with(g, a, w, m, ApproxOptions::default())
}

pub fn perturbed_dual_inverse_with(
    g: &Metric,
    a: &Operator,
    w: &DualPerturbation,
    m: usize,
    options: ApproxOptions,
) -> Result<Operator> {
    let (tilde, dyads) = lift(g, a, w)?;
    let series = ApproxSeries::new(&tilde, &dyads, m, options)?;
    series.approx_inverse(m)?.compose(&g.inverse_matrix()?)
}

/// Exact `(A + W)⁻¹` through the lifted problem.
pub fn perturbed_dual_inverse_exact(
    g: &Metric,
    a: &Operator,
    w: &DualPerturbation,
) -> Result<Operator> {
    let (tilde, dyads) = lift(g, a, w)?;
    perturbed_inverse_exact(&tilde, &dyads)?.compose(&g.inverse_matrix()?)
}
