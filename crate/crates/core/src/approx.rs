//! The `m`-th order approximation of `(B')⁻¹` and the truncated Taylor series.
//!
//! With `u_i = B⁻¹ v_i`, `G[a][b] = p_a(u_b)` and `α_i` the sum of the
//! `i × i` principal minors of `G`, the order-`m` approximation is
//!
//! ```text
//! (B')⁻¹_m = B⁻¹ + 1/(1 + Σ_{i≤m} α_i) · Σ_{i=1..m} (−1)^i (1 + Σ_{j≤m−i} α_j) (B⁻¹Q)^i B⁻¹
//! ```
//!
//! and the Taylor polynomial is the same expression with every `α_i` set to
//! zero. The approximation equals `(B')⁻¹` as soon as `m ≥ min(n, k)`.

use nalgebra::linalg::Hessenberg;
use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::exact::{
    is_negligible, reduce_to_identity, schur_basis, subset_sums, PerturbedIdentity,
};
use crate::oracle;
use crate::tensor::{DyadicPerturbation, GramMatrix, Operator};

/// `α_1 … α_K` with `K = min(n, k)`, and their running sums
/// `partial_sums[m] = 1 + Σ_{i ≤ min(m, K)} α_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCoefficients {
    alphas: Vec<f64>,
    partial_sums: Vec<f64>,
}

impl AlphaCoefficients {
    pub fn from_alphas(alphas: Vec<f64>) -> Self {
        let mut partial_sums = Vec::with_capacity(alphas.len() + 1);
        let mut acc = 1.0;
        partial_sums.push(acc);
        for a in &alphas {
            acc += a;
            partial_sums.push(acc);
        }
        Self {
            alphas,
            partial_sums,
        }
    }

    /// All `α_i = 0`; turns the approximation into the Taylor series.
    pub fn zeros(len: usize) -> Self {
        Self::from_alphas(vec![0.0; len])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn partial_sums(&self) -> &[f64] {
        &self.partial_sums
    }

    /// `K`, the number of possibly nonzero coefficients.
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// `1 + Σ_{i ≤ m} α_i`.
    pub fn truncated_det(&self, m: usize) -> f64 {
        self.partial_sums[m.min(self.len())]
    }

    /// The full sum, which is `det A`.
    pub fn det(&self) -> f64 {
        self.truncated_det(self.len())
    }

    fn is_singular_at(&self, m: usize) -> bool {
        is_negligible(self.truncated_det(m), &self.alphas[..m.min(self.len())])
    }
}

/// How the `α_i` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaMethod {
    /// Sum of principal minors, one determinant per index subset.
    #[default]
    Subsets,
    /// Coefficients of `det(I + tG)` from a Hessenberg reduction of `G`.
    CharPoly,
}

/// How the terms `(B⁻¹Q)^i B⁻¹` are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMethod {
    /// `U · G^{i−1} · (Pᵀ B⁻¹)`, working in the `k`-dimensional coefficient
    /// space.
    #[default]
    LowRank,
    /// Repeated dense `n × n` products.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ApproxOptions {
    pub alpha: AlphaMethod,
    pub powers: PowerMethod,
}

/// `α_i` by enumerating index subsets in lexicographic order.
pub fn alpha_coefficients(g: &GramMatrix, n: usize) -> AlphaCoefficients {
    AlphaCoefficients::from_alphas(g.principal_minor_sums(n))
}

/// `α_i` as the coefficients of `det(I + tG) = Σ α_i t^i`.
///
/// `G` is reduced to upper Hessenberg form `H` by Householder reflections and
/// the leading principal determinants of `I + tH` are expanded as
/// polynomials in `t`.
pub fn alpha_coefficients_charpoly(g: &GramMatrix, n: usize) -> AlphaCoefficients {
    let k = g.size();
    let h = Hessenberg::new(g.entries().clone()).h();

    // leading[j] holds det of the leading j×j block of I + tH.
    let mut leading: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    leading.push(vec![1.0]);
    for j in 0..k {
        // Diagonal term: (1 + t h_jj) · leading[j].
        let mut next = poly_mul(&[1.0, h[(j, j)]], &leading[j]);
        // Off-diagonal terms along column j.
        let mut sub_product = 1.0;
        for i in (0..j).rev() {
            sub_product *= h[(i + 1, i)];
            if sub_product == 0.0 {
                break;
            }
            let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
            // t h_ij · Π t h_{m,m−1} contributes t^{j−i+1}.
            let coeff = sign * h[(i, j)] * sub_product;
            let shift = j - i + 1;
            for (d, c) in leading[i].iter().enumerate() {
                poly_add_at(&mut next, d + shift, coeff * c);
            }
        }
        leading.push(next);
    }

    let mut coeffs = leading.pop().unwrap_or_default();
    coeffs.resize(k + 1, 0.0);
    let cap = n.min(k);
    AlphaCoefficients::from_alphas(coeffs[1..=cap].to_vec())
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add_at(p: &mut Vec<f64>, degree: usize, value: f64) {
    if p.len() <= degree {
        p.resize(degree + 1, 0.0);
    }
    p[degree] += value;
}

pub fn truncated_det(ac: &AlphaCoefficients, m: usize) -> f64 {
    ac.truncated_det(m)
}

/// Precomputed data shared by every order of the approximation for one
/// problem: `B⁻¹`, the lifted dyads, `G`, the `α_i`, the terms
/// `(B⁻¹Q)^i B⁻¹` for `i = 0..=max_order`, and the running subset sums of
/// the truncated adjugates `id + Σ_{|J| ≤ m} ⊡_J`.
#[derive(Debug, Clone)]
pub struct ApproxSeries {
    lifted: PerturbedIdentity,
    gram: GramMatrix,
    alphas: AlphaCoefficients,
    terms: Vec<DMatrix<f64>>,
    /// `U` and `Pᵀ B⁻¹` of the Schur-mixed dyads, `n × k` and `k × n`.
    us: DMatrix<f64>,
    coeffs: DMatrix<f64>,
    /// `(1 + Σ_{j ≤ m} d_j, Σ_{j ≤ m} C_j)` for `m = 0, 1, …`.
    truncated: Vec<(f64, DMatrix<f64>)>,
}

impl ApproxSeries {
    pub fn new(
        b: &Operator,
        q: &DyadicPerturbation,
        max_order: usize,
        options: ApproxOptions,
    ) -> Result<Self> {
        let (lu, lifted) = reduce_to_identity(b, q)?;
        let base_inverse = oracle::lu_inverse(&lu).map_err(|_| Error::SingularBase)?;
        let gram = lifted.gram();
        let n = lifted.dim();
        // Everything below is invariant under the mixing, so it is computed
        // in the basis where it is best conditioned.
        let (mixed, mixed_gram) = schur_basis(lifted.dyads(), &gram);
        let alphas = match options.alpha {
            AlphaMethod::Subsets => alpha_coefficients(&mixed_gram, n),
            AlphaMethod::CharPoly => alpha_coefficients_charpoly(&mixed_gram, n),
        };

        let base = base_inverse.into_matrix();
        let us = mixed.vector_matrix();
        let coeffs = mixed.covector_matrix().transpose() * &base;
        let mut terms = Vec::with_capacity(max_order + 1);
        terms.push(base);
        match options.powers {
            PowerMethod::LowRank => {
                let mut power = coeffs.clone();
                for i in 1..=max_order {
                    if i > 1 {
                        power = mixed_gram.entries() * power;
                    }
                    terms.push(&us * &power);
                }
            }
            PowerMethod::Dense => {
                let step = &terms[0] * q.materialize().matrix();
                for i in 1..=max_order {
                    let next = &step * &terms[i - 1];
                    terms.push(next);
                }
            }
        }

        let k = lifted.len();
        let mut truncated = vec![(1.0, DMatrix::zeros(k, k))];
        for sums in subset_sums(&mixed_gram, max_order, n) {
            let (det, adj) = &truncated[truncated.len() - 1];
            let next = (det + sums.det, adj + sums.adj);
            truncated.push(next);
        }

        Ok(Self {
            lifted,
            gram,
            alphas,
            terms,
            us,
            coeffs,
            truncated,
        })
    }

    pub fn dim(&self) -> usize {
        self.lifted.dim()
    }

    /// Number of dyads `k`.
    pub fn rank(&self) -> usize {
        self.lifted.len()
    }

    pub fn max_order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn alphas(&self) -> &AlphaCoefficients {
        &self.alphas
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// The perturbed identity `A = id + Σ u_i ⊗ p_i` with `u_i = B⁻¹ v_i`.
    pub fn lifted(&self) -> &PerturbedIdentity {
        &self.lifted
    }

    pub fn base_inverse(&self) -> Operator {
        Operator::from_matrix_unchecked(self.terms[0].clone())
    }

    /// `(B⁻¹Q)^i B⁻¹`.
    pub fn term(&self, i: usize) -> Option<&DMatrix<f64>> {
        self.terms.get(i)
    }

    pub fn truncated_det(&self, m: usize) -> f64 {
        self.alphas.truncated_det(m)
    }

    fn check_order(&self, m: usize) -> Result<()> {
        if m > self.max_order() {
            return Err(Error::InvalidArgument(format!(
                "order {m} exceeds the precomputed maximum {}",
                self.max_order()
            )));
        }
        Ok(())
    }

    /// Order-`m` approximation `(1/det_m A) (id + Σ_{|J| ≤ m} ⊡_J) B⁻¹`.
    ///
    /// Equal to [`power_series_inverse`](Self::power_series_inverse) in exact
    /// arithmetic. The power form cancels large powers of `B⁻¹Q` against
    /// each other and loses most of its digits once `‖B⁻¹Q‖` is in the
    /// hundreds; the subset form does not.
    pub fn approx_inverse(&self, m: usize) -> Result<Operator> {
        self.osquare_truncated_inverse(m)
    }

    /// `B⁻¹ + (1/det_m A) Σ_{i=1..m} (−1)^i det_{m−i} A (B⁻¹Q)^i B⁻¹`,
    /// evaluated literally.
    pub fn power_series_inverse(&self, m: usize) -> Result<Operator> {
        self.approx_inverse_with(m, &self.alphas)
    }

    /// The power form with caller-supplied coefficients. Zero coefficients
    /// reproduce [`taylor_inverse`](Self::taylor_inverse) bit for bit.
    pub fn approx_inverse_with(&self, m: usize, alphas: &AlphaCoefficients) -> Result<Operator> {
        self.check_order(m)?;
        let det_m = alphas.truncated_det(m);
        if alphas.is_singular_at(m) {
            return Err(Error::TruncatedDetSingular { order: m, det_m });
        }
        let n = self.dim();
        let mut acc = DMatrix::zeros(n, n);
        for i in 1..=m {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += &self.terms[i] * (sign * alphas.truncated_det(m - i));
        }
        Ok(Operator::from_matrix_unchecked(
            &self.terms[0] + acc * (1.0 / det_m),
        ))
    }

    /// `B⁻¹ + Σ_{i=1..m} (−1)^i (B⁻¹Q)^i B⁻¹`.
    pub fn taylor_inverse(&self, m: usize) -> Result<Operator> {
        self.check_order(m)?;
        let n = self.dim();
        let mut acc = DMatrix::zeros(n, n);
        for i in 1..=m {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += &self.terms[i] * sign;
        }
        Ok(Operator::from_matrix_unchecked(&self.terms[0] + acc))
    }

    /// `(1/det_m A) (id + Σ_{|J| ≤ m} ⊡_J(u, p)) B⁻¹`, the subset form of the
    /// approximation.
    ///
    /// With `⊡_J = det(G_J)·id − U_J adj(G_J) P_Jᵀ` the sum is applied to
    /// `B⁻¹` as `d·B⁻¹ − U C (Pᵀ B⁻¹)`, never forming the `n × n` adjugate.
    /// Subsets of size `n` are kept: their `⊡` vanishes, and including both
    /// halves keeps `d` equal to `det_m A` once `m ≥ n`.
    pub fn osquare_truncated_inverse(&self, m: usize) -> Result<Operator> {
        self.check_order(m)?;
        let det_m = self.alphas.truncated_det(m);
        if self.alphas.is_singular_at(m) {
            return Err(Error::TruncatedDetSingular { order: m, det_m });
        }
        let (d, c) = &self.truncated[m.min(self.truncated.len() - 1)];
        let numerator = &self.terms[0] * *d - &self.us * (c * &self.coeffs);
        Ok(Operator::from_matrix_unchecked(numerator / det_m))
    }
}

pub fn approx_inverse(b: &Operator, q: &DyadicPerturbation, m: usize) -> Result<Operator> {
    ApproxSeries::new(b, q, m, ApproxOptions::default())?.approx_inverse(m)
}

pub fn taylor_inverse(b: &Operator, q: &DyadicPerturbation, m: usize) -> Result<Operator> {
    ApproxSeries::new(b, q, m, ApproxOptions::default())?.taylor_inverse(m)
}

pub fn osquare_truncated_inverse(
    b: &Operator,
    q: &DyadicPerturbation,
    m: usize,
) -> Result<Operator> {
    ApproxSeries::new(b, q, m, ApproxOptions::default())?.osquare_truncated_inverse(m)
}

pub fn power_series_inverse(b: &Operator, q: &DyadicPerturbation, m: usize) -> Result<Operator> {
    ApproxSeries::new(b, q, m, ApproxOptions::default())?.power_series_inverse(m)
}

/// One order of the approximation compared with the exact inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    pub order: usize,
    pub det_m: f64,
    pub approx_inverse: Operator,
    pub taylor_inverse: Operator,
    /// Relative Frobenius distance of `approx_inverse` from `(B')⁻¹`.
    pub approx_error: f64,
    pub taylor_error: f64,
}

/// Evaluates order `m` and measures both errors against the dense LU inverse
/// of `B + Q`.
pub fn approx_report(b: &Operator, q: &DyadicPerturbation, m: usize) -> Result<ApproxReport> {
    check_dim(b.dim(), q.dim())?;
    let series = ApproxSeries::new(b, q, m, ApproxOptions::default())?;
    let perturbed = b.add(&q.materialize())?;
    let exact = oracle::inverse(&perturbed).map_err(|_| Error::SingularPerturbation {
        det_a: series.alphas().det(),
    })?;
    let approx = series.approx_inverse(m)?;
    let taylor = series.taylor_inverse(m)?;
    Ok(ApproxReport {
        order: m,
        det_m: series.truncated_det(m),
        approx_error: approx.relative_error(&exact),
        taylor_error: taylor.relative_error(&exact),
        approx_inverse: approx,
        taylor_inverse: taylor,
    })
}
