//! Exact determinant and inverse of `A = id + Σ u_i ⊗ p_i` and of
//! `B' = B + Σ v_i ⊗ p_i`.
//!
//! The building block is the `⊡` operator of a family `(z_i, p_i)` of size
//! `1 ≤ l ≤ n − 1`, characterized by
//!
//! ```text
//! q(⊡(z, p) v) = (q ∧ p_1 ∧ … ∧ p_l)(v, z_1, …, z_l)
//! ```
//!
//! for every vector `v` and covector `q`. Then
//!
//! ```text
//! det A       = 1 + Σ_{i ≤ min(n, k)}     Σ_{|J| = i} (∧_J p)(u_J)
//! A⁻¹ · det A = id + Σ_{i ≤ min(n − 1, k)} Σ_{|J| = i} ⊡_J(u, p)
//! ```
//!
//! with index subsets `J` enumerated in lexicographic order within each size,
//! sizes ascending. The summation order is fixed so results are reproducible.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{check_dim, Error, Result};
use crate::oracle::{self, LuFactorization};
use crate::tensor::{
    self_gram, small_det, wedge_eval, Covector, Dyad, DyadicPerturbation, GramMatrix, Operator,
    Vector,
};

/// `A = id_V + Σ u_i ⊗ p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedIdentity {
    dyads: DyadicPerturbation,
}

impl PerturbedIdentity {
    pub fn new(dyads: DyadicPerturbation) -> Self {
        Self { dyads }
    }

    pub fn from_pairs(us: Vec<Vector>, ps: Vec<Covector>) -> Result<Self> {
        Ok(Self::new(DyadicPerturbation::from_pairs(us, ps)?))
    }

    pub fn dyads(&self) -> &DyadicPerturbation {
        &self.dyads
    }

    pub fn dim(&self) -> usize {
        self.dyads.dim()
    }

    /// Number of dyads `k`.
    pub fn len(&self) -> usize {
        self.dyads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dyads.is_empty()
    }

    /// `G[a][b] = p_a(u_b)`.
    pub fn gram(&self) -> GramMatrix {
        self_gram(&self.dyads)
    }

    /// Dense matrix of `A`.
    pub fn materialize(&self) -> Operator {
        Operator::identity(self.dim())
            .add(&self.dyads.materialize())
            .expect("same dimension")
    }
}

/// `A⁻¹`, `det A` and the division-free `A⁻¹ · det A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactInverseResult {
    pub det_a: f64,
    pub inverse: Operator,
    pub adjugate_like: Operator,
}

fn check_osquare_family(zs: &[Vector], ps: &[Covector]) -> Result<usize> {
    check_dim(zs.len(), ps.len())?;
    let len = zs.len();
    let n = zs
        .first()
        .map(Vector::dim)
        .ok_or_else(|| Error::InvalidArgument("⊡ needs at least one pair".into()))?;
    if len >= n {
        return Err(Error::InvalidArgument(format!(
            "⊡ needs 1 <= l <= n - 1, got l = {len} in dimension {n}"
        )));
    }
    for z in zs {
        check_dim(n, z.dim())?;
    }
    for p in ps {
        check_dim(n, p.dim())?;
    }
    Ok(n)
}

/// `⊡(z, p) v = v · (∧p)(z) − Σ_i z_i · (∧p)(z_1, …, z_{i−1}, v, z_{i+1}, …, z_l)`.
pub fn osquare_apply(zs: &[Vector], ps: &[Covector], v: &Vector) -> Result<Vector> {
    let n = check_osquare_family(zs, ps)?;
    check_dim(n, v.dim())?;

    let mut out = v.scaled(wedge_eval(ps, zs)?);
    let mut replaced: Vec<&Vector> = zs.iter().collect();
    for (i, z) in zs.iter().enumerate() {
        replaced[i] = v;
        let w = wedge_eval(ps, &replaced)?;
        replaced[i] = z;
        out = out.add_scaled(-w, z)?;
    }
    Ok(out)
}

/// Matrix of `⊡(z, p)`, assembled column by column from [`osquare_apply`] on
/// the standard basis.
pub fn osquare_operator(zs: &[Vector], ps: &[Covector]) -> Result<Operator> {
    let n = check_osquare_family(zs, ps)?;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = osquare_apply(zs, ps, &Vector::basis(n, j))?;
        m.set_column(j, col.as_dvector());
    }
    Ok(Operator::from_matrix_unchecked(m))
}

/// `⊡` of a sub-family from its pairing block `G_J[a][b] = p_a(z_b)`.
///
/// Expanding each column-replaced determinant along the replaced column gives
/// `⊡ = det(G_J)·id − Z · adj(G_J) · Pᵀ`, where `Z` and `P` hold the vectors
/// and covectors as columns.
#[cfg(test)]
fn osquare_from_block(block: &DMatrix<f64>, zs: &DMatrix<f64>, ps: &DMatrix<f64>) -> DMatrix<f64> {
    let n = zs.nrows();
    let mut out = DMatrix::identity(n, n) * small_det(block.clone());
    out -= zs * adjugate(block) * ps.transpose();
    out
}

/// `adj(M)`. Cofactor expansion for small or nearly singular blocks,
/// `det(M)·M⁻¹` otherwise.
fn adjugate(block: &DMatrix<f64>) -> DMatrix<f64> {
    let len = block.nrows();
    if len == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    if len > 3 {
        let lu = block.clone().lu();
        let det = lu.determinant();
        let hadamard: f64 = block.row_iter().map(|r| r.norm()).product();
        if det.abs() > ADJUGATE_LU_RATIO * hadamard {
            if let Some(inv) = lu.try_inverse() {
                return inv * det;
            }
        }
    }
    let mut adj = DMatrix::zeros(len, len);
    for a in 0..len {
        for i in 0..len {
            let minor = block.clone().remove_row(a).remove_column(i);
            let sign = if (a + i) % 2 == 0 { 1.0 } else { -1.0 };
            // adj = cofactorᵀ
            adj[(i, a)] = sign * small_det(minor);
        }
    }
    adj
}

/// Below this Hadamard ratio the adjugate is built from cofactors.
const ADJUGATE_LU_RATIO: f64 = 1e-6;

/// Per-size pieces of `Σ_{|J| = j} ⊡_J = d_j·id − Z C_j Pᵀ`, where
/// `d_j = Σ det G_J` and `C_j = Σ adj G_J` embedded into a `k × k` matrix.
#[derive(Debug, Clone)]
pub(crate) struct SubsetSums {
    pub det: f64,
    pub adj: DMatrix<f64>,
}

/// [`SubsetSums`] for each size `j = 1..=min(max_size, k, max_len)`, in that
/// order.
pub(crate) fn subset_sums(gram: &GramMatrix, max_size: usize, max_len: usize) -> Vec<SubsetSums> {
    let k = gram.size();
    let mut sums = Vec::new();
    for size in 1..=max_size.min(k).min(max_len) {
        let mut det = 0.0;
        let mut adj_sum = DMatrix::zeros(k, k);
        for subset in (0..k).combinations(size) {
            let block = gram.entries().select_rows(&subset).select_columns(&subset);
            det += small_det(block.clone());
            let adj = adjugate(&block);
            for (r, &gr) in subset.iter().enumerate() {
                for (c, &gc) in subset.iter().enumerate() {
                    adj_sum[(gr, gc)] += adj[(r, c)];
                }
            }
        }
        sums.push(SubsetSums { det, adj: adj_sum });
    }
    sums
}

/// `Σ_{|J| = j} ⊡_J` for each `j = 1..=min(max_size, k, n − 1)`, in that
/// order. The `n × n` products happen once per size.
pub(crate) fn osquare_sums_by_size(
    dyads: &DyadicPerturbation,
    gram: &GramMatrix,
    max_size: usize,
) -> Vec<DMatrix<f64>> {
    let n = dyads.dim();
    let zs = dyads.vector_matrix();
    let pt = dyads.covector_matrix().transpose();
    subset_sums(gram, max_size, n - 1)
        .into_iter()
        .map(|s| DMatrix::identity(n, n) * s.det - &zs * s.adj * &pt)
        .collect()
}

/// Sum of `⊡_J` over all subsets `J` of sizes `1..=max_size`, using the
/// precomputed Gram matrix.
pub(crate) fn osquare_subset_sum(
    dyads: &DyadicPerturbation,
    gram: &GramMatrix,
    max_size: usize,
) -> DMatrix<f64> {
    let n = dyads.dim();
    osquare_sums_by_size(dyads, gram, max_size)
        .into_iter()
        .fold(DMatrix::zeros(n, n), |acc, s| acc + s)
}

/// The same perturbation with its dyads mixed by the orthogonal `Z` of the
/// real Schur form `G = Z T Zᵀ`: `u'_j = Σ_i Z_ij u_i`, `p'_j = Σ_i Z_ij p_i`.
///
/// `Σ u'_j ⊗ p'_j` is unchanged, and so is every per-size sum of `⊡_J` and
/// of principal minors, since those are coefficients of `adj(id + tM)` and
/// `det(id + tM)` for `M = Σ u_i ⊗ p_i`. The new Gram matrix is the
/// quasi-triangular `T`, whose principal minors sum without the cancellation
/// that large off-diagonal entries of `G` cause. Falls back to the original
/// dyads if the Schur iteration does not converge.
pub(crate) fn schur_basis(
    dyads: &DyadicPerturbation,
    gram: &GramMatrix,
) -> (DyadicPerturbation, GramMatrix) {
    let unchanged = || (dyads.clone(), gram.clone());
    let Some(schur) = Schur::try_new(gram.entries().clone(), f64::EPSILON, 10_000) else {
        return unchanged();
    };
    let (z, t) = schur.unpack();
    let us = dyads.vector_matrix() * &z;
    let ps = dyads.covector_matrix() * &z;
    let mixed = (0..dyads.len())
        .map(|j| {
            Dyad::new(
                Vector::from_dvector(DVector::from(us.column(j)))?,
                Covector::from_dvector(DVector::from(ps.column(j)))?,
            )
        })
        .collect::<Result<Vec<_>>>()
        .and_then(DyadicPerturbation::new);
    match (mixed, GramMatrix::from_matrix(t)) {
        (Ok(mixed), Ok(t)) => (mixed, t),
        _ => unchanged(),
    }
}

/// `1 + Σ α_i`, accumulated left to right.
pub(crate) fn one_plus_sum(alphas: &[f64]) -> f64 {
    alphas.iter().fold(1.0, |acc, a| acc + a)
}

/// `|det| ≤ 1e-12 · (1 + Σ|α_i|)`.
pub(crate) fn is_negligible(det: f64, alphas: &[f64]) -> bool {
    let scale = 1.0 + alphas.iter().map(|a| a.abs()).sum::<f64>();
    det.abs() <= oracle::TOL_EXACT * scale
}

/// `det A` as one plus the sums of the principal minors of the Gram matrix.
pub fn det_perturbed_identity(a: &PerturbedIdentity) -> f64 {
    let alphas = a.gram().principal_minor_sums(a.dim());
    one_plus_sum(&alphas)
}

pub fn inverse_perturbed_identity(a: &PerturbedIdentity) -> Result<ExactInverseResult> {
    let n = a.dim();
    let (dyads, gram) = schur_basis(a.dyads(), &a.gram());
    let alphas = gram.principal_minor_sums(n);
    let det_a = one_plus_sum(&alphas);
    if is_negligible(det_a, &alphas) {
        return Err(Error::SingularPerturbation { det_a });
    }
    let mut adjugate = DMatrix::identity(n, n);
    adjugate += osquare_subset_sum(&dyads, &gram, n - 1);
    let inverse = Operator::from_matrix_unchecked(&adjugate / det_a);
    Ok(ExactInverseResult {
        det_a,
        inverse,
        adjugate_like: Operator::from_matrix_unchecked(adjugate),
    })
}

/// `q(A⁻¹x) · det A`, evaluated as
/// `q(x) + Σ_J (q ∧ ∧_J p)(x, u_J)` over subsets of size at most
/// `min(n − 1, k)`. No division takes place.
pub fn pairing_form_inverse(a: &PerturbedIdentity, x: &Vector, q: &Covector) -> Result<f64> {
    let n = a.dim();
    check_dim(n, x.dim())?;
    check_dim(n, q.dim())?;
    let dyads = a.dyads().dyads();
    let k = dyads.len();

    let mut total = wedge_eval(&[q], &[x])?;
    let mut covectors: Vec<&Covector> = Vec::with_capacity(n);
    let mut vectors: Vec<&Vector> = Vec::with_capacity(n);
    for size in 1..=k.min(n - 1) {
        for subset in (0..k).combinations(size) {
            covectors.clear();
            vectors.clear();
            covectors.push(q);
            vectors.push(x);
            covectors.extend(subset.iter().map(|&j| dyads[j].covector()));
            vectors.extend(subset.iter().map(|&j| dyads[j].vector()));
            total += wedge_eval(&covectors, &vectors)?;
        }
    }
    Ok(total)
}

/// Factors `b` and rewrites `B + Σ v_i ⊗ p_i = B · (id + Σ u_i ⊗ p_i)` with
/// `u_i = B⁻¹ v_i`.
pub fn reduce_to_identity(
    b: &Operator,
    q: &DyadicPerturbation,
) -> Result<(LuFactorization, PerturbedIdentity)> {
    check_dim(b.dim(), q.dim())?;
    let lu = oracle::lu_factor(b).map_err(|_| Error::SingularBase)?;
    let lifted = q.map_vectors(|v| lu.solve(v).map_err(|_| Error::SingularBase))?;
    Ok((lu, PerturbedIdentity::new(lifted)))
}

/// `(B')⁻¹ = A⁻¹ B⁻¹ = (1/det A) (id + Σ_J ⊡_J(u, p)) B⁻¹`.
pub fn perturbed_inverse_exact(b: &Operator, q: &DyadicPerturbation) -> Result<Operator> {
    let (lu, a) = reduce_to_identity(b, q)?;
    let base_inverse = oracle::lu_inverse(&lu).map_err(|_| Error::SingularBase)?;
    let n = a.dim();
    let (dyads, gram) = schur_basis(a.dyads(), &a.gram());
    let alphas = gram.principal_minor_sums(n);
    let det_a = one_plus_sum(&alphas);
    if is_negligible(det_a, &alphas) {
        return Err(Error::SingularPerturbation { det_a });
    }
    // (id + Σ ⊡_J) B⁻¹ = d·B⁻¹ − U C (Pᵀ B⁻¹), applied in low-rank form so the
    // adjugate of A is never formed.
    let k = a.len();
    let (d, c) = subset_sums(&gram, k, n)
        .into_iter()
        .fold((1.0, DMatrix::zeros(k, k)), |(d, c), s| {
            (d + s.det, c + s.adj)
        });
    let base = base_inverse.matrix();
    let coeffs = dyads.covector_matrix().transpose() * base;
    let numerator = base * d - dyads.vector_matrix() * (c * coeffs);
    Ok(Operator::from_matrix_unchecked(numerator / det_a))
}

/// `det A` and `det B' = det B · det A` for `B' = B + Q`.
pub fn perturbed_det(b: &Operator, q: &DyadicPerturbation) -> Result<(f64, f64)> {
    let (lu, a) = reduce_to_identity(b, q)?;
    let det_a = det_perturbed_identity(&a);
    Ok((det_a, oracle::lu_det(&lu) * det_a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::pair;
    use crate::test_support::*;

    fn e(n: usize, i: usize) -> Vector {
        Vector::basis(n, i)
    }

    fn eps(n: usize, i: usize) -> Covector {
        Covector::basis(n, i)
    }

    fn random_identity_perturbation(rng: &mut Rng, n: usize, k: usize) -> PerturbedIdentity {
        PerturbedIdentity::new(random_perturbation(rng, n, k))
    }

    #[test]
    fn osquare_apply_examples() {
        let out = osquare_apply(&[e(2, 0)], &[eps(2, 0)], &e(2, 0)).unwrap();
        assert_eq!(out, Vector::zeros(2));
        let out = osquare_apply(&[e(2, 0)], &[eps(2, 0)], &e(2, 1)).unwrap();
        assert_eq!(out, e(2, 1));
    }

    #[test]
    fn osquare_rejects_bad_sizes() {
        assert!(osquare_apply(&[], &[], &e(3, 0)).is_err());
        assert!(osquare_apply(&[e(2, 0), e(2, 1)], &[eps(2, 0), eps(2, 1)], &e(2, 0)).is_err());
        assert!(osquare_operator(&[e(3, 0)], &[eps(3, 0), eps(3, 1)]).is_err());
        assert!(osquare_apply(&[e(3, 0)], &[eps(3, 0)], &e(2, 0)).is_err());
    }

    #[test]
    fn osquare_single_pair_closed_form() {
        // (q ∧ p)(v, z) = q(v)p(z) − q(z)p(v), hence ⊡(z, p) = p(z)·id − z ⊗ p.
        let mut rng = rng(21);
        for n in 2..7 {
            let z = random_vector(&mut rng, n);
            let p = random_covector(&mut rng, n);
            let v = random_vector(&mut rng, n);
            let got =
                osquare_apply(std::slice::from_ref(&z), std::slice::from_ref(&p), &v).unwrap();
            let expect = v
                .scaled(pair(&p, &z).unwrap())
                .add_scaled(-pair(&p, &v).unwrap(), &z)
                .unwrap();
            for j in 0..n {
                assert_close(got.coords()[j], expect.coords()[j], 1e-13);
            }
        }
    }

    #[test]
    fn osquare_operator_examples() {
        let m = osquare_operator(&[e(2, 0)], &[eps(2, 0)]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![0.0, 0.0], vec![0.0, 1.0]]);

        let mut rng = rng(22);
        let z1 = random_vector(&mut rng, 4);
        let z2 = z1.scaled(2.0);
        let ps = [random_covector(&mut rng, 4), random_covector(&mut rng, 4)];
        let m = osquare_operator(&[z1, z2], &ps).unwrap();
        assert!(m.max_abs() <= 1e-12 * 10.0);
    }

    #[test]
    fn osquare_defining_property() {
        let mut rng = rng(23);
        let n = 4;
        for _ in 0..20 {
            let zs: Vec<Vector> = (0..2).map(|_| random_vector(&mut rng, n)).collect();
            let ps: Vec<Covector> = (0..2).map(|_| random_covector(&mut rng, n)).collect();
            let v = random_vector(&mut rng, n);
            let q = random_covector(&mut rng, n);
            let lhs = pair(&q, &osquare_apply(&zs, &ps, &v).unwrap()).unwrap();
            let rhs = wedge_eval(
                &[q.clone(), ps[0].clone(), ps[1].clone()],
                &[v.clone(), zs[0].clone(), zs[1].clone()],
            )
            .unwrap();
            assert_close(lhs, rhs, 1e-11);
        }
    }

    #[test]
    fn swapping_a_pair_negates_the_operator() {
        let mut rng = rng(24);
        let n = 5;
        let zs: Vec<Vector> = (0..3).map(|_| random_vector(&mut rng, n)).collect();
        let ps: Vec<Covector> = (0..3).map(|_| random_covector(&mut rng, n)).collect();
        let base = osquare_operator(&zs, &ps).unwrap();
        let mut swapped = zs.clone();
        swapped.swap(0, 2);
        let flipped = osquare_operator(&swapped, &ps).unwrap();
        assert!(flipped.add(&base).unwrap().max_abs() <= 1e-11 * base.max_abs());
        let mut swapped = ps.clone();
        swapped.swap(1, 2);
        let flipped = osquare_operator(&zs, &swapped).unwrap();
        assert!(flipped.add(&base).unwrap().max_abs() <= 1e-11 * base.max_abs());
    }

    #[test]
    fn block_form_matches_column_assembly() {
        let mut rng = rng(25);
        for n in 2..8 {
            for len in 1..n {
                let zs: Vec<Vector> = (0..len).map(|_| random_vector(&mut rng, n)).collect();
                let ps: Vec<Covector> = (0..len).map(|_| random_covector(&mut rng, n)).collect();
                let q = DyadicPerturbation::from_pairs(zs.clone(), ps.clone()).unwrap();
                let block = self_gram(&q).entries().clone();
                let fast = osquare_from_block(&block, &q.vector_matrix(), &q.covector_matrix());
                let slow = osquare_operator(&zs, &ps).unwrap();
                let diff = (fast - slow.matrix()).amax();
                assert!(
                    diff <= 1e-11 * slow.max_abs().max(1.0),
                    "n={n} l={len} diff={diff}"
                );
            }
        }
    }

    #[test]
    fn det_examples() {
        let a = PerturbedIdentity::from_pairs(vec![e(3, 0)], vec![eps(3, 0)]).unwrap();
        assert_eq!(det_perturbed_identity(&a), 2.0);
        let a = PerturbedIdentity::from_pairs(vec![e(2, 0), e(2, 1)], vec![eps(2, 0), eps(2, 1)])
            .unwrap();
        assert_eq!(det_perturbed_identity(&a), 4.0);
        let a = PerturbedIdentity::from_pairs(vec![e(2, 0), e(2, 1)], vec![eps(2, 0), eps(2, 0)])
            .unwrap();
        assert_eq!(det_perturbed_identity(&a), 2.0);
    }

    #[test]
    fn det_matches_oracle_and_small_gram_identity() {
        let mut rng = rng(26);
        for (n, k) in [(6, 4), (3, 5), (2, 1), (8, 8), (4, 10)] {
            for _ in 0..10 {
                let a = random_identity_perturbation(&mut rng, n, k);
                let det = det_perturbed_identity(&a);
                let oracle_det = oracle::det(&a.materialize());
                assert_rel(det, oracle_det, 1e-10);

                // det(I_n + U Pᵀ) = det(I_k + Pᵀ U)
                let small =
                    Operator::from_matrix(DMatrix::identity(k, k) + a.gram().entries()).unwrap();
                assert_rel(det, oracle::det(&small), 1e-10);
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let a = PerturbedIdentity::from_pairs(vec![e(2, 0)], vec![eps(2, 0)]).unwrap();
        let r = inverse_perturbed_identity(&a).unwrap();
        assert_eq!(r.det_a, 2.0);
        assert_eq!(r.inverse, Operator::diagonal(&[0.5, 1.0]).unwrap());

        let a = PerturbedIdentity::from_pairs(
            vec![e(3, 0), e(3, 2)],
            vec![Covector::zeros(3), Covector::zeros(3)],
        )
        .unwrap();
        let r = inverse_perturbed_identity(&a).unwrap();
        assert_eq!(r.det_a, 1.0);
        assert_eq!(r.inverse, Operator::identity(3));
    }

    #[test]
    fn sherman_morrison_single_dyad() {
        let mut rng = rng(27);
        for n in 2..8 {
            let u = random_vector(&mut rng, n);
            let p = random_covector(&mut rng, n);
            let a = PerturbedIdentity::from_pairs(vec![u.clone()], vec![p.clone()]).unwrap();
            let r = inverse_perturbed_identity(&a).unwrap();
            let denom = 1.0 + pair(&p, &u).unwrap();
            let sm = Operator::identity(n)
                .sub(&Dyad::new(u, p).unwrap().to_operator().scaled(1.0 / denom))
                .unwrap();
            assert!(r.inverse.relative_error(&sm) <= 1e-12);
        }
    }

    #[test]
    fn inverse_matches_oracle() {
        let mut rng = rng(28);
        let mut done = 0;
        while done < 10 {
            let a = random_identity_perturbation(&mut rng, 8, 5);
            let m = a.materialize();
            if !oracle::passes_screen(&m) {
                continue;
            }
            let r = inverse_perturbed_identity(&a).unwrap();
            let expect = oracle::inverse(&m).unwrap();
            assert!(r.inverse.relative_error(&expect) <= 1e-9);
            let scaled = r.inverse.scaled(r.det_a);
            assert!(
                scaled.max_abs_diff(&r.adjugate_like) <= 1e-12 * r.adjugate_like.max_abs().max(1.0)
            );
            let residual = m
                .compose(&r.inverse)
                .unwrap()
                .max_abs_diff(&Operator::identity(8));
            assert!(residual <= 1e-9);
            done += 1;
        }
    }

    #[test]
    fn singular_perturbation_is_reported() {
        // u = e1, p = −ε1 gives A = diag(0, 1).
        let a = PerturbedIdentity::from_pairs(vec![e(2, 0)], vec![eps(2, 0).scaled(-1.0)]).unwrap();
        assert!(matches!(
            inverse_perturbed_identity(&a),
            Err(Error::SingularPerturbation { .. })
        ));
    }

    #[test]
    fn pairing_form_examples() {
        let mut rng = rng(29);
        let n = 4;
        let x = random_vector(&mut rng, n);
        let q = random_covector(&mut rng, n);
        let a = PerturbedIdentity::from_pairs(
            vec![random_vector(&mut rng, n), random_vector(&mut rng, n)],
            vec![Covector::zeros(n), Covector::zeros(n)],
        )
        .unwrap();
        assert_eq!(
            pairing_form_inverse(&a, &x, &q).unwrap(),
            pair(&q, &x).unwrap()
        );

        let u = random_vector(&mut rng, n);
        let p = random_covector(&mut rng, n);
        let a = PerturbedIdentity::from_pairs(vec![u.clone()], vec![p.clone()]).unwrap();
        let got = pairing_form_inverse(&a, &x, &q).unwrap();
        let closed = pair(&q, &x).unwrap() * (1.0 + pair(&p, &u).unwrap())
            - pair(&q, &u).unwrap() * pair(&p, &x).unwrap();
        assert_close(got, closed, 1e-13);
        let r = inverse_perturbed_identity(&a).unwrap();
        let via_inverse = pair(&q, &r.inverse.apply(&x).unwrap()).unwrap() * r.det_a;
        assert_close(got, via_inverse, 1e-12);
    }

    #[test]
    fn pairing_form_matches_adjugate() {
        let mut rng = rng(30);
        for _ in 0..10 {
            let a = random_identity_perturbation(&mut rng, 5, 3);
            let x = random_vector(&mut rng, 5);
            let q = random_covector(&mut rng, 5);
            let r = inverse_perturbed_identity(&a).unwrap();
            let expect = pair(&q, &r.adjugate_like.apply(&x).unwrap()).unwrap();
            assert_rel(pairing_form_inverse(&a, &x, &q).unwrap(), expect, 1e-10);
        }
    }

    #[test]
    fn corollary_examples() {
        let b = Operator::diagonal(&[2.0, 2.0]).unwrap();
        let q = DyadicPerturbation::from_pairs(vec![e(2, 0)], vec![eps(2, 0)]).unwrap();
        let inv = perturbed_inverse_exact(&b, &q).unwrap();
        assert_close(inv.get(0, 0), 1.0 / 3.0, 1e-15);
        assert_close(inv.get(1, 1), 0.5, 1e-15);
        assert_eq!(inv.get(0, 1), 0.0);
        assert_eq!(inv.get(1, 0), 0.0);

        let mut rng = rng(31);
        let b = random_operator(&mut rng, 3);
        let zero = DyadicPerturbation::from_pairs(vec![e(3, 1)], vec![Covector::zeros(3)]).unwrap();
        let inv = perturbed_inverse_exact(&b, &zero).unwrap();
        assert!(inv.relative_error(&oracle::inverse(&b).unwrap()) <= 1e-15);
    }

    #[test]
    fn corollary_matches_oracle() {
        let mut rng = rng(32);
        let mut done = 0;
        while done < 10 {
            let b = Operator::from_matrix(
                random_matrix(&mut rng, 10) + DMatrix::identity(10, 10) * 6.0,
            )
            .unwrap();
            let q = random_perturbation(&mut rng, 10, 7);
            let bp = b.add(&q.materialize()).unwrap();
            if !oracle::passes_screen(&bp) {
                continue;
            }
            let inv = perturbed_inverse_exact(&b, &q).unwrap();
            assert!(inv.relative_error(&oracle::inverse(&bp).unwrap()) <= 1e-9);
            done += 1;
        }
    }

    #[test]
    fn corollary_errors() {
        let b = Operator::zeros(2);
        let q = DyadicPerturbation::from_pairs(vec![e(2, 0)], vec![eps(2, 0)]).unwrap();
        assert_eq!(
            perturbed_inverse_exact(&b, &q).unwrap_err(),
            Error::SingularBase
        );

        let b = Operator::identity(2);
        let q =
            DyadicPerturbation::from_pairs(vec![e(2, 0)], vec![eps(2, 0).scaled(-1.0)]).unwrap();
        assert!(matches!(
            perturbed_inverse_exact(&b, &q),
            Err(Error::SingularPerturbation { .. })
        ));

        let q3 = DyadicPerturbation::from_pairs(vec![e(3, 0)], vec![eps(3, 0)]).unwrap();
        assert!(matches!(
            perturbed_inverse_exact(&b, &q3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn more_dyads_than_dimensions() {
        let mut rng = rng(33);
        let a = random_identity_perturbation(&mut rng, 3, 7);
        let m = a.materialize();
        assert_rel(det_perturbed_identity(&a), oracle::det(&m), 1e-10);
        let r = inverse_perturbed_identity(&a).unwrap();
        assert!(r.inverse.relative_error(&oracle::inverse(&m).unwrap()) <= 1e-9);
    }

    #[test]
    fn schur_mixing_preserves_the_perturbation() {
        let mut rng = rng(91);
        for (n, k) in [(4, 3), (5, 5), (3, 6)] {
            let q = random_perturbation(&mut rng, n, k);
            let gram = self_gram(&q);
            let (mixed, t) = schur_basis(&q, &gram);
            let diff = mixed.materialize().max_abs_diff(&q.materialize());
            assert!(diff <= 1e-12 * q.materialize().max_abs().max(1.0));
            let direct = gram.principal_minor_sums(n);
            for (a, b) in t.principal_minor_sums(n).iter().zip(&direct) {
                assert_close(*a, *b, 1e-11);
            }
            let before = osquare_subset_sum(&q, &gram, n - 1);
            let after = osquare_subset_sum(&mixed, &t, n - 1);
            assert!((after - &before).norm() <= 1e-11 * before.norm().max(1.0));
        }
    }

    #[test]
    fn exact_inverse_with_ill_conditioned_base() {
        // B' = C is well conditioned while B is not, so the pairings
        // p_a(B⁻¹ v_b) are large and their minors cancel heavily.
        let mut rng = rng(92);
        for n in [6, 8, 10] {
            let c = random_matrix(&mut rng, n) + DMatrix::identity(n, n) * (2.0 * n as f64);
            let svd = random_matrix(&mut rng, n).svd(true, true);
            let mut sigma = svd.singular_values.clone();
            sigma[n - 1] = 1e-5 * sigma[0];
            let b = svd.u.unwrap() * DMatrix::from_diagonal(&sigma) * svd.v_t.unwrap();
            let diff = &c - &b;
            let q = DyadicPerturbation::from_pairs(
                (0..n)
                    .map(|i| Vector::from_dvector(diff.column(i).into()).unwrap())
                    .collect(),
                (0..n).map(|i| eps(n, i)).collect(),
            )
            .unwrap();
            let b = Operator::from_matrix(b).unwrap();
            let expect = oracle::inverse(&Operator::from_matrix(c).unwrap()).unwrap();
            let got = perturbed_inverse_exact(&b, &q).unwrap();
            assert!(got.relative_error(&expect) <= oracle::TOL_INVERSE);
        }
    }
}
