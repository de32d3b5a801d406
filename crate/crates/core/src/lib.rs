//! Determinants and inverses of linear operators perturbed by sums of dyadic
//! products, `B' = B + Σ v_i ⊗ p_i`.
//!
//! * [`exact`] evaluates the exterior-algebra formulas for `det A` and
//!   `A⁻¹` where `A = id + Σ u_i ⊗ p_i`, and from them `(B')⁻¹`.
//! * [`approx`] provides the `m`-th order approximation family, which is exact
//!   once `m` reaches the number of dyads, alongside the truncated Taylor
//!   series it generalizes.
//! * [`metric`] lifts perturbations of maps `V → V*` through a nondegenerate
//!   metric.
//! * [`oracle`] is an independent dense LU and permutation-expansion path
//!   used to check everything else.
//! * [`experiment`] runs the randomized convergence study behind the `bench`
//!   command.

pub mod approx;
pub mod ensemble;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod metric;
pub mod oracle;
pub mod problem;
pub mod tensor;

#[cfg(test)]
mod test_support;

pub use approx::{
    alpha_coefficients, alpha_coefficients_charpoly, approx_inverse, approx_report,
    osquare_truncated_inverse, power_series_inverse, taylor_inverse, truncated_det,
    AlphaCoefficients, AlphaMethod, ApproxOptions, ApproxReport, ApproxSeries, PowerMethod,
};
pub use ensemble::Distribution;
pub use error::{Error, Result};
pub use exact::{
    det_perturbed_identity, inverse_perturbed_identity, osquare_apply, osquare_operator,
    pairing_form_inverse, perturbed_det, perturbed_inverse_exact, ExactInverseResult,
    PerturbedIdentity,
};
pub use experiment::{
    run_experiment, summarize, ExperimentConfig, MetricMode, SummaryRow, TrialRecord,
};
pub use metric::{
    musical_flat, musical_sharp, perturbed_dual_inverse, DualDyad, DualPerturbation, Metric,
};
pub use problem::Problem;
pub use tensor::{
    dyad_to_operator, gram, pair, wedge_eval, Covector, Dyad, DyadicPerturbation, GramMatrix,
    Operator, Vector,
};
