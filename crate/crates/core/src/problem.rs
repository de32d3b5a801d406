//! JSON problem files.
//!
//! ```json
//! {"B": [[2, 0], [0, 2]], "dyads": [{"v": [1, 0], "p": [1, 0]}]}
//! ```
//!
//! Vectors and covectors are arrays of numbers and operators are arrays of
//! rows. An optional metric `"g"` switches to the dual reading: `B` is a map
//! `V → V*` and the perturbation terms are covector pairs, given either as
//! `"w": [{"q": [...], "p": [...]}]` or as `"dyads"` whose `"v"` entries are
//! read as covectors.

use serde::{Deserialize, Serialize};

use crate::approx::{ApproxOptions, ApproxReport, ApproxSeries};
use crate::error::{check_dim, Error, Result};
use crate::exact::{perturbed_det, perturbed_inverse_exact};
use crate::metric::{lift, perturbed_dual_inverse_exact, DualDyad, DualPerturbation, Metric};
use crate::oracle;
use crate::tensor::{Covector, Dyad, DyadicPerturbation, Operator, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireDyad {
    v: Vec<f64>,
    p: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireDualDyad {
    q: Vec<f64>,
    p: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WirePerturbation {
    dyads: Vec<WireDyad>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireProblem {
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dyads: Option<Vec<WireDyad>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<WireDualDyad>>,
}

fn malformed(e: serde_json::Error) -> Error {
    Error::Malformed(e.to_string())
}

fn dyads_from_wire(wire: Vec<WireDyad>) -> Result<DyadicPerturbation> {
    let dyads = wire
        .into_iter()
        .map(|d| Dyad::new(Vector::new(d.v)?, Covector::new(d.p)?))
        .collect::<Result<Vec<_>>>()?;
    DyadicPerturbation::new(dyads)
}

fn dyads_to_wire(q: &DyadicPerturbation) -> Vec<WireDyad> {
    q.dyads()
        .iter()
        .map(|d| WireDyad {
            v: d.vector().coords().to_vec(),
            p: d.covector().coords().to_vec(),
        })
        .collect()
}

/// Parses `{"dyads": [{"v": [...], "p": [...]}, ...]}`.
pub fn perturbation_from_json(text: &str) -> Result<DyadicPerturbation> {
    let wire: WirePerturbation = serde_json::from_str(text).map_err(malformed)?;
    dyads_from_wire(wire.dyads)
}

pub fn perturbation_to_json(q: &DyadicPerturbation) -> String {
    serde_json::to_string(&WirePerturbation {
        dyads: dyads_to_wire(q),
    })
    .expect("serializable")
}

/// Parses an array of rows.
pub fn operator_from_json(text: &str) -> Result<Operator> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(malformed)?;
    Operator::from_rows(&rows)
}

pub fn operator_to_json(op: &Operator) -> serde_json::Value {
    serde_json::to_value(op.to_rows()).expect("serializable")
}

/// The perturbation part of a problem.
#[derive(Debug, Clone)]
pub enum Perturbation {
    /// `B' = B + Σ v_i ⊗ p_i` on `V`.
    Direct(DyadicPerturbation),
    /// `A' = B + Σ q_i ⊗ p_i` as a map `V → V*`, handled through `metric`.
    Dual {
        metric: Metric,
        terms: DualPerturbation,
    },
}

/// Base operator plus perturbation, as read from a problem file.
#[derive(Debug, Clone)]
pub struct Problem {
    pub base: Operator,
    pub perturbation: Perturbation,
}

/// `det A`, `det B` and `det B' = det B · det A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetReport {
    pub det_a: f64,
    pub det_b: f64,
    pub det_b_prime: f64,
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: WireProblem = serde_json::from_str(text).map_err(malformed)?;
        let base = Operator::from_rows(&wire.b)?;
        let perturbation = match (wire.g, wire.dyads, wire.w) {
            (_, Some(_), Some(_)) => {
                return Err(Error::Malformed(
                    "give either \"dyads\" or \"w\", not both".into(),
                ))
            }
            (_, None, None) => {
                return Err(Error::Malformed(
                    "missing \"dyads\" (or \"w\" with \"g\")".into(),
                ))
            }
            (None, None, Some(_)) => {
                return Err(Error::Malformed("\"w\" requires a metric \"g\"".into()))
            }
            (None, Some(dyads), None) => Perturbation::Direct(dyads_from_wire(dyads)?),
            (Some(g), dyads, w) => {
                let metric = Metric::from_rows(&g)?;
                let pairs: Vec<(Vec<f64>, Vec<f64>)> = match (dyads, w) {
                    (Some(ds), _) => ds.into_iter().map(|d| (d.v, d.p)).collect(),
                    (_, Some(ws)) => ws.into_iter().map(|d| (d.q, d.p)).collect(),
                    _ => unreachable!(),
                };
                let terms = pairs
                    .into_iter()
                    .map(|(q, p)| DualDyad::new(Covector::new(q)?, Covector::new(p)?))
                    .collect::<Result<Vec<_>>>()?;
                Perturbation::Dual {
                    metric,
                    terms: DualPerturbation::new(terms)?,
                }
            }
        };
        let problem = Self { base, perturbation };
        check_dim(problem.base.dim(), problem.perturbation_dim())?;
        if let Perturbation::Dual { metric, .. } = &problem.perturbation {
            check_dim(problem.base.dim(), metric.dim())?;
        }
        Ok(problem)
    }

    pub fn to_json(&self) -> String {
        let wire = match &self.perturbation {
            Perturbation::Direct(q) => WireProblem {
                b: self.base.to_rows(),
                dyads: Some(dyads_to_wire(q)),
                g: None,
                w: None,
            },
            Perturbation::Dual { metric, terms } => WireProblem {
                b: self.base.to_rows(),
                dyads: None,
                g: Some(metric.matrix().to_rows()),
                w: Some(
                    terms
                        .terms()
                        .iter()
                        .map(|t| WireDualDyad {
                            q: t.q().coords().to_vec(),
                            p: t.p().coords().to_vec(),
                        })
                        .collect(),
                ),
            },
        };
        serde_json::to_string(&wire).expect("serializable")
    }

    fn perturbation_dim(&self) -> usize {
        match &self.perturbation {
            Perturbation::Direct(q) => q.dim(),
            Perturbation::Dual { terms, .. } => terms.dim(),
        }
    }

    /// `B + Q` (or `B + W`) as a dense matrix.
    pub fn perturbed_matrix(&self) -> Result<Operator> {
        match &self.perturbation {
            Perturbation::Direct(q) => self.base.add(&q.materialize()),
            Perturbation::Dual { terms, .. } => self.base.add(&terms.materialize()),
        }
    }

    /// The equivalent problem on `V`: `(B, Q)` itself, or `(Ã, lifted W)`
    /// together with the matrix of `sharp` that maps results back.
    fn on_v(&self) -> Result<(Operator, DyadicPerturbation, Option<Operator>)> {
        match &self.perturbation {
            Perturbation::Direct(q) => Ok((self.base.clone(), q.clone(), None)),
            Perturbation::Dual { metric, terms } => {
                let (tilde, lifted) = lift(metric, &self.base, terms)?;
                Ok((tilde, lifted, Some(metric.inverse_matrix()?)))
            }
        }
    }

    pub fn det(&self) -> Result<DetReport> {
        let det_b = oracle::lu_factor(&self.base)
            .map(|f| f.det())
            .map_err(|_| Error::SingularBase)?;
        let (base, q, _) = self.on_v()?;
        let (det_a, _) = perturbed_det(&base, &q)?;
        Ok(DetReport {
            det_a,
            det_b,
            det_b_prime: det_b * det_a,
        })
    }

    pub fn exact_inverse(&self) -> Result<Operator> {
        match &self.perturbation {
            Perturbation::Direct(q) => perturbed_inverse_exact(&self.base, q),
            Perturbation::Dual { metric, terms } => {
                perturbed_dual_inverse_exact(metric, &self.base, terms)
            }
        }
    }

    /// Order-`m` approximation and Taylor polynomial, with errors measured
    /// against the dense LU inverse of the perturbed matrix.
    pub fn approx(&self, m: usize) -> Result<ApproxReport> {
        let (base, q, post) = self.on_v()?;
        let series = ApproxSeries::new(&base, &q, m, ApproxOptions::default())?;
        let finish = |op: Operator| match &post {
            Some(sharp) => op.compose(sharp),
            None => Ok(op),
        };
        let exact = oracle::inverse(&self.perturbed_matrix()?).map_err(|_| {
            Error::SingularPerturbation {
                det_a: series.alphas().det(),
            }
        })?;
        let approx = finish(series.approx_inverse(m)?)?;
        let taylor = finish(series.taylor_inverse(m)?)?;
        Ok(ApproxReport {
            order: m,
            det_m: series.truncated_det(m),
            approx_error: approx.relative_error(&exact),
            taylor_error: taylor.relative_error(&exact),
            approx_inverse: approx,
            taylor_inverse: taylor,
        })
    }
}
