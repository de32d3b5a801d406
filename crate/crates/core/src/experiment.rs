//! Randomized convergence study comparing the order-`m` approximation with
//! the Taylor polynomial of the same order.
//!
//! Every `(dim, rank, trial)` cell draws from its own ChaCha stream derived
//! from the seed, so results do not depend on how trials are scheduled across
//! threads.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::approx::{AlphaMethod, ApproxOptions, ApproxSeries, PowerMethod};
use crate::ensemble::Distribution;
use crate::error::{Error, Result};
use crate::metric::{lift, DualDyad, DualPerturbation, Metric};
use crate::oracle;
use crate::tensor::{Covector, DyadicPerturbation, Operator};

/// Redraws allowed per trial before the run is abandoned.
const MAX_REDRAWS: usize = 10_000;

pub const RECORD_HEADER: &str = "dim,rank,trial,m,approx_error,taylor_error,det_a,regenerated";
pub const SUMMARY_HEADER: &str =
    "dim,rank,m,trials,approx_median,approx_mean,taylor_median,taylor_mean,win_rate,taylor_diverging";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricMode {
    /// Work directly with `B: V → V`.
    #[default]
    None,
    /// Read `B` as a map `V → V*` and go through the Euclidean metric.
    Euclidean,
}

impl FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MetricMode::None),
            "euclidean" => Ok(MetricMode::Euclidean),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for MetricMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricMode::None => "none",
            MetricMode::Euclidean => "euclidean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub orders: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub distribution: Distribution,
    pub metric: MetricMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: (2..=10).collect(),
            ranks: (2..=15).collect(),
            orders: (0..=15).collect(),
            trials: 100,
            seed: 0,
            distribution: Distribution::StandardNormal,
            metric: MetricMode::None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.ranks.is_empty() || self.orders.is_empty() {
            return Err(Error::InvalidConfig(
                "dims, ranks and orders must be non-empty".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if let Some(d) = self.dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidConfig(format!("dimension {d} is below 2")));
        }
        if self.ranks.contains(&0) {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        Ok(())
    }

    fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(0)
    }
}

/// One `(dim, rank, trial, m)` measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub dim: usize,
    pub rank: usize,
    pub trial: usize,
    pub order: usize,
    pub approx_error: f64,
    pub taylor_error: f64,
    pub det_a: f64,
    /// At least one draw for this trial was rejected and replaced.
    pub regenerated: bool,
}

fn trial_rng(seed: u64, dim: usize, rank: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((dim as u64) << 48) | ((rank as u64) << 32) | trial as u64);
    rng
}

struct Measured {
    det_a: f64,
    errors: Vec<(f64, f64)>,
}

fn measure(
    cfg: &ExperimentConfig,
    b: &Operator,
    q: &DyadicPerturbation,
    exact: &Operator,
) -> Result<Measured> {
    let options = ApproxOptions {
        alpha: AlphaMethod::CharPoly,
        powers: PowerMethod::LowRank,
    };
    let max_order = cfg.max_order();
    let (series, post) = match cfg.metric {
        MetricMode::None => (ApproxSeries::new(b, q, max_order, options)?, None),
        MetricMode::Euclidean => {
            let g = Metric::euclidean(b.dim());
            let w = DualPerturbation::new(
                q.dyads()
                    .iter()
                    .map(|d| {
                        let as_covector = Covector::new(d.vector().coords().to_vec())?;
                        DualDyad::new(as_covector, d.covector().clone())
                    })
                    .collect::<Result<Vec<_>>>()?,
            )?;
            let (tilde, lifted) = lift(&g, b, &w)?;
            (
                ApproxSeries::new(&tilde, &lifted, max_order, options)?,
                Some(g.inverse_matrix()?),
            )
        }
    };
    let finish = |op: Operator| -> Result<Operator> {
        match &post {
            Some(sharp) => op.compose(sharp),
            None => Ok(op),
        }
    };

    let mut errors = Vec::with_capacity(cfg.orders.len());
    for &m in &cfg.orders {
        let approx = finish(series.approx_inverse(m)?)?.relative_error(exact);
        let taylor = finish(series.taylor_inverse(m)?)?.relative_error(exact);
        if !approx.is_finite() || !taylor.is_finite() {
            return Err(Error::NonFinite("trial error"));
        }
        errors.push((approx, taylor));
    }
    Ok(Measured {
        det_a: series.alphas().det(),
        errors,
    })
}

fn run_trial(
    cfg: &ExperimentConfig,
    dim: usize,
    rank: usize,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let mut rng = trial_rng(cfg.seed, dim, rank, trial);
    for attempt in 0..MAX_REDRAWS {
        let b = cfg.distribution.operator(&mut rng, dim);
        let q = cfg.distribution.perturbation(&mut rng, dim, rank);
        if !oracle::passes_screen(&b) {
            continue;
        }
        let perturbed = b.add(&q.materialize())?;
        if !oracle::passes_screen(&perturbed) {
            continue;
        }
        let exact = oracle::inverse(&perturbed)?;
        let Ok(measured) = measure(cfg, &b, &q, &exact) else {
            continue;
        };
        return Ok(cfg
            .orders
            .iter()
            .zip(measured.errors)
            .map(|(&order, (approx_error, taylor_error))| TrialRecord {
                dim,
                rank,
                trial,
                order,
                approx_error,
                taylor_error,
                det_a: measured.det_a,
                regenerated: attempt > 0,
            })
            .collect());
    }
    Err(Error::InvalidConfig(format!(
        "no usable draw for dim {dim}, rank {rank}, trial {trial} after {MAX_REDRAWS} attempts"
    )))
}

/// Runs every `(dim, rank, trial)` cell and returns the records ordered by
/// dim, rank, trial, then order as listed in the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize, usize)> = cfg
        .dims
        .iter()
        .flat_map(|&d| {
            cfg.ranks
                .iter()
                .flat_map(move |&k| (0..cfg.trials).map(move |t| (d, k, t)))
        })
        .collect();
    let per_cell: Vec<Vec<TrialRecord>> = cells
        .par_iter()
        .map(|&(d, k, t)| run_trial(cfg, d, k, t))
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// Aggregate over the trials of one `(dim, rank, m)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dim: usize,
    pub rank: usize,
    pub order: usize,
    pub trials: usize,
    pub approx_median: f64,
    pub approx_mean: f64,
    pub taylor_median: f64,
    pub taylor_mean: f64,
    /// Fraction of trials with `approx_error ≤ taylor_error`; ties count for
    /// the approximation.
    pub win_rate: f64,
    /// Fraction of trials whose Taylor error exceeds one.
    pub taylor_diverging: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("trial records"));
    }
    let mut groups: BTreeMap<(usize, usize, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.dim, r.rank, r.order)).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((dim, rank, order), rs)| {
            let count = rs.len() as f64;
            let mut approx: Vec<f64> = rs.iter().map(|r| r.approx_error).collect();
            let mut taylor: Vec<f64> = rs.iter().map(|r| r.taylor_error).collect();
            let wins = rs
                .iter()
                .filter(|r| r.approx_error <= r.taylor_error)
                .count();
            let diverging = rs.iter().filter(|r| r.taylor_error > 1.0).count();
            SummaryRow {
                dim,
                rank,
                order,
                trials: rs.len(),
                approx_mean: approx.iter().sum::<f64>() / count,
                taylor_mean: taylor.iter().sum::<f64>() / count,
                approx_median: median(&mut approx),
                taylor_median: median(&mut taylor),
                win_rate: wins as f64 / count,
                taylor_diverging: diverging as f64 / count,
            }
        })
        .collect())
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_records_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> io::Result<()> {
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.dim,
            r.rank,
            r.trial,
            r.order,
            float(r.approx_error),
            float(r.taylor_error),
            float(r.det_a),
            r.regenerated
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut out: W, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.dim,
            s.rank,
            s.order,
            s.trials,
            float(s.approx_median),
            float(s.approx_mean),
            float(s.taylor_median),
            float(s.taylor_mean),
            float(s.win_rate),
            float(s.taylor_diverging)
        )?;
    }
    Ok(())
}

/// Parses the output of [`write_records_csv`].
pub fn parse_records_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RECORD_HEADER => {}
        _ => return Err(Error::Malformed("missing or unexpected CSV header".into())),
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Malformed(format!("bad CSV row {}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(TrialRecord {
                dim: int(f[0])?,
                rank: int(f[1])?,
                trial: int(f[2])?,
                order: int(f[3])?,
                approx_error: real(f[4])?,
                taylor_error: real(f[5])?,
                det_a: real(f[6])?,
                regenerated: f[7].parse::<bool>().map_err(|_| bad())?,
            })
        })
        .collect()
}
