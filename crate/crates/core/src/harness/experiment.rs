//! Monte Carlo driver.
//!
//! Replicate `r` is half `r % 2` of pair `r / 2`, and pair `p` is drawn with
//! seed `seed ^ p`. Pairs are dispatched to a bounded pool and collected in
//! index order, so results do not depend on the worker count.

use std::io::Write;

use rayon::prelude::*;

use super::config::{EstimatorKind, ExperimentConfig, ResolvedConfig};
use super::summary::{summarize, SummaryRow, SummaryTable};
use crate::covmodel::{two_step_fit_detailed, CovModel};
use crate::error::{Error, Result};
use crate::estimator::{build_system, fit, EstimatorReport, RegressionSystem, Weight};
use crate::field::Field;
use crate::synthesis::FbsSynthesizer;

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Seed of synthesis pair `pair`.
pub fn pair_seed(seed: u64, pair: u64) -> u64 {
    seed ^ pair
}

/// Reports of one field, in the order of `estimators`.
#[derive(Debug, Clone)]
pub struct FieldEstimates {
    pub system: RegressionSystem,
    pub reports: Vec<(EstimatorKind, EstimatorReport)>,
}

/// Build the regression system of `field` and run every requested estimator.
pub fn estimate_field(
    field: &Field,
    resolved: &ResolvedConfig,
    model: &CovModel,
    estimators: &[EstimatorKind],
) -> Result<FieldEstimates> {
    let system = build_system(field, &resolved.filter, &resolved.octaves)?;
    let reports = if estimators.contains(&EstimatorKind::TwoStep) {
        let out = two_step_fit_detailed(&system, model)?;
        estimators
            .iter()
            .map(|&k| match k {
                EstimatorKind::Ols => (k, out.ols.clone()),
                EstimatorKind::TwoStep => (k, out.two_step.clone()),
            })
            .collect()
    } else {
        let ols = fit(&system, &Weight::Identity)?;
        estimators.iter().map(|&k| (k, ols.clone())).collect()
    };
    Ok(FieldEstimates { system, reports })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplicateOutcome {
    /// `H_hat` per estimator, in configuration order.
    Ok(Vec<Vec<f64>>),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub outcome: ReplicateOutcome,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub estimators: Vec<EstimatorKind>,
    pub summary: SummaryTable,
    pub records: Vec<ReplicateRecord>,
    pub failures: usize,
}

impl ExperimentResult {
    /// Successful estimates of one estimator, replicate x axis.
    pub fn estimates(&self, kind: EstimatorKind) -> Vec<Vec<f64>> {
        let Some(pos) = self.estimators.iter().position(|&k| k == kind) else {
            return Vec::new();
        };
        self.records
            .iter()
            .filter_map(|r| match &r.outcome {
                ReplicateOutcome::Ok(h) => Some(h[pos].clone()),
                ReplicateOutcome::Failed(_) => None,
            })
            .collect()
    }

    /// `replicate,estimator,status,h_1..h_d`; failed replicates have empty
    /// estimate cells and the error message in `status`.
    pub fn write_raw_csv(&self, d: usize, mut out: impl Write) -> Result<()> {
        let hs: Vec<String> = (1..=d).map(|i| format!("h_{i}")).collect();
        writeln!(out, "replicate,estimator,status,{}", hs.join(","))?;
        for r in &self.records {
            for (e, kind) in self.estimators.iter().enumerate() {
                match &r.outcome {
                    ReplicateOutcome::Ok(h) => {
                        let cells: Vec<String> = h[e].iter().map(|v| format!("{v:.17e}")).collect();
                        writeln!(out, "{},{},ok,{}", r.replicate, kind.as_str(), cells.join(","))?;
                    }
                    ReplicateOutcome::Failed(msg) => {
                        let msg = msg.replace([',', '\n'], ";");
                        writeln!(out, "{},{},failed: {msg},{}", r.replicate, kind.as_str(), ",".repeat(d - 1))?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    run_experiment_with_faults(config, threads, &|_| false)
}

/// As [`run_experiment`], with replicates for which `fault` returns true
/// failing before estimation. Used to exercise failure accounting.
pub fn run_experiment_with_faults(
    config: &ExperimentConfig,
    threads: Option<usize>,
    fault: &(dyn Fn(usize) -> bool + Sync),
) -> Result<ExperimentResult> {
    let resolved = config.resolve()?;
    let synth = FbsSynthesizer::for_sheet(resolved.hurst.clone(), &config.dims)?;
    let model = CovModel::new(&resolved.filter, resolved.cov)?;
    let estimators = config.estimators.clone();
    let replicates = config.replicates;
    let pairs = replicates.div_ceil(2);

    let run_pair = |p: usize| -> Vec<ReplicateRecord> {
        let (a, b) = synth.sample_pair(pair_seed(config.seed, p as u64));
        [a, b]
            .iter()
            .enumerate()
            .map(|(half, field)| (2 * p + half, field))
            .filter(|&(r, _)| r < replicates)
            .map(|(r, field)| ReplicateRecord {
                replicate: r,
                outcome: run_replicate(r, field, &resolved, &model, &estimators, fault),
            })
            .collect()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records: Vec<ReplicateRecord> = pool.install(|| {
        (0..pairs)
            .into_par_iter()
            .map(run_pair)
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });

    let failures = records
        .iter()
        .filter(|r| matches!(r.outcome, ReplicateOutcome::Failed(_)))
        .count();
    if failures as f64 > MAX_FAILURE_RATE * replicates as f64 {
        return Err(Error::TooManyFailures { failed: failures, total: replicates });
    }

    let mut result = ExperimentResult {
        estimators,
        summary: SummaryTable { rows: Vec::new(), failures },
        records,
        failures,
    };
    let truth = resolved.hurst.as_slice();
    let ok = replicates - failures;
    if ok >= 2 {
        for &kind in &result.estimators {
            let stats = summarize(&result.estimates(kind), truth)?;
            for (axis, s) in stats.into_iter().enumerate() {
                result.summary.rows.push(SummaryRow {
                    estimator: kind.as_str().to_string(),
                    axis,
                    truth: truth[axis],
                    stats: s,
                    replicates: ok,
                });
            }
        }
    }
    Ok(result)
}

fn run_replicate(
    r: usize,
    field: &Field,
    resolved: &ResolvedConfig,
    model: &CovModel,
    estimators: &[EstimatorKind],
    fault: &(dyn Fn(usize) -> bool + Sync),
) -> ReplicateOutcome {
    if fault(r) {
        return ReplicateOutcome::Failed("injected fault".into());
    }
    match estimate_field(field, resolved, model, estimators) {
        Ok(est) => ReplicateOutcome::Ok(est.reports.into_iter().map(|(_, rep)| rep.hurst).collect()),
        Err(e) => ReplicateOutcome::Failed(e.to_string()),
    }
}
