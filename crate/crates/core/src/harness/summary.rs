use std::io::Write;

use crate::error::{Error, Result};

/// Mean, sample standard deviation (divisor `R - 1`) and root mean squared
/// error against the truth for one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisStats {
    pub mean: f64,
    pub std: f64,
    pub rmse: f64,
}

/// Column statistics of a replicate x axis matrix of estimates.
pub fn summarize(estimates: &[Vec<f64>], truth: &[f64]) -> Result<Vec<AxisStats>> {
    let r = estimates.len();
    if r < 2 {
        return Err(Error::InsufficientReplicates(r));
    }
    let d = truth.len();
    if estimates.iter().any(|row| row.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "estimates must have {d} columns"
        )));
    }
    Ok((0..d)
        .map(|i| {
            let mean = estimates.iter().map(|row| row[i]).sum::<f64>() / r as f64;
            let ss = estimates.iter().map(|row| (row[i] - mean).powi(2)).sum::<f64>();
            let mse = estimates.iter().map(|row| (row[i] - truth[i]).powi(2)).sum::<f64>() / r as f64;
            AxisStats {
                mean,
                std: (ss / (r as f64 - 1.0)).sqrt(),
                rmse: mse.sqrt(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: String,
    pub axis: usize,
    pub truth: f64,
    pub stats: AxisStats,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub failures: usize,
}

impl SummaryTable {
    pub fn get(&self, estimator: &str, axis: usize) -> Option<&AxisStats> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.axis == axis)
            .map(|r| &r.stats)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# std: sample standard deviation over successful replicates (divisor R-1)")?;
        writeln!(out, "# rmse: sqrt(mean((H_hat - H)^2)) (divisor R)")?;
        writeln!(out, "# failures: {}", self.failures)?;
        writeln!(out, "estimator,axis,truth,mean,std,rmse,replicates,failures")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{},{}",
                r.estimator,
                r.axis + 1,
                r.truth,
                r.stats.mean,
                r.stats.std,
                r.stats.rmse,
                r.replicates,
                self.failures
            )?;
        }
        Ok(())
    }
}
