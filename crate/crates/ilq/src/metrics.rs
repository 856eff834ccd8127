//! Append-only `metrics.csv`, one row per evaluation.

use std::fs::File;
use std::path::Path;

use ilq_core::agent::{EvalRecord, StepMetrics};

use crate::error::{IoError, Result};

pub const COLUMNS: [&str; 10] = [
    "step",
    "critic_loss",
    "actor_loss",
    "q_in_mean",
    "q_ood_mean",
    "y_img_mean",
    "y_lmt_mean",
    "frac_lmt",
    "eval_return",
    "normalized_score",
];

pub struct MetricsWriter {
    inner: csv::Writer<File>,
    rows: usize,
}

/// Empty for values an ablated run never computes.
fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

impl MetricsWriter {
    /// Creates (truncating) the file and writes the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| IoError::io(path, e))?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(COLUMNS)?;
        inner.flush().map_err(|e| IoError::io(path, e))?;
        Ok(Self { inner, rows: 0 })
    }

    pub fn append(&mut self, m: &StepMetrics, eval: &EvalRecord) -> Result<()> {
        self.inner.write_record([
            m.step.to_string(),
            cell(m.critic_loss),
            cell(m.actor_loss),
            cell(m.q_in_mean),
            cell(m.q_ood_mean),
            cell(m.y_img_mean),
            cell(m.y_lmt_mean),
            cell(m.frac_lmt),
            cell(eval.mean_return),
            eval.normalized_score.map(cell).unwrap_or_default(),
        ])?;
        self.inner.flush().map_err(|e| IoError::Csv(e.into()))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}
