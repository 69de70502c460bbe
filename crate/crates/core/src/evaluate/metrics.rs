use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::estimate::EstimateSummary;

const ZERO_TRUTH: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMetrics {
    pub name: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    /// `bias / truth`, or the absolute bias when the truth is (numerically) zero.
    pub rel_bias: f64,
    pub emp_se: f64,
    pub mse: f64,
    pub coverage: f64,
    /// Coverage after shifting every interval by minus the mean bias.
    pub bc_coverage: f64,
}

/// Monte Carlo performance of one estimator over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n_reps: usize,
    pub params: Vec<ParamMetrics>,
}

impl McReport {
    pub fn get(&self, name: &str) -> Option<&ParamMetrics> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Mean absolute bias over parameters whose name starts with `prefix`.
    pub fn mean_abs_bias(&self, prefix: &str) -> Option<f64> {
        let v: Vec<f64> = self.params.iter().filter(|p| p.name.starts_with(prefix)).map(|p| p.bias.abs()).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Bias, relative bias, empirical SE, MSE and CrI coverage of every truth
/// scalar present in all estimates.
pub fn mc_metrics(estimates: &[EstimateSummary], truth: &[(String, f64)]) -> Result<McReport> {
    if estimates.len() < 2 {
        return Err(Error::Config(format!("need at least 2 replications, got {}", estimates.len())));
    }
    let n = estimates.len() as f64;
    let mut params = Vec::new();
    for (name, t) in truth {
        let rows: Vec<(f64, f64, f64)> = estimates.iter().filter_map(|e| e.get(name)).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() != estimates.len() {
            return Err(Error::Config(format!("parameter {name} missing from some replications")));
        }
        let mean = rows.iter().map(|r| r.0).sum::<f64>() / n;
        let bias = mean - t;
        let emp_se = (rows.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let mse = rows.iter().map(|r| (r.0 - t).powi(2)).sum::<f64>() / n;
        let coverage = rows.iter().filter(|r| r.1 <= *t && *t <= r.2).count() as f64 / n;
        let bc_coverage = rows.iter().filter(|r| r.1 - bias <= *t && *t <= r.2 - bias).count() as f64 / n;
        let rel_bias = if t.abs() < ZERO_TRUTH { bias } else { bias / t };
        params.push(ParamMetrics {
            name: name.clone(),
            truth: *t,
            mean_estimate: mean,
            bias,
            rel_bias,
            emp_se,
            mse,
            coverage,
            bc_coverage,
        });
    }
    if params.is_empty() {
        return Err(Error::Config("no truth parameter matches the estimates".into()));
    }
    Ok(McReport { n_reps: estimates.len(), params })
}
