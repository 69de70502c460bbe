use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::IndividualParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    #[default]
    Macro,
    Micro,
}

/// Pooled `M × M` confusion counts, rows true, columns decoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Matrix<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingMetrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub kappa: f64,
}

impl ConfusionMatrix {
    pub fn new(m: usize) -> Self {
        Self { counts: Matrix::filled(m, m, 0) }
    }

    /// Add one individual's paths (0-based labels).
    pub fn add(&mut self, truth: &[usize], decoded: &[usize], individual: usize) -> Result<()> {
        let m = self.counts.rows();
        if truth.len() != decoded.len() {
            return Err(Error::Data {
                row: individual + 1,
                msg: format!("path lengths differ: {} vs {}", truth.len(), decoded.len()),
            });
        }
        for (&t, &d) in truth.iter().zip(decoded) {
            if t >= m || d >= m {
                return Err(Error::Data { row: individual + 1, msg: format!("state label outside 1..{m}") });
            }
            self.counts[(t, d)] += 1;
        }
        Ok(())
    }

    pub fn from_paths(truth: &[Vec<usize>], decoded: &[Vec<usize>], m: usize) -> Result<Self> {
        if truth.len() != decoded.len() {
            return Err(Error::Config(format!("{} true paths but {} decoded", truth.len(), decoded.len())));
        }
        let mut c = Self::new(m);
        for (n, (t, d)) in truth.iter().zip(decoded).enumerate() {
            c.add(t, d, n)?;
        }
        Ok(c)
    }

    pub fn metrics(&self, average: F1Average) -> DecodingMetrics {
        let m = self.counts.rows();
        let c = |i: usize, j: usize| self.counts[(i, j)] as f64;
        let total: f64 = self.counts.as_slice().iter().map(|&v| v as f64).sum();
        let row: Vec<f64> = (0..m).map(|i| (0..m).map(|j| c(i, j)).sum()).collect();
        let col: Vec<f64> = (0..m).map(|j| (0..m).map(|i| c(i, j)).sum()).collect();
        let diag: f64 = (0..m).map(|i| c(i, i)).sum();
        let accuracy = diag / total;

        let recalls: Vec<f64> = (0..m).filter(|&i| row[i] > 0.0).map(|i| c(i, i) / row[i]).collect();
        let balanced_accuracy = recalls.iter().sum::<f64>() / recalls.len() as f64;

        let f1 = match average {
            F1Average::Micro => accuracy,
            F1Average::Macro => {
                let f: Vec<f64> = (0..m)
                    .filter(|&i| row[i] + col[i] > 0.0)
                    .map(|i| 2.0 * c(i, i) / (row[i] + col[i]))
                    .collect();
                f.iter().sum::<f64>() / f.len() as f64
            }
        };

        let p_e: f64 = (0..m).map(|i| row[i] * col[i]).sum::<f64>() / (total * total);
        let kappa = if (1.0 - p_e).abs() < 1e-15 {
            if accuracy == 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (accuracy - p_e) / (1.0 - p_e)
        };
        DecodingMetrics { accuracy, balanced_accuracy, f1, kappa }
    }
}

/// Balanced accuracy, F1 and Cohen's κ from the confusion matrix pooled over individuals.
pub fn decoding_metrics(
    truth: &[Vec<usize>],
    decoded: &[Vec<usize>],
    m: usize,
    average: F1Average,
) -> Result<DecodingMetrics> {
    Ok(ConfusionMatrix::from_paths(truth, decoded, m)?.metrics(average))
}

/// The same metrics per individual.
pub fn decoding_metrics_per_individual(
    truth: &[Vec<usize>],
    decoded: &[Vec<usize>],
    m: usize,
    average: F1Average,
) -> Result<Vec<DecodingMetrics>> {
    if truth.len() != decoded.len() {
        return Err(Error::Config(format!("{} true paths but {} decoded", truth.len(), decoded.len())));
    }
    truth
        .iter()
        .zip(decoded)
        .enumerate()
        .map(|(n, (t, d))| {
            let mut c = ConfusionMatrix::new(m);
            c.add(t, d, n)?;
            Ok(c.metrics(average))
        })
        .collect()
}

/// Sample variance across individuals of every transition probability.
pub fn adhoc_tpm_variance(params: &[IndividualParams<f64>]) -> Result<Matrix<f64>> {
    if params.len() < 2 {
        return Err(Error::Config("need at least 2 individuals".into()));
    }
    let m = params[0].m_states();
    let n = params.len() as f64;
    Ok(Matrix::from_fn(m, m, |i, j| {
        let v: Vec<f64> = params.iter().map(|p| p.tpm().get(i, j)).collect();
        let mean = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }))
}
