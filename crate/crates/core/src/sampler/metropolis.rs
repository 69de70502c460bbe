//! Random-walk Metropolis kernels for the non-conjugate individual parameters.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::matrix::mvn_log_pdf;
use crate::scalar::log_sum_exp;

const MIN_LOG_SCALE: f64 = -12.0;
const MAX_LOG_SCALE: f64 = 4.0;

/// Robbins-Monro scale adaptation toward a target acceptance rate.
///
/// The scale only moves while `adapting` is true; afterwards the kernel is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScale {
    pub log_scale: f64,
    pub target: f64,
    adapt_steps: u64,
    pub accepted: u64,
    pub proposed: u64,
}

impl AdaptiveScale {
    pub fn new(scale: f64, target: f64) -> Self {
        Self { log_scale: scale.ln(), target, adapt_steps: 0, accepted: 0, proposed: 0 }
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Record one accept/reject. Post-adaptation moves are counted in the acceptance ledger.
    pub fn record(&mut self, accepted: bool, adapting: bool) {
        if adapting {
            self.adapt_steps += 1;
            let gain = (self.adapt_steps as f64).powf(-0.6);
            let signal = if accepted { 1.0 } else { 0.0 } - self.target;
            self.log_scale = (self.log_scale + gain * signal).clamp(MIN_LOG_SCALE, MAX_LOG_SCALE);
        } else {
            self.proposed += 1;
            self.accepted += accepted as u64;
        }
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Log-likelihood of one row of transition counts under the logit link.
pub fn multinomial_row_log_lik(counts: &[f64], logits: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut full = Vec::with_capacity(logits.len() + 1);
    full.push(0.0);
    full.extend_from_slice(logits);
    let lse = log_sum_exp(&full);
    counts.iter().zip(&full).map(|(&n, &b)| if n > 0.0 { n * (b - lse) } else { 0.0 }).sum()
}

/// Normal prior on one row of intercepts, held as mean and covariance Cholesky factor.
pub struct RowPrior<'a> {
    pub mean: &'a [f64],
    pub chol: &'a DMatrix<f64>,
}

/// One random-walk update of row `i` of an individual's intercepts.
///
/// `counts` are the transitions out of state `i` in the current path and
/// `proposal_chol` is the Cholesky factor of the unscaled proposal covariance.
pub fn metropolis_update_alpha_row<R: Rng + ?Sized>(
    current: &[f64],
    counts: &[f64],
    prior: &RowPrior<'_>,
    proposal_chol: &DMatrix<f64>,
    tuner: &mut AdaptiveScale,
    adapting: bool,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    let d = current.len();
    let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
    let step = proposal_chol * z * tuner.scale();
    let proposal: Vec<f64> = current.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
    let target = |x: &[f64]| multinomial_row_log_lik(counts, x) + mvn_log_pdf(x, prior.mean, prior.chol);
    let log_ratio = target(&proposal) - target(current);
    let accept = log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio;
    tuner.record(accept, adapting);
    if accept {
        (proposal, true)
    } else {
        (current.to_vec(), false)
    }
}

/// Sufficient statistics of one `(individual, series, state)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCounts {
    pub q_sum: f64,
    pub t_occ: f64,
}

/// Log target of `x = ln b` up to a constant.
pub fn log_b_target(x: f64, stats: StateCounts, prior_mean: f64, prior_var: f64) -> f64 {
    stats.q_sum * x - stats.t_occ * x.exp() - 0.5 * (x - prior_mean).powi(2) / prior_var
}

/// One random-walk update of `ln b_nki`.
///
/// The step is `N(0, s²·v)` with `v = 1 / (q_sum + 1/prior_var)`, an
/// approximate posterior variance, and `s` the adapted scale.
pub fn metropolis_update_log_b<R: Rng + ?Sized>(
    current: f64,
    stats: StateCounts,
    prior_mean: f64,
    prior_var: f64,
    tuner: &mut AdaptiveScale,
    adapting: bool,
    rng: &mut R,
) -> (f64, bool) {
    let sd = tuner.scale() / (stats.q_sum + 1.0 / prior_var).sqrt();
    let z: f64 = StandardNormal.sample(rng);
    let proposal = current + sd * z;
    let log_ratio =
        log_b_target(proposal, stats, prior_mean, prior_var) - log_b_target(current, stats, prior_mean, prior_var);
    let accept = log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio;
    tuner.record(accept, adapting);
    if accept {
        (proposal, true)
    } else {
        (current, false)
    }
}
