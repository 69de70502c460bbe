use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{logit_to_probs, EmissionParams, GroupParams, IndividualParams, TransitionLogits};
use crate::sampler::chain::{kept_mean_log_means, match_states, ChainStore};

/// Point estimator applied to post-burn-in draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Draw with the highest joint log-posterior.
    #[default]
    Map,
    /// Coordinate-wise posterior median.
    Median,
}

impl Estimator {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "map" => Ok(Self::Map),
            "median" => Ok(Self::Median),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Point estimates and central 95% credible intervals of the reported scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub names: Vec<String>,
    pub point: Vec<f64>,
    pub cri_low: Vec<f64>,
    pub cri_high: Vec<f64>,
}

impl EstimateSummary {
    pub fn get(&self, name: &str) -> Option<(f64, f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.point[i], self.cri_low[i], self.cri_high[i]))
    }
}

/// Reported scalars: `a_bar[i,j]` on the probability scale, `psi[i][j,j]`
/// (logit scale), `b_bar[k,i]` and `tau[k,i]` (log scale). 1-based indices.
pub fn reported_scalars(
    alpha_bar: &Matrix<f64>,
    psi: Option<&[Matrix<f64>]>,
    b_bar: &Matrix<f64>,
    tau: Option<&Matrix<f64>>,
) -> Vec<(String, f64)> {
    let m = alpha_bar.rows();
    let mut out = Vec::new();
    for i in 0..m {
        let probs = logit_to_probs(alpha_bar.row(i)).expect("finite logits");
        for (j, p) in probs.into_iter().enumerate() {
            out.push((format!("a_bar[{},{}]", i + 1, j + 1), p));
        }
    }
    if let Some(psi) = psi {
        for (i, p) in psi.iter().enumerate() {
            for j in 0..m - 1 {
                out.push((format!("psi[{}][{},{}]", i + 1, j + 2, j + 2), p[(j, j)]));
            }
        }
    }
    for kk in 0..b_bar.rows() {
        for i in 0..m {
            out.push((format!("b_bar[{},{}]", kk + 1, i + 1), b_bar[(kk, i)]));
        }
    }
    if let Some(tau) = tau {
        for kk in 0..tau.rows() {
            for i in 0..m {
                out.push((format!("tau[{},{}]", kk + 1, i + 1), tau[(kk, i)]));
            }
        }
    }
    out
}

/// Reported scalars of generating parameters.
pub fn truth_scalars(group: &GroupParams<f64>) -> Vec<(String, f64)> {
    reported_scalars(group.alpha_bar.matrix(), Some(&group.psi), &group.b_bar, Some(&group.tau))
}

fn chain_scalars(chain: &ChainStore, r: usize) -> Vec<(String, f64)> {
    let psi = chain.psi_at(r);
    let tau = chain.tau_at(r);
    reported_scalars(&chain.alpha_bar_at(r), psi.as_deref(), &chain.b_bar_at(r), tau.as_ref())
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Post-burn-in draw with the largest stored log-posterior; first wins ties.
pub fn map_iteration(chain: &ChainStore) -> Result<usize> {
    let kept = chain.kept();
    if kept.is_empty() {
        return Err(Error::Config("no post-burn-in draws".into()));
    }
    let mut best = kept.start;
    for r in kept {
        if chain.log_posterior[r] > chain.log_posterior[best] {
            best = r;
        }
    }
    Ok(best)
}

/// Summarize the kept draws: point estimate by `estimator`, 2.5%/97.5% quantiles.
pub fn map_estimate(chain: &ChainStore, estimator: Estimator) -> Result<EstimateSummary> {
    let kept = chain.kept();
    if kept.is_empty() {
        return Err(Error::Config("no post-burn-in draws".into()));
    }
    let draws: Vec<Vec<(String, f64)>> = kept.clone().map(|r| chain_scalars(chain, r)).collect();
    let names: Vec<String> = draws[0].iter().map(|(n, _)| n.clone()).collect();
    let map_r = map_iteration(chain)?;
    let mut out = EstimateSummary { names, point: Vec::new(), cri_low: Vec::new(), cri_high: Vec::new() };
    for p in 0..out.names.len() {
        let mut v: Vec<f64> = draws.iter().map(|d| d[p].1).collect();
        let point = match estimator {
            Estimator::Map => draws[map_r - kept.start][p].1,
            Estimator::Median => median(&v),
        };
        v.sort_by(f64::total_cmp);
        out.point.push(point);
        out.cri_low.push(quantile_sorted(&v, 0.025));
        out.cri_high.push(quantile_sorted(&v, 0.975));
    }
    Ok(out)
}

/// Per-individual point estimates; shared parameters under complete pooling.
pub fn individual_estimates(chain: &ChainStore, estimator: Estimator) -> Result<Vec<IndividualParams<f64>>> {
    let n = chain.n_individuals();
    match estimator {
        Estimator::Map => {
            let r = map_iteration(chain)?;
            (0..n).map(|i| chain.individual_at(r, i)).collect()
        }
        Estimator::Median => {
            let kept = chain.kept();
            if kept.is_empty() {
                return Err(Error::Config("no post-burn-in draws".into()));
            }
            (0..n)
                .map(|i| {
                    let draws: Vec<(Matrix<f64>, Matrix<f64>)> = kept.clone().map(|r| chain.individual_raw(r, i)).collect();
                    let (a0, b0) = &draws[0];
                    let a = Matrix::from_fn(a0.rows(), a0.cols(), |x, y| {
                        median(&draws.iter().map(|(a, _)| a[(x, y)]).collect::<Vec<_>>())
                    });
                    let b = Matrix::from_fn(b0.rows(), b0.cols(), |x, y| {
                        median(&draws.iter().map(|(_, b)| b[(x, y)]).collect::<Vec<_>>())
                    });
                    IndividualParams::new(TransitionLogits::new(a)?, EmissionParams::new(b)?)
                })
                .collect()
        }
    }
}

/// Relabel a whole chain so its mean kept log-means best match `truth` (`K × M`).
pub fn align_to_truth(chain: &mut ChainStore, truth: &Matrix<f64>) {
    let perm = match_states(truth, &kept_mean_log_means(chain));
    for r in 0..chain.len() {
        chain.permute_iteration(r, &perm);
    }
}
