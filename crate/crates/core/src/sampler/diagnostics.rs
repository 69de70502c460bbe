//! Convergence diagnostics: rank-normalized split-R̂ and effective sample size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sampler::chain::ChainStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostic {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let half = chains[0].len() / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[c.len() - half..].to_vec()])
        .collect()
}

/// Normal scores of the pooled ranks (ties get their average rank).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let all: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    let s = all.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| all[a].0.total_cmp(&all[b].0));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && all[order[j + 1]].0 == all[order[i]].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    for (idx, &(_, c, i)) in all.iter().enumerate() {
        out[c][i] = normal.inverse_cdf((ranks[idx] - 0.375) / (s as f64 + 0.25));
    }
    out
}

/// Plain R̂ of already-split chains.
fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| var(c)).collect::<Vec<_>>());
    let b = n * var(&means);
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

fn check(chains: &[&[f64]]) -> Result<()> {
    if chains.is_empty() {
        return Err(Error::Config("no chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config("chains have unequal length".into()));
    }
    if n < 4 {
        return Err(Error::Config("need at least 4 draws per chain".into()));
    }
    Ok(())
}

fn constant(chains: &[&[f64]]) -> bool {
    let first = chains[0][0];
    chains.iter().all(|c| c.iter().all(|&x| x == first))
}

/// Rank-normalized split-R̂: the larger of the bulk and folded versions.
///
/// Identical constant chains give exactly 1.
pub fn rank_rhat(chains: &[&[f64]]) -> Result<f64> {
    check(chains)?;
    if constant(chains) {
        return Ok(1.0);
    }
    let s = split(chains);
    let bulk = rhat_basic(&rank_normalize(&s));
    let mut pooled: Vec<f64> = s.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let med = median_sorted(&pooled);
    let folded: Vec<Vec<f64>> = s.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let tail = rhat_basic(&rank_normalize(&folded));
    Ok(bulk.max(tail))
}

fn median_sorted(x: &[f64]) -> f64 {
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

fn autocovariance(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let n = x.len();
    (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>() / n as f64
}

/// Effective sample size of split chains, Geyer initial monotone sequence.
fn ess_split(chains: &[Vec<f64>]) -> f64 {
    let c = chains.len() as f64;
    let n = chains[0].len();
    let w = mean(&chains.iter().map(|x| var(x)).collect::<Vec<_>>());
    let means: Vec<f64> = chains.iter().map(|x| mean(x)).collect();
    let b_over_n = var(&means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if !(var_plus > 0.0) {
        return c * n as f64;
    }
    let rho = |lag: usize| -> f64 {
        let acov = mean(&chains.iter().map(|x| autocovariance(x, lag)).collect::<Vec<_>>());
        1.0 - (w - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let total = c * n as f64;
    total / tau.max(1.0 / total.log10())
}

/// Bulk effective sample size (rank-normalized split chains).
pub fn bulk_ess(chains: &[&[f64]]) -> Result<f64> {
    check(chains)?;
    let s = split(chains);
    if constant(chains) {
        return Ok(s.len() as f64 * s[0].len() as f64);
    }
    Ok(ess_split(&rank_normalize(&s)))
}

/// R̂ and ESS for every group-level scalar, on the post-burn-in draws.
pub fn diagnostics(chains: &[ChainStore]) -> Result<Vec<ParamDiagnostic>> {
    let Some(first) = chains.first() else {
        return Err(Error::Config("no chains".into()));
    };
    if chains.iter().any(|c| c.len() != first.len() || c.burn_in != first.burn_in) {
        return Err(Error::Config("chains have unequal length".into()));
    }
    let names = first.group_scalar_names();
    let traces: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| c.group_scalar_traces()).collect();
    let kept = first.kept();
    names
        .into_iter()
        .enumerate()
        .map(|(p, name)| {
            let per_chain: Vec<&[f64]> = traces.iter().map(|t| &t[p][kept.clone()]).collect();
            Ok(ParamDiagnostic { name, rhat: rank_rhat(&per_chain)?, ess: bulk_ess(&per_chain)? })
        })
        .collect()
}
