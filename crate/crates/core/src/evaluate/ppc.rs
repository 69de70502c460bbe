use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::sampler::ChainStore;
use crate::simulate::{sample_counts, sample_hidden_path};

pub const DEFAULT_R_REP: usize = 500;

pub const STATISTICS: [&str; 4] = ["mean", "sd", "max", "prop_zero"];

/// Mean, SD, maximum and proportion of zeros of pooled counts.
pub fn summary_statistics(values: &[u64]) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let max = values.iter().copied().max().unwrap_or(0) as f64;
    let zeros = values.iter().filter(|&&v| v == 0).count() as f64 / n;
    [mean, sd, max, zeros]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPpc {
    /// 0-based series index.
    pub series: usize,
    pub observed: [f64; 4],
    /// One row per replicate.
    pub replicates: Vec<[f64; 4]>,
    /// `P(T_rep >= T_obs)` per statistic.
    pub tail_prob: [f64; 4],
    /// Observed per-individual means, ascending.
    pub observed_individual_means: Vec<f64>,
    /// Per replicate, per-individual means, ascending.
    pub replicate_individual_means: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub r_rep: usize,
    pub series: Vec<SeriesPpc>,
}

fn series_values(obs: &ObservationSet, k: usize) -> (Vec<u64>, Vec<f64>) {
    let mut pooled = Vec::new();
    let mut means = Vec::with_capacity(obs.n_individuals());
    for s in obs.individuals() {
        let v = s.series(k);
        means.push(v.iter().sum::<u64>() as f64 / v.len() as f64);
        pooled.extend(v);
    }
    means.sort_by(f64::total_cmp);
    (pooled, means)
}

/// Replicate datasets from post-burn-in draws and compare their summary
/// statistics with the observed ones.
pub fn posterior_predictive(chain: &ChainStore, obs: &ObservationSet, r_rep: usize, seed: u64) -> Result<PpcReport> {
    if r_rep < 1 {
        return Err(Error::Config("r_rep must be at least 1".into()));
    }
    if obs.n_individuals() != chain.n_individuals() || obs.k_series() != chain.spec.k_series {
        return Err(Error::Config("chain and data dimensions differ".into()));
    }
    let kept = chain.kept();
    if kept.is_empty() {
        return Err(Error::Config("no post-burn-in draws".into()));
    }
    let k = obs.k_series();
    let lengths = obs.lengths();

    // per replicate: one (pooled values, sorted individual means) pair per series
    let reps: Vec<Result<Vec<([f64; 4], Vec<f64>)>>> = (0..r_rep)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, domain::PPC, j as u64);
            let r = rng.gen_range(kept.clone());
            let mut pooled = vec![Vec::new(); k];
            let mut means = vec![Vec::with_capacity(lengths.len()); k];
            for (n, &t_len) in lengths.iter().enumerate() {
                let params = chain.individual_at(r, n)?;
                let path = sample_hidden_path(params.tpm(), &chain.pi, t_len, &mut rng);
                let counts = sample_counts(&path, params.emission(), &mut rng);
                for kk in 0..k {
                    let row = counts.row(kk);
                    means[kk].push(row.iter().sum::<u64>() as f64 / t_len as f64);
                    pooled[kk].extend_from_slice(row);
                }
            }
            Ok(pooled
                .iter()
                .zip(means)
                .map(|(p, mut m)| {
                    m.sort_by(f64::total_cmp);
                    (summary_statistics(p), m)
                })
                .collect())
        })
        .collect();
    let reps: Vec<Vec<([f64; 4], Vec<f64>)>> = reps.into_iter().collect::<Result<_>>()?;

    let series = (0..k)
        .map(|kk| {
            let (pooled, observed_individual_means) = series_values(obs, kk);
            let observed = summary_statistics(&pooled);
            let replicates: Vec<[f64; 4]> = reps.iter().map(|r| r[kk].0).collect();
            let mut tail_prob = [0.0; 4];
            for (s, tp) in tail_prob.iter_mut().enumerate() {
                *tp = replicates.iter().filter(|r| r[s] >= observed[s]).count() as f64 / r_rep as f64;
            }
            SeriesPpc {
                series: kk,
                observed,
                replicates,
                tail_prob,
                observed_individual_means,
                replicate_individual_means: reps.iter().map(|r| r[kk].1.clone()).collect(),
            }
        })
        .collect();
    Ok(PpcReport { r_rep, series })
}
