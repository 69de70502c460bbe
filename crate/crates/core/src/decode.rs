//! Global (Viterbi) and local (filtered or smoothed) state decoding.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ObservationSet, SeriesCounts};
use crate::error::{Error, Result};
use crate::evaluate::{individual_estimates, Estimator};
use crate::hmm::{emission_log_table, forward_filter_logs, smoothed_probs, viterbi_logs, ViterbiPath};
use crate::matrix::Matrix;
use crate::model::{IndividualParams, InitialDistribution};
use crate::sampler::ChainStore;
use crate::scalar::Scalar;

/// Which marginals accompany the Viterbi path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalKind {
    #[default]
    Filtered,
    Smoothed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// 0-based Viterbi states.
    pub path: Vec<usize>,
    /// `T × M` state probabilities (filtered unless requested otherwise).
    pub forward_probs: Matrix<f64>,
    pub log_joint: f64,
}

impl DecodeResult {
    /// CSV with header `time,state,prob_state_1..prob_state_M`; time and state 1-based.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let m = self.forward_probs.cols();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string(), "state".to_string()];
        header.extend((1..=m).map(|i| format!("prob_state_{i}")));
        wtr.write_record(&header)?;
        for (t, &s) in self.path.iter().enumerate() {
            let mut rec = vec![(t + 1).to_string(), (s + 1).to_string()];
            rec.extend(self.forward_probs.row(t).iter().map(|p| p.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Most likely state sequence under individual-specific parameters.
pub fn viterbi<T: Scalar>(
    obs: &SeriesCounts,
    params: &IndividualParams<T>,
    pi: &InitialDistribution<T>,
) -> Result<ViterbiPath<T>> {
    viterbi_logs(&emission_log_table(obs, params.emission()), params.tpm(), pi)
}

/// Filtered state probabilities `P(S_t | O_{1:t})`: the forward table itself.
pub fn local_probabilities<T: Scalar>(
    obs: &SeriesCounts,
    params: &IndividualParams<T>,
    pi: &InitialDistribution<T>,
) -> Result<Matrix<T>> {
    Ok(forward_filter_logs(&emission_log_table(obs, params.emission()), params.tpm(), pi)?.probs)
}

/// Smoothed state probabilities `P(S_t | O_{1:T})`.
pub fn smoothed_probabilities<T: Scalar>(
    obs: &SeriesCounts,
    params: &IndividualParams<T>,
    pi: &InitialDistribution<T>,
) -> Result<Matrix<T>> {
    smoothed_probs(&emission_log_table(obs, params.emission()), params.tpm(), pi)
}

pub fn decode_individual(
    obs: &SeriesCounts,
    params: &IndividualParams<f64>,
    pi: &InitialDistribution<f64>,
    local: LocalKind,
) -> Result<DecodeResult> {
    let table = emission_log_table(obs, params.emission());
    let vit = viterbi_logs(&table, params.tpm(), pi)?;
    let forward_probs = match local {
        LocalKind::Filtered => forward_filter_logs(&table, params.tpm(), pi)?.probs,
        LocalKind::Smoothed => smoothed_probs(&table, params.tpm(), pi)?,
    };
    Ok(DecodeResult { path: vit.path, forward_probs, log_joint: vit.log_joint })
}

/// Decode every individual with point estimates taken from the chain.
pub fn decode_dataset(
    obs: &ObservationSet,
    chain: &ChainStore,
    estimator: Estimator,
    local: LocalKind,
) -> Result<Vec<DecodeResult>> {
    if obs.n_individuals() != chain.n_individuals() {
        return Err(Error::Config(format!(
            "chain holds {} individuals, data {}",
            chain.n_individuals(),
            obs.n_individuals()
        )));
    }
    if obs.k_series() != chain.spec.k_series || obs.lengths() != chain.spec.lengths {
        return Err(Error::Config("chain and data dimensions differ".into()));
    }
    let params = individual_estimates(chain, estimator)?;
    obs.individuals()
        .par_iter()
        .zip(params.par_iter())
        .map(|(o, p)| decode_individual(o, p, &chain.pi, local))
        .collect()
}
