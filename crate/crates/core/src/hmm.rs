//! Filtering, sampling and decoding kernels for a single count sequence.
//!
//! States are 0-based here; files and reports use 1-based labels.

use rand::Rng;

use crate::data::SeriesCounts;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{EmissionParams, IndividualParams, InitialDistribution, TransitionMatrix};
use crate::scalar::{ln_factorial, Scalar};

/// `Σ_k ln Γ(q_kt + 1)` for every occasion; constant across states and iterations.
pub fn log_factorial_terms<T: Scalar>(obs: &SeriesCounts) -> Vec<T> {
    (0..obs.t_len())
        .map(|t| obs.at(t).iter().map(|&q| ln_factorial::<T>(q)).sum())
        .collect()
}

/// `T × M` table of emission log-likelihoods, reusing precomputed log-factorials.
pub fn emission_log_table_with<T: Scalar>(
    obs: &SeriesCounts,
    emission: &EmissionParams<T>,
    log_fact: &[T],
) -> Matrix<T> {
    let m = emission.m_states();
    let k = emission.k_series();
    let log_b = emission.log_means();
    let b = emission.means();
    // Σ_k b_ki per state
    let rate: Vec<T> = (0..m).map(|i| (0..k).map(|kk| b[(kk, i)]).sum()).collect();
    Matrix::from_fn(obs.t_len(), m, |t, i| {
        let counts = obs.at(t);
        let mut acc = -rate[i] - log_fact[t];
        for (kk, &q) in counts.iter().enumerate() {
            if q > 0 {
                acc = acc + T::lit(q as f64) * log_b[(kk, i)];
            }
        }
        acc
    })
}

pub fn emission_log_table<T: Scalar>(obs: &SeriesCounts, emission: &EmissionParams<T>) -> Matrix<T> {
    emission_log_table_with(obs, emission, &log_factorial_terms(obs))
}

/// Scaled forward probabilities: row `t` is `P(S_t = · | O_{1:t})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTable<T> {
    pub probs: Matrix<T>,
    /// `ln c_t`, where `c_t` is the normalizer at step `t` (emission shift included).
    pub log_scales: Vec<T>,
    pub log_likelihood: T,
}

impl<T: Scalar> ForwardTable<T> {
    pub fn t_len(&self) -> usize {
        self.probs.rows()
    }

    pub fn m_states(&self) -> usize {
        self.probs.cols()
    }
}

fn check_dims<T: Scalar>(log_emission: &Matrix<T>, tpm: &TransitionMatrix<T>, pi: &InitialDistribution<T>) -> Result<()> {
    let m = tpm.m_states();
    if log_emission.cols() != m || pi.m_states() != m {
        return Err(Error::InvalidParameter(format!(
            "dimension mismatch: emission has {} states, TPM {m}, initial distribution {}",
            log_emission.cols(),
            pi.m_states()
        )));
    }
    if log_emission.rows() == 0 {
        return Err(Error::InvalidParameter("empty sequence".into()));
    }
    Ok(())
}

/// Forward recursion on a precomputed emission log-table.
pub fn forward_filter_logs<T: Scalar>(
    log_emission: &Matrix<T>,
    tpm: &TransitionMatrix<T>,
    pi: &InitialDistribution<T>,
) -> Result<ForwardTable<T>> {
    check_dims(log_emission, tpm, pi)?;
    let t_len = log_emission.rows();
    let m = tpm.m_states();
    let mut probs = Matrix::filled(t_len, m, T::zero());
    let mut log_scales = Vec::with_capacity(t_len);
    let mut predicted = pi.probs().to_vec();

    for t in 0..t_len {
        let le = log_emission.row(t);
        // shift by the largest emission among states with predicted mass
        let shift = (0..m)
            .filter(|&i| predicted[i] > T::zero())
            .map(|i| le[i])
            .fold(T::neg_infinity(), T::max);
        if !shift.is_finite() {
            return Err(Error::FilteringDegeneracy { t });
        }
        let row = probs.row_mut(t);
        let mut total = T::zero();
        for i in 0..m {
            let v = if predicted[i] > T::zero() { predicted[i] * (le[i] - shift).exp() } else { T::zero() };
            row[i] = v;
            total = total + v;
        }
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::FilteringDegeneracy { t });
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
        log_scales.push(total.ln() + shift);

        if t + 1 < t_len {
            for (j, p) in predicted.iter_mut().enumerate() {
                *p = (0..m).map(|i| row[i] * tpm.get(i, j)).sum();
            }
        }
    }
    let log_likelihood = log_scales.iter().copied().sum();
    Ok(ForwardTable { probs, log_scales, log_likelihood })
}

/// Filtered state probabilities and log-likelihood of one individual's counts.
pub fn forward_filter<T: Scalar>(
    obs: &SeriesCounts,
    params: &IndividualParams<T>,
    pi: &InitialDistribution<T>,
) -> Result<ForwardTable<T>> {
    if obs.k_series() != params.k_series() {
        return Err(Error::InvalidParameter(format!(
            "data has {} series, parameters {}",
            obs.k_series(),
            params.k_series()
        )));
    }
    forward_filter_logs(&emission_log_table(obs, params.emission()), params.tpm(), pi)
}

fn draw_index<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total: T = weights.iter().copied().sum();
    let u = T::lit(rng.gen::<f64>()) * total;
    let mut acc = T::zero();
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > T::zero() {
            last = i;
            acc = acc + w;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Draw a state path from `P(S_{1:T} | O_{1:T})` given the forward table.
pub fn backward_sample<T: Scalar, R: Rng + ?Sized>(
    fwd: &ForwardTable<T>,
    tpm: &TransitionMatrix<T>,
    rng: &mut R,
) -> Vec<usize> {
    let t_len = fwd.t_len();
    let m = fwd.m_states();
    debug_assert_eq!(m, tpm.m_states());
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = draw_index(fwd.probs.row(t_len - 1), rng);
    let mut w = vec![T::zero(); m];
    for t in (0..t_len - 1).rev() {
        let next = path[t + 1];
        let f = fwd.probs.row(t);
        for i in 0..m {
            w[i] = f[i] * tpm.get(i, next);
        }
        path[t] = draw_index(&w, rng);
    }
    path
}

/// Most likely path and its joint log-probability `ln P(S*, O)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiPath<T> {
    pub path: Vec<usize>,
    pub log_joint: T,
}

/// Log-space Viterbi on a precomputed emission table; ties go to the lowest state index.
pub fn viterbi_logs<T: Scalar>(
    log_emission: &Matrix<T>,
    tpm: &TransitionMatrix<T>,
    pi: &InitialDistribution<T>,
) -> Result<ViterbiPath<T>> {
    check_dims(log_emission, tpm, pi)?;
    let t_len = log_emission.rows();
    let m = tpm.m_states();
    let log_a = tpm.matrix().map(|p| p.ln());
    let mut delta: Vec<T> = (0..m).map(|i| pi.probs()[i].ln() + log_emission[(0, i)]).collect();
    let mut back = vec![0usize; t_len * m];
    let mut next = vec![T::zero(); m];
    for t in 1..t_len {
        for j in 0..m {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            for i in 0..m {
                let v = delta[i] + log_a[(i, j)];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + log_emission[(t, j)];
            back[t * m + j] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut best = T::neg_infinity();
    let mut last = 0;
    for (i, &v) in delta.iter().enumerate() {
        if v > best {
            best = v;
            last = i;
        }
    }
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = last;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * m + path[t]];
    }
    Ok(ViterbiPath { path, log_joint: best })
}

/// Smoothed marginals `P(S_t = · | O_{1:T})` by the scaled backward pass.
pub fn smoothed_probs<T: Scalar>(
    log_emission: &Matrix<T>,
    tpm: &TransitionMatrix<T>,
    pi: &InitialDistribution<T>,
) -> Result<Matrix<T>> {
    let fwd = forward_filter_logs(log_emission, tpm, pi)?;
    let t_len = fwd.t_len();
    let m = fwd.m_states();
    let mut out = fwd.probs.clone();
    let mut beta = vec![T::one(); m];
    let mut nb = vec![T::zero(); m];
    for t in (0..t_len - 1).rev() {
        let le = log_emission.row(t + 1);
        let shift = le.iter().copied().fold(T::neg_infinity(), T::max);
        for i in 0..m {
            nb[i] = (0..m).map(|j| tpm.get(i, j) * (le[j] - shift).exp() * beta[j]).sum();
        }
        let s: T = nb.iter().copied().sum();
        for i in 0..m {
            beta[i] = nb[i] / s;
        }
        let row = out.row_mut(t);
        let mut z = T::zero();
        for i in 0..m {
            row[i] = row[i] * beta[i];
            z = z + row[i];
        }
        for v in row.iter_mut() {
            *v = *v / z;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EmissionParams, TransitionLogits};
    use crate::rng::substream;

    fn params(tpm_rows: &[Vec<f64>], means: &[Vec<f64>]) -> IndividualParams<f64> {
        let tpm = TransitionMatrix::from_rows(tpm_rows).unwrap();
        let logits = tpm.to_logits(1e-12).unwrap();
        let em = EmissionParams::from_means(Matrix::from_rows(means).unwrap()).unwrap();
        IndividualParams::new(logits, em).unwrap()
    }

    #[test]
    fn single_step_is_normalized_prior_times_emission() {
        let p = params(&[vec![0.9, 0.1], vec![0.2, 0.8]], &[vec![1.0, 10.0]]);
        let obs = SeriesCounts::new("x", 1, vec![4]).unwrap();
        let pi = InitialDistribution::new(vec![0.3, 0.7]).unwrap();
        let f = forward_filter(&obs, &p, &pi).unwrap();
        let e0 = 0.3 * crate::model::poisson_log_pmf(4, 1.0f64).unwrap().exp();
        let e1 = 0.7 * crate::model::poisson_log_pmf(4, 10.0f64).unwrap().exp();
        assert!((f.probs[(0, 0)] - e0 / (e0 + e1)).abs() < 1e-14);
        assert!((f.log_likelihood - (e0 + e1).ln()).abs() < 1e-12);
    }

    #[test]
    fn uninformative_emissions_give_markov_prediction() {
        let p = params(&[vec![0.6, 0.4], vec![0.1, 0.9]], &[vec![3.0, 3.0]]);
        let obs = SeriesCounts::new("x", 1, vec![0, 5, 2, 9]).unwrap();
        let pi = InitialDistribution::new(vec![1.0, 0.0]).unwrap();
        let f = forward_filter(&obs, &p, &pi).unwrap();
        let mut d = [1.0, 0.0];
        for t in 0..4 {
            assert!((f.probs[(t, 0)] - d[0]).abs() < 1e-14);
            d = [d[0] * 0.6 + d[1] * 0.1, d[0] * 0.4 + d[1] * 0.9];
        }
    }

    fn emission(means: &[f64]) -> EmissionParams<f64> {
        EmissionParams::from_means(Matrix::from_vec(1, means.len(), means.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn identity_tpm_gives_constant_paths() {
        // identity rows have no logit representation; the kernels take the TPM directly
        let tpm = TransitionMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let obs = SeriesCounts::new("x", 1, vec![40, 52, 0, 1, 60]).unwrap();
        let le = emission_log_table(&obs, &emission(&[1.0, 5.0, 50.0]));
        let v = viterbi_logs(&le, &tpm, &InitialDistribution::point(3, 1)).unwrap();
        assert_eq!(v.path, vec![1; 5]);
        let f = forward_filter_logs(&le, &tpm, &InitialDistribution::point(3, 0)).unwrap();
        let mut rng = substream(1, 0, 0);
        assert_eq!(backward_sample(&f, &tpm, &mut rng), vec![0; 5]);
    }

    #[test]
    fn alternating_chain_samples_alternate() {
        let tpm = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let obs = SeriesCounts::new("x", 1, vec![1; 6]).unwrap();
        let le = emission_log_table(&obs, &emission(&[2.0, 2.0]));
        let f = forward_filter_logs(&le, &tpm, &InitialDistribution::point(2, 0)).unwrap();
        let mut rng = substream(3, 0, 0);
        assert_eq!(backward_sample(&f, &tpm, &mut rng), vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn viterbi_ties_go_to_lowest_index() {
        let p = params(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[vec![2.0, 2.0]]);
        let obs = SeriesCounts::new("x", 1, vec![1, 3, 2]).unwrap();
        let pi = InitialDistribution::uniform(2);
        let v = viterbi_logs(&emission_log_table(&obs, p.emission()), p.tpm(), &pi).unwrap();
        assert_eq!(v.path, vec![0, 0, 0]);
    }

    #[test]
    fn smoothing_last_row_equals_filtering() {
        let p = params(&[vec![0.7, 0.3], vec![0.2, 0.8]], &[vec![1.0, 8.0], vec![4.0, 0.5]]);
        let obs = SeriesCounts::from_series("x", &[vec![0, 9, 7, 1], vec![5, 0, 1, 3]]).unwrap();
        let pi = InitialDistribution::uniform(2);
        let le = emission_log_table(&obs, p.emission());
        let s = smoothed_probs(&le, p.tpm(), &pi).unwrap();
        let f = forward_filter_logs(&le, p.tpm(), &pi).unwrap();
        assert!((s[(3, 0)] - f.probs[(3, 0)]).abs() < 1e-14);
        for t in 0..4 {
            assert!((s.row(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_logits_keep_rows_uniform() {
        let a = TransitionLogits::<f64>::zeros(3).to_tpm().unwrap();
        assert!((a.get(2, 1) - 1.0 / 3.0).abs() < 1e-15);
    }
}
