#![allow(dead_code)]

use mhmm::data::SeriesCounts;
use mhmm::matrix::Matrix;
use mhmm::model::{emission_log_likelihood, EmissionParams, IndividualParams, InitialDistribution, TransitionLogits};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

pub fn random_params<R: Rng>(m: usize, k: usize, rng: &mut R) -> IndividualParams<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    let alpha = Matrix::from_fn(m, m - 1, |_, _| n.sample(rng));
    let log_b = Matrix::from_fn(k, m, |_, _| rng.gen_range(-1.0..3.0));
    IndividualParams::new(TransitionLogits::new(alpha).unwrap(), EmissionParams::new(log_b).unwrap()).unwrap()
}

pub fn random_pi<R: Rng>(m: usize, rng: &mut R) -> InitialDistribution<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    InitialDistribution::new(w.into_iter().map(|x| x / s).collect()).unwrap()
}

pub fn random_series<R: Rng>(k: usize, t_len: usize, rng: &mut R) -> SeriesCounts {
    let counts = (0..k * t_len).map(|_| Poisson::new(rng.gen_range(0.5..12.0)).unwrap().sample(rng) as u64).collect();
    SeriesCounts::new("x", k, counts).unwrap()
}

/// Every state sequence of length `t_len` over `m` states, lexicographic.
pub fn all_paths(m: usize, t_len: usize) -> Vec<Vec<usize>> {
    let total = m.pow(t_len as u32);
    (0..total)
        .map(|mut c| {
            let mut p = vec![0; t_len];
            for t in (0..t_len).rev() {
                p[t] = c % m;
                c /= m;
            }
            p
        })
        .collect()
}

/// `ln P(S = path, O)` evaluated directly.
pub fn log_joint(obs: &SeriesCounts, params: &IndividualParams<f64>, pi: &InitialDistribution<f64>, path: &[usize]) -> f64 {
    let em = |t: usize, s: usize| emission_log_likelihood(obs.at(t), &params.emission().state_means(s)).unwrap();
    let mut lp = pi.probs()[path[0]].ln() + em(0, path[0]);
    for t in 1..path.len() {
        lp += params.tpm().get(path[t - 1], path[t]).ln() + em(t, path[t]);
    }
    lp
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
