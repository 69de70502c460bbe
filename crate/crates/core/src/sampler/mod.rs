//! Metropolis-within-Gibbs sampler for the multilevel Poisson HMM and its
//! complete-pooling baseline.
//!
//! One iteration: forward-filter backward-sample every individual's path,
//! Gibbs-update the group-level parameters, then Metropolis-update every
//! individual's transition intercepts and emission log-means. Under complete
//! pooling the last two steps are replaced by Metropolis updates of the single
//! shared parameter set against fixed priors, using the pooled path statistics.

pub mod chain;
pub mod diagnostics;
pub mod gibbs;
pub mod metropolis;
pub mod start;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chain::{relabel_chain, relabel_to, match_states, AcceptanceLedger, ChainStore, PathSample, Pooling, SamplerState};
pub use diagnostics::{diagnostics, ParamDiagnostic};

use crate::data::{ObservationSet, SeriesCounts};
use crate::error::{Error, Result};
use crate::hmm::{backward_sample, emission_log_table_with, forward_filter_logs, log_factorial_terms};
use crate::matrix::{cholesky, mvn_log_pdf, Matrix};
use crate::model::{EmissionParams, GroupParams, HyperPriors, InitialDistribution, ModelSpec, TransitionLogits};
use crate::rng::{derive_seed, domain, substream, StreamRng};
use gibbs::{gibbs_update_emission_group, inverse_gamma_log_pdf, normal_log_pdf, NiwPosterior};
use metropolis::{metropolis_update_alpha_row, metropolis_update_log_b, AdaptiveScale, RowPrior, StateCounts};

const PROPOSAL_RIDGE: f64 = 0.1;
const INITIAL_SCALE_UNI: f64 = 2.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub m_states: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub seed: u64,
    /// Weak data-centred defaults when absent.
    pub hyper: Option<HyperPriors>,
    /// k-means based defaults when absent.
    pub start: Option<GroupParams<f64>>,
    pub adapt_target_uni: f64,
    pub adapt_target_multi: f64,
    pub pooling: Pooling,
    /// Store sampled paths every `path_thin` iterations; 0 stores none.
    pub path_thin: usize,
    /// Fixed initial distribution; uniform when absent.
    pub pi: Option<InitialDistribution<f64>>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            m_states: 4,
            n_iter: 4000,
            burn_in: 2000,
            n_chains: 1,
            seed: 0,
            hyper: None,
            start: None,
            adapt_target_uni: 0.44,
            adapt_target_multi: 0.23,
            pooling: Pooling::Multilevel,
            path_thin: 10,
            pi: None,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_states < 2 || self.m_states > u8::MAX as usize {
            return Err(Error::Config(format!("m_states must lie in 2..=255, got {}", self.m_states)));
        }
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(Error::Config(format!("need 0 <= burn_in < n_iter, got {} and {}", self.burn_in, self.n_iter)));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be positive".into()));
        }
        for (name, v) in [("adapt_target_uni", self.adapt_target_uni), ("adapt_target_multi", self.adapt_target_multi)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if let Some(h) = &self.hyper {
            h.validate()?;
            if h.m_states() != self.m_states {
                return Err(Error::Config("hyper-priors disagree with m_states".into()));
            }
        }
        if let Some(s) = &self.start {
            if s.m_states() != self.m_states {
                return Err(Error::Config("starting values disagree with m_states".into()));
            }
        }
        if let Some(pi) = &self.pi {
            if pi.m_states() != self.m_states {
                return Err(Error::Config("initial distribution disagrees with m_states".into()));
            }
        }
        Ok(())
    }
}

/// Per-individual working state: own random stream, parameters, tuners and path statistics.
struct Unit {
    rng: StreamRng,
    log_fact: Vec<f64>,
    alpha: Matrix<f64>,
    log_b: Matrix<f64>,
    alpha_tuners: Vec<AdaptiveScale>,
    b_tuners: Vec<AdaptiveScale>,
    path: Vec<usize>,
    /// `M × M` transition counts of the current path.
    trans: Vec<f64>,
    /// `K × M` count sums per state.
    q_sum: Vec<f64>,
    /// Occupancy per state.
    t_occ: Vec<f64>,
    log_lik: f64,
}

impl Unit {
    fn ffbs(
        &mut self,
        n: usize,
        obs: &SeriesCounts,
        alpha: &Matrix<f64>,
        log_b: &Matrix<f64>,
        pi: &InitialDistribution<f64>,
        sample: bool,
    ) -> Result<()> {
        let tpm = TransitionLogits::new(alpha.clone())?.to_tpm()?;
        let emission = EmissionParams::new(log_b.clone())?;
        let table = emission_log_table_with(obs, &emission, &self.log_fact);
        let fwd = forward_filter_logs(&table, &tpm, pi).map_err(|e| match e {
            Error::FilteringDegeneracy { t } => Error::ChainDegeneracy { individual: n, t },
            other => other,
        })?;
        self.log_lik = fwd.log_likelihood;
        if !sample {
            return Ok(());
        }
        self.path = backward_sample(&fwd, &tpm, &mut self.rng);
        let m = alpha.rows();
        let k = obs.k_series();
        self.trans.iter_mut().for_each(|v| *v = 0.0);
        self.q_sum.iter_mut().for_each(|v| *v = 0.0);
        self.t_occ.iter_mut().for_each(|v| *v = 0.0);
        for (t, &s) in self.path.iter().enumerate() {
            self.t_occ[s] += 1.0;
            for kk in 0..k {
                self.q_sum[kk * m + s] += obs.get(kk, t) as f64;
            }
            if t > 0 {
                self.trans[self.path[t - 1] * m + s] += 1.0;
            }
        }
        Ok(())
    }
}

/// Group-level quantities reused by every individual's Metropolis step.
struct StatePriors {
    prior_chol: Vec<DMatrix<f64>>,
    proposal_chol: Vec<DMatrix<f64>>,
}

impl StatePriors {
    fn from_psi(psi: &[Matrix<f64>]) -> Result<Self> {
        let mut prior_chol = Vec::with_capacity(psi.len());
        let mut proposal_chol = Vec::with_capacity(psi.len());
        for p in psi {
            let p = p.to_nalgebra();
            let d = p.nrows();
            prior_chol.push(cholesky(&p)?);
            // ridge scaled by the mean prior variance, capped at PROPOSAL_RIDGE
            let ridge = PROPOSAL_RIDGE * (p.trace() / d as f64).min(1.0);
            proposal_chol.push(cholesky(&(&p + DMatrix::identity(d, d) * ridge))?);
        }
        Ok(Self { prior_chol, proposal_chol })
    }
}

/// Proposal Cholesky factor for a pooled intercept row: inverse of the
/// multinomial information at smoothed path frequencies plus the prior precision.
fn pooled_proposal_chol(counts: &[f64], prior_precision: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = counts.len();
    let total: f64 = counts.iter().sum();
    let p: Vec<f64> = counts.iter().map(|c| (c + 0.5) / (total + 0.5 * m as f64)).collect();
    let d = m - 1;
    let info = DMatrix::from_fn(d, d, |a, b| total * (if a == b { p[a + 1] } else { 0.0 } - p[a + 1] * p[b + 1]));
    let cov = (info + prior_precision)
        .try_inverse()
        .ok_or_else(|| Error::Covariance("singular pooled proposal precision".into()))?;
    cholesky(&((&cov + cov.transpose()) * 0.5))
}

struct Sampler<'a> {
    obs: &'a ObservationSet,
    cfg: &'a McmcConfig,
    hyper: HyperPriors,
    pi: InitialDistribution<f64>,
    m: usize,
    k: usize,
}

impl<'a> Sampler<'a> {
    fn new(obs: &'a ObservationSet, cfg: &'a McmcConfig) -> Result<Self> {
        cfg.validate()?;
        if obs.n_individuals() == 0 {
            return Err(Error::Config("empty observation set".into()));
        }
        let m = cfg.m_states;
        let k = obs.k_series();
        let hyper = cfg.hyper.clone().unwrap_or_else(|| HyperPriors::weak(m, &obs.series_means()));
        if hyper.k_series() != k {
            return Err(Error::Config(format!("hyper-priors have {} series, data {k}", hyper.k_series())));
        }
        if let Some(s) = &cfg.start {
            if s.k_series() != k {
                return Err(Error::Config(format!("starting values have {} series, data {k}", s.k_series())));
            }
        }
        let pi = cfg.pi.clone().unwrap_or_else(|| InitialDistribution::uniform(m));
        Ok(Self { obs, cfg, hyper, pi, m, k })
    }

    fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.m, self.k, self.obs.lengths())
    }

    fn log_prior(&self, s: &SamplerState, priors: Option<&StatePriors>) -> f64 {
        let h = &self.hyper;
        let (m, k) = (self.m, self.k);
        let mut lp = 0.0;
        match self.cfg.pooling {
            Pooling::Multilevel => {
                let priors = priors.expect("multilevel state priors");
                let empty: &[&[f64]] = &[];
                for i in 0..m {
                    let niw = NiwPosterior::from_rows(empty, h.m0.row(i), h.k0, &h.psi0, h.df0);
                    lp += niw.log_pdf(s.alpha_bar.row(i), &s.psi[i].to_nalgebra());
                    for a in &s.alpha {
                        lp += mvn_log_pdf(a.row(i), s.alpha_bar.row(i), &priors.prior_chol[i]);
                    }
                }
                for kk in 0..k {
                    for i in 0..m {
                        let (bb, tau) = (s.b_bar[(kk, i)], s.tau[(kk, i)]);
                        lp += normal_log_pdf(bb, h.l0[(kk, i)], h.tau0[(kk, i)]);
                        lp += inverse_gamma_log_pdf(tau, h.c[(kk, i)], h.d[(kk, i)]);
                        for b in &s.log_b {
                            lp += normal_log_pdf(b[(kk, i)], bb, tau);
                        }
                    }
                }
            }
            Pooling::Complete => {
                let chol = cholesky(&h.psi0.to_nalgebra()).expect("validated psi0");
                for i in 0..m {
                    lp += mvn_log_pdf(s.alpha_bar.row(i), h.m0.row(i), &chol);
                }
                for kk in 0..k {
                    for i in 0..m {
                        lp += normal_log_pdf(s.b_bar[(kk, i)], h.l0[(kk, i)], h.tau0[(kk, i)]);
                    }
                }
            }
        }
        lp
    }

    fn check_finite(&self, s: &SamplerState, iteration: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::NonFinite { iteration, what: what.into() });
        if !s.alpha_bar.is_finite() {
            return bad("alpha_bar");
        }
        if !s.b_bar.is_finite() {
            return bad("b_bar");
        }
        if self.cfg.pooling == Pooling::Multilevel {
            if !s.tau.is_finite() {
                return bad("tau");
            }
            if s.psi.iter().any(|p| !p.is_finite()) {
                return bad("psi");
            }
            if let Some(n) = s.alpha.iter().position(|a| !a.is_finite()) {
                return bad(&format!("alpha of individual {}", n + 1));
            }
            if let Some(n) = s.log_b.iter().position(|b| !b.is_finite()) {
                return bad(&format!("log b of individual {}", n + 1));
            }
        }
        Ok(())
    }

    fn ffbs_all(&self, units: &mut [Unit], s: &SamplerState, sample: bool) -> Result<f64> {
        let pooled = self.cfg.pooling == Pooling::Complete;
        let results: Vec<Result<()>> = units
            .par_iter_mut()
            .enumerate()
            .map(|(n, u)| {
                let (alpha, log_b) = if pooled { (&s.alpha_bar, &s.b_bar) } else { (&s.alpha[n], &s.log_b[n]) };
                let obs = self.obs.individual(n);
                u.ffbs(n, obs, alpha, log_b, &self.pi, sample)
            })
            .collect();
        results.into_iter().collect::<Result<Vec<()>>>()?;
        Ok(units.iter().map(|u| u.log_lik).sum())
    }

    fn update_group<R: rand::Rng>(&self, s: &mut SamplerState, rng: &mut R) -> Result<StatePriors> {
        let h = &self.hyper;
        for i in 0..self.m {
            let rows: Vec<&[f64]> = s.alpha.iter().map(|a| a.row(i)).collect();
            let niw = NiwPosterior::from_rows(&rows, h.m0.row(i), h.k0, &h.psi0, h.df0);
            let (mean, psi) = niw.sample(rng)?;
            s.alpha_bar.row_mut(i).copy_from_slice(&mean);
            s.psi[i] = Matrix::from_nalgebra(&psi);
        }
        for kk in 0..self.k {
            for i in 0..self.m {
                let vals: Vec<f64> = s.log_b.iter().map(|b| b[(kk, i)]).collect();
                let (bb, tau) = gibbs_update_emission_group(
                    &vals,
                    s.b_bar[(kk, i)],
                    h.l0[(kk, i)],
                    h.tau0[(kk, i)],
                    h.c[(kk, i)],
                    h.d[(kk, i)],
                    rng,
                );
                s.b_bar[(kk, i)] = bb;
                s.tau[(kk, i)] = tau;
            }
        }
        StatePriors::from_psi(&s.psi)
    }

    fn update_individuals(&self, units: &mut [Unit], s: &SamplerState, priors: &StatePriors, adapting: bool) {
        let (m, k) = (self.m, self.k);
        units.par_iter_mut().for_each(|u| {
            for i in 0..m {
                let prior = RowPrior { mean: s.alpha_bar.row(i), chol: &priors.prior_chol[i] };
                let (row, _) = metropolis_update_alpha_row(
                    u.alpha.row(i),
                    &u.trans[i * m..(i + 1) * m],
                    &prior,
                    &priors.proposal_chol[i],
                    &mut u.alpha_tuners[i],
                    adapting,
                    &mut u.rng,
                );
                u.alpha.row_mut(i).copy_from_slice(&row);
            }
            for kk in 0..k {
                for i in 0..m {
                    let stats = StateCounts { q_sum: u.q_sum[kk * m + i], t_occ: u.t_occ[i] };
                    let (x, _) = metropolis_update_log_b(
                        u.log_b[(kk, i)],
                        stats,
                        s.b_bar[(kk, i)],
                        s.tau[(kk, i)],
                        &mut u.b_tuners[kk * m + i],
                        adapting,
                        &mut u.rng,
                    );
                    u.log_b[(kk, i)] = x;
                }
            }
        });
    }

    fn update_pooled<R: rand::Rng>(
        &self,
        units: &[Unit],
        s: &mut SamplerState,
        alpha_tuners: &mut [AdaptiveScale],
        b_tuners: &mut [AdaptiveScale],
        adapting: bool,
        rng: &mut R,
    ) -> Result<()> {
        let (m, k) = (self.m, self.k);
        let h = &self.hyper;
        let psi0 = h.psi0.to_nalgebra();
        let prior_chol = cholesky(&psi0)?;
        let prior_precision = psi0.try_inverse().ok_or_else(|| Error::Covariance("singular psi0".into()))?;
        let sum = |f: &dyn Fn(&Unit) -> &[f64], len: usize| -> Vec<f64> {
            let mut out = vec![0.0; len];
            for u in units {
                for (o, v) in out.iter_mut().zip(f(u)) {
                    *o += v;
                }
            }
            out
        };
        let trans = sum(&|u| &u.trans, m * m);
        let q_sum = sum(&|u| &u.q_sum, k * m);
        let t_occ = sum(&|u| &u.t_occ, m);
        for i in 0..m {
            let counts = &trans[i * m..(i + 1) * m];
            let proposal = pooled_proposal_chol(counts, &prior_precision)?;
            let prior = RowPrior { mean: h.m0.row(i), chol: &prior_chol };
            let current = s.alpha_bar.row(i).to_vec();
            let (row, _) =
                metropolis_update_alpha_row(&current, counts, &prior, &proposal, &mut alpha_tuners[i], adapting, rng);
            s.alpha_bar.row_mut(i).copy_from_slice(&row);
        }
        for kk in 0..k {
            for i in 0..m {
                let stats = StateCounts { q_sum: q_sum[kk * m + i], t_occ: t_occ[i] };
                let (x, _) = metropolis_update_log_b(
                    s.b_bar[(kk, i)],
                    stats,
                    h.l0[(kk, i)],
                    h.tau0[(kk, i)],
                    &mut b_tuners[kk * m + i],
                    adapting,
                    rng,
                );
                s.b_bar[(kk, i)] = x;
            }
        }
        Ok(())
    }

    fn initial_state(&self, chain: usize, chain_seed: u64) -> GroupParams<f64> {
        let base = self.cfg.start.clone().unwrap_or_else(|| start::default_start(self.obs, self.m));
        if chain == 0 {
            base
        } else {
            start::randomize_start(&base, &mut substream(chain_seed, domain::START, 0))
        }
    }

    fn run_chain(&self, chain: usize) -> Result<ChainStore> {
        let (m, k) = (self.m, self.k);
        let d = m - 1;
        let n_ind = self.obs.n_individuals();
        let multilevel = self.cfg.pooling == Pooling::Multilevel;
        let chain_seed = derive_seed(self.cfg.seed, domain::CHAIN, chain as u64);
        let mut group_rng = substream(chain_seed, domain::CHAIN_GROUP, 0);
        let start = self.initial_state(chain, chain_seed);
        let log_b_starts: Vec<Matrix<f64>> = match (&self.cfg.start, multilevel) {
            (None, true) => {
                let base = start::default_start(self.obs, self.m).b_bar;
                start::individual_log_b_starts(self.obs, &base)
                    .into_iter()
                    .map(|b| Matrix::from_fn(k, m, |kk, i| b[(kk, i)] + start.b_bar[(kk, i)] - base[(kk, i)]))
                    .collect()
            }
            _ => vec![start.b_bar.clone(); n_ind],
        };

        let multi_scale = 2.38 / (d as f64).sqrt();
        let mut units: Vec<Unit> = (0..n_ind)
            .map(|n| {
                let obs = self.obs.individual(n);
                Unit {
                    rng: substream(chain_seed, domain::CHAIN_INDIVIDUAL, n as u64),
                    log_fact: log_factorial_terms(obs),
                    alpha: start.alpha_bar.matrix().clone(),
                    log_b: log_b_starts[n].clone(),
                    alpha_tuners: vec![AdaptiveScale::new(multi_scale, self.cfg.adapt_target_multi); m],
                    b_tuners: vec![AdaptiveScale::new(INITIAL_SCALE_UNI, self.cfg.adapt_target_uni); k * m],
                    path: Vec::new(),
                    trans: vec![0.0; m * m],
                    q_sum: vec![0.0; k * m],
                    t_occ: vec![0.0; m],
                    log_lik: f64::NAN,
                }
            })
            .collect();
        let mut pooled_alpha_tuners = vec![AdaptiveScale::new(multi_scale, self.cfg.adapt_target_multi); m];
        let mut pooled_b_tuners = vec![AdaptiveScale::new(INITIAL_SCALE_UNI, self.cfg.adapt_target_uni); k * m];

        let mut state = SamplerState {
            alpha_bar: start.alpha_bar.matrix().clone(),
            psi: if multilevel { start.psi.clone() } else { Vec::new() },
            b_bar: start.b_bar.clone(),
            tau: start.tau.clone(),
            alpha: if multilevel { units.iter().map(|u| u.alpha.clone()).collect() } else { Vec::new() },
            log_b: if multilevel { units.iter().map(|u| u.log_b.clone()).collect() } else { Vec::new() },
        };

        let mut store = ChainStore::new(self.spec()?, self.cfg.pooling, self.cfg.burn_in, self.pi.clone());
        let mut pending_prior = f64::NAN;
        for r in 0..self.cfg.n_iter {
            let adapting = r < self.cfg.burn_in;
            let ll = self.ffbs_all(&mut units, &state, true)?;
            if r > 0 {
                store.log_likelihood[r - 1] = ll;
                store.log_posterior[r - 1] = ll + pending_prior;
            }
            if self.cfg.path_thin > 0 && r % self.cfg.path_thin == 0 {
                store.paths.push(PathSample {
                    iteration: r,
                    states: units.iter().map(|u| u.path.iter().map(|&s| s as u8).collect()).collect(),
                });
            }

            let priors = if multilevel {
                let priors = self.update_group(&mut state, &mut group_rng)?;
                self.update_individuals(&mut units, &state, &priors, adapting);
                for (n, u) in units.iter().enumerate() {
                    state.alpha[n].as_mut_slice().copy_from_slice(u.alpha.as_slice());
                    state.log_b[n].as_mut_slice().copy_from_slice(u.log_b.as_slice());
                }
                Some(priors)
            } else {
                self.update_pooled(
                    &units,
                    &mut state,
                    &mut pooled_alpha_tuners,
                    &mut pooled_b_tuners,
                    adapting,
                    &mut group_rng,
                )?;
                None
            };
            self.check_finite(&state, r)?;
            store.record(&state);
            pending_prior = self.log_prior(&state, priors.as_ref());
        }
        let ll = self.ffbs_all(&mut units, &state, false)?;
        let last = self.cfg.n_iter - 1;
        store.log_likelihood[last] = ll;
        store.log_posterior[last] = ll + pending_prior;

        store.acceptance = if multilevel {
            AcceptanceLedger {
                alpha: units.iter().flat_map(|u| u.alpha_tuners.iter().cloned()).collect(),
                log_b: units.iter().flat_map(|u| u.b_tuners.iter().cloned()).collect(),
            }
        } else {
            AcceptanceLedger { alpha: pooled_alpha_tuners, log_b: pooled_b_tuners }
        };
        relabel_chain(&mut store);
        Ok(store)
    }
}

/// Run the first chain of `cfg`.
pub fn run_mcmc(obs: &ObservationSet, cfg: &McmcConfig) -> Result<ChainStore> {
    Sampler::new(obs, cfg)?.run_chain(0)
}

/// Run all `cfg.n_chains` chains in parallel; chain 0 uses the plain starting
/// values, the others jittered copies. Bitwise reproducible for a fixed seed.
pub fn run_chains(obs: &ObservationSet, cfg: &McmcConfig) -> Result<Vec<ChainStore>> {
    let sampler = Sampler::new(obs, cfg)?;
    let chains: Vec<Result<ChainStore>> = (0..cfg.n_chains).into_par_iter().map(|c| sampler.run_chain(c)).collect();
    chains.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_scenario, Scenario, ScenarioConfig};

    fn small_config(pooling: Pooling) -> McmcConfig {
        McmcConfig { n_iter: 60, burn_in: 30, seed: 5, pooling, path_thin: 5, ..McmcConfig::default() }
    }

    #[test]
    fn chain_is_reproducible() {
        let data = generate_scenario(&ScenarioConfig::preset(Scenario::Scenario4, 4, 40, 3).unwrap()).unwrap();
        let cfg = small_config(Pooling::Multilevel);
        let a = run_mcmc(&data.obs, &cfg).unwrap();
        let b = run_mcmc(&data.obs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);
        assert!(a.log_posterior.iter().all(|v| v.is_finite()));
        for r in 0..a.len() {
            a.group_at(r).unwrap().validate().unwrap();
        }
        assert_eq!(a.paths.len(), 12);
    }

    #[test]
    fn complete_pooling_runs() {
        let data = generate_scenario(&ScenarioConfig::preset(Scenario::Scenario1, 3, 40, 3).unwrap()).unwrap();
        let c = run_mcmc(&data.obs, &small_config(Pooling::Complete)).unwrap();
        assert_eq!(c.len(), 60);
        assert!(c.psi_at(0).is_none());
        assert!(c.log_likelihood.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn all_zero_counts_complete() {
        let obs = ObservationSet::new(vec![SeriesCounts::new("a", 1, vec![0, 0]).unwrap()]).unwrap();
        let cfg = McmcConfig { m_states: 2, n_iter: 50, burn_in: 10, ..McmcConfig::default() };
        let c = run_mcmc(&obs, &cfg).unwrap();
        assert!(c.b_bar.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_config() {
        let obs = ObservationSet::new(vec![SeriesCounts::new("a", 1, vec![0, 0]).unwrap()]).unwrap();
        let cfg = McmcConfig { n_iter: 10, burn_in: 10, ..McmcConfig::default() };
        assert!(matches!(run_mcmc(&obs, &cfg), Err(Error::Config(_))));
    }
}
