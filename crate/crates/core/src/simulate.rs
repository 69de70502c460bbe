//! Synthetic multilevel count data under user or preset heterogeneity scenarios.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ObservationSet, SeriesCounts};
use crate::error::{Error, Result};
use crate::matrix::{psd_sqrt, Matrix};
use crate::model::{
    EmissionParams, GroupParams, IndividualParams, InitialDistribution, ModelSpec, TransitionLogits,
    TransitionMatrix,
};
use crate::rng::{domain, substream};

/// Group-level TPM of the preset scenarios (cells shown as 0.00 were below 0.005).
pub const PRESET_TPM: [[f64; 4]; 4] = [
    [0.85, 0.13, 0.02, 0.00],
    [0.23, 0.63, 0.13, 0.01],
    [0.07, 0.24, 0.63, 0.06],
    [0.03, 0.04, 0.14, 0.79],
];

/// Group-level Poisson means of the preset scenarios.
pub const PRESET_MEANS: [f64; 4] = [1.0, 11.0, 38.0, 119.0];

/// Diagonal of `Ψ_i` under transition heterogeneity.
pub const PRESET_PSI: f64 = 0.9;

/// `τ` per state under emission heterogeneity.
pub const PRESET_TAU: [f64; 4] = [0.9, 0.7, 0.5, 0.2];

/// Mass assigned to preset cells reported as 0.00 before taking logits.
pub const PRESET_ZERO_FLOOR: f64 = 0.004;

/// The four preset heterogeneity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// No between-individual heterogeneity.
    Scenario1,
    /// Heterogeneous transitions only.
    Scenario2,
    /// Heterogeneous emissions only.
    Scenario3,
    /// Heterogeneity in both components.
    Scenario4,
}

impl Scenario {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "scenario1" => Ok(Self::Scenario1),
            "scenario2" => Ok(Self::Scenario2),
            "scenario3" => Ok(Self::Scenario3),
            "scenario4" => Ok(Self::Scenario4),
            other => Err(Error::Config(format!("unknown scenario preset `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Scenario1 => "scenario1",
            Self::Scenario2 => "scenario2",
            Self::Scenario3 => "scenario3",
            Self::Scenario4 => "scenario4",
        }
    }

    fn heterogeneous_transitions(self) -> bool {
        matches!(self, Self::Scenario2 | Self::Scenario4)
    }

    fn heterogeneous_emissions(self) -> bool {
        matches!(self, Self::Scenario3 | Self::Scenario4)
    }
}

/// Everything needed to generate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub spec: ModelSpec,
    pub group_tpm: TransitionMatrix<f64>,
    /// `K × M` group log-means `b̄`.
    pub group_log_means: Matrix<f64>,
    /// Per-state covariance `Ψ_i` of the transition intercepts; may be zero.
    pub psi: Vec<Matrix<f64>>,
    /// `K × M` between-individual variances of the log-means; may be zero.
    pub tau: Matrix<f64>,
    pub seed: u64,
    pub pi: InitialDistribution<f64>,
    /// Floor applied to zero TPM cells before the logit link.
    pub zero_floor: f64,
}

impl ScenarioConfig {
    /// Preset design with `n` individuals of length `t_len`, `M = 4`, `K = 1`.
    pub fn preset(scenario: Scenario, n: usize, t_len: usize, seed: u64) -> Result<Self> {
        let m = 4;
        let spec = ModelSpec::balanced(m, 1, n, t_len)?;
        let rows: Vec<Vec<f64>> = PRESET_TPM.iter().map(|r| r.to_vec()).collect();
        let psi_v = if scenario.heterogeneous_transitions() { PRESET_PSI } else { 0.0 };
        let tau = if scenario.heterogeneous_emissions() { PRESET_TAU.to_vec() } else { vec![0.0; m] };
        Ok(Self {
            spec,
            group_tpm: TransitionMatrix::from_rows(&rows)?,
            group_log_means: Matrix::from_vec(1, m, PRESET_MEANS.iter().map(|b| b.ln()).collect())?,
            psi: vec![Matrix::diag(&vec![psi_v; m - 1]); m],
            tau: Matrix::from_vec(1, m, tau)?,
            seed,
            pi: InitialDistribution::uniform(m),
            zero_floor: PRESET_ZERO_FLOOR,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let m = self.spec.m_states;
        let k = self.spec.k_series;
        if self.group_tpm.m_states() != m || self.pi.m_states() != m {
            return Err(Error::Config(format!("TPM and initial distribution must have {m} states")));
        }
        if self.group_log_means.rows() != k || self.group_log_means.cols() != m {
            return Err(Error::Config(format!("group log-means must be {k} x {m}")));
        }
        if self.tau.rows() != k || self.tau.cols() != m {
            return Err(Error::Config(format!("tau must be {k} x {m}")));
        }
        if self.psi.len() != m || self.psi.iter().any(|p| p.rows() != m - 1 || p.cols() != m - 1) {
            return Err(Error::Config(format!("psi must hold {m} matrices of size {0}x{0}", m - 1)));
        }
        if self.tau.as_slice().iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::Config("tau entries must be non-negative".into()));
        }
        if !(self.zero_floor > 0.0 && self.zero_floor < 1.0) {
            return Err(Error::Config("zero_floor must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Generating group parameters on the model's (logit, log) scales.
    pub fn group_params(&self) -> Result<GroupParams<f64>> {
        let g = GroupParams {
            alpha_bar: self.group_tpm.to_logits(self.zero_floor)?,
            psi: self.psi.clone(),
            b_bar: self.group_log_means.clone(),
            tau: self.tau.clone(),
        };
        g.validate_generating()?;
        Ok(g)
    }
}

/// A simulated dataset with its full ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub obs: ObservationSet,
    /// 0-based hidden states per individual.
    pub true_paths: Vec<Vec<usize>>,
    pub true_group: GroupParams<f64>,
    pub true_individual: Vec<IndividualParams<f64>>,
}

/// Draw one individual's parameters from the group-level distributions.
///
/// Zero-variance components reproduce the group value exactly.
pub fn draw_individual_params<R: Rng + ?Sized>(group: &GroupParams<f64>, rng: &mut R) -> Result<IndividualParams<f64>> {
    let m = group.m_states();
    let k = group.k_series();
    let mut alpha = group.alpha_bar.clone();
    for i in 0..m {
        let root = psd_sqrt(&group.psi[i].to_nalgebra())?;
        let z: Vec<f64> = (0..m - 1).map(|_| StandardNormal.sample(rng)).collect();
        for (a, row) in alpha.row_mut(i).iter_mut().zip(root.row_iter()) {
            let shift: f64 = row.iter().zip(&z).map(|(r, z)| r * z).sum();
            if shift != 0.0 {
                *a += shift;
            }
        }
    }
    let mut log_b = group.b_bar.clone();
    for kk in 0..k {
        for i in 0..m {
            let tau = group.tau[(kk, i)];
            let z: f64 = StandardNormal.sample(rng);
            if tau > 0.0 {
                log_b[(kk, i)] += tau.sqrt() * z;
            }
        }
    }
    IndividualParams::new(TransitionLogits::new(alpha.matrix().clone())?, EmissionParams::new(log_b)?)
}

fn draw_state<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// First-order Markov path of length `t_len` (0-based states).
pub fn sample_hidden_path<R: Rng + ?Sized>(
    tpm: &TransitionMatrix<f64>,
    pi: &InitialDistribution<f64>,
    t_len: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut path = Vec::with_capacity(t_len);
    if t_len == 0 {
        return path;
    }
    let mut s = draw_state(pi.probs(), rng);
    path.push(s);
    for _ in 1..t_len {
        s = draw_state(tpm.row(s), rng);
        path.push(s);
    }
    path
}

/// Independent Poisson counts given the path: returns `K × T`.
pub fn sample_counts<R: Rng + ?Sized>(path: &[usize], emission: &EmissionParams<f64>, rng: &mut R) -> Matrix<u64> {
    let k = emission.k_series();
    let means = emission.means();
    let mut out = Matrix::filled(k, path.len(), 0u64);
    for (t, &s) in path.iter().enumerate() {
        for kk in 0..k {
            let lambda = means[(kk, s)];
            let q: f64 = Poisson::new(lambda).expect("positive Poisson mean").sample(rng);
            out[(kk, t)] = q as u64;
        }
    }
    out
}

/// Simulate one individual end to end from its own stream.
pub fn simulate_individual<R: Rng + ?Sized>(
    id: String,
    params: &IndividualParams<f64>,
    pi: &InitialDistribution<f64>,
    t_len: usize,
    rng: &mut R,
) -> Result<(SeriesCounts, Vec<usize>)> {
    let path = sample_hidden_path(params.tpm(), pi, t_len, rng);
    let counts = sample_counts(&path, params.emission(), rng);
    Ok((SeriesCounts::from_series(id, &counts.to_rows())?, path))
}

/// Generate a dataset; deterministic in `cfg.seed` regardless of thread count.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Dataset> {
    cfg.validate()?;
    let group = cfg.group_params()?;
    let per_individual: Vec<Result<(IndividualParams<f64>, SeriesCounts, Vec<usize>)>> = cfg
        .spec
        .lengths
        .par_iter()
        .enumerate()
        .map(|(n, &t_len)| {
            let mut rng = substream(cfg.seed, domain::INDIVIDUAL, n as u64);
            let params = draw_individual_params(&group, &mut rng)?;
            let (obs, path) = simulate_individual(format!("{}", n + 1), &params, &cfg.pi, t_len, &mut rng)?;
            Ok((params, obs, path))
        })
        .collect();

    let mut true_individual = Vec::with_capacity(per_individual.len());
    let mut series = Vec::with_capacity(per_individual.len());
    let mut true_paths = Vec::with_capacity(per_individual.len());
    for item in per_individual {
        let (p, o, s) = item?;
        true_individual.push(p);
        series.push(o);
        true_paths.push(s);
    }
    Ok(Dataset { obs: ObservationSet::new(series)?, true_paths, true_group: group, true_individual })
}
