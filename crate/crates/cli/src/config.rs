//! Run configuration read from a TOML file, with command-line overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mhmm::decode::LocalKind;
use mhmm::evaluate::{Estimator, F1Average, DEFAULT_R_REP};
use mhmm::sampler::{McmcConfig, Pooling};
use mhmm::simulate::{Scenario, ScenarioConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// `scenario1` .. `scenario4`; ignored when `custom` is given.
    pub preset: String,
    pub n_individuals: usize,
    pub t_len: usize,
    /// Full generating configuration; its seed is replaced by the run seed.
    pub custom: Option<ScenarioConfig>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { preset: "scenario1".into(), n_individuals: 20, t_len: 200, custom: None }
    }
}

impl ScenarioSection {
    pub fn build(&self, seed: u64) -> Result<ScenarioConfig> {
        let cfg = match &self.custom {
            Some(c) => ScenarioConfig { seed, ..c.clone() },
            None => ScenarioConfig::preset(Scenario::parse(&self.preset)?, self.n_individuals, self.t_len, seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Exit with a failure status when any group-level R̂ exceeds this.
    pub rhat_threshold: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { rhat_threshold: 1.1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSection {
    pub estimator: Estimator,
    pub local: LocalKind,
    pub f1: F1Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpcSection {
    pub r_rep: usize,
    pub bins: usize,
}

impl Default for PpcSection {
    fn default() -> Self {
        Self { r_rep: DEFAULT_R_REP, bins: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub reps: usize,
    pub poolings: Vec<Pooling>,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self { reps: 25, poolings: vec![Pooling::Multilevel, Pooling::Complete] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub scenario: ScenarioSection,
    pub mcmc: McmcConfig,
    pub fit: FitSection,
    pub decode: DecodeSection,
    pub ppc: PpcSection,
    pub montecarlo: MonteCarloSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => bail!("config error: a seed is required (config `seed` or --seed)"),
        }
    }
}

/// Run `f` on a pool of `workers` threads (all cores when absent).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            bail!("config error: workers must be positive");
        }
        builder = builder.num_threads(w);
    }
    Ok(builder.build()?.install(f))
}
