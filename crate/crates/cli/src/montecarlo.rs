//! Replicated simulate → fit → decode → metrics runs with per-replication checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mhmm::decode::decode_dataset;
use mhmm::evaluate::{align_to_truth, decoding_metrics, map_estimate, mc_metrics, truth_scalars, DecodingMetrics, EstimateSummary, McReport};
use mhmm::persist::{config_hash, FORMAT_VERSION, VERSION};
use mhmm::rng::{derive_seed, domain};
use mhmm::sampler::{run_mcmc, Pooling};
use mhmm::simulate::generate_scenario;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MC_SCHEMA: &str = "mhmm-montecarlo";
pub const REPORT_FILE: &str = "mc_report.csv";
pub const DECODING_FILE: &str = "mc_decoding.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McManifest {
    pub schema: String,
    pub format_version: u32,
    pub software_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub reps: usize,
    pub poolings: Vec<Pooling>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub pooling: Pooling,
    pub error: Option<String>,
    pub estimate: Option<EstimateSummary>,
    pub decoding: Option<DecodingMetrics>,
    pub alpha_acceptance: Option<f64>,
    pub log_b_acceptance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub data_seed: u64,
    pub fit_seed: u64,
    /// Set when the data could not be generated.
    pub error: Option<String>,
    pub truth: Vec<(String, f64)>,
    pub fits: Vec<FitRecord>,
}

impl RepRecord {
    pub fn fit(&self, pooling: Pooling) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.pooling == pooling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingSummary {
    pub pooling: Pooling,
    pub n_ok: usize,
    pub n_failed: usize,
    pub report: Option<McReport>,
    /// Mean decoding metrics over successful replications.
    pub decoding: Option<DecodingMetrics>,
    /// Per replication, the kappa of the successful fits (`None` when failed).
    pub kappa: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub records: Vec<RepRecord>,
    pub summaries: Vec<PoolingSummary>,
    pub report_path: PathBuf,
    pub decoding_path: PathBuf,
    /// Replications loaded from existing checkpoints.
    pub resumed: usize,
}

impl McOutcome {
    pub fn summary(&self, pooling: Pooling) -> Option<&PoolingSummary> {
        self.summaries.iter().find(|s| s.pooling == pooling)
    }

    pub fn n_failed(&self) -> usize {
        self.summaries.iter().map(|s| s.n_failed).sum()
    }
}

fn label(p: Pooling) -> &'static str {
    match p {
        Pooling::Multilevel => "mhmm",
        Pooling::Complete => "hmm",
    }
}

fn checkpoint_path(dir: &Path, rep: usize) -> PathBuf {
    dir.join("reps").join(format!("rep_{:04}.json", rep + 1))
}

/// One replication; errors inside a fit are recorded rather than raised.
pub fn run_replication(cfg: &RunConfig, seed: u64, rep: usize) -> RepRecord {
    let data_seed = derive_seed(seed, domain::REPLICATION_DATA, rep as u64);
    let fit_seed = derive_seed(seed, domain::REPLICATION_FIT, rep as u64);
    let mut record = RepRecord { rep, data_seed, fit_seed, error: None, truth: Vec::new(), fits: Vec::new() };
    let data = match cfg.scenario.build(data_seed).and_then(|s| Ok(generate_scenario(&s)?)) {
        Ok(d) => d,
        Err(e) => {
            record.error = Some(format!("{e:#}"));
            return record;
        }
    };
    record.truth = truth_scalars(&data.true_group);
    let m = data.true_group.m_states();
    for &pooling in &cfg.montecarlo.poolings {
        let mcmc = mhmm::sampler::McmcConfig { seed: fit_seed, pooling, m_states: m, ..cfg.mcmc.clone() };
        let fit = || -> mhmm::Result<FitRecord> {
            let mut chain = run_mcmc(&data.obs, &mcmc)?;
            align_to_truth(&mut chain, &data.true_group.b_bar);
            let estimate = map_estimate(&chain, cfg.decode.estimator)?;
            let decoded = decode_dataset(&data.obs, &chain, cfg.decode.estimator, cfg.decode.local)?;
            let paths: Vec<Vec<usize>> = decoded.into_iter().map(|d| d.path).collect();
            let decoding = decoding_metrics(&data.true_paths, &paths, m, cfg.decode.f1)?;
            Ok(FitRecord {
                pooling,
                error: None,
                estimate: Some(estimate),
                decoding: Some(decoding),
                alpha_acceptance: chain.acceptance.alpha_rate(),
                log_b_acceptance: chain.acceptance.log_b_rate(),
            })
        };
        record.fits.push(fit().unwrap_or_else(|e| FitRecord {
            pooling,
            error: Some(e.to_string()),
            estimate: None,
            decoding: None,
            alpha_acceptance: None,
            log_b_acceptance: None,
        }));
    }
    record
}

fn mean_metrics(ms: &[DecodingMetrics]) -> Option<DecodingMetrics> {
    if ms.is_empty() {
        return None;
    }
    let n = ms.len() as f64;
    Some(DecodingMetrics {
        accuracy: ms.iter().map(|m| m.accuracy).sum::<f64>() / n,
        balanced_accuracy: ms.iter().map(|m| m.balanced_accuracy).sum::<f64>() / n,
        f1: ms.iter().map(|m| m.f1).sum::<f64>() / n,
        kappa: ms.iter().map(|m| m.kappa).sum::<f64>() / n,
    })
}

/// Aggregate replication records per pooling mode.
pub fn summarize(records: &[RepRecord], poolings: &[Pooling]) -> Result<Vec<PoolingSummary>> {
    let truth = records.iter().find(|r| r.error.is_none()).map(|r| r.truth.clone()).unwrap_or_default();
    poolings
        .iter()
        .map(|&pooling| {
            let ok: Vec<&FitRecord> = records
                .iter()
                .filter_map(|r| r.fit(pooling))
                .filter(|f| f.error.is_none())
                .collect();
            let estimates: Vec<EstimateSummary> = ok.iter().filter_map(|f| f.estimate.clone()).collect();
            let report = if estimates.len() >= 2 { Some(mc_metrics(&estimates, &truth)?) } else { None };
            let decoding = mean_metrics(&ok.iter().filter_map(|f| f.decoding).collect::<Vec<_>>());
            let kappa = records
                .iter()
                .map(|r| r.fit(pooling).and_then(|f| f.decoding).map(|d| d.kappa))
                .collect();
            Ok(PoolingSummary { pooling, n_ok: ok.len(), n_failed: records.len() - ok.len(), report, decoding, kappa })
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Parameter table with one column per metric and pooling mode.
pub fn write_report_csv(path: &Path, summaries: &[PoolingSummary]) -> Result<()> {
    const METRICS: [&str; 7] = ["mean_estimate", "bias", "rel_bias", "emp_se", "mse", "coverage", "bc_coverage"];
    let mut names: Vec<(String, f64)> = Vec::new();
    for s in summaries {
        for p in s.report.iter().flat_map(|r| &r.params) {
            if !names.iter().any(|(n, _)| *n == p.name) {
                names.push((p.name.clone(), p.truth));
            }
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["parameter".to_string(), "truth".to_string()];
    for m in METRICS {
        for s in summaries {
            header.push(format!("{m}_{}", label(s.pooling)));
        }
    }
    w.write_record(&header)?;
    for (name, truth) in &names {
        let mut rec = vec![name.clone(), truth.to_string()];
        for m in METRICS {
            for s in summaries {
                let p = s.report.as_ref().and_then(|r| r.get(name));
                rec.push(cell(p.map(|p| match m {
                    "mean_estimate" => p.mean_estimate,
                    "bias" => p.bias,
                    "rel_bias" => p.rel_bias,
                    "emp_se" => p.emp_se,
                    "mse" => p.mse,
                    "coverage" => p.coverage,
                    _ => p.bc_coverage,
                })));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean decoding metrics and replication counts, one column per pooling mode.
pub fn write_decoding_csv(path: &Path, summaries: &[PoolingSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["metric".to_string()];
    header.extend(summaries.iter().map(|s| label(s.pooling).to_string()));
    w.write_record(&header)?;
    let rows: [(&str, fn(&PoolingSummary) -> Option<f64>); 6] = [
        ("n_ok", |s| Some(s.n_ok as f64)),
        ("n_failed", |s| Some(s.n_failed as f64)),
        ("accuracy", |s| s.decoding.map(|d| d.accuracy)),
        ("balanced_accuracy", |s| s.decoding.map(|d| d.balanced_accuracy)),
        ("f1", |s| s.decoding.map(|d| d.f1)),
        ("kappa", |s| s.decoding.map(|d| d.kappa)),
    ];
    for (name, f) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(summaries.iter().map(|s| cell(f(s))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_checkpoint(path: &Path) -> Result<RepRecord> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).with_context(|| format!("reading checkpoint {}", path.display()))
}

/// Run (or resume) the study configured in `cfg`, writing into `out`.
pub fn run_montecarlo(cfg: &RunConfig, out: &Path) -> Result<McOutcome> {
    let seed = cfg.require_seed()?;
    let reps = cfg.montecarlo.reps;
    if reps == 0 {
        bail!("config error: montecarlo.reps must be positive");
    }
    if cfg.montecarlo.poolings.is_empty() {
        bail!("config error: montecarlo.poolings is empty");
    }
    cfg.mcmc.validate()?;
    let mut effective = cfg.clone();
    effective.workers = None;
    let hash = config_hash(&effective)?;
    let manifest_path = out.join("manifest.json");
    if manifest_path.exists() {
        let old: McManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        if old.config_hash != hash {
            bail!("{} holds a run with a different configuration; use a fresh output directory", out.display());
        }
    }
    fs::create_dir_all(out.join("reps"))?;
    let manifest = McManifest {
        schema: MC_SCHEMA.into(),
        format_version: FORMAT_VERSION,
        software_version: VERSION.into(),
        config_hash: hash,
        seed,
        reps,
        poolings: cfg.montecarlo.poolings.clone(),
        config: effective,
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    let mut resumed = 0;
    let mut slots: Vec<Option<RepRecord>> = Vec::with_capacity(reps);
    for r in 0..reps {
        let p = checkpoint_path(out, r);
        slots.push(match p.exists() {
            true => match read_checkpoint(&p) {
                Ok(rec) if rec.rep == r => {
                    resumed += 1;
                    Some(rec)
                }
                _ => None,
            },
            false => None,
        });
    }
    let missing: Vec<usize> = (0..reps).filter(|&r| slots[r].is_none()).collect();
    let fresh: Vec<Result<RepRecord>> = missing
        .par_iter()
        .map(|&r| {
            let rec = run_replication(cfg, seed, r);
            let tmp = checkpoint_path(out, r).with_extension("json.tmp");
            fs::write(&tmp, serde_json::to_string(&rec)?)?;
            fs::rename(&tmp, checkpoint_path(out, r))?;
            Ok(rec)
        })
        .collect();
    for (r, rec) in missing.into_iter().zip(fresh) {
        slots[r] = Some(rec?);
    }
    let records: Vec<RepRecord> = slots.into_iter().map(|s| s.expect("filled")).collect();
    finish(out, records, &cfg.montecarlo.poolings, resumed)
}

fn finish(out: &Path, records: Vec<RepRecord>, poolings: &[Pooling], resumed: usize) -> Result<McOutcome> {
    let summaries = summarize(&records, poolings)?;
    let report_path = out.join(REPORT_FILE);
    let decoding_path = out.join(DECODING_FILE);
    write_report_csv(&report_path, &summaries)?;
    write_decoding_csv(&decoding_path, &summaries)?;
    Ok(McOutcome { records, summaries, report_path, decoding_path, resumed })
}

/// Rebuild the report tables from whatever checkpoints exist in `dir`.
pub fn aggregate_dir(dir: &Path) -> Result<McOutcome> {
    let manifest: McManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.schema != MC_SCHEMA {
        bail!("{} is not a montecarlo directory", dir.display());
    }
    let mut records = Vec::new();
    for r in 0..manifest.reps {
        let p = checkpoint_path(dir, r);
        if p.exists() {
            records.push(read_checkpoint(&p)?);
        }
    }
    if records.is_empty() {
        bail!("no replication checkpoints in {}", dir.display());
    }
    let n = records.len();
    finish(dir, records, &manifest.poolings, n)
}
