//! `simulate`, `fit`, `decode`, `ppc` and `report`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mhmm::data::ObservationSet;
use mhmm::decode::decode_dataset;
use mhmm::evaluate::{
    align_to_truth, decoding_metrics, decoding_metrics_per_individual, map_estimate, posterior_predictive,
    DecodingMetrics, EstimateSummary, STATISTICS,
};
use mhmm::persist::{self, config_hash, ChainManifest, FORMAT_VERSION, VERSION};
use mhmm::sampler::{diagnostics, run_chains, ChainStore, McmcConfig, ParamDiagnostic};
use mhmm::simulate::generate_scenario;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::montecarlo::{self, McOutcome};
use crate::svg::{histogram_svg, trace_svg, Histogram};

/// Manifest written next to every non-chain artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub schema: String,
    pub format_version: u32,
    pub software_version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
}

fn write_manifest<T: Serialize>(dir: &Path, schema: &str, config: &T, seed: Option<u64>, inputs: &[&Path]) -> Result<()> {
    let m = ArtifactManifest {
        schema: schema.into(),
        format_version: FORMAT_VERSION,
        software_version: VERSION.into(),
        config_hash: config_hash(config)?,
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

/// Observations from a CSV file or a dataset directory.
pub fn load_observations(path: &Path) -> Result<ObservationSet> {
    let file = if path.is_dir() { path.join(persist::OBSERVATIONS_FILE) } else { path.to_path_buf() };
    persist::read_observations(&file).with_context(|| format!("loading dataset {}", file.display()))
}

fn dataset_dir(path: &Path) -> Option<PathBuf> {
    if path.is_dir() {
        Some(path.to_path_buf())
    } else {
        path.parent().map(Path::to_path_buf)
    }
}

fn load_chains(dir: &Path) -> Result<(ChainManifest, Vec<ChainStore>)> {
    if !dir.join(persist::MANIFEST_FILE).exists() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no chain manifest in {}", dir.display()),
        )
        .into());
    }
    persist::read_chains(dir).with_context(|| format!("reading chains from {}", dir.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub n_individuals: usize,
    pub k_series: usize,
    pub lengths: Vec<usize>,
    /// `K × M` mean count while in each true state (NaN if never visited).
    pub state_means: Vec<Vec<f64>>,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateSummary> {
    let seed = cfg.require_seed()?;
    let scenario = cfg.scenario.build(seed)?;
    let data = generate_scenario(&scenario)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    persist::write_dataset(out, &data, Some(&scenario))?;
    write_manifest(out, "mhmm-dataset", &scenario, Some(seed), &[])?;

    let (k, m) = (data.obs.k_series(), scenario.spec.m_states);
    let mut sums = vec![vec![0.0; m]; k];
    let mut visits = vec![0usize; m];
    for (s, path) in data.obs.individuals().iter().zip(&data.true_paths) {
        for (t, &state) in path.iter().enumerate() {
            visits[state] += 1;
            for (kk, &q) in s.at(t).iter().enumerate() {
                sums[kk][state] += q as f64;
            }
        }
    }
    let state_means = sums
        .iter()
        .map(|row| row.iter().zip(&visits).map(|(s, &v)| if v > 0 { s / v as f64 } else { f64::NAN }).collect())
        .collect();
    Ok(SimulateSummary { n_individuals: data.obs.n_individuals(), k_series: k, lengths: data.obs.lengths(), state_means })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub manifest: ChainManifest,
    pub diagnostics: Vec<ParamDiagnostic>,
    pub max_rhat: f64,
    /// Per chain: (transition, emission) acceptance rates.
    pub acceptance: Vec<(Option<f64>, Option<f64>)>,
    pub converged: bool,
}

fn write_diagnostics(path: &Path, diags: &[ParamDiagnostic]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "rhat", "ess"])?;
    for d in diags {
        w.write_record([d.name.clone(), d.rhat.to_string(), d.ess.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn fit(cfg: &RunConfig, data: &Path, out: &Path) -> Result<FitOutcome> {
    let seed = cfg.require_seed()?;
    let obs = load_observations(data)?;
    let mcmc = McmcConfig { seed, ..cfg.mcmc.clone() };
    mcmc.validate()?;
    let chains = run_chains(&obs, &mcmc).context("sampler aborted")?;
    let manifest = persist::write_chains(out, &chains, &config_hash(&mcmc)?, seed)
        .with_context(|| format!("writing chains to {}", out.display()))?;
    let diags = diagnostics(&chains)?;
    write_diagnostics(&out.join("diagnostics.csv"), &diags)?;
    let mut w = csv::Writer::from_path(out.join("acceptance.csv"))?;
    w.write_record(["chain", "transition", "emission"])?;
    let acceptance: Vec<_> = chains.iter().map(|c| (c.acceptance.alpha_rate(), c.acceptance.log_b_rate())).collect();
    for (c, (a, b)) in acceptance.iter().enumerate() {
        let f = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([(c + 1).to_string(), f(a), f(b)])?;
    }
    w.flush()?;
    let max_rhat = diags.iter().map(|d| d.rhat).fold(1.0, f64::max);
    Ok(FitOutcome {
        manifest,
        diagnostics: diags,
        max_rhat,
        acceptance,
        converged: max_rhat <= cfg.fit.rhat_threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub files: Vec<PathBuf>,
    /// Pooled and per-individual metrics when true paths sit next to the data.
    pub metrics: Option<(DecodingMetrics, Vec<DecodingMetrics>)>,
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn decode(cfg: &RunConfig, data: &Path, chains_dir: &Path, out: &Path) -> Result<DecodeOutcome> {
    let obs = load_observations(data)?;
    let (_, mut chains) = load_chains(chains_dir)?;
    let chain = &mut chains[0];
    let truth_dir = dataset_dir(data).filter(|d| d.join(persist::TRUTH_FILE).exists());
    if let Some(dir) = &truth_dir {
        align_to_truth(chain, &persist::read_truth(dir)?.group.b_bar);
    }
    let results = decode_dataset(&obs, chain, cfg.decode.estimator, cfg.decode.local)?;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for (s, r) in obs.individuals().iter().zip(&results) {
        let p = out.join(format!("decode_{}.csv", file_stem(&s.id)));
        r.write_csv(fs::File::create(&p)?)?;
        files.push(p);
    }
    let m = chain.spec.m_states;
    let metrics = match truth_dir.map(|d| d.join(persist::PATHS_FILE)).filter(|p| p.exists()) {
        Some(p) => {
            let truth = persist::read_paths(&p)?;
            let decoded: Vec<Vec<usize>> = results.iter().map(|r| r.path.clone()).collect();
            let pooled = decoding_metrics(&truth, &decoded, m, cfg.decode.f1)?;
            let per = decoding_metrics_per_individual(&truth, &decoded, m, cfg.decode.f1)?;
            let mut w = csv::Writer::from_path(out.join("decoding_metrics.csv"))?;
            w.write_record(["individual", "accuracy", "balanced_accuracy", "f1", "kappa"])?;
            let rows = std::iter::once(("pooled".to_string(), &pooled))
                .chain(obs.individuals().iter().map(|s| s.id.clone()).zip(per.iter()));
            for (id, d) in rows {
                w.write_record([id, d.accuracy.to_string(), d.balanced_accuracy.to_string(), d.f1.to_string(), d.kappa.to_string()])?;
            }
            w.flush()?;
            Some((pooled, per))
        }
        None => None,
    };
    write_manifest(out, "mhmm-decode", &cfg.decode, None, &[data, chains_dir])?;
    Ok(DecodeOutcome { files, metrics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpcRow {
    pub series: usize,
    pub statistic: &'static str,
    pub observed: f64,
    pub tail_prob: f64,
}

pub fn ppc(cfg: &RunConfig, data: &Path, chains_dir: &Path, out: &Path) -> Result<Vec<PpcRow>> {
    let obs = load_observations(data)?;
    let (manifest, chains) = load_chains(chains_dir)?;
    let seed = cfg.seed.unwrap_or(manifest.seed);
    let report = posterior_predictive(&chains[0], &obs, cfg.ppc.r_rep, seed)?;
    fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    let mut summary = csv::Writer::from_path(out.join("ppc_summary.csv"))?;
    summary.write_record(["series", "statistic", "observed", "replicate_mean", "tail_prob"])?;
    for s in &report.series {
        for (i, stat) in STATISTICS.iter().enumerate() {
            let values: Vec<f64> = s.replicates.iter().map(|r| r[i]).collect();
            let hist = Histogram::new(&values, &[s.observed[i]], cfg.ppc.bins);
            let stem = format!("ppc_series{}_{stat}", s.series + 1);
            let mut w = csv::Writer::from_path(out.join(format!("{stem}.csv")))?;
            w.write_record(["bin_low", "bin_high", "count"])?;
            for (b, c) in hist.counts.iter().enumerate() {
                let (lo, hi) = hist.edges(b);
                w.write_record([lo.to_string(), hi.to_string(), c.to_string()])?;
            }
            w.flush()?;
            let title = format!("series {} {stat}: observed {:.4}, P(rep >= obs) = {:.3}", s.series + 1, s.observed[i], s.tail_prob[i]);
            fs::write(out.join(format!("{stem}.svg")), histogram_svg(&title, &hist, Some(s.observed[i])))?;
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            summary.write_record([
                (s.series + 1).to_string(),
                stat.to_string(),
                s.observed[i].to_string(),
                mean.to_string(),
                s.tail_prob[i].to_string(),
            ])?;
            rows.push(PpcRow { series: s.series, statistic: stat, observed: s.observed[i], tail_prob: s.tail_prob[i] });
        }
        let mut w = csv::Writer::from_path(out.join(format!("ppc_series{}_individual_means.csv", s.series + 1)))?;
        w.write_record(["rank", "observed", "replicate_q025", "replicate_median", "replicate_q975"])?;
        for (rank, obs_mean) in s.observed_individual_means.iter().enumerate() {
            let mut v: Vec<f64> = s.replicate_individual_means.iter().map(|r| r[rank]).collect();
            v.sort_by(f64::total_cmp);
            let q = |p| mhmm::evaluate::quantile_sorted(&v, p);
            w.write_record([(rank + 1).to_string(), obs_mean.to_string(), q(0.025).to_string(), q(0.5).to_string(), q(0.975).to_string()])?;
        }
        w.flush()?;
    }
    summary.flush()?;
    write_manifest(out, "mhmm-ppc", &cfg.ppc, Some(seed), &[data, chains_dir])?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportOutcome {
    Chains { estimate: EstimateSummary, diagnostics: Vec<ParamDiagnostic> },
    MonteCarlo(McOutcome),
}

/// Summarize a chain directory, or re-aggregate a montecarlo directory.
pub fn report(cfg: &RunConfig, dir: &Path) -> Result<ReportOutcome> {
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.join("manifest.json")).with_context(|| format!("no manifest in {}", dir.display()))?,
    )?;
    match manifest.get("schema").and_then(|s| s.as_str()) {
        Some(persist::CHAIN_SCHEMA) => {
            let (_, chains) = load_chains(dir)?;
            let estimate = map_estimate(&chains[0], cfg.decode.estimator)?;
            let mut w = csv::Writer::from_path(dir.join("estimates.csv"))?;
            w.write_record(["parameter", "estimate", "cri_low", "cri_high"])?;
            for i in 0..estimate.names.len() {
                w.write_record([
                    estimate.names[i].clone(),
                    estimate.point[i].to_string(),
                    estimate.cri_low[i].to_string(),
                    estimate.cri_high[i].to_string(),
                ])?;
            }
            w.flush()?;
            let diags = diagnostics(&chains)?;
            write_diagnostics(&dir.join("diagnostics.csv"), &diags)?;
            let traces: Vec<Vec<f64>> = chains.iter().map(|c| c.log_posterior.clone()).collect();
            fs::write(dir.join("trace_log_posterior.svg"), trace_svg("log-posterior", &traces))?;
            let names = chains[0].group_scalar_names();
            let per_chain: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| c.group_scalar_traces()).collect();
            for (p, name) in names.iter().enumerate() {
                let series: Vec<Vec<f64>> = per_chain.iter().map(|c| c[p].clone()).collect();
                let stem: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
                fs::write(dir.join(format!("trace_{}.svg", stem.trim_matches('_'))), trace_svg(name, &series))?;
            }
            Ok(ReportOutcome::Chains { estimate, diagnostics: diags })
        }
        Some(montecarlo::MC_SCHEMA) => Ok(ReportOutcome::MonteCarlo(montecarlo::aggregate_dir(dir)?)),
        other => bail!("unsupported manifest schema {other:?} in {}", dir.display()),
    }
}
