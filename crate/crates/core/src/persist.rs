//! On-disk formats: datasets with truth sidecars, and chain directories.
//!
//! A chain directory holds `manifest.json` plus one subdirectory per chain with
//! one CSV per parameter block (one row per iteration), the likelihood trace,
//! thinned paths and the acceptance ledger.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{EmissionParams, GroupParams, IndividualParams, InitialDistribution, ModelSpec, TransitionLogits};
use crate::sampler::{ChainStore, PathSample, Pooling};
use crate::simulate::{Dataset, ScenarioConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TRUTH_SCHEMA: &str = "mhmm-truth";
pub const CHAIN_SCHEMA: &str = "mhmm-chains";
pub const FORMAT_VERSION: u32 = 1;

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const PATHS_FILE: &str = "paths.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    use std::io::Write;
    w.write_all(b"\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualTruth {
    pub alpha: Matrix<f64>,
    pub log_b: Matrix<f64>,
}

/// Ground-truth sidecar of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub pi: InitialDistribution<f64>,
    pub group: GroupParams<f64>,
    pub individuals: Vec<IndividualTruth>,
    pub scenario: Option<ScenarioConfig>,
}

impl TruthFile {
    pub fn individual_params(&self) -> Result<Vec<IndividualParams<f64>>> {
        self.individuals
            .iter()
            .map(|t| IndividualParams::new(TransitionLogits::new(t.alpha.clone())?, EmissionParams::new(t.log_b.clone())?))
            .collect()
    }
}

/// Write `observations.csv`, `truth.json` and `paths.csv` into `dir`.
pub fn write_dataset(dir: &Path, data: &Dataset, scenario: Option<&ScenarioConfig>) -> Result<()> {
    fs::create_dir_all(dir)?;
    data.obs.write_csv(BufWriter::new(File::create(dir.join(OBSERVATIONS_FILE))?))?;
    let m = data.true_group.m_states();
    let truth = TruthFile {
        schema: TRUTH_SCHEMA.into(),
        version: FORMAT_VERSION,
        spec: ModelSpec::new(m, data.obs.k_series(), data.obs.lengths())?,
        pi: scenario.map_or_else(|| InitialDistribution::uniform(m), |s| s.pi.clone()),
        group: data.true_group.clone(),
        individuals: data
            .true_individual
            .iter()
            .map(|p| IndividualTruth { alpha: p.alpha().matrix().clone(), log_b: p.emission().log_means().clone() })
            .collect(),
        scenario: scenario.cloned(),
    };
    write_json(&dir.join(TRUTH_FILE), &truth)?;
    write_paths(&dir.join(PATHS_FILE), &data.true_paths)
}

/// `individual,time,state` with 1-based time and state.
pub fn write_paths(path: &Path, paths: &[Vec<usize>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["individual", "time", "state"])?;
    for (n, p) in paths.iter().enumerate() {
        for (t, s) in p.iter().enumerate() {
            w.write_record([(n + 1).to_string(), (t + 1).to_string(), (s + 1).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths(path: &Path) -> Result<Vec<Vec<usize>>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |j: usize| -> Result<usize> {
            rec.get(j)
                .and_then(|v| v.trim().parse::<usize>().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::Data { row, msg: format!("bad field {}", j + 1) })
        };
        let (n, t, s) = (field(0)? - 1, field(1)? - 1, field(2)? - 1);
        if n > out.len() || (n == out.len() && t != 0) || (n < out.len() && t != out[n].len()) {
            return Err(Error::Data { row, msg: "paths must be sorted by individual and time".into() });
        }
        if n == out.len() {
            out.push(Vec::new());
        }
        out[n].push(s);
    }
    Ok(out)
}

pub fn read_truth(dir: &Path) -> Result<TruthFile> {
    let t: TruthFile = read_json(&dir.join(TRUTH_FILE))?;
    if t.schema != TRUTH_SCHEMA {
        return Err(Error::Config(format!("unexpected truth schema `{}`", t.schema)));
    }
    t.group.validate_generating()?;
    Ok(t)
}

pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let f = File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    ObservationSet::read_csv(BufReader::new(f), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub schema: String,
    pub format_version: u32,
    pub software_version: String,
    pub spec: ModelSpec,
    pub pooling: Pooling,
    pub config_hash: String,
    pub seed: u64,
    pub chain_count: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub pi: InitialDistribution<f64>,
    pub blocks: Vec<String>,
}

fn write_block(path: &Path, names: &[String], data: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(names)?;
    let width = names.len();
    if width > 0 {
        for row in data.chunks(width) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_block(path: &Path, width: usize) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    if r.headers()?.len() != width {
        return Err(Error::Config(format!("{}: expected {width} columns", path.display())));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        for v in rec?.iter() {
            out.push(v.parse::<f64>().map_err(|e| Error::Data { row: i + 2, msg: format!("{}: {e}", path.display()) })?);
        }
    }
    Ok(out)
}

fn matrix_names(prefix: &str, rows: usize, cols: usize, col_offset: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("{prefix}[{},{}]", i + 1, j + 1 + col_offset)))
        .collect()
}

struct BlockLayout {
    name: &'static str,
    columns: Vec<String>,
}

fn layouts(spec: &ModelSpec, pooling: Pooling) -> Vec<BlockLayout> {
    let (m, k, n) = (spec.m_states, spec.k_series, spec.n_individuals);
    let mut out = vec![BlockLayout { name: "alpha_bar", columns: matrix_names("alpha_bar", m, m - 1, 1) }];
    out.push(BlockLayout { name: "b_bar", columns: matrix_names("b_bar", k, m, 0) });
    if pooling == Pooling::Multilevel {
        let psi = (0..m).flat_map(|i| matrix_names(&format!("psi[{}]", i + 1), m - 1, m - 1, 1)).collect();
        out.push(BlockLayout { name: "psi", columns: psi });
        out.push(BlockLayout { name: "tau", columns: matrix_names("tau", k, m, 0) });
        let alpha = (0..n).flat_map(|i| matrix_names(&format!("n{}.alpha", i + 1), m, m - 1, 1)).collect();
        out.push(BlockLayout { name: "alpha", columns: alpha });
        let log_b = (0..n).flat_map(|i| matrix_names(&format!("n{}.log_b", i + 1), k, m, 0)).collect();
        out.push(BlockLayout { name: "log_b", columns: log_b });
    }
    out
}

fn block_data<'a>(chain: &'a ChainStore, name: &str) -> &'a [f64] {
    match name {
        "alpha_bar" => &chain.alpha_bar,
        "b_bar" => &chain.b_bar,
        "psi" => &chain.psi,
        "tau" => &chain.tau,
        "alpha" => &chain.alpha_ind,
        "log_b" => &chain.log_b_ind,
        _ => unreachable!("unknown block"),
    }
}

fn block_data_mut<'a>(chain: &'a mut ChainStore, name: &str) -> &'a mut Vec<f64> {
    match name {
        "alpha_bar" => &mut chain.alpha_bar,
        "b_bar" => &mut chain.b_bar,
        "psi" => &mut chain.psi,
        "tau" => &mut chain.tau,
        "alpha" => &mut chain.alpha_ind,
        "log_b" => &mut chain.log_b_ind,
        _ => unreachable!("unknown block"),
    }
}

/// Write `chains` (from one configuration) into `dir`.
pub fn write_chains(dir: &Path, chains: &[ChainStore], config_hash: &str, seed: u64) -> Result<ChainManifest> {
    let first = chains.first().ok_or_else(|| Error::Config("no chains to write".into()))?;
    fs::create_dir_all(dir)?;
    let layout = layouts(&first.spec, first.pooling);
    let mut blocks: Vec<String> = layout.iter().map(|b| b.name.to_string()).collect();
    blocks.extend(["trace".into(), "paths".into(), "acceptance".into()]);
    for (c, chain) in chains.iter().enumerate() {
        let cdir = dir.join(format!("chain_{}", c + 1));
        fs::create_dir_all(&cdir)?;
        for b in &layout {
            write_block(&cdir.join(format!("{}.csv", b.name)), &b.columns, block_data(chain, b.name))?;
        }
        let trace: Vec<f64> = chain.log_likelihood.iter().zip(&chain.log_posterior).flat_map(|(a, b)| [*a, *b]).collect();
        write_block(&cdir.join("trace.csv"), &["log_likelihood".into(), "log_posterior".into()], &trace)?;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(cdir.join("paths.csv"))?));
        w.write_record(["iteration", "individual", "time", "state"])?;
        for ps in &chain.paths {
            for (n, p) in ps.states.iter().enumerate() {
                for (t, s) in p.iter().enumerate() {
                    w.write_record([
                        (ps.iteration + 1).to_string(),
                        (n + 1).to_string(),
                        (t + 1).to_string(),
                        (*s as usize + 1).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        write_json(&cdir.join("acceptance.json"), &chain.acceptance)?;
    }
    let manifest = ChainManifest {
        schema: CHAIN_SCHEMA.into(),
        format_version: FORMAT_VERSION,
        software_version: VERSION.into(),
        spec: first.spec.clone(),
        pooling: first.pooling,
        config_hash: config_hash.into(),
        seed,
        chain_count: chains.len(),
        n_iter: first.len(),
        burn_in: first.burn_in,
        pi: first.pi.clone(),
        blocks,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<ChainManifest> {
    let m: ChainManifest = read_json(&dir.join(MANIFEST_FILE))?;
    if m.schema != CHAIN_SCHEMA {
        return Err(Error::Config(format!("unexpected chain schema `{}`", m.schema)));
    }
    m.spec.validate()?;
    Ok(m)
}

/// Read every chain of a chain directory.
pub fn read_chains(dir: &Path) -> Result<(ChainManifest, Vec<ChainStore>)> {
    let manifest = read_manifest(dir)?;
    let layout = layouts(&manifest.spec, manifest.pooling);
    let mut chains = Vec::with_capacity(manifest.chain_count);
    for c in 0..manifest.chain_count {
        let cdir = dir.join(format!("chain_{}", c + 1));
        let mut chain = ChainStore::new(manifest.spec.clone(), manifest.pooling, manifest.burn_in, manifest.pi.clone());
        for b in &layout {
            let data = read_block(&cdir.join(format!("{}.csv", b.name)), b.columns.len())?;
            if data.len() != manifest.n_iter * b.columns.len() {
                return Err(Error::Config(format!("block {} of chain {} has the wrong length", b.name, c + 1)));
            }
            *block_data_mut(&mut chain, b.name) = data;
        }
        let trace = read_block(&cdir.join("trace.csv"), 2)?;
        chain.log_likelihood = trace.iter().step_by(2).copied().collect();
        chain.log_posterior = trace.iter().skip(1).step_by(2).copied().collect();
        if chain.len() != manifest.n_iter {
            return Err(Error::Config(format!("trace of chain {} has the wrong length", c + 1)));
        }
        let mut r = csv::Reader::from_reader(BufReader::new(File::open(cdir.join("paths.csv"))?));
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let f = |j: usize| -> Result<usize> {
                rec.get(j)
                    .and_then(|v| v.parse::<usize>().ok())
                    .filter(|&v| v >= 1)
                    .map(|v| v - 1)
                    .ok_or_else(|| Error::Data { row: i + 2, msg: "bad path record".into() })
            };
            let (it, n, _t, s) = (f(0)?, f(1)?, f(2)?, f(3)?);
            if chain.paths.last().is_none_or(|p| p.iteration != it) {
                chain.paths.push(PathSample { iteration: it, states: Vec::new() });
            }
            let ps = chain.paths.last_mut().expect("just pushed");
            if ps.states.len() <= n {
                ps.states.resize(n + 1, Vec::new());
            }
            ps.states[n].push(s as u8);
        }
        chain.acceptance = read_json(&cdir.join("acceptance.json"))?;
        chains.push(chain);
    }
    Ok((manifest, chains))
}
