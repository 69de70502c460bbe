use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mhmm::decode::LocalKind;
use mhmm::evaluate::Estimator;
use mhmm::sampler::Pooling;
use mhmm_cli::commands::{self, ReportOutcome};
use mhmm_cli::config::with_workers;
use mhmm_cli::montecarlo::{self, McOutcome};
use mhmm_cli::RunConfig;

const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "mhmm", version, about = "Multilevel hidden Markov models for multivariate count series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Preset name, overriding the config.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        individuals: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit the model and write a chain directory.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV or dataset directory.
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_pooling)]
        pooling: Option<Pooling>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        rhat_threshold: Option<f64>,
    },
    /// Viterbi paths and state probabilities per individual.
    Decode {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(long)]
        chains: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_estimator)]
        estimator: Option<Estimator>,
        /// Report smoothed instead of filtered probabilities.
        #[arg(long)]
        smoothed: bool,
    },
    /// Posterior predictive checks.
    Ppc {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(long)]
        chains: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Replicated simulation study; resumes from checkpoints in `out`.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Estimates, diagnostics and trace plots of a chain directory, or the
    /// tables of a montecarlo directory.
    Report {
        #[command(flatten)]
        common: Common,
        dir: PathBuf,
    },
}

fn parse_pooling(s: &str) -> Result<Pooling, String> {
    Pooling::parse(s).map_err(|e| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    Estimator::parse(s).map_err(|e| e.to_string())
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn print_mc(out: &McOutcome) {
    println!("replications resumed from checkpoints: {}", out.resumed);
    for s in &out.summaries {
        println!("{}: {} ok, {} failed", s.pooling.name(), s.n_ok, s.n_failed);
        if let Some(d) = s.decoding {
            println!(
                "  accuracy {:.4}  balanced accuracy {:.4}  F1 {:.4}  kappa {:.4}",
                d.accuracy, d.balanced_accuracy, d.f1, d.kappa
            );
        }
        if let Some(b) = s.report.as_ref().and_then(|r| r.mean_abs_bias("b_bar")) {
            println!("  mean |bias| of b_bar: {b:.4}");
        }
    }
    println!("wrote {} and {}", out.report_path.display(), out.decoding_path.display());
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { common, preset, individuals, length, out } => {
            let mut cfg = load(&common)?;
            if let Some(p) = preset {
                cfg.scenario.preset = p;
                cfg.scenario.custom = None;
            }
            cfg.scenario.n_individuals = individuals.unwrap_or(cfg.scenario.n_individuals);
            cfg.scenario.t_len = length.unwrap_or(cfg.scenario.t_len);
            let s = with_workers(cfg.workers, || commands::simulate(&cfg, &out))??;
            let (tmin, tmax) = (s.lengths.iter().min().unwrap(), s.lengths.iter().max().unwrap());
            println!("N = {}, K = {}, T = {tmin}..{tmax}", s.n_individuals, s.k_series);
            for (k, row) in s.state_means.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
                println!("series {} mean count by true state: {}", k + 1, cells.join(" "));
            }
            println!("wrote {}", out.display());
        }
        Command::Fit { common, data, out, pooling, chains, states, iterations, burn_in, rhat_threshold } => {
            let mut cfg = load(&common)?;
            cfg.mcmc.pooling = pooling.unwrap_or(cfg.mcmc.pooling);
            cfg.mcmc.n_chains = chains.unwrap_or(cfg.mcmc.n_chains);
            cfg.mcmc.m_states = states.unwrap_or(cfg.mcmc.m_states);
            cfg.mcmc.n_iter = iterations.unwrap_or(cfg.mcmc.n_iter);
            cfg.mcmc.burn_in = burn_in.unwrap_or(cfg.mcmc.burn_in);
            cfg.fit.rhat_threshold = rhat_threshold.unwrap_or(cfg.fit.rhat_threshold);
            let f = with_workers(cfg.workers, || commands::fit(&cfg, &data, &out))??;
            println!("config hash {}", f.manifest.config_hash);
            for (c, (a, b)) in f.acceptance.iter().enumerate() {
                println!("chain {}: acceptance transition {} emission {}", c + 1, fmt_opt(*a), fmt_opt(*b));
            }
            println!("{:<24} {:>8} {:>10}", "parameter", "rhat", "ess");
            for d in &f.diagnostics {
                println!("{:<24} {:>8.4} {:>10.1}", d.name, d.rhat, d.ess);
            }
            println!("max rhat {:.4} (threshold {})", f.max_rhat, cfg.fit.rhat_threshold);
            if !f.converged {
                eprintln!("warning: R-hat above threshold; chains have not converged");
                return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
            }
        }
        Command::Decode { common, data, chains, out, estimator, smoothed } => {
            let mut cfg = load(&common)?;
            cfg.decode.estimator = estimator.unwrap_or(cfg.decode.estimator);
            if smoothed {
                cfg.decode.local = LocalKind::Smoothed;
            }
            let d = with_workers(cfg.workers, || commands::decode(&cfg, &data, &chains, &out))??;
            println!("wrote {} decode files to {}", d.files.len(), out.display());
            if let Some((m, _)) = d.metrics {
                println!(
                    "against true paths: accuracy {:.4}  balanced accuracy {:.4}  F1 {:.4}  kappa {:.4}",
                    m.accuracy, m.balanced_accuracy, m.f1, m.kappa
                );
            }
        }
        Command::Ppc { common, data, chains, out, replicates } => {
            let mut cfg = load(&common)?;
            cfg.ppc.r_rep = replicates.unwrap_or(cfg.ppc.r_rep);
            let rows = with_workers(cfg.workers, || commands::ppc(&cfg, &data, &chains, &out))??;
            println!("{:<8} {:<10} {:>12} {:>10}", "series", "statistic", "observed", "P(>=obs)");
            for r in rows {
                println!("{:<8} {:<10} {:>12.4} {:>10.3}", r.series + 1, r.statistic, r.observed, r.tail_prob);
            }
        }
        Command::Montecarlo { common, out, reps } => {
            let mut cfg = load(&common)?;
            cfg.montecarlo.reps = reps.unwrap_or(cfg.montecarlo.reps);
            let o = with_workers(cfg.workers, || montecarlo::run_montecarlo(&cfg, &out))??;
            print_mc(&o);
        }
        Command::Report { common, dir } => {
            let cfg = load(&common)?;
            match with_workers(cfg.workers, || commands::report(&cfg, &dir))?? {
                ReportOutcome::Chains { estimate, diagnostics } => {
                    println!("{:<20} {:>10} {:>10} {:>10}", "parameter", "estimate", "2.5%", "97.5%");
                    for i in 0..estimate.names.len() {
                        println!(
                            "{:<20} {:>10.4} {:>10.4} {:>10.4}",
                            estimate.names[i], estimate.point[i], estimate.cri_low[i], estimate.cri_high[i]
                        );
                    }
                    let max = diagnostics.iter().map(|d| d.rhat).fold(1.0, f64::max);
                    println!("max rhat {max:.4}");
                }
                ReportOutcome::MonteCarlo(o) => print_mc(&o),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
