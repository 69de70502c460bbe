use mhmm::data::{ObservationSet, SeriesCounts};
use mhmm::matrix::{is_spd, Matrix};
use mhmm::model::HyperPriors;
use mhmm::sampler::start::{default_start, sticky_logits};
use mhmm::sampler::{diagnostics, run_chains, run_mcmc, McmcConfig, Pooling};
use mhmm::simulate::{generate_scenario, Scenario, ScenarioConfig};

fn data(s: Scenario, n: usize, t: usize, seed: u64) -> mhmm::simulate::Dataset {
    generate_scenario(&ScenarioConfig::preset(s, n, t, seed).unwrap()).unwrap()
}

#[test]
fn stored_draws_respect_invariants() {
    let d = data(Scenario::Scenario4, 6, 60, 1);
    let cfg = McmcConfig { n_iter: 300, burn_in: 150, seed: 3, path_thin: 50, ..Default::default() };
    let chain = run_mcmc(&d.obs, &cfg).unwrap();
    assert_eq!(chain.len(), 300);
    assert_eq!(chain.paths.len(), 6);
    for r in 0..chain.len() {
        assert!(chain.psi_at(r).unwrap().iter().all(is_spd));
        assert!(chain.tau_at(r).unwrap().as_slice().iter().all(|&t| t > 0.0));
        assert!(chain.log_likelihood[r].is_finite() && chain.log_posterior[r].is_finite());
    }
    let a = chain.acceptance.alpha_rate().unwrap();
    let b = chain.acceptance.log_b_rate().unwrap();
    assert!((0.1..0.5).contains(&a), "transition acceptance {a}");
    assert!((0.25..0.65).contains(&b), "emission acceptance {b}");
}

#[test]
fn short_all_zero_series_complete() {
    let obs = ObservationSet::new(vec![
        SeriesCounts::new("a", 1, vec![0, 0]).unwrap(),
        SeriesCounts::new("b", 1, vec![0, 0]).unwrap(),
    ])
    .unwrap();
    for pooling in [Pooling::Multilevel, Pooling::Complete] {
        let cfg = McmcConfig { m_states: 2, n_iter: 200, burn_in: 100, pooling, ..Default::default() };
        let chain = run_mcmc(&obs, &cfg).unwrap();
        assert!(chain.b_bar.iter().all(|b| b.is_finite()));
    }
}

#[test]
fn degenerate_variances_collapse_to_group() {
    let d = data(Scenario::Scenario1, 4, 40, 2);
    let m = 4;
    let mut hyper = HyperPriors::weak(m, &d.obs.series_means());
    hyper.m0 = sticky_logits(m).matrix().clone();
    hyper.df0 = 1e9;
    hyper.psi0 = Matrix::<f64>::identity(m - 1).map(|v| v * 1e9 * 1e-16);
    hyper.c = Matrix::filled(1, m, 1e9);
    hyper.d = Matrix::filled(1, m, 1e-9);
    let start = default_start(&d.obs, m);
    let cfg = McmcConfig { n_iter: 400, burn_in: 200, hyper: Some(hyper), start: Some(start), seed: 4, ..Default::default() };
    let chain = run_mcmc(&d.obs, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for r in chain.kept() {
        let (ab, bb) = (chain.alpha_bar_at(r), chain.b_bar_at(r));
        for n in 0..4 {
            let (a, b) = chain.individual_raw(r, n);
            for (x, y) in a.as_slice().iter().zip(ab.as_slice()).chain(b.as_slice().iter().zip(bb.as_slice())) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    assert!(worst < 1e-6, "largest deviation {worst}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let d = data(Scenario::Scenario3, 5, 50, 5);
    let cfg = McmcConfig { n_iter: 120, burn_in: 60, n_chains: 2, seed: 9, ..Default::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_chains(&d.obs, &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn separated_fit_recovers_emission_levels() {
    let d = data(Scenario::Scenario1, 10, 150, 6);
    let cfg = McmcConfig { n_iter: 600, burn_in: 300, n_chains: 2, seed: 6, ..Default::default() };
    let chains = run_chains(&d.obs, &cfg).unwrap();
    for c in &chains {
        let kept = c.kept();
        let n = kept.len() as f64;
        for i in 0..4 {
            let mean: f64 = kept.clone().map(|r| c.b_bar_at(r)[(0, i)]).sum::<f64>() / n;
            assert!((mean - d.true_group.b_bar[(0, i)]).abs() < 0.15, "state {i}: {mean}");
        }
    }
    let diags = diagnostics(&chains).unwrap();
    let worst = diags.iter().filter(|p| p.name.starts_with("b_bar")).map(|p| p.rhat).fold(1.0, f64::max);
    assert!(worst < 1.1, "b_bar R-hat {worst}");
}

#[test]
fn complete_pooling_shares_parameters() {
    let d = data(Scenario::Scenario3, 5, 60, 7);
    let cfg = McmcConfig { n_iter: 200, burn_in: 100, pooling: Pooling::Complete, ..Default::default() };
    let chain = run_mcmc(&d.obs, &cfg).unwrap();
    assert!(chain.psi_at(0).is_none() && chain.tau_at(0).is_none());
    let first = chain.individual_at(150, 0).unwrap();
    for n in 1..5 {
        assert_eq!(chain.individual_at(150, n).unwrap(), first);
    }
}
