use mhmm::matrix::Matrix;
use mhmm::model::{EmissionParams, InitialDistribution, TransitionMatrix};
use mhmm::rng::substream;
use mhmm::simulate::{draw_individual_params, generate_scenario, sample_counts, sample_hidden_path, Scenario, ScenarioConfig};

fn preset_group(s: Scenario) -> mhmm::Group {
    ScenarioConfig::preset(s, 1, 10, 0).unwrap().group_params().unwrap()
}

#[test]
fn lognormal_emission_sds() {
    let group = preset_group(Scenario::Scenario4);
    let mut rng = substream(31, 0, 0);
    let n = 100_000;
    let mut s = [0.0; 4];
    let mut ss = [0.0; 4];
    for _ in 0..n {
        let p = draw_individual_params(&group, &mut rng).unwrap();
        for i in 0..4 {
            let b = p.emission().mean(0, i);
            s[i] += b;
            ss[i] += b * b;
        }
    }
    for (i, want) in [1.89, 15.72, 39.30, 61.88].iter().enumerate() {
        let mean = s[i] / n as f64;
        let sd = (ss[i] / n as f64 - mean * mean).sqrt();
        assert!((sd / want - 1.0).abs() < 0.05, "state {}: {sd} vs {want}", i + 1);
    }
}

#[test]
fn transition_probability_sd_range() {
    let group = preset_group(Scenario::Scenario2);
    let mut rng = substream(32, 0, 0);
    let n = 50_000;
    let mut s = Matrix::filled(4, 4, 0.0);
    let mut ss = Matrix::filled(4, 4, 0.0);
    for _ in 0..n {
        let p = draw_individual_params(&group, &mut rng).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let a = p.tpm().get(i, j);
                s[(i, j)] += a;
                ss[(i, j)] += a * a;
            }
        }
    }
    let sds: Vec<f64> = (0..16)
        .map(|c| {
            let m = s.as_slice()[c] / n as f64;
            (ss.as_slice()[c] / n as f64 - m * m).sqrt()
        })
        .collect();
    let lo = sds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sds.iter().copied().fold(0.0, f64::max);
    assert!((0.006..0.008).contains(&lo), "smallest SD {lo}");
    assert!((0.21..0.24).contains(&hi), "largest SD {hi}");
}

fn stationary(tpm: &TransitionMatrix<f64>) -> Vec<f64> {
    let m = tpm.m_states();
    let mut p = vec![1.0 / m as f64; m];
    for _ in 0..10_000 {
        p = (0..m).map(|j| (0..m).map(|i| p[i] * tpm.get(i, j)).sum()).collect();
    }
    p
}

#[test]
fn path_frequencies_match_group_tpm() {
    let group = preset_group(Scenario::Scenario1);
    let tpm = group.alpha_bar.to_tpm().unwrap();
    let mut rng = substream(33, 0, 0);
    let path = sample_hidden_path(&tpm, &InitialDistribution::uniform(4), 1_000_000, &mut rng);
    let mut counts = Matrix::filled(4, 4, 0.0);
    let mut occ = [0.0; 4];
    for w in path.windows(2) {
        counts[(w[0], w[1])] += 1.0;
    }
    for &s in &path {
        occ[s] += 1.0 / path.len() as f64;
    }
    for i in 0..4 {
        let row: f64 = (0..4).map(|j| counts[(i, j)]).sum();
        for j in 0..4 {
            assert!((counts[(i, j)] / row - tpm.get(i, j)).abs() < 0.005);
        }
    }
    for (o, p) in occ.iter().zip(stationary(&tpm)) {
        assert!((o - p).abs() < 0.01);
    }
}

#[test]
fn state_conditional_count_moments() {
    let em = EmissionParams::from_means(Matrix::from_rows(&[vec![1.0, 38.0], vec![11.0, 119.0]]).unwrap()).unwrap();
    let n = 100_000;
    let path: Vec<usize> = (0..2 * n).map(|t| t % 2).collect();
    let mut rng = substream(34, 0, 0);
    let counts = sample_counts(&path, &em, &mut rng);
    for k in 0..2 {
        for i in 0..2 {
            let v: Vec<f64> = (0..2 * n).filter(|t| t % 2 == i).map(|t| counts[(k, t)] as f64).collect();
            let mean = v.iter().sum::<f64>() / n as f64;
            let b = em.mean(k, i);
            assert!((mean - b).abs() < 3.0 * (b / n as f64).sqrt(), "k {k} i {i}: {mean} vs {b}");
        }
    }
    // conditional independence of the two series within a state
    for i in 0..2 {
        let xs: Vec<(f64, f64)> =
            (0..2 * n).filter(|t| t % 2 == i).map(|t| (counts[(0, t)] as f64, counts[(1, t)] as f64)).collect();
        let (mx, my) = (xs.iter().map(|p| p.0).sum::<f64>() / n as f64, xs.iter().map(|p| p.1).sum::<f64>() / n as f64);
        let cov: f64 = xs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / n as f64;
        let vx: f64 = xs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / n as f64;
        let vy: f64 = xs.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>() / n as f64;
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "corr {r}");
    }
}

#[test]
fn scenario_truths_and_determinism() {
    let cfg = ScenarioConfig::preset(Scenario::Scenario1, 6, 30, 5).unwrap();
    let a = generate_scenario(&cfg).unwrap();
    assert_eq!(a, generate_scenario(&cfg).unwrap());
    let at_mean = a.true_group.at_mean().unwrap();
    assert!(a.true_individual.iter().all(|p| *p == at_mean));
    assert!(a.true_paths.iter().flatten().all(|&s| s < 4));

    let s4 = generate_scenario(&ScenarioConfig::preset(Scenario::Scenario4, 6, 30, 5).unwrap()).unwrap();
    assert!(s4.true_group.psi.iter().all(|p| p[(0, 0)] == 0.9));
    assert_eq!(s4.true_group.tau.as_slice(), &[0.9, 0.7, 0.5, 0.2]);
    assert!(s4.true_individual.windows(2).all(|w| w[0] != w[1]));
    let means: Vec<f64> = s4.true_group.b_bar.as_slice().iter().map(|b| b.exp()).collect();
    for (m, want) in means.iter().zip([1.0, 11.0, 38.0, 119.0]) {
        assert!((m - want).abs() < 1e-9);
    }
    let other = generate_scenario(&ScenarioConfig::preset(Scenario::Scenario4, 6, 30, 6).unwrap()).unwrap();
    assert_ne!(s4.obs, other.obs);
}
