use mhmm::matrix::Matrix;
use mhmm::rng::substream;
use mhmm::sampler::gibbs::{
    b_bar_conditional, gibbs_update_emission_group, gibbs_update_transition_group, inverse_gamma_log_pdf,
    inverse_wishart_log_pdf, normal_log_pdf, tau_conditional, NiwPosterior,
};
use mhmm::sampler::metropolis::{
    metropolis_update_alpha_row, metropolis_update_log_b, multinomial_row_log_lik, AdaptiveScale, RowPrior, StateCounts,
};
use nalgebra::DMatrix;

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64).collect()
}

fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

const ALPHA: [f64; 6] = [0.4, -0.3, 1.1, 0.2, 0.7, -0.6];

fn transition_prior() -> (f64, f64, Matrix<f64>, f64) {
    (0.2, 1.5, Matrix::from_rows(&[vec![0.8]]).unwrap(), 4.0)
}

/// Unnormalized `p(ᾱ, Ψ | α_1..N)` from prior times likelihood.
fn transition_log_joint(a: f64, psi: f64) -> f64 {
    let (m0, k0, psi0, df0) = transition_prior();
    let psi_m = DMatrix::from_element(1, 1, psi);
    let mut lp = normal_log_pdf(a, m0, psi / k0) + inverse_wishart_log_pdf(&psi_m, &psi0.to_nalgebra(), df0);
    for x in ALPHA {
        lp += normal_log_pdf(x, a, psi);
    }
    lp
}

#[test]
fn transition_conditional_matches_grid() {
    let (m0, k0, psi0, df0) = transition_prior();
    let rows: Vec<[f64; 1]> = ALPHA.iter().map(|&x| [x]).collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let post = NiwPosterior::from_rows(&refs, &[m0], k0, &psi0, df0);
    let (ga, gp) = (grid(-1.5, 2.0, 200), grid(0.01, 3.0, 300));
    let mut direct = Vec::new();
    let mut closed = Vec::new();
    for &a in &ga {
        for &p in &gp {
            direct.push(transition_log_joint(a, p));
            closed.push(post.log_pdf(&[a], &DMatrix::from_element(1, 1, p)));
        }
    }
    let d = tv(&normalize_logs(&direct), &normalize_logs(&closed));
    assert!(d < 1e-3, "TV {d}");

    // draws against the grid marginal of the mean
    let mut rng = substream(21, 0, 0);
    let draws = 400_000;
    let bins = 40;
    let (lo, hi) = (-1.5, 2.0);
    let mut hist = vec![0.0; bins];
    for _ in 0..draws {
        let (mean, _) = gibbs_update_transition_group(&refs, &[m0], k0, &psi0, df0, &mut rng).unwrap();
        let b = ((mean[0] - lo) / (hi - lo) * bins as f64).floor();
        if (0.0..bins as f64).contains(&b) {
            hist[b as usize] += 1.0 / draws as f64;
        }
    }
    let joint = normalize_logs(&direct);
    let mut marg = vec![0.0; bins];
    for (ia, _) in ga.iter().enumerate() {
        let b = ia * bins / ga.len();
        marg[b] += joint[ia * gp.len()..(ia + 1) * gp.len()].iter().sum::<f64>();
    }
    let d = tv(&hist, &marg);
    assert!(d < 0.01, "sampled TV {d}");
}

const LOG_B: [f64; 5] = [1.2, 0.7, 1.9, 1.4, 0.9];
const L0: f64 = 0.5;
const TAU0: f64 = 2.0;
const C: f64 = 2.0;
const D: f64 = 0.5;

fn emission_log_joint(b: f64, tau: f64) -> f64 {
    let mut lp = normal_log_pdf(b, L0, TAU0) + inverse_gamma_log_pdf(tau, C, D);
    for x in LOG_B {
        lp += normal_log_pdf(x, b, tau);
    }
    lp
}

#[test]
fn emission_conditionals_match_grid() {
    let taus = grid(1e-3, 4.0, 4000);
    for b in [0.3, 1.22, 2.0] {
        let direct: Vec<f64> = taus.iter().map(|&t| emission_log_joint(b, t)).collect();
        let (shape, rate) = tau_conditional(&LOG_B, b, C, D);
        let closed: Vec<f64> = taus.iter().map(|&t| inverse_gamma_log_pdf(t, shape, rate)).collect();
        let d = tv(&normalize_logs(&direct), &normalize_logs(&closed));
        assert!(d < 1e-3, "tau | b_bar = {b}: TV {d}");
    }
    let bs = grid(-3.0, 5.0, 4000);
    for tau in [0.05, 0.3, 1.5] {
        let direct: Vec<f64> = bs.iter().map(|&b| emission_log_joint(b, tau)).collect();
        let (mean, var) = b_bar_conditional(&LOG_B, tau, L0, TAU0);
        let closed: Vec<f64> = bs.iter().map(|&b| normal_log_pdf(b, mean, var)).collect();
        let d = tv(&normalize_logs(&direct), &normalize_logs(&closed));
        assert!(d < 1e-3, "b_bar | tau = {tau}: TV {d}");
    }
}

#[test]
fn emission_gibbs_sweep_targets_joint_posterior() {
    let (gb, gt) = (grid(-1.0, 3.5, 300), grid(1e-3, 3.0, 600));
    let mut logs = Vec::new();
    for &b in &gb {
        for &t in &gt {
            logs.push(emission_log_joint(b, t));
        }
    }
    let joint = normalize_logs(&logs);
    let bins = 30;
    let mut marg = vec![0.0; bins];
    for ib in 0..gb.len() {
        marg[ib * bins / gb.len()] += joint[ib * gt.len()..(ib + 1) * gt.len()].iter().sum::<f64>();
    }
    let mut rng = substream(22, 0, 0);
    let (mut b, steps) = (1.0, 400_000);
    let mut hist = vec![0.0; bins];
    for _ in 0..steps {
        let (nb, _) = gibbs_update_emission_group(&LOG_B, b, L0, TAU0, C, D, &mut rng);
        b = nb;
        let k = ((b + 1.0) / 4.5 * bins as f64).floor();
        if (0.0..bins as f64).contains(&k) {
            hist[k as usize] += 1.0 / steps as f64;
        }
    }
    let d = tv(&hist, &marg);
    assert!(d < 0.015, "TV {d}");
}

#[test]
fn transition_prior_recovery() {
    let psi0 = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.6]]).unwrap();
    let (m0, k0, df0) = ([0.5, -1.0], 2.0, 7.0);
    let mut rng = substream(23, 0, 0);
    let n = 100_000;
    let (mut mean, mut psi) = ([0.0; 2], [0.0; 4]);
    for _ in 0..n {
        let (a, p) = gibbs_update_transition_group(&[], &m0, k0, &psi0, df0, &mut rng).unwrap();
        for j in 0..2 {
            mean[j] += a[j] / n as f64;
        }
        for (acc, v) in psi.iter_mut().zip(p.as_slice()) {
            *acc += v / n as f64;
        }
    }
    // E[ᾱ] = m0, E[Ψ] = psi0 / (df0 - d - 1)
    for j in 0..2 {
        assert!((mean[j] - m0[j]).abs() < 0.02);
    }
    for (e, v) in psi.iter().zip(psi0.as_slice()) {
        assert!((e - v / 4.0).abs() < 0.02, "{e} vs {}", v / 4.0);
    }
}

fn alpha_posterior_mean_by_quadrature(counts: &[f64], m: f64, v: f64) -> f64 {
    let xs = grid(-8.0, 8.0, 20_000);
    let logs: Vec<f64> = xs.iter().map(|&x| multinomial_row_log_lik(counts, &[x]) + normal_log_pdf(x, m, v)).collect();
    normalize_logs(&logs).iter().zip(&xs).map(|(w, x)| w * x).sum()
}

#[test]
fn alpha_kernel_matches_quadrature() {
    let counts = [30.0, 20.0];
    let (m, v) = (0.5, 1.5);
    let exact = alpha_posterior_mean_by_quadrature(&counts, m, v);
    let chol = DMatrix::from_element(1, 1, v.sqrt());
    let prior = RowPrior { mean: &[m], chol: &chol };
    let prop = DMatrix::from_element(1, 1, 0.3);
    let mut tuner = AdaptiveScale::new(1.0, 0.44);
    let mut rng = substream(24, 0, 0);
    let mut x = vec![0.0];
    for _ in 0..5_000 {
        x = metropolis_update_alpha_row(&x, &counts, &prior, &prop, &mut tuner, true, &mut rng).0;
    }
    let n = 400_000;
    let mut sum = 0.0;
    for _ in 0..n {
        x = metropolis_update_alpha_row(&x, &counts, &prior, &prop, &mut tuner, false, &mut rng).0;
        sum += x[0];
    }
    let rate = tuner.acceptance_rate().unwrap();
    assert!((0.3..0.6).contains(&rate), "acceptance {rate}");
    assert!((sum / n as f64 - exact).abs() < 1e-2, "{} vs {exact}", sum / n as f64);
}

#[test]
fn alpha_kernel_without_transitions_samples_prior() {
    let mean = [0.3, -0.5];
    let cov = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let chol = cov.clone().cholesky().unwrap().l();
    let prior = RowPrior { mean: &mean, chol: &chol };
    let prop = (&cov + DMatrix::identity(2, 2) * 0.1).cholesky().unwrap().l();
    let mut tuner = AdaptiveScale::new(1.0, 0.23);
    let mut rng = substream(25, 0, 0);
    let mut x = vec![0.0, 0.0];
    for _ in 0..5_000 {
        x = metropolis_update_alpha_row(&x, &[0.0; 3], &prior, &prop, &mut tuner, true, &mut rng).0;
    }
    let n = 400_000;
    let (mut s, mut ss) = ([0.0; 2], [0.0; 2]);
    for _ in 0..n {
        x = metropolis_update_alpha_row(&x, &[0.0; 3], &prior, &prop, &mut tuner, false, &mut rng).0;
        for j in 0..2 {
            s[j] += x[j];
            ss[j] += x[j] * x[j];
        }
    }
    let rate = tuner.acceptance_rate().unwrap();
    assert!((0.15..=0.40).contains(&rate), "acceptance {rate}");
    for j in 0..2 {
        let mu = s[j] / n as f64;
        let var = ss[j] / n as f64 - mu * mu;
        assert!((mu - mean[j]).abs() < 0.03, "mean {mu}");
        assert!((var / cov[(j, j)] - 1.0).abs() < 0.05, "var {var}");
    }
}

#[test]
fn log_b_kernel_recovers_poisson_rate() {
    let stats = StateCounts { q_sum: 500.0, t_occ: 100.0 };
    let mut tuner = AdaptiveScale::new(2.4, 0.44);
    let mut rng = substream(26, 0, 0);
    let mut x = 0.0;
    for _ in 0..2_000 {
        x = metropolis_update_log_b(x, stats, 0.0, 100.0, &mut tuner, true, &mut rng).0;
    }
    let n = 200_000;
    let mut sum = 0.0;
    for _ in 0..n {
        x = metropolis_update_log_b(x, stats, 0.0, 100.0, &mut tuner, false, &mut rng).0;
        sum += x.exp();
    }
    let mean = sum / n as f64;
    assert!((mean / 5.0 - 1.0).abs() < 0.05, "{mean}");
    let rate = tuner.acceptance_rate().unwrap();
    assert!((0.3..0.6).contains(&rate), "acceptance {rate}");
}

#[test]
fn log_b_kernel_leaves_target_invariant() {
    // one fixed-scale step from exact prior draws keeps the prior
    let (m, v): (f64, f64) = (1.3, 0.4);
    let stats = StateCounts { q_sum: 0.0, t_occ: 0.0 };
    let mut rng = substream(27, 0, 0);
    let n = 100_000;
    let (mut s, mut ss, mut moved) = (0.0, 0.0, 0);
    let normal = rand_distr::Normal::new(m, v.sqrt()).unwrap();
    for _ in 0..n {
        let x0: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
        let mut tuner = AdaptiveScale::new(1.5, 0.44);
        let (x, acc) = metropolis_update_log_b(x0, stats, m, v, &mut tuner, false, &mut rng);
        moved += acc as usize;
        s += x;
        ss += x * x;
    }
    let mu = s / n as f64;
    let var = ss / n as f64 - mu * mu;
    let se_mu = (v / n as f64).sqrt();
    let se_var = v * (2.0 / n as f64).sqrt();
    assert!((mu - m).abs() < 3.0 * se_mu, "mean {mu}");
    assert!((var - v).abs() < 3.0 * se_var, "var {var}");
    assert!(moved > n / 4);
}

#[test]
fn log_b_kernel_unvisited_state_samples_prior() {
    let (m, v) = (-0.4, 0.7);
    let stats = StateCounts { q_sum: 0.0, t_occ: 0.0 };
    let mut tuner = AdaptiveScale::new(2.4, 0.44);
    let mut rng = substream(28, 0, 0);
    let mut x = 0.0;
    for _ in 0..2_000 {
        x = metropolis_update_log_b(x, stats, m, v, &mut tuner, true, &mut rng).0;
    }
    let n = 300_000;
    let (mut s, mut ss) = (0.0, 0.0);
    for _ in 0..n {
        x = metropolis_update_log_b(x, stats, m, v, &mut tuner, false, &mut rng).0;
        s += x;
        ss += x * x;
    }
    let mu = s / n as f64;
    assert!((mu - m).abs() < 0.02, "mean {mu}");
    assert!((ss / n as f64 - mu * mu - v).abs() < 0.03);
}
