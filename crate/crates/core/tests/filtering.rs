mod common;

use common::{all_paths, log_joint, log_sum_exp, random_params, random_pi, random_series};
use mhmm::decode::{smoothed_probabilities, viterbi};
use mhmm::hmm::{backward_sample, forward_filter};
use mhmm::model::{EmissionParams, IndividualParams, InitialDistribution, TransitionLogits};
use mhmm::rng::substream;
use mhmm::Mat;

#[test]
fn forward_likelihood_matches_enumeration() {
    let mut rng = substream(11, 0, 0);
    for case in 0..100 {
        let m = 2 + case % 2;
        let k = 1 + (case / 2) % 2;
        let t_len = 1 + case % 8;
        let params = random_params(m, k, &mut rng);
        let pi = random_pi(m, &mut rng);
        let obs = random_series(k, t_len, &mut rng);
        let fwd = forward_filter(&obs, &params, &pi).unwrap();
        let joints: Vec<f64> = all_paths(m, t_len).iter().map(|p| log_joint(&obs, &params, &pi, p)).collect();
        let exact = log_sum_exp(&joints);
        assert!((fwd.log_likelihood - exact).abs() < 1e-10, "case {case}: {} vs {exact}", fwd.log_likelihood);
        for t in 0..t_len {
            assert!((fwd.probs.row(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn viterbi_matches_brute_force() {
    let mut rng = substream(12, 0, 0);
    for case in 0..100 {
        let t_len = 1 + case % 8;
        let params = random_params(2, 1, &mut rng);
        let pi = random_pi(2, &mut rng);
        let obs = random_series(1, t_len, &mut rng);
        let v = viterbi(&obs, &params, &pi).unwrap();
        let (best, score) = all_paths(2, t_len)
            .into_iter()
            .map(|p| {
                let s = log_joint(&obs, &params, &pi, &p);
                (p, s)
            })
            .fold((Vec::new(), f64::NEG_INFINITY), |acc, (p, s)| if s > acc.1 { (p, s) } else { acc });
        assert_eq!(v.path, best, "case {case}");
        assert!((v.log_joint - score).abs() < 1e-9);
    }
}

#[test]
fn smoothing_matches_enumeration() {
    let mut rng = substream(13, 0, 0);
    for _ in 0..30 {
        let (m, t_len) = (3, 5);
        let params = random_params(m, 2, &mut rng);
        let pi = random_pi(m, &mut rng);
        let obs = random_series(2, t_len, &mut rng);
        let paths = all_paths(m, t_len);
        let joints: Vec<f64> = paths.iter().map(|p| log_joint(&obs, &params, &pi, p)).collect();
        let z = log_sum_exp(&joints);
        let mut exact = Mat::filled(t_len, m, 0.0);
        for (p, j) in paths.iter().zip(&joints) {
            for (t, &s) in p.iter().enumerate() {
                exact[(t, s)] += (j - z).exp();
            }
        }
        let smoothed = smoothed_probabilities(&obs, &params, &pi).unwrap();
        for (a, b) in smoothed.as_slice().iter().zip(exact.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn backward_sampling_matches_joint_posterior() {
    let mut rng = substream(14, 0, 0);
    let params = random_params(2, 1, &mut rng);
    let pi = InitialDistribution::uniform(2);
    let obs = random_series(1, 4, &mut rng);
    let fwd = forward_filter(&obs, &params, &pi).unwrap();
    let paths = all_paths(2, 4);
    let joints: Vec<f64> = paths.iter().map(|p| log_joint(&obs, &params, &pi, p)).collect();
    let z = log_sum_exp(&joints);
    let draws = 200_000;
    let mut freq = vec![0usize; 16];
    let mut marg = vec![0usize; 4];
    for _ in 0..draws {
        let p = backward_sample(&fwd, params.tpm(), &mut rng);
        freq[p.iter().fold(0, |c, &s| c * 2 + s)] += 1;
        for (t, &s) in p.iter().enumerate() {
            marg[t] += s;
        }
    }
    for (i, j) in joints.iter().enumerate() {
        let p = (j - z).exp();
        let f = freq[i] as f64 / draws as f64;
        assert!((f - p).abs() < 0.004 + 4.0 * (p * (1.0 - p) / draws as f64).sqrt(), "path {i}: {f} vs {p}");
    }
    let smoothed = smoothed_probabilities(&obs, &params, &pi).unwrap();
    for t in 0..4 {
        let p = smoothed[(t, 1)];
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((marg[t] as f64 / draws as f64 - p).abs() <= 3.0 * se + 1e-12);
    }
}

#[test]
fn identity_tpm_from_point_start_gives_constant_path() {
    let alpha = TransitionLogits::new(Mat::from_rows(&[vec![-40.0], vec![40.0]]).unwrap()).unwrap();
    let params = IndividualParams::new(alpha, EmissionParams::new(Mat::from_rows(&[vec![1.0, 1.0]]).unwrap()).unwrap()).unwrap();
    let mut rng = substream(15, 0, 0);
    let obs = random_series(1, 6, &mut rng);
    let fwd = forward_filter(&obs, &params, &InitialDistribution::point(2, 0)).unwrap();
    for _ in 0..100 {
        assert_eq!(backward_sample(&fwd, params.tpm(), &mut rng), vec![0; 6]);
    }
}

#[test]
fn single_precision_tracks_double() {
    let mut rng = substream(16, 0, 0);
    for _ in 0..20 {
        let p64 = random_params(3, 2, &mut rng);
        let p32 = IndividualParams::new(
            TransitionLogits::new(p64.alpha().matrix().map(|x| x as f32)).unwrap(),
            EmissionParams::new(p64.emission().log_means().map(|x| x as f32)).unwrap(),
        )
        .unwrap();
        let obs = random_series(2, 40, &mut rng);
        let a = forward_filter(&obs, &p64, &InitialDistribution::uniform(3)).unwrap().log_likelihood;
        let b = forward_filter(&obs, &p32, &InitialDistribution::<f32>::uniform(3)).unwrap().log_likelihood;
        assert!(((b as f64) - a).abs() < 1e-3 * a.abs().max(1.0), "{a} vs {b}");
        let v64 = viterbi(&obs, &p64, &InitialDistribution::uniform(3)).unwrap();
        let v32 = viterbi(&obs, &p32, &InitialDistribution::<f32>::uniform(3)).unwrap();
        assert!(((v32.log_joint as f64) - v64.log_joint).abs() < 1e-3 * v64.log_joint.abs());
    }
}
