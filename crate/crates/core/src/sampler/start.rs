//! Starting values.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::ObservationSet;
use crate::matrix::Matrix;
use crate::model::{probs_to_logit, GroupParams, TransitionLogits, PROB_FLOOR};

const SELF_TRANSITION: f64 = 0.7;
const KMEANS_ITERS: usize = 100;

/// Logits of a TPM with `SELF_TRANSITION` on the diagonal and the rest spread evenly.
pub fn sticky_logits(m: usize) -> TransitionLogits<f64> {
    let off = (1.0 - SELF_TRANSITION) / (m - 1) as f64;
    let rows: Vec<f64> = (0..m)
        .flat_map(|i| {
            let row: Vec<f64> = (0..m).map(|j| if i == j { SELF_TRANSITION } else { off }).collect();
            probs_to_logit(&row, PROB_FLOOR).expect("valid row")
        })
        .collect();
    TransitionLogits::new(Matrix::from_vec(m, m - 1, rows).expect("shape")).expect("finite logits")
}

/// Lloyd's k-means on the square roots of every time point's count vector.
///
/// Centres start evenly spaced over the range of each series, and the returned
/// `K × M` cluster means (count scale) are sorted ascending on series 1.
pub fn kmeans_state_means(obs: &ObservationSet, m: usize) -> Matrix<f64> {
    let points: Vec<Vec<u64>> = obs
        .individuals()
        .iter()
        .flat_map(|s| (0..s.t_len()).map(move |t| s.at(t).to_vec()))
        .collect();
    let (clusters, centres) = kmeans(&points, m, obs.k_series());
    let mut means: Vec<Vec<f64>> = clusters
        .into_iter()
        .zip(centres)
        .map(|(c, centre)| c.unwrap_or_else(|| centre.iter().map(|x| x * x).collect()))
        .collect();
    means.sort_by(|a, b| a[0].total_cmp(&b[0]));
    Matrix::from_fn(obs.k_series(), m, |kk, c| means[c][kk])
}

/// Per-individual log emission means from a k-means on each series alone.
///
/// Clusters are matched to the group states in ascending order on series 1;
/// states an individual does not occupy keep the group value.
pub fn individual_log_b_starts(obs: &ObservationSet, group_b_bar: &Matrix<f64>) -> Vec<Matrix<f64>> {
    let (k, m) = (group_b_bar.rows(), group_b_bar.cols());
    obs.individuals()
        .iter()
        .map(|s| {
            let points: Vec<Vec<u64>> = (0..s.t_len()).map(|t| s.at(t).to_vec()).collect();
            let mut found: Vec<Vec<f64>> = kmeans(&points, m, k).0.into_iter().flatten().collect();
            found.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let mut out = group_b_bar.clone();
            let mut next = 0;
            for (ci, c) in found.iter().enumerate() {
                let remaining = found.len() - ci;
                let last = m - remaining;
                let logs: Vec<f64> = c.iter().map(|x| (x + 0.1).ln()).collect();
                let best = (next..=last)
                    .min_by(|&x, &y| {
                        let dx: f64 = (0..k).map(|kk| (logs[kk] - group_b_bar[(kk, x)]).powi(2)).sum();
                        let dy: f64 = (0..k).map(|kk| (logs[kk] - group_b_bar[(kk, y)]).powi(2)).sum();
                        dx.total_cmp(&dy).then(x.cmp(&y))
                    })
                    .expect("nonempty range");
                for kk in 0..k {
                    out[(kk, best)] = logs[kk];
                }
                next = best + 1;
            }
            out
        })
        .collect()
}

/// Cluster means on the count scale (`None` for empty clusters) and the final
/// centres on the square-root scale.
fn kmeans(counts: &[Vec<u64>], m: usize, k: usize) -> (Vec<Option<Vec<f64>>>, Vec<Vec<f64>>) {
    let points: Vec<Vec<f64>> = counts.iter().map(|c| c.iter().map(|&q| (q as f64).sqrt()).collect()).collect();
    let lo: Vec<f64> = (0..k).map(|kk| points.iter().map(|p| p[kk]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..k).map(|kk| points.iter().map(|p| p[kk]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut centres: Vec<Vec<f64>> = (0..m)
        .map(|c| (0..k).map(|kk| lo[kk] + (c as f64 + 0.5) / m as f64 * (hi[kk] - lo[kk])).collect())
        .collect();

    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (p, a) in points.iter().zip(assign.iter_mut()) {
            let best = (0..m)
                .min_by(|&x, &y| dist2(p, &centres[x]).total_cmp(&dist2(p, &centres[y])).then(x.cmp(&y)))
                .expect("m > 0");
            changed |= best != *a;
            *a = best;
        }
        let mut sums = vec![vec![0.0; k]; m];
        let mut sizes = vec![0usize; m];
        for (p, &a) in points.iter().zip(&assign) {
            sizes[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..m {
            if sizes[c] > 0 {
                centres[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }

    let mut means = vec![vec![0.0; k]; m];
    let mut sizes = vec![0usize; m];
    for (c, &a) in counts.iter().zip(&assign) {
        sizes[a] += 1;
        for (s, &q) in means[a].iter_mut().zip(c) {
            *s += q as f64;
        }
    }
    let means = (0..m).map(|c| (sizes[c] > 0).then(|| means[c].iter().map(|s| s / sizes[c] as f64).collect())).collect();
    (means, centres)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Data-driven group starting values: k-means emission means and a sticky TPM.
pub fn default_start(obs: &ObservationSet, m: usize) -> GroupParams<f64> {
    let means = kmeans_state_means(obs, m);
    let k = obs.k_series();
    GroupParams {
        alpha_bar: sticky_logits(m),
        psi: vec![Matrix::identity(m - 1); m],
        b_bar: means.map(|x| (x + 0.1).ln()),
        tau: Matrix::filled(k, m, 0.5),
    }
}

/// Jittered copy of `start` for additional chains; states stay ordered on series 1.
pub fn randomize_start<R: Rng + ?Sized>(start: &GroupParams<f64>, rng: &mut R) -> GroupParams<f64> {
    let jitter = Normal::new(0.0, 0.5).expect("valid sd");
    let mut out = start.clone();
    let m = out.m_states();
    let mut alpha = out.alpha_bar.matrix().clone();
    for v in alpha.as_mut_slice().iter_mut() {
        *v += jitter.sample(rng);
    }
    out.alpha_bar = TransitionLogits::new(alpha).expect("finite logits");
    let mut b = out.b_bar.clone();
    for v in b.as_mut_slice().iter_mut() {
        *v += jitter.sample(rng);
    }
    let mut cols: Vec<usize> = (0..m).collect();
    cols.sort_by(|&x, &y| b[(0, x)].total_cmp(&b[(0, y)]));
    out.b_bar = Matrix::from_fn(b.rows(), m, |kk, c| b[(kk, cols[c])]);
    out
}
