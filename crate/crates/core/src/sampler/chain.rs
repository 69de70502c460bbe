//! Columnar storage of MCMC draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{EmissionParams, GroupParams, IndividualParams, InitialDistribution, ModelSpec, TransitionLogits};
use crate::sampler::metropolis::AdaptiveScale;

/// Partial pooling (multilevel) or complete pooling (single shared parameter set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Multilevel,
    Complete,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Self::Multilevel => "multilevel",
            Self::Complete => "complete",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "multilevel" | "partial" | "mhmm" => Ok(Self::Multilevel),
            "complete" | "hmm" => Ok(Self::Complete),
            other => Err(Error::Config(format!("unknown pooling `{other}`"))),
        }
    }
}

/// Current values of every sampled parameter.
///
/// Under complete pooling `alpha_bar`/`b_bar` hold the shared parameters and
/// the individual blocks are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub alpha_bar: Matrix<f64>,
    pub psi: Vec<Matrix<f64>>,
    pub b_bar: Matrix<f64>,
    pub tau: Matrix<f64>,
    pub alpha: Vec<Matrix<f64>>,
    pub log_b: Vec<Matrix<f64>>,
}

/// Thinned record of sampled hidden paths (0-based states).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub iteration: usize,
    pub states: Vec<Vec<u8>>,
}

/// Post-adaptation acceptance counts and final scales per Metropolis block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceLedger {
    /// Indexed `[n * M + i]`.
    pub alpha: Vec<AdaptiveScale>,
    /// Indexed `[(n * K + k) * M + i]`.
    pub log_b: Vec<AdaptiveScale>,
}

impl AcceptanceLedger {
    fn mean_rate(blocks: &[AdaptiveScale]) -> Option<f64> {
        let (acc, prop) = blocks.iter().fold((0u64, 0u64), |(a, p), b| (a + b.accepted, p + b.proposed));
        (prop > 0).then(|| acc as f64 / prop as f64)
    }

    pub fn alpha_rate(&self) -> Option<f64> {
        Self::mean_rate(&self.alpha)
    }

    pub fn log_b_rate(&self) -> Option<f64> {
        Self::mean_rate(&self.log_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStore {
    pub spec: ModelSpec,
    pub pooling: Pooling,
    pub burn_in: usize,
    pub pi: InitialDistribution<f64>,
    pub alpha_bar: Vec<f64>,
    pub psi: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub tau: Vec<f64>,
    pub alpha_ind: Vec<f64>,
    pub log_b_ind: Vec<f64>,
    /// `Σ_n ln p(O_n | θ_r)` at the stored parameters of iteration `r`.
    pub log_likelihood: Vec<f64>,
    /// Joint log-posterior (up to a constant) at the stored parameters of iteration `r`.
    pub log_posterior: Vec<f64>,
    pub paths: Vec<PathSample>,
    pub acceptance: AcceptanceLedger,
}

impl ChainStore {
    pub fn new(spec: ModelSpec, pooling: Pooling, burn_in: usize, pi: InitialDistribution<f64>) -> Self {
        Self {
            spec,
            pooling,
            burn_in,
            pi,
            alpha_bar: Vec::new(),
            psi: Vec::new(),
            b_bar: Vec::new(),
            tau: Vec::new(),
            alpha_ind: Vec::new(),
            log_b_ind: Vec::new(),
            log_likelihood: Vec::new(),
            log_posterior: Vec::new(),
            paths: Vec::new(),
            acceptance: AcceptanceLedger::default(),
        }
    }

    fn m(&self) -> usize {
        self.spec.m_states
    }

    fn k(&self) -> usize {
        self.spec.k_series
    }

    pub fn alpha_width(&self) -> usize {
        self.m() * (self.m() - 1)
    }

    pub fn psi_width(&self) -> usize {
        self.m() * (self.m() - 1) * (self.m() - 1)
    }

    pub fn emission_width(&self) -> usize {
        self.k() * self.m()
    }

    pub fn n_individuals(&self) -> usize {
        self.spec.n_individuals
    }

    pub fn len(&self) -> usize {
        self.log_posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_multilevel(&self) -> bool {
        self.pooling == Pooling::Multilevel
    }

    /// Append the state of one finished iteration; likelihood terms are filled in later.
    pub fn record(&mut self, s: &SamplerState) {
        self.alpha_bar.extend_from_slice(s.alpha_bar.as_slice());
        self.b_bar.extend_from_slice(s.b_bar.as_slice());
        if self.is_multilevel() {
            for p in &s.psi {
                self.psi.extend_from_slice(p.as_slice());
            }
            self.tau.extend_from_slice(s.tau.as_slice());
            for a in &s.alpha {
                self.alpha_ind.extend_from_slice(a.as_slice());
            }
            for b in &s.log_b {
                self.log_b_ind.extend_from_slice(b.as_slice());
            }
        }
        self.log_likelihood.push(f64::NAN);
        self.log_posterior.push(f64::NAN);
    }

    pub fn alpha_bar_at(&self, r: usize) -> Matrix<f64> {
        let w = self.alpha_width();
        Matrix::from_vec(self.m(), self.m() - 1, self.alpha_bar[r * w..(r + 1) * w].to_vec()).expect("shape")
    }

    pub fn b_bar_at(&self, r: usize) -> Matrix<f64> {
        let w = self.emission_width();
        Matrix::from_vec(self.k(), self.m(), self.b_bar[r * w..(r + 1) * w].to_vec()).expect("shape")
    }

    pub fn psi_at(&self, r: usize) -> Option<Vec<Matrix<f64>>> {
        if !self.is_multilevel() {
            return None;
        }
        let d = self.m() - 1;
        let w = self.psi_width();
        let block = &self.psi[r * w..(r + 1) * w];
        Some((0..self.m()).map(|i| Matrix::from_vec(d, d, block[i * d * d..(i + 1) * d * d].to_vec()).expect("shape")).collect())
    }

    pub fn tau_at(&self, r: usize) -> Option<Matrix<f64>> {
        if !self.is_multilevel() {
            return None;
        }
        let w = self.emission_width();
        Some(Matrix::from_vec(self.k(), self.m(), self.tau[r * w..(r + 1) * w].to_vec()).expect("shape"))
    }

    /// Group-level parameters at iteration `r` (multilevel chains only).
    pub fn group_at(&self, r: usize) -> Option<GroupParams<f64>> {
        Some(GroupParams {
            alpha_bar: TransitionLogits::new(self.alpha_bar_at(r)).ok()?,
            psi: self.psi_at(r)?,
            b_bar: self.b_bar_at(r),
            tau: self.tau_at(r)?,
        })
    }

    fn individual_blocks(&self, r: usize, n: usize) -> (Matrix<f64>, Matrix<f64>) {
        if !self.is_multilevel() {
            return (self.alpha_bar_at(r), self.b_bar_at(r));
        }
        let (aw, ew, nn) = (self.alpha_width(), self.emission_width(), self.n_individuals());
        let a0 = (r * nn + n) * aw;
        let e0 = (r * nn + n) * ew;
        (
            Matrix::from_vec(self.m(), self.m() - 1, self.alpha_ind[a0..a0 + aw].to_vec()).expect("shape"),
            Matrix::from_vec(self.k(), self.m(), self.log_b_ind[e0..e0 + ew].to_vec()).expect("shape"),
        )
    }

    /// Parameters of individual `n` at iteration `r`; shared parameters under complete pooling.
    pub fn individual_at(&self, r: usize, n: usize) -> Result<IndividualParams<f64>> {
        let (a, b) = self.individual_blocks(r, n);
        IndividualParams::new(TransitionLogits::new(a)?, EmissionParams::new(b)?)
    }

    /// Raw individual blocks `(α_n, ln b_n)` at iteration `r`.
    pub fn individual_raw(&self, r: usize, n: usize) -> (Matrix<f64>, Matrix<f64>) {
        self.individual_blocks(r, n)
    }

    /// Names of the group-level scalars, 1-based: `alpha_bar[i,j]` (destination
    /// `j >= 2`), `psi[i][a,b]` (lower triangle), `b_bar[k,i]`, `tau[k,i]`.
    pub fn group_scalar_names(&self) -> Vec<String> {
        let (m, k) = (self.m(), self.k());
        let mut names = Vec::new();
        for i in 0..m {
            for j in 1..m {
                names.push(format!("alpha_bar[{},{}]", i + 1, j + 1));
            }
        }
        if self.is_multilevel() {
            for i in 0..m {
                for a in 0..m - 1 {
                    for b in 0..=a {
                        names.push(format!("psi[{}][{},{}]", i + 1, a + 1, b + 1));
                    }
                }
            }
        }
        for kk in 0..k {
            for i in 0..m {
                names.push(format!("b_bar[{},{}]", kk + 1, i + 1));
            }
        }
        if self.is_multilevel() {
            for kk in 0..k {
                for i in 0..m {
                    names.push(format!("tau[{},{}]", kk + 1, i + 1));
                }
            }
        }
        names
    }

    /// Group-level scalars of iteration `r`, ordered as [`Self::group_scalar_names`].
    pub fn group_scalars(&self, r: usize) -> Vec<f64> {
        let d = self.m() - 1;
        let mut out = self.alpha_bar_at(r).as_slice().to_vec();
        if let Some(psi) = self.psi_at(r) {
            for p in &psi {
                for a in 0..d {
                    for b in 0..=a {
                        out.push(p[(a, b)]);
                    }
                }
            }
        }
        out.extend_from_slice(self.b_bar_at(r).as_slice());
        if let Some(tau) = self.tau_at(r) {
            out.extend_from_slice(tau.as_slice());
        }
        out
    }

    /// One trace per group-level scalar over all stored iterations.
    pub fn group_scalar_traces(&self) -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..self.len()).map(|r| self.group_scalars(r)).collect();
        let p = rows.first().map_or(0, Vec::len);
        (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    }

    /// Indices of the kept (post-burn-in) iterations.
    pub fn kept(&self) -> std::ops::Range<usize> {
        self.burn_in.min(self.len())..self.len()
    }

    /// Reorder the state labels of iteration `r`: new state `p` is old state `perm[p]`.
    pub fn permute_iteration(&mut self, r: usize, perm: &[usize]) {
        let m = self.m();
        debug_assert_eq!(perm.len(), m);
        if perm.iter().enumerate().all(|(p, &o)| p == o) {
            return;
        }
        let map = relabel_map(perm);
        let (aw, pw, ew, k) = (self.alpha_width(), self.psi_width(), self.emission_width(), self.k());

        permute_logits(&mut self.alpha_bar[r * aw..(r + 1) * aw], m, perm, &map);
        permute_emission(&mut self.b_bar[r * ew..(r + 1) * ew], k, m, perm);
        if self.is_multilevel() {
            permute_covariances(&mut self.psi[r * pw..(r + 1) * pw], m, perm, &map);
            permute_emission(&mut self.tau[r * ew..(r + 1) * ew], k, m, perm);
            let nn = self.n_individuals();
            for n in 0..nn {
                let a0 = (r * nn + n) * aw;
                permute_logits(&mut self.alpha_ind[a0..a0 + aw], m, perm, &map);
                let e0 = (r * nn + n) * ew;
                permute_emission(&mut self.log_b_ind[e0..e0 + ew], k, m, perm);
            }
        }
        for ps in self.paths.iter_mut().filter(|p| p.iteration == r) {
            let inverse = invert(perm);
            for path in &mut ps.states {
                for s in path.iter_mut() {
                    *s = inverse[*s as usize] as u8;
                }
            }
        }
    }
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (p, &o) in perm.iter().enumerate() {
        inv[o] = p;
    }
    inv
}

/// Linear map taking the logits of old row `perm[p]` to the logits of new row `p`.
///
/// With full logits `β = (0, α)`, new logit `q` is `β[perm[q]] - β[perm[0]]`,
/// so `L[q-1][l-1] = [perm[q] = l] - [perm[0] = l]`.
fn relabel_map(perm: &[usize]) -> Matrix<f64> {
    let d = perm.len() - 1;
    Matrix::from_fn(d, d, |q, l| {
        let l = l + 1;
        (perm[q + 1] == l) as i32 as f64 - (perm[0] == l) as i32 as f64
    })
}

fn apply(map: &Matrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..map.rows()).map(|q| map.row(q).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn permute_logits(block: &mut [f64], m: usize, perm: &[usize], map: &Matrix<f64>) {
    let d = m - 1;
    let old = block.to_vec();
    for p in 0..m {
        let src = &old[perm[p] * d..(perm[p] + 1) * d];
        block[p * d..(p + 1) * d].copy_from_slice(&apply(map, src));
    }
}

fn permute_covariances(block: &mut [f64], m: usize, perm: &[usize], map: &Matrix<f64>) {
    let d = m - 1;
    let old = block.to_vec();
    for p in 0..m {
        let src = &old[perm[p] * d * d..(perm[p] + 1) * d * d];
        // L Ψ Lᵀ
        for a in 0..d {
            for b in 0..d {
                let mut v = 0.0;
                for x in 0..d {
                    for y in 0..d {
                        v += map[(a, x)] * src[x * d + y] * map[(b, y)];
                    }
                }
                block[p * d * d + a * d + b] = v;
            }
        }
    }
}

fn permute_emission(block: &mut [f64], k: usize, m: usize, perm: &[usize]) {
    let old = block.to_vec();
    for kk in 0..k {
        for p in 0..m {
            block[kk * m + p] = old[kk * m + perm[p]];
        }
    }
}

/// Label permutation aligning `current` log-means (`K × M`) with `reference`:
/// new state `p` is old state `perm[p]`.
///
/// Exhaustive search over permutations minimizing total squared distance for
/// `M <= 6`, greedy nearest-pair matching above that.
pub fn match_states(reference: &Matrix<f64>, current: &Matrix<f64>) -> Vec<usize> {
    let m = reference.cols();
    if m <= 6 {
        best_permutation(reference, current)
    } else {
        greedy_match(reference, current)
    }
}

fn cost(reference: &Matrix<f64>, current: &Matrix<f64>, p: usize, o: usize) -> f64 {
    (0..reference.rows()).map(|kk| (reference[(kk, p)] - current[(kk, o)]).powi(2)).sum()
}

fn best_permutation(reference: &Matrix<f64>, current: &Matrix<f64>) -> Vec<usize> {
    let m = reference.cols();
    let costs = Matrix::from_fn(m, m, |p, o| cost(reference, current, p, o));
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = perm.clone();
    let mut best_cost: f64 = (0..m).map(|p| costs[(p, p)]).sum();
    // Heap's algorithm; identity wins ties
    let mut c = vec![0usize; m];
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let total: f64 = (0..m).map(|p| costs[(p, perm[p])]).sum();
            if total < best_cost - 1e-12 {
                best_cost = total;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Greedy nearest-pair matching of states to reference log-means.
pub fn greedy_match(reference: &Matrix<f64>, current: &Matrix<f64>) -> Vec<usize> {
    let m = reference.cols();
    let mut pairs = Vec::with_capacity(m * m);
    for p in 0..m {
        for o in 0..m {
            pairs.push((cost(reference, current, p, o), p, o));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; m];
    let mut used = vec![false; m];
    for (_, p, o) in pairs {
        if perm[p] == usize::MAX && !used[o] {
            perm[p] = o;
            used[o] = true;
        }
    }
    perm
}

/// Relabel every iteration to match `reference` log-means (`K × M`).
pub fn relabel_to(chain: &mut ChainStore, reference: &Matrix<f64>) {
    for r in 0..chain.len() {
        let perm = match_states(reference, &chain.b_bar_at(r));
        chain.permute_iteration(r, &perm);
    }
}

/// Mean group log-means over the kept iterations.
pub fn kept_mean_log_means(chain: &ChainStore) -> Matrix<f64> {
    let kept = chain.kept();
    let n = kept.len().max(1) as f64;
    let w = chain.emission_width();
    let mut acc = vec![0.0; w];
    for r in kept {
        for (a, v) in acc.iter_mut().zip(&chain.b_bar[r * w..(r + 1) * w]) {
            *a += v / n;
        }
    }
    Matrix::from_vec(chain.spec.k_series, chain.spec.m_states, acc).expect("shape")
}

/// Post-hoc relabeling: align every iteration with the last burn-in draw,
/// then once more with the mean of the aligned kept draws, whose states are
/// finally ordered ascending on series 1.
pub fn relabel_chain(chain: &mut ChainStore) {
    if chain.is_empty() {
        return;
    }
    let pivot = chain.burn_in.min(chain.len() - 1);
    let reference = chain.b_bar_at(pivot);
    relabel_to(chain, &reference);
    let mean = kept_mean_log_means(chain);
    let mut order: Vec<usize> = (0..mean.cols()).collect();
    order.sort_by(|&a, &b| mean[(0, a)].total_cmp(&mean[(0, b)]).then(a.cmp(&b)));
    let sorted = Matrix::from_fn(mean.rows(), mean.cols(), |kk, c| mean[(kk, order[c])]);
    relabel_to(chain, &sorted);
}
