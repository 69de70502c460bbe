//! Parameterizations, link functions and densities shared by the simulator,
//! the sampler and the decoder.
//!
//! Transition rows are coded with a multinomial logit whose reference category
//! is the first destination state: a row of `M - 1` intercepts maps to
//! `M` probabilities, the first of which has an implicit logit of zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{is_spd, Matrix};
use crate::scalar::{ln_factorial, Scalar};

/// Probabilities below this value are floored before taking logits.
pub const PROB_FLOOR: f64 = 1e-4;

/// Tolerance for row-stochastic checks at precision `T`.
fn simplex_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

/// Model dimensions: `M` states, `K` series, `N` individuals with lengths `T_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub m_states: usize,
    pub k_series: usize,
    pub n_individuals: usize,
    pub lengths: Vec<usize>,
}

impl ModelSpec {
    pub fn new(m_states: usize, k_series: usize, lengths: Vec<usize>) -> Result<Self> {
        let spec = Self { m_states, k_series, n_individuals: lengths.len(), lengths };
        spec.validate()?;
        Ok(spec)
    }

    /// Balanced design: `n` individuals of equal length `t_len`.
    pub fn balanced(m_states: usize, k_series: usize, n: usize, t_len: usize) -> Result<Self> {
        Self::new(m_states, k_series, vec![t_len; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_states < 2 {
            return Err(Error::Config(format!("need at least 2 states, got {}", self.m_states)));
        }
        if self.k_series < 1 {
            return Err(Error::Config("need at least 1 series".into()));
        }
        if self.n_individuals < 1 || self.lengths.len() != self.n_individuals {
            return Err(Error::Config(format!(
                "{} individuals declared, {} lengths given",
                self.n_individuals,
                self.lengths.len()
            )));
        }
        if let Some(n) = self.lengths.iter().position(|&t| t < 2) {
            return Err(Error::Config(format!("individual {n} has fewer than 2 occasions")));
        }
        Ok(())
    }
}

/// Map `M - 1` logits to an `M`-probability row (first destination is the reference).
///
/// Shifted by the running maximum so large logits do not overflow.
pub fn logit_to_probs<T: Scalar>(row: &[T]) -> Result<Vec<T>> {
    if let Some(x) = row.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite logit {x}")));
    }
    let max = row.iter().copied().fold(T::zero(), T::max);
    let mut out = Vec::with_capacity(row.len() + 1);
    out.push((-max).exp());
    out.extend(row.iter().map(|&x| (x - max).exp()));
    let total: T = out.iter().copied().sum();
    for p in &mut out {
        *p = *p / total;
    }
    Ok(out)
}

/// Inverse of [`logit_to_probs`]: `ln(p_j / p_1)` for `j = 2..M`.
///
/// Non-reference entries below `floor` are raised to `floor` first (the row is
/// implicitly renormalized; logits are invariant to the common scale).
pub fn probs_to_logit<T: Scalar>(row: &[T], floor: T) -> Result<Vec<T>> {
    if row.len() < 2 {
        return Err(Error::InvalidParameter("probability row needs at least 2 entries".into()));
    }
    if row.iter().any(|&p| !p.is_finite() || p < T::zero() || p > T::one()) {
        return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
    }
    let total: T = row.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-8).max(T::epsilon() * T::lit(64.0)) {
        return Err(Error::InvalidParameter(format!("probability row sums to {total}")));
    }
    let reference = row[0];
    if reference <= T::zero() {
        return Err(Error::SingularLink);
    }
    Ok(row[1..].iter().map(|&p| (p.max(floor) / reference).ln()).collect())
}

/// Poisson log-probability `q ln λ - λ - ln Γ(q + 1)`.
pub fn poisson_log_pmf<T: Scalar>(q: u64, lambda: T) -> Result<T> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("Poisson mean must be positive, got {lambda}")));
    }
    let qf = T::lit(q as f64);
    Ok(qf * lambda.ln() - lambda - ln_factorial::<T>(q))
}

/// Joint log-probability of `K` conditionally independent Poisson counts.
pub fn emission_log_likelihood<T: Scalar>(obs_t: &[u64], means: &[T]) -> Result<T> {
    if obs_t.len() != means.len() {
        return Err(Error::InvalidParameter(format!(
            "{} counts but {} means",
            obs_t.len(),
            means.len()
        )));
    }
    obs_t.iter().zip(means).try_fold(T::zero(), |acc, (&q, &l)| Ok(acc + poisson_log_pmf(q, l)?))
}

/// `M × (M-1)` multinomial-logit intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLogits<T>(Matrix<T>);

impl<T: Scalar> TransitionLogits<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.cols() + 1 != m.rows() {
            return Err(Error::InvalidParameter(format!(
                "transition logits must be M x (M-1), got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidParameter("non-finite transition logit".into()));
        }
        Ok(Self(m))
    }

    pub fn zeros(m_states: usize) -> Self {
        Self(Matrix::filled(m_states, m_states - 1, T::zero()))
    }

    pub fn m_states(&self) -> usize {
        self.0.rows()
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.0.row(i)
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        self.0.row_mut(i)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn to_tpm(&self) -> Result<TransitionMatrix<T>> {
        let m = self.m_states();
        let mut probs = Matrix::filled(m, m, T::zero());
        for i in 0..m {
            probs.row_mut(i).copy_from_slice(&logit_to_probs(self.row(i))?);
        }
        Ok(TransitionMatrix(probs))
    }
}

/// Row-stochastic `M × M` matrix with entries `a_ij = P(S_t = j | S_{t-1} = i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix<T>(Matrix<T>);

impl<T: Scalar> TransitionMatrix<T> {
    pub fn new(probs: Matrix<T>) -> Result<Self> {
        if probs.rows() != probs.cols() || probs.rows() < 2 {
            return Err(Error::InvalidParameter("transition matrix must be square, M >= 2".into()));
        }
        for i in 0..probs.rows() {
            let row = probs.row(i);
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::InvalidParameter(format!("row {i} has entries outside [0, 1]")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > simplex_tol::<T>() {
                return Err(Error::InvalidParameter(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self(probs))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn m_states(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    /// Logit intercepts with zero-probability cells floored at `floor`.
    pub fn to_logits(&self, floor: T) -> Result<TransitionLogits<T>> {
        let m = self.m_states();
        let mut out = Matrix::filled(m, m - 1, T::zero());
        for i in 0..m {
            out.row_mut(i).copy_from_slice(&probs_to_logit(self.row(i), floor)?);
        }
        TransitionLogits::new(out)
    }
}

/// `K × M` Poisson log-means `ln b_ki`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionParams<T> {
    log_means: Matrix<T>,
}

impl<T: Scalar> EmissionParams<T> {
    pub fn new(log_means: Matrix<T>) -> Result<Self> {
        if !log_means.is_finite() {
            return Err(Error::InvalidParameter("non-finite emission log-mean".into()));
        }
        Ok(Self { log_means })
    }

    pub fn from_means(means: Matrix<T>) -> Result<Self> {
        if means.as_slice().iter().any(|&b| !(b > T::zero())) {
            return Err(Error::InvalidParameter("Poisson means must be positive".into()));
        }
        Self::new(means.map(|b| b.ln()))
    }

    pub fn k_series(&self) -> usize {
        self.log_means.rows()
    }

    pub fn m_states(&self) -> usize {
        self.log_means.cols()
    }

    pub fn log_means(&self) -> &Matrix<T> {
        &self.log_means
    }

    pub fn log_means_mut(&mut self) -> &mut Matrix<T> {
        &mut self.log_means
    }

    #[inline]
    pub fn mean(&self, k: usize, i: usize) -> T {
        self.log_means[(k, i)].exp()
    }

    pub fn means(&self) -> Matrix<T> {
        self.log_means.map(|x| x.exp())
    }

    /// Means of all series in state `i`.
    pub fn state_means(&self, i: usize) -> Vec<T> {
        (0..self.k_series()).map(|k| self.mean(k, i)).collect()
    }
}

/// Initial state distribution `π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution<T>(Vec<T>);

impl<T: Scalar> InitialDistribution<T> {
    pub fn new(pi: Vec<T>) -> Result<Self> {
        if pi.len() < 2 || pi.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(Error::InvalidParameter("initial distribution must be a probability vector".into()));
        }
        let s: T = pi.iter().copied().sum();
        if (s - T::one()).abs() > simplex_tol::<T>() {
            return Err(Error::InvalidParameter(format!("initial distribution sums to {s}")));
        }
        Ok(Self(pi))
    }

    pub fn uniform(m_states: usize) -> Self {
        Self(vec![T::one() / T::lit(m_states as f64); m_states])
    }

    /// All mass on state `i` (0-based).
    pub fn point(m_states: usize, i: usize) -> Self {
        let mut pi = vec![T::zero(); m_states];
        pi[i] = T::one();
        Self(pi)
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn m_states(&self) -> usize {
        self.0.len()
    }
}

/// Parameters of one individual: logit intercepts, the derived TPM and Poisson log-means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualParams<T> {
    alpha: TransitionLogits<T>,
    tpm: TransitionMatrix<T>,
    emission: EmissionParams<T>,
}

impl<T: Scalar> IndividualParams<T> {
    pub fn new(alpha: TransitionLogits<T>, emission: EmissionParams<T>) -> Result<Self> {
        if alpha.m_states() != emission.m_states() {
            return Err(Error::InvalidParameter(format!(
                "transition has {} states, emission {}",
                alpha.m_states(),
                emission.m_states()
            )));
        }
        let tpm = alpha.to_tpm()?;
        Ok(Self { alpha, tpm, emission })
    }

    pub fn alpha(&self) -> &TransitionLogits<T> {
        &self.alpha
    }

    pub fn tpm(&self) -> &TransitionMatrix<T> {
        &self.tpm
    }

    pub fn emission(&self) -> &EmissionParams<T> {
        &self.emission
    }

    pub fn m_states(&self) -> usize {
        self.alpha.m_states()
    }

    pub fn k_series(&self) -> usize {
        self.emission.k_series()
    }
}

/// Group-level parameters: mean intercepts `ᾱ`, per-state covariances `Ψ_i`,
/// emission log-means `b̄` and between-individual variances `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParams<T> {
    pub alpha_bar: TransitionLogits<T>,
    pub psi: Vec<Matrix<T>>,
    pub b_bar: Matrix<T>,
    pub tau: Matrix<T>,
}

impl<T: Scalar> GroupParams<T> {
    pub fn m_states(&self) -> usize {
        self.alpha_bar.m_states()
    }

    pub fn k_series(&self) -> usize {
        self.b_bar.rows()
    }

    fn check_shapes(&self) -> Result<()> {
        let m = self.m_states();
        let k = self.k_series();
        if self.psi.len() != m || self.psi.iter().any(|p| p.rows() != m - 1 || p.cols() != m - 1) {
            return Err(Error::InvalidParameter("psi must hold M matrices of size (M-1)x(M-1)".into()));
        }
        if self.b_bar.cols() != m || self.tau.rows() != k || self.tau.cols() != m {
            return Err(Error::InvalidParameter("b_bar and tau must be K x M".into()));
        }
        if !self.b_bar.is_finite() {
            return Err(Error::InvalidParameter("non-finite b_bar".into()));
        }
        Ok(())
    }

    /// Posterior-state invariants: every `Ψ_i` SPD and every `τ_ki > 0`.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        if let Some(i) = self.psi.iter().position(|p| !is_spd(p)) {
            return Err(Error::Covariance(format!("psi[{i}] is not positive definite")));
        }
        if self.tau.as_slice().iter().any(|&t| !(t > T::zero()) || !t.is_finite()) {
            return Err(Error::InvalidParameter("tau entries must be positive".into()));
        }
        Ok(())
    }

    /// Generating-parameter invariants: zero variance components are allowed.
    pub fn validate_generating(&self) -> Result<()> {
        self.check_shapes()?;
        for (i, p) in self.psi.iter().enumerate() {
            crate::matrix::psd_sqrt(&p.to_nalgebra())
                .map_err(|e| Error::Covariance(format!("psi[{i}]: {e}")))?;
        }
        if self.tau.as_slice().iter().any(|&t| !(t >= T::zero()) || !t.is_finite()) {
            return Err(Error::InvalidParameter("tau entries must be non-negative".into()));
        }
        Ok(())
    }

    /// Individual parameters sitting exactly at the group means.
    pub fn at_mean(&self) -> Result<IndividualParams<T>> {
        IndividualParams::new(self.alpha_bar.clone(), EmissionParams::new(self.b_bar.clone())?)
    }
}

/// Hyper-parameters of the group-level priors.
///
/// `ᾱ_i ~ N(m0_i, Ψ_i / k0)`, `Ψ_i ~ IW(psi0, df0)`, `b̄_ki ~ N(l0_ki, tau0_ki)`,
/// `τ_ki ~ IG(c_ki, d_ki)`. The single-level model reuses `m0`/`psi0` as the
/// prior on its shared intercepts and `l0`/`tau0` as the prior on its log-means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub m0: Matrix<f64>,
    pub k0: f64,
    pub psi0: Matrix<f64>,
    pub df0: f64,
    pub l0: Matrix<f64>,
    pub tau0: Matrix<f64>,
    pub c: Matrix<f64>,
    pub d: Matrix<f64>,
}

impl HyperPriors {
    /// Weak defaults: `m0 = 0`, `k0 = 1`, `psi0 = I`, `df0 = (M-1) + 3`,
    /// `l0 = ln(mean count of series k)`, `tau0 = 4`, `c = d = 0.01`.
    pub fn weak(m_states: usize, series_means: &[f64]) -> Self {
        let m = m_states;
        let k = series_means.len();
        let l0 = Matrix::from_fn(k, m, |kk, _| series_means[kk].max(1e-3).ln());
        Self {
            m0: Matrix::filled(m, m - 1, 0.0),
            k0: 1.0,
            psi0: Matrix::identity(m - 1),
            df0: (m - 1) as f64 + 3.0,
            l0,
            tau0: Matrix::filled(k, m, 4.0),
            c: Matrix::filled(k, m, 0.01),
            d: Matrix::filled(k, m, 0.01),
        }
    }

    pub fn m_states(&self) -> usize {
        self.m0.rows()
    }

    pub fn k_series(&self) -> usize {
        self.l0.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m0.rows();
        let k = self.l0.rows();
        if m < 2 || self.m0.cols() != m - 1 {
            return Err(Error::Config("m0 must be M x (M-1)".into()));
        }
        if self.psi0.rows() != m - 1 || self.psi0.cols() != m - 1 {
            return Err(Error::Config("psi0 must be (M-1) x (M-1)".into()));
        }
        for (name, mat) in [("l0", &self.l0), ("tau0", &self.tau0), ("c", &self.c), ("d", &self.d)] {
            if mat.rows() != k || mat.cols() != m {
                return Err(Error::Config(format!("{name} must be K x M")));
            }
        }
        if !(self.k0 > 0.0) {
            return Err(Error::Config("k0 must be positive".into()));
        }
        if !(self.df0 >= (m - 1) as f64) {
            return Err(Error::Config(format!("df0 must be at least M-1 = {}", m - 1)));
        }
        if !is_spd(&self.psi0) {
            return Err(Error::Config("psi0 must be symmetric positive definite".into()));
        }
        for (name, mat) in [("tau0", &self.tau0), ("c", &self.c), ("d", &self.d)] {
            if mat.as_slice().iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config(format!("{name} entries must be positive")));
            }
        }
        if !self.m0.is_finite() || !self.l0.is_finite() {
            return Err(Error::Config("non-finite prior mean".into()));
        }
        Ok(())
    }
}
