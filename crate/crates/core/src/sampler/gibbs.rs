//! Conjugate group-level updates.
//!
//! Transition intercepts: Normal-Inverse-Wishart on `(ᾱ_i, Ψ_i)` given the
//! individual rows `α_ni`. Emission log-means: `τ_ki | b̄_ki` inverse gamma,
//! then `b̄_ki | τ_ki` normal.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{cholesky, Matrix};
use crate::scalar::ln_gamma;

/// Draw from `IW(scale, df)` (mean `scale / (df - p - 1)`) by the Bartlett decomposition.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(scale: &DMatrix<f64>, df: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if !(df > (p as f64) - 1.0) {
        return Err(Error::Covariance(format!("inverse Wishart needs df > {}, got {df}", p as f64 - 1.0)));
    }
    let precision = scale
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Covariance("singular inverse Wishart scale".into()))?;
    let precision = (&precision + precision.transpose()) * 0.5;
    let l = cholesky(&precision)?;
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).expect("positive degrees of freedom");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    // W = (L A)(L A)ᵀ ~ Wishart(scale⁻¹, df); return W⁻¹
    let la = &l * &a;
    let la_inv = la
        .try_inverse()
        .ok_or_else(|| Error::Covariance("degenerate Wishart draw".into()))?;
    let psi = la_inv.transpose() * la_inv;
    Ok((&psi + psi.transpose()) * 0.5)
}

/// Log-density of `IW(scale, df)` at `x`.
pub fn inverse_wishart_log_pdf(x: &DMatrix<f64>, scale: &DMatrix<f64>, df: f64) -> f64 {
    let p = x.nrows() as f64;
    let Some(cx) = x.clone().cholesky() else {
        return f64::NEG_INFINITY;
    };
    let Some(cs) = scale.clone().cholesky() else {
        return f64::NEG_INFINITY;
    };
    let log_det_x: f64 = 2.0 * cx.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_det_s: f64 = 2.0 * cs.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = (scale * cx.inverse()).trace();
    let mut log_gamma_p = p * (p - 1.0) / 4.0 * std::f64::consts::PI.ln();
    for j in 0..x.nrows() {
        log_gamma_p += ln_gamma(df / 2.0 - j as f64 / 2.0);
    }
    0.5 * df * log_det_s - 0.5 * df * p * 2f64.ln() - log_gamma_p - 0.5 * (df + p + 1.0) * log_det_x - 0.5 * trace
}

/// Full-conditional Normal-Inverse-Wishart for one state's `(ᾱ_i, Ψ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwPosterior {
    pub mean: DVector<f64>,
    pub kappa: f64,
    pub scale: DMatrix<f64>,
    pub df: f64,
}

impl NiwPosterior {
    /// Condition the prior `ᾱ ~ N(m0, Ψ/k0)`, `Ψ ~ IW(psi0, df0)` on rows `α_n`.
    pub fn from_rows(rows: &[&[f64]], m0: &[f64], k0: f64, psi0: &Matrix<f64>, df0: f64) -> Self {
        let d = m0.len();
        let n = rows.len() as f64;
        let m0 = DVector::from_column_slice(m0);
        if rows.is_empty() {
            return Self { mean: m0, kappa: k0, scale: psi0.to_nalgebra(), df: df0 };
        }
        let mut xbar = DVector::<f64>::zeros(d);
        for r in rows {
            xbar += DVector::from_column_slice(r);
        }
        xbar /= n;
        let mut scatter = DMatrix::<f64>::zeros(d, d);
        for r in rows {
            let c = DVector::from_column_slice(r) - &xbar;
            scatter += &c * c.transpose();
        }
        let kappa = k0 + n;
        let diff = &xbar - &m0;
        let scale = psi0.to_nalgebra() + scatter + (&diff * diff.transpose()) * (k0 * n / kappa);
        let mean = (&m0 * k0 + &xbar * n) / kappa;
        Self { mean, kappa, scale: (&scale + scale.transpose()) * 0.5, df: df0 + n }
    }

    /// Draw `Ψ ~ IW(scale, df)`, then `ᾱ | Ψ ~ N(mean, Ψ / kappa)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let psi = sample_inverse_wishart(&self.scale, self.df, rng)?;
        let l = cholesky(&psi)?;
        let z = DVector::from_iterator(psi.nrows(), (0..psi.nrows()).map(|_| StandardNormal.sample(rng)));
        let mean = &self.mean + (l * z) / self.kappa.sqrt();
        Ok((mean.iter().copied().collect(), psi))
    }

    /// Joint log-density at `(alpha_bar, psi)`.
    pub fn log_pdf(&self, alpha_bar: &[f64], psi: &DMatrix<f64>) -> f64 {
        let Ok(l) = cholesky(&(psi / self.kappa)) else {
            return f64::NEG_INFINITY;
        };
        let mean: Vec<f64> = self.mean.iter().copied().collect();
        crate::matrix::mvn_log_pdf(alpha_bar, &mean, &l) + inverse_wishart_log_pdf(psi, &self.scale, self.df)
    }
}

/// One state's transition group update from the `N` individual rows.
pub fn gibbs_update_transition_group<R: Rng + ?Sized>(
    rows: &[&[f64]],
    m0: &[f64],
    k0: f64,
    psi0: &Matrix<f64>,
    df0: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Matrix<f64>)> {
    let post = NiwPosterior::from_rows(rows, m0, k0, psi0, df0);
    let (mean, psi) = post.sample(rng)?;
    Ok((mean, Matrix::from_nalgebra(&psi)))
}

/// Inverse-gamma full conditional of `τ_ki` given `b̄_ki`: `(shape, rate)`.
pub fn tau_conditional(log_b: &[f64], b_bar: f64, c: f64, d: f64) -> (f64, f64) {
    let ss: f64 = log_b.iter().map(|x| (x - b_bar).powi(2)).sum();
    (c + log_b.len() as f64 / 2.0, d + 0.5 * ss)
}

/// Normal full conditional of `b̄_ki` given `τ_ki`: `(mean, variance)`.
pub fn b_bar_conditional(log_b: &[f64], tau: f64, l0: f64, tau0: f64) -> (f64, f64) {
    let n = log_b.len() as f64;
    let sum: f64 = log_b.iter().sum();
    let precision = 1.0 / tau0 + n / tau;
    ((l0 / tau0 + sum / tau) / precision, 1.0 / precision)
}

pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng);
    1.0 / g
}

pub fn inverse_gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
}

/// One `(k, i)` emission group update: `τ` from its conditional on the current
/// `b̄`, then `b̄` conditional on the fresh `τ`.
pub fn gibbs_update_emission_group<R: Rng + ?Sized>(
    log_b: &[f64],
    b_bar: f64,
    l0: f64,
    tau0: f64,
    c: f64,
    d: f64,
    rng: &mut R,
) -> (f64, f64) {
    let (shape, rate) = tau_conditional(log_b, b_bar, c, d);
    let tau = sample_inverse_gamma(shape, rate, rng);
    let (mean, var) = b_bar_conditional(log_b, tau, l0, tau0);
    let z: f64 = StandardNormal.sample(rng);
    (mean + var.sqrt() * z, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn empty_data_returns_prior() {
        let psi0 = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let post = NiwPosterior::from_rows(&[], &[0.5, -1.0], 2.0, &psi0, 5.0);
        assert_eq!(post.kappa, 2.0);
        assert_eq!(post.df, 5.0);
        assert_eq!(post.scale, psi0.to_nalgebra());
        let (shape, rate) = tau_conditional(&[], 0.0, 0.3, 0.7);
        assert_eq!((shape, rate), (0.3, 0.7));
        let (mean, var) = b_bar_conditional(&[], 1.0, 2.0, 3.0);
        assert_eq!((mean, var), (2.0, 3.0));
    }

    #[test]
    fn equal_log_means_have_zero_scatter() {
        let (shape, rate) = tau_conditional(&[1.5; 8], 1.5, 0.01, 0.02);
        assert_eq!(shape, 0.01 + 4.0);
        assert_eq!(rate, 0.02);
    }

    #[test]
    fn inverse_wishart_mean_matches() {
        let scale = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let df = 8.0;
        let mut rng = substream(5, 0, 0);
        let n = 40_000;
        let mut acc = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            acc += sample_inverse_wishart(&scale, df, &mut rng).unwrap();
        }
        let mean = acc / n as f64;
        let want = &scale / (df - 3.0);
        assert!((mean - want).amax() < 0.02);
    }

    #[test]
    fn inverse_wishart_1d_matches_inverse_gamma_density() {
        let s = DMatrix::from_element(1, 1, 1.7);
        for &x in &[0.1, 0.5, 2.0] {
            let a = inverse_wishart_log_pdf(&DMatrix::from_element(1, 1, x), &s, 6.0);
            let b = inverse_gamma_log_pdf(x, 3.0, 0.85);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn emission_update_moments() {
        // many replicate draws of b̄ given a fixed large τ equal the conditional moments
        let data = [0.2, 0.9, 1.4, 0.7];
        let mut rng = substream(9, 0, 0);
        let n = 100_000;
        let mut taus = Vec::with_capacity(n);
        for _ in 0..n {
            taus.push(gibbs_update_emission_group(&data, 0.8, 0.0, 4.0, 2.0, 1.0, &mut rng).1);
        }
        let (shape, rate) = tau_conditional(&data, 0.8, 2.0, 1.0);
        let mean = taus.iter().sum::<f64>() / n as f64;
        let want = rate / (shape - 1.0);
        let sd = (rate * rate / ((shape - 1.0).powi(2) * (shape - 2.0))).sqrt();
        assert!((mean - want).abs() < 4.0 * sd / (n as f64).sqrt(), "{mean} vs {want}");
    }
}
