//! Conjugate update for a two-coefficient linear regression with known
//! observation variance and independent `N(0, prior_sd^2)` priors.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;

/// Bivariate normal posterior of (intercept, slope).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionPosterior {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// Lower Cholesky factor of `cov`.
    chol: [[f64; 2]; 2],
}

impl RegressionPosterior {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        [
            self.mean[0] + self.chol[0][0] * z0,
            self.mean[1] + self.chol[1][0] * z0 + self.chol[1][1] * z1,
        ]
    }
}

/// Posterior of `y_t = b0 + b1 x_t + e_t`, `e_t ~ N(0, variance)`.
///
/// Precision `X'X / variance + I / prior_sd^2`, mean `precision^-1 X'y / variance`.
pub fn beta_posterior(
    y: &[f64],
    x: &[f64],
    variance: f64,
    prior_sd: f64,
) -> Result<RegressionPosterior> {
    if y.len() != x.len() || y.is_empty() {
        return Err(Error::InvalidArgument(alloc::format!(
            "regression needs matching non-empty data, got {} responses and {} covariates",
            y.len(),
            x.len()
        )));
    }
    if !(variance > 0.0) || !(prior_sd > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "variance {variance} and prior sd {prior_sd} must be positive"
        )));
    }
    let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&yt, &xt) in y.iter().zip(x) {
        sx += xt;
        sxx += xt * xt;
        sy += yt;
        sxy += xt * yt;
    }
    let n = y.len() as f64;
    let ridge = 1.0 / (prior_sd * prior_sd);
    let p00 = n / variance + ridge;
    let p01 = sx / variance;
    let p11 = sxx / variance + ridge;
    let rhs = [sy / variance, sxy / variance];

    // Cholesky of the precision: P = U U', U lower.
    if !(p00 > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let u00 = math::sqrt(p00);
    let u10 = p01 / u00;
    let d = p11 - u10 * u10;
    if !(d > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let u11 = math::sqrt(d);

    // Solve U w = rhs, then U' mean = w.
    let w0 = rhs[0] / u00;
    let w1 = (rhs[1] - u10 * w0) / u11;
    let m1 = w1 / u11;
    let m0 = (w0 - u10 * m1) / u00;

    // cov = (U U')^-1 = U'^-1 U^-1; with V = U^-1 lower-triangular.
    let v00 = 1.0 / u00;
    let v11 = 1.0 / u11;
    let v10 = -u10 * v00 / u11;
    let c00 = v00 * v00 + v10 * v10;
    let c01 = v10 * v11;
    let c11 = v11 * v11;

    let l00 = math::sqrt(c00);
    let l10 = c01 / l00;
    let l11 = math::sqrt((c11 - l10 * l10).max(0.0));

    Ok(RegressionPosterior {
        mean: [m0, m1],
        cov: [[c00, c01], [c01, c11]],
        chol: [[l00, 0.0], [l10, l11]],
    })
}

/// One exact draw of (intercept, slope) from [`beta_posterior`].
pub fn gibbs_beta<R: Rng + ?Sized>(
    rng: &mut R,
    y: &[f64],
    x: &[f64],
    variance: f64,
    prior_sd: f64,
) -> Result<[f64; 2]> {
    Ok(beta_posterior(y, x, variance, prior_sd)?.draw(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn flat_prior_limit_is_least_squares() {
        let post = beta_posterior(&[1.0, 3.0], &[0.0, 1.0], 1.0, 1e6).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-3);
        assert!((post.mean[1] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn zero_response_gives_zero_mean() {
        let post = beta_posterior(&[0.0; 4], &[-1.0, 0.5, 2.0, 3.0], 0.7, 2.0).unwrap();
        assert_eq!(post.mean, [0.0, 0.0]);
    }

    #[test]
    fn three_point_design_closed_form() {
        // y = (1,2,3), x = (-1,0,1), variance 1, prior sd 10: the design is
        // orthogonal so precision is diag(3.01, 2.01), X'y = (6, 2).
        let post = beta_posterior(&[1.0, 2.0, 3.0], &[-1.0, 0.0, 1.0], 1.0, 10.0).unwrap();
        assert!((post.mean[0] - 6.0 / 3.01).abs() < 1e-13);
        assert!((post.mean[1] - 2.0 / 2.01).abs() < 1e-13);
        assert!((post.cov[0][0] - 1.0 / 3.01).abs() < 1e-14);
        assert!((post.cov[1][1] - 1.0 / 2.01).abs() < 1e-14);
        assert!(post.cov[0][1].abs() < 1e-15);

        let mut rng = chain_rng(11, 0);
        let n = 100_000;
        let (mut s0, mut s1) = (0.0, 0.0);
        for _ in 0..n {
            let b = post.draw(&mut rng);
            s0 += b[0];
            s1 += b[1];
        }
        let se0 = (post.cov[0][0] / n as f64).sqrt();
        let se1 = (post.cov[1][1] / n as f64).sqrt();
        assert!((s0 / n as f64 - post.mean[0]).abs() < 3.0 * se0);
        assert!((s1 / n as f64 - post.mean[1]).abs() < 3.0 * se1);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(beta_posterior(&[1.0], &[1.0, 2.0], 1.0, 1.0).is_err());
        assert!(beta_posterior(&[], &[], 1.0, 1.0).is_err());
        assert!(beta_posterior(&[1.0], &[1.0], 0.0, 1.0).is_err());
        assert!(beta_posterior(&[1.0], &[1.0], 1.0, -1.0).is_err());
    }
}
