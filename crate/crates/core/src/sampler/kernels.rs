//! Random-walk Metropolis building blocks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::model::MONTHS;

/// Gaussian random-walk proposal, stored as the lower Cholesky factor of its
/// covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal<const D: usize> {
    chol: [[f64; D]; D],
}

impl Proposal<1> {
    pub fn scalar(sd: f64) -> Self {
        Self { chol: [[sd]] }
    }
}

impl Proposal<2> {
    /// Equal marginal sds with correlation `corr`.
    pub fn correlated(sd: f64, corr: f64) -> Self {
        debug_assert!(corr.abs() < 1.0);
        Self {
            chol: [[sd, 0.0], [sd * corr, sd * math::sqrt(1.0 - corr * corr)]],
        }
    }
}

impl<const D: usize> Proposal<D> {
    /// Proposal from a full covariance matrix; fails unless it is symmetric
    /// positive definite.
    pub fn from_covariance(cov: [[f64; D]; D]) -> Result<Self> {
        let mut chol = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..=i {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 * (1.0 + cov[i][j].abs()) {
                    return Err(Error::NotPositiveDefinite);
                }
                let mut s = cov[i][j];
                for k in 0..j {
                    s -= chol[i][k] * chol[j][k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite);
                    }
                    chol[i][i] = math::sqrt(s);
                } else {
                    chol[i][j] = s / chol[j][j];
                }
            }
        }
        Ok(Self { chol })
    }

    pub fn draw_step<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; D] {
        let z: [f64; D] = core::array::from_fn(|_| rng.sample(StandardNormal));
        core::array::from_fn(|i| (0..=i).map(|k| self.chol[i][k] * z[k]).sum())
    }
}

/// Metropolis acceptance for a symmetric proposal. Always consumes exactly
/// one uniform so the stream position does not depend on the outcome.
/// Non-finite or NaN proposal targets are rejected.
#[inline]
pub fn metropolis_accept<R: Rng + ?Sized>(rng: &mut R, current: f64, proposed: f64) -> bool {
    let u: f64 = rng.random();
    if proposed.is_nan() || proposed == f64::NEG_INFINITY {
        return false;
    }
    math::ln(u) < proposed - current
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RwmhOutcome<const D: usize> {
    pub value: [f64; D],
    pub log_target: f64,
    pub accepted: bool,
}

/// One random-walk Metropolis update of a parameter block.
///
/// `log_target` is evaluated once, at the proposal; callers pass the current
/// log target so it can be cached between updates.
pub fn rwmh_block<R, F, const D: usize>(
    rng: &mut R,
    current: [f64; D],
    current_log_target: f64,
    proposal: &Proposal<D>,
    mut log_target: F,
) -> RwmhOutcome<D>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64; D]) -> f64,
{
    let step = proposal.draw_step(rng);
    let candidate: [f64; D] = core::array::from_fn(|i| current[i] + step[i]);
    let lt = log_target(&candidate);
    if metropolis_accept(rng, current_log_target, lt) {
        RwmhOutcome {
            value: candidate,
            log_target: lt,
            accepted: true,
        }
    } else {
        RwmhOutcome {
            value: current,
            log_target: current_log_target,
            accepted: false,
        }
    }
}

/// Moves month `j` by `perturbation` and re-centres the whole vector so it
/// still sums to zero.
pub fn recentred_gamma(current: &[f64; MONTHS], j: usize, perturbation: f64) -> [f64; MONTHS] {
    let mut g = *current;
    g[j] += perturbation;
    let m = g.iter().sum::<f64>() / MONTHS as f64;
    for v in g.iter_mut() {
        *v -= m;
    }
    // A second pass removes the rounding residue of the first.
    let r = g.iter().sum::<f64>() / MONTHS as f64;
    for v in g.iter_mut() {
        *v -= r;
    }
    g
}

/// Symmetric proposal for the monthly effects: a normal kick to month `j`
/// followed by re-centring.
pub fn propose_gamma<R: Rng + ?Sized>(
    rng: &mut R,
    current: &[f64; MONTHS],
    j: usize,
    step_sd: f64,
) -> [f64; MONTHS] {
    let z: f64 = rng.sample(StandardNormal);
    recentred_gamma(current, j, step_sd * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use proptest::prelude::*;

    #[test]
    fn flat_target_always_accepts() {
        let mut rng = chain_rng(1, 0);
        let p = Proposal::correlated(3.0, -0.5);
        let mut x = [0.0, 0.0];
        for _ in 0..10_000 {
            let out = rwmh_block(&mut rng, x, 0.0, &p, |_| 0.0);
            assert!(out.accepted);
            x = out.value;
        }
    }

    #[test]
    fn infinite_or_nan_target_is_rejected() {
        let mut rng = chain_rng(2, 0);
        let p = Proposal::scalar(1.0);
        for _ in 0..1000 {
            let out = rwmh_block(&mut rng, [0.5], -1.0, &p, |_| f64::NEG_INFINITY);
            assert!(!out.accepted);
            assert_eq!(out.value, [0.5]);
            let out = rwmh_block(&mut rng, [0.5], -1.0, &p, |_| f64::NAN);
            assert!(!out.accepted);
        }
    }

    #[test]
    fn standard_normal_benchmark() {
        // For a N(0,1) target and N(0, s^2) steps the stationary acceptance
        // rate is (2/pi) atan(2/s).
        let s = 2.4;
        let expected = 2.0 / core::f64::consts::PI * (2.0f64 / s).atan();
        let mut rng = chain_rng(3, 0);
        let p = Proposal::scalar(s);
        let target = |x: &[f64; 1]| -0.5 * x[0] * x[0];
        let mut x = [0.0];
        let mut lt = target(&x);
        let (mut acc, mut sum) = (0usize, 0.0);
        let n = 100_000;
        for _ in 0..n {
            let out = rwmh_block(&mut rng, x, lt, &p, target);
            acc += out.accepted as usize;
            x = out.value;
            lt = out.log_target;
            sum += x[0];
        }
        let rate = acc as f64 / n as f64;
        assert!((rate - expected).abs() < 0.03, "rate {rate} vs {expected}");
        assert!((rate - 0.44).abs() < 0.03);
        assert!((sum / n as f64).abs() < 0.02);
    }

    #[test]
    fn covariance_factorization() {
        let p = Proposal::from_covariance([[4.0, 1.0], [1.0, 2.0]]).unwrap();
        assert_eq!(p.chol[0][0], 2.0);
        assert!((p.chol[1][0] - 0.5).abs() < 1e-15);
        assert!((p.chol[1][1] - 1.75f64.sqrt()).abs() < 1e-15);
        assert!(Proposal::from_covariance([[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(Proposal::from_covariance([[1.0, 0.1], [0.0, 1.0]]).is_err());
        let c = Proposal::correlated(2.0, -0.98);
        let d = Proposal::from_covariance([[4.0, -3.92], [-3.92, 4.0]]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.chol[i][j] - d.chol[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correlated_steps_have_requested_moments() {
        let mut rng = chain_rng(4, 0);
        let p = Proposal::correlated(0.5, -0.98);
        let n = 200_000;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let [a, b] = p.draw_step(&mut rng);
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!((corr + 0.98).abs() < 0.002);
        assert!(((sxx / n as f64).sqrt() - 0.5).abs() < 0.005);
    }

    #[test]
    fn gamma_proposal_examples() {
        let zero = [0.0; MONTHS];
        let g = recentred_gamma(&zero, 0, 1.2);
        assert!((g[0] - 1.1).abs() < 1e-15);
        for v in &g[1..] {
            assert!((v + 0.1).abs() < 1e-15);
        }
        let mut rng = chain_rng(5, 0);
        let mut start = [0.0; MONTHS];
        start[3] = 0.7;
        start[8] = -0.7;
        assert_eq!(propose_gamma(&mut rng, &start, 4, 0.0), start);
    }

    proptest! {
        #[test]
        fn gamma_proposal_stays_on_hyperplane(
            raw in proptest::array::uniform12(-20.0f64..20.0),
            j in 0usize..MONTHS,
            eps in -50.0f64..50.0,
        ) {
            let mut g = raw;
            crate::model::center(&mut g);
            let out = recentred_gamma(&g, j, eps);
            prop_assert!(out.iter().sum::<f64>().abs() < 1e-12);
            // The move is eps * (e_j - 1/12).
            for (k, (&a, &b)) in out.iter().zip(&g).enumerate() {
                let expected = if k == j { eps * 11.0 / 12.0 } else { -eps / 12.0 };
                prop_assert!((a - b - expected).abs() < 1e-9);
            }
        }
    }
}
