//! Asymmetric Laplace distribution: check loss, density, distribution
//! function and the normal-exponential mixture constants.
//!
//! The parameterization has location `mu` equal to the `tau`-th quantile and
//! scale `sigma`:
//!
//! ```text
//! f(y | mu, sigma, tau) = tau (1 - tau) / sigma * exp(-rho_tau((y - mu) / sigma))
//! rho_tau(u)            = u (tau - 1{u < 0})
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantile level in the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidParameter(format!(
                "quantile level must lie strictly between 0 and 1, got {tau}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QuantileLevel {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        Self::new(tau)
    }
}

impl From<QuantileLevel> for f64 {
    fn from(q: QuantileLevel) -> f64 {
        q.0
    }
}

impl std::fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AldParams {
    pub mu: f64,
    pub sigma: f64,
    pub tau: QuantileLevel,
}

impl AldParams {
    pub fn new(mu: f64, sigma: f64, tau: QuantileLevel) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ALD scale must be positive and finite, got {sigma}"
            )));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ALD location must be finite, got {mu}"
            )));
        }
        Ok(Self { mu, sigma, tau })
    }
}

/// Constants of the representation `Y = mu + theta v + sqrt(psi2 sigma v) Z`
/// with `v` exponential of mean `sigma` and `Z` standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureConstants {
    pub theta: f64,
    pub psi2: f64,
}

pub fn check_loss(u: f64, tau: QuantileLevel) -> f64 {
    let tau = tau.get();
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

pub fn ald_logpdf(y: f64, p: &AldParams) -> f64 {
    let tau = p.tau.get();
    (tau * (1.0 - tau) / p.sigma).ln() - check_loss((y - p.mu) / p.sigma, p.tau)
}

/// `F(0; mu, sigma, tau)`, the probability that an ALD draw is at or below zero.
pub fn ald_cdf_at_zero(mu: f64, sigma: f64, tau: QuantileLevel) -> f64 {
    let tau = tau.get();
    if mu >= 0.0 {
        tau * (-(1.0 - tau) * mu / sigma).exp()
    } else {
        1.0 - (1.0 - tau) * (tau * mu / sigma).exp()
    }
}

pub fn ald_cdf(y: f64, p: &AldParams) -> f64 {
    ald_cdf_at_zero(p.mu - y, p.sigma, p.tau)
}

/// Inverse of [`ald_cdf`] for `u` in (0, 1).
pub fn ald_quantile(u: f64, p: &AldParams) -> f64 {
    let tau = p.tau.get();
    if u <= tau {
        p.mu + p.sigma / (1.0 - tau) * (u / tau).ln()
    } else {
        p.mu - p.sigma / tau * ((1.0 - u) / (1.0 - tau)).ln()
    }
}

pub fn mixture_constants(tau: QuantileLevel) -> MixtureConstants {
    let tau = tau.get();
    let denom = tau * (1.0 - tau);
    MixtureConstants {
        theta: (1.0 - 2.0 * tau) / denom,
        psi2: 2.0 / denom,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(tau: f64) -> QuantileLevel {
        QuantileLevel::new(tau).unwrap()
    }

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }

    fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        adaptive(f, a, m, left, tol / 2.0, depth - 1) + adaptive(f, m, b, right, tol / 2.0, depth - 1)
    }

    fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        adaptive(f, a, b, simpson(f, a, b), 1e-13, 50)
    }

    #[test]
    fn quantile_level_rejects_boundary() {
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
        assert!(QuantileLevel::new(0.5).is_ok());
        assert!(serde_json::from_str::<QuantileLevel>("1.5").is_err());
    }

    #[test]
    fn check_loss_examples() {
        assert_eq!(check_loss(0.0, q(0.3)), 0.0);
        assert_eq!(check_loss(2.0, q(0.5)), 1.0);
        assert_eq!(check_loss(-1.0, q(0.25)), 0.75);
    }

    #[test]
    fn logpdf_examples() {
        let p = AldParams::new(0.0, 1.0, q(0.5)).unwrap();
        assert!((ald_logpdf(0.0, &p) - 0.25f64.ln()).abs() < 1e-15);
        assert!((ald_logpdf(1.0, &p) - (0.25f64.ln() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        let p = AldParams::new(0.0, 1.0, q(0.3)).unwrap();
        let f = |y: f64| ald_logpdf(y, &p).exp();
        let total = integrate(&f, -50.0, 0.0) + integrate(&f, 0.0, 50.0);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn cdf_at_zero_examples() {
        assert!((ald_cdf_at_zero(0.0, 1.0, q(0.3)) - 0.3).abs() < 1e-15);
        assert!((ald_cdf_at_zero(1.0, 1.0, q(0.5)) - 0.303_265_329_856_316_7).abs() < 1e-12);
        assert!((ald_cdf_at_zero(-1.0, 1.0, q(0.5)) - 0.696_734_670_143_683_3).abs() < 1e-12);
    }

    #[test]
    fn cdf_consistency() {
        let p = AldParams::new(0.7, 1.3, q(0.2)).unwrap();
        assert!((ald_cdf(p.mu, &p) - 0.2).abs() < 1e-15);
        assert_eq!(ald_cdf(0.0, &p), ald_cdf_at_zero(0.7, 1.3, q(0.2)));
    }

    #[test]
    fn cdf_matches_quadrature() {
        let p = AldParams::new(0.4, 0.8, q(0.35)).unwrap();
        let f = |y: f64| ald_logpdf(y, &p).exp();
        let lower = -60.0;
        for i in 0..20 {
            let y = -4.0 + 0.4 * i as f64;
            // split at the kink
            let numeric = if y <= p.mu {
                integrate(&f, lower, y)
            } else {
                integrate(&f, lower, p.mu) + integrate(&f, p.mu, y)
            };
            assert!((numeric - ald_cdf(y, &p)).abs() < 1e-8, "y={y}");
        }
    }

    #[test]
    fn cdf_derivative_is_density() {
        let p = AldParams::new(-0.3, 1.7, q(0.8)).unwrap();
        let h = 1e-6;
        for i in 0..41 {
            let y = -6.0 + 0.3 * i as f64 + 0.0123;
            let fd = (ald_cdf(y + h, &p) - ald_cdf(y - h, &p)) / (2.0 * h);
            assert!((fd - ald_logpdf(y, &p).exp()).abs() < 1e-6, "y={y}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let p = AldParams::new(1.2, 0.5, q(0.65)).unwrap();
        for i in 1..100 {
            let u = i as f64 / 100.0;
            assert!((ald_cdf(ald_quantile(u, &p), &p) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_constant_examples() {
        let c = mixture_constants(q(0.5));
        assert_eq!(c.theta, 0.0);
        assert_eq!(c.psi2, 8.0);
        let c = mixture_constants(q(0.25));
        assert!((c.theta - 8.0 / 3.0).abs() < 1e-14);
        assert!((c.psi2 - 32.0 / 3.0).abs() < 1e-14);
        let c = mixture_constants(q(0.75));
        assert!((c.theta + 8.0 / 3.0).abs() < 1e-14);
        assert!((c.psi2 - 32.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cdf_at_zero_increasing_in_tau() {
        for mu in -3..=3 {
            for sigma in [0.5, 1.0, 2.0] {
                let mut prev = 0.0;
                for t in 1..=19 {
                    let f0 = ald_cdf_at_zero(mu as f64, sigma, q(t as f64 * 0.05));
                    assert!(f0 > prev, "mu={mu} sigma={sigma} tau={}", t as f64 * 0.05);
                    prev = f0;
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn mixture_constant_symmetry(tau in 0.001f64..0.999) {
            let a = mixture_constants(q(tau));
            let b = mixture_constants(q(1.0 - tau));
            proptest::prop_assert!((a.theta + b.theta).abs() < 1e-9 * a.theta.abs().max(1.0));
            proptest::prop_assert!((a.psi2 - b.psi2).abs() < 1e-9 * a.psi2);
            proptest::prop_assert!(a.psi2 > 0.0);
        }

        #[test]
        fn check_loss_nonnegative(u in -1e6f64..1e6, tau in 0.001f64..0.999) {
            let l = check_loss(u, q(tau));
            proptest::prop_assert!(l >= 0.0);
            proptest::prop_assert_eq!(l == 0.0, u == 0.0);
        }

        #[test]
        fn cdf_monotone(y in -20f64..20.0, dy in 0f64..5.0, mu in -5f64..5.0, s in 0.1f64..5.0, tau in 0.01f64..0.99) {
            let p = AldParams::new(mu, s, q(tau)).unwrap();
            let a = ald_cdf(y, &p);
            let b = ald_cdf(y + dy, &p);
            proptest::prop_assert!(a <= b + 1e-15);
            proptest::prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
