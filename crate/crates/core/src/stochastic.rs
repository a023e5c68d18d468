//! Seedable random variate generation for every law the sampler draws from.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::ald::{ald_quantile, AldParams};
use crate::error::{Error, Result};

/// A ChaCha8 keystream selected by `(seed, stream_id)`.
///
/// Streams sharing a seed but differing in `stream_id` use disjoint
/// keystreams, so chains and replications never overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Parameters of the GIG law with index 1/2,
/// density proportional to `v^{-1/2} exp(-(delta^2 / v + xi^2 v) / 2)` on `v > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigHalfParams {
    pub delta: f64,
    pub xi: f64,
}

impl GigHalfParams {
    pub fn new(delta: f64, xi: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("GIG delta must be >= 0, got {delta}")));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::InvalidParameter(format!("GIG xi must be > 0, got {xi}")));
        }
        Ok(Self { delta, xi })
    }
}

#[inline]
pub fn draw_std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Multivariate normal draw through the Cholesky factor of `cov`.
pub fn draw_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("covariance".into()))?;
    Ok(draw_mvn_factor(mean, &chol.l(), rng))
}

/// `mean + L z` with `z` standard normal, for a precomputed lower factor `L`.
pub fn draw_mvn_factor<R: Rng + ?Sized>(mean: &DVector<f64>, lower: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| draw_std_normal(rng));
    mean + lower * z
}

#[inline]
pub fn draw_exponential_mean<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e * mean
}

fn draw_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, scale)
        .expect("gamma parameters validated by caller")
        .sample(rng)
}

/// Inverse gamma with density proportional to `x^{-shape-1} exp(-scale / x)`.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0 && scale > 0.0);
    scale / draw_gamma(shape, 1.0, rng)
}

#[inline]
pub fn draw_bernoulli<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> bool {
    if prob <= 0.0 {
        false
    } else if prob >= 1.0 {
        true
    } else {
        rng.random::<f64>() < prob
    }
}

const GIG_LAMBDA: f64 = 0.5;

/// GIG(1/2) draw. `delta = 0` is the gamma(1/2, rate xi^2/2) limit.
pub fn draw_gig_half<R: Rng + ?Sized>(p: GigHalfParams, rng: &mut R) -> f64 {
    let omega = p.delta * p.xi;
    if p.delta == 0.0 || omega < 1e-100 {
        return draw_gamma(GIG_LAMBDA, 2.0 / (p.xi * p.xi), rng);
    }
    // v = (delta / xi) * y with y ~ GIG(lambda, omega, omega)
    let y = if omega < 0.5 {
        gig_small_omega(GIG_LAMBDA, omega, rng)
    } else {
        gig_rou_mode_shift(GIG_LAMBDA, omega, rng)
    };
    p.delta / p.xi * y
}

/// Log of the unnormalized standardized GIG density
/// `x^{lambda-1} exp(-omega (x + 1/x) / 2)`.
#[inline]
fn gig_log_kernel(lambda: f64, omega: f64, x: f64) -> f64 {
    (lambda - 1.0) * x.ln() - 0.5 * omega * (x + 1.0 / x)
}

/// Rejection from a three-piece hat (constant, power, exponential).
/// Valid for `0 <= lambda < 1`; efficient when `omega` is small.
fn gig_small_omega<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    debug_assert!((0.0..1.0).contains(&lambda));
    let one_m = 1.0 - lambda;
    let mode = omega / (one_m + (one_m * one_m + omega * omega).sqrt());
    let x0 = omega / one_m;
    let xs = x0.max(2.0 / omega);

    let k1 = gig_log_kernel(lambda, omega, mode).exp();
    let a1 = k1 * x0;

    let (k2, a2) = if x0 < 2.0 / omega {
        let k2 = (-omega).exp();
        let a2 = if lambda == 0.0 {
            k2 * (2.0 / (omega * omega)).ln()
        } else {
            k2 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        (k2, a2)
    } else {
        (0.0, 0.0)
    };

    let k3 = xs.powf(lambda - 1.0);
    let a3 = 2.0 * k3 * (-xs * omega / 2.0).exp() / omega;
    let total = a1 + a2 + a3;

    loop {
        let u: f64 = rng.random();
        let mut v = total * rng.random::<f64>();
        let (x, hat) = if v <= a1 {
            (x0 * v / a1, k1)
        } else if v <= a1 + a2 {
            v -= a1;
            let x = if lambda == 0.0 {
                x0 * (v / k2).exp()
            } else {
                (x0.powf(lambda) + v * lambda / k2).powf(1.0 / lambda)
            };
            (x, k2 * x.powf(lambda - 1.0))
        } else {
            v -= a1 + a2;
            let x = -2.0 / omega * ((-xs * omega / 2.0).exp() - v * omega / (2.0 * k3)).ln();
            (x, k3 * (-x * omega / 2.0).exp())
        };
        if x > 0.0 && x.is_finite() && u * hat <= gig_log_kernel(lambda, omega, x).exp() {
            return x;
        }
    }
}

/// Roots of the cubic `x^3 + a x^2 + b x + c` when all three are real.
fn real_cubic_roots(a: f64, b: f64, c: f64) -> [f64; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let phi = (-q / 2.0 * (-27.0 / (p * p * p)).sqrt()).clamp(-1.0, 1.0).acos();
    let fd = 2.0 * (-p / 3.0).sqrt();
    let shift = a / 3.0;
    [
        fd * (phi / 3.0).cos() - shift,
        fd * (phi / 3.0 + 2.0 * std::f64::consts::PI / 3.0).cos() - shift,
        fd * (phi / 3.0 + 4.0 * std::f64::consts::PI / 3.0).cos() - shift,
    ]
}

/// Bounding rectangle `(u_minus, u_plus)` of the mode-shifted
/// ratio-of-uniforms region, in units of `sqrt(g(mode))`.
fn gig_rou_bounds(lambda: f64, omega: f64, mode: f64) -> (f64, f64) {
    let a = -2.0 * (lambda + 1.0) / omega - mode;
    let b = 2.0 * (lambda - 1.0) * mode / omega - 1.0;
    let roots = real_cubic_roots(a, b, mode);
    let log_gm = gig_log_kernel(lambda, omega, mode);
    let u_at = |x: f64| (x - mode) * (0.5 * (gig_log_kernel(lambda, omega, x) - log_gm)).exp();
    let mut u_minus = 0.0f64;
    let mut u_plus = 0.0f64;
    for x in roots {
        if x > 0.0 && x < mode {
            u_minus = u_minus.min(u_at(x));
        } else if x > mode {
            u_plus = u_plus.max(u_at(x));
        }
    }
    (u_minus, u_plus)
}

/// Ratio-of-uniforms with mode shift (Dagpunar; Lehner).
fn gig_rou_mode_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let lm1 = lambda - 1.0;
    let mode = (lm1 + (lm1 * lm1 + omega * omega).sqrt()) / omega;
    let (u_minus, u_plus) = gig_rou_bounds(lambda, omega, mode);
    let log_gm = gig_log_kernel(lambda, omega, mode);
    loop {
        let u = u_minus + (u_plus - u_minus) * rng.random::<f64>();
        let v: f64 = rng.random();
        if v == 0.0 {
            continue;
        }
        let x = u / v + mode;
        if x <= 0.0 {
            continue;
        }
        if 2.0 * v.ln() <= gig_log_kernel(lambda, omega, x) - log_gm {
            return x;
        }
    }
}

/// Normal(mean, var) conditioned on the draw being at most `upper`.
///
/// Uses plain rejection when the bound sits above the mean (acceptance at
/// least 1/2) and exponential rejection in the one-sided tail otherwise, so
/// the cost stays bounded however far the mean lies above the bound.
pub fn draw_truncnorm_upper<R: Rng + ?Sized>(mean: f64, var: f64, upper: f64, rng: &mut R) -> f64 {
    debug_assert!(var > 0.0);
    let sd = var.sqrt();
    // standardized lower bound for (mean - X) / sd
    let a = (mean - upper) / sd;
    let z = if a <= 0.0 {
        loop {
            let z = draw_std_normal(rng);
            if z >= a {
                break z;
            }
        }
    } else {
        let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let z = a + draw_exponential_mean(1.0 / alpha, rng);
            let d = z - alpha;
            if rng.random::<f64>() <= (-0.5 * d * d).exp() {
                break z;
            }
        }
    };
    (mean - sd * z).min(upper)
}

/// ALD draw conditioned on being at most `upper`, by inversion.
pub fn draw_ald_upper<R: Rng + ?Sized>(p: &AldParams, upper: f64, rng: &mut R) -> f64 {
    let tau = p.tau.get();
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let y = if upper <= p.mu {
        // below the location the conditional law is a shifted exponential
        upper + p.sigma / (1.0 - tau) * u.ln()
    } else {
        let f_upper = crate::ald::ald_cdf(upper, p);
        ald_quantile(u * f_upper, p)
    };
    y.min(upper)
}
