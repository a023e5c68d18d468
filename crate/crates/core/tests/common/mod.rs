//! Shared machinery for the integration tests. Data and prior draws here go
//! through `rand_distr` directly so they do not share code with the sampler
//! under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use zeroquant::ald::{mixture_constants, QuantileLevel};
use zeroquant::mcmc::Sampler;
use zeroquant::model::{link_inverse, Dataset, LinkFunction, ModelConfig, ParamState, Priors, Transform, Variant};
use zeroquant::stochastic::RngStream;
use zeroquant::summary::effective_sample_size;

pub struct GirSetup {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub cfg: ModelConfig,
    pub priors: Priors,
}

impl GirSetup {
    /// n = 20, k = m = 2, informative priors so the joint is well mixed.
    pub fn new(tau: f64, link: LinkFunction) -> Self {
        let n = 20;
        let x = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                -1.0 + 2.0 * i as f64 / (n - 1) as f64
            }
        });
        let z = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                ((i * 7) % n) as f64 / n as f64 - 0.5
            }
        });
        let mut cfg = ModelConfig::new(QuantileLevel::new(tau).unwrap(), Variant::CensoredMix);
        cfg.link = link;
        cfg.mh_step = 0.8;
        cfg.adapt_mh = false;
        let priors = Priors {
            b0: DVector::from_vec(vec![0.3, -0.2]),
            b0_cov: DMatrix::from_diagonal_element(2, 2, 0.5),
            g0: DVector::from_vec(vec![-0.3, 0.5]),
            g0_cov: DMatrix::identity(2, 2),
            n0: 5.0,
            s0: 4.0,
        };
        Self { x, z, cfg, priors }
    }

    fn mvn<R: Rng>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
        let l = cov.clone().cholesky().unwrap().l();
        let e = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
        mean + l * e
    }

    pub fn draw_prior<R: Rng>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>, f64) {
        let beta = Self::mvn(&self.priors.b0, &self.priors.b0_cov, rng);
        let gamma = Self::mvn(&self.priors.g0, &self.priors.g0_cov, rng);
        let g: f64 = Gamma::new(self.priors.n0, 1.0).unwrap().sample(rng);
        (beta, gamma, self.priors.s0 / g)
    }

    /// Response and latent variables given parameters: a true zero with
    /// probability `link(z'gamma)`, otherwise an ALD draw via its
    /// exponential-normal mixture, censored at zero.
    pub fn draw_data<R: Rng>(
        &self,
        beta: &DVector<f64>,
        gamma: &DVector<f64>,
        sigma: f64,
        rng: &mut R,
    ) -> (Dataset, ParamState) {
        let n = self.x.nrows();
        let mc = mixture_constants(self.cfg.tau);
        let xb = &self.x * beta;
        let zg = &self.z * gamma;
        let mut y = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut ystar = vec![0.0; n];
        let mut censored = vec![false; n];
        for i in 0..n {
            let true_zero = rng.random::<f64>() < link_inverse(self.cfg.link, zg[i]);
            let e: f64 = Exp1.sample(rng);
            let eps: f64 = StandardNormal.sample(rng);
            v[i] = sigma * e;
            let latent = xb[i] + mc.theta * v[i] + (mc.psi2 * sigma * v[i]).sqrt() * eps;
            if !true_zero {
                if latent > 0.0 {
                    y[i] = latent;
                } else {
                    censored[i] = true;
                    ystar[i] = latent;
                }
            }
        }
        let data = Dataset::new(y, self.x.clone(), self.z.clone(), Transform::Identity).unwrap();
        let state = ParamState {
            beta: beta.clone(),
            gamma: gamma.clone(),
            sigma,
            v,
            censored,
            ystar,
        };
        (data, state)
    }
}

/// Test functions of the parameters: each coordinate and its square.
pub fn moments(state: &ParamState) -> Vec<f64> {
    let mut out = Vec::new();
    for &b in state
        .beta
        .iter()
        .chain(state.gamma.iter())
        .chain(std::iter::once(&state.sigma))
    {
        out.push(b);
        out.push(b * b);
    }
    out
}

pub const MOMENT_NAMES: [&str; 10] = [
    "beta_0",
    "beta_0^2",
    "beta_1",
    "beta_1^2",
    "gamma_0",
    "gamma_0^2",
    "gamma_1",
    "gamma_1^2",
    "sigma",
    "sigma^2",
];

/// Standardized difference of one test function between the two simulators.
#[derive(Debug, Clone)]
pub struct GirComparison {
    pub name: &'static str,
    pub marginal: f64,
    pub successive: f64,
    pub z: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Marginal-conditional draws are independent; successive-conditional
/// draws alternate one sampler sweep with a fresh data draw, and their
/// Monte Carlo error uses the effective sample size.
pub fn getting_it_right(setup: &GirSetup, cycles: usize, seed: u64) -> Vec<GirComparison> {
    let mut rng = RngStream::new(seed, 0);
    let marginal: Vec<Vec<f64>> = (0..cycles)
        .map(|_| {
            let (b, g, s) = setup.draw_prior(&mut rng);
            moments(&ParamState {
                beta: b,
                gamma: g,
                sigma: s,
                v: vec![],
                censored: vec![],
                ystar: vec![],
            })
        })
        .collect();

    let mut rng = RngStream::new(seed, 1);
    let (b, g, s) = setup.draw_prior(&mut rng);
    let (mut data, mut state) = setup.draw_data(&b, &g, s, &mut rng);
    let mut successive = Vec::with_capacity(cycles);
    for it in 0..cycles {
        let sampler = Sampler::new(&data, &setup.cfg, &setup.priors).unwrap();
        sampler.sweep(&mut state, it, &mut rng).unwrap();
        successive.push(moments(&state));
        let (d, s) = setup.draw_data(&state.beta, &state.gamma, state.sigma, &mut rng);
        data = d;
        state = s;
    }

    (0..MOMENT_NAMES.len())
        .map(|j| {
            let a: Vec<f64> = marginal.iter().map(|r| r[j]).collect();
            let b: Vec<f64> = successive.iter().map(|r| r[j]).collect();
            let (ma, va) = mean_var(&a);
            let (mb, vb) = mean_var(&b);
            let ess = effective_sample_size(&b).max(1.0);
            let se = (va / a.len() as f64 + vb / ess).sqrt();
            GirComparison {
                name: MOMENT_NAMES[j],
                marginal: ma,
                successive: mb,
                z: (ma - mb) / se,
            }
        })
        .collect()
}

/// Two-sided one-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// CDF of a density known up to a constant on `(0, inf)`, tabulated by the
/// trapezoid rule in `u = ln v` and linearly interpolated.
pub struct TabulatedCdf {
    u: Vec<f64>,
    cum: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new(log_density_u: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Self {
        let h = (hi - lo) / (points - 1) as f64;
        let u: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
        let ld: Vec<f64> = u.iter().map(|&x| log_density_u(x)).collect();
        let top = ld.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = ld.iter().map(|l| (l - top).exp()).collect();
        let mut cum = vec![0.0; points];
        for i in 1..points {
            cum[i] = cum[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
        }
        let total = cum[points - 1];
        cum.iter_mut().for_each(|c| *c /= total);
        Self { u, cum }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let x = v.ln();
        let n = self.u.len();
        if x <= self.u[0] {
            return 0.0;
        }
        if x >= self.u[n - 1] {
            return 1.0;
        }
        let h = self.u[1] - self.u[0];
        let i = ((x - self.u[0]) / h) as usize;
        let t = (x - self.u[i]) / h;
        self.cum[i] + t * (self.cum[(i + 1).min(n - 1)] - self.cum[i])
    }
}
