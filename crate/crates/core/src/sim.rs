//! Data generator and replication harness for the censoring-probability
//! simulation: a logistic point mass at zero plus a linear-normal continuous
//! part left-censored at zero.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ald::QuantileLevel;
use crate::error::{Error, Result};
use crate::mcmc::run_chain;
use crate::model::{link_inverse, Dataset, LinkFunction, ModelConfig, Priors, Transform, Variant};
use crate::stochastic::{draw_std_normal, RngStream};
use crate::summary::{censor_profiles, group_censor_means, posterior_mean};

/// Settings shared by every fit inside a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyFit {
    pub taus: Vec<f64>,
    pub link: LinkFunction,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub mh_step: f64,
    /// Prior variance of every beta and gamma coefficient (zero prior means).
    pub prior_var: f64,
    pub sigma_shape: f64,
    pub sigma_scale: f64,
}

impl Default for StudyFit {
    fn default() -> Self {
        Self {
            taus: vec![0.25, 0.5, 0.75],
            link: LinkFunction::Logit,
            iters: 2000,
            burnin: 500,
            thin: 1,
            mh_step: 0.1,
            prior_var: 100.0,
            sigma_shape: 1.5,
            sigma_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub n: usize,
    pub gamma_true: [f64; 3],
    pub beta_true: [f64; 3],
    pub noise_sd: f64,
    pub covariate_low: f64,
    pub covariate_high: f64,
    pub replications: usize,
    pub seed: u64,
    pub fit: StudyFit,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n: 500,
            gamma_true: [0.0, 10.0, -10.0],
            beta_true: [-0.5, 0.0, 1.5],
            noise_sd: 0.5,
            covariate_low: 0.0,
            covariate_high: 1.0,
            replications: 100,
            seed: 20_150_601,
            fit: StudyFit::default(),
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        if self.noise_sd.is_nan() || self.noise_sd <= 0.0 {
            return Err(Error::Config(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        if self.covariate_low.is_nan() || self.covariate_high.is_nan() || self.covariate_low >= self.covariate_high {
            return Err(Error::Config("covariate_low must be below covariate_high".into()));
        }
        if self.fit.taus.is_empty() {
            return Err(Error::Config("at least one quantile level is required".into()));
        }
        for &t in &self.fit.taus {
            QuantileLevel::new(t).map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.fit.prior_var > 0.0 && self.fit.sigma_shape > 0.0 && self.fit.sigma_scale > 0.0) {
            return Err(Error::Config("prior settings must be positive".into()));
        }
        Ok(())
    }

    pub fn priors(&self) -> Priors {
        Priors {
            b0_cov: DMatrix::from_diagonal_element(3, 3, self.fit.prior_var),
            g0_cov: DMatrix::from_diagonal_element(3, 3, self.fit.prior_var),
            n0: self.fit.sigma_shape,
            s0: self.fit.sigma_scale,
            ..Priors::vague(3, 3)
        }
    }

    pub fn model_config(&self, tau: f64) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::new(QuantileLevel::new(tau)?, Variant::CensoredMix);
        cfg.link = self.fit.link;
        cfg.iters = self.fit.iters;
        cfg.burnin = self.fit.burnin;
        cfg.thin = self.fit.thin;
        cfg.mh_step = self.fit.mh_step;
        cfg.seed = self.seed;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub replication: usize,
    pub tau: f64,
    /// Undefined when the replication has no zero in the group.
    pub zeta_c: Option<f64>,
    pub zeta_d: Option<f64>,
    pub beta2_mean: f64,
    pub gamma1_mean: f64,
    pub gamma2_mean: f64,
    pub zero_fraction: f64,
    pub censored_fraction: f64,
    pub mh_acceptance: Option<f64>,
}

/// Draws one dataset. The second value flags, per observation, zeros
/// produced by censoring a continuous draw.
pub fn generate<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<(Dataset, Vec<bool>)> {
    let n = spec.n;
    let width = spec.covariate_high - spec.covariate_low;
    let mut x = DMatrix::from_element(n, 3, 1.0);
    let mut y = vec![0.0; n];
    let mut censored = vec![false; n];
    let [g0, g1, g2] = spec.gamma_true;
    let [b0, b1, b2] = spec.beta_true;
    for i in 0..n {
        let x1 = spec.covariate_low + width * rng.random::<f64>();
        let x2 = spec.covariate_low + width * rng.random::<f64>();
        x[(i, 1)] = x1;
        x[(i, 2)] = x2;
        let p = link_inverse(LinkFunction::Logit, g0 + g1 * x1 + g2 * x2);
        if rng.random::<f64>() < p {
            continue;
        }
        let latent = b0 + b1 * x1 + b2 * x2 + spec.noise_sd * draw_std_normal(rng);
        if latent > 0.0 {
            y[i] = latent;
        } else {
            censored[i] = true;
        }
    }
    let z = x.clone();
    Ok((Dataset::new(y, x, z, Transform::Identity)?, censored))
}

fn stream_id(spec: &SimSpec, replication: usize, slot: usize) -> u64 {
    (replication * (spec.fit.taus.len() + 1) + slot) as u64
}

/// Generates and fits one replication at every configured quantile level.
pub fn run_replication(spec: &SimSpec, replication: usize) -> Result<Vec<RepSummary>> {
    let mut data_rng = RngStream::new(spec.seed, stream_id(spec, replication, 0));
    let (data, truth) = generate(spec, &mut data_rng)?;
    let n = data.n() as f64;
    let zero_fraction = data.y.iter().filter(|&&v| v == 0.0).count() as f64 / n;
    let censored_fraction = truth.iter().filter(|&&c| c).count() as f64 / n;
    let priors = spec.priors();
    spec.fit
        .taus
        .iter()
        .enumerate()
        .map(|(j, &tau)| {
            let cfg = spec.model_config(tau)?;
            let mut rng = RngStream::new(spec.seed, stream_id(spec, replication, j + 1));
            let chain = run_chain(&data, &cfg, &priors, &mut rng)?;
            let (zeta_c, zeta_d) = match group_censor_means(&censor_profiles(&chain), &truth) {
                Ok((c, d)) => (Some(c), Some(d)),
                Err(_) => (None, None),
            };
            let col = |m: &DMatrix<f64>, j: usize| posterior_mean(&m.column(j).iter().copied().collect::<Vec<_>>());
            Ok(RepSummary {
                replication,
                tau,
                zeta_c,
                zeta_d,
                beta2_mean: col(&chain.beta_draws, 2),
                gamma1_mean: col(&chain.gamma_draws, 1),
                gamma2_mean: col(&chain.gamma_draws, 2),
                zero_fraction,
                censored_fraction,
                mh_acceptance: chain.mh.retained_rate(),
            })
        })
        .collect()
}

/// Runs every replication in parallel over disjoint RNG streams. Results
/// are ordered by replication, then by quantile level.
pub fn run_study(spec: &SimSpec) -> Result<Vec<RepSummary>> {
    spec.validate()?;
    let per_rep: Vec<Vec<RepSummary>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| run_replication(spec, r))
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}
