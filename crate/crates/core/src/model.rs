//! Data model, link functions, likelihood and posterior kernels, and the
//! censoring probability of a zero observation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::ald::{mixture_constants, QuantileLevel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Identity,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Response on the modelling scale (after the transform).
    pub y: Vec<f64>,
    /// Continuous-part design, intercept in column 0.
    pub x: DMatrix<f64>,
    /// Zero-part design, intercept in column 0.
    pub z: DMatrix<f64>,
    pub transform: Transform,
}

impl Dataset {
    /// Builds a dataset from a response on the original scale, applying
    /// `transform` to it.
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, z: DMatrix<f64>, transform: Transform) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || z.nrows() != n {
            return Err(Error::InvalidParameter(format!(
                "design rows ({} and {}) do not match response length {n}",
                x.nrows(),
                z.nrows()
            )));
        }
        if x.ncols() == 0 || z.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "design matrices need at least one column".into(),
            ));
        }
        if let Some(i) = y.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "response at index {i} is negative or not finite ({})",
                y[i]
            )));
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "design matrices contain non-finite values".into(),
            ));
        }
        for (name, m) in [("X", &x), ("Z", &z)] {
            if m.column(0).iter().any(|&v| v != 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "first column of {name} must be an intercept column of ones"
                )));
            }
        }
        Ok(Self {
            y: apply_transform(&y, transform),
            x,
            z,
            transform,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.z.ncols()
    }

    pub fn zero_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.y[i] == 0.0).collect()
    }
}

pub fn apply_transform(y: &[f64], transform: Transform) -> Vec<f64> {
    match transform {
        Transform::Identity => y.to_vec(),
        Transform::Sqrt => y.iter().map(|v| v.sqrt()).collect(),
    }
}

/// Maps quantiles on the modelling scale back to the response scale.
/// A negative latent quantile of the square-root response corresponds to a
/// response quantile of zero.
pub fn invert_transform(q: &[f64], transform: Transform) -> Vec<f64> {
    match transform {
        Transform::Identity => q.to_vec(),
        Transform::Sqrt => q.iter().map(|v| v.max(0.0).powi(2)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    #[default]
    Logit,
    Probit,
}

pub fn link_inverse(link: LinkFunction, t: f64) -> f64 {
    match link {
        LinkFunction::Logit => {
            if t >= 0.0 {
                1.0 / (1.0 + (-t).exp())
            } else {
                let e = t.exp();
                e / (1.0 + e)
            }
        }
        LinkFunction::Probit => 0.5 * erfc(-t / std::f64::consts::SQRT_2),
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln Phi(t)` accurate far into the lower tail.
fn ln_norm_cdf(t: f64) -> f64 {
    if t > -30.0 {
        (0.5 * erfc(-t / std::f64::consts::SQRT_2)).ln()
    } else {
        // asymptotic Mills-ratio expansion
        let t2 = t * t;
        -0.5 * t2 - (-t).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / t2 + 3.0 / (t2 * t2)).ln()
    }
}

/// `phi(t) / Phi(t)`.
fn inverse_mills(t: f64) -> f64 {
    let ln_phi = -0.5 * t * t - 0.5 * (2.0 * std::f64::consts::PI).ln();
    (ln_phi - ln_norm_cdf(t)).exp()
}

/// `ln eta(t)`.
pub fn ln_link_inverse(link: LinkFunction, t: f64) -> f64 {
    match link {
        LinkFunction::Logit => -softplus(-t),
        LinkFunction::Probit => ln_norm_cdf(t),
    }
}

/// `ln(1 - eta(t))`.
pub fn ln_link_complement(link: LinkFunction, t: f64) -> f64 {
    match link {
        LinkFunction::Logit => -softplus(t),
        LinkFunction::Probit => ln_norm_cdf(-t),
    }
}

fn d_ln_link_inverse(link: LinkFunction, t: f64) -> f64 {
    match link {
        LinkFunction::Logit => 1.0 - link_inverse(link, t),
        LinkFunction::Probit => inverse_mills(t),
    }
}

fn d_ln_link_complement(link: LinkFunction, t: f64) -> f64 {
    match link {
        LinkFunction::Logit => -link_inverse(link, t),
        LinkFunction::Probit => -inverse_mills(-t),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub b0: DVector<f64>,
    pub b0_cov: DMatrix<f64>,
    pub g0: DVector<f64>,
    pub g0_cov: DMatrix<f64>,
    /// Inverse-gamma shape for sigma.
    pub n0: f64,
    /// Inverse-gamma scale for sigma.
    pub s0: f64,
}

impl Priors {
    /// `beta ~ N(0, 100 I)`, `gamma ~ N(0, 100 I)`, `sigma ~ IG(3/2, 0.1/2)`.
    pub fn vague(k: usize, m: usize) -> Self {
        Self {
            b0: DVector::zeros(k),
            b0_cov: DMatrix::from_diagonal_element(k, k, 100.0),
            g0: DVector::zeros(m),
            g0_cov: DMatrix::from_diagonal_element(m, m, 100.0),
            n0: 1.5,
            s0: 0.05,
        }
    }

    pub fn validate(&self, k: usize, m: usize) -> Result<()> {
        if self.b0.len() != k || self.b0_cov.shape() != (k, k) {
            return Err(Error::Config(format!("beta prior must have dimension {k}")));
        }
        if self.g0.len() != m || self.g0_cov.shape() != (m, m) {
            return Err(Error::Config(format!("gamma prior must have dimension {m}")));
        }
        check_spd(&self.b0_cov, "B0")?;
        check_spd(&self.g0_cov, "G0")?;
        if !(self.n0 > 0.0 && self.s0 > 0.0) {
            return Err(Error::Config(format!(
                "sigma prior needs positive shape and scale, got ({}, {})",
                self.n0, self.s0
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_spd(a: &DMatrix<f64>, name: &str) -> Result<()> {
    let symmetric = a
        .iter()
        .zip(a.transpose().iter())
        .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0));
    if !symmetric || a.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(name.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Every zero is a true zero.
    #[serde(rename = "twopart")]
    TwoPart,
    /// Each zero is a true zero or a censored continuous draw.
    #[serde(rename = "censored_mix")]
    CensoredMix,
    /// Every zero is censored; no zero-part regression.
    #[serde(rename = "tobit")]
    Tobit,
}

impl Variant {
    pub fn has_gamma(self) -> bool {
        !matches!(self, Variant::Tobit)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "twopart" => Ok(Variant::TwoPart),
            "censored_mix" => Ok(Variant::CensoredMix),
            "tobit" => Ok(Variant::Tobit),
            _ => Err(Error::Config(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub tau: QuantileLevel,
    pub variant: Variant,
    pub link: LinkFunction,
    /// Initial random-walk variance multiplier for the gamma proposal.
    pub mh_step: f64,
    /// Proposal shape matrix; identity when absent.
    #[serde(default)]
    pub mh_scale_matrix: Option<DMatrix<f64>>,
    /// Adapt `mh_step` during burn-in.
    #[serde(default = "default_true")]
    pub adapt_mh: bool,
    /// Hold gamma at this value instead of sampling it.
    #[serde(default)]
    pub gamma_fixed: Option<DVector<f64>>,
    /// Leading burn-in sweeps of a censored_mix fit that treat every zero as
    /// a true zero. `None` uses a quarter of the burn-in.
    #[serde(default)]
    pub warmup: Option<usize>,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn new(tau: QuantileLevel, variant: Variant) -> Self {
        Self {
            tau,
            variant,
            link: LinkFunction::Logit,
            mh_step: 0.1,
            mh_scale_matrix: None,
            adapt_mh: true,
            gamma_fixed: None,
            warmup: None,
            iters: 2000,
            burnin: 500,
            thin: 1,
            seed: 0,
        }
    }

    /// Number of leading sweeps run with every zero held as a true zero.
    pub fn warmup_sweeps(&self) -> usize {
        match self.variant {
            Variant::CensoredMix => self.warmup.unwrap_or(self.burnin / 4),
            _ => 0,
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.burnin >= self.iters {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burnin, self.iters
            )));
        }
        if self.warmup.is_some_and(|w| w > self.burnin) {
            return Err(Error::Config("warm-up cannot exceed the burn-in".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be at least 1".into()));
        }
        if !(self.mh_step > 0.0 && self.mh_step.is_finite()) {
            return Err(Error::Config(format!("MH step must be positive, got {}", self.mh_step)));
        }
        let m = data.m();
        if let Some(s) = &self.mh_scale_matrix {
            if s.shape() != (m, m) {
                return Err(Error::Config(format!("MH scale matrix must be {m}x{m}")));
            }
            check_spd(s, "MH scale matrix")?;
        }
        if let Some(g) = &self.gamma_fixed {
            if g.len() != m {
                return Err(Error::Config(format!("fixed gamma must have length {m}")));
            }
        }
        let k = data.k();
        let n_pos = data.y.iter().filter(|&&v| v > 0.0).count();
        let n_zero = data.n() - n_pos;
        let continuous = match self.variant {
            Variant::Tobit => data.n(),
            _ => n_pos,
        };
        if continuous < k {
            return Err(Error::Config(format!(
                "{continuous} observations inform the continuous part, need at least {k}"
            )));
        }
        if self.variant == Variant::CensoredMix && n_zero == 0 {
            return Err(Error::Config("censored_mix needs at least one zero response".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub sigma: f64,
    /// Mixture scales; only read for continuous-part members.
    pub v: Vec<f64>,
    /// Censoring indicators; only read where `y == 0`.
    pub censored: Vec<bool>,
    /// Latent responses of censored zeros.
    pub ystar: Vec<f64>,
}

impl ParamState {
    /// Working response of observation `i`: `y` when positive, the imputed
    /// latent when censored.
    #[inline]
    pub fn working_response(&self, data: &Dataset, i: usize) -> f64 {
        if data.y[i] > 0.0 {
            data.y[i]
        } else {
            self.ystar[i]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexPartition {
    /// Zero and censored.
    pub censored: Vec<usize>,
    /// Zero and not censored (true zeros).
    pub true_zero: Vec<usize>,
    /// Strictly positive.
    pub positive: Vec<usize>,
}

impl IndexPartition {
    /// Indices of observations informing the continuous part.
    pub fn continuous(&self) -> impl Iterator<Item = usize> + '_ {
        self.positive.iter().chain(self.censored.iter()).copied()
    }
}

pub fn partition(y: &[f64], c: &[bool]) -> IndexPartition {
    let mut out = IndexPartition::default();
    for (i, (&yi, &ci)) in y.iter().zip(c).enumerate() {
        if yi > 0.0 {
            out.positive.push(i);
        } else if ci {
            out.censored.push(i);
        } else {
            out.true_zero.push(i);
        }
    }
    out
}

/// Posterior probability that a zero is censored given the point-mass
/// probability `p` and the continuous part's mass at or below zero `f0`.
/// Returns 0 when both masses vanish.
pub fn censor_prob(p: f64, f0: f64) -> f64 {
    let cont = (1.0 - p) * f0;
    let denom = p + cont;
    if denom <= 0.0 {
        0.0
    } else {
        cont / denom
    }
}

/// Log of the augmented likelihood: true zeros contribute `ln p_i`,
/// continuous members `ln(1 - p_i)` plus the normal-given-v and exponential
/// mixing densities evaluated at the working response.
pub fn loglik_twopart(state: &ParamState, data: &Dataset, cfg: &ModelConfig) -> f64 {
    let mc = mixture_constants(cfg.tau);
    let part = partition(&data.y, &state.censored);
    let with_gamma = cfg.variant.has_gamma();
    let zg = if with_gamma {
        &data.z * &state.gamma
    } else {
        DVector::zeros(data.n())
    };
    let xb = &data.x * &state.beta;
    let mut ll = 0.0;
    if with_gamma {
        for &i in &part.true_zero {
            ll += ln_link_inverse(cfg.link, zg[i]);
        }
    }
    for i in part.continuous() {
        if with_gamma {
            ll += ln_link_complement(cfg.link, zg[i]);
        }
        let w = state.working_response(data, i);
        let v = state.v[i];
        let var = mc.psi2 * state.sigma * v;
        let r = w - xb[i] - mc.theta * v;
        ll += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - r * r / (2.0 * var);
        ll += -state.sigma.ln() - v / state.sigma;
    }
    ll
}

/// Unnormalized log posterior of gamma given which zeros are true zeros.
pub(crate) fn gamma_kernel(
    z: &DMatrix<f64>,
    true_zero: &[bool],
    gamma: &DVector<f64>,
    g0: &DVector<f64>,
    g_prec: &DMatrix<f64>,
    link: LinkFunction,
) -> f64 {
    let zg = z * gamma;
    let mut acc = 0.0;
    for (i, &t) in zg.iter().enumerate() {
        acc += if true_zero[i] {
            ln_link_inverse(link, t)
        } else {
            ln_link_complement(link, t)
        };
    }
    let d = gamma - g0;
    acc - 0.5 * d.dot(&(g_prec * &d))
}

fn true_zero_flags(n: usize, part: &IndexPartition) -> Vec<bool> {
    let mut flags = vec![false; n];
    for &i in &part.true_zero {
        flags[i] = true;
    }
    flags
}

fn prior_precision(cov: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    cov.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite(name.to_string()))
}

/// Unnormalized log full conditional of gamma. True zeros contribute
/// `ln eta(z'gamma)`, positive and censored observations `ln(1 - eta(z'gamma))`.
pub fn log_post_gamma(
    gamma: &DVector<f64>,
    part: &IndexPartition,
    data: &Dataset,
    priors: &Priors,
    link: LinkFunction,
) -> Result<f64> {
    let prec = prior_precision(&priors.g0_cov, "G0")?;
    let (z, flags) = kernel_rows(part, data);
    Ok(gamma_kernel(&z, &flags, gamma, &priors.g0, &prec, link))
}

/// Gradient of [`log_post_gamma`].
pub fn grad_log_post_gamma(
    gamma: &DVector<f64>,
    part: &IndexPartition,
    data: &Dataset,
    priors: &Priors,
    link: LinkFunction,
) -> Result<DVector<f64>> {
    let prec = prior_precision(&priors.g0_cov, "G0")?;
    let (z, flags) = kernel_rows(part, data);
    let zg = &z * gamma;
    let mut grad = -(&prec * (gamma - &priors.g0));
    for i in 0..z.nrows() {
        let w = if flags[i] {
            d_ln_link_inverse(link, zg[i])
        } else {
            d_ln_link_complement(link, zg[i])
        };
        grad += z.row(i).transpose() * w;
    }
    Ok(grad)
}

/// Rows of Z covered by the partition, with their true-zero flags.
fn kernel_rows(part: &IndexPartition, data: &Dataset) -> (DMatrix<f64>, Vec<bool>) {
    let idx: Vec<usize> = part
        .true_zero
        .iter()
        .chain(&part.positive)
        .chain(&part.censored)
        .copied()
        .collect();
    let z = data.z.select_rows(idx.iter());
    let flags = true_zero_flags(data.n(), part);
    (z, idx.iter().map(|&i| flags[i]).collect())
}
