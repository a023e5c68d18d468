//! Gibbs sampler with a random-walk Metropolis step for the zero-part
//! coefficients and data augmentation for censoring indicators and censored
//! latents.
//!
//! One sweep runs `update_c -> impute_ystar -> update_v -> update_beta ->
//! update_sigma -> update_gamma`. The `twopart` variant keeps every zero a
//! true zero, `tobit` keeps every zero censored and has no zero part.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ald::{ald_cdf_at_zero, mixture_constants, AldParams, MixtureConstants};
use crate::error::{Error, Result};
use crate::model::{censor_prob, gamma_kernel, link_inverse, Dataset, ModelConfig, ParamState, Priors, Variant};
use crate::stochastic::{
    draw_ald_upper, draw_bernoulli, draw_gig_half, draw_inverse_gamma, draw_std_normal, draw_truncnorm_upper,
    GigHalfParams,
};

/// Iterations per adaptation batch during burn-in.
pub const ADAPT_BATCH: usize = 50;
const TARGET_RATE: f64 = 0.3;
const ADAPT_LOW: f64 = 0.25;
const ADAPT_HIGH: f64 = 0.35;

/// Gaussian full conditional of beta.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCondBeta {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Inverse-gamma full conditional of sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullCondSigma {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MhRecord {
    pub proposals: usize,
    pub accepts: usize,
    pub retained_proposals: usize,
    pub retained_accepts: usize,
    /// Proposal variance multiplier in force after burn-in.
    pub final_step: f64,
}

impl MhRecord {
    pub fn retained_rate(&self) -> Option<f64> {
        (self.retained_proposals > 0).then(|| self.retained_accepts as f64 / self.retained_proposals as f64)
    }
}

/// Retained draws of one chain. Rows are draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Zero-based sweep index of each retained draw.
    pub iterations: Vec<usize>,
    pub beta_draws: DMatrix<f64>,
    /// Empty (zero columns) for `tobit`.
    pub gamma_draws: DMatrix<f64>,
    pub sigma_draws: Vec<f64>,
    /// Observation indices with a zero response, in ascending order.
    pub zero_ids: Vec<usize>,
    /// Censoring indicators of the zero observations, one row per draw.
    pub c_draws: Vec<Vec<bool>>,
    pub mh: MhRecord,
    pub config: ModelConfig,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.sigma_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_draws.is_empty()
    }
}

/// Multiplicative adaptation of the proposal variance toward the target
/// acceptance band. Rates inside [0.25, 0.35] leave the step unchanged.
/// Chains apply it to 50-sweep batches of burn-in after the warm-up, so the
/// step is tuned against the posterior that the retained draws come from.
pub fn tune_mh_step(step: f64, rate: f64) -> f64 {
    if (ADAPT_LOW..=ADAPT_HIGH).contains(&rate) {
        step
    } else {
        step * (rate / TARGET_RATE).clamp(0.1, 5.0)
    }
}

/// Mixture-scale full conditional `GIG(1/2, delta, xi)` for a continuous
/// member with working response `w` and location `mu`.
pub fn gig_params_v(w: f64, mu: f64, sigma: f64, mc: MixtureConstants) -> GigHalfParams {
    let denom = mc.psi2 * sigma;
    GigHalfParams {
        delta: (w - mu).abs() / denom.sqrt(),
        xi: (mc.theta * mc.theta / denom + 2.0 / sigma).sqrt(),
    }
}

/// Membership of each observation in the continuous part.
fn continuous_members<'a>(data: &'a Dataset, state: &'a ParamState) -> impl Iterator<Item = usize> + 'a {
    let y = &data.y;
    let c = &state.censored;
    (0..data.n()).filter(move |&i| y[i] > 0.0 || c[i])
}

fn beta_precision_system(
    data: &Dataset,
    state: &ParamState,
    mc: MixtureConstants,
    b_prec: &DMatrix<f64>,
    b_prec_mean: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let k = data.k();
    let mut q = b_prec.clone();
    let mut r = b_prec_mean.clone();
    for i in continuous_members(data, state) {
        let v = state.v[i];
        let wgt = 1.0 / (mc.psi2 * state.sigma * v);
        let target = state.working_response(data, i) - mc.theta * v;
        for a in 0..k {
            let xa = data.x[(i, a)];
            r[a] += xa * target * wgt;
            for b in 0..=a {
                q[(a, b)] += xa * data.x[(i, b)] * wgt;
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            q[(b, a)] = q[(a, b)];
        }
    }
    (q, r)
}

pub fn full_cond_beta(
    data: &Dataset,
    state: &ParamState,
    mc: MixtureConstants,
    priors: &Priors,
) -> Result<FullCondBeta> {
    let b_prec = precision(&priors.b0_cov, "B0")?;
    let b_prec_mean = &b_prec * &priors.b0;
    let (q, r) = beta_precision_system(data, state, mc, &b_prec, &b_prec_mean);
    let chol = q
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("beta precision".into()))?;
    Ok(FullCondBeta {
        mean: chol.solve(&r),
        cov: chol.inverse(),
    })
}

pub fn full_cond_sigma(data: &Dataset, state: &ParamState, mc: MixtureConstants, priors: &Priors) -> FullCondSigma {
    let xb = &data.x * &state.beta;
    let mut n_c = 0usize;
    let mut scale = priors.s0;
    for i in continuous_members(data, state) {
        let v = state.v[i];
        let r = state.working_response(data, i) - xb[i] - mc.theta * v;
        scale += v + r * r / (2.0 * mc.psi2 * v);
        n_c += 1;
    }
    FullCondSigma {
        shape: priors.n0 + 1.5 * n_c as f64,
        scale,
    }
}

fn precision(cov: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    cov.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite(name.to_string()))
}

/// One Metropolis accept/reject on log kernel values.
fn metropolis_accept<R: Rng + ?Sized>(log_current: f64, log_proposal: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u.ln() < log_proposal - log_current
}

/// Precomputed quantities for sweeping one dataset under one configuration.
pub struct Sampler<'a> {
    data: &'a Dataset,
    cfg: &'a ModelConfig,
    priors: &'a Priors,
    mc: MixtureConstants,
    b_prec: DMatrix<f64>,
    b_prec_mean: DVector<f64>,
    g_prec: DMatrix<f64>,
    proposal_factor: DMatrix<f64>,
    /// Current proposal variance multiplier.
    pub mh_step: f64,
    /// While set, `update_c` holds every zero as a true zero.
    pub hold_true_zeros: bool,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a Dataset, cfg: &'a ModelConfig, priors: &'a Priors) -> Result<Self> {
        priors.validate(data.k(), data.m())?;
        let b_prec = precision(&priors.b0_cov, "B0")?;
        let b_prec_mean = &b_prec * &priors.b0;
        let g_prec = precision(&priors.g0_cov, "G0")?;
        let m = data.m();
        let omega = cfg.mh_scale_matrix.clone().unwrap_or_else(|| DMatrix::identity(m, m));
        let proposal_factor = omega
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("MH scale matrix".into()))?
            .l();
        Ok(Self {
            data,
            cfg,
            priors,
            mc: mixture_constants(cfg.tau),
            b_prec,
            b_prec_mean,
            g_prec,
            proposal_factor,
            mh_step: cfg.mh_step,
            hold_true_zeros: false,
        })
    }

    pub fn mixture(&self) -> MixtureConstants {
        self.mc
    }

    fn samples_gamma(&self) -> bool {
        self.cfg.variant.has_gamma() && self.cfg.gamma_fixed.is_none()
    }

    /// Starting state: beta = 0, gamma = 0 (or the pinned value), sigma = 1,
    /// v = 1, indicators Bernoulli(1/2) for censored_mix, one truncated
    /// normal draw for each latent.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamState {
        let n = self.data.n();
        let gamma = match (&self.cfg.gamma_fixed, self.cfg.variant) {
            (_, Variant::Tobit) => DVector::zeros(0),
            (Some(g), _) => g.clone(),
            (None, _) => DVector::zeros(self.data.m()),
        };
        let mut censored = vec![false; n];
        for (i, c) in censored.iter_mut().enumerate() {
            if self.data.y[i] == 0.0 {
                *c = match self.cfg.variant {
                    Variant::TwoPart => false,
                    Variant::Tobit => true,
                    Variant::CensoredMix => draw_bernoulli(0.5, rng),
                };
            }
        }
        let mut state = ParamState {
            beta: DVector::zeros(self.data.k()),
            gamma,
            sigma: 1.0,
            v: vec![1.0; n],
            censored,
            ystar: vec![0.0; n],
        };
        for i in 0..n {
            if self.data.y[i] == 0.0 {
                state.ystar[i] = draw_truncnorm_upper(self.mc.theta, self.mc.psi2, 0.0, rng);
            }
        }
        state
    }

    /// Redraws each zero's censoring indicator with probability
    /// `censor_prob(p_i, F(0; x_i'beta, sigma, tau))`. Indicators set to 1
    /// receive a fresh `(ystar, v)` pair from their joint conditional:
    /// `ystar` from the ALD truncated to `(-inf, 0]`, then `v` given `ystar`.
    pub fn update_c<R: Rng + ?Sized>(&self, state: &mut ParamState, rng: &mut R) {
        if self.cfg.variant != Variant::CensoredMix {
            return;
        }
        let data = self.data;
        if self.hold_true_zeros {
            for i in 0..data.n() {
                if data.y[i] == 0.0 {
                    state.censored[i] = false;
                }
            }
            return;
        }
        let xb = &data.x * &state.beta;
        let zg = &data.z * &state.gamma;
        for i in 0..data.n() {
            if data.y[i] != 0.0 {
                continue;
            }
            let p = link_inverse(self.cfg.link, zg[i]);
            let f0 = ald_cdf_at_zero(xb[i], state.sigma, self.cfg.tau);
            let c = draw_bernoulli(censor_prob(p, f0), rng);
            state.censored[i] = c;
            if c {
                let ald = AldParams {
                    mu: xb[i],
                    sigma: state.sigma,
                    tau: self.cfg.tau,
                };
                let ystar = draw_ald_upper(&ald, 0.0, rng);
                state.ystar[i] = ystar;
                state.v[i] = draw_gig_half(gig_params_v(ystar, xb[i], state.sigma, self.mc), rng);
            }
        }
    }

    /// `ystar_i ~ TN(-inf, 0](x_i'beta + theta v_i, psi2 sigma v_i)` for censored zeros.
    pub fn impute_ystar<R: Rng + ?Sized>(&self, state: &mut ParamState, rng: &mut R) {
        let data = self.data;
        let xb = &data.x * &state.beta;
        for i in 0..data.n() {
            if data.y[i] == 0.0 && state.censored[i] {
                let v = state.v[i];
                state.ystar[i] =
                    draw_truncnorm_upper(xb[i] + self.mc.theta * v, self.mc.psi2 * state.sigma * v, 0.0, rng);
            }
        }
    }

    pub fn update_v<R: Rng + ?Sized>(&self, state: &mut ParamState, rng: &mut R) {
        let data = self.data;
        let xb = &data.x * &state.beta;
        for i in 0..data.n() {
            if data.y[i] > 0.0 || state.censored[i] {
                let w = state.working_response(data, i);
                state.v[i] = draw_gig_half(gig_params_v(w, xb[i], state.sigma, self.mc), rng);
            }
        }
    }

    pub fn update_beta<R: Rng + ?Sized>(&self, state: &mut ParamState, rng: &mut R) -> Result<()> {
        let (q, r) = beta_precision_system(self.data, state, self.mc, &self.b_prec, &self.b_prec_mean);
        let chol = q
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("beta precision".into()))?;
        let mean = chol.solve(&r);
        let z = DVector::from_fn(mean.len(), |_, _| draw_std_normal(rng));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite("beta precision".into()))?;
        state.beta = mean + noise;
        Ok(())
    }

    pub fn update_sigma<R: Rng + ?Sized>(&self, state: &mut ParamState, rng: &mut R) {
        let fc = full_cond_sigma(self.data, state, self.mc, self.priors);
        state.sigma = draw_inverse_gamma(fc.shape, fc.scale, rng);
    }

    fn true_zero_flags(&self, state: &ParamState) -> Vec<bool> {
        self.data
            .y
            .iter()
            .zip(&state.censored)
            .map(|(&y, &c)| y == 0.0 && !c)
            .collect()
    }

    /// Log full-conditional kernel of gamma at the current indicators.
    pub fn gamma_log_kernel(&self, state: &ParamState, gamma: &DVector<f64>) -> f64 {
        let flags = self.true_zero_flags(state);
        gamma_kernel(
            &self.data.z,
            &flags,
            gamma,
            &self.priors.g0,
            &self.g_prec,
            self.cfg.link,
        )
    }

    /// Random-walk Metropolis step with proposal `N(gamma, mh_step * Omega)`.
    /// Returns whether the proposal was accepted; `None` when gamma is not
    /// sampled under this configuration.
    pub fn update_gamma<R: Rng + ?Sized>(&self, state: &mut ParamState, rng: &mut R) -> Option<bool> {
        if !self.samples_gamma() {
            return None;
        }
        let z = DVector::from_fn(state.gamma.len(), |_, _| draw_std_normal(rng));
        let proposal = &state.gamma + (&self.proposal_factor * z) * self.mh_step.sqrt();
        let flags = self.true_zero_flags(state);
        let kernel =
            |g: &DVector<f64>| gamma_kernel(&self.data.z, &flags, g, &self.priors.g0, &self.g_prec, self.cfg.link);
        let accepted = metropolis_accept(kernel(&state.gamma), kernel(&proposal), rng);
        if accepted {
            state.gamma = proposal;
        }
        Some(accepted)
    }

    /// One full sweep. `iteration` is only used in diagnostics.
    pub fn sweep<R: Rng + ?Sized>(
        &self,
        state: &mut ParamState,
        iteration: usize,
        rng: &mut R,
    ) -> Result<Option<bool>> {
        let fail = |block| Error::NonFinite { iteration, block };
        self.update_c(state, rng);
        self.impute_ystar(state, rng);
        if state.ystar.iter().any(|v| !v.is_finite()) {
            return Err(fail("ystar"));
        }
        self.update_v(state, rng);
        if continuous_members(self.data, state).any(|i| !(state.v[i].is_finite() && state.v[i] > 0.0)) {
            return Err(fail("v"));
        }
        self.update_beta(state, rng).map_err(|_| fail("beta"))?;
        if state.beta.iter().any(|b| !b.is_finite()) {
            return Err(fail("beta"));
        }
        self.update_sigma(state, rng);
        if !(state.sigma.is_finite() && state.sigma > 0.0) {
            return Err(fail("sigma"));
        }
        let accepted = self.update_gamma(state, rng);
        if state.gamma.iter().any(|g| !g.is_finite()) {
            return Err(fail("gamma"));
        }
        Ok(accepted)
    }
}

pub fn run_chain<R: Rng + ?Sized>(data: &Dataset, cfg: &ModelConfig, priors: &Priors, rng: &mut R) -> Result<Chain> {
    cfg.validate(data)?;
    let sampler = Sampler::new(data, cfg, priors)?;
    let state = sampler.initial_state(rng);
    run_from(sampler, state, rng)
}

/// Like [`run_chain`] but starting from a caller-supplied state.
pub fn run_chain_from<R: Rng + ?Sized>(
    data: &Dataset,
    cfg: &ModelConfig,
    priors: &Priors,
    init: ParamState,
    rng: &mut R,
) -> Result<Chain> {
    cfg.validate(data)?;
    let sampler = Sampler::new(data, cfg, priors)?;
    if init.beta.len() != data.k()
        || init.v.len() != data.n()
        || init.censored.len() != data.n()
        || init.ystar.len() != data.n()
    {
        return Err(Error::Config("initial state dimensions do not match the data".into()));
    }
    run_from(sampler, init, rng)
}

fn run_from<R: Rng + ?Sized>(mut sampler: Sampler<'_>, mut state: ParamState, rng: &mut R) -> Result<Chain> {
    let cfg = sampler.cfg;
    let data = sampler.data;
    let zero_ids = data.zero_indices();
    let k = data.k();
    let m = if cfg.variant.has_gamma() { data.m() } else { 0 };

    let mut iterations = Vec::new();
    let mut beta_rows = Vec::new();
    let mut gamma_rows = Vec::new();
    let mut sigma_draws = Vec::new();
    let mut c_draws = Vec::new();
    let mut mh = MhRecord::default();
    let mut batch_accepts = 0usize;
    let mut batch_len = 0usize;

    let warmup = cfg.warmup_sweeps();
    for t in 0..cfg.iters {
        sampler.hold_true_zeros = t < warmup;
        let accepted = sampler.sweep(&mut state, t, rng)?;
        if let Some(a) = accepted {
            mh.proposals += 1;
            mh.accepts += a as usize;
            if t >= cfg.burnin {
                mh.retained_proposals += 1;
                mh.retained_accepts += a as usize;
            } else if cfg.adapt_mh && t >= warmup {
                batch_len += 1;
                batch_accepts += a as usize;
                if batch_len == ADAPT_BATCH {
                    let rate = batch_accepts as f64 / ADAPT_BATCH as f64;
                    sampler.mh_step = tune_mh_step(sampler.mh_step, rate);
                    batch_len = 0;
                    batch_accepts = 0;
                }
            }
        }
        if t >= cfg.burnin && (t - cfg.burnin).is_multiple_of(cfg.thin) {
            iterations.push(t);
            beta_rows.extend(state.beta.iter().copied());
            if m > 0 {
                gamma_rows.extend(state.gamma.iter().copied());
            }
            sigma_draws.push(state.sigma);
            c_draws.push(zero_ids.iter().map(|&i| state.censored[i]).collect());
        }
    }
    mh.final_step = sampler.mh_step;
    let rows = sigma_draws.len();
    Ok(Chain {
        iterations,
        beta_draws: DMatrix::from_row_slice(rows, k, &beta_rows),
        gamma_draws: DMatrix::from_row_slice(rows, m, &gamma_rows),
        sigma_draws,
        zero_ids,
        c_draws,
        mh,
        config: cfg.clone(),
    })
}
