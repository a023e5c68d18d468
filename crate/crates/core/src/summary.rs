//! Posterior point estimates, equal-tailed credible intervals, censoring
//! probabilities and chain diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::Chain;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Empirical quantile rule used for every interval: linear interpolation
/// between order statistics at position `(N - 1) q` (Hyndman-Fan type 7).
pub const QUANTILE_RULE: &str = "linear interpolation between order statistics, h = (N-1)q (type 7)";

pub fn posterior_mean(draws: &[f64]) -> f64 {
    draws.iter().sum::<f64>() / draws.len() as f64
}

fn sorted(draws: &[f64]) -> Vec<f64> {
    let mut s = draws.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn empirical_quantile(draws: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(draws), q)
}

/// Equal-tailed interval at `(1 - level)/2` and `1 - (1 - level)/2`.
pub fn credible_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "credible level must lie in (0, 1], got {level}"
        )));
    }
    if draws.is_empty() {
        return Err(Error::InvalidParameter("no draws".into()));
    }
    let s = sorted(draws);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensorProfile {
    pub obs_id: usize,
    pub tau: f64,
    pub prob: f64,
}

/// Per-zero posterior censoring probability: the mean of the retained
/// indicator draws.
pub fn censor_profiles(chain: &Chain) -> Vec<CensorProfile> {
    let draws = chain.c_draws.len().max(1) as f64;
    chain
        .zero_ids
        .iter()
        .enumerate()
        .map(|(j, &obs_id)| CensorProfile {
            obs_id,
            tau: chain.config.tau.get(),
            prob: chain.c_draws.iter().filter(|row| row[j]).count() as f64 / draws,
        })
        .collect()
}

/// Mean censoring probability over truly censored (`zeta_C`) and truly
/// uncensored (`zeta_D`) zeros. `true_c` is indexed by observation id.
pub fn group_censor_means(profiles: &[CensorProfile], true_c: &[bool]) -> Result<(f64, f64)> {
    let (mut sum_c, mut n_c, mut sum_d, mut n_d) = (0.0, 0usize, 0.0, 0usize);
    for p in profiles {
        let truth = *true_c
            .get(p.obs_id)
            .ok_or_else(|| Error::InvalidParameter(format!("no censoring label for observation {}", p.obs_id)))?;
        if truth {
            sum_c += p.prob;
            n_c += 1;
        } else {
            sum_d += p.prob;
            n_d += 1;
        }
    }
    if n_c == 0 {
        return Err(Error::EmptyGroup("no truly censored zero observations".into()));
    }
    if n_d == 0 {
        return Err(Error::EmptyGroup("no truly uncensored zero observations".into()));
    }
    Ok((sum_c / n_c as f64, sum_d / n_d as f64))
}

/// Single-chain effective sample size from Geyer's initial monotone
/// sequence of paired autocorrelations, capped at the number of draws.
/// A constant series has no information about its mean and gets 0.
pub fn effective_sample_size(draws: &[f64]) -> f64 {
    let n = draws.len();
    if n < 4 {
        return n as f64;
    }
    let mean = posterior_mean(draws);
    let centered: Vec<f64> = draws.iter().map(|x| x - mean).collect();
    let acov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = acov(0);
    if c0 <= 1e-28 * mean * mean || c0 == 0.0 {
        log::warn!("effective sample size of a constant series is defined as 0");
        return 0.0;
    }
    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (acov(lag) + acov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

/// Potential scale reduction of several equal-length chains.
pub fn gelman_rubin(chains: &[&[f64]]) -> f64 {
    let m = chains.len() as f64;
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0) as f64;
    let means: Vec<f64> = chains.iter().map(|c| posterior_mean(c)).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub tau: Option<f64>,
    pub level: f64,
    pub quantile_rule: String,
    pub draws: usize,
    pub mh_acceptance: Option<f64>,
    pub params: Vec<ParamSummary>,
}

impl Summary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Summaries of named draw columns.
pub fn summarize_columns(columns: &[(String, Vec<f64>)], level: f64) -> Result<Vec<ParamSummary>> {
    columns
        .iter()
        .map(|(name, draws)| {
            let (lower, upper) = credible_interval(draws, level)?;
            Ok(ParamSummary {
                name: name.clone(),
                mean: posterior_mean(draws),
                lower,
                upper,
                ess: effective_sample_size(draws),
            })
        })
        .collect()
}

/// Column names and draws of a chain in output order:
/// `beta_0..`, `gamma_0..`, `sigma`.
pub fn chain_columns(chain: &Chain) -> Vec<(String, Vec<f64>)> {
    let mut cols = Vec::new();
    for j in 0..chain.beta_draws.ncols() {
        cols.push((
            format!("beta_{j}"),
            chain.beta_draws.column(j).iter().copied().collect(),
        ));
    }
    for j in 0..chain.gamma_draws.ncols() {
        cols.push((
            format!("gamma_{j}"),
            chain.gamma_draws.column(j).iter().copied().collect(),
        ));
    }
    cols.push(("sigma".to_string(), chain.sigma_draws.clone()));
    cols
}

pub fn summarize_chain(chain: &Chain, level: f64) -> Result<Summary> {
    Ok(Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        tau: Some(chain.config.tau.get()),
        level,
        quantile_rule: QUANTILE_RULE.to_string(),
        draws: chain.len(),
        mh_acceptance: chain.mh.retained_rate(),
        params: summarize_columns(&chain_columns(chain), level)?,
    })
}
