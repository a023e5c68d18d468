use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ald::{ald_cdf_at_zero, QuantileLevel};
use crate::error::{Error, Result};
use crate::mcmc::{run_chain, Chain};
use crate::model::{censor_prob, invert_transform, Dataset, ModelConfig, Priors, Transform};
use crate::sim::{run_study, RepSummary, SimSpec};
use crate::stochastic::RngStream;
use crate::summary::{
    censor_profiles, chain_columns, summarize_chain, summarize_columns, Summary, QUANTILE_RULE, SUMMARY_SCHEMA_VERSION,
};

use super::input::parse_csv;
use super::output::{
    read_draws, write_curve, write_draws, write_profiles, write_rep_summaries, DrawsTable, ProfileRow,
};
use super::{FitManifest, FitRequest, PriorOverrides, SimManifest, TauOutputs, SCHEMA_VERSION, TOOL_VERSION};

pub const FIT_MANIFEST: &str = "manifest.json";
pub const SIM_MANIFEST: &str = "sim_manifest.json";
pub const REPLICATIONS: &str = "replications.csv";

/// Files written by a command, as absolute or caller-relative paths.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub manifest: PathBuf,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
    pub p: f64,
    pub f0: f64,
    pub prob: f64,
}

fn resolve_priors(o: &PriorOverrides, k: usize, m: usize) -> Result<Priors> {
    let mut p = Priors::vague(k, m);
    if let Some(v) = o.beta_mean {
        p.b0 = DVector::from_element(k, v);
    }
    if let Some(v) = o.beta_var {
        p.b0_cov = DMatrix::from_diagonal_element(k, k, v);
    }
    if let Some(v) = o.gamma_mean {
        p.g0 = DVector::from_element(m, v);
    }
    if let Some(v) = o.gamma_var {
        p.g0_cov = DMatrix::from_diagonal_element(m, m, v);
    }
    if let Some(v) = o.sigma_shape {
        p.n0 = v;
    }
    if let Some(v) = o.sigma_scale {
        p.s0 = v;
    }
    p.validate(k, m).map_err(|e| Error::Config(e.to_string()))?;
    Ok(p)
}

fn model_config(req: &FitRequest, tau: f64) -> Result<ModelConfig> {
    let mut cfg = ModelConfig::new(
        QuantileLevel::new(tau).map_err(|e| Error::Config(e.to_string()))?,
        req.variant,
    );
    cfg.link = req.link;
    cfg.iters = req.iters;
    cfg.burnin = req.burnin;
    cfg.thin = req.thin;
    cfg.seed = req.seed;
    cfg.mh_step = req.mh_step;
    cfg.warmup = req.warmup;
    Ok(cfg)
}

fn validate_request(req: &FitRequest) -> Result<()> {
    if req.taus.is_empty() {
        return Err(Error::Config("at least one quantile level is required".into()));
    }
    for &t in &req.taus {
        QuantileLevel::new(t).map_err(|e| Error::Config(e.to_string()))?;
    }
    if !(req.level > 0.0 && req.level < 1.0) {
        return Err(Error::Config(format!(
            "interval level must lie in (0, 1), got {}",
            req.level
        )));
    }
    Ok(())
}

fn tau_tag(tau: f64) -> String {
    format!("tau{tau}")
}

fn profile_rows(chain: &Chain, data: &Dataset) -> Vec<ProfileRow> {
    let beta = &chain.beta_draws;
    let draws = beta.nrows().max(1) as f64;
    censor_profiles(chain)
        .into_iter()
        .map(|p| {
            let x = data.x.row(p.obs_id);
            let q: Vec<f64> = (0..beta.nrows()).map(|r| x.dot(&beta.row(r))).collect();
            let quantile = q.iter().sum::<f64>() / draws;
            let quantile_response = match data.transform {
                Transform::Identity => None,
                t => Some(invert_transform(&q, t).iter().sum::<f64>() / draws),
            };
            ProfileRow {
                obs_id: p.obs_id + 1,
                tau: p.tau,
                prob: p.prob,
                quantile,
                quantile_response,
            }
        })
        .collect()
}

fn draws_table(chain: &Chain) -> DrawsTable {
    let (names, columns) = chain_columns(chain).into_iter().unzip();
    DrawsTable {
        tau: chain.config.tau.get(),
        iterations: chain.iterations.clone(),
        names,
        columns,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Fits every requested quantile level and writes draws, summary and
/// censoring-profile files plus a manifest into `req.out_dir`. Chain `j`
/// uses RNG stream `j` of `req.seed`.
pub fn cmd_fit(req: &FitRequest) -> Result<OutputBundle> {
    validate_request(req)?;
    let mut req = req.clone();
    req.data = fs::canonicalize(&req.data).map_err(|e| Error::Config(format!("{}: {e}", req.data.display())))?;
    let parsed = parse_csv(&req.data, &req)?;
    let data = &parsed.dataset;
    let priors = resolve_priors(&req.priors, data.k(), data.m())?;
    let configs: Vec<ModelConfig> = req.taus.iter().map(|&t| model_config(&req, t)).collect::<Result<_>>()?;
    for cfg in &configs {
        cfg.validate(data).map_err(|e| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        })?;
    }
    fs::create_dir_all(&req.out_dir)?;

    let outputs: Vec<TauOutputs> = configs
        .par_iter()
        .enumerate()
        .map(|(j, cfg)| -> Result<TauOutputs> {
            let mut rng = RngStream::new(req.seed, j as u64);
            let chain = run_chain(data, cfg, &priors, &mut rng)?;
            log::info!("tau {}: {} draws retained", cfg.tau, chain.len());
            let tag = tau_tag(cfg.tau.get());
            let out = TauOutputs {
                tau: cfg.tau.get(),
                draws: format!("draws_{tag}.csv"),
                summary: format!("summary_{tag}.json"),
                censor_profile: format!("censor_profile_{tag}.csv"),
            };
            write_draws(&req.out_dir.join(&out.draws), &draws_table(&chain))?;
            write_json(&req.out_dir.join(&out.summary), &summarize_chain(&chain, req.level)?)?;
            write_profiles(&req.out_dir.join(&out.censor_profile), &profile_rows(&chain, data))?;
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let manifest = FitManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        request: req.clone(),
        priors,
        standardization: parsed.standardization,
        outputs,
    };
    let manifest_path = req.out_dir.join(FIT_MANIFEST);
    write_json(&manifest_path, &manifest)?;
    let files = manifest
        .outputs
        .iter()
        .flat_map(|o| [&o.draws, &o.summary, &o.censor_profile])
        .map(|f| req.out_dir.join(f))
        .collect();
    Ok(OutputBundle {
        manifest: manifest_path,
        files,
    })
}

fn check_version(found: u32, path: &Path) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported schema version {found}",
            path.display()
        )));
    }
    Ok(())
}

/// Replays a fit from its manifest, optionally into another directory.
pub fn cmd_fit_manifest(manifest: &Path, out_dir: Option<&Path>) -> Result<OutputBundle> {
    let m: FitManifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
    check_version(m.schema_version, manifest)?;
    let mut req = m.request;
    if let Some(dir) = out_dir {
        req.out_dir = dir.to_path_buf();
    }
    cmd_fit(&req)
}

fn simulate(spec: &SimSpec, out_dir: &Path) -> Result<OutputBundle> {
    spec.validate()?;
    let rows: Vec<RepSummary> = run_study(spec)?;
    fs::create_dir_all(out_dir)?;
    let table = out_dir.join(REPLICATIONS);
    write_rep_summaries(&table, &rows)?;
    let manifest = out_dir.join(SIM_MANIFEST);
    write_json(
        &manifest,
        &SimManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            spec: spec.clone(),
        },
    )?;
    Ok(OutputBundle {
        manifest,
        files: vec![table],
    })
}

/// Runs the study described by a JSON spec file. Absent fields take their
/// defaults; unknown fields are rejected.
pub fn cmd_simulate(spec_path: &Path, out_dir: &Path) -> Result<OutputBundle> {
    let text = fs::read_to_string(spec_path)?;
    let spec: SimSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: invalid simulation spec: {e}", spec_path.display())))?;
    simulate(&spec, out_dir)
}

pub fn cmd_simulate_manifest(manifest: &Path, out_dir: &Path) -> Result<OutputBundle> {
    let m: SimManifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
    check_version(m.schema_version, manifest)?;
    simulate(&m.spec, out_dir)
}

/// Censoring probability over a grid of point-mass probabilities `p`, one
/// row per (tau, p) pair.
pub fn cmd_censor_curve(mu: f64, sigma: f64, taus: &[f64], p_grid: &[f64]) -> Result<Vec<CurveRow>> {
    if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(Error::Config(format!(
            "need finite mu and positive sigma, got mu={mu}, sigma={sigma}"
        )));
    }
    if let Some(p) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Config(format!("p must lie in [0, 1], got {p}")));
    }
    let mut rows = Vec::with_capacity(taus.len() * p_grid.len());
    for &t in taus {
        let tau = QuantileLevel::new(t).map_err(|e| Error::Config(e.to_string()))?;
        let f0 = ald_cdf_at_zero(mu, sigma, tau);
        rows.extend(p_grid.iter().map(|&p| CurveRow {
            mu,
            sigma,
            tau: t,
            p,
            f0,
            prob: censor_prob(p, f0),
        }));
    }
    Ok(rows)
}

pub fn write_censor_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    write_curve(path, rows)
}

/// Recomputes a summary from a draws file. The MH acceptance rate is not
/// stored with the draws and is reported as absent.
pub fn cmd_summarize(draws: &Path, level: f64) -> Result<Summary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("interval level must lie in (0, 1), got {level}")));
    }
    let table = read_draws(draws)?;
    if table.iterations.is_empty() {
        return Err(Error::EmptyFile {
            path: draws.to_path_buf(),
        });
    }
    let cols: Vec<(String, Vec<f64>)> = table.names.into_iter().zip(table.columns).collect();
    Ok(Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        tau: Some(table.tau),
        level,
        quantile_rule: QUANTILE_RULE.to_string(),
        draws: table.iterations.len(),
        mh_acceptance: None,
        params: summarize_columns(&cols, level)?,
    })
}
