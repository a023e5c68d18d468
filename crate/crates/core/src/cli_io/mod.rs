//! CSV ingestion, run manifests, output files and the command
//! implementations behind the `zeroquant` binary.

mod commands;
mod input;
mod output;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::model::{LinkFunction, Transform, Variant};

pub use commands::{
    cmd_censor_curve, cmd_fit, cmd_fit_manifest, cmd_simulate, cmd_simulate_manifest, cmd_summarize,
    write_censor_curve, CurveRow, OutputBundle, FIT_MANIFEST, REPLICATIONS, SIM_MANIFEST,
};
pub use input::{parse_csv, ColumnScaling, ParsedData};
pub use output::{
    read_curve, read_draws, read_profiles, read_rep_summaries, write_curve, write_draws, write_profiles,
    write_rep_summaries, DrawsTable, ProfileRow,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scalar prior overrides applied to every coefficient of a block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverrides {
    pub beta_mean: Option<f64>,
    pub beta_var: Option<f64>,
    pub gamma_mean: Option<f64>,
    pub gamma_var: Option<f64>,
    pub sigma_shape: Option<f64>,
    pub sigma_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub data: PathBuf,
    pub response: String,
    pub x_cols: Vec<String>,
    pub z_cols: Vec<String>,
    pub transform: Transform,
    pub standardize: bool,
    pub taus: Vec<f64>,
    pub variant: Variant,
    pub link: LinkFunction,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub mh_step: f64,
    pub warmup: Option<usize>,
    pub priors: PriorOverrides,
    /// Credible level of the reported intervals; always explicit.
    pub level: f64,
    pub out_dir: PathBuf,
}

impl FitRequest {
    /// A request with the default sampler settings (2000 sweeps, 500 burn-in).
    pub fn new(data: impl Into<PathBuf>, response: impl Into<String>, level: f64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            response: response.into(),
            x_cols: Vec::new(),
            z_cols: Vec::new(),
            transform: Transform::Identity,
            standardize: false,
            taus: vec![0.5],
            variant: Variant::CensoredMix,
            link: LinkFunction::Logit,
            iters: 2000,
            burnin: 500,
            thin: 1,
            seed: 1,
            mh_step: 0.1,
            warmup: None,
            priors: PriorOverrides::default(),
            level,
            out_dir: out_dir.into(),
        }
    }
}

/// Everything needed to replay a `fit` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub request: FitRequest,
    pub priors: crate::model::Priors,
    pub standardization: Vec<ColumnScaling>,
    pub outputs: Vec<TauOutputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauOutputs {
    pub tau: f64,
    pub draws: String,
    pub summary: String,
    pub censor_profile: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub spec: crate::sim::SimSpec,
}
