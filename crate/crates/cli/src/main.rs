use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use zeroquant::cli_io::{
    cmd_censor_curve, cmd_fit, cmd_fit_manifest, cmd_simulate, cmd_simulate_manifest, cmd_summarize,
    write_censor_curve, FitRequest, PriorOverrides,
};
use zeroquant::error::{Error, Result};
use zeroquant::model::{LinkFunction, Transform, Variant};

#[derive(Parser)]
#[command(
    name = "zeroquant",
    version,
    about = "Bayesian quantile regression for non-negative responses with zeros"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one chain per quantile level and write draws, summaries and censoring profiles.
    Fit(Box<FitArgs>),
    /// Run a simulation study from a JSON spec and write one row per replication and level.
    Simulate(SimulateArgs),
    /// Tabulate the censoring probability against the point-mass probability p.
    CensorCurve(CurveArgs),
    /// Recompute a posterior summary from a draws file.
    Summarize(SummarizeArgs),
}

/// Parses the lowercase names used in manifests and config files.
fn named<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Args)]
struct FitArgs {
    /// Replay a previous run from its manifest; all model flags are ignored.
    #[arg(long, conflicts_with_all = ["data", "response"])]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    data: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    response: Option<String>,
    /// Covariates of the quantile part (intercept added automatically).
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    /// Covariates of the point-mass part (intercept added automatically).
    #[arg(long, value_delimiter = ',')]
    z: Vec<String>,
    #[arg(long, default_value = "identity", value_parser = named::<Transform>)]
    transform: Transform,
    /// Scale every covariate to mean 0 and SD 1 before fitting.
    #[arg(long)]
    standardize: bool,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    tau: Vec<f64>,
    #[arg(long, default_value = "censored_mix", value_parser = named::<Variant>)]
    variant: Variant,
    #[arg(long, default_value = "logit", value_parser = named::<LinkFunction>)]
    link: LinkFunction,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    mh_step: f64,
    /// Burn-in sweeps that treat every zero as a true zero (censored_mix only).
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    beta_mean: Option<f64>,
    #[arg(long)]
    beta_var: Option<f64>,
    #[arg(long)]
    gamma_mean: Option<f64>,
    #[arg(long)]
    gamma_var: Option<f64>,
    #[arg(long)]
    sigma_shape: Option<f64>,
    #[arg(long)]
    sigma_scale: Option<f64>,
    /// Credible level of the reported intervals, e.g. 0.95.
    #[arg(long, required_unless_present = "manifest")]
    level: Option<f64>,
    /// Output directory; with --manifest it defaults to the recorded one.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl FitArgs {
    fn request(self) -> Result<FitRequest> {
        let out_dir = self
            .out_dir
            .ok_or_else(|| Error::Config("--out-dir is required".into()))?;
        Ok(FitRequest {
            data: self.data.expect("enforced by clap"),
            response: self.response.expect("enforced by clap"),
            x_cols: self.x,
            z_cols: self.z,
            transform: self.transform,
            standardize: self.standardize,
            taus: self.tau,
            variant: self.variant,
            link: self.link,
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
            mh_step: self.mh_step,
            warmup: self.warmup,
            priors: PriorOverrides {
                beta_mean: self.beta_mean,
                beta_var: self.beta_var,
                gamma_mean: self.gamma_mean,
                gamma_var: self.gamma_var,
                sigma_shape: self.sigma_shape,
                sigma_scale: self.sigma_scale,
            },
            level: self.level.expect("enforced by clap"),
            out_dir,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulation spec; absent fields take the study defaults.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    spec: Option<PathBuf>,
    /// Replay a previous study from its sim_manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75,0.9")]
    tau: Vec<f64>,
    /// Explicit p values; overrides --p-steps.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Number of equal intervals of the default grid over [0, 1].
    #[arg(long, default_value_t = 100)]
    p_steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    draws: PathBuf,
    #[arg(long)]
    level: f64,
    /// Write the JSON summary here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => {
            let bundle = match &args.manifest {
                Some(m) => cmd_fit_manifest(m, args.out_dir.as_deref())?,
                None => cmd_fit(&args.request()?)?,
            };
            println!("{}", bundle.manifest.display());
        }
        Command::Simulate(args) => {
            let bundle = match (&args.spec, &args.manifest) {
                (_, Some(m)) => cmd_simulate_manifest(m, &args.out_dir)?,
                (Some(s), None) => cmd_simulate(s, &args.out_dir)?,
                (None, None) => unreachable!("enforced by clap"),
            };
            println!("{}", bundle.manifest.display());
        }
        Command::CensorCurve(args) => {
            let grid: Vec<f64> = if args.p.is_empty() {
                let steps = args.p_steps.max(1);
                (0..=steps).map(|i| i as f64 / steps as f64).collect()
            } else {
                args.p
            };
            let rows = cmd_censor_curve(args.mu, args.sigma, &args.tau, &grid)?;
            write_censor_curve(&args.out, &rows)?;
        }
        Command::Summarize(args) => {
            let summary = cmd_summarize(&args.draws, args.level)?;
            let text = serde_json::to_string_pretty(&summary)?;
            match args.out {
                Some(path) => fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
