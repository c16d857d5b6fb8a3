//! Command-line front end.
//!
//! Every command is a deterministic function of its flags; all randomness is
//! derived from `--seed`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use crate::absorb::{run, AbsorbResult};
use crate::error::{Error, Result};
use crate::io::{self, EvaluationReport};
use crate::metrics::dataset_divergence;
use crate::synth::{self, ContaminationReport, Shape};
use crate::types::{AbsorbConfig, Dataset, DensityBackend};

#[derive(Debug, Parser)]
#[command(name = "absorbkit", version, about = "Outlier absorbing by density-weighted nearest-neighbor re-estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic data or contaminate an existing dataset.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Absorb outliers in a CSV dataset.
    Absorb(AbsorbArgs),
    /// Compare clean, contaminated and denoised datasets.
    Evaluate(EvaluateArgs),
    /// Generate, contaminate, absorb and evaluate in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Standard normal samples.
    Gaussian {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Samples along a curve in the plane.
    Nonlinear {
        #[arg(long, value_enum)]
        shape: CurveArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add Gaussian noise to a random subset of rows.
    Contaminate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        rate: f64,
        /// Defaults to six standard deviations along the largest-variance axis.
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// One 0/1 line per row.
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        has_header: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveArg {
    Sine,
    Moons,
}

impl From<CurveArg> for Shape {
    fn from(c: CurveArg) -> Self {
        match c {
            CurveArg::Sine => Shape::SineCurve,
            CurveArg::Moons => Shape::TwoMoons,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AlgorithmArgs {
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 50)]
    pub max_iter: usize,
    /// `gmm:<components>`, `kde`, `kde:scott` or `kde:<bandwidth>`.
    #[arg(long, default_value = "gmm:1", value_parser = parse_backend)]
    pub backend: DensityBackend,
    #[arg(long = "cov-reg", default_value_t = 1e-6)]
    pub cov_reg: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the positions after every iteration next to the report.
    #[arg(long)]
    pub snapshots: bool,
}

fn parse_backend(s: &str) -> std::result::Result<DensityBackend, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl AlgorithmArgs {
    pub fn config(&self) -> AbsorbConfig {
        AbsorbConfig {
            k: self.k,
            epsilon: self.epsilon,
            max_iterations: self.max_iter,
            density_backend: self.backend,
            cov_regularization: self.cov_reg,
            seed: self.seed,
            record_snapshots: self.snapshots,
        }
    }
}

#[derive(Debug, Args)]
pub struct AbsorbArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub has_header: bool,
    /// 0-based column holding labels; it is excluded from the data.
    #[arg(long)]
    pub label_column: Option<usize>,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub contaminated: PathBuf,
    #[arg(long)]
    pub denoised: PathBuf,
    #[arg(long)]
    pub has_header: bool,
    #[arg(long = "cov-reg", default_value_t = 1e-6)]
    pub cov_reg: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Gaussian,
    Sine,
    Moons,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_enum, default_value_t = SourceArg::Gaussian)]
    pub source: SourceArg,
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    /// Dimension of Gaussian data; curves are always 2-D.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Jitter around the curve for `sine` and `moons`.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.1)]
    pub rate: f64,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Clean data source for [`run_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Standard normal in `dim` dimensions.
    Gaussian { dim: usize },
    Curve { shape: Shape, noise_sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub source: Source,
    pub n: usize,
    pub rate: f64,
    /// `None` selects [`synth::default_noise_sigma`].
    pub noise_sigma: Option<f64>,
    pub config: AbsorbConfig,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub clean: Dataset,
    pub contaminated: Dataset,
    pub contamination: ContaminationReport,
    pub result: AbsorbResult,
    pub evaluation: EvaluationReport,
}

/// Seed of the contamination step, derived from the run seed.
pub fn contamination_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
}

pub fn generate_clean(source: Source, n: usize, seed: u64) -> Result<Dataset> {
    match source {
        Source::Gaussian { dim } => {
            synth::gen_gaussian(n, &DVector::zeros(dim), &DMatrix::identity(dim, dim), seed)
        }
        Source::Curve { shape, noise_sigma } => synth::gen_nonlinear(n, shape, noise_sigma, seed),
    }
}

/// The full evaluation protocol in memory. The clean data is drawn with
/// `config.seed`, contamination uses [`contamination_seed`].
pub fn run_pipeline(params: &PipelineParams) -> Result<PipelineOutcome> {
    let seed = params.config.seed;
    let clean = generate_clean(params.source, params.n, seed)?;
    let noise_sigma = match params.noise_sigma {
        Some(s) => s,
        None => synth::default_noise_sigma(&clean)?,
    };
    let (contaminated, contamination) = synth::contaminate(&clean, params.rate, noise_sigma, contamination_seed(seed))?;
    let result = run(&contaminated, &params.config)?;
    let reg = params.config.cov_regularization;
    let evaluation = EvaluationReport::new(
        dataset_divergence(&clean, &contaminated, reg)?,
        dataset_divergence(&clean, &result.denoised, reg)?,
    );
    Ok(PipelineOutcome { clean, contaminated, contamination, result, evaluation })
}

fn cmd_synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Gaussian { n, dim, seed, out } => {
            io::save_csv(&generate_clean(Source::Gaussian { dim }, n, seed)?, out)
        }
        SynthCommand::Nonlinear { shape, n, noise, seed, out } => {
            io::save_csv(&synth::gen_nonlinear(n, shape.into(), noise, seed)?, out)
        }
        SynthCommand::Contaminate { input, rate, noise_sigma, seed, out, mask, has_header } => {
            let (clean, _) = io::load_csv(input, has_header, None)?;
            let sigma = match noise_sigma {
                Some(s) => s,
                None => synth::default_noise_sigma(&clean)?,
            };
            let (noisy, report) = synth::contaminate(&clean, rate, sigma, seed)?;
            io::save_csv(&noisy, out)?;
            io::save_mask(&report.outlier_mask, mask)
        }
    }
}

fn cmd_absorb(args: AbsorbArgs) -> Result<()> {
    let (data, _labels) = io::load_csv(&args.input, args.has_header, args.label_column)?;
    let result = run(&data, &args.algorithm.config())?;
    io::save_csv(&result.denoised, &args.out)?;
    io::write_run_report(&result, None, None, &args.report)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (clean, _) = io::load_csv(&args.clean, args.has_header, None)?;
    let (contaminated, _) = io::load_csv(&args.contaminated, args.has_header, None)?;
    let (denoised, _) = io::load_csv(&args.denoised, args.has_header, None)?;
    let report = EvaluationReport::new(
        dataset_divergence(&clean, &contaminated, args.cov_reg)?,
        dataset_divergence(&clean, &denoised, args.cov_reg)?,
    );
    io::write_json(&report, &args.out)
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let source = match args.source {
        SourceArg::Gaussian => Source::Gaussian { dim: args.dim },
        SourceArg::Sine => Source::Curve { shape: Shape::SineCurve, noise_sigma: args.noise },
        SourceArg::Moons => Source::Curve { shape: Shape::TwoMoons, noise_sigma: args.noise },
    };
    let params = PipelineParams {
        source,
        n: args.n,
        rate: args.rate,
        noise_sigma: args.noise_sigma,
        config: args.algorithm.config(),
    };
    let outcome = run_pipeline(&params)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let dir = args.out_dir.as_path();
    io::save_csv(&outcome.clean, dir.join("clean.csv"))?;
    io::save_csv(&outcome.contaminated, dir.join("contaminated.csv"))?;
    io::save_mask(&outcome.contamination.outlier_mask, dir.join("mask.csv"))?;
    io::save_csv(&outcome.result.denoised, dir.join("denoised.csv"))?;
    io::write_run_report(
        &outcome.result,
        Some(&outcome.contamination),
        Some((outcome.evaluation.divergence_before, outcome.evaluation.divergence_after)),
        dir.join("run.json"),
    )?;
    io::write_json(&outcome.evaluation, dir.join("evaluation.json"))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(cmd) => cmd_synth(cmd),
        Command::Absorb(args) => cmd_absorb(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
